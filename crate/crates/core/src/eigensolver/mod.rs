//! Spectral stage: normalized Laplacian, Lanczos with tridiagonal QR, and
//! the k smallest eigenvectors that form the embedding.
//!
//! A single Lanczos run from one start vector sees at most one direction of
//! each repeated eigenvalue, and a graph with K components has eigenvalue 0
//! with multiplicity K. [`smallest_k_eigenvectors`] therefore locks
//! converged Ritz pairs and reruns Lanczos in their orthogonal complement
//! until a run finds nothing below the current k-th value.

mod jacobi;
mod lanczos;
mod laplacian;
mod tridiag;

use thiserror::Error;

use crate::kvstore::KvError;
use crate::mapreduce::{Engine, MapReduceError, TimingReport};

pub use jacobi::{jacobi_eigen_oracle, DenseEigen};
pub use lanczos::{
    lanczos, lanczos_deflated, lanczos_from, LanczosOptions, LanczosResult, BREAKDOWN,
};
pub use laplacian::{
    connected_components, cut_and_volume, degree_vector, DegreeVector, DenseOperator,
    DistributedLaplacian, LinearOperator, NormalizedLaplacian, ROW_BLOCK,
};
pub use tridiag::{tridiagonal_eigen, TridiagonalEigen, TridiagonalMatrix};

use lanczos::{dot, norm};

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("{0}")]
    Domain(String),

    #[error("vertex {0} has zero degree; raise the neighbor count or sigma")]
    IsolatedVertex(usize),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error(transparent)]
    Job(#[from] MapReduceError),

    #[error(transparent)]
    Store(#[from] KvError),
}

pub type Result<T> = std::result::Result<T, EigenError>;

pub const LANCZOS_STEPS: &str = "lanczos_steps";
pub const RESIDUAL_CHECKS: &str = "residual_checks";
pub const LANCZOS_ROUNDS: &str = "lanczos_rounds";
pub const ZERO_ROWS: &str = "zero_rows_replaced";

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Steps per Lanczos run; defaults to `max(2k + 20, 40)`, capped at `n`.
    pub lanczos_steps: Option<usize>,
    pub reorthogonalize: bool,
    /// Bound on `‖L z - λ z‖` for every retained pair.
    pub tolerance: f64,
    /// Runs that lock nothing before giving up. Each such run doubles the
    /// step count for the next one.
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            lanczos_steps: None,
            reorthogonalize: true,
            tolerance: 1e-6,
            max_restarts: 3,
        }
    }
}

pub fn default_lanczos_steps(k: usize, n: usize) -> usize {
    (2 * k + 20).max(40).min(n)
}

/// `z` holds the k smallest eigenvectors as columns (stored row-major,
/// `z[i]` is point `i`); `y` is `z` with unit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub eigenvalues: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub zero_rows: usize,
}

impl SpectralEmbedding {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `c` of `z`.
    pub fn eigenvector(&self, c: usize) -> Vec<f64> {
        self.z.iter().map(|row| row[c]).collect()
    }
}

/// Rows scaled to unit length; all-zero rows become `e_1`.
pub fn normalize_rows(z: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let mut zero = 0;
    let y = z
        .iter()
        .map(|row| {
            let nr = norm(row);
            if nr > f64::MIN_POSITIVE {
                row.iter().map(|x| x / nr).collect()
            } else {
                zero += 1;
                let mut e = vec![0.0; row.len()];
                if let Some(first) = e.first_mut() {
                    *first = 1.0;
                }
                e
            }
        })
        .collect();
    (y, zero)
}

#[derive(Debug)]
pub struct EigenRun {
    pub embedding: SpectralEmbedding,
    pub report: TimingReport,
    /// Worst residual among the retained pairs.
    pub max_residual: f64,
}

fn round_seed(seed: u64, round: u64) -> u64 {
    seed.wrapping_add(round.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The k smallest eigenpairs of `laplacian`, with every product running on
/// `engine`.
pub fn smallest_k_eigenvectors(
    laplacian: &NormalizedLaplacian,
    k: usize,
    engine: &Engine,
    seed: u64,
    options: &EigenOptions,
) -> Result<EigenRun> {
    let n = laplacian.n();
    if k == 0 || k > n {
        return Err(EigenError::Domain(format!("k must be in 1..={n}, got {k}")));
    }
    let initial_steps = options
        .lanczos_steps
        .unwrap_or_else(|| default_lanczos_steps(k, n))
        .clamp(1, n);
    let mut steps_cap = initial_steps;
    let lanczos_opts = LanczosOptions {
        reorthogonalize: options.reorthogonalize,
    };
    let mut op = DistributedLaplacian::new(laplacian, engine);

    let mut locked: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut locked_vectors: Vec<Vec<f64>> = Vec::new();
    let mut failures = 0;
    let mut rounds = 0u64;
    let mut steps_taken = 0u64;
    let mut residual_checks = 0u64;
    let mut worst_unconverged = 0.0f64;

    while locked.len() < n {
        let threshold = if locked.len() >= k {
            let mut values: Vec<f64> = locked.iter().map(|l| l.0).collect();
            values.sort_by(f64::total_cmp);
            values[k - 1]
        } else {
            f64::INFINITY
        };

        let steps = steps_cap.min(n - locked.len());
        let run = lanczos_deflated(
            &mut op,
            steps,
            round_seed(seed, rounds),
            &lanczos_opts,
            &locked_vectors,
        )?;
        rounds += 1;
        steps_taken += run.basis.len() as u64;
        let ritz = tridiagonal_eigen(&run.tridiagonal)?;

        let mut newly = 0;
        for (theta, coeffs) in ritz.values.iter().zip(&ritz.vectors) {
            if *theta >= threshold || newly >= k {
                break;
            }
            let mut z = vec![0.0; n];
            for (c, v) in coeffs.iter().zip(&run.basis) {
                for (zi, vi) in z.iter_mut().zip(v) {
                    *zi += c * vi;
                }
            }
            let nz = norm(&z);
            z.iter_mut().for_each(|x| *x /= nz);
            let lz = op.apply(&z)?;
            residual_checks += 1;
            let residual = lz
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual > options.tolerance {
                worst_unconverged = worst_unconverged.max(residual);
                break;
            }
            locked_vectors.push(z.clone());
            locked.push((*theta, z, residual));
            newly += 1;
        }

        if newly == 0 {
            let smallest = ritz.values.first().copied().unwrap_or(f64::INFINITY);
            if locked.len() >= k && smallest >= threshold {
                break;
            }
            failures += 1;
            // a stalled run gets a longer Krylov space next time
            steps_cap = (2 * steps_cap).min(n);
            if failures > options.max_restarts {
                return Err(EigenError::Convergence(format!(
                    "{} of {k} eigenpairs converged after {rounds} Lanczos runs; worst residual {worst_unconverged:.3e}",
                    locked.len().min(k)
                )));
            }
        }
    }

    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked[a].0.total_cmp(&locked[b].0).then(a.cmp(&b)));
    order.truncate(k);

    let eigenvalues: Vec<f64> = order.iter().map(|&i| locked[i].0).collect();
    let max_residual = order.iter().map(|&i| locked[i].2).fold(0.0, f64::max);
    let z: Vec<Vec<f64>> = (0..n)
        .map(|row| order.iter().map(|&i| locked[i].1[row]).collect())
        .collect();
    let (y, zero_rows) = normalize_rows(&z);

    let mut report = TimingReport::new("eigen", engine.workers());
    report.absorb(&op.report);
    report.count(LANCZOS_STEPS, steps_taken);
    report.count(RESIDUAL_CHECKS, residual_checks);
    report.count(LANCZOS_ROUNDS, rounds);
    report.count(ZERO_ROWS, zero_rows as u64);
    report
        .metadata
        .insert("lanczos_steps_per_run".into(), initial_steps.to_string());

    Ok(EigenRun {
        embedding: SpectralEmbedding {
            eigenvalues,
            z,
            y,
            zero_rows,
        },
        report,
        max_residual,
    })
}

/// Largest `|⟨u_i, u_j⟩ - δ_ij|` over a set of vectors.
pub fn orthonormality_error(vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kvstore::KvStore;
    use crate::mapreduce::ROW_PRODUCTS;
    use crate::similarity::SparseSymmetricMatrix;

    fn laplacian(edges: &[(usize, usize, f64)], n: usize) -> NormalizedLaplacian {
        let store = KvStore::new();
        let s = SparseSymmetricMatrix::from_triplets(&store, "S", n, edges).unwrap();
        NormalizedLaplacian::new(&s).unwrap()
    }

    #[test]
    fn components_give_zero_eigenvalues() {
        // triangle + path of 3 + single edge
        let edges = [
            (0, 1, 1.0),
            (1, 2, 2.0),
            (0, 2, 0.5),
            (3, 4, 1.0),
            (4, 5, 1.0),
            (6, 7, 3.0),
        ];
        let lap = laplacian(&edges, 8);
        let engine = Engine::new(2).unwrap();
        let run = smallest_k_eigenvectors(&lap, 4, &engine, 1, &EigenOptions::default()).unwrap();
        let ev = &run.embedding.eigenvalues;
        assert!(ev[..3].iter().all(|x| x.abs() < 1e-8), "{ev:?}");
        assert!(ev[3] > 1e-3);
        let cols: Vec<Vec<f64>> = (0..4).map(|c| run.embedding.eigenvector(c)).collect();
        assert!(orthonormality_error(&cols) < 1e-6);
    }

    #[test]
    fn connected_graph_single_zero() {
        let edges: Vec<_> = (0..9).map(|i| (i, i + 1, 1.0 + i as f64 * 0.1)).collect();
        let lap = laplacian(&edges, 10);
        let engine = Engine::new(1).unwrap();
        let run = smallest_k_eigenvectors(&lap, 3, &engine, 5, &EigenOptions::default()).unwrap();
        let zeros = run
            .embedding
            .eigenvalues
            .iter()
            .filter(|x| x.abs() < 1e-8)
            .count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn full_spectrum_matches_oracle() {
        let edges = [
            (0, 1, 1.0),
            (1, 2, 0.3),
            (2, 3, 2.0),
            (3, 0, 0.7),
            (4, 5, 1.1),
            (5, 6, 0.9),
            (6, 7, 1.4),
            (7, 4, 0.2),
            (1, 5, 0.05),
        ];
        let lap = laplacian(&edges, 8);
        let engine = Engine::new(2).unwrap();
        let run = smallest_k_eigenvectors(&lap, 8, &engine, 2, &EigenOptions::default()).unwrap();
        let oracle = jacobi_eigen_oracle(&lap.to_dense()).unwrap();
        for (a, b) in run.embedding.eigenvalues.iter().zip(&oracle.values) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn row_product_accounting() {
        let edges: Vec<_> = (0..29).map(|i| (i, i + 1, 1.0)).collect();
        let lap = laplacian(&edges, 30);
        let engine = Engine::new(3).unwrap();
        let run = smallest_k_eigenvectors(&lap, 2, &engine, 0, &EigenOptions::default()).unwrap();
        let r = &run.report;
        assert_eq!(
            r.counter(ROW_PRODUCTS),
            30 * (r.counter(LANCZOS_STEPS) + r.counter(RESIDUAL_CHECKS))
        );
    }

    #[test]
    fn k_out_of_range() {
        let lap = laplacian(&[(0, 1, 1.0)], 2);
        let engine = Engine::new(1).unwrap();
        assert!(smallest_k_eigenvectors(&lap, 0, &engine, 0, &EigenOptions::default()).is_err());
        assert!(smallest_k_eigenvectors(&lap, 3, &engine, 0, &EigenOptions::default()).is_err());
    }

    #[test]
    fn zero_rows_become_unit() {
        let (y, zero) = normalize_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]);
        assert_eq!(zero, 1);
        assert_eq!(y, vec![vec![0.6, 0.8], vec![1.0, 0.0]]);
    }
}
