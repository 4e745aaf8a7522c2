//! Similarity matrix construction.
//!
//! Point mode evaluates a Gaussian kernel over the upper triangle only
//! (diagonal included) and mirrors it. Map keys pair row `i` with row
//! `n - 1 - i` so every paired task evaluates exactly `n + 1` kernels.
//! Graph mode takes edge weights directly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataio::{Graph, PointSet};
use crate::kvstore::{KvError, KvStore, SparseRow, Table};
use crate::mapreduce::{
    BoxError, Emitter, Engine, Granularity, JobSpec, MapReduceError, TaskContext, TimingReport,
    KERNEL_EVALUATIONS,
};

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Store(#[from] KvError),

    #[error(transparent)]
    Job(#[from] MapReduceError),
}

pub type Result<T> = std::result::Result<T, SimilarityError>;

/// Neighbor retention after the kernel pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sparsify {
    Dense,
    /// Keep each row's `t` largest off-diagonal entries, then symmetrize by
    /// union.
    Knn(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub sigma: f64,
    pub sparsify: Sparsify,
}

impl SimilarityParams {
    pub fn new(sigma: f64, sparsify: Sparsify) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(SimilarityError::Domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if sparsify == Sparsify::Knn(0) {
            return Err(SimilarityError::Domain("knn t must be at least 1".into()));
        }
        Ok(SimilarityParams { sigma, sparsify })
    }
}

/// `ceil(log2 n) + 1`.
pub fn default_knn_t(n: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < n.max(1) {
        bits += 1;
    }
    bits + 1
}

/// Median Euclidean distance over up to 1000 seeded random pairs of
/// distinct points. Falls back to 1.0 when undefined or zero.
pub fn default_sigma(points: &PointSet, seed: u64) -> f64 {
    let n = points.len();
    if n < 2 {
        return 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dists: Vec<f64> = (0..1000)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            squared_distance(points.point(i), points.point(j)).sqrt()
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len().is_multiple_of(2) {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median > 0.0 && median.is_finite() {
        median
    } else {
        1.0
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-‖a - b‖² / (2σ²))`.
pub fn gaussian_similarity(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch(a.len(), b.len()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(SimilarityError::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(kernel(a, b, sigma))
}

#[inline]
fn kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * sigma * sigma)).exp()
}

/// Rows (1-based) handled by the map call for 1-based key `i`.
pub fn pair_indices(i: usize, n: usize) -> Result<Vec<usize>> {
    if i == 0 || i > n.div_ceil(2) {
        return Err(SimilarityError::Domain(format!(
            "pair index {i} outside 1..={} for n = {n}",
            n.div_ceil(2)
        )));
    }
    let other = n - i + 1;
    Ok(if other == i { vec![i] } else { vec![i, other] })
}

/// Kernel evaluations performed by 0-based pair key `p`.
pub fn pair_workload(p: usize, n: usize) -> usize {
    let other = n - 1 - p;
    if other == p {
        n - p
    } else {
        (n - p) + (n - other)
    }
}

/// Symmetric sparse matrix whose rows live in a store table.
#[derive(Debug, Clone)]
pub struct SparseSymmetricMatrix {
    n: usize,
    table: Arc<Table>,
}

impl SparseSymmetricMatrix {
    /// Wraps an existing table holding rows `0..n`.
    pub fn from_table(table: Arc<Table>, n: usize) -> Self {
        SparseSymmetricMatrix { n, table }
    }

    /// Writes the symmetric matrix given by `(i, j, w)` triplets into
    /// `table`. Each unordered pair may appear once; both orientations are
    /// stored.
    pub fn from_triplets(
        store: &KvStore,
        table: &str,
        n: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(SimilarityError::Domain(format!(
                    "entry ({i}, {j}) out of range"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(SimilarityError::Domain(format!(
                    "entry ({i}, {j}) = {w} is invalid"
                )));
            }
            rows[i].push((j, w));
            if i != j {
                rows[j].push((i, w));
            }
        }
        let handle = store.table(table)?;
        for (i, entries) in rows.into_iter().enumerate() {
            handle.put(i, SparseRow::from_unsorted(entries)?);
        }
        Ok(SparseSymmetricMatrix { n, table: handle })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &Arc<Table> {
        &self.table
    }

    pub fn row(&self, i: usize) -> Arc<SparseRow> {
        self.table.get(i).unwrap_or_default()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j).unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        (0..self.n).map(|i| self.row(i).len()).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_dense(self.n)).collect()
    }

    /// Exact symmetry of the stored pattern and values.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .entries()
                .iter()
                .all(|&(j, v)| j < self.n && self.row(j).get(i) == Some(v))
        })
    }
}

/// Per-call outcome of [`build_similarity`].
#[derive(Debug)]
pub struct SimilarityBuild {
    pub matrix: SparseSymmetricMatrix,
    pub report: TimingReport,
    /// Kernel evaluations per 0-based pair key.
    pub pair_workloads: Vec<u64>,
}

const UPPER_SUFFIX: &str = ".upper";

/// Gaussian similarity over a point set, written to `table`.
///
/// Runs a map job over the `ceil(n/2)` pair keys (two tasks per worker)
/// that stores each row's upper-triangular part, then a second job that
/// mirrors rows and applies the retention rule. The diagonal is stored as
/// 1.
pub fn build_similarity(
    points: &PointSet,
    params: &SimilarityParams,
    engine: &Engine,
    store: &KvStore,
    table: &str,
) -> Result<SimilarityBuild> {
    let n = points.len();
    if n == 0 {
        return Err(SimilarityError::Domain("point set is empty".into()));
    }
    let sigma = params.sigma;
    let upper_name = format!("{table}{UPPER_SUFFIX}");
    store.drop_table(&upper_name);
    let upper = store.table(&upper_name)?;

    let pair_keys: Vec<usize> = (0..n.div_ceil(2)).collect();
    let (pair_workloads, mut report) = engine.run_map(
        "similarity",
        &pair_keys,
        Granularity::TwoPerWorker,
        |p, ctx| -> std::result::Result<u64, BoxError> {
            let other = n - 1 - p;
            let rows: &[usize] = if other == p {
                &[p][..]
            } else {
                &[p, other][..]
            };
            let mut evaluated = 0u64;
            for &i in rows {
                let xi = points.point(i);
                let entries: Vec<(usize, f64)> = (i..n)
                    .map(|j| (j, kernel(xi, points.point(j), sigma)))
                    .filter(|&(_, s)| s != 0.0)
                    .collect();
                evaluated += (n - i) as u64;
                upper.put(i, SparseRow::new(entries)?);
            }
            ctx.count(KERNEL_EVALUATIONS, evaluated);
            Ok(evaluated)
        },
    )?;
    report.metadata.insert("diagonal".into(), "ones".into());
    report.metadata.insert(
        "sparsify".into(),
        match params.sparsify {
            Sparsify::Dense => "dense".into(),
            Sparsify::Knn(t) => format!("knn:{t}"),
        },
    );

    let target = store.table(table)?;
    let mirror = mirror_rows(&upper, n, params.sparsify, engine, &target)?;
    report.absorb(&mirror);
    store.drop_table(&upper_name);

    Ok(SimilarityBuild {
        matrix: SparseSymmetricMatrix::from_table(target, n),
        report,
        pair_workloads,
    })
}

/// Upper-triangular rows read out of the table once, so the mirror pass
/// does its n² lookups without taking shard locks.
struct UpperRows(Vec<Option<Arc<SparseRow>>>);

impl UpperRows {
    fn load(upper: &Table, n: usize) -> Self {
        let mut rows = vec![None; n];
        for (r, row) in upper.scan(0..n) {
            rows[r] = Some(row);
        }
        UpperRows(rows)
    }

    fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.0[i.min(j)].as_ref().and_then(|u| u.get(i.max(j)))
    }

    /// Full row `r`.
    fn full_row(&self, r: usize) -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        for j in 0..r {
            if let Some(v) = self.value(j, r) {
                row.push((j, v));
            }
        }
        if let Some(own) = &self.0[r] {
            row.extend_from_slice(own.entries());
        }
        row
    }
}

fn mirror_rows(
    upper: &Arc<Table>,
    n: usize,
    sparsify: Sparsify,
    engine: &Engine,
    target: &Arc<Table>,
) -> Result<TimingReport> {
    let upper = &UpperRows::load(upper, n);
    let rows: Vec<usize> = (0..n).collect();
    match sparsify {
        Sparsify::Dense => {
            let (_, report) = engine.run_map(
                "similarity_mirror",
                &rows,
                Granularity::TwoPerWorker,
                |r, _ctx| -> std::result::Result<(), BoxError> {
                    target.put(r, SparseRow::new(upper.full_row(r))?);
                    Ok(())
                },
            )?;
            Ok(report)
        }
        Sparsify::Knn(t) => {
            let job = JobSpec::new(
                "similarity_knn",
                rows,
                |r: usize, em: &mut Emitter<usize, usize>| -> std::result::Result<(), BoxError> {
                    let mut off: Vec<(usize, f64)> = upper
                        .full_row(r)
                        .into_iter()
                        .filter(|&(c, _)| c != r)
                        .collect();
                    // largest first, lower column on ties
                    let order = |a: &(usize, f64), b: &(usize, f64)| {
                        b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
                    };
                    if off.len() > t {
                        off.select_nth_unstable_by(t, order);
                        off.truncate(t);
                    }
                    off.sort_by(order);
                    em.emit(r, r);
                    for &(c, _) in off.iter().take(t) {
                        em.emit(r, c);
                        em.emit(c, r);
                    }
                    Ok(())
                },
                |&r: &usize,
                 mut cols: Vec<usize>,
                 _ctx: &mut TaskContext|
                 -> std::result::Result<(), BoxError> {
                    cols.sort_unstable();
                    cols.dedup();
                    let entries: Vec<(usize, f64)> = cols
                        .into_iter()
                        .filter_map(|c| upper.value(r, c).map(|v| (c, v)))
                        .collect();
                    target.put(r, SparseRow::new(entries)?);
                    Ok(())
                },
            );
            Ok(engine.run_job(job)?.report)
        }
    }
}

/// Similarity matrix taken directly from graph edge weights (zero
/// diagonal, zero-weight edges omitted).
pub fn graph_similarity(
    graph: &Graph,
    store: &KvStore,
    table: &str,
) -> Result<SparseSymmetricMatrix> {
    let triplets: Vec<(usize, usize, f64)> = graph.edges().filter(|&(_, _, w)| w != 0.0).collect();
    store.drop_table(table);
    SparseSymmetricMatrix::from_triplets(store, table, graph.vertex_count(), &triplets)
}
