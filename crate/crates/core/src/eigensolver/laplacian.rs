//! Degree vector, the normalized Laplacian `I - D^{-1/2} S D^{-1/2}` as a
//! matrix-free operator, and cut/volume metrics.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{EigenError, Result};
use crate::kvstore::SparseRow;
use crate::mapreduce::{BoxError, Engine, Granularity, TimingReport, ROW_PRODUCTS};
use crate::similarity::SparseSymmetricMatrix;

/// Rows per map key in the distributed product.
pub const ROW_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(Vec<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `d_i = Σ_j S_ij`, summed over stored entries in column order.
pub fn degree_vector(s: &SparseSymmetricMatrix) -> DegreeVector {
    DegreeVector(
        (0..s.n())
            .map(|i| s.row(i).entries().iter().map(|&(_, v)| v).sum())
            .collect(),
    )
}

/// Anything that can multiply a vector; Lanczos only needs this.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>>;
}

/// Dense symmetric operator, mostly for tests and small problems.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: Vec<Vec<f64>>,
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.len()
    }

    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .matrix
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    rows: Vec<Arc<SparseRow>>,
    degrees: DegreeVector,
    inv_sqrt: Vec<f64>,
}

impl NormalizedLaplacian {
    /// Fails on the first vertex with zero degree.
    pub fn new(s: &SparseSymmetricMatrix) -> Result<Self> {
        let degrees = degree_vector(s);
        if let Some(i) = degrees.0.iter().position(|&d| d <= 0.0) {
            return Err(EigenError::IsolatedVertex(i));
        }
        let inv_sqrt = degrees.0.iter().map(|d| 1.0 / d.sqrt()).collect();
        Ok(NormalizedLaplacian {
            rows: (0..s.n()).map(|i| s.row(i)).collect(),
            degrees,
            inv_sqrt,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn degrees(&self) -> &DegreeVector {
        &self.degrees
    }

    fn row_value(&self, i: usize, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(j, s) in self.rows[i].entries() {
            acc += s * self.inv_sqrt[j] * v[j];
        }
        v[i] - self.inv_sqrt[i] * acc
    }

    /// Sequential product, one row at a time.
    pub fn apply_local(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.row_value(i, v)).collect()
    }

    /// Row-parallel product on the engine: map keys are blocks of
    /// [`ROW_BLOCK`] rows, one task per worker. Adds `n` to the row-product
    /// counter.
    pub fn apply(&self, v: &[f64], engine: &Engine) -> Result<(Vec<f64>, TimingReport)> {
        let n = self.n();
        if v.len() != n {
            return Err(EigenError::Domain(format!(
                "vector has length {}, expected {n}",
                v.len()
            )));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(EigenError::Domain(format!(
                "vector has non-finite entry {x}"
            )));
        }
        let blocks: Vec<usize> = (0..n.div_ceil(ROW_BLOCK)).collect();
        let (parts, report) = engine.run_map(
            "laplacian_apply",
            &blocks,
            Granularity::OnePerWorker,
            |b, ctx| -> std::result::Result<Vec<f64>, BoxError> {
                let rows = b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n);
                ctx.count(ROW_PRODUCTS, rows.len() as u64);
                Ok(rows.map(|i| self.row_value(i, v)).collect())
            },
        )?;
        Ok((parts.concat(), report))
    }

    /// Dense `I - D^{-1/2} S D^{-1/2}`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            row[i] = 1.0;
            for &(j, s) in self.rows[i].entries() {
                row[j] -= self.inv_sqrt[i] * s * self.inv_sqrt[j];
            }
        }
        out
    }
}

/// Adapter running each product on the engine and accumulating counters.
pub struct DistributedLaplacian<'a> {
    pub laplacian: &'a NormalizedLaplacian,
    pub engine: &'a Engine,
    pub report: TimingReport,
    pub applications: u64,
}

impl<'a> DistributedLaplacian<'a> {
    pub fn new(laplacian: &'a NormalizedLaplacian, engine: &'a Engine) -> Self {
        DistributedLaplacian {
            laplacian,
            engine,
            report: TimingReport::new("laplacian_apply", engine.workers()),
            applications: 0,
        }
    }
}

impl LinearOperator for DistributedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.laplacian.n()
    }

    fn apply(&mut self, v: &[f64]) -> Result<Vec<f64>> {
        let (out, report) = self.laplacian.apply(v, self.engine)?;
        self.report.absorb(&report);
        self.applications += 1;
        Ok(out)
    }
}

/// `W(A, B) = Σ_{i∈A, j∈B} S_ij` and `vol(A) = Σ_{i∈A} d_i`.
pub fn cut_and_volume(
    s: &SparseSymmetricMatrix,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
) -> Result<(f64, f64)> {
    let n = s.n();
    if let Some(&v) = a.iter().chain(b).find(|&&v| v >= n) {
        return Err(EigenError::Domain(format!(
            "vertex {v} out of range for n = {n}"
        )));
    }
    let mut cut = 0.0;
    let mut vol = 0.0;
    for &i in a {
        for &(j, w) in s.row(i).entries() {
            vol += w;
            if b.contains(&j) {
                cut += w;
            }
        }
    }
    Ok((cut, vol))
}

/// Connected components of the stored pattern, labelled by first vertex
/// order.
pub fn connected_components(s: &SparseSymmetricMatrix) -> Vec<usize> {
    let n = s.n();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, _) in s.row(u).entries() {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kvstore::KvStore;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(store: &KvStore) -> SparseSymmetricMatrix {
        SparseSymmetricMatrix::from_triplets(store, "P", 3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn degrees() {
        let store = KvStore::new();
        assert_eq!(degree_vector(&path(&store)).as_slice(), &[1.0, 2.0, 1.0]);
        let empty = SparseSymmetricMatrix::from_triplets(&store, "E", 3, &[]).unwrap();
        assert_eq!(degree_vector(&empty).as_slice(), &[0.0, 0.0, 0.0]);
        let one = SparseSymmetricMatrix::from_triplets(&store, "O", 1, &[(0, 0, 1.0)]).unwrap();
        assert_eq!(degree_vector(&one).as_slice(), &[1.0]);
    }

    #[test]
    fn zero_degree_rejected() {
        let store = KvStore::new();
        let empty = SparseSymmetricMatrix::from_triplets(&store, "E", 2, &[]).unwrap();
        assert!(matches!(
            NormalizedLaplacian::new(&empty),
            Err(EigenError::IsolatedVertex(0))
        ));
        let s = SparseSymmetricMatrix::from_triplets(&store, "F", 3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            NormalizedLaplacian::new(&s),
            Err(EigenError::IsolatedVertex(2))
        ));
    }

    #[test]
    fn two_vertex_null_vector() {
        let store = KvStore::new();
        let s = SparseSymmetricMatrix::from_triplets(&store, "S", 2, &[(0, 1, 1.0)]).unwrap();
        let lap = NormalizedLaplacian::new(&s).unwrap();
        let engine = Engine::new(2).unwrap();
        let (out, report) = lap.apply(&[1.0, 1.0], &engine).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        assert_eq!(report.counter(ROW_PRODUCTS), 2);
    }

    #[test]
    fn matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let store = KvStore::new();
        let mut trip = Vec::new();
        for i in 0..8 {
            for j in i..8 {
                if rng.random::<f64>() < 0.6 || j == i + 1 {
                    trip.push((i, j, rng.random_range(0.1..2.0)));
                }
            }
        }
        let s = SparseSymmetricMatrix::from_triplets(&store, "S", 8, &trip).unwrap();
        // oracle: dense S, D, then I - D^-1/2 S D^-1/2 by explicit loops
        let dense = s.to_dense();
        let d: Vec<f64> = dense.iter().map(|r| r.iter().sum()).collect();
        let lap = NormalizedLaplacian::new(&s).unwrap();
        let engine = Engine::new(3).unwrap();
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (got, _) = lap.apply(&v, &engine).unwrap();
        for i in 0..8 {
            let mut want = v[i];
            for j in 0..8 {
                want -= dense[i][j] / (d[i].sqrt() * d[j].sqrt()) * v[j];
            }
            assert!((got[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_volume() {
        let store = KvStore::new();
        let s = path(&store);
        let all: BTreeSet<usize> = (0..3).collect();
        let (w, vol) = cut_and_volume(&s, &all, &all).unwrap();
        assert_eq!(w, 4.0); // 2 × total edge weight
        assert_eq!(vol, 4.0);
        let none = BTreeSet::new();
        assert_eq!(cut_and_volume(&s, &none, &all).unwrap(), (0.0, 0.0));
        let (w, vol) = cut_and_volume(&s, &BTreeSet::from([0]), &BTreeSet::from([1])).unwrap();
        assert_eq!((w, vol), (1.0, 1.0));
        assert!(cut_and_volume(&s, &BTreeSet::from([3]), &none).is_err());
    }

    #[test]
    fn components() {
        let store = KvStore::new();
        let s = SparseSymmetricMatrix::from_triplets(&store, "S", 5, &[(0, 1, 1.0), (3, 4, 1.0)])
            .unwrap();
        assert_eq!(connected_components(&s), vec![0, 0, 1, 2, 2]);
    }
}
