//! Lloyd's K-means as repeated map/reduce jobs.
//!
//! Each iteration maps fixed-size point blocks to per-cluster partial sums
//! (nearest center, ties to the lower index), reduces the partials per
//! cluster into new centers and writes them to the `centers` table. Block
//! boundaries do not depend on the worker count and partials reach the
//! reducer in block order, so centers are bit-identical for every `m`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataio::{ClusterAssignment, DataError};
use crate::kvstore::{KvError, SparseRow, Table};
use crate::mapreduce::{
    BoxError, Emitter, Engine, Granularity, JobSpec, MapReduceError, TaskContext, TimingReport,
    DISTANCE_EVALUATIONS,
};
use crate::similarity::squared_distance;

pub const CENTERS_TABLE: &str = "centers";
/// Row of the centers table holding the iteration count.
pub const ITERATION_ROW: usize = usize::MAX;
/// Points per map key.
pub const POINT_BLOCK: usize = 64;

pub const ITERATIONS: &str = "kmeans_iterations";
pub const EMPTY_RESEEDS: &str = "empty_cluster_reseeds";

#[derive(Debug, Error)]
pub enum KMeansError {
    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Job(#[from] MapReduceError),

    #[error(transparent)]
    Store(#[from] KvError),

    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, KMeansError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub centers: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl Centroids {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Stores one row per center plus the iteration row.
    pub fn write_to(&self, table: &Table) -> Result<()> {
        for (i, c) in self.centers.iter().enumerate() {
            table.put(i, SparseRow::from_dense(c)?);
        }
        table.put(
            ITERATION_ROW,
            SparseRow::from_dense(&[self.iteration as f64])?,
        );
        Ok(())
    }

    pub fn read_from(table: &Table, k: usize, dim: usize) -> Result<Self> {
        let centers = (0..k)
            .map(|i| {
                table
                    .get(i)
                    .map(|r| r.to_dense(dim))
                    .ok_or_else(|| KMeansError::Domain(format!("center {i} missing from table")))
            })
            .collect::<Result<Vec<_>>>()?;
        let iteration = table
            .get(ITERATION_ROW)
            .map_or(0, |r| r.get(0).unwrap_or(0.0) as usize);
        Ok(Centroids { centers, iteration })
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Coordinate sums and point count of one cluster's members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    sums: Vec<CompensatedSum>,
    pub count: u64,
}

impl ClusterStats {
    pub fn new(dim: usize) -> Self {
        ClusterStats {
            sums: vec![CompensatedSum::default(); dim],
            count: 0,
        }
    }

    pub fn from_point(y: &[f64]) -> Self {
        let mut s = ClusterStats::new(y.len());
        s.add_point(y);
        s
    }

    pub fn add_point(&mut self, y: &[f64]) {
        for (acc, &x) in self.sums.iter_mut().zip(y) {
            acc.add(x);
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ClusterStats) {
        for (acc, o) in self.sums.iter_mut().zip(&other.sums) {
            acc.add(o.sum);
            acc.add(o.carry);
        }
        self.count += other.count;
    }

    pub fn sums(&self) -> Vec<f64> {
        self.sums.iter().map(CompensatedSum::value).collect()
    }
}

/// Nearest center by squared distance; the first of equal distances wins.
pub fn assign_map(y: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(y, c);
        if d < best.1 || best.0 == usize::MAX {
            best = (i, d);
        }
    }
    best
}

/// Mean of all contributions, or `None` for an empty cluster.
pub fn update_reduce(contributions: &[ClusterStats]) -> Option<Vec<f64>> {
    let dim = contributions.first()?.sums.len();
    let mut total = ClusterStats::new(dim);
    for c in contributions {
        total.merge(c);
    }
    if total.count == 0 {
        return None;
    }
    let n = total.count as f64;
    Some(total.sums().into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    /// k-means++ seeding from the run seed.
    PlusPlus,
    FirstK,
    Indices(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct KMeansOptions {
    pub k: usize,
    pub max_iter: usize,
    pub eps: f64,
    pub seed: u64,
    pub init: KMeansInit,
}

impl KMeansOptions {
    pub fn new(k: usize) -> Self {
        KMeansOptions {
            k,
            max_iter: 100,
            eps: 1e-9,
            seed: 0,
            init: KMeansInit::PlusPlus,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub centroids: Centroids,
    pub iterations: usize,
    /// Objective after each assignment pass.
    pub wcss_history: Vec<f64>,
    pub report: TimingReport,
}

fn validate(points: &[Vec<f64>], opts: &KMeansOptions) -> Result<usize> {
    let n = points.len();
    if opts.k == 0 {
        return Err(KMeansError::Domain("k must be at least 1".into()));
    }
    if n < opts.k {
        return Err(KMeansError::Domain(format!(
            "{n} points cannot form {} clusters",
            opts.k
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(KMeansError::Domain(
            "points have differing dimensions".into(),
        ));
    }
    if !(opts.eps.is_finite() && opts.eps >= 0.0) {
        return Err(KMeansError::Domain(format!("invalid eps {}", opts.eps)));
    }
    Ok(dim)
}

pub fn initial_centers(
    points: &[Vec<f64>],
    k: usize,
    init: &KMeansInit,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    match init {
        KMeansInit::FirstK => Ok(points[..k].to_vec()),
        KMeansInit::Indices(idx) => {
            if idx.len() != k {
                return Err(KMeansError::Domain(format!(
                    "{} initial indices given for k = {k}",
                    idx.len()
                )));
            }
            idx.iter()
                .map(|&i| {
                    points.get(i).cloned().ok_or_else(|| {
                        KMeansError::Domain(format!("initial index {i} out of range"))
                    })
                })
                .collect()
        }
        KMeansInit::PlusPlus => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = vec![rng.random_range(0..n)];
            let mut d2: Vec<f64> = points
                .iter()
                .map(|p| squared_distance(p, &points[chosen[0]]))
                .collect();
            while chosen.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut pick = n - 1;
                    for (i, &d) in d2.iter().enumerate() {
                        if d > 0.0 && target < d {
                            pick = i;
                            break;
                        }
                        target -= d;
                    }
                    while d2[pick] == 0.0 {
                        pick -= 1;
                    }
                    pick
                } else {
                    (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
                };
                chosen.push(next);
                for (d, p) in d2.iter_mut().zip(points) {
                    *d = d.min(squared_distance(p, &points[next]));
                }
            }
            Ok(chosen.into_iter().map(|i| points[i].clone()).collect())
        }
    }
}

/// Moves each empty cluster's center onto the point farthest from its own
/// center, never reusing a point within one update.
fn reseed_empty(new_centers: &mut [Option<Vec<f64>>], points: &[Vec<f64>], dists: &[f64]) -> u64 {
    let mut taken = vec![false; points.len()];
    let mut reseeded = 0;
    for slot in new_centers.iter_mut().filter(|c| c.is_none()) {
        let mut best: Option<usize> = None;
        for (i, &d) in dists.iter().enumerate() {
            if !taken[i] && best.is_none_or(|b| d > dists[b]) {
                best = Some(i);
            }
        }
        let i = best.unwrap_or(0);
        taken[i] = true;
        *slot = Some(points[i].clone());
        reseeded += 1;
    }
    reseeded
}

fn displacement(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| squared_distance(x, y).sqrt())
        .fold(0.0, f64::max)
}

/// `(point, cluster, squared distance)` for the points of one block.
type Members = Vec<(usize, usize, f64)>;

struct AssignPass {
    labels: Vec<usize>,
    dists: Vec<f64>,
    stats: Vec<Option<Vec<f64>>>,
    report: TimingReport,
}

fn assign_and_reduce(
    points: &[Vec<f64>],
    centers: &[Vec<f64>],
    engine: &Engine,
    table: &Table,
) -> Result<AssignPass> {
    let n = points.len();
    let k = centers.len();
    let dim = points[0].len();
    let blocks: Vec<usize> = (0..n.div_ceil(POINT_BLOCK)).collect();
    let job = JobSpec::new(
        "kmeans",
        blocks,
        |b: usize,
         em: &mut Emitter<usize, (Members, ClusterStats)>|
         -> std::result::Result<(), BoxError> {
            let range = b * POINT_BLOCK..((b + 1) * POINT_BLOCK).min(n);
            let mut partial: Vec<ClusterStats> = vec![ClusterStats::new(dim); k];
            let mut members: Vec<Members> = vec![Vec::new(); k];
            em.count(DISTANCE_EVALUATIONS, (range.len() * k) as u64);
            for i in range {
                let (c, d) = assign_map(&points[i], centers);
                partial[c].add_point(&points[i]);
                members[c].push((i, c, d));
            }
            for (c, (stats, m)) in partial.into_iter().zip(members).enumerate() {
                if stats.count > 0 {
                    em.emit(c, (m, stats));
                }
            }
            Ok(())
        },
        |&c: &usize,
         parts: Vec<(Members, ClusterStats)>,
         _ctx: &mut TaskContext|
         -> std::result::Result<(Members, Option<Vec<f64>>), BoxError> {
            let stats: Vec<ClusterStats> = parts.iter().map(|p| p.1.clone()).collect();
            let center = update_reduce(&stats);
            if let Some(center) = &center {
                table.put(c, SparseRow::from_dense(center)?);
            }
            Ok((parts.into_iter().flat_map(|p| p.0).collect(), center))
        },
    )
    .with_granularity(Granularity::OnePerWorker);
    let out = engine.run_job(job)?;

    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut stats = vec![None; k];
    for (c, (members, center)) in out.output {
        for (i, label, d) in members {
            labels[i] = label;
            dists[i] = d;
        }
        stats[c] = center;
    }
    Ok(AssignPass {
        labels,
        dists,
        stats,
        report: out.report,
    })
}

/// Map/reduce K-means over the rows of `points`; centers are kept in
/// `table` between iterations.
pub fn kmeans(
    points: &[Vec<f64>],
    opts: &KMeansOptions,
    engine: &Engine,
    table: &Arc<Table>,
) -> Result<KMeansResult> {
    let dim = validate(points, opts)?;
    let k = opts.k;
    let mut centers = initial_centers(points, k, &opts.init, opts.seed)?;
    Centroids {
        centers: centers.clone(),
        iteration: 0,
    }
    .write_to(table)?;

    let mut report = TimingReport::new("kmeans", engine.workers());
    let mut pass = assign_and_reduce(points, &centers, engine, table)?;
    report.absorb(&pass.report);
    let mut wcss_history = vec![pass.dists.iter().sum::<f64>()];
    let mut iterations = 0;
    let mut reseeds = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut next = pass.stats;
        reseeds += reseed_empty(&mut next, points, &pass.dists);
        let next: Vec<Vec<f64>> = next
            .into_iter()
            .map(|c| c.unwrap_or_else(|| vec![0.0; dim]))
            .collect();
        let moved = displacement(&centers, &next);
        centers = next;
        Centroids {
            centers: centers.clone(),
            iteration: iterations,
        }
        .write_to(table)?;

        pass = assign_and_reduce(points, &centers, engine, table)?;
        report.absorb(&pass.report);
        wcss_history.push(pass.dists.iter().sum());
        if moved < opts.eps {
            break;
        }
    }
    // the last pass rewrote nonempty centers as its own means; restore the
    // centers the final labels were computed against
    let centroids = Centroids {
        centers,
        iteration: iterations,
    };
    centroids.write_to(table)?;

    report.count(ITERATIONS, iterations as u64);
    report.count(EMPTY_RESEEDS, reseeds);
    Ok(KMeansResult {
        assignment: ClusterAssignment::new(pass.labels, k)?,
        centroids,
        iterations,
        wcss_history,
        report,
    })
}

/// Single-threaded Lloyd iteration with the same initialization, tie and
/// empty-cluster rules as [`kmeans`], written without the engine or store.
pub fn kmeans_oracle(
    points: &[Vec<f64>],
    opts: &KMeansOptions,
) -> Result<(ClusterAssignment, Centroids, usize)> {
    let dim = validate(points, opts)?;
    let k = opts.k;
    let mut centers = initial_centers(points, k, &opts.init, opts.seed)?;

    let assign = |centers: &[Vec<f64>]| -> (Vec<usize>, Vec<f64>) {
        let mut labels = Vec::with_capacity(points.len());
        let mut dists = Vec::with_capacity(points.len());
        for p in points {
            let mut best = 0;
            let mut best_d = squared_distance(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = squared_distance(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            labels.push(best);
            dists.push(best_d);
        }
        (labels, dists)
    };

    let (mut labels, mut dists) = assign(&centers);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
            counts[l] += 1;
        }
        let mut next: Vec<Option<Vec<f64>>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|x| x / c as f64).collect()))
            .collect();
        reseed_empty(&mut next, points, &dists);
        let next: Vec<Vec<f64>> = next.into_iter().map(Option::unwrap_or_default).collect();
        let moved = displacement(&centers, &next);
        centers = next;
        (labels, dists) = assign(&centers);
        if moved < opts.eps {
            break;
        }
    }
    Ok((
        ClusterAssignment::new(labels, k)?,
        Centroids {
            centers,
            iteration: iterations,
        },
        iterations,
    ))
}

/// Within-cluster sum of squared distances.
pub fn wcss(points: &[Vec<f64>], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centers[l]))
        .sum()
}
