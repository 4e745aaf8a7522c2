//! In-process map-reduce engine.
//!
//! A job partitions its integer input keys into contiguous tasks, runs the
//! map function over each task on a pool of `m` worker threads, groups the
//! emissions by intermediate key behind a barrier, and then runs the reduce
//! function per key. Values reach the reducer ordered by (source input key,
//! emission order), so the output never depends on `m`.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Write as _};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

pub const KERNEL_EVALUATIONS: &str = "kernel_evaluations";
pub const ROW_PRODUCTS: &str = "matvec_row_products";
pub const DISTANCE_EVALUATIONS: &str = "distance_evaluations";

#[derive(Debug, Error)]
pub enum MapReduceError {
    #[error("worker count must be at least 1")]
    NoWorkers,

    #[error("failed to start worker pool: {0}")]
    Pool(String),

    #[error("job `{job}`: map failed on input key {key}: {message}")]
    MapFailed {
        job: String,
        key: usize,
        message: String,
    },

    #[error("job `{job}`: reduce failed on key {key}: {message}")]
    ReduceFailed {
        job: String,
        key: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, MapReduceError>;

/// Named operation counters.
pub type Counters = BTreeMap<String, u64>;

fn merge_counters(into: &mut Counters, from: &Counters) {
    for (name, v) in from {
        *into.entry(name.clone()).or_insert(0) += v;
    }
}

/// Number of tasks a job's keys are split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// `2m` tasks, two per worker.
    TwoPerWorker,
    /// `m` tasks, one per worker.
    OnePerWorker,
}

impl Granularity {
    pub fn task_count(self, workers: usize) -> usize {
        match self {
            Granularity::TwoPerWorker => 2 * workers,
            Granularity::OnePerWorker => workers,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Granularity::TwoPerWorker => "2m",
            Granularity::OnePerWorker => "m",
        }
    }
}

/// Splits `keys` into `parts` contiguous chunks whose sizes differ by at
/// most one, larger chunks first.
pub fn split_even<T: Clone>(keys: &[T], parts: usize) -> Vec<Vec<T>> {
    let parts = parts.max(1);
    let base = keys.len() / parts;
    let extra = keys.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(keys[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Map-task partition for `m` workers: `2m` contiguous task lists.
pub fn partition(keys: &[usize], workers: usize) -> Vec<Vec<usize>> {
    split_even(keys, Granularity::TwoPerWorker.task_count(workers.max(1)))
}

/// Per-task scratch handed to map and reduce functions.
#[derive(Debug, Default)]
pub struct TaskContext {
    counters: Counters,
}

impl TaskContext {
    pub fn count(&mut self, name: &str, n: u64) {
        if let Some(v) = self.counters.get_mut(name) {
            *v += n;
        } else {
            self.counters.insert(name.to_string(), n);
        }
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }
}

/// Collects `(key, value)` emissions from a map call.
pub struct Emitter<K, V> {
    pairs: Vec<(K, V)>,
    ctx: TaskContext,
}

impl<K, V> Emitter<K, V> {
    pub fn emit(&mut self, key: K, value: V) {
        self.pairs.push((key, value));
    }

    pub fn count(&mut self, name: &str, n: u64) {
        self.ctx.count(name, n);
    }
}

/// Wall clock and operation counts of one stage or job.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingReport {
    pub stage: String,
    pub workers: usize,
    pub wall_seconds: f64,
    pub counters: Counters,
    /// Counters of each map task, in task order.
    pub task_counters: Vec<Counters>,
    pub metadata: BTreeMap<String, String>,
}

impl TimingReport {
    pub fn new(stage: impl Into<String>, workers: usize) -> Self {
        TimingReport {
            stage: stage.into(),
            workers,
            ..TimingReport::default()
        }
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.counters.get(name).copied().unwrap_or(0)
    }

    pub fn count(&mut self, name: &str, n: u64) {
        *self.counters.entry(name.to_string()).or_insert(0) += n;
    }

    /// Folds another report's counters and task counters into this one.
    /// Wall clock is left alone; stages time themselves.
    pub fn absorb(&mut self, other: &TimingReport) {
        merge_counters(&mut self.counters, &other.counters);
        self.task_counters
            .extend(other.task_counters.iter().cloned());
        for (k, v) in &other.metadata {
            self.metadata.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    /// CSV rows `stage,m,wall_seconds,counter_name,counter_value`, without
    /// header. A report with no counters yields a single row with empty
    /// counter columns.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        if self.counters.is_empty() {
            let _ = writeln!(
                out,
                "{},{},{},,",
                self.stage, self.workers, self.wall_seconds
            );
        }
        for (name, v) in &self.counters {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.stage, self.workers, self.wall_seconds, name, v
            );
        }
        out
    }
}

pub const TIMING_CSV_HEADER: &str = "stage,m,wall_seconds,counter_name,counter_value";

/// A map-reduce job description.
pub struct JobSpec<M, R> {
    pub name: String,
    pub input_keys: Vec<usize>,
    pub map_fn: M,
    pub reduce_fn: R,
    pub granularity: Granularity,
}

impl<M, R> JobSpec<M, R> {
    pub fn new(name: impl Into<String>, input_keys: Vec<usize>, map_fn: M, reduce_fn: R) -> Self {
        JobSpec {
            name: name.into(),
            input_keys,
            map_fn,
            reduce_fn,
            granularity: Granularity::TwoPerWorker,
        }
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }
}

pub struct JobOutput<K, O> {
    pub output: BTreeMap<K, O>,
    pub report: TimingReport,
}

/// Worker pool of `m` long-lived threads.
pub struct Engine {
    workers: usize,
    pool: rayon::ThreadPool,
}

impl Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("workers", &self.workers)
            .finish()
    }
}

type ReduceTaskResult<K, O> = Result<(Vec<(K, O)>, Counters)>;

struct MapTaskResult<K, V> {
    pairs: Vec<(K, V)>,
    counters: Counters,
}

impl Engine {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(MapReduceError::NoWorkers);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("mr-worker-{i}"))
            .build()
            .map_err(|e| MapReduceError::Pool(e.to_string()))?;
        Ok(Engine { workers, pool })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs a full map → shuffle → reduce job.
    pub fn run_job<K, V, O, M, R>(&self, job: JobSpec<M, R>) -> Result<JobOutput<K, O>>
    where
        K: Ord + Clone + Debug + Send + Sync,
        V: Send,
        O: Send,
        M: Fn(usize, &mut Emitter<K, V>) -> std::result::Result<(), BoxError> + Sync,
        R: Fn(&K, Vec<V>, &mut TaskContext) -> std::result::Result<O, BoxError> + Sync,
    {
        let start = Instant::now();
        let tasks = split_even(&job.input_keys, job.granularity.task_count(self.workers));
        let map_fn = &job.map_fn;
        let name = job.name.as_str();

        let mapped: Vec<std::result::Result<MapTaskResult<K, V>, MapReduceError>> =
            self.pool.install(|| {
                tasks
                    .par_iter()
                    .map(|task| {
                        let mut em = Emitter {
                            pairs: Vec::new(),
                            ctx: TaskContext::default(),
                        };
                        for &key in task {
                            map_fn(key, &mut em).map_err(|e| MapReduceError::MapFailed {
                                job: name.to_string(),
                                key,
                                message: e.to_string(),
                            })?;
                        }
                        Ok(MapTaskResult {
                            pairs: em.pairs,
                            counters: em.ctx.counters,
                        })
                    })
                    .collect()
            });

        let mut report = TimingReport::new(name, self.workers);
        report
            .metadata
            .insert("granularity".into(), job.granularity.label().into());

        // shuffle barrier: tasks are contiguous ascending key ranges, so
        // concatenating in task order preserves (source key, emission) order
        let mut groups: BTreeMap<K, Vec<V>> = BTreeMap::new();
        for result in mapped {
            let task = result?;
            merge_counters(&mut report.counters, &task.counters);
            report.task_counters.push(task.counters);
            for (k, v) in task.pairs {
                groups.entry(k).or_default().push(v);
            }
        }

        let grouped: Vec<(K, Vec<V>)> = groups.into_iter().collect();
        let reduce_tasks = chunk_owned(grouped, job.granularity.task_count(self.workers));
        let reduce_fn = &job.reduce_fn;

        let reduced: Vec<ReduceTaskResult<K, O>> = self.pool.install(|| {
            reduce_tasks
                .into_par_iter()
                .map(|task| {
                    let mut ctx = TaskContext::default();
                    let mut out = Vec::with_capacity(task.len());
                    for (k, vs) in task {
                        let o = reduce_fn(&k, vs, &mut ctx).map_err(|e| {
                            MapReduceError::ReduceFailed {
                                job: name.to_string(),
                                key: format!("{k:?}"),
                                message: e.to_string(),
                            }
                        })?;
                        out.push((k, o));
                    }
                    Ok((out, ctx.counters))
                })
                .collect()
        });

        let mut output = BTreeMap::new();
        for result in reduced {
            let (pairs, counters) = result?;
            merge_counters(&mut report.counters, &counters);
            output.extend(pairs);
        }
        report.wall_seconds = start.elapsed().as_secs_f64();
        Ok(JobOutput { output, report })
    }

    /// Map-only job: one output per input key, returned in input order.
    pub fn run_map<T, F>(
        &self,
        name: &str,
        keys: &[usize],
        granularity: Granularity,
        map_fn: F,
    ) -> Result<(Vec<T>, TimingReport)>
    where
        T: Send,
        F: Fn(usize, &mut TaskContext) -> std::result::Result<T, BoxError> + Sync,
    {
        let start = Instant::now();
        let tasks = split_even(keys, granularity.task_count(self.workers));
        let results: Vec<std::result::Result<(Vec<T>, Counters), MapReduceError>> =
            self.pool.install(|| {
                tasks
                    .par_iter()
                    .map(|task| {
                        let mut ctx = TaskContext::default();
                        let mut out = Vec::with_capacity(task.len());
                        for &key in task {
                            out.push(map_fn(key, &mut ctx).map_err(|e| {
                                MapReduceError::MapFailed {
                                    job: name.to_string(),
                                    key,
                                    message: e.to_string(),
                                }
                            })?);
                        }
                        Ok((out, ctx.counters))
                    })
                    .collect()
            });

        let mut report = TimingReport::new(name, self.workers);
        report
            .metadata
            .insert("granularity".into(), granularity.label().into());
        let mut outputs = Vec::with_capacity(keys.len());
        for result in results {
            let (out, counters) = result?;
            merge_counters(&mut report.counters, &counters);
            report.task_counters.push(counters);
            outputs.extend(out);
        }
        report.wall_seconds = start.elapsed().as_secs_f64();
        Ok((outputs, report))
    }
}

fn chunk_owned<T>(items: Vec<T>, parts: usize) -> Vec<Vec<T>> {
    let parts = parts.max(1);
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut iter = items.into_iter();
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(iter.by_ref().take(len).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity_job(
        keys: Vec<usize>,
    ) -> JobSpec<
        impl Fn(usize, &mut Emitter<usize, u64>) -> std::result::Result<(), BoxError> + Sync,
        impl Fn(&usize, Vec<u64>, &mut TaskContext) -> std::result::Result<u64, BoxError> + Sync,
    > {
        JobSpec::new(
            "parity",
            keys,
            |k: usize, em: &mut Emitter<usize, u64>| {
                em.emit(k % 2, 1);
                em.count("emits", 1);
                Ok(())
            },
            |_k: &usize, vs: Vec<u64>, _ctx: &mut TaskContext| Ok(vs.iter().sum()),
        )
    }

    #[test]
    fn partition_sizes() {
        let keys: Vec<usize> = (0..10).collect();
        let tasks = partition(&keys, 2);
        let sizes: Vec<usize> = tasks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert_eq!(tasks.concat(), keys);

        let sizes: Vec<usize> = partition(&[0, 1, 2, 3], 1).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2]);

        let tasks = partition(&[], 3);
        assert_eq!(tasks.len(), 6);
        assert!(tasks.iter().all(Vec::is_empty));
    }

    #[test]
    fn parity_sum() {
        let engine = Engine::new(3).unwrap();
        let out = engine.run_job(parity_job((0..6).collect())).unwrap();
        assert_eq!(out.output, BTreeMap::from([(0, 3), (1, 3)]));
        assert_eq!(out.report.counter("emits"), 6);
        assert_eq!(out.report.task_counters.len(), 6);
    }

    #[test]
    fn empty_job() {
        let engine = Engine::new(2).unwrap();
        let out = engine.run_job(parity_job(vec![])).unwrap();
        assert!(out.output.is_empty());
        assert!(out.report.counters.values().all(|&v| v == 0));
    }

    #[test]
    fn values_arrive_in_source_order() {
        for m in [1, 2, 4, 8] {
            let engine = Engine::new(m).unwrap();
            let job = JobSpec::new(
                "order",
                (0..50).collect(),
                |k: usize, em: &mut Emitter<u8, (usize, u8)>| {
                    em.emit(0, (k, 0));
                    em.emit(0, (k, 1));
                    Ok(())
                },
                |_: &u8, vs: Vec<(usize, u8)>, _: &mut TaskContext| Ok(vs),
            );
            let out = engine.run_job(job).unwrap();
            let expected: Vec<(usize, u8)> = (0..50).flat_map(|k| [(k, 0u8), (k, 1u8)]).collect();
            assert_eq!(out.output[&0], expected);
        }
    }

    #[test]
    fn map_failure_reports_key() {
        let engine = Engine::new(2).unwrap();
        let job = JobSpec::new(
            "fail",
            (0..10).collect(),
            |k: usize, em: &mut Emitter<usize, ()>| {
                if k == 7 {
                    return Err("boom".into());
                }
                em.emit(k, ());
                Ok(())
            },
            |_: &usize, _: Vec<()>, _: &mut TaskContext| Ok(()),
        );
        match engine.run_job(job) {
            Err(MapReduceError::MapFailed { key, message, .. }) => {
                assert_eq!(key, 7);
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected {:?}", other.map(|o| o.output)),
        }
    }

    #[test]
    fn reduce_failure_reports_key() {
        let engine = Engine::new(2).unwrap();
        let job = JobSpec::new(
            "fail",
            (0..4).collect(),
            |k: usize, em: &mut Emitter<usize, ()>| {
                em.emit(k, ());
                Ok(())
            },
            |k: &usize, _: Vec<()>, _: &mut TaskContext| {
                if *k == 2 {
                    Err("bad".into())
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(
            engine.run_job(job),
            Err(MapReduceError::ReduceFailed { ref key, .. }) if key == "2"
        ));
    }

    #[test]
    fn run_map_keeps_key_order() {
        let engine = Engine::new(4).unwrap();
        let keys: Vec<usize> = (0..37).collect();
        let (out, report) = engine
            .run_map("sq", &keys, Granularity::OnePerWorker, |k, ctx| {
                ctx.count("calls", 1);
                Ok(k * k)
            })
            .unwrap();
        assert_eq!(out, keys.iter().map(|k| k * k).collect::<Vec<_>>());
        assert_eq!(report.counter("calls"), 37);
        assert_eq!(report.task_counters.len(), 4);
        assert_eq!(report.metadata["granularity"], "m");
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(matches!(Engine::new(0), Err(MapReduceError::NoWorkers)));
    }

    #[test]
    fn csv_rows() {
        let mut r = TimingReport::new("similarity", 4);
        r.wall_seconds = 0.5;
        r.count(KERNEL_EVALUATIONS, 10);
        assert_eq!(r.to_csv_rows(), "similarity,4,0.5,kernel_evaluations,10\n");
        assert_eq!(TimingReport::new("x", 1).to_csv_rows(), "x,1,0,,\n");
    }
}
