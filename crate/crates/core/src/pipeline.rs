//! End-to-end driver: input → similarity → Laplacian → eigenvectors →
//! row normalization → K-means, with timing and counter reports and a
//! worker-count benchmark.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use thiserror::Error;

use crate::dataio::{
    parse_points, parse_topology, write_assignments, write_id_map, ClusterAssignment, DataError,
    Graph, PointSet,
};
use crate::eigensolver::{smallest_k_eigenvectors, EigenError, EigenOptions, NormalizedLaplacian};
use crate::kmeans::{kmeans, KMeansError, KMeansInit, KMeansOptions, CENTERS_TABLE};
use crate::kvstore::{KvError, KvStore, SparseRow};
use crate::mapreduce::{Counters, Engine, MapReduceError, TimingReport};
use crate::similarity::{
    build_similarity, default_knn_t, default_sigma, graph_similarity, SimilarityError,
    SimilarityParams, Sparsify,
};

pub const SIMILARITY_TABLE: &str = "S";
pub const EMBEDDING_TABLE: &str = "Z";

pub const STAGE_SIMILARITY: &str = "similarity";
pub const STAGE_LAPLACIAN: &str = "laplacian";
pub const STAGE_EIGEN: &str = "eigen";
pub const STAGE_KMEANS: &str = "kmeans";
pub const STAGE_TOTAL: &str = "total";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(#[from] DataError),

    #[error("similarity stage: {0}")]
    Similarity(#[from] SimilarityError),

    #[error("eigen stage: {0}")]
    Eigen(#[from] EigenError),

    #[error("kmeans stage: {0}")]
    KMeans(#[from] KMeansError),

    #[error("engine: {0}")]
    Engine(#[from] MapReduceError),

    #[error("store: {0}")]
    Store(#[from] KvError),

    #[error("output: {0}")]
    Output(#[from] io::Error),

    #[error("benchmark: counter {counter} of stage {stage} is {got} at m = {m}, but {want} at m = {base_m}")]
    WorkNotConserved {
        stage: String,
        counter: String,
        m: usize,
        got: u64,
        base_m: usize,
        want: u64,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Point,
    Graph,
}

impl FromStr for InputMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(InputMode::Point),
            "graph" => Ok(InputMode::Graph),
            other => Err(PipelineError::Config(format!(
                "mode must be point or graph, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::Point => "point",
            InputMode::Graph => "graph",
        })
    }
}

/// Parses `kmeans++`, `first-k` or `indices=i,j,...`.
pub fn parse_init(s: &str) -> Result<KMeansInit> {
    match s {
        "kmeans++" => Ok(KMeansInit::PlusPlus),
        "first-k" => Ok(KMeansInit::FirstK),
        _ => {
            let list = s.strip_prefix("indices=").ok_or_else(|| {
                PipelineError::Config(format!(
                    "init must be kmeans++, first-k or indices=..., got {s:?}"
                ))
            })?;
            list.split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| PipelineError::Config(format!("bad init index {x:?}")))
                })
                .collect::<Result<Vec<usize>>>()
                .map(KMeansInit::Indices)
        }
    }
}

pub fn format_init(init: &KMeansInit) -> String {
    match init {
        KMeansInit::PlusPlus => "kmeans++".into(),
        KMeansInit::FirstK => "first-k".into(),
        KMeansInit::Indices(idx) => format!(
            "indices={}",
            idx.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ),
    }
}

/// Every tunable of a run. The file form is flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub mode: InputMode,
    pub k: usize,
    /// Kernel width; `None` picks the median pairwise distance.
    pub sigma: Option<f64>,
    /// Neighbors kept per row; `None` picks `ceil(log2 n) + 1`.
    pub knn_t: Option<usize>,
    /// Keep the full kernel matrix instead of the kNN graph.
    pub dense: bool,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub max_iter: usize,
    pub eps: f64,
    pub lanczos_steps: Option<usize>,
    pub reorthogonalize: bool,
    pub init: KMeansInit,
    /// Write snapshots of the S, Z and centers tables.
    pub persist_tables: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            mode: InputMode::Point,
            k: 2,
            sigma: None,
            knn_t: None,
            dense: false,
            workers: 1,
            seed: 0,
            out: PathBuf::from("out"),
            max_iter: 100,
            eps: 1e-9,
            lanczos_steps: None,
            reorthogonalize: true,
            init: KMeansInit::PlusPlus,
            persist_tables: true,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "input",
    "mode",
    "k",
    "sigma",
    "knn_t",
    "dense",
    "workers",
    "seed",
    "out",
    "max_iter",
    "eps",
    "lanczos_steps",
    "reorthogonalize",
    "init",
    "persist_tables",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn fmt_auto<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

impl PipelineConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "input" => self.input = PathBuf::from(value),
            "mode" => self.mode = value.parse()?,
            "k" => self.k = parse_value(key, value)?,
            "sigma" => self.sigma = parse_auto(key, value)?,
            "knn_t" => self.knn_t = parse_auto(key, value)?,
            "dense" => self.dense = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "eps" => self.eps = parse_value(key, value)?,
            "lanczos_steps" => self.lanczos_steps = parse_auto(key, value)?,
            "reorthogonalize" => self.reorthogonalize = parse_value(key, value)?,
            "init" => self.init = parse_init(value)?,
            "persist_tables" => self.persist_tables = parse_value(key, value)?,
            other => return Err(PipelineError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines over the current values. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_file_str(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value", i + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file_str(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_file_str(text)?;
        Ok(config)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let value = match *key {
                "input" => self.input.display().to_string(),
                "mode" => self.mode.to_string(),
                "k" => self.k.to_string(),
                "sigma" => fmt_auto(&self.sigma),
                "knn_t" => fmt_auto(&self.knn_t),
                "dense" => self.dense.to_string(),
                "workers" => self.workers.to_string(),
                "seed" => self.seed.to_string(),
                "out" => self.out.display().to_string(),
                "max_iter" => self.max_iter.to_string(),
                "eps" => self.eps.to_string(),
                "lanczos_steps" => fmt_auto(&self.lanczos_steps),
                "reorthogonalize" => self.reorthogonalize.to_string(),
                "init" => format_init(&self.init),
                _ => self.persist_tables.to_string(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    /// Range checks that do not need the input.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("sigma must be positive and finite, got {s}"));
            }
        }
        if self.knn_t == Some(0) {
            return bad("knn_t must be at least 1".into());
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if self.lanczos_steps == Some(0) {
            return bad("lanczos_steps must be at least 1".into());
        }
        if self.mode == InputMode::Graph
            && (self.sigma.is_some() || self.knn_t.is_some() || self.dense)
        {
            return bad("sigma, knn_t and dense apply to point mode only".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineInput {
    Points(PointSet),
    Graph(Graph),
}

impl PipelineInput {
    pub fn len(&self) -> usize {
        match self {
            PipelineInput::Points(p) => p.len(),
            PipelineInput::Graph(g) => g.vertex_count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_input(path: &Path, mode: InputMode) -> Result<PipelineInput> {
    let text = fs::read_to_string(path).map_err(|e| {
        PipelineError::Input(DataError::Domain(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })?;
    Ok(match mode {
        InputMode::Point => PipelineInput::Points(parse_points(&text)?),
        InputMode::Graph => PipelineInput::Graph(parse_topology(&text)?),
    })
}

/// Everything a run produced, before anything is written.
#[derive(Debug)]
pub struct PipelineRun {
    pub assignment: ClusterAssignment,
    pub eigenvalues: Vec<f64>,
    /// One report per stage plus `total`, in pipeline order.
    pub reports: Vec<TimingReport>,
    pub store: KvStore,
    pub max_residual: f64,
    pub kmeans_iterations: usize,
}

impl PipelineRun {
    pub fn report(&self, stage: &str) -> Option<&TimingReport> {
        self.reports.iter().find(|r| r.stage == stage)
    }
}

fn stage_report(stage: &str, workers: usize, start: Instant, inner: &TimingReport) -> TimingReport {
    let mut r = TimingReport::new(stage, workers);
    r.absorb(inner);
    r.wall_seconds = start.elapsed().as_secs_f64();
    r
}

/// Runs all stages on an in-memory input.
pub fn execute(config: &PipelineConfig, input: &PipelineInput) -> Result<PipelineRun> {
    config.validate()?;
    let n = input.len();
    if config.k > n {
        return Err(PipelineError::Config(format!(
            "k = {} exceeds the {n} input items",
            config.k
        )));
    }
    let m = config.workers;
    let engine = Engine::new(m)?;
    let store = KvStore::new();
    let total_start = Instant::now();
    let mut reports = Vec::new();

    let t = Instant::now();
    let s = match input {
        PipelineInput::Points(points) => {
            let sigma = config
                .sigma
                .unwrap_or_else(|| default_sigma(points, config.seed));
            let sparsify = if config.dense {
                Sparsify::Dense
            } else {
                Sparsify::Knn(config.knn_t.unwrap_or_else(|| default_knn_t(n)))
            };
            info!("similarity: n = {n}, sigma = {sigma}, {sparsify:?}");
            let params = SimilarityParams::new(sigma, sparsify)?;
            let build = build_similarity(points, &params, &engine, &store, SIMILARITY_TABLE)?;
            let mut r = stage_report(STAGE_SIMILARITY, m, t, &build.report);
            r.metadata.insert("sigma".into(), sigma.to_string());
            reports.push(r);
            build.matrix
        }
        PipelineInput::Graph(graph) => {
            let s = graph_similarity(graph, &store, SIMILARITY_TABLE)?;
            reports.push(stage_report(
                STAGE_SIMILARITY,
                m,
                t,
                &TimingReport::default(),
            ));
            s
        }
    };

    let t = Instant::now();
    let laplacian = NormalizedLaplacian::new(&s)?;
    reports.push(stage_report(
        STAGE_LAPLACIAN,
        m,
        t,
        &TimingReport::default(),
    ));

    let t = Instant::now();
    let eigen_opts = EigenOptions {
        lanczos_steps: config.lanczos_steps,
        reorthogonalize: config.reorthogonalize,
        ..EigenOptions::default()
    };
    let eig = smallest_k_eigenvectors(&laplacian, config.k, &engine, config.seed, &eigen_opts)?;
    info!(
        "eigen: lambda = {:?}, max residual {:.2e}",
        eig.embedding.eigenvalues, eig.max_residual
    );
    let z_table = store.table(EMBEDDING_TABLE)?;
    for (i, row) in eig.embedding.z.iter().enumerate() {
        z_table.put(i, SparseRow::from_dense(row)?);
    }
    reports.push(stage_report(STAGE_EIGEN, m, t, &eig.report));

    let t = Instant::now();
    let km_opts = KMeansOptions {
        k: config.k,
        max_iter: config.max_iter,
        eps: config.eps,
        seed: config.seed,
        init: config.init.clone(),
    };
    let centers = store.table(CENTERS_TABLE)?;
    let km = kmeans(&eig.embedding.y, &km_opts, &engine, &centers)?;
    info!("kmeans: {} iterations", km.iterations);
    reports.push(stage_report(STAGE_KMEANS, m, t, &km.report));

    let mut total = TimingReport::new(STAGE_TOTAL, m);
    for r in &reports {
        total.absorb(r);
    }
    total.task_counters.clear();
    total.metadata.clear();
    total.wall_seconds = total_start.elapsed().as_secs_f64();
    reports.push(total);

    Ok(PipelineRun {
        assignment: km.assignment,
        eigenvalues: eig.embedding.eigenvalues,
        reports,
        store,
        max_residual: eig.max_residual,
        kmeans_iterations: km.iterations,
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub const TIMING_HEADER: &str = "stage,m,run,wall_seconds";
pub const COUNTERS_HEADER: &str = "stage,m,counter,value";

fn timing_rows(out: &mut String, reports: &[TimingReport], run: usize) {
    for r in reports {
        let _ = writeln!(out, "{},{},{run},{}", r.stage, r.workers, r.wall_seconds);
    }
}

fn counter_rows(out: &mut String, reports: &[TimingReport]) {
    for r in reports {
        for (name, v) in &r.counters {
            let _ = writeln!(out, "{},{},{name},{v}", r.stage, r.workers);
        }
    }
}

/// Writes `assignments.tsv`, `lambda.csv`, `timing.csv`, `counters.csv`,
/// `id_map.tsv` for remapped graphs and, when enabled, the table snapshots.
pub fn write_outputs(
    config: &PipelineConfig,
    input: &PipelineInput,
    run: &PipelineRun,
) -> Result<()> {
    let dir = &config.out;
    fs::create_dir_all(dir)?;

    let mut f = create(&dir.join("assignments.tsv"))?;
    write_assignments(&run.assignment, &mut f)?;
    f.flush()?;

    let mut lambda = String::from("index,lambda\n");
    for (i, l) in run.eigenvalues.iter().enumerate() {
        let _ = writeln!(lambda, "{i},{l}");
    }
    fs::write(dir.join("lambda.csv"), lambda)?;

    let mut timing = format!("{TIMING_HEADER}\n");
    timing_rows(&mut timing, &run.reports, 0);
    fs::write(dir.join("timing.csv"), timing)?;

    let mut counters = format!("{COUNTERS_HEADER}\n");
    counter_rows(&mut counters, &run.reports);
    fs::write(dir.join("counters.csv"), counters)?;

    if let PipelineInput::Graph(g) = input {
        if g.is_remapped() {
            let mut f = create(&dir.join("id_map.tsv"))?;
            write_id_map(g, &mut f)?;
            f.flush()?;
        }
    }

    if config.persist_tables {
        for table in [SIMILARITY_TABLE, EMBEDDING_TABLE, CENTERS_TABLE] {
            run.store
                .save_table(table, &dir.join(format!("{table}.tbl")))?;
        }
    }
    Ok(())
}

/// Loads the input named in `config`, runs every stage and writes the
/// outputs. `k > n` fails before any stage runs.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let input = load_input(&config.input, config.mode)?;
    let run = execute(config, &input)?;
    write_outputs(config, &input, &run)?;
    Ok(run)
}

/// Median wall time and counters of one (stage, m) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub stage: String,
    pub workers: usize,
    pub wall_seconds: f64,
    pub counters: Counters,
    /// `T(1) / T(m)` for this stage.
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct SpeedupReport {
    pub rows: Vec<SpeedupRow>,
    /// Every individual run, `(stage, m, run, seconds)`.
    pub runs: Vec<(String, usize, usize, f64)>,
    pub logical_cores: usize,
}

pub const BENCH_STAGES: &[&str] = &[STAGE_SIMILARITY, STAGE_EIGEN, STAGE_KMEANS, STAGE_TOTAL];

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    }
}

impl SpeedupReport {
    pub fn row(&self, stage: &str, workers: usize) -> Option<&SpeedupRow> {
        self.rows
            .iter()
            .find(|r| r.stage == stage && r.workers == workers)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,m,median_wall_seconds,speedup\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.stage, r.workers, r.wall_seconds, r.speedup
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = format!("{TIMING_HEADER}\n");
        for (stage, m, run, secs) in &self.runs {
            let _ = writeln!(out, "{stage},{m},{run},{secs}");
        }
        out
    }

    pub fn counters_csv(&self) -> String {
        let mut out = format!("{COUNTERS_HEADER}\n");
        for r in &self.rows {
            for (name, v) in &r.counters {
                let _ = writeln!(out, "{},{},{name},{v}", r.stage, r.workers);
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!("host logical cores: {}\n", self.logical_cores);
        for stage in BENCH_STAGES {
            let cells: Vec<String> = self
                .rows
                .iter()
                .filter(|r| r.stage == *stage)
                .map(|r| format!("m={} {:.4}s ({:.2}x)", r.workers, r.wall_seconds, r.speedup))
                .collect();
            let _ = writeln!(out, "{stage}: {}", cells.join(", "));
        }
        let beyond: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.stage == STAGE_TOTAL && r.workers > self.logical_cores)
            .map(|r| r.workers)
            .collect();
        if !beyond.is_empty() {
            let _ = writeln!(
                out,
                "worker counts {beyond:?} exceed the host's {} logical cores; expect saturation there",
                self.logical_cores
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("speedup.csv"), self.to_csv())?;
        fs::write(dir.join("timing.csv"), self.timing_csv())?;
        fs::write(dir.join("counters.csv"), self.counters_csv())?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

/// Runs the pipeline `repeats` times per worker count on the same input
/// and seed, and reports per-stage medians. Fails if any op counter
/// differs between worker counts.
pub fn benchmark_speedup(
    config: &PipelineConfig,
    input: &PipelineInput,
    worker_counts: &[usize],
    repeats: usize,
) -> Result<SpeedupReport> {
    if !worker_counts.contains(&1) {
        return Err(PipelineError::Config("worker counts must include 1".into()));
    }
    if repeats == 0 {
        return Err(PipelineError::Config("repeats must be at least 1".into()));
    }
    let mut counts = worker_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();

    let mut runs = Vec::new();
    let mut cells: BTreeMap<(usize, usize), (Vec<f64>, Counters)> = BTreeMap::new();
    for &m in &counts {
        let cfg = PipelineConfig {
            workers: m,
            ..config.clone()
        };
        for run in 0..repeats {
            let result = execute(&cfg, input)?;
            for (si, stage) in BENCH_STAGES.iter().enumerate() {
                let r = result.report(stage).expect("every stage reports");
                runs.push((stage.to_string(), m, run, r.wall_seconds));
                let cell = cells
                    .entry((si, m))
                    .or_insert_with(|| (Vec::new(), r.counters.clone()));
                cell.0.push(r.wall_seconds);
            }
        }
    }

    let mut rows = Vec::new();
    for (si, stage) in BENCH_STAGES.iter().enumerate() {
        let (base_times, base_counters) = cells.get_mut(&(si, 1)).expect("m = 1 was run");
        let base = median(base_times);
        let base_counters = base_counters.clone();
        for &m in &counts {
            let (times, c) = cells.get_mut(&(si, m)).expect("cell was run");
            for (name, &want) in &base_counters {
                let got = c.get(name).copied().unwrap_or(0);
                if got != want {
                    return Err(PipelineError::WorkNotConserved {
                        stage: stage.to_string(),
                        counter: name.clone(),
                        m,
                        got,
                        base_m: 1,
                        want,
                    });
                }
            }
            let t = median(times);
            rows.push(SpeedupRow {
                stage: stage.to_string(),
                workers: m,
                wall_seconds: t,
                counters: c.clone(),
                speedup: if m == 1 { 1.0 } else { base / t },
            });
        }
    }
    Ok(SpeedupReport {
        rows,
        runs,
        logical_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticData, SyntheticSpec};
    use crate::metrics::ari;

    fn blobs(seed: u64) -> (PipelineInput, Vec<usize>) {
        let spec = SyntheticSpec::Blobs {
            blobs: 3,
            points_per_blob: 30,
            separation: 10.0,
            spread: 1.0,
            dim: 2,
        };
        match generate_synthetic(&spec, seed).unwrap() {
            SyntheticData::Points { points, labels } => (PipelineInput::Points(points), labels),
            SyntheticData::Graph { .. } => unreachable!(),
        }
    }

    #[test]
    fn config_round_trip() {
        let mut c = PipelineConfig {
            input: "data/x.csv".into(),
            mode: InputMode::Point,
            k: 5,
            sigma: Some(0.1 + 0.2),
            knn_t: Some(7),
            dense: true,
            workers: 3,
            seed: 99,
            out: "res".into(),
            max_iter: 12,
            eps: 1e-11,
            lanczos_steps: Some(33),
            reorthogonalize: false,
            init: KMeansInit::Indices(vec![4, 0, 2, 9, 1]),
            persist_tables: false,
        };
        assert_eq!(
            PipelineConfig::from_file_str(&c.to_file_string()).unwrap(),
            c
        );
        c.sigma = None;
        c.init = KMeansInit::FirstK;
        assert_eq!(
            PipelineConfig::from_file_str(&c.to_file_string()).unwrap(),
            c
        );
        let d = PipelineConfig::default();
        assert_eq!(
            PipelineConfig::from_file_str(&d.to_file_string()).unwrap(),
            d
        );
    }

    #[test]
    fn config_errors() {
        assert!(PipelineConfig::from_file_str("colour=red").is_err());
        assert!(PipelineConfig::from_file_str("k").is_err());
        assert!(PipelineConfig::from_file_str("k=two").is_err());
        assert!(PipelineConfig::from_file_str("mode=tree").is_err());
        let c = PipelineConfig::from_file_str("# comment\n\nk=4\n").unwrap();
        assert_eq!(c.k, 4);
        assert!(PipelineConfig::from_file_str("sigma=-1")
            .unwrap()
            .validate()
            .is_err());
        assert!(PipelineConfig::from_file_str("workers=0")
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn three_blobs_recovered() {
        let (input, truth) = blobs(7);
        let config = PipelineConfig {
            k: 3,
            workers: 2,
            seed: 7,
            ..PipelineConfig::default()
        };
        let run = execute(&config, &input).unwrap();
        assert_eq!(ari(run.assignment.labels(), &truth).unwrap(), 1.0);
        let total = run.report(STAGE_TOTAL).unwrap();
        let slowest = run
            .reports
            .iter()
            .map(|r| r.wall_seconds)
            .fold(0.0, f64::max);
        assert!(total.wall_seconds >= slowest);
    }

    #[test]
    fn k_above_n_rejected_early() {
        let input = PipelineInput::Points(PointSet::new(vec![vec![0.0], vec![1.0]]).unwrap());
        let config = PipelineConfig {
            k: 3,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            execute(&config, &input),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn bench_needs_one_worker() {
        let (input, _) = blobs(1);
        let config = PipelineConfig {
            k: 3,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            benchmark_speedup(&config, &input, &[2, 4], 1),
            Err(PipelineError::Config(_))
        ));
        let report = benchmark_speedup(&config, &input, &[1, 2], 1).unwrap();
        for stage in BENCH_STAGES {
            assert_eq!(report.row(stage, 1).unwrap().speedup, 1.0);
        }
        assert!(report.summary().contains("host logical cores"));
    }
}
