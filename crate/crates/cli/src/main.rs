use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use specmr::dataio::{generate_synthetic, write_assignments, ClusterAssignment, SyntheticSpec};
use specmr::pipeline::{benchmark_speedup, load_input, run_pipeline, PipelineConfig, STAGE_TOTAL};

#[derive(Parser)]
#[command(
    name = "cluster",
    version,
    about = "Spectral clustering on a local map/reduce engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one input and write assignments, eigenvalues and timings.
    Run {
        #[command(flatten)]
        opts: PipelineArgs,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Time the pipeline stages over several worker counts.
    Bench {
        #[command(flatten)]
        opts: PipelineArgs,
        /// Comma-separated worker counts; must include 1.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write a synthetic point set or clique graph plus its true labels.
    Gen(GenArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// key=value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// point or graph
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "knn-t")]
    knn_t: Option<usize>,
    /// Keep every kernel value instead of the kNN graph.
    #[arg(long)]
    dense: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "lanczos-steps")]
    lanczos_steps: Option<usize>,
    /// Skip full reorthogonalization in Lanczos.
    #[arg(long = "no-reorth")]
    no_reorth: bool,
    /// kmeans++, first-k or indices=i,j,...
    #[arg(long)]
    init: Option<String>,
    /// Do not write table snapshots.
    #[arg(long = "no-persist")]
    no_persist: bool,
}

impl PipelineArgs {
    fn config(&self, workers: Option<usize>) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            config.apply_file_str(&text)?;
        }
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut push = |key, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key, v));
            }
        };
        push(
            "input",
            self.input.as_ref().map(|p| p.display().to_string()),
        );
        push("mode", self.mode.clone());
        push("k", self.k.map(|v| v.to_string()));
        push("sigma", self.sigma.map(|v| v.to_string()));
        push("knn_t", self.knn_t.map(|v| v.to_string()));
        push("dense", self.dense.then(|| "true".into()));
        push("workers", workers.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("max_iter", self.max_iter.map(|v| v.to_string()));
        push("eps", self.eps.map(|v| v.to_string()));
        push("lanczos_steps", self.lanczos_steps.map(|v| v.to_string()));
        push("reorthogonalize", self.no_reorth.then(|| "false".into()));
        push("init", self.init.clone());
        push("persist_tables", self.no_persist.then(|| "false".into()));
        for (key, value) in pairs {
            config.set(key, &value)?;
        }
        if config.input.as_os_str().is_empty() {
            bail!("no input given (--input or input= in --config)");
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct GenArgs {
    /// Number of Gaussian blobs.
    #[arg(long, conflicts_with = "cliques")]
    blobs: Option<usize>,
    /// Points per blob.
    #[arg(long, default_value_t = 30)]
    points: usize,
    /// Distance between neighboring blob centers.
    #[arg(long, default_value_t = 10.0)]
    sep: f64,
    /// Standard deviation inside a blob.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Number of disjoint cliques.
    #[arg(long)]
    cliques: Option<usize>,
    /// Vertices per clique.
    #[arg(long, default_value_t = 4)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn labels_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".labels.tsv");
    out.with_file_name(name)
}

fn generate(args: &GenArgs) -> Result<()> {
    let spec = match (args.blobs, args.cliques) {
        (Some(blobs), None) => SyntheticSpec::Blobs {
            blobs,
            points_per_blob: args.points,
            separation: args.sep,
            spread: args.spread,
            dim: args.dim,
        },
        (None, Some(cliques)) => SyntheticSpec::Cliques {
            cliques,
            size: args.size,
        },
        _ => bail!("give exactly one of --blobs or --cliques"),
    };
    let data = generate_synthetic(&spec, args.seed)?;
    fs::write(&args.out, data.to_text())
        .with_context(|| format!("writing {}", args.out.display()))?;
    let labels = data.labels().to_vec();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut f = fs::File::create(labels_path(&args.out))?;
    write_assignments(&ClusterAssignment::new(labels, k)?, &mut f)?;
    println!(
        "wrote {} items to {} (labels in {})",
        data.labels().len(),
        args.out.display(),
        labels_path(&args.out).display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { opts, workers } => {
            let config = opts.config(workers)?;
            let run = run_pipeline(&config)?;
            println!("n = {}, k = {}", run.assignment.len(), config.k);
            println!("eigenvalues: {:?}", run.eigenvalues);
            println!("kmeans iterations: {}", run.kmeans_iterations);
            if let Some(total) = run.report(STAGE_TOTAL) {
                println!(
                    "total wall time: {:.4}s on {} workers",
                    total.wall_seconds, config.workers
                );
            }
            println!("outputs in {}", config.out.display());
        }
        Command::Bench {
            opts,
            workers,
            repeats,
        } => {
            let config = opts.config(None)?;
            let input = load_input(&config.input, config.mode)?;
            let report = benchmark_speedup(&config, &input, &workers, repeats)?;
            report.write(&config.out)?;
            print!("{}", report.summary());
        }
        Command::Gen(args) => generate(&args)?,
    }
    Ok(())
}
