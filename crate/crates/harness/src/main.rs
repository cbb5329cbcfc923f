use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use klcma::benchmark::{BenchmarkSpec, FunctionId};
use klcma_harness::config::default_targets_ecdf;
use klcma_harness::record::read_records;
use klcma_harness::report::{emit_reports, summarize, write_ecdfs, write_speedups, write_summary};
use klcma_harness::runner::run_experiment;
use klcma_harness::{Algorithm, ExperimentConfig};

#[derive(Parser)]
#[command(name = "klcma", about = "Run and report surrogate-assisted CMA-ES benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write records and reports.
    Run(RunArgs),
    /// Write ECDF files from existing records.
    Ecdf {
        /// Experiment directory (containing `records/`) or a records directory.
        dir: PathBuf,
        /// Output directory; defaults to `dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated targets; defaults to 1e2 down to 1e-8.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// Print the summary table and rewrite the summary, speedup and ECDF
    /// files from existing records.
    Summarize {
        dir: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        target: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; inline flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    func: Vec<FunctionId>,
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long)]
    rotate: bool,
    #[arg(long, default_value_t = 15)]
    runs: usize,
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 1e-8)]
    target: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return Ok(ExperimentConfig::load(path)?);
        }
        if self.algo.is_empty() || self.func.is_empty() || self.dim.is_empty() {
            bail!("either --config or all of --algo, --func and --dim are required");
        }
        let mut specs = Vec::new();
        for &f in &self.func {
            for &d in &self.dim {
                let mut s = BenchmarkSpec::new(f, d).with_power(self.power);
                s.rotate = self.rotate;
                specs.push(s);
            }
        }
        let cfg = ExperimentConfig {
            algorithms: self.algo,
            specs,
            runs: self.runs,
            budget: self.budget,
            target: self.target,
            targets_ecdf: default_targets_ecdf(),
            seed_base: self.seed,
            out_dir: self.out,
            n_max: 20,
            workers: self.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn records_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("records");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let records = run_experiment(&cfg)?;
            for p in emit_reports(&records, cfg.target, &cfg.targets_ecdf, &cfg.out_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Ecdf { dir, out, targets } => {
            let records = read_records(&records_dir(&dir)).with_context(|| format!("reading {}", dir.display()))?;
            if records.is_empty() {
                bail!("no records in {}", dir.display());
            }
            let out = out.unwrap_or(dir);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for p in write_ecdfs(&records, &targets.unwrap_or_else(default_targets_ecdf), &out)? {
                println!("{}", p.display());
            }
        }
        Command::Summarize { dir, target } => {
            let records = read_records(&records_dir(&dir))?;
            println!("algorithm,function,dim,median_evals,success_rate");
            for s in summarize(&records, target) {
                let median = s.median_evals.map_or_else(|| "inf".into(), |m| m.to_string());
                println!("{},{},{},{},{:.4}", s.algorithm, s.function, s.dim, median, s.success_rate);
            }
            write_summary(&records, target, &dir.join("summary.csv"))?;
            write_speedups(&records, target, &dir.join("speedup.csv"))?;
            write_ecdfs(&records, &default_targets_ecdf(), &dir)?;
        }
    }
    Ok(())
}
