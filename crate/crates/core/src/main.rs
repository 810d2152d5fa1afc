use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use escbo::benchmarks;
use escbo::harness::diagnose::{diagnose_report, render, DiagnoseInputs};
use escbo::harness::report::render_table;
use escbo::harness::{emit_report, run_many, table_preset, AggregateReport, ExperimentConfig, Format};
use escbo::neural::{generate_synthetic_with, write_dataset, DataConfig, MlpArchitecture};
use escbo::swarm::{InitDistribution, Method};
use escbo::theory::{error_budget, laplace_estimate, sample_values, DEFAULT_MC_SAMPLES};

#[derive(Parser)]
#[command(name = "escbo", version, about = "Consensus-based optimization with an extra gradient step")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded campaign.
    Run(RunArgs),
    /// Run the same campaign with the gradient step and with plain CBO.
    Compare(RunArgs),
    /// Particle-count comparison grid.
    Table2(TableArgs),
    /// Initialization comparison grid.
    Table3(TableArgs),
    /// Network-training grid.
    Table4(TableArgs),
    /// Compare a campaign's diameter and W_k series with the theoretical bounds.
    Diagnose(DiagnoseArgs),
    /// Laplace-principle estimate and error budget over a grid of beta.
    Laplace(LaplaceArgs),
    /// Write a synthetic regression dataset as a text table.
    Dataset(DatasetArgs),
}

/// Flags that override the configuration file; values use the file syntax.
#[derive(Args, Default)]
struct ConfigFlags {
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// escbo, vanilla or fescbo.
    #[arg(long)]
    method: Option<String>,
    /// Benchmark name or `dnn`.
    #[arg(long)]
    benchmark: Option<String>,
    /// Layer widths of the network target, e.g. 5,10,1.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    particles: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Finite-difference interval.
    #[arg(long)]
    sigma: Option<String>,
    /// constant:C, geometric:C:R or harmonic:C.
    #[arg(long)]
    schedule: Option<String>,
    /// uniform:LO:HI, gaussian:MEAN:VARIANCE or box:LOS:HIS.
    #[arg(long)]
    init: Option<String>,
    /// Mini-batch size; selects the mini-batch method.
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    stop_tol: Option<String>,
    #[arg(long)]
    success_tol: Option<String>,
}

impl ConfigFlags {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let ordered = [
            ("benchmark", &self.benchmark),
            ("arch", &self.arch),
            ("dim", &self.dim),
            ("particles", &self.particles),
            ("method", &self.method),
            ("batch", &self.batch),
            ("lambda", &self.lambda),
            ("delta", &self.delta),
            ("beta", &self.beta),
            ("sigma", &self.sigma),
            ("schedule", &self.schedule),
            ("init", &self.init),
            ("runs", &self.runs),
            ("seed", &self.seed),
            ("max_iters", &self.max_iters),
            ("stop_tol", &self.stop_tol),
            ("success_tol", &self.success_tol),
        ];
        for (key, value) in ordered {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputFlags {
    /// Summary file; the series goes next to it as NAME.series.EXT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

impl OutputFlags {
    fn emit(&self, reports: &[AggregateReport]) -> Result<()> {
        print!("{}", render_table(reports));
        if let Some(path) = &self.out {
            let format: Format = self.format.parse()?;
            let series = emit_report(reports, format, path)?;
            println!("wrote {} and {}", path.display(), series.display());
        }
        Ok(())
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct TableArgs {
    /// Fraction of the full run count and iteration cap.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run only rows whose benchmark label contains this text.
    #[arg(long)]
    only: Option<String>,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    config: ConfigFlags,
    /// Lipschitz constant of f; defaults to the benchmark's or a sampled estimate.
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long, default_value_t = escbo::theory::DEFAULT_XI)]
    xi: f64,
    /// Write the diagnostic as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LaplaceArgs {
    #[arg(long, default_value = "rastrigin")]
    benchmark: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Comma-separated values of beta.
    #[arg(long, default_value = "10,100,1000,10000")]
    beta_grid: String,
    #[arg(long, default_value = "uniform:-1:1")]
    init: String,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long, default_value = "5,10,1")]
    arch: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0025)]
    noise_variance: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.config.build()?;
            eprintln!("{cfg}");
            let rep = run_many(&cfg)?;
            args.output.emit(&[rep])
        }
        Command::Compare(args) => {
            let cfg = args.config.build()?;
            let reports = [Method::Escbo, Method::Vanilla]
                .into_iter()
                .map(|method| run_many(&ExperimentConfig { method, ..cfg.clone() }))
                .collect::<escbo::Result<Vec<_>>>()?;
            args.output.emit(&reports)
        }
        Command::Table2(args) => table("table2", args),
        Command::Table3(args) => table("table3", args),
        Command::Table4(args) => table("table4", args),
        Command::Diagnose(args) => {
            let cfg = args.config.build()?;
            let rep = run_many(&cfg)?;
            let inputs = DiagnoseInputs {
                l_f: args.lipschitz,
                xi: args.xi,
                ..Default::default()
            };
            let diag = diagnose_report(&rep, &inputs)?;
            print!("{}", render(&diag));
            if let Some(path) = args.out {
                serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &diag)?;
            }
            Ok(())
        }
        Command::Laplace(args) => laplace(args),
        Command::Dataset(args) => {
            let arch: MlpArchitecture = args.arch.parse()?;
            let cfg = DataConfig {
                noise_variance: args.noise_variance,
                ..DataConfig::default()
            };
            let data = generate_synthetic_with(&arch, &cfg, args.seed)?;
            write_dataset(&data, BufWriter::new(File::create(&args.out)?))?;
            println!("wrote {} samples for {arch} to {}", data.inputs.len(), args.out.display());
            Ok(())
        }
    }
}

fn table(name: &str, args: TableArgs) -> Result<()> {
    let mut grid = table_preset(name, args.scale)?;
    if let Some(only) = &args.only {
        grid.retain(|c| c.target.label().contains(only.as_str()));
        if grid.is_empty() {
            bail!("no rows of {name} match `{only}`");
        }
    }
    let mut reports = Vec::with_capacity(grid.len());
    for mut cfg in grid {
        cfg.seed = args.seed;
        eprintln!("{cfg}");
        reports.push(run_many(&cfg)?);
    }
    args.output.emit(&reports)
}

fn laplace(args: LaplaceArgs) -> Result<()> {
    let spec = benchmarks::lookup(&args.benchmark, args.dim)?;
    let init: InitDistribution = args.init.parse()?;
    let betas = args
        .beta_grid
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad beta `{t}`")))
        .collect::<Result<Vec<_>>>()?;
    let obj = spec.objective();
    let samples = sample_values(obj.function().as_ref(), &init, args.samples, args.seed)?;
    println!(
        "{:>12} {:>14} {:>12} {:>14} {:>10}",
        "beta", "laplace", "std_err", "E(beta)", "ess"
    );
    for beta in betas {
        let est = laplace_estimate(beta, &samples)?;
        let budget = error_budget(beta, args.epsilon, &samples, spec.f_star)?;
        println!(
            "{:>12e} {:>14.6e} {:>12.3e} {:>14.6e} {:>10.1}",
            beta, est.value, est.std_error, budget, est.effective_samples
        );
    }
    Ok(())
}
