//! Experiment configuration and its plain-text `key = value` form.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{self, BenchmarkSpec};
use crate::error::{Error, Result};
use crate::neural::{generate_synthetic_with, DataConfig, DnnObjective, MlpArchitecture};
use crate::objective::Objective;
use crate::swarm::{CBOParams, InitDistribution, Method, StepSchedule};

/// What is being minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Benchmark { name: String, d: usize },
    /// Training loss of a sigmoid network on a synthetic dataset drawn per run.
    Dnn { arch: MlpArchitecture, data: DataConfig },
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Self::Benchmark { d, .. } => *d,
            Self::Dnn { arch, .. } => arch.dim(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Benchmark { name, .. } => name.clone(),
            Self::Dnn { arch, .. } => format!("dnn:{arch}"),
        }
    }
}

/// A concrete objective for one run.
pub struct Problem {
    pub objective: Objective,
    /// Known global minimizers; empty when unknown.
    pub x_star: Vec<Vec<f64>>,
    pub f_star: Option<f64>,
    pub benchmark: Option<BenchmarkSpec>,
    pub dnn: Option<DnnObjective>,
}

impl Problem {
    pub fn from_benchmark(spec: BenchmarkSpec) -> Self {
        Self {
            objective: spec.objective(),
            x_star: spec.x_star.clone(),
            f_star: Some(spec.f_star),
            benchmark: Some(spec),
            dnn: None,
        }
    }

    /// The minimizer closest to the given particles.
    pub fn nearest_minimizer(&self, points: &[Vec<f64>]) -> Option<&[f64]> {
        match &self.benchmark {
            Some(spec) => Some(spec.nearest_minimizer(points)),
            None => None,
        }
    }
}

/// Everything that determines a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub target: Target,
    pub particles: usize,
    pub params: CBOParams,
    pub schedule: StepSchedule,
    pub init: InitDistribution,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub success_tol: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Escbo,
            target: Target::Benchmark {
                name: "rastrigin".into(),
                d: 2,
            },
            particles: 20,
            params: CBOParams::new(0.01, 0.1, 100.0, 1e-4).expect("valid defaults"),
            schedule: StepSchedule::Harmonic { c: 0.5 },
            init: InitDistribution::Uniform { lo: -5.0, hi: 5.0 },
            max_iters: 10_000,
            stop_tol: 1e-6,
            success_tol: 1e-3,
            runs: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        if self.particles == 0 {
            return Err(Error::Config("need at least one particle".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("need at least one run".into()));
        }
        if let Method::Fescbo { batch_size } = self.method {
            if batch_size == 0 || batch_size > self.particles {
                return Err(Error::Config(format!(
                    "batch size must be in 1..={}, got {batch_size}",
                    self.particles
                )));
            }
        }
        if !(self.stop_tol > 0.0 && self.success_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Target::Benchmark { name, d } = &self.target {
            benchmarks::lookup(name, *d)?;
        }
        match &self.init {
            InitDistribution::UniformBox { bounds } if bounds.dim() != self.dim() => {
                return Err(Error::Shape {
                    expected: self.dim(),
                    got: bounds.dim(),
                })
            }
            InitDistribution::Uniform { lo, hi } if !(lo < hi) => {
                return Err(Error::Config(format!("init box needs lo < hi, got [{lo}, {hi}]")))
            }
            InitDistribution::Gaussian { variance, .. } if !(*variance >= 0.0) => {
                return Err(Error::Config(format!("init variance must be >= 0, got {variance}")))
            }
            _ => {}
        }
        Ok(())
    }

    /// Benchmarks ignore the seed; network targets draw their dataset from it.
    pub fn problem(&self, seed: u64) -> Result<Problem> {
        match &self.target {
            Target::Benchmark { name, d } => Ok(Problem::from_benchmark(benchmarks::lookup(name, *d)?)),
            Target::Dnn { arch, data } => {
                let dataset = generate_synthetic_with(arch, data, seed)?;
                let dnn = DnnObjective::new(arch.clone(), dataset)?;
                Ok(Problem {
                    objective: Objective::new(dnn.clone()),
                    x_star: Vec::new(),
                    f_star: None,
                    benchmark: None,
                    dnn: Some(dnn),
                })
            }
        }
    }

    /// Apply one `key = value` setting. Keys mirror the command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| Error::Parse(format!("bad value `{value}` for {what}"));
        let float = || value.parse::<f64>().map_err(|_| bad(&key));
        let int = || value.parse::<usize>().map_err(|_| bad(&key));
        match key.as_str() {
            "method" => {
                self.method = match value {
                    "escbo" => Method::Escbo,
                    "vanilla" | "cbo" => Method::Vanilla,
                    "fescbo" => Method::Fescbo {
                        batch_size: match self.method {
                            Method::Fescbo { batch_size } => batch_size,
                            _ => 10.min(self.particles.max(1)),
                        },
                    },
                    _ => return Err(bad("method (escbo, vanilla, fescbo)")),
                }
            }
            "benchmark" => {
                if value == "dnn" {
                    if !matches!(self.target, Target::Dnn { .. }) {
                        self.target = Target::Dnn {
                            arch: MlpArchitecture::new(vec![5, 10, 1])?,
                            data: DataConfig::default(),
                        };
                    }
                } else {
                    let d = match &self.target {
                        Target::Benchmark { d, .. } => *d,
                        Target::Dnn { .. } => 2,
                    };
                    self.target = Target::Benchmark {
                        name: value.to_string(),
                        d,
                    };
                }
            }
            "dim" | "d" => match &mut self.target {
                Target::Benchmark { d, .. } => *d = int()?,
                Target::Dnn { .. } => return Err(Error::Config("the network dimension follows from arch".into())),
            },
            "arch" => {
                let arch: MlpArchitecture = value.parse()?;
                let data = match &self.target {
                    Target::Dnn { data, .. } => *data,
                    _ => DataConfig::default(),
                };
                self.target = Target::Dnn { arch, data };
            }
            "noise_variance" | "train_samples" | "test_samples" | "weight_variance" => match &mut self.target {
                Target::Dnn { data, .. } => match key.as_str() {
                    "noise_variance" => data.noise_variance = float()?,
                    "weight_variance" => data.weight_variance = float()?,
                    "train_samples" => data.m_train = int()?,
                    _ => data.m_test = int()?,
                },
                _ => return Err(Error::Config(format!("{key} applies only to the dnn target"))),
            },
            "particles" | "n" => self.particles = int()?,
            "lambda" => self.params.lambda = float()?,
            "delta" => self.params.delta = float()?,
            "beta" => self.params.beta = float()?,
            "sigma" => self.params.fd = crate::objective::FiniteDiffConfig::new(float()?)?,
            "schedule" => self.schedule = value.parse()?,
            "init" => self.init = value.parse()?,
            "batch" => {
                self.method = Method::Fescbo { batch_size: int()? };
            }
            "runs" => self.runs = int()?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| bad("seed"))?,
            "max_iters" => self.max_iters = int()?,
            "stop_tol" => self.stop_tol = float()?,
            "success_tol" => self.success_tol = float()?,
            _ => return Err(Error::Config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut batch = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", no + 1)))?;
            // The batch size only makes sense once the method is known; apply it last.
            if key.trim() == "batch" {
                batch = Some(value.to_string());
                continue;
            }
            self.set(key, value)
                .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        }
        if let Some(b) = batch {
            self.set("batch", &b)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    /// The configuration in the same text form [`ExperimentConfig::parse_text`] reads.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("method = {}", self.method.name())];
        match &self.target {
            Target::Benchmark { name, d } => {
                lines.push(format!("benchmark = {name}"));
                lines.push(format!("dim = {d}"));
            }
            Target::Dnn { arch, data } => {
                lines.push("benchmark = dnn".into());
                lines.push(format!("arch = {}", arch.widths().iter().map(usize::to_string).collect::<Vec<_>>().join(",")));
                lines.push(format!("train_samples = {}", data.m_train));
                lines.push(format!("test_samples = {}", data.m_test));
                lines.push(format!("weight_variance = {}", data.weight_variance));
                lines.push(format!("noise_variance = {}", data.noise_variance));
            }
        }
        lines.push(format!("particles = {}", self.particles));
        if let Method::Fescbo { batch_size } = self.method {
            lines.push(format!("batch = {batch_size}"));
        }
        lines.push(format!("lambda = {}", self.params.lambda));
        lines.push(format!("delta = {}", self.params.delta));
        lines.push(format!("beta = {:e}", self.params.beta));
        lines.push(format!("sigma = {:e}", self.params.fd.sigma()));
        lines.push(format!("schedule = {}", self.schedule));
        lines.push(format!("init = {}", self.init));
        lines.push(format!("max_iters = {}", self.max_iters));
        lines.push(format!("stop_tol = {:e}", self.stop_tol));
        lines.push(format!("success_tol = {:e}", self.success_tol));
        lines.push(format!("runs = {}", self.runs));
        lines.push(format!("seed = {}", self.seed));
        lines.join("\n") + "\n"
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on {} (d={}, N={}, init {})",
            self.method.name(),
            self.target.label(),
            self.dim(),
            self.particles,
            self.init
        )
    }
}
