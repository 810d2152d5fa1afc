//! Sigmoid multilayer perceptron as a black-box training objective.
//!
//! Parameters are flattened as `W₁ (row-major, N₁ × N₀), b₁, W₂, b₂, …`.
//! The sigmoid is applied after every layer, the output layer included.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveFn;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    widths: Vec<usize>,
}

impl MlpArchitecture {
    /// `widths = [N₀, N₁, …, N_L]`.
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "an architecture needs at least two positive layer widths, got {widths:?}"
            )));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight layers L.
    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn outputs(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// `Σ N_{ℓ−1} N_ℓ + Σ N_ℓ`.
    pub fn dim(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

impl std::fmt::Display for MlpArchitecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join("-"))
    }
}

impl FromStr for MlpArchitecture {
    type Err = Error;

    /// Comma- or dash-separated widths, e.g. `5,10,1`.
    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .split([',', '-'])
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad layer width `{t}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(widths)
    }
}

pub fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Concatenate per-layer weights (row-major) and biases.
pub fn flatten(arch: &MlpArchitecture, weights: &[Vec<f64>], biases: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != arch.layers() || biases.len() != arch.layers() {
        return Err(Error::Shape {
            expected: arch.layers(),
            got: weights.len().min(biases.len()),
        });
    }
    let mut out = Vec::with_capacity(arch.dim());
    for (l, pair) in arch.widths.windows(2).enumerate() {
        if weights[l].len() != pair[0] * pair[1] {
            return Err(Error::Shape {
                expected: pair[0] * pair[1],
                got: weights[l].len(),
            });
        }
        if biases[l].len() != pair[1] {
            return Err(Error::Shape {
                expected: pair[1],
                got: biases[l].len(),
            });
        }
        out.extend_from_slice(&weights[l]);
        out.extend_from_slice(&biases[l]);
    }
    Ok(out)
}

pub type Layers = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub fn unflatten(arch: &MlpArchitecture, params: &[f64]) -> Result<Layers> {
    check_len(arch, params)?;
    let mut weights = Vec::with_capacity(arch.layers());
    let mut biases = Vec::with_capacity(arch.layers());
    let mut at = 0;
    for pair in arch.widths.windows(2) {
        let nw = pair[0] * pair[1];
        weights.push(params[at..at + nw].to_vec());
        at += nw;
        biases.push(params[at..at + pair[1]].to_vec());
        at += pair[1];
    }
    Ok((weights, biases))
}

fn check_len(arch: &MlpArchitecture, params: &[f64]) -> Result<()> {
    if params.len() != arch.dim() {
        return Err(Error::Shape {
            expected: arch.dim(),
            got: params.len(),
        });
    }
    Ok(())
}

pub fn forward(arch: &MlpArchitecture, params: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_len(arch, params)?;
    if u.len() != arch.inputs() {
        return Err(Error::Shape {
            expected: arch.inputs(),
            got: u.len(),
        });
    }
    let mut scratch = Vec::new();
    let mut out = Vec::new();
    forward_into(arch, params, u, &mut scratch, &mut out);
    Ok(out)
}

fn forward_into(arch: &MlpArchitecture, params: &[f64], u: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(u);
    let mut at = 0;
    for pair in arch.widths.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let w = &params[at..at + n_in * n_out];
        let b = &params[at + n_in * n_out..at + n_in * n_out + n_out];
        at += n_in * n_out + n_out;
        scratch.clear();
        for (row, bias) in w.chunks_exact(n_in).zip(b) {
            let s: f64 = row.iter().zip(out.iter()).map(|(a, x)| a * x).sum::<f64>() + bias;
            scratch.push(sigmoid(s));
        }
        std::mem::swap(scratch, out);
    }
}

/// Generation settings of the synthetic regression task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub m_train: usize,
    pub m_test: usize,
    /// Variance of the ground-truth parameters.
    pub weight_variance: f64,
    /// Variance of the additive target noise.
    pub noise_variance: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            m_train: 80,
            m_test: 20,
            weight_variance: 0.8,
            noise_variance: 0.0025,
        }
    }
}

/// Inputs and targets; the first `m_train` samples form the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub m_train: usize,
    pub m_test: usize,
    /// Parameters that generated the targets, when known.
    pub truth: Option<Vec<f64>>,
}

impl SyntheticDataset {
    pub fn train(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.inputs[..self.m_train], &self.targets[..self.m_train])
    }

    pub fn test(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.inputs[self.m_train..], &self.targets[self.m_train..])
    }
}

pub fn generate_synthetic(arch: &MlpArchitecture, seed: u64) -> Result<SyntheticDataset> {
    generate_synthetic_with(arch, &DataConfig::default(), seed)
}

/// Ground truth `~ N(0, weight_variance)`, inputs `u = a + Σ z` with scalar `z ~ N(0, 1)`
/// (rank-one covariance ΣΣᵀ), targets `forward(truth, u) + N(0, noise_variance)`.
pub fn generate_synthetic_with(arch: &MlpArchitecture, cfg: &DataConfig, seed: u64) -> Result<SyntheticDataset> {
    if !(cfg.weight_variance >= 0.0 && cfg.noise_variance >= 0.0) {
        return Err(Error::Config("dataset variances must be non-negative".into()));
    }
    if cfg.m_train == 0 {
        return Err(Error::Config("the training split must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let wsd = cfg.weight_variance.sqrt();
    let truth: Vec<f64> = (0..arch.dim()).map(|_| wsd * normal()).collect();
    let a: Vec<f64> = (0..arch.inputs()).map(|_| normal()).collect();
    let sigma: Vec<f64> = (0..arch.inputs()).map(|_| normal()).collect();
    let nsd = cfg.noise_variance.sqrt();
    let total = cfg.m_train + cfg.m_test;
    let mut inputs = Vec::with_capacity(total);
    let mut targets = Vec::with_capacity(total);
    for _ in 0..total {
        let z = normal();
        let u: Vec<f64> = a.iter().zip(&sigma).map(|(a, s)| a + s * z).collect();
        let mut v = forward(arch, &truth, &u)?;
        for vi in &mut v {
            *vi += nsd * normal();
        }
        inputs.push(u);
        targets.push(v);
    }
    Ok(SyntheticDataset {
        inputs,
        targets,
        m_train: cfg.m_train,
        m_test: cfg.m_test,
        truth: Some(truth),
    })
}

fn mean_squared_error(arch: &MlpArchitecture, params: &[f64], inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    let mut scratch = Vec::with_capacity(arch.widths.iter().copied().max().unwrap_or(0));
    let mut out = Vec::with_capacity(scratch.capacity());
    let mut total = 0.0;
    for (u, v) in inputs.iter().zip(targets) {
        forward_into(arch, params, u, &mut scratch, &mut out);
        total += out.iter().zip(v).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
    }
    total / inputs.len() as f64
}

/// `(1/M) Σ ‖net(u_m) − v_m‖²` over the training split.
pub fn train_error(arch: &MlpArchitecture, params: &[f64], data: &SyntheticDataset) -> Result<f64> {
    check_len(arch, params)?;
    let (u, v) = data.train();
    Ok(mean_squared_error(arch, params, u, v))
}

pub fn test_error(arch: &MlpArchitecture, params: &[f64], data: &SyntheticDataset) -> Result<f64> {
    check_len(arch, params)?;
    let (u, v) = data.test();
    Ok(mean_squared_error(arch, params, u, v))
}

/// Training loss over ℝ^d, usable by any stepper.
#[derive(Debug, Clone)]
pub struct DnnObjective {
    pub arch: MlpArchitecture,
    pub data: SyntheticDataset,
}

impl DnnObjective {
    pub fn new(arch: MlpArchitecture, data: SyntheticDataset) -> Result<Self> {
        let bad = data
            .inputs
            .iter()
            .zip(&data.targets)
            .any(|(u, v)| u.len() != arch.inputs() || v.len() != arch.outputs());
        if bad || data.inputs.len() != data.targets.len() || data.inputs.len() != data.m_train + data.m_test {
            return Err(Error::Config(format!("dataset does not match architecture {arch}")));
        }
        Ok(Self { arch, data })
    }
}

impl ObjectiveFn for DnnObjective {
    fn dim(&self) -> usize {
        self.arch.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (u, v) = self.data.train();
        mean_squared_error(&self.arch, x, u, v)
    }
}

/// Header `N₀ N_L M M_test`, then one row per sample: inputs followed by targets.
pub fn write_dataset<W: Write>(data: &SyntheticDataset, mut out: W) -> Result<()> {
    let n0 = data.inputs.first().map_or(0, Vec::len);
    let nl = data.targets.first().map_or(0, Vec::len);
    writeln!(out, "{n0} {nl} {} {}", data.m_train, data.m_test)?;
    for (u, v) in data.inputs.iter().zip(&data.targets) {
        let row: Vec<String> = u.iter().chain(v).map(|x| format!("{x:e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<SyntheticDataset> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header field `{t}`"))))
        .collect::<Result<_>>()?;
    let [n0, nl, m_train, m_test] = head[..] else {
        return Err(Error::Parse(format!("dataset header needs 4 fields, got `{header}`")));
    };
    let mut inputs = Vec::with_capacity(m_train + m_test);
    let mut targets = Vec::with_capacity(m_train + m_test);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != n0 + nl {
            return Err(Error::Parse(format!("row has {} fields, expected {}", row.len(), n0 + nl)));
        }
        inputs.push(row[..n0].to_vec());
        targets.push(row[n0..].to_vec());
    }
    if inputs.len() != m_train + m_test {
        return Err(Error::Parse(format!(
            "expected {} rows, found {}",
            m_train + m_test,
            inputs.len()
        )));
    }
    Ok(SyntheticDataset {
        inputs,
        targets,
        m_train,
        m_test,
        truth: None,
    })
}
