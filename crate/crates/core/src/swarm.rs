//! Particle-system state and the consensus-based steppers.
//!
//! One iteration of every stepper follows the same order:
//!
//! 1. softmin consensus point from the cached objective values,
//! 2. a single noise vector η^k shared by all particles,
//! 3. (mini-batch method only) the batch of particles that get a gradient,
//! 4. forward-difference gradients,
//! 5. `y = (1 − λ − η) ⊙ x + (λ + η) ⊙ x̄`, then `x' = y − α_k g`,
//! 6. refresh of the cached objective values.
//!
//! Noise, batch selection and initialization each draw from their own
//! ChaCha stream, so methods that skip a draw (vanilla CBO never samples a
//! batch) still see the same noise sequence for the same seed.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{minibatch_gradients, squared_distance, FiniteDiffConfig, Objective, SearchBox};

const NOISE_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;

/// Seeded random source for one run.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    noise: ChaCha8Rng,
    batch: ChaCha8Rng,
    init: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            seed,
            noise: stream(NOISE_STREAM),
            batch: stream(BATCH_STREAM),
            init: stream(INIT_STREAM),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Distribution of the initial particles, applied independently per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitDistribution {
    /// Uniform on the cube `[lo, hi]^d`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform on an explicit box.
    UniformBox { bounds: SearchBox },
    /// Each coordinate i.i.d. normal; `variance` is σ², not σ.
    Gaussian { mean: f64, variance: f64 },
}

impl InitDistribution {
    /// Variance of one particle, `E‖x − E x‖²`.
    pub fn total_variance(&self, d: usize) -> f64 {
        match self {
            Self::Uniform { lo, hi } => d as f64 * (hi - lo).powi(2) / 12.0,
            Self::UniformBox { bounds } => bounds
                .lo
                .iter()
                .zip(&bounds.hi)
                .map(|(lo, hi)| (hi - lo).powi(2) / 12.0)
                .sum(),
            Self::Gaussian { variance, .. } => d as f64 * variance,
        }
    }
}

impl fmt::Display for InitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            Self::UniformBox { bounds } => {
                let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
                write!(f, "box:{}:{}", join(&bounds.lo), join(&bounds.hi))
            }
            Self::Gaussian { mean, variance } => write!(f, "gaussian:{mean}:{variance}"),
        }
    }
}

impl FromStr for InitDistribution {
    type Err = Error;

    /// `uniform:LO:HI`, `gaussian:MEAN:VARIANCE` or `box:LO1,LO2,..:HI1,HI2,..`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{t}` in init `{s}`")))
        };
        let list = |t: &str| t.split(',').map(num).collect::<Result<Vec<f64>>>();
        match parts.as_slice() {
            ["uniform", lo, hi] => Ok(Self::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            }),
            ["gaussian", mean, var] => Ok(Self::Gaussian {
                mean: num(mean)?,
                variance: num(var)?,
            }),
            ["box", lo, hi] => Ok(Self::UniformBox {
                bounds: SearchBox::new(list(lo)?, list(hi)?)?,
            }),
            _ => Err(Error::Parse(format!(
                "unrecognised init `{s}` (expected uniform:LO:HI, gaussian:MEAN:VAR or box:LOS:HIS)"
            ))),
        }
    }
}

/// Step sizes `α_k` of the extra gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { c: f64 },
    /// `c · r^k`, `0 < r < 1`.
    Geometric { c: f64, r: f64 },
    /// `c / (k + 1)`; the shift keeps `k = 0` defined.
    Harmonic { c: f64 },
}

/// Whether `Σ α_k` converges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summability {
    Yes,
    No,
    /// Not produced by the built-in schedules.
    Unknown,
}

impl StepSchedule {
    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Geometric { c, r } => c * r.powf(k as f64),
            Self::Harmonic { c } => c / (k as f64 + 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { c } | Self::Harmonic { c } => c >= 0.0 && c.is_finite(),
            Self::Geometric { c, r } => c >= 0.0 && c.is_finite() && r > 0.0 && r < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid step schedule {self}: coefficients must be non-negative and 0 < r < 1"
            )))
        }
    }

    pub fn summability(&self) -> Summability {
        match *self {
            Self::Constant { c } | Self::Harmonic { c } if c == 0.0 => Summability::Yes,
            Self::Constant { .. } | Self::Harmonic { .. } => Summability::No,
            Self::Geometric { .. } => Summability::Yes,
        }
    }

    pub fn tends_to_zero(&self) -> bool {
        !matches!(*self, Self::Constant { c } if c != 0.0)
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { c } => write!(f, "constant:{c}"),
            Self::Geometric { c, r } => write!(f, "geometric:{c}:{r}"),
            Self::Harmonic { c } => write!(f, "harmonic:{c}"),
        }
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    /// `constant:C`, `geometric:C:R` or `harmonic:C`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{t}` in schedule `{s}`")))
        };
        let schedule = match parts.as_slice() {
            ["constant", c] => Self::Constant { c: num(c)? },
            ["geometric", c, r] => Self::Geometric {
                c: num(c)?,
                r: num(r)?,
            },
            ["harmonic", c] => Self::Harmonic { c: num(c)? },
            _ => {
                return Err(Error::Parse(format!(
                    "unrecognised schedule `{s}` (expected constant:C, geometric:C:R or harmonic:C)"
                )))
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Drift λ, noise scale δ, weight sharpness β and finite-difference interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CBOParams {
    pub lambda: f64,
    pub delta: f64,
    pub beta: f64,
    pub fd: FiniteDiffConfig,
}

impl CBOParams {
    pub fn new(lambda: f64, delta: f64, beta: f64, sigma: f64) -> Result<Self> {
        let params = Self {
            lambda,
            delta,
            beta,
            fd: FiniteDiffConfig::new(sigma)?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// The noise vector η^k of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPoint {
    pub xbar: Vec<f64>,
    /// Normalized softmin weights, one per particle.
    pub weights: Vec<f64>,
}

/// Positions `x^{i,k}`, the iteration counter and cached `f(x^{i,k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    positions: Vec<Vec<f64>>,
    k: usize,
    cached_f: Vec<f64>,
}

impl SwarmState {
    pub fn from_positions(positions: Vec<Vec<f64>>) -> Result<Self> {
        let d = positions.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(Error::Config("a swarm needs at least one particle of dimension >= 1".into()));
        }
        for (i, x) in positions.iter().enumerate() {
            if x.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    got: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("particle {i} has a non-finite coordinate")));
            }
        }
        Ok(Self {
            positions,
            k: 0,
            cached_f: Vec::new(),
        })
    }

    /// Evaluate the objective at every particle (N evaluations).
    pub fn attach(&mut self, obj: &Objective) -> Result<()> {
        if obj.dim() != self.dim() {
            return Err(Error::Shape {
                expected: obj.dim(),
                got: self.dim(),
            });
        }
        let values: Vec<f64> = self.positions.iter().map(|x| obj.eval(x)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.k,
                particle: i,
            });
        }
        self.cached_f = values;
        Ok(())
    }

    pub fn is_attached(&self) -> bool {
        self.cached_f.len() == self.positions.len()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.cached_f
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    /// `max_{i≠j} ‖x^i − x^j‖²`; zero for a single particle.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.max(squared_distance(a, b));
            }
        }
        best
    }

    /// `(1/N) Σ ‖x^i − x*‖²`.
    pub fn mean_square_distance(&self, xstar: &[f64]) -> f64 {
        self.positions.iter().map(|x| squared_distance(x, xstar)).sum::<f64>() / self.len() as f64
    }

    /// Index and value of the lowest cached objective value.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.cached_f
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub fn init_swarm(dist: &InitDistribution, n: usize, d: usize, rng: &mut RngStream) -> Result<SwarmState> {
    if n == 0 || d == 0 {
        return Err(Error::Config(format!("need N >= 1 and d >= 1, got N={n}, d={d}")));
    }
    let positions = match dist {
        InitDistribution::Uniform { lo, hi } => {
            let bounds = SearchBox::cube(*lo, *hi, d)?;
            (0..n).map(|_| bounds.sample(&mut rng.init)).collect()
        }
        InitDistribution::UniformBox { bounds } => {
            let bounds = SearchBox::new(bounds.lo.clone(), bounds.hi.clone())?;
            if bounds.dim() != d {
                return Err(Error::Shape {
                    expected: d,
                    got: bounds.dim(),
                });
            }
            (0..n).map(|_| bounds.sample(&mut rng.init)).collect()
        }
        InitDistribution::Gaussian { mean, variance } => {
            if !(*variance >= 0.0 && variance.is_finite() && mean.is_finite()) {
                return Err(Error::Config(format!(
                    "gaussian init needs finite mean and variance >= 0, got mean={mean}, variance={variance}"
                )));
            }
            let sd = variance.sqrt();
            (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng.init);
                            mean + sd * z
                        })
                        .collect()
                })
                .collect()
        }
    };
    SwarmState::from_positions(positions)
}

/// Softmin-weighted average with weights `e^{−β (f_i − min_j f_j)}`.
pub fn consensus_point(state: &SwarmState, beta: f64) -> Result<ConsensusPoint> {
    if !state.is_attached() {
        return Err(Error::Precondition("consensus point needs cached objective values".into()));
    }
    let (xbar, weights) = weighted_average(state.positions(), state.values(), beta);
    Ok(ConsensusPoint { xbar, weights })
}

pub(crate) fn softmin_weights(values: &[f64], beta: f64) -> Vec<f64> {
    let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = values
        .iter()
        .map(|&f| {
            let shift = f - fmin;
            // β = 0 gives equal weights even when the shift is huge.
            if beta == 0.0 || shift == 0.0 {
                1.0
            } else {
                (-beta * shift).exp()
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Accumulated as offsets from the best particle, so a swarm of identical
/// particles has its consensus point exactly at them.
pub(crate) fn weighted_average(positions: &[Vec<f64>], values: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
    let weights = softmin_weights(values, beta);
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let anchor = &positions[best];
    let mut xbar = anchor.clone();
    for (x, &w) in positions.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        for ((acc, &v), &a) in xbar.iter_mut().zip(x).zip(anchor) {
            *acc += w * (v - a);
        }
    }
    (xbar, weights)
}

pub fn draw_noise(delta: f64, d: usize, rng: &mut RngStream) -> NoiseDraw {
    let eta = (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng.noise);
            delta * z
        })
        .collect();
    NoiseDraw { eta }
}

/// Which update rule a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// CBO step followed by a forward-difference gradient step on every particle.
    Escbo,
    /// Plain time-discrete CBO.
    Vanilla,
    /// Gradient step only on a random batch of `batch_size` particles.
    Fescbo { batch_size: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Escbo => "escbo",
            Self::Vanilla => "vanilla",
            Self::Fescbo { .. } => "fescbo",
        }
    }

    /// Evaluations spent on gradients in one step of an N-particle swarm in ℝ^d.
    pub fn gradient_evals_per_step(&self, n: usize, d: usize) -> u64 {
        match *self {
            Self::Escbo => (n * (d + 1)) as u64,
            Self::Vanilla => 0,
            Self::Fescbo { batch_size } => (batch_size * (d + 1)) as u64,
        }
    }
}

pub fn step(
    method: Method,
    state: &SwarmState,
    obj: &Objective,
    params: &CBOParams,
    schedule: &StepSchedule,
    rng: &mut RngStream,
) -> Result<SwarmState> {
    match method {
        Method::Escbo => escbo_step(state, obj, params, schedule, rng),
        Method::Vanilla => vanilla_cbo_step(state, obj, params, rng),
        Method::Fescbo { batch_size } => fescbo_step(state, obj, params, schedule, batch_size, rng),
    }
}

pub fn escbo_step(
    state: &SwarmState,
    obj: &Objective,
    params: &CBOParams,
    schedule: &StepSchedule,
    rng: &mut RngStream,
) -> Result<SwarmState> {
    params.validate()?;
    let consensus = consensus_point(state, params.beta)?;
    let noise = draw_noise(params.delta, state.dim(), rng);
    let all: Vec<usize> = (0..state.len()).collect();
    let grads = minibatch_gradients(obj, state.positions(), &all, &params.fd)?;
    advance(state, obj, params, &consensus, &noise, Some((&grads, schedule.alpha(state.k))))
}

pub fn vanilla_cbo_step(
    state: &SwarmState,
    obj: &Objective,
    params: &CBOParams,
    rng: &mut RngStream,
) -> Result<SwarmState> {
    params.validate()?;
    let consensus = consensus_point(state, params.beta)?;
    let noise = draw_noise(params.delta, state.dim(), rng);
    advance(state, obj, params, &consensus, &noise, None)
}

pub fn fescbo_step(
    state: &SwarmState,
    obj: &Objective,
    params: &CBOParams,
    schedule: &StepSchedule,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<SwarmState> {
    params.validate()?;
    if batch_size == 0 || batch_size > state.len() {
        return Err(Error::Config(format!(
            "batch size must be in 1..={}, got {batch_size}",
            state.len()
        )));
    }
    let consensus = consensus_point(state, params.beta)?;
    let noise = draw_noise(params.delta, state.dim(), rng);
    let batch = index::sample(&mut rng.batch, state.len(), batch_size).into_vec();
    let grads = minibatch_gradients(obj, state.positions(), &batch, &params.fd)?;
    advance(state, obj, params, &consensus, &noise, Some((&grads, schedule.alpha(state.k))))
}

fn advance(
    state: &SwarmState,
    obj: &Objective,
    params: &CBOParams,
    consensus: &ConsensusPoint,
    noise: &NoiseDraw,
    gradient_step: Option<(&[Vec<f64>], f64)>,
) -> Result<SwarmState> {
    let contraction: Vec<f64> = noise.eta.iter().map(|eta| params.lambda + eta).collect();
    let keep: Vec<f64> = contraction.iter().map(|c| 1.0 - c).collect();
    let mut positions = Vec::with_capacity(state.len());
    for (i, x) in state.positions().iter().enumerate() {
        let mut next: Vec<f64> = x
            .iter()
            .zip(&consensus.xbar)
            .zip(contraction.iter().zip(&keep))
            // Written as a convex combination so c = 1 lands exactly on x̄ and c = 0 keeps x.
            .map(|((&xi, &xb), (&c, &k))| k * xi + c * xb)
            .collect();
        if let Some((grads, alpha)) = gradient_step {
            for (v, g) in next.iter_mut().zip(&grads[i]) {
                *v -= alpha * g;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: state.k,
                particle: i,
            });
        }
        positions.push(next);
    }
    let mut next = SwarmState {
        positions,
        k: state.k + 1,
        cached_f: Vec::new(),
    };
    next.attach(obj).map_err(|e| match e {
        Error::Divergence { particle, .. } => Error::Divergence {
            iteration: state.k,
            particle,
        },
        other => other,
    })?;
    Ok(next)
}

/// The two-part stopping rule: every particle moved at most `tol`, and every
/// difference quotient `|Δf| / ‖Δx‖` is at most `tol` (a particle that did not
/// move counts as satisfied).
pub fn check_stop(prev: &SwarmState, next: &SwarmState, tol: f64) -> bool {
    let mut max_move: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for i in 0..prev.len() {
        let dx = squared_distance(&prev.positions[i], &next.positions[i]).sqrt();
        max_move = max_move.max(dx);
        if dx > 0.0 {
            let df = (next.cached_f[i] - prev.cached_f[i]).abs();
            max_ratio = max_ratio.max(df / dx);
        }
    }
    max_move <= tol && max_ratio <= tol
}
