//! Conditions, bounds and complexity constants of the convergence analysis.

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{euclidean, gradient_bounds, ObjectiveFn};
use crate::swarm::{weighted_average, InitDistribution, RngStream, StepSchedule, Summability};

/// Default Monte-Carlo sample count for expectations over the initial law.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Default ξ of the complexity constants.
pub const DEFAULT_XI: f64 = 0.5;

/// `(1 − λ)² + δ² < 1/2` together with summability of the step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusCondition {
    pub value: f64,
    pub satisfied: bool,
    pub schedule_summable: Summability,
}

pub fn check_consensus_condition(lambda: f64, delta: f64, schedule: &StepSchedule) -> ConsensusCondition {
    let value = (1.0 - lambda).powi(2) + delta * delta;
    let satisfied = value < 0.5;
    if !satisfied {
        warn!(
            "consensus condition (1-lambda)^2 + delta^2 = {value} is not below 1/2; \
             the consensus guarantee does not apply, though runs often still concentrate"
        );
    }
    ConsensusCondition {
        value,
        satisfied,
        schedule_summable: schedule.summability(),
    }
}

/// `C₁,ₙ = 2((1 − λ)² + δ² + αₙ² L_g²)`.
pub fn c1(n: usize, lambda: f64, delta: f64, schedule: &StepSchedule, l_g: f64) -> f64 {
    let alpha = schedule.alpha(n);
    2.0 * ((1.0 - lambda).powi(2) + delta * delta + alpha * alpha * l_g * l_g)
}

/// `2 ∏_{n<k} C₁,ₙ · var_init`, the bound on `E‖x^{i,k} − x̄^{*,k}‖²`.
pub fn consensus_bound(
    k: usize,
    lambda: f64,
    delta: f64,
    schedule: &StepSchedule,
    l_g: f64,
    var_init: f64,
) -> Result<f64> {
    if !(var_init >= 0.0) {
        return Err(Error::Precondition(format!("var_init must be >= 0, got {var_init}")));
    }
    let product: f64 = (0..k).map(|n| c1(n, lambda, delta, schedule, l_g)).product();
    Ok(2.0 * product * var_init)
}

/// Truncated value of `C₃ = Σₙ ((λ + δ)√(2 ∏_{m<n} C₁,ₘ Var) + αₙ M_g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C3Estimate {
    pub value: f64,
    pub terms: usize,
    /// Upper bound on the omitted tail.
    pub tail_bound: f64,
}

/// The C₁ sequence, its running products and C₃ for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub c1: Vec<f64>,
    /// `products[k] = ∏_{n<k} C₁,ₙ`, so `products[0] = 1`.
    pub products: Vec<f64>,
    pub c3: Option<C3Estimate>,
}

const C3_REL_TOL: f64 = 1e-15;
const C3_MAX_TERMS: usize = 10_000_000;

impl BoundSeries {
    /// Series over `k_max` iterations; C₃ is attached only when it is finite.
    pub fn new(
        lambda: f64,
        delta: f64,
        schedule: &StepSchedule,
        l_f: f64,
        d: usize,
        sigma: f64,
        var_init: f64,
        k_max: usize,
    ) -> Result<Self> {
        let lip = gradient_bounds(l_f, d, sigma)?;
        let c1: Vec<f64> = (0..k_max).map(|n| c1(n, lambda, delta, schedule, lip.l_g())).collect();
        let mut products = Vec::with_capacity(k_max + 1);
        products.push(1.0);
        for (n, c) in c1.iter().enumerate() {
            products.push(products[n] * c);
        }
        let condition = check_consensus_condition(lambda, delta, schedule);
        let c3 = if condition.satisfied && condition.schedule_summable == Summability::Yes {
            Some(c3_series(lambda, delta, schedule, lip.l_g(), lip.m_g(), var_init)?)
        } else {
            None
        };
        Ok(Self { c1, products, c3 })
    }
}

/// Sum C₃ until a term falls below `1e-15` of the partial sum and the
/// remaining terms are dominated by a geometric envelope.
pub fn c3_series(
    lambda: f64,
    delta: f64,
    schedule: &StepSchedule,
    l_g: f64,
    m_g: f64,
    var_init: f64,
) -> Result<C3Estimate> {
    let base = (1.0 - lambda).powi(2) + delta * delta;
    if base >= 0.5 || schedule.summability() != Summability::Yes {
        return Err(Error::Precondition(
            "C3 diverges unless (1-lambda)^2 + delta^2 < 1/2 and the step sizes are summable".into(),
        ));
    }
    if !(var_init >= 0.0) {
        return Err(Error::Precondition(format!("var_init must be >= 0, got {var_init}")));
    }
    let mut sum = 0.0;
    let mut product = 1.0;
    for n in 0..C3_MAX_TERMS {
        let alpha = schedule.alpha(n);
        let consensus_part = (lambda + delta) * (2.0 * product * var_init).sqrt();
        let step_part = alpha * m_g;
        sum += consensus_part + step_part;
        let c1n = c1(n, lambda, delta, schedule, l_g);
        product *= c1n;
        // With non-increasing α every later C₁ is at most C₁,ₙ, and the step part of a
        // summable schedule shrinks at least as fast as its own ratio.
        let ratio = c1n.sqrt();
        let step_ratio = step_ratio(schedule);
        if ratio < 1.0 && step_ratio < 1.0 {
            let next_consensus = (lambda + delta) * (2.0 * product * var_init).sqrt();
            let next_step = schedule.alpha(n + 1) * m_g;
            let tail = next_consensus / (1.0 - ratio) + next_step / (1.0 - step_ratio);
            if tail <= C3_REL_TOL * sum || (sum == 0.0 && tail == 0.0) {
                return Ok(C3Estimate {
                    value: sum,
                    terms: n + 1,
                    tail_bound: tail,
                });
            }
        }
    }
    Err(Error::Precondition(format!(
        "C3 did not converge within {C3_MAX_TERMS} terms"
    )))
}

fn step_ratio(schedule: &StepSchedule) -> f64 {
    match *schedule {
        StepSchedule::Geometric { r, .. } => r,
        _ => 0.0,
    }
}

/// ξ, γ, κ of the complexity estimate, plus `K_ε` once a target is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConstants {
    pub xi: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub k_eps: Option<u64>,
}

pub fn gamma_kappa(lambda: f64, delta: f64, xi: f64) -> Result<ComplexityConstants> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidParameters(format!("xi must lie in (0, 1), got {xi}")));
    }
    let a = 2.0 * lambda - 2.0 * lambda * lambda - 2.0 * delta * delta;
    if !(a > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "contraction condition 2*lambda - 2*lambda^2 - 2*delta^2 > 0 fails (value {a})"
        )));
    }
    let gamma = 1.0 - (1.0 - xi) * a;
    let s = 2.0 * lambda * lambda + 2.0 * delta * delta;
    let first = xi * a / (4.0 * (s + (lambda * lambda + delta * delta).sqrt() + 1.0));
    let second = (xi * a / (2.0 * (s + 2.0))).sqrt();
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameters(format!("gamma = {gamma} is outside (0, 1)")));
    }
    Ok(ComplexityConstants {
        xi,
        gamma,
        kappa: first.min(second),
        k_eps: None,
    })
}

/// `K_ε = ⌈ln(W₀/ε) / ln(1/γ)⌉`.
pub fn iteration_budget(w0: f64, eps: f64, gamma: f64) -> Result<u64> {
    if !(w0 > 0.0 && eps > 0.0 && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "need W0 > 0, eps > 0 and 0 < gamma < 1, got W0={w0}, eps={eps}, gamma={gamma}"
        )));
    }
    if eps >= w0 {
        info!("target {eps} already met by W0 = {w0}; iteration budget is 0");
        return Ok(0);
    }
    let raw = (w0 / eps).ln() / (1.0 / gamma).ln();
    let mut k = raw.ceil().max(1.0) as u64;
    // Guard the ceiling against rounding in the two logarithms.
    while k > 1 && gamma.powi((k - 1) as i32) * w0 <= eps {
        k -= 1;
    }
    while gamma.powi(k as i32) * w0 > eps {
        k += 1;
    }
    Ok(k)
}

/// f_∞, R₀, ν, μ of the local growth condition `‖x − x*‖ ≤ (f(x) − f*)^ν / μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConditionParams {
    pub f_inf: f64,
    pub r0: f64,
    pub nu: f64,
    pub mu: f64,
}

impl GrowthConditionParams {
    pub fn new(f_inf: f64, r0: f64, nu: f64, mu: f64) -> Result<Self> {
        if [f_inf, r0, nu, mu].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(Self { f_inf, r0, nu, mu })
        } else {
            Err(Error::InvalidParameters(format!(
                "growth parameters must be positive, got f_inf={f_inf}, R0={r0}, nu={nu}, mu={mu}"
            )))
        }
    }
}

/// `q = ½ min{f_∞, (μ C₄ / √2)^{1/ν}}`.
pub fn q_value(gcp: &GrowthConditionParams, c4k: f64) -> Result<f64> {
    if !(c4k > 0.0) {
        return Err(Error::Precondition(format!("C4 must be positive, got {c4k}")));
    }
    let scaled = (gcp.mu * c4k / std::f64::consts::SQRT_2).powf(1.0 / gcp.nu);
    Ok(0.5 * gcp.f_inf.min(scaled))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma61Outcome {
    pub bound: f64,
    /// `‖x̄* − x*‖` for the given swarm.
    pub distance: f64,
    pub holds: bool,
    pub indicator_size: usize,
}

/// Quantitative Laplace bound on the distance between the consensus point and `x*`.
#[allow(clippy::too_many_arguments)]
pub fn lemma61_bound(
    positions: &[Vec<f64>],
    fvals: &[f64],
    xstar: &[f64],
    fstar: f64,
    gcp: &GrowthConditionParams,
    r: f64,
    q: f64,
    beta: f64,
    f_r: f64,
) -> Result<Lemma61Outcome> {
    if positions.is_empty() || positions.len() != fvals.len() {
        return Err(Error::Precondition("need one value per particle and at least one particle".into()));
    }
    if !(r > 0.0 && r <= gcp.r0) {
        return Err(Error::Precondition(format!("r must lie in (0, R0 = {}], got {r}", gcp.r0)));
    }
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("q must be positive, got {q}")));
    }
    let slack = q + f_r - fstar;
    if slack > gcp.f_inf {
        return Err(Error::Precondition(format!(
            "q + f_r - f* = {slack} exceeds f_inf = {}",
            gcp.f_inf
        )));
    }
    let dists: Vec<f64> = positions.iter().map(|x| euclidean(x, xstar)).collect();
    let indicator_size = dists.iter().filter(|&&d| d <= r).count();
    if indicator_size == 0 {
        return Err(Error::EmptyIndicator { radius: r });
    }
    let spread: f64 = dists.iter().sum();
    let tail = if spread == 0.0 {
        0.0
    } else {
        (-beta * q).exp() / indicator_size as f64 * spread
    };
    let bound = slack.max(0.0).powf(gcp.nu) / gcp.mu + tail;
    let (xbar, _) = weighted_average(positions, fvals, beta);
    let distance = euclidean(&xbar, xstar);
    Ok(Lemma61Outcome {
        bound,
        distance,
        holds: distance <= bound,
        indicator_size,
    })
}

/// `f_r = max_{‖x − x*‖ ≤ r} f(x)` by grid search; only `d ≤ 2`.
pub fn ball_max(f: &dyn ObjectiveFn, xstar: &[f64], r: f64, points_per_axis: usize) -> Result<f64> {
    if points_per_axis < 2 {
        return Err(Error::Precondition("grid needs at least two points per axis".into()));
    }
    let grid = |c: f64| (0..points_per_axis).map(move |i| c - r + 2.0 * r * i as f64 / (points_per_axis - 1) as f64);
    match xstar.len() {
        1 => Ok(grid(xstar[0]).map(|x| f.value(&[x])).fold(f64::NEG_INFINITY, f64::max)),
        2 => {
            let mut best = f64::NEG_INFINITY;
            for x in grid(xstar[0]) {
                for y in grid(xstar[1]) {
                    let p = [x, y];
                    if euclidean(&p, xstar) <= r {
                        best = best.max(f.value(&p));
                    }
                }
            }
            Ok(best)
        }
        d => Err(Error::Precondition(format!(
            "ball maximum by grid search supports d <= 2, got d = {d}"
        ))),
    }
}

/// `−(1/β) ln mean(e^{−β f_i})`, evaluated with the shift `min f`.
pub fn laplace_value(beta: f64, f_samples: &[f64]) -> Result<f64> {
    Ok(shifted_log_mean(beta, f_samples)?.laplace)
}

struct ShiftedMean {
    fmin: f64,
    /// `mean e^{−β(f − fmin)}`, in `(0, 1]`.
    mean: f64,
    /// Sample standard deviation of the shifted exponentials.
    sd: f64,
    ess: f64,
    laplace: f64,
}

fn shifted_log_mean(beta: f64, f_samples: &[f64]) -> Result<ShiftedMean> {
    if f_samples.is_empty() {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    let fmin = f_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = f_samples.iter().map(|&f| (-beta * (f - fmin)).exp()).collect();
    let n = w.len() as f64;
    let sum: f64 = w.iter().sum();
    let mean = sum / n;
    let sq: f64 = w.iter().map(|v| v * v).sum();
    let sd = if w.len() > 1 {
        (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ShiftedMean {
        fmin,
        mean,
        sd,
        ess: sum * sum / sq,
        laplace: fmin - mean.ln() / beta,
    })
}

/// Monte-Carlo Laplace estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub beta: f64,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Effective sample size `(Σw)² / Σw²` of the Gibbs weights.
    pub effective_samples: f64,
}

pub fn laplace_estimate(beta: f64, f_samples: &[f64]) -> Result<LaplaceEstimate> {
    let s = shifted_log_mean(beta, f_samples)?;
    let n = f_samples.len() as f64;
    Ok(LaplaceEstimate {
        beta,
        value: s.laplace,
        std_error: s.sd / (n.sqrt() * s.mean * beta),
        samples: f_samples.len(),
        effective_samples: s.ess,
    })
}

/// `f(x_in)` for `n` independent draws from the initial law.
pub fn sample_values(
    f: &dyn ObjectiveFn,
    dist: &InitDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = f.dim();
    let mut rng = RngStream::new(seed);
    let swarm = crate::swarm::init_swarm(dist, n, d, &mut rng)?;
    Ok(swarm.positions().iter().map(|x| f.value(x)).collect())
}

/// Uniform draws on `[lo, hi]` from a plain seeded generator, for one-dimensional checks.
pub fn uniform_samples(lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `E(β) = laplace − f* − (1/β) ln ε`.
pub fn error_budget(beta: f64, epsilon: f64, f_samples: &[f64], fstar: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(laplace_value(beta, f_samples)? - fstar - epsilon.ln() / beta)
}

/// Inputs of the β condition `(1 − ε) E[e^{−β f(x_in)}] ≥ β L_f C₃ e^{−β f*}`.
#[derive(Debug, Clone)]
pub struct Theorem51Setup<'a> {
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub schedule: StepSchedule,
    pub l_f: f64,
    pub var_init: f64,
    pub epsilon: f64,
    pub f_samples: &'a [f64],
    pub fstar: f64,
    pub d: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// C₃ is infinite for these parameters.
    Diverges,
    /// The Monte-Carlo expectation is dominated by a handful of samples.
    Unverifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem51Report {
    /// `ln((1 − ε) E[e^{−β(f − f*)}])`.
    pub lhs_log: f64,
    /// `ln(β L_f C₃)`.
    pub rhs_log: f64,
    pub c3: Option<f64>,
    pub effective_samples: f64,
    pub verdict: Verdict,
}

impl Theorem51Report {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// Below this effective sample size the Monte-Carlo left side carries no information.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

/// Both sides are compared in log space with the common factor `e^{−β f*}` divided out.
pub fn check_theorem51_condition(setup: &Theorem51Setup<'_>) -> Result<Theorem51Report> {
    if !(setup.epsilon > 0.0 && setup.epsilon < 1.0) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (0, 1), got {}",
            setup.epsilon
        )));
    }
    let s = shifted_log_mean(setup.beta, setup.f_samples)?;
    let lhs_log = (1.0 - setup.epsilon).ln() + s.mean.ln() - setup.beta * (s.fmin - setup.fstar);
    let lip = gradient_bounds(setup.l_f, setup.d, setup.sigma)?;
    let condition = check_consensus_condition(setup.lambda, setup.delta, &setup.schedule);
    if !condition.satisfied || condition.schedule_summable != Summability::Yes {
        return Ok(Theorem51Report {
            lhs_log,
            rhs_log: f64::INFINITY,
            c3: None,
            effective_samples: s.ess,
            verdict: Verdict::Diverges,
        });
    }
    let c3 = c3_series(
        setup.lambda,
        setup.delta,
        &setup.schedule,
        lip.l_g(),
        lip.m_g(),
        setup.var_init,
    )?
    .value;
    let rhs_log = (setup.beta * setup.l_f * c3).ln();
    let verdict = if s.ess < MIN_EFFECTIVE_SAMPLES && s.fmin > setup.fstar {
        Verdict::Unverifiable
    } else if lhs_log >= rhs_log {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    Ok(Theorem51Report {
        lhs_log,
        rhs_log,
        c3: Some(c3),
        effective_samples: s.ess,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::rastrigin1d_example;
    use crate::objective::Objective;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const ZERO: StepSchedule = StepSchedule::Constant { c: 0.0 };

    #[test]
    fn consensus_condition_examples() {
        let c = check_consensus_condition(0.75, 0.25, &ZERO);
        assert_abs_diff_eq!(c.value, 0.125, epsilon = 1e-15);
        assert!(c.satisfied);
        let c = check_consensus_condition(0.01, 0.1, &StepSchedule::Harmonic { c: 0.5 });
        assert_abs_diff_eq!(c.value, 0.9901, epsilon = 1e-12);
        assert!(!c.satisfied);
        assert_eq!(c.schedule_summable, Summability::No);
        let c = check_consensus_condition(1.0, 0.0, &ZERO);
        assert_eq!(c.value, 0.0);
        assert!(c.satisfied);
    }

    #[test]
    fn consensus_bound_examples() {
        assert_eq!(consensus_bound(0, 0.3, 0.9, &ZERO, 5.0, 1.0).unwrap(), 2.0);
        assert_eq!(consensus_bound(1, 1.0, 0.0, &ZERO, 5.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(consensus_bound(3, 0.75, 0.25, &ZERO, 5.0, 1.0).unwrap(), 0.03125, epsilon = 1e-15);
        assert!(consensus_bound(3, 0.75, 0.25, &ZERO, 5.0, -1.0).is_err());
    }

    #[test]
    fn bound_series_products() {
        let sched = StepSchedule::Geometric { c: 0.1, r: 0.5 };
        let s = BoundSeries::new(0.75, 0.25, &sched, 2.0 * std::f64::consts::PI + 0.1, 2, 1e-2, 1.0, 20).unwrap();
        for k in 1..=20 {
            assert_eq!(s.products[k], s.products[k - 1] * s.c1[k - 1]);
        }
        assert!(s.c3.is_some());
        let s = BoundSeries::new(0.01, 0.1, &ZERO, 1.0, 2, 1e-2, 1.0, 5).unwrap();
        assert!(s.c3.is_none());
    }

    #[test]
    fn zero_alpha_bound_is_geometric() {
        for k in 0..30 {
            let direct = 2.0 * 0.7 * (2.0f64 * ((1.0f64 - 0.6).powi(2) + 0.2 * 0.2)).powi(k as i32);
            assert_relative_eq!(consensus_bound(k, 0.6, 0.2, &ZERO, 3.0, 0.7).unwrap(), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn c3_against_long_direct_sum() {
        let sched = StepSchedule::Geometric { c: 0.5, r: 0.5 };
        let (lambda, delta, l_g, m_g, var) = (0.75, 0.25, 400.0, 2.0, 1.0 / 3.0);
        let est = c3_series(lambda, delta, &sched, l_g, m_g, var).unwrap();
        let mut direct = 0.0;
        let mut p = 1.0;
        for n in 0..5000 {
            direct += (lambda + delta) * (2.0 * p * var).sqrt() + sched.alpha(n) * m_g;
            p *= c1(n, lambda, delta, &sched, l_g);
        }
        assert_relative_eq!(est.value, direct, max_relative = 1e-12);
        assert!(est.tail_bound <= 1e-15 * est.value);
    }

    #[test]
    fn c3_degenerate_is_zero() {
        let est = c3_series(1.0, 0.0, &ZERO, 1.0, 1.0, 5.0).unwrap();
        assert_eq!(est.value, (2.0f64 * 5.0).sqrt());
        let est = c3_series(1.0, 0.0, &ZERO, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(c3_series(0.0, 0.0, &ZERO, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_kappa_examples() {
        let c = gamma_kappa(0.25, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(c.gamma, 0.8125, epsilon = 1e-15);
        assert_abs_diff_eq!(c.kappa, 0.1875 / 5.5, epsilon = 1e-15);
        assert!(c.kappa < (0.1875f64 / 4.25).sqrt());
        let near_one = gamma_kappa(0.5, 0.0, 1.0 - 1e-9).unwrap();
        assert!(near_one.gamma < 1.0 && near_one.gamma > 1.0 - 1e-8);
        assert!(matches!(gamma_kappa(0.0, 0.0, 0.5), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn gamma_monotone() {
        let mut prev = 0.0;
        for i in 1..99 {
            let g = gamma_kappa(0.3, 0.1, i as f64 / 100.0).unwrap().gamma;
            assert!(g > prev);
            prev = g;
        }
        let mut prev = 1.0;
        for i in 1..50 {
            let g = gamma_kappa(i as f64 / 100.0, 0.0, 0.5).unwrap().gamma;
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn iteration_budget_examples() {
        assert_eq!(iteration_budget(1.0, 0.01, 0.8125).unwrap(), 23);
        assert_eq!(iteration_budget(1.0, 1.0 - 1e-12, 0.8125).unwrap(), 1);
        assert_eq!(iteration_budget(1.0, 0.01, 1e-300).unwrap(), 1);
        assert_eq!(iteration_budget(1.0, 2.0, 0.5).unwrap(), 0);
    }

    #[test]
    fn iteration_budget_is_tight() {
        for &(w0, eps, g) in &[(1.0, 1e-3, 0.9), (5.0, 0.2, 0.5), (3.0, 1e-8, 0.999), (1.0, 0.125, 0.5)] {
            let k = iteration_budget(w0, eps, g).unwrap() as i32;
            assert!(g.powi(k) * w0 <= eps);
            assert!(g.powi(k - 1) * w0 > eps);
        }
    }

    #[test]
    fn q_value_examples() {
        let g = GrowthConditionParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(q_value(&g, std::f64::consts::SQRT_2).unwrap(), 0.5, epsilon = 1e-15);
        let tiny = GrowthConditionParams::new(1e-12, 1.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(q_value(&tiny, 1.0).unwrap(), 5e-13, epsilon = 1e-25);
        assert_eq!(q_value(&g, 100.0).unwrap(), 0.5);
        assert!(q_value(&g, 0.0).is_err());
    }

    #[test]
    fn lemma61_degenerate_swarm() {
        let g = GrowthConditionParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pos = vec![vec![0.0]; 5];
        let out = lemma61_bound(&pos, &[0.0; 5], &[0.0], 0.0, &g, 0.5, 0.1, 10.0, 0.2).unwrap();
        assert_eq!(out.distance, 0.0);
        assert!(out.holds);
        assert_abs_diff_eq!(out.bound, 0.3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn lemma61_errors() {
        let g = GrowthConditionParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pos = vec![vec![2.0]];
        assert!(matches!(
            lemma61_bound(&pos, &[4.0], &[0.0], 0.0, &g, 0.5, 0.1, 10.0, 0.2),
            Err(Error::EmptyIndicator { .. })
        ));
        assert!(matches!(
            lemma61_bound(&pos, &[4.0], &[0.0], 0.0, &g, 0.5, 0.9, 10.0, 0.2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lemma61_large_beta_limit() {
        let g = GrowthConditionParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pos = vec![vec![0.1], vec![0.9], vec![-0.5]];
        let f: Vec<f64> = pos.iter().map(|x| rastrigin1d_example(x[0])).collect();
        let out = lemma61_bound(&pos, &f, &[0.0], 0.0, &g, 0.2, 0.3, 1e6, 0.4).unwrap();
        assert_abs_diff_eq!(out.bound, 0.7f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn ball_max_grid() {
        let obj = Objective::from_fn(1, |x| rastrigin1d_example(x[0]));
        let m = ball_max(obj.function().as_ref(), &[0.0], 0.25, 2001).unwrap();
        assert_abs_diff_eq!(m, rastrigin1d_example(0.25), epsilon = 1e-12);
        let sq = Objective::from_fn(2, |x| x[0] * x[0] + x[1] * x[1]);
        let m = ball_max(sq.function().as_ref(), &[0.0, 0.0], 1.0, 201).unwrap();
        assert!(m <= 1.0 + 1e-12 && m > 0.99);
        let cube = Objective::from_fn(3, |_| 0.0);
        assert!(ball_max(cube.function().as_ref(), &[0.0; 3], 1.0, 11).is_err());
    }

    #[test]
    fn laplace_basics() {
        for beta in [1e-3, 1.0, 1e5, 1e20] {
            assert_abs_diff_eq!(laplace_value(beta, &[2.5; 7]).unwrap(), 2.5, epsilon = 1e-12);
        }
        let s = [0.0, 1.0, 2.0, 5.0];
        assert_abs_diff_eq!(laplace_value(1e-9, &s).unwrap(), 2.0, epsilon = 1e-6);
        let mut prev = f64::INFINITY;
        for i in -3..8 {
            let v = laplace_value(10f64.powi(i), &s).unwrap();
            assert!(v <= prev + 1e-12);
            assert!(v >= 0.0 && v <= 2.0 + 1e-12);
            prev = v;
        }
        assert!(laplace_value(1.0, &[]).is_err());
    }

    #[test]
    fn error_budget_basics() {
        let e = error_budget(10.0, 0.5, &[1.0; 4], 1.0).unwrap();
        assert_abs_diff_eq!(e, -(0.5f64).ln() / 10.0, epsilon = 1e-15);
        let gap = error_budget(10.0, 1.0, &[1.0, 2.0], 0.0).unwrap();
        assert_abs_diff_eq!(gap, laplace_value(10.0, &[1.0, 2.0]).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn theorem51_degenerate_holds() {
        let f = vec![0.3; 100];
        let setup = Theorem51Setup {
            beta: 1e3,
            lambda: 1.0,
            delta: 0.0,
            schedule: ZERO,
            l_f: 1.0,
            var_init: 0.0,
            epsilon: 0.5,
            f_samples: &f,
            fstar: 0.3,
            d: 1,
            sigma: 0.01,
        };
        let rep = check_theorem51_condition(&setup).unwrap();
        assert_eq!(rep.c3, Some(0.0));
        assert!(rep.holds());
    }

    fn square_setup(f: &[f64], var_init: f64) -> Theorem51Setup<'_> {
        Theorem51Setup {
            beta: 10.0,
            lambda: 0.75,
            delta: 0.25,
            schedule: StepSchedule::Geometric { c: 0.5, r: 0.5 },
            l_f: 2.0,
            var_init,
            epsilon: 0.5,
            f_samples: f,
            fstar: 0.0,
            d: 1,
            sigma: 0.01,
        }
    }

    #[test]
    fn theorem51_matches_direct_evaluation() {
        let f: Vec<f64> = uniform_samples(-1.0, 1.0, DEFAULT_MC_SAMPLES, 1).iter().map(|x| x * x).collect();
        let setup = square_setup(&f, 1.0 / 3.0);
        let rep = check_theorem51_condition(&setup).unwrap();
        // Plain arithmetic, no shift, no log domain.
        let lhs = 0.5 * f.iter().map(|v| (-10.0 * v).exp()).sum::<f64>() / f.len() as f64;
        let l_g = 2.0 * 2.0 / 0.01;
        let mut c3 = 0.0;
        let mut p = 1.0;
        for n in 0..2000 {
            let a = 0.5 * 0.5f64.powi(n);
            c3 += 1.0 * (2.0 * p / 3.0f64).sqrt() + a * 2.0;
            p *= 2.0 * (0.0625 + 0.0625 + a * a * l_g * l_g);
        }
        let rhs = 10.0 * 2.0 * c3;
        assert_eq!(rep.holds(), lhs >= rhs);
        assert_relative_eq!(rep.lhs_log, lhs.ln(), max_relative = 1e-12);
        assert_relative_eq!(rep.rhs_log, rhs.ln(), max_relative = 1e-12);
    }

    #[test]
    fn theorem51_fails_for_huge_variance() {
        let f: Vec<f64> = uniform_samples(-1.0, 1.0, 1000, 2).iter().map(|x| x * x).collect();
        let rep = check_theorem51_condition(&square_setup(&f, 1e12)).unwrap();
        assert_eq!(rep.verdict, Verdict::Fails);
    }

    #[test]
    fn theorem51_unverifiable_at_extreme_beta() {
        let f: Vec<f64> = uniform_samples(-1.0, 1.0, 1000, 3).iter().map(|x| x * x).collect();
        let mut setup = square_setup(&f, 1.0 / 3.0);
        setup.beta = 1e20;
        assert_eq!(check_theorem51_condition(&setup).unwrap().verdict, Verdict::Unverifiable);
    }

    #[test]
    fn theorem51_diverging_series() {
        let f = vec![0.0; 10];
        let mut setup = square_setup(&f, 1.0);
        setup.lambda = 0.01;
        setup.delta = 0.1;
        assert_eq!(check_theorem51_condition(&setup).unwrap().verdict, Verdict::Diverges);
    }
}
