//! Black-box objectives with evaluation accounting, and the forward-difference
//! gradient estimator used by the extra descent step.
//!
//! Every call to [`Objective::eval`] bumps a shared atomic counter, including
//! the probes made while estimating a gradient, so a stepper's reported cost
//! is exactly the number of times the user's function ran.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic map from ℝ^d to ℝ.
pub trait ObjectiveFn: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

struct ClosureFn<F> {
    dim: usize,
    f: F,
}

impl<F> ObjectiveFn for ClosureFn<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// An objective function together with its evaluation counter.
pub struct Objective {
    inner: Arc<dyn ObjectiveFn>,
    evals: AtomicU64,
}

impl Objective {
    pub fn new(f: impl ObjectiveFn + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn from_arc(inner: Arc<dyn ObjectiveFn>) -> Self {
        Self {
            inner,
            evals: AtomicU64::new(0),
        }
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(ClosureFn { dim, f })
    }

    /// Same function, fresh counter.
    pub fn fresh(&self) -> Self {
        Self::from_arc(Arc::clone(&self.inner))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn function(&self) -> &Arc<dyn ObjectiveFn> {
        &self.inner
    }
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim())
            .field("evals", &self.eval_count())
            .finish()
    }
}

/// Axis-aligned box `[lo_l, hi_l]` per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(l) = (0..lo.len()).find(|&l| !(lo[l] < hi[l])) {
            return Err(Error::Config(format!(
                "degenerate box along coordinate {l}: lo = {} must be below hi = {}",
                lo[l], hi[l]
            )));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| rng.random_range(lo..=hi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }
}

/// The finite-difference interval σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffConfig {
    sigma: f64,
}

impl FiniteDiffConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "finite-difference interval must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Anything that turns function values into a gradient surrogate.
///
/// Only the forward difference is provided; central differences or smoothed
/// estimators can be plugged in through this trait.
pub trait GradientEstimator: Sync {
    fn estimate(&self, obj: &Objective, x: &[f64]) -> Result<Vec<f64>>;

    /// Function evaluations consumed by one call in dimension `d`.
    fn evals_per_estimate(&self, d: usize) -> u64;
}

impl GradientEstimator for FiniteDiffConfig {
    fn estimate(&self, obj: &Objective, x: &[f64]) -> Result<Vec<f64>> {
        forward_difference_gradient(obj, x, self)
    }

    fn evals_per_estimate(&self, d: usize) -> u64 {
        d as u64 + 1
    }
}

/// `[g]_l = (f(x + σ e_l) − f(x)) / σ`, with `f(x)` evaluated once.
pub fn forward_difference_gradient(
    obj: &Objective,
    x: &[f64],
    cfg: &FiniteDiffConfig,
) -> Result<Vec<f64>> {
    if x.len() != obj.dim() {
        return Err(Error::Shape {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "gradient requested at a non-finite point".into(),
        ));
    }
    let sigma = cfg.sigma();
    let fx = obj.eval(x);
    if !fx.is_finite() {
        return Err(Error::Estimation { coordinate: None });
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for l in 0..x.len() {
        probe[l] = x[l] + sigma;
        let fp = obj.eval(&probe);
        probe[l] = x[l];
        if !fp.is_finite() {
            return Err(Error::Estimation { coordinate: Some(l) });
        }
        grad.push((fp - fx) / sigma);
    }
    Ok(grad)
}

/// Gradients on a subset of particles; everyone else gets the zero vector.
///
/// `batch` holds zero-based particle indices.
pub fn minibatch_gradients<E: GradientEstimator + ?Sized>(
    obj: &Objective,
    positions: &[Vec<f64>],
    batch: &[usize],
    estimator: &E,
) -> Result<Vec<Vec<f64>>> {
    let d = obj.dim();
    let mut out = vec![vec![0.0; d]; positions.len()];
    for &i in batch {
        let x = positions.get(i).ok_or_else(|| {
            Error::Precondition(format!(
                "batch index {i} out of range for {} particles",
                positions.len()
            ))
        })?;
        out[i] = estimator.estimate(obj, x)?;
    }
    Ok(out)
}

/// Bounds on the forward-difference estimator implied by a Lipschitz constant.
///
/// `M_g` and `L_g` are derived on access so they always match `(L_f, d, σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzData {
    l_f: f64,
    dim: usize,
    sigma: f64,
}

impl LipschitzData {
    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Bound on ‖g(x)‖: `√d · L_f`.
    pub fn m_g(&self) -> f64 {
        (self.dim as f64).sqrt() * self.l_f
    }

    /// Lipschitz constant of g: `2√d · L_f / σ`.
    pub fn l_g(&self) -> f64 {
        2.0 * (self.dim as f64).sqrt() * self.l_f / self.sigma
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        gradient_bounds(self.l_f, self.dim, sigma)
    }
}

pub fn gradient_bounds(l_f: f64, d: usize, sigma: f64) -> Result<LipschitzData> {
    if !(l_f >= 0.0 && l_f.is_finite()) || d == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!(
            "gradient bounds need L_f >= 0, d >= 1, sigma > 0 (got L_f={l_f}, d={d}, sigma={sigma})"
        )));
    }
    Ok(LipschitzData {
        l_f,
        dim: d,
        sigma,
    })
}

/// Where a Lipschitz constant came from; estimates are lower bounds only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", content = "value", rename_all = "snake_case")]
pub enum LipschitzConstant {
    Declared(f64),
    Estimated(f64),
}

impl LipschitzConstant {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Declared(v) | Self::Estimated(v) => v,
        }
    }

    pub fn is_estimate(&self) -> bool {
        matches!(self, Self::Estimated(_))
    }
}

/// Largest difference quotient `|f(x) − f(y)| / ‖x − y‖` over `samples`
/// uniformly drawn pairs in `domain`.
pub fn estimate_lipschitz(
    obj: &Objective,
    domain: &SearchBox,
    samples: usize,
    seed: u64,
) -> Result<LipschitzConstant> {
    if samples < 2 {
        return Err(Error::Config(format!(
            "Lipschitz estimation needs at least 2 samples, got {samples}"
        )));
    }
    // Re-validate: the fields are public and may have been edited.
    let domain = SearchBox::new(domain.lo.clone(), domain.hi.clone())?;
    if domain.dim() != obj.dim() {
        return Err(Error::Shape {
            expected: obj.dim(),
            got: domain.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let y = domain.sample(&mut rng);
        let dist = euclidean(&x, &y);
        if dist == 0.0 {
            continue;
        }
        let q = (obj.eval(&x) - obj.eval(&y)).abs() / dist;
        if q.is_finite() {
            best = best.max(q);
        }
    }
    Ok(LipschitzConstant::Estimated(best))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sphere(d: usize) -> Objective {
        Objective::from_fn(d, |x| x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn forward_difference_on_sphere() {
        let obj = sphere(2);
        let g = forward_difference_gradient(&obj, &[1.0, 0.0], &FiniteDiffConfig::new(0.01).unwrap())
            .unwrap();
        assert_abs_diff_eq!(g[0], 2.01, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.01, epsilon = 1e-12);
        assert_eq!(obj.eval_count(), 3);
    }

    #[test]
    fn forward_difference_constant_is_zero() {
        let obj = Objective::from_fn(3, |_| 4.2);
        let g = forward_difference_gradient(&obj, &[0.3, -1.0, 7.0], &FiniteDiffConfig::new(0.5).unwrap())
            .unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn forward_difference_one_dimensional() {
        let obj = sphere(1);
        let g = forward_difference_gradient(&obj, &[0.0], &FiniteDiffConfig::new(0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(g[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_probe_reports_coordinate() {
        let obj = Objective::from_fn(2, |x| if x[1] > 0.5 { f64::NAN } else { x[0] });
        let err = forward_difference_gradient(&obj, &[0.0, 0.45], &FiniteDiffConfig::new(0.1).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Estimation { coordinate: Some(1) }));

        let obj = Objective::from_fn(1, |_| f64::INFINITY);
        let err = forward_difference_gradient(&obj, &[0.0], &FiniteDiffConfig::new(0.1).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Estimation { coordinate: None }));
    }

    #[test]
    fn sigma_must_be_positive() {
        assert!(FiniteDiffConfig::new(0.0).is_err());
        assert!(FiniteDiffConfig::new(-1e-3).is_err());
        assert!(FiniteDiffConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn minibatch_zero_outside_batch() {
        let obj = sphere(1);
        let cfg = FiniteDiffConfig::new(0.1).unwrap();
        let positions = vec![vec![0.0], vec![1.0]];
        let g = minibatch_gradients(&obj, &positions, &[1], &cfg).unwrap();
        assert_eq!(g[0], vec![0.0]);
        assert_abs_diff_eq!(g[1][0], 2.1, epsilon = 1e-12);
        assert_eq!(obj.eval_count(), 2);

        let g = minibatch_gradients(&obj, &positions, &[], &cfg).unwrap();
        assert!(g.iter().all(|v| v == &vec![0.0]));
        assert_eq!(obj.eval_count(), 2);
    }

    #[test]
    fn minibatch_full_matches_per_particle() {
        let obj = sphere(2);
        let cfg = FiniteDiffConfig::new(1e-3).unwrap();
        let positions = vec![vec![0.5, -1.0], vec![2.0, 3.0], vec![-0.25, 0.0]];
        let full = minibatch_gradients(&obj, &positions, &[0, 1, 2], &cfg).unwrap();
        for (x, g) in positions.iter().zip(&full) {
            assert_eq!(g, &forward_difference_gradient(&obj, x, &cfg).unwrap());
        }
        assert!(minibatch_gradients(&obj, &positions, &[3], &cfg).is_err());
    }

    #[test]
    fn gradient_bound_values() {
        let b = gradient_bounds(1.0, 4, 0.5).unwrap();
        assert_abs_diff_eq!(b.m_g(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.l_g(), 8.0, epsilon = 1e-15);

        let b = gradient_bounds(1.0, 1, 2.0).unwrap();
        assert_abs_diff_eq!(b.m_g(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.l_g(), 1.0, epsilon = 1e-15);

        let tiny = gradient_bounds(1e-300, 3, 0.1).unwrap();
        assert!(tiny.m_g() < 1e-299 && tiny.l_g() < 1e-297);

        // L_g follows sigma.
        let moved = b.with_sigma(0.5).unwrap();
        assert_abs_diff_eq!(moved.l_g(), 4.0, epsilon = 1e-15);
        assert!(gradient_bounds(1.0, 0, 1.0).is_err());
        assert!(gradient_bounds(1.0, 1, 0.0).is_err());
    }

    #[test]
    fn lipschitz_estimates() {
        let linear = Objective::from_fn(1, |x| 3.0 * x[0] + 1.0);
        let unit = SearchBox::cube(0.0, 1.0, 1).unwrap();
        let est = estimate_lipschitz(&linear, &unit, 200, 7).unwrap();
        assert!(est.is_estimate());
        assert!(est.value() <= 3.0 + 1e-12 && est.value() > 3.0 - 1e-9);

        let flat = Objective::from_fn(2, |_| 1.0);
        let est = estimate_lipschitz(&flat, &SearchBox::cube(-1.0, 1.0, 2).unwrap(), 100, 1).unwrap();
        assert_eq!(est.value(), 0.0);

        let abs = Objective::from_fn(1, |x| x[0].abs());
        let est = estimate_lipschitz(&abs, &SearchBox::cube(-1.0, 1.0, 1).unwrap(), 5000, 3).unwrap();
        assert!((est.value() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_rejects_degenerate_input() {
        let f = sphere(1);
        assert!(SearchBox::cube(1.0, 1.0, 1).is_err());
        let flat = SearchBox {
            lo: vec![0.0],
            hi: vec![0.0],
        };
        assert!(matches!(estimate_lipschitz(&f, &flat, 10, 0), Err(Error::Config(_))));
        let ok = SearchBox::cube(0.0, 1.0, 1).unwrap();
        assert!(estimate_lipschitz(&f, &ok, 1, 0).is_err());
    }
}
