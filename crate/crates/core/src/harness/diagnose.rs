//! Empirical series set against the theoretical bounds.

use serde::Serialize;

use super::config::{ExperimentConfig, Target};
use super::run::{AggregateReport, RunRecord};
use crate::benchmarks;
use crate::error::Result;
use crate::objective::{estimate_lipschitz, gradient_bounds};
use crate::theory::{check_consensus_condition, consensus_bound, gamma_kappa, ConsensusCondition, DEFAULT_XI};

/// Checkpoints whose mean diameter is below this are excluded from rate fits.
pub const FIT_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Copy)]
pub struct DiagnoseInputs {
    /// Lipschitz constant of f; taken from the benchmark or estimated when absent.
    pub l_f: Option<f64>,
    pub xi: f64,
    pub lipschitz_samples: usize,
}

impl Default for DiagnoseInputs {
    fn default() -> Self {
        Self {
            l_f: None,
            xi: DEFAULT_XI,
            lipschitz_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticPoint {
    pub k: usize,
    pub mean_diameter: f64,
    pub diameter_bound: f64,
    pub mean_w_k: Option<f64>,
    /// `γ^k · mean W₀`.
    pub w_envelope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub condition: ConsensusCondition,
    pub l_f: f64,
    pub l_f_estimated: bool,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    /// Slope of `ln(mean diameter)` against k.
    pub diameter_slope: Option<f64>,
    /// `ln(2((1 − λ)² + δ²))`, the per-step rate of the α-free bound.
    pub predicted_slope: f64,
    pub points: Vec<DiagnosticPoint>,
    pub warnings: Vec<String>,
}

impl Diagnostic {
    pub fn bound_violations(&self) -> Vec<usize> {
        self.points
            .iter()
            .filter(|p| p.mean_diameter > p.diameter_bound)
            .map(|p| p.k)
            .collect()
    }
}

/// Least-squares slope of `ln y` on `x`, over points with `y ≥ floor`.
pub fn log_linear_slope(xs: &[f64], ys: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y >= floor && y.is_finite())
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Value of each record's series at every checkpoint k, holding a finished run at its last value.
fn mean_series(records: &[RunRecord], get: impl Fn(&super::run::Checkpoint) -> Option<f64>) -> Vec<(usize, Option<f64>)> {
    let longest = records.iter().max_by_key(|r| r.series.len()).map(|r| &r.series);
    let Some(longest) = longest else {
        return Vec::new();
    };
    longest
        .iter()
        .map(|cp| {
            let mut total = 0.0;
            let mut any_missing = false;
            for r in records {
                let at = r.series.iter().rev().find(|c| c.k <= cp.k).unwrap_or(&r.series[0]);
                match get(at) {
                    Some(v) => total += v,
                    None => any_missing = true,
                }
            }
            (cp.k, (!any_missing).then(|| total / records.len() as f64))
        })
        .collect()
}

pub fn diagnose(config: &ExperimentConfig, records: &[RunRecord], inputs: &DiagnoseInputs) -> Result<Diagnostic> {
    let p = &config.params;
    let condition = check_consensus_condition(p.lambda, p.delta, &config.schedule);
    let mut warnings = Vec::new();
    if !condition.satisfied {
        warnings.push(format!(
            "(1-lambda)^2 + delta^2 = {:.4} is not below 1/2: the consensus bound grows, \
             although concentration is often observed regardless",
            condition.value
        ));
    }
    let (l_f, l_f_estimated) = match inputs.l_f {
        Some(v) => (v, false),
        None => match &config.target {
            Target::Benchmark { name, d } => {
                let spec = benchmarks::lookup(name, *d)?;
                match spec.lipschitz {
                    Some(v) => (v, false),
                    None => {
                        let obj = spec.objective();
                        let est = estimate_lipschitz(&obj, &spec.default_box, inputs.lipschitz_samples, config.seed)?;
                        (est.value(), true)
                    }
                }
            }
            Target::Dnn { .. } => {
                warnings.push("no Lipschitz constant for network targets; bound uses L_f = 0".into());
                (0.0, true)
            }
        },
    };
    if l_f_estimated && inputs.l_f.is_none() {
        warnings.push(format!("L_f = {l_f:.4} is a sampled estimate, not a certified bound"));
    }
    let lip = gradient_bounds(l_f, config.dim(), p.fd.sigma())?;
    let constants = gamma_kappa(p.lambda, p.delta, inputs.xi).ok();
    if constants.is_none() {
        warnings.push("2*lambda - 2*lambda^2 - 2*delta^2 <= 0: no contraction envelope for W_k".into());
    }

    let diam = mean_series(records, |c| Some(c.diameter));
    let wk = mean_series(records, |c| c.w_k);
    // The bound is stated for E‖x^i − x̄‖² ≤ 2∏C₁·Var; the observed initial diameter gives Var ≈ D₀ / 2.
    let var_init = diam.first().and_then(|d| d.1).unwrap_or(0.0) / 2.0;
    let w0 = wk.first().and_then(|w| w.1);
    let mut points = Vec::with_capacity(diam.len());
    for ((k, d), (_, w)) in diam.iter().zip(&wk) {
        let bound = consensus_bound(*k, p.lambda, p.delta, &config.schedule, lip.l_g(), var_init)?;
        points.push(DiagnosticPoint {
            k: *k,
            mean_diameter: d.unwrap_or(f64::NAN),
            diameter_bound: bound,
            mean_w_k: *w,
            w_envelope: match (constants, w0) {
                (Some(c), Some(w0)) => Some(c.gamma.powi(*k as i32) * w0),
                _ => None,
            },
        });
    }
    let ks: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let ds: Vec<f64> = points.iter().map(|p| p.mean_diameter).collect();
    Ok(Diagnostic {
        condition,
        l_f,
        l_f_estimated,
        gamma: constants.map(|c| c.gamma),
        kappa: constants.map(|c| c.kappa),
        diameter_slope: log_linear_slope(&ks, &ds, FIT_FLOOR),
        predicted_slope: (2.0 * condition.value).ln(),
        points,
        warnings,
    })
}

pub fn diagnose_report(report: &AggregateReport, inputs: &DiagnoseInputs) -> Result<Diagnostic> {
    diagnose(&report.config, &report.records, inputs)
}

pub fn render(d: &Diagnostic) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "(1-lambda)^2 + delta^2 = {:.4} ({})\n",
        d.condition.value,
        if d.condition.satisfied { "satisfied" } else { "violated" }
    ));
    out.push_str(&format!(
        "L_f = {:.4}{}\n",
        d.l_f,
        if d.l_f_estimated { " (estimated)" } else { "" }
    ));
    if let (Some(g), Some(k)) = (d.gamma, d.kappa) {
        out.push_str(&format!("gamma = {g:.6}, kappa = {k:.6}\n"));
    }
    let slope = d.diameter_slope.map_or("-".into(), |s| format!("{s:.4}"));
    out.push_str(&format!(
        "diameter slope {slope} per step (alpha-free bound rate {:.4})\n",
        d.predicted_slope
    ));
    let violations = d.bound_violations();
    out.push_str(&format!(
        "diameter above bound at {} of {} checkpoints\n",
        violations.len(),
        d.points.len()
    ));
    for w in &d.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out.push_str(&format!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}\n",
        "k", "diameter", "bound", "W_k", "gamma^k W0"
    ));
    let e = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
    for p in &d.points {
        out.push_str(&format!(
            "{:>6} {:>12.3e} {:>12.3e} {:>12} {:>12}\n",
            p.k,
            p.mean_diameter,
            p.diameter_bound,
            e(p.mean_w_k),
            e(p.w_envelope)
        ));
    }
    out
}
