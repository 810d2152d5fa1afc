//! Configuration grids of the published comparison tables.

use super::config::{ExperimentConfig, Target};
use crate::error::{Error, Result};
use crate::neural::{DataConfig, MlpArchitecture};
use crate::swarm::{CBOParams, InitDistribution, Method, StepSchedule};

pub const PRESETS: &[&str] = &["table2", "table3", "table4"];

const FULL_RUNS: usize = 100;
const FULL_ITERS: usize = 10_000;

fn scaled(full: usize, scale: f64) -> usize {
    ((full as f64 * scale).round() as usize).max(1)
}

fn comparison_base(scale: f64) -> ExperimentConfig {
    ExperimentConfig {
        params: CBOParams::new(0.01, 0.1, 1e20, 1e-5).expect("valid preset"),
        schedule: StepSchedule::Geometric { c: 1.0, r: 0.99 },
        runs: scaled(FULL_RUNS, scale),
        max_iters: scaled(FULL_ITERS, scale),
        ..Default::default()
    }
}

fn benchmark(name: &str, d: usize) -> Target {
    Target::Benchmark { name: name.into(), d }
}

/// Rows of the particle-count comparison: benchmark and dimension.
pub const TABLE2_ROWS: &[(&str, usize)] = &[
    ("rastrigin", 3),
    ("rastrigin", 10),
    ("salomon", 3),
    ("salomon", 10),
    ("griewank", 3),
    ("griewank", 10),
    ("ackley", 3),
    ("xinsheyang4", 3),
    ("bartels_conn", 2),
    ("schaffer4", 2),
];

pub const TABLE3_ROWS: &[(&str, usize)] = &[
    ("rastrigin", 2),
    ("salomon", 2),
    ("griewank", 2),
    ("ackley", 2),
    ("xinsheyang4", 2),
    ("bartels_conn", 2),
    ("schaffer4", 2),
];

pub const TABLE4_ARCHS: &[&[usize]] = &[
    &[5, 10, 1],
    &[5, 5, 5, 5, 1],
    &[5, 10, 10, 10, 1],
    &[10, 10, 1],
    &[10, 5, 5, 5, 1],
    &[10, 10, 10, 10, 1],
];

/// `scale ∈ (0, 1]` multiplies both the run count and the iteration cap.
pub fn table_preset(name: &str, scale: f64) -> Result<Vec<ExperimentConfig>> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Config(format!("scale must lie in (0, 1], got {scale}")));
    }
    let base = comparison_base(scale);
    let mut out = Vec::new();
    match name {
        "table2" => {
            for &(bench, d) in TABLE2_ROWS {
                for method in [Method::Escbo, Method::Vanilla] {
                    for mult in [20, 40, 60] {
                        out.push(ExperimentConfig {
                            method,
                            target: benchmark(bench, d),
                            particles: mult * d,
                            init: InitDistribution::Uniform { lo: -5.0, hi: 5.0 },
                            ..base.clone()
                        });
                    }
                }
            }
        }
        "table3" => {
            let inits = [
                InitDistribution::Uniform { lo: -3.0, hi: 3.0 },
                InitDistribution::Uniform { lo: 2.0, hi: 6.0 },
                InitDistribution::Gaussian { mean: 0.0, variance: 3.0 },
            ];
            for &(bench, d) in TABLE3_ROWS {
                for method in [Method::Escbo, Method::Vanilla] {
                    for init in &inits {
                        out.push(ExperimentConfig {
                            method,
                            target: benchmark(bench, d),
                            particles: 120,
                            init: init.clone(),
                            ..base.clone()
                        });
                    }
                }
            }
        }
        "table4" => {
            for widths in TABLE4_ARCHS {
                out.push(ExperimentConfig {
                    method: Method::Fescbo { batch_size: 10 },
                    target: Target::Dnn {
                        arch: MlpArchitecture::new(widths.to_vec())?,
                        data: DataConfig::default(),
                    },
                    particles: 100,
                    params: CBOParams::new(1.0, 1.0, 1e20, 1e-3)?,
                    init: InitDistribution::Uniform { lo: -3.0, hi: 3.0 },
                    ..base.clone()
                });
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown preset `{name}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table2_grid() {
        let grid = table_preset("table2", 1.0).unwrap();
        assert_eq!(grid.len(), TABLE2_ROWS.len() * 6);
        assert!(grid.iter().any(|c| c.target == benchmark("rastrigin", 3) && c.particles == 60));
        assert!(grid.iter().all(|c| c.runs == 100 && c.max_iters == 10_000 && c.params.beta == 1e20));
        for c in &grid {
            c.validate().unwrap();
        }
    }

    #[test]
    fn table3_grid() {
        let grid = table_preset("table3", 0.3).unwrap();
        assert!(grid
            .iter()
            .any(|c| c.init == InitDistribution::Uniform { lo: 2.0, hi: 6.0 } && c.particles == 120));
        assert!(grid.iter().all(|c| c.runs == 30 && c.max_iters == 3000));
    }

    #[test]
    fn table4_grid() {
        let grid = table_preset("table4", 1.0).unwrap();
        let dims: Vec<usize> = grid.iter().map(|c| c.dim()).collect();
        assert_eq!(dims, vec![71, 96, 291, 121, 121, 341]);
        assert!(grid.iter().any(|c| matches!(&c.target, Target::Dnn { arch, .. } if arch.widths() == [10, 5, 5, 5, 1])));
        for c in &grid {
            c.validate().unwrap();
        }
    }

    #[test]
    fn bad_presets() {
        assert!(table_preset("table9", 1.0).is_err());
        assert!(table_preset("table2", 0.0).is_err());
        assert!(table_preset("table2", 1.5).is_err());
    }
}
