//! Test functions with known global minimizers.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveFn, SearchBox};

/// `(1/d) Σ (x_l² − 10 cos(2π x_l) + 10)`.
pub fn rastrigin(x: &[f64]) -> f64 {
    x.iter().map(|&v| rastrigin_term(v)).sum::<f64>() / x.len() as f64
}

fn rastrigin_term(v: f64) -> f64 {
    v * v - 10.0 * (2.0 * PI * v).cos() + 10.0
}

/// The unnormalized one-dimensional Rastrigin term `x² − 10 cos(2πx) + 10`.
pub fn rastrigin1d_example(x: f64) -> f64 {
    rastrigin_term(x)
}

pub fn salomon(x: &[f64]) -> f64 {
    let r = norm(x);
    1.0 - (2.0 * PI * r).cos() + 0.1 * r
}

pub fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v / 4000.0).sum();
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(l, v)| (v / ((l + 1) as f64).sqrt()).cos())
        .product();
    1.0 + sum - prod
}

pub fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

/// Uses `√|x_l|` so the function is real on the whole space.
pub fn xinsheyang4(x: &[f64]) -> f64 {
    let sin2: f64 = x.iter().map(|v| v.sin().powi(2)).sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let damp: f64 = x.iter().map(|v| v.abs().sqrt().sin().powi(2)).sum();
    (sin2 - (-sq).exp()) * (-damp).exp() + 1.0
}

/// `|x₁² + x₂² + x₁x₂| + |sin x₁| + |cos x₂|`.
pub fn bartels_conn(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (a * a + b * b + a * b).abs() + a.sin().abs() + b.cos().abs()
}

pub fn schaffer4(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let num = (a * a - b * b).sin().cos().powi(2) - 0.5;
    let den = (1.0 + 0.001 * (a * a + b * b)).powi(2);
    0.5 + num / den
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

const SCHAFFER4_ARG: f64 = 1.253_131_831_463_733_2;
const SCHAFFER4_MIN: f64 = 0.292_578_632_035_980_55;

struct Named {
    dim: usize,
    f: fn(&[f64]) -> f64,
}

impl ObjectiveFn for Named {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A registered benchmark together with its known solution set.
#[derive(Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub d: usize,
    function: Arc<dyn ObjectiveFn>,
    pub x_star: Vec<Vec<f64>>,
    pub f_star: f64,
    pub default_box: SearchBox,
    /// A global Lipschitz constant of f where one is known in closed form.
    pub lipschitz: Option<f64>,
}

impl std::fmt::Debug for BenchmarkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkSpec")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("x_star", &self.x_star)
            .field("f_star", &self.f_star)
            .field("default_box", &self.default_box)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl BenchmarkSpec {
    /// A fresh objective with its own evaluation counter.
    pub fn objective(&self) -> Objective {
        Objective::from_arc(self.function.clone())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }

    /// The listed minimizer closest to the given point cloud in summed squared distance.
    pub fn nearest_minimizer(&self, points: &[Vec<f64>]) -> &[f64] {
        let cost = |xs: &[f64]| -> f64 {
            points
                .iter()
                .map(|p| p.iter().zip(xs).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .sum()
        };
        self.x_star
            .iter()
            .min_by(|a, b| cost(a).total_cmp(&cost(b)))
            .expect("at least one minimizer")
    }

    fn verified(self) -> Result<Self> {
        for x in &self.x_star {
            let gap = self.function.value(x) - self.f_star;
            if gap.abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "benchmark {} misregistered: f(x*) - f* = {gap:e}",
                    self.name
                )));
            }
        }
        Ok(self)
    }
}

/// Identifiers accepted by [`lookup`].
pub const NAMES: &[&str] = &[
    "rastrigin",
    "salomon",
    "griewank",
    "ackley",
    "xinsheyang4",
    "bartels_conn",
    "schaffer4",
    "rastrigin1d",
];

pub fn lookup(name: &str, d: usize) -> Result<BenchmarkSpec> {
    let fixed = |want: usize| -> Result<usize> {
        if d != want {
            return Err(Error::Config(format!("benchmark {name} is defined only for d = {want}, got {d}")));
        }
        Ok(want)
    };
    if d == 0 {
        return Err(Error::Config("benchmark dimension must be >= 1".into()));
    }
    let origin = vec![0.0; d];
    let (dim, f, x_star, f_star, lipschitz): (usize, fn(&[f64]) -> f64, Vec<Vec<f64>>, f64, Option<f64>) = match name {
        "rastrigin" => (d, rastrigin, vec![origin], 0.0, None),
        "salomon" => (d, salomon, vec![origin], 0.0, Some(2.0 * PI + 0.1)),
        "griewank" => (d, griewank, vec![origin], 0.0, None),
        "ackley" => (d, ackley, vec![origin], 0.0, None),
        "xinsheyang4" => (d, xinsheyang4, vec![origin], 0.0, None),
        "bartels_conn" => (fixed(2)?, bartels_conn, vec![origin], 1.0, None),
        "schaffer4" => (
            fixed(2)?,
            schaffer4,
            vec![
                vec![0.0, SCHAFFER4_ARG],
                vec![0.0, -SCHAFFER4_ARG],
                vec![SCHAFFER4_ARG, 0.0],
                vec![-SCHAFFER4_ARG, 0.0],
            ],
            SCHAFFER4_MIN,
            None,
        ),
        "rastrigin1d" => (
            fixed(1)?,
            |x: &[f64]| rastrigin1d_example(x[0]),
            vec![origin],
            0.0,
            // |f'(x)| ≤ 2|x| + 20π on [−3, 3].
            Some(6.0 + 20.0 * PI),
        ),
        _ => {
            return Err(Error::UnknownBenchmark {
                name: name.to_string(),
                available: NAMES.join(", "),
            })
        }
    };
    let default_box = if name == "rastrigin1d" {
        SearchBox::cube(-3.0, 3.0, dim)?
    } else {
        SearchBox::cube(-5.0, 5.0, dim)?
    };
    BenchmarkSpec {
        name: name.to_string(),
        d: dim,
        function: Arc::new(Named { dim, f }),
        x_star,
        f_star,
        default_box,
        lipschitz,
    }
    .verified()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rastrigin_values() {
        assert_eq!(rastrigin(&[0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(rastrigin(&[1.0, 1.0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rastrigin(&[0.5, 0.5]), 20.25, epsilon = 1e-12);
        assert_eq!(rastrigin1d_example(0.0), 0.0);
        assert_abs_diff_eq!(rastrigin1d_example(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rastrigin1d_example(0.5), 20.25, epsilon = 1e-12);
    }

    #[test]
    fn minimum_values() {
        assert_eq!(salomon(&[0.0; 3]), 0.0);
        assert_eq!(griewank(&[0.0; 3]), 0.0);
        assert_abs_diff_eq!(ackley(&[0.0; 3]), 0.0, epsilon = 1e-15);
        assert_eq!(xinsheyang4(&[0.0; 3]), 0.0);
        assert_eq!(bartels_conn(&[0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(schaffer4(&[0.0, 1.253115]), 0.292579, epsilon = 1e-5);
    }

    #[test]
    fn lookup_known_and_unknown() {
        let r = lookup("rastrigin", 3).unwrap();
        assert_eq!(r.x_star, vec![vec![0.0; 3]]);
        assert_eq!(r.f_star, 0.0);
        assert_eq!(r.default_box, SearchBox::cube(-5.0, 5.0, 3).unwrap());
        assert_eq!(lookup("schaffer4", 2).unwrap().x_star.len(), 4);
        match lookup("nosuch", 2) {
            Err(Error::UnknownBenchmark { available, .. }) => assert!(available.contains("rastrigin")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(lookup("bartels_conn", 3).is_err());
    }

    #[test]
    fn registered_minimizers_are_global_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in NAMES {
            let d = match *name {
                "bartels_conn" | "schaffer4" => 2,
                "rastrigin1d" => 1,
                _ => 3,
            };
            let spec = lookup(name, d).unwrap();
            for x in &spec.x_star {
                assert!((spec.value(x) - spec.f_star).abs() <= 1e-9, "{name}");
            }
            for _ in 0..1000 {
                let x = spec.default_box.sample(&mut rng);
                assert!(spec.value(&x) >= spec.f_star - 1e-9, "{name} at {x:?}");
            }
        }
    }

    #[test]
    fn even_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = SearchBox::cube(-5.0, 5.0, 4).unwrap();
        for _ in 0..200 {
            let x = b.sample(&mut rng);
            let m: Vec<f64> = x.iter().map(|v| -v).collect();
            for f in [rastrigin, salomon, griewank, ackley] {
                assert_abs_diff_eq!(f(&x), f(&m), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nearest_minimizer_choice() {
        let s = lookup("schaffer4", 2).unwrap();
        let cloud = vec![vec![1.2, 0.1], vec![1.3, -0.1]];
        assert_eq!(s.nearest_minimizer(&cloud), &[SCHAFFER4_ARG, 0.0]);
    }

    #[test]
    fn objective_counts_independently() {
        let s = lookup("ackley", 2).unwrap();
        let a = s.objective();
        let b = s.objective();
        a.eval(&[0.1, 0.2]);
        assert_eq!(a.eval_count(), 1);
        assert_eq!(b.eval_count(), 0);
    }
}
