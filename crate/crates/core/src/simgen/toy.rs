use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::SeedTree;

/// One-covariate covariate-shift example: a quadratic conditional mean shared
/// by both domains, with the covariate distribution shifted in the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateShiftToy {
    pub alpha: f64,
    pub beta: (f64, f64),
    pub sigma: f64,
    pub source_mean: f64,
    pub target_mean: f64,
}

impl Default for CovariateShiftToy {
    fn default() -> Self {
        CovariateShiftToy {
            alpha: 0.2,
            beta: (0.2, -0.5),
            sigma: 1.0,
            source_mean: 0.0,
            target_mean: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySample {
    pub x_source: Vec<f64>,
    pub y_source: Vec<f64>,
    pub x_target: Vec<f64>,
    pub y_target: Vec<f64>,
}

impl CovariateShiftToy {
    pub fn conditional_mean(&self, x: f64) -> f64 {
        self.alpha + self.beta.0 * x + self.beta.1 * x * x
    }

    pub fn sample(&self, n_source: usize, n_target: usize, seed: u64) -> ToySample {
        let root = SeedTree::new(seed).child("toy");
        let draw = |tag: &str, n: usize, center: f64| {
            let mut rx = root.child(tag).stream("x");
            let mut ry = root.child(tag).stream("y");
            let x: Vec<f64> = (0..n)
                .map(|_| center + Distribution::<f64>::sample(&StandardNormal, &mut rx))
                .collect();
            let y = x
                .iter()
                .map(|&v| {
                    let e: f64 = StandardNormal.sample(&mut ry);
                    self.conditional_mean(v) + self.sigma * e
                })
                .collect();
            (x, y)
        };
        let (x_source, y_source) = draw("source", n_source, self.source_mean);
        let (x_target, y_target) = draw("target", n_target, self.target_mean);
        ToySample {
            x_source,
            y_source,
            x_target,
            y_target,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{mean, sd};

    #[test]
    fn moments() {
        let toy = CovariateShiftToy::default();
        assert_eq!(toy.conditional_mean(1.0), 0.2 + 0.2 - 0.5);
        let s = toy.sample(50_000, 50_000, 1);
        assert!(mean(&s.x_source).abs() < 0.02);
        assert!((mean(&s.x_target) - 1.0).abs() < 0.02);
        assert!((sd(&s.x_target) - 1.0).abs() < 0.02);
        let resid: Vec<f64> = s.x_source.iter().zip(&s.y_source).map(|(x, y)| y - toy.conditional_mean(*x)).collect();
        assert!((sd(&resid) - 1.0).abs() < 0.02);
    }
}
