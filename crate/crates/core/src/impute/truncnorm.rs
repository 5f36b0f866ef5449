use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Standard normal truncated to `[a, inf)`.
fn std_truncated_below<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a {
                return z;
            }
        }
    }
    // exponential proposal with the optimal rate
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(alpha).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - alpha).powi(2)).exp() {
            return z;
        }
    }
}

/// Draw from N(mean, sd^2) restricted to `[lower, inf)`.
pub fn sample_truncated_below<R: Rng + ?Sized>(mean: f64, sd: f64, lower: f64, rng: &mut R) -> f64 {
    mean + sd * std_truncated_below((lower - mean) / sd, rng)
}

/// Draw from N(mean, sd^2) restricted to `(-inf, upper]`.
pub fn sample_truncated_above<R: Rng + ?Sized>(mean: f64, sd: f64, upper: f64, rng: &mut R) -> f64 {
    mean - sd * std_truncated_below((mean - upper) / sd, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use statrs::function::erf::erfc;

    // mean of a standard normal truncated below at a: phi(a) / (1 - Phi(a))
    fn truncated_mean(a: f64) -> f64 {
        let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
        phi / (0.5 * erfc(a / std::f64::consts::SQRT_2))
    }

    #[test]
    fn respects_bounds_and_mean() {
        let mut rng = SeedTree::new(3).rng();
        for &a in &[-2.0, 0.0, 0.7, 3.0, 8.0] {
            let draws: Vec<f64> = (0..40_000).map(|_| sample_truncated_below(0.0, 1.0, a, &mut rng)).collect();
            assert!(draws.iter().all(|&z| z >= a));
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            assert!((m - truncated_mean(a)).abs() < 0.02, "a={a} mean={m}");
        }
    }

    #[test]
    fn upper_truncation_mirrors() {
        let mut rng = SeedTree::new(4).rng();
        for _ in 0..1000 {
            let v = sample_truncated_above(1.0, 2.0, -1.0, &mut rng);
            assert!(v <= -1.0);
        }
        let draws: Vec<f64> = (0..40_000).map(|_| sample_truncated_above(0.0, 1.0, 0.0, &mut rng)).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m + truncated_mean(0.0)).abs() < 0.02);
    }
}
