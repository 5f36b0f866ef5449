use serde::{Deserialize, Serialize};

use super::decomposition::{complete_case_fit, mse_decomposition};
use super::joint::{conditional_shift_distance, observed_conditional, random_mar_pair, self_censoring_pair, CondCell};
use crate::error::Result;
use crate::rng::SeedTree;
use crate::simgen::{
    apply_mask, calibrate_missingness_intercept, generate, sample_params, DagSpec, Domain, MeanFn,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub measured: f64,
    pub threshold: String,
    pub passed: bool,
}

/// Complete-case regression on one simulated linear source sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteCaseExperiment {
    pub intercept: f64,
    pub intercept_se: f64,
    pub slopes: Vec<f64>,
    pub slope_ses: Vec<f64>,
    /// alpha_y, the intercept of E[Y | X, R] with R -> Y effects removed.
    pub true_intercept: f64,
    /// Intercept of E[Y | X, R = 1].
    pub complete_row_intercept: f64,
    pub true_slopes: Vec<f64>,
}

/// Draw a linear model for `dag_id`, optionally override the indicator
/// effects on Y, mask at rate `miss` and regress Y on X over complete rows.
pub fn complete_case_experiment(
    dag_id: u8,
    n: usize,
    miss: f64,
    hm: Option<[f64; 2]>,
    seed: u64,
) -> Result<CompleteCaseExperiment> {
    let dag = DagSpec::new(dag_id)?;
    let root = SeedTree::new(seed);
    let mut params = sample_params(&dag, 1, root.child("params").value())?;
    if let Some(w) = hm {
        params.hm = MeanFn::linear(vec![w.to_vec()]);
    }
    params.alpha_r = calibrate_missingness_intercept(&params, &dag, miss, root.child("calibration").value())?;
    let data = generate(n, &dag, &params, root.child("data").value())?;
    let ds = apply_mask(&data, Domain::Source);
    let fit = complete_case_fit(&ds)?;
    let intercept_se = fit.intercept_se.unwrap_or(f64::NAN);
    let slope_ses = fit.std_errors.clone().unwrap_or_default();
    let true_slopes = params.hx.linear_weights().expect("linear model")[0].clone();
    Ok(CompleteCaseExperiment {
        intercept: fit.intercept,
        intercept_se,
        slopes: fit.coef,
        slope_ses,
        true_intercept: params.alpha_y,
        complete_row_intercept: params.alpha_y + params.hm.eval1(&[1.0, 1.0]),
        true_slopes,
    })
}

fn check(name: &str, measured: f64, threshold: &str, passed: bool) -> VerifyCheck {
    VerifyCheck {
        name: name.into(),
        measured,
        threshold: threshold.into(),
        passed,
    }
}

/// Run every verifier and report measured values.
pub fn run_suite(seed: u64) -> Result<Vec<VerifyCheck>> {
    let root = SeedTree::new(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    let mut worst_row_sum = 0.0f64;
    for k in 0..100 {
        let (s, t) = random_mar_pair(root.child("mar").index(k).value());
        worst = worst.max(conditional_shift_distance(&s, &t)?);
        for joint in [&s, &t] {
            for cell in observed_conditional(joint).values() {
                if let CondCell::Defined(p) = cell {
                    worst_row_sum = worst_row_sum.max((p.iter().sum::<f64>() - 1.0).abs());
                }
            }
        }
    }
    out.push(check("mar_shift_distance_max", worst, "< 1e-10", worst < 1e-10));
    out.push(check("conditional_rows_sum_to_one", worst_row_sum, "< 1e-12", worst_row_sum < 1e-12));

    let (s, t) = self_censoring_pair();
    let d = conditional_shift_distance(&s, &t)?;
    out.push(check("self_censoring_shift_distance", d, "> 0.01", d > 0.01));

    let mut rng = root.child("decomposition").rng();
    use rand::Rng;
    let n = 1000;
    let pred: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let truth: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let complete: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
    let dec = mse_decomposition(&pred, &truth, &complete)?;
    let gap = (dec.weighted0() + dec.weighted1() - dec.pooled).abs();
    out.push(check("decomposition_additivity_gap", gap, "< 1e-12", gap < 1e-12));

    let cc = complete_case_experiment(1, 5000, 0.3, None, root.child("cc1").value())?;
    let z = cc
        .slopes
        .iter()
        .zip(&cc.true_slopes)
        .zip(&cc.slope_ses)
        .map(|((b, t), s)| (b - t).abs() / s)
        .fold(0.0f64, f64::max);
    out.push(check("complete_case_dag1_max_slope_z", z, "< 3", z < 3.0));

    let seeds = 50;
    let mut detected = 0;
    for k in 0..seeds {
        let cc = complete_case_experiment(5, 5000, 0.3, Some([1.0, 1.0]), root.child("cc5").index(k).value())?;
        if (cc.intercept - cc.true_intercept).abs() > 3.0 * cc.intercept_se {
            detected += 1;
        }
    }
    let rate = detected as f64 / seeds as f64;
    out.push(check("complete_case_dag5_bias_detection_rate", rate, ">= 0.8", rate >= 0.8));
    Ok(out)
}
