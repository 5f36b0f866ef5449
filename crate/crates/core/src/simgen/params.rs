use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dag::DagSpec;
use super::meanfn::MeanFn;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

pub const DEFAULT_COEF_SCALE: f64 = 1.5;
pub const NONLINEARITY_LEVELS: [usize; 4] = [1, 3, 5, 7];

/// Coefficients realizing one structural model instance.
///
/// Three latent variables, three covariates (X1 always observed, X2 and X3
/// maskable), two indicators (R2, R3) and one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    pub alpha_z: [f64; 3],
    pub alpha_x: [f64; 3],
    pub alpha_r: [f64; 2],
    pub alpha_y: f64,
    pub sigma_z: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Z (3) -> X (3), linear.
    pub fz: MeanFn,
    /// fx[0]: X1 -> X2, fx[1]: (X1, X2) -> X3.
    pub fx: Vec<MeanFn>,
    /// X (3) -> logits of (R2, R3), linear. Includes self-censoring terms.
    pub gx: MeanFn,
    /// Coefficient of R2 in the R3 logit (indicator chain).
    pub r_chain: f64,
    /// X (3) -> Y, linear.
    pub hx: MeanFn,
    /// (R2, R3) -> Y, linear; the zero map without R -> Y edges.
    pub hm: MeanFn,
    pub coef_scale: f64,
}

impl StructuralParams {
    /// Every parameter zero, unit noise scales, linear mean functions.
    pub fn zeros() -> Self {
        StructuralParams {
            alpha_z: [0.0; 3],
            alpha_x: [0.0; 3],
            alpha_r: [0.0; 2],
            alpha_y: 0.0,
            sigma_z: 1.0,
            sigma_x: 1.0,
            sigma_y: 1.0,
            fz: MeanFn::zero(3, 3),
            fx: vec![MeanFn::zero(1, 1), MeanFn::zero(2, 1)],
            gx: MeanFn::zero(3, 2),
            r_chain: 0.0,
            hx: MeanFn::zero(3, 1),
            hm: MeanFn::zero(2, 1),
            coef_scale: DEFAULT_COEF_SCALE,
        }
    }

    pub fn validate(&self, dag: &DagSpec) -> Result<()> {
        for (name, s) in [("sigma_z", self.sigma_z), ("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {s}")));
            }
        }
        if !dag.r_to_y && !self.hm.is_zero() {
            return Err(Error::Config(format!("dag {} has no R -> Y edge but hm is nonzero", dag.dag_id)));
        }
        if self.fx.len() != 2 {
            return Err(Error::Config("fx must hold two mean functions".into()));
        }
        Ok(())
    }

    /// E[Y | X, R] under these parameters.
    pub fn outcome_mean(&self, x: &[f64], r: &[f64]) -> f64 {
        self.alpha_y + self.hx.eval1(x) + self.hm.eval1(r)
    }

    /// True when both parameter sets share the outcome mechanism P(Y | X, R).
    pub fn same_outcome_mechanism(&self, other: &StructuralParams) -> bool {
        self.alpha_y == other.alpha_y && self.sigma_y == other.sigma_y && self.hx == other.hx && self.hm == other.hm
    }

    /// All randomly drawn scalars, for distributional checks.
    pub fn drawn_coefficients(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend(self.alpha_z);
        v.extend(self.alpha_x);
        v.extend(self.alpha_r);
        v.push(self.alpha_y);
        v.extend(self.fz.coefficients());
        for f in &self.fx {
            v.extend(f.coefficients());
        }
        v.extend(self.gx.coefficients());
        v.extend(self.hx.coefficients());
        v
    }
}

pub fn check_nonlinearity(nonlinearity: usize) -> Result<()> {
    if NONLINEARITY_LEVELS.contains(&nonlinearity) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "nonlinearity must be one of {NONLINEARITY_LEVELS:?}, got {nonlinearity}"
        )))
    }
}

/// Draw a structural model instance for `dag`. Every coefficient is an
/// independent Normal(0, 1.5) draw; `fx` is affine for nonlinearity 1 and an
/// MLP with `nonlinearity` layers of `nonlinearity` nodes otherwise.
pub fn sample_params(dag: &DagSpec, nonlinearity: usize, seed: u64) -> Result<StructuralParams> {
    sample_params_scaled(dag, nonlinearity, seed, DEFAULT_COEF_SCALE)
}

pub fn sample_params_scaled(dag: &DagSpec, nonlinearity: usize, seed: u64, coef_scale: f64) -> Result<StructuralParams> {
    check_nonlinearity(nonlinearity)?;
    if coef_scale.is_nan() || coef_scale <= 0.0 {
        return Err(Error::Config("coef_scale must be positive".into()));
    }
    let root = SeedTree::new(seed).child("params");
    let normal = Normal::new(0.0, coef_scale).unwrap();

    let mut rng = root.stream("alpha");
    let mut draw3 = || [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)];
    let alpha_z = draw3();
    let alpha_x = draw3();
    let mut rng = root.stream("alpha_r");
    let alpha_r = [normal.sample(&mut rng), normal.sample(&mut rng)];
    let alpha_y = normal.sample(&mut root.stream("alpha_y"));

    let fz = MeanFn::random_linear(3, 3, coef_scale, &mut root.stream("fz"));
    let mut rng = root.stream("fx");
    let fx = (1..=2)
        .map(|inputs| {
            if nonlinearity == 1 {
                MeanFn::random_linear(inputs, 1, coef_scale, &mut rng)
            } else {
                MeanFn::random_mlp(inputs, 1, nonlinearity, coef_scale, &mut rng)
            }
        })
        .collect();
    let gx = MeanFn::random_linear(3, 2, coef_scale, &mut root.stream("gx"));
    let r_chain = if dag.r_chain {
        normal.sample(&mut root.stream("r_chain"))
    } else {
        0.0
    };
    let hx = MeanFn::random_linear(3, 1, coef_scale, &mut root.stream("hx"));
    let hm = if dag.r_to_y {
        MeanFn::random_linear(2, 1, coef_scale, &mut root.stream("hm"))
    } else {
        MeanFn::zero(2, 1)
    };

    Ok(StructuralParams {
        alpha_z,
        alpha_x,
        alpha_r,
        alpha_y,
        sigma_z: 1.0,
        sigma_x: 1.0,
        sigma_y: 1.0,
        fz,
        fx,
        gx,
        r_chain,
        hx,
        hm,
        coef_scale,
    })
}

/// Re-draw the missingness mechanism (gx and the indicator-chain coefficient)
/// from an independent stream, keeping everything else.
pub fn redraw_missingness(params: &StructuralParams, dag: &DagSpec, seed: u64) -> StructuralParams {
    let root = SeedTree::new(seed).child("missingness_redraw");
    let mut out = params.clone();
    out.gx = MeanFn::random_linear(3, 2, params.coef_scale, &mut root.stream("gx"));
    out.r_chain = if dag.r_chain {
        Normal::new(0.0, params.coef_scale)
            .unwrap()
            .sample(&mut root.stream("r_chain"))
    } else {
        0.0
    };
    out
}
