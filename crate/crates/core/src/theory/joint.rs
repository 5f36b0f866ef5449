//! Exact enumeration over small discrete joints of (Y, X_o, X_u, R).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;

pub const MAX_LEVELS: usize = 4;
pub const MAX_UNOBSERVED: usize = 2;

/// One full-data tuple; `r[k] == true` means `xu[k]` is observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub y: usize,
    pub xo: usize,
    pub xu: Vec<usize>,
    pub r: Vec<bool>,
}

/// Probability table over (Y, X_o, X_u[..], R[..]) with one binary indicator
/// per partially observed variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    y_levels: usize,
    xo_levels: usize,
    xu_levels: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    /// Build by evaluating `f` on every tuple.
    pub fn from_fn(y_levels: usize, xo_levels: usize, xu_levels: &[usize], f: impl Fn(&Tuple) -> f64) -> Result<Self> {
        let mut joint = DiscreteJoint {
            y_levels,
            xo_levels,
            xu_levels: xu_levels.to_vec(),
            probs: Vec::new(),
        };
        joint.check_levels()?;
        joint.probs = (0..joint.size()).map(|idx| f(&joint.tuple(idx))).collect();
        joint.check_probs()?;
        Ok(joint)
    }

    fn check_levels(&self) -> Result<()> {
        let all = [self.y_levels, self.xo_levels].into_iter().chain(self.xu_levels.iter().copied());
        if all.clone().any(|l| l == 0 || l > MAX_LEVELS) {
            return Err(Error::Invalid(format!("every variable needs 1..={MAX_LEVELS} levels")));
        }
        if self.xu_levels.is_empty() || self.xu_levels.len() > MAX_UNOBSERVED {
            return Err(Error::Invalid(format!(
                "between 1 and {MAX_UNOBSERVED} partially observed variables"
            )));
        }
        Ok(())
    }

    fn check_probs(&self) -> Result<()> {
        if self.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Invalid("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.y_levels * self.xo_levels * self.xu_levels.iter().product::<usize>() * (1 << self.xu_levels.len())
    }

    pub fn same_support(&self, other: &DiscreteJoint) -> bool {
        self.y_levels == other.y_levels && self.xo_levels == other.xo_levels && self.xu_levels == other.xu_levels
    }

    pub fn y_levels(&self) -> usize {
        self.y_levels
    }

    /// Decode a flat index (Y varies slowest, indicators fastest).
    pub fn tuple(&self, mut idx: usize) -> Tuple {
        let k = self.xu_levels.len();
        let mut r = vec![false; k];
        for slot in r.iter_mut().rev() {
            *slot = idx % 2 == 1;
            idx /= 2;
        }
        let mut xu = vec![0; k];
        for (slot, &l) in xu.iter_mut().zip(&self.xu_levels).rev() {
            *slot = idx % l;
            idx /= l;
        }
        let xo = idx % self.xo_levels;
        let y = idx / self.xo_levels;
        Tuple { y, xo, xu, r }
    }

    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }
}

/// Conditioning event of the observed-data law: X_o and the masked X_u
/// (`None` = NA, which fixes the corresponding indicator to 0).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObservedKey {
    pub xo: usize,
    pub xu: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondCell {
    /// P(Y = y | key) for every level y.
    Defined(Vec<f64>),
    /// The conditioning event has probability zero.
    Undefined,
}

/// P(Y | X_o, X*_u, R) for every conditioning event.
pub type ObservedConditional = BTreeMap<ObservedKey, CondCell>;

fn observed_key(t: &Tuple) -> ObservedKey {
    ObservedKey {
        xo: t.xo,
        xu: t.xu.iter().zip(&t.r).map(|(&v, &r)| r.then_some(v)).collect(),
    }
}

/// Every observed-data event, whether or not it has positive mass.
fn all_keys(joint: &DiscreteJoint) -> Vec<ObservedKey> {
    let mut keys: Vec<ObservedKey> = (0..joint.size()).map(|i| observed_key(&joint.tuple(i))).collect();
    keys.sort();
    keys.dedup();
    keys
}

/// Sum the joint over every full-data tuple compatible with each observed
/// event: fixed X_u where observed, all X_u values on the NA branch.
pub fn observed_conditional(joint: &DiscreteJoint) -> ObservedConditional {
    let mut mass: BTreeMap<ObservedKey, Vec<f64>> =
        all_keys(joint).into_iter().map(|k| (k, vec![0.0; joint.y_levels])).collect();
    for idx in 0..joint.size() {
        let t = joint.tuple(idx);
        mass.get_mut(&observed_key(&t)).expect("key enumerated")[t.y] += joint.prob(idx);
    }
    mass.into_iter()
        .map(|(k, m)| {
            let total: f64 = m.iter().sum();
            let cell = if total > 0.0 {
                CondCell::Defined(m.iter().map(|v| v / total).collect())
            } else {
                CondCell::Undefined
            };
            (k, cell)
        })
        .collect()
}

/// Largest total-variation distance between the two observed conditionals
/// over events defined in both.
pub fn conditional_shift_distance(source: &DiscreteJoint, target: &DiscreteJoint) -> Result<f64> {
    if !source.same_support(target) {
        return Err(Error::Schema("joints have different variable supports".into()));
    }
    let cs = observed_conditional(source);
    let ct = observed_conditional(target);
    let mut worst = 0.0f64;
    for (key, a) in &cs {
        if let (CondCell::Defined(p), Some(CondCell::Defined(q))) = (a, ct.get(key)) {
            let tv = 0.5 * p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>();
            worst = worst.max(tv);
        }
    }
    Ok(worst)
}

fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    // normalized uniforms bounded away from zero
    let v: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Two joints sharing P(X_o), P(X_u | X_o) and P(Y | X_o, X_u) whose
/// indicators depend on X_o only, with independently drawn mechanisms.
pub fn random_mar_pair(seed: u64) -> (DiscreteJoint, DiscreteJoint) {
    let mut rng = SeedTree::new(seed).child("mar_pair").rng();
    let y_levels = rng.random_range(2..=MAX_LEVELS);
    let xo_levels = rng.random_range(1..=3);
    let k = rng.random_range(1..=MAX_UNOBSERVED);
    let xu_levels: Vec<usize> = (0..k).map(|_| rng.random_range(2..=3)).collect();
    let n_xu: usize = xu_levels.iter().product();
    let p_xo = random_simplex(xo_levels, &mut rng);
    let p_xu: Vec<Vec<f64>> = (0..xo_levels).map(|_| random_simplex(n_xu, &mut rng)).collect();
    let p_y: Vec<Vec<f64>> = (0..xo_levels * n_xu).map(|_| random_simplex(y_levels, &mut rng)).collect();
    let mut mech = || -> Vec<Vec<f64>> {
        (0..xo_levels)
            .map(|_| (0..k).map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect())
            .collect()
    };
    let (ms, mt) = (mech(), mech());
    let build = |m: &Vec<Vec<f64>>| {
        DiscreteJoint::from_fn(y_levels, xo_levels, &xu_levels, |t| {
            let xu_idx = t.xu.iter().zip(&xu_levels).fold(0, |acc, (&v, &l)| acc * l + v);
            let pr: f64 = (0..k).map(|j| if t.r[j] { m[t.xo][j] } else { 1.0 - m[t.xo][j] }).product();
            p_xo[t.xo] * p_xu[t.xo][xu_idx] * p_y[t.xo * n_xu + xu_idx][t.y] * pr
        })
        .map(renormalize)
        .expect("valid random joint")
    };
    (build(&ms), build(&mt))
}

fn renormalize(mut j: DiscreteJoint) -> DiscreteJoint {
    let s: f64 = j.probs.iter().sum();
    for p in j.probs.iter_mut() {
        *p /= s;
    }
    j
}

/// Binary self-censoring pair: X_u ~ Bern(0.5), P(Y=1 | x_u) = 0.2 / 0.8,
/// P(R=0 | x_u) = 0.1 / 0.5 in the source and 0.5 / 0.1 in the target.
pub fn self_censoring_pair() -> (DiscreteJoint, DiscreteJoint) {
    let build = |miss: [f64; 2]| {
        DiscreteJoint::from_fn(2, 1, &[2], |t| {
            let xu = t.xu[0];
            let py1 = if xu == 1 { 0.8 } else { 0.2 };
            let py = if t.y == 1 { py1 } else { 1.0 - py1 };
            let pr = if t.r[0] { 1.0 - miss[xu] } else { miss[xu] };
            0.5 * py * pr
        })
        .expect("fixture is a valid joint")
    };
    (build([0.1, 0.5]), build([0.5, 0.1]))
}
