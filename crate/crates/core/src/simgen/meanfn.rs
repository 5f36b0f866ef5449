use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    Linear,
    Mlp,
}

/// Dense layer, `weights[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(input: usize, output: usize) -> Self {
        Layer {
            weights: vec![vec![0.0; input]; output],
            bias: vec![0.0; output],
        }
    }

    fn eval(&self, x: &[f64], scale: f64) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| scale * (b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()))
            .collect()
    }
}

/// A mean function of the structural equations: either a linear map (no
/// intercept, the structural intercepts carry that) or a rectifier MLP with
/// `depth` hidden layers of `depth` nodes each and an affine output layer.
///
/// MLP pre-activations are scaled by `1/sqrt(fan_in)` so that deep networks
/// with unit-scale weights keep outputs on the scale of their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFn {
    pub kind: MeanKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<Layer>,
}

impl MeanFn {
    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        MeanFn {
            kind: MeanKind::Linear,
            input_dim,
            output_dim,
            layers: vec![Layer::zeros(input_dim, output_dim)],
        }
    }

    pub fn linear(weights: Vec<Vec<f64>>) -> Self {
        let output_dim = weights.len();
        let input_dim = weights.first().map_or(0, |r| r.len());
        assert!(weights.iter().all(|r| r.len() == input_dim));
        MeanFn {
            kind: MeanKind::Linear,
            input_dim,
            output_dim,
            layers: vec![Layer {
                weights,
                bias: vec![0.0; output_dim],
            }],
        }
    }

    pub fn random_linear<R: Rng>(input_dim: usize, output_dim: usize, sd: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, sd).expect("positive sd");
        let w = (0..output_dim)
            .map(|_| (0..input_dim).map(|_| normal.sample(rng)).collect())
            .collect();
        MeanFn::linear(w)
    }

    /// `depth` hidden layers of width `depth`, then an affine output layer.
    pub fn random_mlp<R: Rng>(input_dim: usize, output_dim: usize, depth: usize, sd: f64, rng: &mut R) -> Self {
        assert!(depth >= 1);
        let normal = Normal::new(0.0, sd).expect("positive sd");
        let mut layers = Vec::with_capacity(depth + 1);
        let mut fan_in = input_dim;
        for _ in 0..depth {
            layers.push(Layer {
                weights: (0..depth)
                    .map(|_| (0..fan_in).map(|_| normal.sample(rng)).collect())
                    .collect(),
                bias: (0..depth).map(|_| normal.sample(rng)).collect(),
            });
            fan_in = depth;
        }
        layers.push(Layer {
            weights: (0..output_dim)
                .map(|_| (0..fan_in).map(|_| normal.sample(rng)).collect())
                .collect(),
            bias: (0..output_dim).map(|_| normal.sample(rng)).collect(),
        });
        MeanFn {
            kind: MeanKind::Mlp,
            input_dim,
            output_dim,
            layers,
        }
    }

    /// Number of hidden layers (1 for the linear kind).
    pub fn depth(&self) -> usize {
        match self.kind {
            MeanKind::Linear => 1,
            MeanKind::Mlp => self.layers.len() - 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().flatten().all(|w| *w == 0.0) && l.bias.iter().all(|b| *b == 0.0))
    }

    /// Every weight and bias, in layer order.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter().flatten());
            if self.kind == MeanKind::Mlp {
                out.extend(&l.bias);
            }
        }
        out
    }

    /// Linear coefficients; `None` for an MLP.
    pub fn linear_weights(&self) -> Option<&[Vec<f64>]> {
        match self.kind {
            MeanKind::Linear => Some(&self.layers[0].weights),
            MeanKind::Mlp => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        match self.kind {
            MeanKind::Linear => self.layers[0].eval(x, 1.0),
            MeanKind::Mlp => {
                let mut h = x.to_vec();
                let last = self.layers.len() - 1;
                for (k, layer) in self.layers.iter().enumerate() {
                    let scale = 1.0 / (h.len().max(1) as f64).sqrt();
                    h = layer.eval(&h, scale);
                    if k < last {
                        for v in h.iter_mut() {
                            *v = v.max(0.0);
                        }
                    }
                }
                h
            }
        }
    }

    pub fn eval1(&self, x: &[f64]) -> f64 {
        self.eval(x)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn linear_eval() {
        let f = MeanFn::linear(vec![vec![1.0, -2.0], vec![0.5, 0.0]]);
        assert_eq!(f.eval(&[3.0, 1.0]), vec![1.0, 1.5]);
        assert_eq!(f.depth(), 1);
    }

    #[test]
    fn mlp_shapes_consistent() {
        let mut rng = SeedTree::new(3).rng();
        for depth in [1, 3, 5, 7] {
            let f = MeanFn::random_mlp(2, 1, depth, 1.5, &mut rng);
            assert_eq!(f.depth(), depth);
            assert_eq!(f.layers[0].weights[0].len(), 2);
            for l in &f.layers[1..] {
                assert_eq!(l.weights[0].len(), depth);
            }
            let y = f.eval(&[0.3, -1.2]);
            assert_eq!(y.len(), 1);
            assert!(y[0].is_finite());
        }
    }

    #[test]
    fn mlp_output_scale_is_moderate() {
        // Deep nets should not blow up with unit-scale inputs.
        let mut rng = SeedTree::new(11).rng();
        let mut big = 0;
        for _ in 0..200 {
            let f = MeanFn::random_mlp(2, 1, 7, 1.5, &mut rng);
            if f.eval1(&[1.0, -1.0]).abs() > 100.0 {
                big += 1;
            }
        }
        assert!(big < 10, "{big} of 200 deep nets exploded");
    }
}
