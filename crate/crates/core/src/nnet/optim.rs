use serde::{Deserialize, Serialize};

use super::model::{Gradients, Model};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// RMSProp with one squared-gradient accumulator per parameter:
///
/// ```text
/// v ← ρ·v + (1 − ρ)·g²
/// θ ← θ − η·g / (√v + ε)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    /// Accumulators in checkpoint order, one block per weight/bias array.
    pub accumulators: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, model: &Model) -> Self {
        let accumulators = model
            .layers()
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]])
            .collect();
        RmsProp { config, accumulators }
    }

    /// Accumulators flattened in checkpoint order.
    pub fn flatten(&self) -> Vec<f64> {
        self.accumulators.iter().flatten().copied().collect()
    }

    /// Applies one update in place. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        let blocks: Vec<&Vec<f64>> = grads.layers.iter().flat_map(|(w, b)| [w, b]).collect();
        if blocks.len() != self.accumulators.len()
            || blocks
                .iter()
                .zip(&self.accumulators)
                .any(|(g, v)| g.len() != v.len())
        {
            return Err(Error::Shape(
                "gradient shapes do not match optimizer state".into(),
            ));
        }
        for (n, g) in blocks.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                let layer = n / 2 + 1;
                let kind = if n % 2 == 0 { "weights" } else { "bias" };
                return Err(Error::NonFiniteGradient(format!("layer {layer} {kind}[{i}]")));
            }
        }
        let RmsPropConfig {
            learning_rate,
            rho,
            epsilon,
        } = self.config;
        for (((_, params), v), g) in model.param_blocks_mut().zip(&mut self.accumulators).zip(blocks) {
            for ((p, v), &g) in params.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = rho * *v + (1.0 - rho) * g * g;
                *p -= learning_rate * g / (v.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, Architecture, ConvLayer, LayerSpec};

    fn scalar_model(theta: f64) -> Model {
        // 1→4 pointwise layer; only the first weight is exercised.
        let spec = LayerSpec::new(1, 4, 1, Activation::None);
        let layer = ConvLayer::new(spec, vec![theta, 0.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        Model::from_layers(vec![layer]).unwrap()
    }

    fn grads_with(first: f64) -> Gradients {
        Gradients {
            layers: vec![(vec![first, 0.0, 0.0, 0.0], vec![0.0; 4])],
        }
    }

    #[test]
    fn scalar_step_matches_hand_computation() {
        let mut model = scalar_model(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &model);
        opt.step(&mut model, &grads_with(1.0)).unwrap();
        let v = opt.accumulators[0][0];
        assert!((v - 0.1).abs() < 1e-15);
        let theta = model.layers()[0].weights[0];
        let expected = -0.001 / (0.1f64.sqrt() + 1e-8);
        assert!((theta - expected).abs() <= 1e-15 * expected.abs());
        assert!((theta + 0.003_162_3).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_only_decays_state() {
        let mut model = scalar_model(0.5);
        let before = model.clone();
        let mut opt = RmsProp::new(RmsPropConfig::default(), &model);
        opt.accumulators[0][0] = 2.0;
        opt.step(&mut model, &grads_with(0.0)).unwrap();
        assert_eq!(model, before);
        assert!((opt.accumulators[0][0] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn constant_positive_gradient_decreases_monotonically() {
        let mut model = scalar_model(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &model);
        opt.step(&mut model, &grads_with(0.3)).unwrap();
        let first = model.layers()[0].weights[0];
        opt.step(&mut model, &grads_with(0.3)).unwrap();
        let second = model.layers()[0].weights[0];
        assert!(first < 0.0 && second < first);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let arch = Architecture::default();
        let mut model = Model::init(&arch, 0).unwrap();
        let before = model.clone();
        let mut opt = RmsProp::new(RmsPropConfig::default(), &model);
        let mut g = Gradients::zeros(&arch);
        g.layers[2].1[5] = f64::NAN;
        let err = opt.step(&mut model, &g).unwrap_err();
        assert_eq!(err.to_string(), "non-finite gradient in layer 3 bias[5]");
        assert_eq!(model, before);
    }
}
