use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{conv1d_backward, conv1d_forward, Activation, ConvLayer, LayerSpec};
use super::loss::{log_softmax_columns, softmax_columns, target_classes};
use super::tensor::Tensor1d;
use super::OUTPUT_CHANNELS;
use crate::error::{Error, Result};

/// Ordered layer shapes of a segmentation network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
}

impl Default for Architecture {
    /// Seven kernel-9 ReLU convolutions 1→16→16→32→32→32→32→32, then a
    /// pointwise 32→4 map feeding the softmax. 44,244 parameters.
    fn default() -> Self {
        let widths = [1, 16, 16, 32, 32, 32, 32, 32];
        let mut layers: Vec<LayerSpec> = widths
            .windows(2)
            .map(|w| LayerSpec::new(w[0], w[1], 9, Activation::Relu))
            .collect();
        layers.push(LayerSpec::new(32, OUTPUT_CHANNELS, 1, Activation::None));
        Architecture { layers }
    }
}

impl Architecture {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let arch = Architecture { layers };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::Shape("architecture has no layers".into()))?;
        let last = self.layers.last().unwrap_or(first);
        if first.in_channels != 1 {
            return Err(Error::Shape(format!(
                "first layer must take 1 channel, takes {}",
                first.in_channels
            )));
        }
        if last.out_channels != OUTPUT_CHANNELS || last.activation != Activation::None {
            return Err(Error::Shape(format!(
                "last layer must emit {OUTPUT_CHANNELS} linear channels"
            )));
        }
        for (n, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::Shape(format!(
                    "layer {} emits {} channels but layer {} takes {}",
                    n + 1,
                    pair[0].out_channels,
                    n + 2,
                    pair[1].in_channels
                )));
            }
        }
        if let Some(l) = self.layers.iter().find(|l| l.kernel_size % 2 == 0) {
            return Err(Error::Shape(format!("kernel size {} must be odd", l.kernel_size)));
        }
        Ok(())
    }

    /// Σ over layers of `out × in × kernel + out`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Samples on each side of a position that can influence its output.
    pub fn receptive_half_width(&self) -> usize {
        self.layers.iter().map(|l| l.kernel_size / 2).sum()
    }
}

/// Gradients laid out like the model: per layer, weights then biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros(arch: &Architecture) -> Self {
        Gradients {
            layers: arch
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weight_count()], vec![0.0; l.out_channels]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, b)| *a += b);
            b.iter_mut().zip(ob).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    /// Values in checkpoint order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b))
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    layers: Vec<ConvLayer>,
}

impl Model {
    /// Glorot-uniform weights (bound `√(6 / (fan_in + fan_out))`), zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        Model::init_scaled(arch, seed, 1.0)
    }

    /// Like [`Model::init`] with every weight multiplied by `scale`.
    pub fn init_scaled(arch: &Architecture, seed: u64, scale: f64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layers
            .iter()
            .map(|&spec| {
                let fan_in = (spec.in_channels * spec.kernel_size) as f64;
                let fan_out = (spec.out_channels * spec.kernel_size) as f64;
                let bound = (6.0 / (fan_in + fan_out)).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let weights = (0..spec.weight_count())
                    .map(|_| dist.sample(&mut rng) * scale)
                    .collect();
                ConvLayer::new(spec, weights, vec![0.0; spec.out_channels])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Model { layers })
    }

    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        Architecture::new(layers.iter().map(|l| l.spec).collect())?;
        Ok(Model { layers })
    }

    /// Rebuilds a model from parameters in checkpoint order.
    pub fn from_flat(arch: &Architecture, params: &[f64]) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "architecture has {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        let mut rest = params;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for &spec in &arch.layers {
            let (w, tail) = rest.split_at(spec.weight_count());
            let (b, tail) = tail.split_at(spec.out_channels);
            rest = tail;
            layers.push(ConvLayer::new(spec, w.to_vec(), b.to_vec())?);
        }
        Ok(Model { layers })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.layers.iter().map(|l| l.spec).collect(),
        }
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Parameters in checkpoint order: for each layer, weights `[o][i][k]` then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .copied()
            .collect()
    }

    /// Mutable (name, values) blocks in checkpoint order.
    pub(crate) fn param_blocks_mut(&mut self) -> impl Iterator<Item = (String, &mut Vec<f64>)> {
        self.layers.iter_mut().enumerate().flat_map(|(n, l)| {
            [
                (format!("layer {} weights", n + 1), &mut l.weights),
                (format!("layer {} bias", n + 1), &mut l.bias),
            ]
        })
    }

    fn check_input(&self, x: &Tensor1d) -> Result<()> {
        if x.channels() != 1 {
            return Err(Error::Shape(format!(
                "network input must have 1 channel, got {}",
                x.channels()
            )));
        }
        Ok(())
    }

    /// Outputs of every layer, last one being the logits.
    fn activations(&self, x: &Tensor1d) -> Result<Vec<Tensor1d>> {
        self.check_input(x)?;
        let mut acts: Vec<Tensor1d> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = conv1d_forward(acts.last().unwrap_or(x), layer)?;
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn forward_logits(&self, x: &Tensor1d) -> Result<Tensor1d> {
        Ok(self.activations(x)?.pop().expect("at least one layer"))
    }

    /// Per-step class probabilities, `4 × T`.
    pub fn forward(&self, x: &Tensor1d) -> Result<Tensor1d> {
        Ok(softmax_columns(&self.forward_logits(x)?))
    }

    /// Loss of one `(x, target)` pair and its exact gradient.
    ///
    /// With `p = softmax(z)` per step, `∂L/∂z[c][t] = (p[c][t] − target[c][t]) / T`,
    /// which is then pushed back through each convolution.
    pub fn backward(&self, x: &Tensor1d, target: &Tensor1d) -> Result<(f64, Gradients)> {
        let acts = self.activations(x)?;
        let logits = acts.last().expect("at least one layer");
        if target.channels() != logits.channels() || target.len() != logits.len() {
            return Err(Error::Shape(format!(
                "target is {}x{}, network output is {}x{}",
                target.channels(),
                target.len(),
                logits.channels(),
                logits.len()
            )));
        }
        let classes = target_classes(target)?;
        let len = logits.len();
        let inv_len = 1.0 / len.max(1) as f64;

        let log_probs = log_softmax_columns(logits);
        let loss = -classes
            .iter()
            .enumerate()
            .map(|(t, &c)| log_probs.get(c, t))
            .sum::<f64>()
            * inv_len;

        let mut grad = Tensor1d::zeros(logits.channels(), len);
        for c in 0..logits.channels() {
            for (t, g) in grad.channel_mut(c).iter_mut().enumerate() {
                let hot = if classes[t] == c { 1.0 } else { 0.0 };
                *g = (log_probs.get(c, t).exp() - hot) * inv_len;
            }
        }

        let mut layers = vec![(Vec::new(), Vec::new()); self.layers.len()];
        for n in (0..self.layers.len()).rev() {
            let input = if n == 0 { x } else { &acts[n - 1] };
            let (grad_in, gw, gb) = conv1d_backward(input, &acts[n], &grad, &self.layers[n], n > 0)?;
            layers[n] = (gw, gb);
            if let Some(g) = grad_in {
                grad = g;
            }
        }
        Ok((loss, Gradients { layers }))
    }

    /// Mean loss and mean gradient over a batch.
    ///
    /// With `deterministic` set, per-item gradients are summed in batch order so
    /// the result does not depend on thread scheduling; otherwise they are
    /// combined with a parallel tree reduction.
    pub fn batch_backward(
        &self,
        batch: &[(Tensor1d, Tensor1d)],
        deterministic: bool,
    ) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let arch = self.architecture();
        let (loss_sum, mut grads) = if deterministic {
            let items = batch
                .par_iter()
                .map(|(x, y)| self.backward(x, y))
                .collect::<Result<Vec<_>>>()?;
            let mut total = Gradients::zeros(&arch);
            let mut loss = 0.0;
            for (l, g) in &items {
                loss += l;
                total.add_assign(g);
            }
            (loss, total)
        } else {
            batch.par_iter().map(|(x, y)| self.backward(x, y)).try_reduce(
                || (0.0, Gradients::zeros(&arch)),
                |(la, mut ga), (lb, gb)| {
                    ga.add_assign(&gb);
                    Ok((la + lb, ga))
                },
            )?
        };
        let scale = 1.0 / batch.len() as f64;
        grads.scale(scale);
        Ok((loss_sum * scale, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::cross_entropy_loss;
    use rand::Rng;

    fn toy_arch(rng: &mut ChaCha8Rng) -> Architecture {
        let hidden = rng.random_range(1..4);
        let k1 = 2 * rng.random_range(0..3) + 1;
        let k2 = 2 * rng.random_range(0..2) + 1;
        Architecture::new(vec![
            LayerSpec::new(1, hidden, k1, Activation::Relu),
            LayerSpec::new(hidden, OUTPUT_CHANNELS, k2, Activation::None),
        ])
        .unwrap()
    }

    fn random_target(rng: &mut ChaCha8Rng, len: usize) -> Tensor1d {
        let mut t = Tensor1d::zeros(OUTPUT_CHANNELS, len);
        for step in 0..len {
            t.set(rng.random_range(0..OUTPUT_CHANNELS), step, 1.0);
        }
        t
    }

    #[test]
    fn default_architecture_counts() {
        let arch = Architecture::default();
        assert_eq!(arch.layers.len(), 8);
        assert_eq!(arch.param_count(), 44_244);
        assert_eq!(arch.receptive_half_width(), 28);
        let single = Architecture::new(vec![LayerSpec::new(1, 4, 1, Activation::None)]).unwrap();
        assert_eq!(single.param_count(), 8);
        assert_eq!(Model::init(&arch, 0).unwrap().param_count(), 44_244);
    }

    #[test]
    fn bad_architectures_are_rejected() {
        let relu_head = vec![LayerSpec::new(1, 4, 1, Activation::Relu)];
        assert!(Architecture::new(relu_head).is_err());
        let broken_chain = vec![
            LayerSpec::new(1, 3, 3, Activation::Relu),
            LayerSpec::new(2, 4, 1, Activation::None),
        ];
        assert!(Architecture::new(broken_chain).is_err());
        assert!(Architecture::new(vec![]).is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let arch = Architecture::default();
        let model = Model::init_scaled(&arch, 3, 0.0).unwrap();
        let x = Tensor1d::from_signal(&[0.3, -1.0, 2.0, 0.0, 5.0]).unwrap();
        let p = model.forward(&x).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn forward_is_deterministic_and_normalized() {
        let arch = Architecture::default();
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).sin()).collect();
        let x = Tensor1d::from_signal(&x).unwrap();
        let a = Model::init(&arch, 11).unwrap().forward(&x).unwrap();
        let b = Model::init(&arch, 11).unwrap().forward(&x).unwrap();
        assert_eq!(a, b);
        for t in 0..a.len() {
            let col = a.column(t);
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(col.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn flat_round_trip() {
        let arch = Architecture::default();
        let model = Model::init(&arch, 5).unwrap();
        assert_eq!(Model::from_flat(&arch, &model.flatten()).unwrap(), model);
        assert!(Model::from_flat(&arch, &[0.0; 3]).is_err());
    }

    #[test]
    fn backward_loss_matches_forward_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = toy_arch(&mut rng);
        let model = Model::init(&arch, 2).unwrap();
        let x = Tensor1d::from_signal(&[0.5, -0.25, 1.0, 2.0, -1.5, 0.0]).unwrap();
        let y = random_target(&mut rng, 6);
        let (loss, _) = model.backward(&x, &y).unwrap();
        let direct = cross_entropy_loss(&model.forward(&x).unwrap(), &y).unwrap();
        assert!((loss - direct).abs() < 1e-12);
    }

    /// Central differences on every parameter of small random models.
    #[test]
    fn gradients_match_finite_differences() {
        let step = 1e-5;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let arch = toy_arch(&mut rng);
            let model = Model::init(&arch, seed).unwrap();
            let len = rng.random_range(3..9);
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = Tensor1d::from_signal(&x).unwrap();
            let y = random_target(&mut rng, len);
            let analytic = model.backward(&x, &y).unwrap().1.flatten();
            let params = model.flatten();
            let loss_at = |p: &[f64]| {
                let m = Model::from_flat(&arch, p).unwrap();
                cross_entropy_loss(&m.forward(&x).unwrap(), &y).unwrap()
            };
            for j in 0..params.len() {
                let mut plus = params.clone();
                plus[j] += step;
                let mut minus = params.clone();
                minus[j] -= step;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
                let denom = analytic[j].abs().max(numeric.abs()).max(1e-6);
                let rel = (analytic[j] - numeric).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "seed {seed} param {j}: analytic {} numeric {numeric}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn stationary_point_has_zero_head_bias_gradient() {
        // All-zero weights give uniform softmax; a target uniform over classes
        // (each class equally often) makes Σ_t (p − target) vanish per channel.
        let arch = Architecture::default();
        let model = Model::init_scaled(&arch, 0, 0.0).unwrap();
        let x = Tensor1d::from_signal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let mut y = Tensor1d::zeros(4, 8);
        for t in 0..8 {
            y.set(t % 4, t, 1.0);
        }
        let (_, g) = model.backward(&x, &y).unwrap();
        let head_bias = &g.layers.last().unwrap().1;
        assert!(head_bias.iter().all(|&v| v.abs() < 1e-15), "{head_bias:?}");
    }

    #[test]
    fn duplicating_the_batch_keeps_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let arch = toy_arch(&mut rng);
        let model = Model::init(&arch, 4).unwrap();
        let x = Tensor1d::from_signal(&[0.1, 0.9, -0.3, 0.4]).unwrap();
        let y = random_target(&mut rng, 4);
        let one = model.batch_backward(&[(x.clone(), y.clone())], true).unwrap();
        let two = model
            .batch_backward(&[(x.clone(), y.clone()), (x, y)], true)
            .unwrap();
        assert!((one.0 - two.0).abs() < 1e-15);
        for (a, b) in one.1.flatten().iter().zip(two.1.flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}
