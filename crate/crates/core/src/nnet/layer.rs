use serde::{Deserialize, Serialize};

use super::tensor::Tensor1d;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// Shape of one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation) -> Self {
        LayerSpec {
            in_channels,
            out_channels,
            kernel_size,
            activation,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }
}

/// A same-padded 1-D convolution. `weights[(o * in + i) * kernel + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(spec: LayerSpec, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if spec.kernel_size.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "kernel size {} must be odd",
                spec.kernel_size
            )));
        }
        if weights.len() != spec.weight_count() || bias.len() != spec.out_channels {
            return Err(Error::Shape(format!(
                "layer {}->{} kernel {} needs {} weights and {} biases, got {} and {}",
                spec.in_channels,
                spec.out_channels,
                spec.kernel_size,
                spec.weight_count(),
                spec.out_channels,
                weights.len(),
                bias.len()
            )));
        }
        Ok(ConvLayer { spec, weights, bias })
    }

    pub fn zeros(spec: LayerSpec) -> Result<Self> {
        ConvLayer::new(spec, vec![0.0; spec.weight_count()], vec![0.0; spec.out_channels])
    }

    pub fn weight(&self, o: usize, i: usize, k: usize) -> f64 {
        self.weights[self.weight_index(o, i, k)]
    }

    pub fn weight_index(&self, o: usize, i: usize, k: usize) -> usize {
        (o * self.spec.in_channels + i) * self.spec.kernel_size + k
    }
}

/// Output range `t0..t1` for which `t + shift` stays inside `0..len`.
fn valid_range(shift: isize, len: usize) -> (usize, usize) {
    let t0 = ((-shift).max(0) as usize).min(len);
    let t1 = (len as isize - shift).clamp(0, len as isize) as usize;
    (t0, t1.max(t0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for lane in 0..4 {
            acc[lane] += a[4 * c + lane] * b[4 * c + lane];
        }
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y[o][t] = act(bias[o] + Σ_i Σ_k w[o][i][k] · x[i][t + k − (kernel − 1)/2])`,
/// with zeros outside the signal.
///
/// Each output element accumulates its terms in (i, k) order, the same order a
/// direct triple loop uses, so the two agree exactly.
pub fn conv1d_forward(x: &Tensor1d, layer: &ConvLayer) -> Result<Tensor1d> {
    let spec = layer.spec;
    if x.channels() != spec.in_channels {
        return Err(Error::Shape(format!(
            "layer expects {} input channels, got {}",
            spec.in_channels,
            x.channels()
        )));
    }
    let len = x.len();
    let half = (spec.kernel_size / 2) as isize;
    let mut y = Tensor1d::zeros(spec.out_channels, len);
    for o in 0..spec.out_channels {
        let out = y.channel_mut(o);
        out.fill(layer.bias[o]);
        for i in 0..spec.in_channels {
            let input = x.channel(i);
            for k in 0..spec.kernel_size {
                let w = layer.weight(o, i, k);
                let shift = k as isize - half;
                let (t0, t1) = valid_range(shift, len);
                if t0 == t1 {
                    continue;
                }
                let src = &input[(t0 as isize + shift) as usize..(t1 as isize + shift) as usize];
                for (yo, xv) in out[t0..t1].iter_mut().zip(src) {
                    *yo += w * xv;
                }
            }
        }
        if spec.activation == Activation::Relu {
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }
    Ok(y)
}

/// Backpropagates through one layer.
///
/// `output` is the layer's post-activation output and `grad_output` the loss
/// gradient with respect to it. Returns `(grad_input, grad_weights, grad_bias)`;
/// the input gradient is skipped (`None`) when `need_input_grad` is false.
pub fn conv1d_backward(
    input: &Tensor1d,
    output: &Tensor1d,
    grad_output: &Tensor1d,
    layer: &ConvLayer,
    need_input_grad: bool,
) -> Result<(Option<Tensor1d>, Vec<f64>, Vec<f64>)> {
    let spec = layer.spec;
    let len = input.len();
    if output.channels() != spec.out_channels
        || grad_output.channels() != spec.out_channels
        || output.len() != len
        || grad_output.len() != len
        || input.channels() != spec.in_channels
    {
        return Err(Error::Shape("backward shapes do not match the layer".into()));
    }

    // Gradient with respect to the pre-activation.
    let mut delta = grad_output.clone();
    if spec.activation == Activation::Relu {
        for o in 0..spec.out_channels {
            let out = output.channel(o);
            for (d, &a) in delta.channel_mut(o).iter_mut().zip(out) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
    }

    let half = (spec.kernel_size / 2) as isize;
    let mut grad_w = vec![0.0; spec.weight_count()];
    let mut grad_b = vec![0.0; spec.out_channels];
    let mut grad_in = need_input_grad.then(|| Tensor1d::zeros(spec.in_channels, len));

    for o in 0..spec.out_channels {
        let d = delta.channel(o);
        grad_b[o] = d.iter().sum();
        for i in 0..spec.in_channels {
            let x = input.channel(i);
            for k in 0..spec.kernel_size {
                let shift = k as isize - half;
                let (t0, t1) = valid_range(shift, len);
                if t0 == t1 {
                    continue;
                }
                let s0 = (t0 as isize + shift) as usize;
                let s1 = (t1 as isize + shift) as usize;
                grad_w[layer.weight_index(o, i, k)] = dot(&d[t0..t1], &x[s0..s1]);
                if let Some(gi) = grad_in.as_mut() {
                    let w = layer.weight(o, i, k);
                    for (g, dv) in gi.channel_mut(i)[s0..s1].iter_mut().zip(&d[t0..t1]) {
                        *g += w * dv;
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}
