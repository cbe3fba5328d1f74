use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-channel signal stored channel-major: `data[c * len + t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor1d {
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl Tensor1d {
    pub fn new(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{len} tensor",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "value at channel {} step {} is not finite",
                i / len.max(1),
                i % len.max(1)
            )));
        }
        Ok(Tensor1d { channels, len, data })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Tensor1d {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    /// A single-channel tensor holding `signal`.
    pub fn from_signal(signal: &[f64]) -> Result<Self> {
        Tensor1d::new(1, signal.len(), signal.to_vec())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn get(&self, c: usize, t: usize) -> f64 {
        self.data[c * self.len + t]
    }

    pub fn set(&mut self, c: usize, t: usize, value: f64) {
        self.data[c * self.len + t] = value;
    }

    /// Values of every channel at step `t`.
    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, t)).collect()
    }

    /// Copy of steps `start..start + len` of every channel.
    pub fn window(&self, start: usize, len: usize) -> Result<Tensor1d> {
        if start + len > self.len {
            return Err(Error::Shape(format!(
                "window {start}..{} outside length {}",
                start + len,
                self.len
            )));
        }
        let mut data = Vec::with_capacity(self.channels * len);
        for c in 0..self.channels {
            data.extend_from_slice(&self.channel(c)[start..start + len]);
        }
        Ok(Tensor1d {
            channels: self.channels,
            len,
            data,
        })
    }
}
