//! Dense 3-axis tensor (batch, channels, time) in row-major order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub batch: usize,
    pub channels: usize,
    pub time: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, channels: usize, time: usize) -> Self {
        Tensor {
            batch,
            channels,
            time,
            data: vec![0.0; batch * channels * time],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, time: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * channels * time {
            return Err(Error::Shape(format!(
                "expected {} values for ({batch},{channels},{time}), got {}",
                batch * channels * time,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite tensor value".into()));
        }
        Ok(Tensor {
            batch,
            channels,
            time,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, t: usize) -> usize {
        (b * self.channels + c) * self.time + t
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, t: usize) -> f64 {
        self.data[self.idx(b, c, t)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, t: usize, v: f64) {
        let i = self.idx(b, c, t);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.batch == other.batch && self.channels == other.channels && self.time == other.time
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            batch: self.batch,
            channels: self.channels,
            time: self.time,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}
