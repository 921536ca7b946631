//! The five layer types used by the models, with exact analytic
//! gradients. Forward in train mode caches activations; backward consumes
//! the cache and accumulates parameter gradients.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use rand::Rng;

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A mutable view of one parameter array paired with its accumulated
/// gradient. `decay` marks parameters subject to weight decay.
pub struct ParamSlot<'a> {
    pub values: &'a mut Vec<f64>,
    pub grads: &'a [f64],
    pub decay: bool,
}

fn init_uniform(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

// ---------------------------------------------------------------------------

/// Per-timestep linear map over channels: y[b,o,t] = W[o,i] x[b,i,t] + b[o].
#[derive(Debug, Clone)]
pub struct FullyConnected {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<f64>, // out x in
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    cache: Option<Tensor>,
}

impl FullyConnected {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        FullyConnected {
            in_channels,
            out_channels,
            weight: init_uniform(rng, out_channels * in_channels, in_channels),
            bias: vec![0.0; out_channels],
            grad_weight: vec![0.0; out_channels * in_channels],
            grad_bias: vec![0.0; out_channels],
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.channels != self.in_channels {
            return Err(Error::Shape(format!(
                "fully-connected expects {} channels, got {}",
                self.in_channels, x.channels
            )));
        }
        let mut y = Tensor::zeros(x.batch, self.out_channels, x.time);
        for b in 0..x.batch {
            for o in 0..self.out_channels {
                for i in 0..self.in_channels {
                    let w = self.weight[o * self.in_channels + i];
                    let xi = (b * x.channels + i) * x.time;
                    let yi = (b * y.channels + o) * y.time;
                    for t in 0..x.time {
                        y.data[yi + t] += w * x.data[xi + t];
                    }
                }
                let yi = (b * y.channels + o) * y.time;
                for t in 0..x.time {
                    y.data[yi + t] += self.bias[o];
                }
            }
        }
        if mode == Mode::Train {
            self.cache = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let mut gx = Tensor::zeros(x.batch, x.channels, x.time);
        for b in 0..x.batch {
            for o in 0..self.out_channels {
                let gi = (b * g.channels + o) * g.time;
                let mut gb = 0.0;
                for i in 0..self.in_channels {
                    let w = self.weight[o * self.in_channels + i];
                    let xi = (b * x.channels + i) * x.time;
                    let mut gw = 0.0;
                    for t in 0..x.time {
                        let gv = g.data[gi + t];
                        gw += gv * x.data[xi + t];
                        gx.data[xi + t] += w * gv;
                    }
                    self.grad_weight[o * self.in_channels + i] += gw;
                }
                for t in 0..x.time {
                    gb += g.data[gi + t];
                }
                self.grad_bias[o] += gb;
            }
        }
        Ok(gx)
    }
}

// ---------------------------------------------------------------------------

/// 1D convolution over time with same-length zero padding; odd kernel.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f64>, // out x in x k
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    cache: Option<Tensor>,
}

impl Conv1d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(kernel % 2 == 1, "same-padding requires an odd kernel");
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            weight: init_uniform(
                rng,
                out_channels * in_channels * kernel,
                in_channels * kernel,
            ),
            bias: vec![0.0; out_channels],
            grad_weight: vec![0.0; out_channels * in_channels * kernel],
            grad_bias: vec![0.0; out_channels],
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.channels != self.in_channels {
            return Err(Error::Shape(format!(
                "conv1d expects {} channels, got {}",
                self.in_channels, x.channels
            )));
        }
        let pad = self.kernel / 2;
        let mut y = Tensor::zeros(x.batch, self.out_channels, x.time);
        for b in 0..x.batch {
            for o in 0..self.out_channels {
                let yi = (b * y.channels + o) * y.time;
                for i in 0..self.in_channels {
                    let xi = (b * x.channels + i) * x.time;
                    let wi = (o * self.in_channels + i) * self.kernel;
                    for t in 0..x.time {
                        let mut acc = 0.0;
                        for j in 0..self.kernel {
                            let src = t as isize + j as isize - pad as isize;
                            if src >= 0 && (src as usize) < x.time {
                                acc += self.weight[wi + j] * x.data[xi + src as usize];
                            }
                        }
                        y.data[yi + t] += acc;
                    }
                }
                for t in 0..x.time {
                    y.data[yi + t] += self.bias[o];
                }
            }
        }
        if mode == Mode::Train {
            self.cache = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let pad = self.kernel / 2;
        let mut gx = Tensor::zeros(x.batch, x.channels, x.time);
        for b in 0..x.batch {
            for o in 0..self.out_channels {
                let gi = (b * g.channels + o) * g.time;
                for i in 0..self.in_channels {
                    let xi = (b * x.channels + i) * x.time;
                    let wi = (o * self.in_channels + i) * self.kernel;
                    for t in 0..x.time {
                        let gv = g.data[gi + t];
                        for j in 0..self.kernel {
                            let src = t as isize + j as isize - pad as isize;
                            if src >= 0 && (src as usize) < x.time {
                                self.grad_weight[wi + j] += gv * x.data[xi + src as usize];
                                gx.data[xi + src as usize] += self.weight[wi + j] * gv;
                            }
                        }
                    }
                }
                for t in 0..x.time {
                    self.grad_bias[o] += g.data[gi + t];
                }
            }
        }
        Ok(gx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct BatchNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
}

/// Per-channel normalization over batch and time; batch statistics in
/// train mode, running statistics in eval mode.
pub struct BatchNorm1d {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    cache: Option<BatchNormCache>,
}

impl Clone for BatchNorm1d {
    fn clone(&self) -> Self {
        BatchNorm1d {
            channels: self.channels,
            gamma: self.gamma.clone(),
            beta: self.beta.clone(),
            running_mean: self.running_mean.clone(),
            running_var: self.running_var.clone(),
            grad_gamma: self.grad_gamma.clone(),
            grad_beta: self.grad_beta.clone(),
            cache: None,
        }
    }
}

impl std::fmt::Debug for BatchNorm1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatchNorm1d")
            .field("channels", &self.channels)
            .finish()
    }
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            grad_gamma: vec![0.0; channels],
            grad_beta: vec![0.0; channels],
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.channels != self.channels {
            return Err(Error::Shape(format!(
                "batchnorm expects {} channels, got {}",
                self.channels, x.channels
            )));
        }
        let n = (x.batch * x.time) as f64;
        let mut y = Tensor::zeros(x.batch, x.channels, x.time);
        match mode {
            Mode::Train => {
                let mut x_hat = Tensor::zeros(x.batch, x.channels, x.time);
                let mut inv_std = vec![0.0; self.channels];
                for c in 0..self.channels {
                    let mut mean = 0.0;
                    for b in 0..x.batch {
                        let xi = (b * x.channels + c) * x.time;
                        for t in 0..x.time {
                            mean += x.data[xi + t];
                        }
                    }
                    mean /= n;
                    let mut var = 0.0;
                    for b in 0..x.batch {
                        let xi = (b * x.channels + c) * x.time;
                        for t in 0..x.time {
                            let d = x.data[xi + t] - mean;
                            var += d * d;
                        }
                    }
                    var /= n;
                    let istd = 1.0 / (var + BATCHNORM_EPS).sqrt();
                    inv_std[c] = istd;
                    for b in 0..x.batch {
                        let xi = (b * x.channels + c) * x.time;
                        for t in 0..x.time {
                            let xh = (x.data[xi + t] - mean) * istd;
                            x_hat.data[xi + t] = xh;
                            y.data[xi + t] = self.gamma[c] * xh + self.beta[c];
                        }
                    }
                    self.running_mean[c] =
                        (1.0 - BATCHNORM_MOMENTUM) * self.running_mean[c] + BATCHNORM_MOMENTUM * mean;
                    self.running_var[c] =
                        (1.0 - BATCHNORM_MOMENTUM) * self.running_var[c] + BATCHNORM_MOMENTUM * var;
                }
                self.cache = Some(BatchNormCache { x_hat, inv_std });
            }
            Mode::Eval => {
                for c in 0..self.channels {
                    let istd = 1.0 / (self.running_var[c] + BATCHNORM_EPS).sqrt();
                    for b in 0..x.batch {
                        let xi = (b * x.channels + c) * x.time;
                        for t in 0..x.time {
                            y.data[xi + t] =
                                self.gamma[c] * (x.data[xi + t] - self.running_mean[c]) * istd
                                    + self.beta[c];
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let x_hat = &cache.x_hat;
        let n = (g.batch * g.time) as f64;
        let mut gx = Tensor::zeros(g.batch, g.channels, g.time);
        for c in 0..self.channels {
            let mut sum_g = 0.0;
            let mut sum_g_xhat = 0.0;
            for b in 0..g.batch {
                let gi = (b * g.channels + c) * g.time;
                for t in 0..g.time {
                    sum_g += g.data[gi + t];
                    sum_g_xhat += g.data[gi + t] * x_hat.data[gi + t];
                }
            }
            self.grad_beta[c] += sum_g;
            self.grad_gamma[c] += sum_g_xhat;
            let k = self.gamma[c] * cache.inv_std[c] / n;
            for b in 0..g.batch {
                let gi = (b * g.channels + c) * g.time;
                for t in 0..g.time {
                    gx.data[gi + t] = k
                        * (n * g.data[gi + t] - sum_g - x_hat.data[gi + t] * sum_g_xhat);
                }
            }
        }
        Ok(gx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Relu { cache: None }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if mode == Mode::Train {
            self.cache = Some(x.clone());
        }
        Ok(x.map(|v| v.max(0.0)))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let mut gx = g.clone();
        for (gv, xv) in gx.data.iter_mut().zip(&x.data) {
            if *xv <= 0.0 {
                *gv = 0.0;
            }
        }
        Ok(gx)
    }
}

// ---------------------------------------------------------------------------

/// Max pooling over time, kernel 2 stride 2 (truncating an odd tail).
#[derive(Debug, Clone, Default)]
pub struct MaxPool1d {
    cache: Option<(Vec<usize>, usize, usize, usize)>, // argmax, batch, channels, in_time
}

impl MaxPool1d {
    pub fn new() -> Self {
        MaxPool1d { cache: None }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.time < 2 {
            return Err(Error::Shape(format!(
                "maxpool needs time >= 2, got {}",
                x.time
            )));
        }
        let out_time = x.time / 2;
        let mut y = Tensor::zeros(x.batch, x.channels, out_time);
        let mut argmax = vec![0usize; x.batch * x.channels * out_time];
        for b in 0..x.batch {
            for c in 0..x.channels {
                let xi = (b * x.channels + c) * x.time;
                let yi = (b * x.channels + c) * out_time;
                for t in 0..out_time {
                    let a = x.data[xi + 2 * t];
                    let bb = x.data[xi + 2 * t + 1];
                    if a >= bb {
                        y.data[yi + t] = a;
                        argmax[yi + t] = xi + 2 * t;
                    } else {
                        y.data[yi + t] = bb;
                        argmax[yi + t] = xi + 2 * t + 1;
                    }
                }
            }
        }
        if mode == Mode::Train {
            self.cache = Some((argmax, x.batch, x.channels, x.time));
        }
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let (argmax, batch, channels, in_time) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let mut gx = Tensor::zeros(batch, channels, in_time);
        for (flat, &src) in argmax.iter().enumerate() {
            gx.data[src] += g.data[flat];
        }
        Ok(gx)
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Layer {
    FullyConnected(FullyConnected),
    Conv1d(Conv1d),
    BatchNorm1d(BatchNorm1d),
    Relu(Relu),
    MaxPool1d(MaxPool1d),
}

impl Layer {
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match self {
            Layer::FullyConnected(l) => l.forward(x, mode),
            Layer::Conv1d(l) => l.forward(x, mode),
            Layer::BatchNorm1d(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x, mode),
            Layer::MaxPool1d(l) => l.forward(x, mode),
        }
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        match self {
            Layer::FullyConnected(l) => l.backward(g),
            Layer::Conv1d(l) => l.backward(g),
            Layer::BatchNorm1d(l) => l.backward(g),
            Layer::Relu(l) => l.backward(g),
            Layer::MaxPool1d(l) => l.backward(g),
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Layer::FullyConnected(l) => {
                l.grad_weight.iter_mut().for_each(|v| *v = 0.0);
                l.grad_bias.iter_mut().for_each(|v| *v = 0.0);
            }
            Layer::Conv1d(l) => {
                l.grad_weight.iter_mut().for_each(|v| *v = 0.0);
                l.grad_bias.iter_mut().for_each(|v| *v = 0.0);
            }
            Layer::BatchNorm1d(l) => {
                l.grad_gamma.iter_mut().for_each(|v| *v = 0.0);
                l.grad_beta.iter_mut().for_each(|v| *v = 0.0);
            }
            Layer::Relu(_) | Layer::MaxPool1d(_) => {}
        }
    }

    /// Trainable parameters with gradients. Weight decay applies to
    /// FC/conv weights only.
    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        match self {
            Layer::FullyConnected(l) => vec![
                ParamSlot {
                    values: &mut l.weight,
                    grads: &l.grad_weight,
                    decay: true,
                },
                ParamSlot {
                    values: &mut l.bias,
                    grads: &l.grad_bias,
                    decay: false,
                },
            ],
            Layer::Conv1d(l) => vec![
                ParamSlot {
                    values: &mut l.weight,
                    grads: &l.grad_weight,
                    decay: true,
                },
                ParamSlot {
                    values: &mut l.bias,
                    grads: &l.grad_bias,
                    decay: false,
                },
            ],
            Layer::BatchNorm1d(l) => vec![
                ParamSlot {
                    values: &mut l.gamma,
                    grads: &l.grad_gamma,
                    decay: false,
                },
                ParamSlot {
                    values: &mut l.beta,
                    grads: &l.grad_beta,
                    decay: false,
                },
            ],
            Layer::Relu(_) | Layer::MaxPool1d(_) => Vec::new(),
        }
    }

    /// All persistent state (trainable parameters plus BatchNorm running
    /// statistics) as named arrays, for checkpointing and gradient checks.
    pub fn state_views(&self) -> Vec<(&'static str, Vec<usize>, &Vec<f64>)> {
        match self {
            Layer::FullyConnected(l) => vec![
                ("weight", vec![l.out_channels, l.in_channels], &l.weight),
                ("bias", vec![l.out_channels], &l.bias),
            ],
            Layer::Conv1d(l) => vec![
                (
                    "weight",
                    vec![l.out_channels, l.in_channels, l.kernel],
                    &l.weight,
                ),
                ("bias", vec![l.out_channels], &l.bias),
            ],
            Layer::BatchNorm1d(l) => vec![
                ("gamma", vec![l.channels], &l.gamma),
                ("beta", vec![l.channels], &l.beta),
                ("running_mean", vec![l.channels], &l.running_mean),
                ("running_var", vec![l.channels], &l.running_var),
            ],
            Layer::Relu(_) | Layer::MaxPool1d(_) => Vec::new(),
        }
    }

    pub fn state_views_mut(&mut self) -> Vec<(&'static str, Vec<usize>, &mut Vec<f64>)> {
        match self {
            Layer::FullyConnected(l) => vec![
                ("weight", vec![l.out_channels, l.in_channels], &mut l.weight),
                ("bias", vec![l.out_channels], &mut l.bias),
            ],
            Layer::Conv1d(l) => vec![
                (
                    "weight",
                    vec![l.out_channels, l.in_channels, l.kernel],
                    &mut l.weight,
                ),
                ("bias", vec![l.out_channels], &mut l.bias),
            ],
            Layer::BatchNorm1d(l) => vec![
                ("gamma", vec![l.channels], &mut l.gamma),
                ("beta", vec![l.channels], &mut l.beta),
                ("running_mean", vec![l.channels], &mut l.running_mean),
                ("running_var", vec![l.channels], &mut l.running_var),
            ],
            Layer::Relu(_) | Layer::MaxPool1d(_) => Vec::new(),
        }
    }
}
