use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guards the normalizations against all-zero vectors.
pub const NORM_EPS: f64 = 1e-12;

/// Mean-subtract, L2-normalize, then split into positive and negative parts.
pub fn antirectifier(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; 2 * n];
    if n == 0 {
        return out;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let norm = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt().max(NORM_EPS);
    for (i, x) in v.iter().enumerate() {
        let u = (x - mean) / norm;
        if u > 0.0 {
            out[i] = u;
        } else if u < 0.0 {
            out[i + n] = -u;
        }
    }
    out
}

/// Backward pass of [`antirectifier`]: maps the gradient of the `2n` outputs
/// to the gradient of the `n` inputs.
pub fn antirectifier_backward(v: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let raw = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
    let norm = raw.max(NORM_EPS);
    let u: Vec<f64> = v.iter().map(|x| (x - mean) / norm).collect();
    let gu: Vec<f64> = (0..n)
        .map(|i| {
            if u[i] > 0.0 {
                grad_out[i]
            } else if u[i] < 0.0 {
                -grad_out[i + n]
            } else {
                0.0
            }
        })
        .collect();
    let mut gc: Vec<f64> = if raw > NORM_EPS {
        let dot: f64 = u.iter().zip(&gu).map(|(a, b)| a * b).sum();
        gu.iter().zip(&u).map(|(g, ui)| (g - ui * dot) / norm).collect()
    } else {
        gu.iter().map(|g| g / norm).collect()
    };
    let gmean = gc.iter().sum::<f64>() / n as f64;
    for g in &mut gc {
        *g -= gmean;
    }
    gc
}

/// Per-pixel fully connected network mapping a channel vector to
/// apodization weights.
///
/// `layer_dims = [C, h_1, ..., h_k, C]`. Every hidden layer is followed by
/// an antirectifier, so the layer after it takes `2 h` inputs. The input is
/// normalized to unit L2 norm before the first layer; the output weights are
/// applied to the raw channel vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNetwork {
    layer_dims: Vec<usize>,
    params: Vec<f64>,
    seed: u64,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Inputs to each dense layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each dense layer; the last one is the weights.
    pre: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn weights(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

impl WeightNetwork {
    /// Hidden layers get uniform Glorot initialization from `seed`. The final
    /// layer starts at zero weights and bias `1/C`, so the untrained network
    /// reproduces uniform DAS.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("layer dims need at least input and output, all nonzero"));
        }
        let c = layer_dims[0];
        if *layer_dims.last().unwrap() != c {
            return Err(Error::invalid(format!(
                "output dimension {} must equal channel count {c}",
                layer_dims.last().unwrap()
            )));
        }
        let mut net = Self {
            layer_dims: layer_dims.to_vec(),
            params: Vec::new(),
            seed,
        };
        net.params = vec![0.0; net.num_params()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = net.num_layers();
        for l in 0..layers {
            let (n_in, n_out) = net.layer_shape(l);
            let (w0, b0) = net.layer_offsets(l);
            if l + 1 < layers {
                let a = (6.0 / (n_in + n_out) as f64).sqrt();
                for p in &mut net.params[w0..w0 + n_in * n_out] {
                    *p = rng.gen_range(-a..a);
                }
            } else {
                for p in &mut net.params[b0..b0 + n_out] {
                    *p = 1.0 / c as f64;
                }
            }
        }
        Ok(net)
    }

    /// The scaled-down default: `C -> 2C -> C -> 2C -> C`.
    pub fn desk(num_channels: usize, seed: u64) -> Result<Self> {
        let c = num_channels;
        Self::new(&[c, 2 * c, c, 2 * c, c], seed)
    }

    /// Node counts 128 / 32 / 32 / 128 for a 128-channel array.
    pub fn reference_dims(num_channels: usize) -> Vec<usize> {
        vec![num_channels, 128, 32, 32, num_channels]
    }

    pub fn from_parts(layer_dims: Vec<usize>, params: Vec<f64>, seed: u64) -> Result<Self> {
        let mut net = Self::new(&layer_dims, seed)?;
        if params.len() != net.num_params() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                net.num_params(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn num_channels(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(inputs, outputs)` of dense layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let n_in = if l == 0 { self.layer_dims[0] } else { 2 * self.layer_dims[l] };
        (n_in, self.layer_dims[l + 1])
    }

    /// Offsets of the weight matrix (row-major, `out x in`) and bias of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            let (i, o) = self.layer_shape(k);
            off += i * o + o;
        }
        let (i, o) = self.layer_shape(l);
        (off, off + i * o)
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (i, o) = self.layer_shape(l);
                i * o + o
            })
            .sum()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Zeroes the final layer, weights and bias.
    pub fn zero_output_layer(&mut self) {
        let l = self.num_layers() - 1;
        let (w0, _) = self.layer_offsets(l);
        let end = self.num_params();
        for p in &mut self.params[w0..end] {
            *p = 0.0;
        }
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.num_channels() {
            return Err(Error::invalid(format!(
                "network expects {} channels, got {}",
                self.num_channels(),
                z.len()
            )));
        }
        Ok(())
    }

    pub fn trace(&self, z: &[f64]) -> Result<ForwardTrace> {
        self.check_input(z)?;
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
        let mut h: Vec<f64> = z.iter().map(|v| v / norm).collect();
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        for l in 0..layers {
            let (n_in, n_out) = self.layer_shape(l);
            let (w0, b0) = self.layer_offsets(l);
            let w = &self.params[w0..w0 + n_in * n_out];
            let b = &self.params[b0..b0 + n_out];
            let a: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(&h).map(|(x, y)| x * y).sum::<f64>())
                .collect();
            let next = if l + 1 < layers { antirectifier(&a) } else { Vec::new() };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(a);
        }
        Ok(ForwardTrace { inputs, pre })
    }

    /// Apodization weights and the beamformed value `w^T z`.
    pub fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        let t = self.trace(z)?;
        let y = t.weights().iter().zip(z).map(|(a, b)| a * b).sum();
        Ok((t.weights().to_vec(), y))
    }

    /// Accumulates into `grad` the parameter gradient given the gradient
    /// of the loss with respect to the output weights.
    pub fn backward(&self, trace: &ForwardTrace, grad_weights: &[f64], grad: &mut [f64]) {
        let mut g = grad_weights.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = self.layer_shape(l);
            let (w0, b0) = self.layer_offsets(l);
            let input = &trace.inputs[l];
            for o in 0..n_out {
                let go = g[o];
                grad[b0 + o] += go;
                if go != 0.0 {
                    let row = &mut grad[w0 + o * n_in..w0 + (o + 1) * n_in];
                    for (r, x) in row.iter_mut().zip(input) {
                        *r += go * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[w0..w0 + n_in * n_out];
            let mut g_in = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g[o];
                if go != 0.0 {
                    for (gi, wv) in g_in.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *gi += go * wv;
                    }
                }
            }
            g = antirectifier_backward(&trace.pre[l - 1], &g_in);
        }
    }
}
