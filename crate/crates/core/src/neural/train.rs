use ndarray::{Array2, Array3};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{l1_grad, max_abs, mse_grad, smsle_grad, ssim_loss_grad, LossKind, LossSpec};
use super::network::{ForwardTrace, WeightNetwork};
use crate::error::{Error, Result};

/// Channel vectors with scalar targets. With `image_shape = Some((h, w))`
/// consecutive runs of `h * w` samples form row-major images, which the
/// SSIM loss needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
    pub image_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Vec<f64>, image_shape: Option<(usize, usize)>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if inputs.nrows() != targets.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        if let Some((h, w)) = image_shape {
            if h * w == 0 || inputs.nrows() % (h * w) != 0 {
                return Err(Error::shape(format!("{} samples do not tile {h}x{w} images", inputs.nrows())));
            }
        }
        Ok(Self {
            inputs,
            targets,
            image_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.inputs.ncols()
    }

    /// Uniform DAS output of every sample.
    pub fn das_outputs(&self) -> Vec<f64> {
        self.inputs.rows().into_iter().map(|r| r.mean().unwrap_or(0.0)).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(ndarray::Axis(0), rows),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            image_shape: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate towards zero.
    Cosine,
}

impl LrSchedule {
    /// Factor applied to the base rate during `epoch` (1-based) of `epochs`.
    pub fn factor(self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * (epoch - 1) as f64 / epochs as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per step for the pixelwise losses; SSIM steps on one image.
    pub batch_size: usize,
    pub optimizer: AdamParams,
    pub schedule: LrSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            optimizer: AdamParams::default(),
            schedule: LrSchedule::Constant,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub net: WeightNetwork,
    /// Full-dataset objective before training.
    pub initial_loss: f64,
    /// Full-dataset objective after each epoch.
    pub loss_history: Vec<f64>,
}

/// Objective over one batch and its parameter gradient.
pub struct BatchEval {
    pub loss: f64,
    pub main: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
}

/// Image tiling of a batch; pixelwise losses treat every sample as a
/// one-pixel image.
fn batch_shape(spec: &LossSpec, n: usize, image_shape: Option<(usize, usize)>) -> Result<(usize, usize, usize)> {
    match spec.kind {
        LossKind::Ssim => {
            let (h, w) = image_shape.ok_or_else(|| Error::invalid("the SSIM loss needs image-shaped samples"))?;
            Ok((n / (h * w), h, w))
        }
        _ => Ok((n, 1, 1)),
    }
}

/// Loss and gradient with respect to the outputs, laid out like the batch.
fn output_loss(spec: &LossSpec, y: &[f64], t: &[f64], shape: (usize, usize, usize), reference: f64) -> Result<(f64, Vec<f64>)> {
    let (i, h, w) = shape;
    match spec.kind {
        LossKind::Ssim => {
            let ya = Array3::from_shape_vec((i, h, w), y.to_vec()).expect("tiled");
            let ta = Array3::from_shape_vec((i, h, w), t.to_vec()).expect("tiled");
            let (v, g) = ssim_loss_grad(ya.view(), ta.view(), reference, spec)?;
            Ok((v, g.into_raw_vec_and_offset().0))
        }
        kind => {
            let ya = Array2::from_shape_vec((i, h * w), y.to_vec()).expect("tiled");
            let ta = Array2::from_shape_vec((i, h * w), t.to_vec()).expect("tiled");
            let (v, g) = match kind {
                LossKind::Mse => mse_grad(ya.view(), ta.view()),
                LossKind::L1 => l1_grad(ya.view(), ta.view()),
                _ => smsle_grad(ya.view(), ta.view(), spec.eps_log * reference),
            };
            Ok((v, g.into_raw_vec_and_offset().0))
        }
    }
}

/// Evaluates `main + lambda * mean penalty` on `data`. `reference` is the
/// magnitude the log clamps are relative to.
pub fn evaluate_batch(
    net: &WeightNetwork,
    data: &Dataset,
    spec: &LossSpec,
    reference: f64,
    with_grad: bool,
) -> Result<BatchEval> {
    let n = data.len();
    let shape = batch_shape(spec, n, data.image_shape)?;
    let traces: Vec<ForwardTrace> = data
        .inputs
        .rows()
        .into_iter()
        .map(|r| net.trace(r.as_slice().expect("row-major")))
        .collect::<Result<_>>()?;
    let y: Vec<f64> = traces
        .iter()
        .zip(data.inputs.rows())
        .map(|(t, z)| t.weights().iter().zip(z.iter()).map(|(a, b)| a * b).sum())
        .collect();
    let (main, gy) = output_loss(spec, &y, &data.targets, shape, reference)?;
    let sums: Vec<f64> = traces.iter().map(|t| t.weights().iter().sum::<f64>() - 1.0).collect();
    let penalty = sums.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let mut grad = Vec::new();
    if with_grad {
        grad = vec![0.0; net.num_params()];
        let mut gw = vec![0.0; net.num_channels()];
        for (k, t) in traces.iter().enumerate() {
            let z = data.inputs.row(k);
            let pen = spec.lambda * 2.0 * sums[k] / n as f64;
            for (g, zc) in gw.iter_mut().zip(z.iter()) {
                *g = gy[k] * zc + pen;
            }
            net.backward(t, &gw, &mut grad);
        }
    }
    Ok(BatchEval {
        loss: main + spec.lambda * penalty,
        main,
        penalty,
        grad,
    })
}

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "non-finite loss at epoch {epoch}; reduce the learning rate"
        )))
    }
}

/// Adam on minibatches in a seeded shuffled order.
pub fn train(net: &WeightNetwork, data: &Dataset, spec: &LossSpec, cfg: &TrainConfig) -> Result<TrainingRun> {
    spec.validate()?;
    if data.num_channels() != net.num_channels() {
        return Err(Error::invalid(format!(
            "dataset has {} channels, network expects {}",
            data.num_channels(),
            net.num_channels()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let reference = max_abs(ndarray::ArrayView1::from(&data.targets[..]).into_dyn());
    let mut net = net.clone();
    let initial_loss = evaluate_batch(&net, data, spec, reference, false)?.loss;
    check_finite(initial_loss, 0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = net.num_params();
    let (mut m, mut v) = (vec![0.0; p], vec![0.0; p]);
    let AdamParams {
        learning_rate: lr,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    } = cfg.optimizer;
    let mut step = 0i32;
    let batches: Vec<Vec<usize>> = match spec.kind {
        LossKind::Ssim => {
            let (h, w) = data.image_shape.ok_or_else(|| Error::invalid("the SSIM loss needs image-shaped samples"))?;
            (0..data.len() / (h * w)).map(|i| (i * h * w..(i + 1) * h * w).collect()).collect()
        }
        _ => Vec::new(),
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let lr = lr * cfg.schedule.factor(epoch, cfg.epochs);
        let order: Vec<Vec<usize>> = if spec.kind == LossKind::Ssim {
            let mut b = batches.clone();
            b.shuffle(&mut rng);
            b
        } else {
            let perm = index::sample(&mut rng, data.len(), data.len()).into_vec();
            perm.chunks(cfg.batch_size).map(|c| c.to_vec()).collect()
        };
        for rows in order {
            let mut batch = data.subset(&rows);
            if spec.kind == LossKind::Ssim {
                batch.image_shape = data.image_shape;
            }
            let eval = evaluate_batch(&net, &batch, spec, reference, true)?;
            check_finite(eval.loss, epoch)?;
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for (k, theta) in net.params_mut().iter_mut().enumerate() {
                let g = eval.grad[k];
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                *theta -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        let loss = evaluate_batch(&net, data, spec, reference, false)?.loss;
        check_finite(loss, epoch)?;
        history.push(loss);
    }
    Ok(TrainingRun {
        net,
        initial_loss,
        loss_history: history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// Largest relative error over the compared parameters.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because the one-sided differences disagree, i.e.
    /// the loss is not differentiable in that neighborhood.
    pub non_differentiable: Vec<usize>,
}

/// Compares analytic gradients with central differences on `count`
/// randomly chosen parameters.
pub fn gradient_check(net: &WeightNetwork, data: &Dataset, spec: &LossSpec, h: f64, count: usize, seed: u64) -> Result<GradientCheck> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let reference = max_abs(ndarray::ArrayView1::from(&data.targets[..]).into_dyn());
    let analytic = evaluate_batch(net, data, spec, reference, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, net.num_params(), count.min(net.num_params())).into_vec();
    let mut probe = net.clone();
    let f0 = analytic.loss;
    let mut out = GradientCheck {
        max_rel_error: 0.0,
        checked: 0,
        non_differentiable: Vec::new(),
    };
    let at = |probe: &mut WeightNetwork, k: usize, offset: f64| -> Result<f64> {
        let base = probe.params()[k];
        probe.params_mut()[k] = base + offset;
        let f = evaluate_batch(probe, data, spec, reference, false).map(|b| b.loss);
        probe.params_mut()[k] = base;
        f
    };
    for k in picks {
        let (fp, fm) = (at(&mut probe, k, h)?, at(&mut probe, k, -h)?);
        let forward = (fp - f0) / h;
        let backward = (f0 - fm) / h;
        let central = (fp - fm) / (2.0 * h);
        let a = analytic.grad[k];
        if (forward - backward).abs() > 1e-2 * (forward.abs() + backward.abs()) + 1e-6 {
            out.non_differentiable.push(k);
            continue;
        }
        let rel = (a - central).abs() / (a.abs().max(central.abs()).max(REL_FLOOR));
        out.max_rel_error = out.max_rel_error.max(rel);
        out.checked += 1;
    }
    Ok(out)
}

/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;
