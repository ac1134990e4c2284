//! Per-pixel neural adaptive processor: a small dense network that predicts
//! apodization weights from the delayed channel vector, its losses, an Adam
//! trainer with hand-derived gradients, and the AdaIN transform.

mod loss;
mod network;
mod train;

pub use loss::{distortionless_penalty, loss_l1, loss_mse, loss_smsle, loss_ssim, ssim, LossKind, LossSpec};
pub use network::{antirectifier, antirectifier_backward, ForwardTrace, WeightNetwork, NORM_EPS};
pub use train::{evaluate_batch, gradient_check, train, AdamParams, BatchEval, Dataset, GradientCheck, LrSchedule, TrainConfig, TrainingRun, REL_FLOOR};

use ndarray::Array2;
use rayon::prelude::*;

use crate::beamformers::BeamformedImage;
use crate::error::{Error, Result};
use crate::migration::DelayedDataTensor;

/// Image from network-predicted apodization, summed over events.
pub fn beamform_neural(z: &DelayedDataTensor, net: &WeightNetwork) -> Result<BeamformedImage> {
    if z.num_channels() != net.num_channels() {
        return Err(Error::invalid(format!(
            "network expects {} channels, data has {}",
            net.num_channels(),
            z.num_channels()
        )));
    }
    let (nx, ny) = z.grid_dim();
    let cells: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|p| {
            let (ix, iy) = (p / ny, p % ny);
            (0..z.num_events())
                .map(|e| net.forward(z.channels(e, ix, iy)).map(|(_, y)| y))
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    let y = Array2::from_shape_vec((nx, ny), cells).expect("sized from grid");
    let dims: Vec<String> = net.layer_dims().iter().map(|d| d.to_string()).collect();
    Ok(BeamformedImage::new(y, format!("neural({})", dims.join("-"))))
}

/// Mean and population standard deviation.
pub fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Adaptive instance normalization: `(s_y / s_x) (x - m_x) + m_y`.
pub fn adain(x: &[f64], style_mean: f64, style_std: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("adain of an empty feature"));
    }
    let (m, s) = moments(x);
    if !(s > 0.0) {
        return Err(Error::invalid("adain is undefined on a constant feature"));
    }
    Ok(x.iter().map(|v| style_std / s * (v - m) + style_mean).collect())
}
