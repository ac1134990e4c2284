use nalgebra::{DMatrix, DVector};

use super::mvdr::mvdr_output;

/// Relative change of the iMAP estimate below which iteration stops.
pub const IMAP_TOLERANCE: f64 = 1e-6;

/// Ratio of coherent to incoherent channel energy, `|sum z|^2 / (C sum z^2)`.
/// Defined as 0 for an all-zero vector.
pub fn coherence_factor(z: &[f64]) -> f64 {
    let energy: f64 = z.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return 0.0;
    }
    let coherent: f64 = z.iter().sum();
    (coherent * coherent / (z.len() as f64 * energy)).clamp(0.0, 1.0)
}

/// Noise model entering the Wiener gain.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseCovariance {
    /// `sigma^2 I`
    White(f64),
    Full(DMatrix<f64>),
}

/// `|A|^2 / (|A|^2 + w^T R_n w)`; 0 when the denominator vanishes.
pub fn wiener_gain(signal_power: f64, w_mv: &[f64], noise: &NoiseCovariance) -> f64 {
    let noise_power = match noise {
        NoiseCovariance::White(s2) => s2 * w_mv.iter().map(|v| v * v).sum::<f64>(),
        NoiseCovariance::Full(r) => {
            let w = DVector::from_column_slice(w_mv);
            (w.transpose() * r * &w)[(0, 0)]
        }
    };
    let denom = signal_power + noise_power;
    if denom == 0.0 {
        0.0
    } else {
        signal_power / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerOutput {
    pub value: f64,
    pub gain: f64,
    pub mvdr: f64,
    pub noise_variance: f64,
}

/// MVDR output scaled by the Wiener gain. The signal power is the squared
/// MVDR output and the noise is white with variance equal to the mean
/// squared difference between the channels and the MVDR output.
pub fn wiener_postfilter(z: &[f64], w_mv: &[f64]) -> WienerOutput {
    let mvdr = mvdr_output(z, w_mv);
    let noise_variance = z.iter().map(|c| (c - mvdr).powi(2)).sum::<f64>() / z.len() as f64;
    let gain = wiener_gain(mvdr * mvdr, w_mv, &NoiseCovariance::White(noise_variance));
    WienerOutput {
        value: gain * mvdr,
        gain,
        mvdr,
        noise_variance,
    }
}

/// Iterative MAP estimate with uniform weights `sigma_a^2 / (M sigma_a^2 + M sigma_n^2)`.
///
/// `floor` is added to the signal variance so a zero initialization does not
/// lock the estimate at zero.
pub fn imap(z: &[f64], iterations: usize, floor: f64) -> f64 {
    let m = z.len();
    if m == 0 {
        return 0.0;
    }
    let mean = z.iter().sum::<f64>() / m as f64;
    let mut y = mean;
    for _ in 0..iterations.max(1) {
        let signal = y * y + floor;
        let noise = z.iter().map(|c| (c - y).powi(2)).sum::<f64>() / m as f64;
        let denom = signal + noise;
        let next = if denom == 0.0 { 0.0 } else { signal / denom * mean };
        let change = (next - y).abs() / (next.abs() + floor);
        y = next;
        if !(change >= IMAP_TOLERANCE) {
            break;
        }
    }
    y
}
