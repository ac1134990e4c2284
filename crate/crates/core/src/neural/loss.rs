use std::f64::consts::LN_10;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    L1,
    Smsle,
    Ssim,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Mse, LossKind::L1, LossKind::Smsle, LossKind::Ssim];
}

/// Main loss plus a weighted distortionless penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Weight of the distortionless penalty.
    pub lambda: f64,
    /// Log-domain clamp, relative to the largest target magnitude.
    pub eps_log: f64,
    /// Dynamic range in dB of the log images compared by SSIM.
    pub dynamic_range: f64,
    pub ssim_window: usize,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            kind: LossKind::Smsle,
            lambda: 0.1,
            eps_log: 1e-8,
            dynamic_range: 60.0,
            ssim_window: 7,
        }
    }
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("distortionless weight must be non-negative"));
        }
        if !(self.eps_log > 0.0) {
            return Err(Error::invalid("log clamp must be positive"));
        }
        if !(self.dynamic_range > 0.0) || self.ssim_window == 0 {
            return Err(Error::invalid("SSIM needs a positive dynamic range and window"));
        }
        Ok(())
    }

    /// Stabilizing constants `((0.01 DR)^2, (0.03 DR)^2)`.
    pub fn ssim_constants(&self) -> (f64, f64) {
        ((0.01 * self.dynamic_range).powi(2), (0.03 * self.dynamic_range).powi(2))
    }
}

/// `(sum_c w_c - 1)^2`.
pub fn distortionless_penalty(w: &[f64]) -> f64 {
    (w.iter().sum::<f64>() - 1.0).powi(2)
}

fn check2(y: &ArrayView2<f64>, yt: &ArrayView2<f64>) -> Result<()> {
    if y.shape() != yt.shape() {
        return Err(Error::invalid(format!("loss operands differ in shape: {:?} vs {:?}", y.shape(), yt.shape())));
    }
    if y.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// `(1/I) sum_i ||Y_i - Y_t,i||_2^2` over the rows of `I x P` arrays.
pub fn loss_mse(y: &Array2<f64>, yt: &Array2<f64>) -> Result<f64> {
    check2(&y.view(), &yt.view())?;
    Ok(mse_grad(y.view(), yt.view()).0)
}

/// `(1/I) sum_i ||Y_i - Y_t,i||_1`.
pub fn loss_l1(y: &Array2<f64>, yt: &Array2<f64>) -> Result<f64> {
    check2(&y.view(), &yt.view())?;
    Ok(l1_grad(y.view(), yt.view()).0)
}

/// Signed mean-squared log error with the clamp `eps_log * max|Y_t|`.
pub fn loss_smsle(y: &Array2<f64>, yt: &Array2<f64>, eps_log: f64) -> Result<f64> {
    check2(&y.view(), &yt.view())?;
    if !(eps_log > 0.0) {
        return Err(Error::invalid("log clamp must be positive"));
    }
    let floor = eps_log * max_abs(yt.view().into_dyn());
    Ok(smsle_grad(y.view(), yt.view(), floor).0)
}

/// SSIM loss over a batch of `I x H x W` images.
pub fn loss_ssim(y: &Array3<f64>, yt: &Array3<f64>, spec: &LossSpec) -> Result<f64> {
    let reference = max_abs(yt.view().into_dyn());
    Ok(ssim_loss_grad(y.view(), yt.view(), reference, spec)?.0)
}

pub(crate) fn max_abs(a: ndarray::ArrayViewD<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub(crate) fn mse_grad(y: ArrayView2<f64>, yt: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = y.nrows() as f64;
    let d = &y - &yt;
    let value = d.iter().map(|v| v * v).sum::<f64>() / n;
    (value, d * (2.0 / n))
}

pub(crate) fn l1_grad(y: ArrayView2<f64>, yt: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = y.nrows() as f64;
    let d = &y - &yt;
    let value = d.iter().map(|v| v.abs()).sum::<f64>() / n;
    (value, d.mapv(|v| if v > 0.0 { 1.0 / n } else if v < 0.0 { -1.0 / n } else { 0.0 }))
}

fn pos_part(v: f64) -> f64 {
    v.max(0.0)
}

fn neg_part(v: f64) -> f64 {
    (-v).max(0.0)
}

pub(crate) fn smsle_grad(y: ArrayView2<f64>, yt: ArrayView2<f64>, floor: f64) -> (f64, Array2<f64>) {
    let n = y.nrows() as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros(y.raw_dim());
    for ((g, &a), &b) in grad.iter_mut().zip(y.iter()).zip(yt.iter()) {
        let dp = pos_part(a).max(floor).log10() - pos_part(b).max(floor).log10();
        let dn = neg_part(a).max(floor).log10() - neg_part(b).max(floor).log10();
        value += dp * dp + dn * dn;
        // only the part that is above the clamp depends on `a`
        if a > floor {
            *g = dp / (n * LN_10 * a);
        } else if -a > floor {
            *g = dn / (n * LN_10 * a);
        }
    }
    (value / (2.0 * n), grad)
}

/// Mean SSIM of two equally sized images over all `window x window`
/// positions, with per-window population statistics.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>, window: usize, eps1: f64, eps2: f64) -> Result<f64> {
    check_ssim(a.view(), b.view(), window)?;
    Ok(ssim_grad(a.view(), b.view(), window, eps1, eps2).0)
}

fn check_ssim(a: ArrayView2<f64>, b: ArrayView2<f64>, window: usize) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid("SSIM operands differ in shape"));
    }
    let (h, w) = a.dim();
    if window == 0 || h < window || w < window {
        return Err(Error::invalid(format!("image {h}x{w} is smaller than the {window}x{window} SSIM window")));
    }
    Ok(())
}

/// Mean SSIM and its gradient with respect to `a`.
pub(crate) fn ssim_grad(a: ArrayView2<f64>, b: ArrayView2<f64>, window: usize, eps1: f64, eps2: f64) -> (f64, Array2<f64>) {
    let (h, w) = a.dim();
    let (ph, pw) = (h - window + 1, w - window + 1);
    let n = (window * window) as f64;
    let mut total = 0.0;
    // per-window coefficients of grad_j = alpha + beta b_j - gamma a_j
    let mut alpha = Array2::<f64>::zeros((ph, pw));
    let mut beta = Array2::<f64>::zeros((ph, pw));
    let mut gamma = Array2::<f64>::zeros((ph, pw));
    for i in 0..ph {
        for j in 0..pw {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for u in i..i + window {
                for v in j..j + window {
                    let (x, y) = (a[(u, v)], b[(u, v)]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = (saa / n - ma * ma).max(0.0);
            let vb = (sbb / n - mb * mb).max(0.0);
            let cab = sab / n - ma * mb;
            let a1 = 2.0 * ma * mb + eps1;
            let a2 = 2.0 * cab + eps2;
            let b1 = ma * ma + mb * mb + eps1;
            let b2 = va + vb + eps2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            alpha[(i, j)] = s / n * (2.0 * mb / a1 - 2.0 * ma / b1 - 2.0 * mb / a2 + 2.0 * ma / b2);
            beta[(i, j)] = 2.0 * s / (n * a2);
            gamma[(i, j)] = 2.0 * s / (n * b2);
        }
    }
    let k = (ph * pw) as f64;
    let mut grad = Array2::zeros((h, w));
    for i in 0..ph {
        for j in 0..pw {
            let (al, be, ga) = (alpha[(i, j)], beta[(i, j)], gamma[(i, j)]);
            for u in i..i + window {
                for v in j..j + window {
                    grad[(u, v)] += (al + be * b[(u, v)] - ga * a[(u, v)]) / k;
                }
            }
        }
    }
    (total / k, grad)
}

/// `20 log10(max(part, floor) / reference)` for one signed part, with the
/// derivative with respect to the signed input.
fn log_part(v: f64, positive: bool, floor: f64, reference: f64) -> (f64, f64) {
    let part = if positive { pos_part(v) } else { neg_part(v) };
    if part > floor {
        let d = 20.0 / (LN_10 * v);
        (20.0 * (part / reference).log10(), d)
    } else {
        (20.0 * (floor / reference).log10(), 0.0)
    }
}

/// SSIM loss over images and its gradient with respect to `y`.
pub(crate) fn ssim_loss_grad(y: ArrayView3<f64>, yt: ArrayView3<f64>, reference: f64, spec: &LossSpec) -> Result<(f64, Array3<f64>)> {
    if y.shape() != yt.shape() {
        return Err(Error::invalid("loss operands differ in shape"));
    }
    if y.len_of(Axis(0)) == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if !(reference > 0.0) {
        return Err(Error::invalid("SSIM loss needs a nonzero target"));
    }
    let (eps1, eps2) = spec.ssim_constants();
    let floor = reference * 10f64.powf(-spec.dynamic_range / 20.0);
    let n = y.len_of(Axis(0)) as f64;
    let mut value = 0.0;
    let mut grad = Array3::zeros(y.raw_dim());
    for (i, (yi, ti)) in y.outer_iter().zip(yt.outer_iter()).enumerate() {
        check_ssim(yi, ti, spec.ssim_window)?;
        for positive in [true, false] {
            let la = yi.mapv(|v| log_part(v, positive, floor, reference).0);
            let lb = ti.mapv(|v| log_part(v, positive, floor, reference).0);
            let (s, g) = ssim_grad(la.view(), lb.view(), spec.ssim_window, eps1, eps2);
            value += 1.0 - s;
            let mut gi = grad.index_axis_mut(Axis(0), i);
            for ((out, &gl), &v) in gi.iter_mut().zip(g.iter()).zip(yi.iter()) {
                *out -= gl * log_part(v, positive, floor, reference).1 / (2.0 * n);
            }
        }
    }
    Ok((value / (2.0 * n), grad))
}
