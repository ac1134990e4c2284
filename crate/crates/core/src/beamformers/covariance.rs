use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::migration::DelayedDataTensor;

/// Identity scale used when the data carries no energy at all.
const DEGENERATE_LOADING: f64 = 1e-30;

/// Spatially smoothed, diagonally loaded channel covariance of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub r: DMatrix<f64>,
    pub subarray_len: usize,
    pub loading: f64,
    /// The snapshots were all zero and `r` is a tiny multiple of identity.
    pub degenerate: bool,
}

/// Sub-array averaged covariance over a set of snapshots (the pixel's
/// channel vector and its depth neighbors), followed by
/// `R <- R + loading * trace(R) / L * I`.
pub fn estimate_covariance(snapshots: &[&[f64]], subarray_len: usize, loading: f64) -> Result<CovarianceEstimate> {
    let m = snapshots.first().map(|s| s.len()).unwrap_or(0);
    if snapshots.is_empty() || m == 0 {
        return Err(Error::invalid("covariance estimation needs at least one non-empty snapshot"));
    }
    if snapshots.iter().any(|s| s.len() != m) {
        return Err(Error::shape("snapshots must share one length"));
    }
    let l = subarray_len;
    if l == 0 || l > m {
        return Err(Error::invalid(format!("subarray length {l} outside [1, {m}]")));
    }
    if !(loading >= 0.0) {
        return Err(Error::invalid("diagonal loading must be non-negative"));
    }
    let subarrays = m - l + 1;
    let mut r = DMatrix::<f64>::zeros(l, l);
    // R[i][i+d] = sum_snap sum_{t=i}^{i+subarrays-1} z[t] z[t+d], via prefix sums per lag
    let mut prefix = vec![0.0_f64; m + 1];
    for d in 0..l {
        prefix[0] = 0.0;
        let mut acc = vec![0.0_f64; l - d];
        for z in snapshots {
            for t in 0..m - d {
                prefix[t + 1] = prefix[t] + z[t] * z[t + d];
            }
            for (i, a) in acc.iter_mut().enumerate() {
                *a += prefix[i + subarrays] - prefix[i];
            }
        }
        for (i, a) in acc.into_iter().enumerate() {
            r[(i, i + d)] = a;
            r[(i + d, i)] = a;
        }
    }
    r /= (subarrays * snapshots.len()) as f64;

    let trace = r.trace();
    if trace == 0.0 {
        return Ok(CovarianceEstimate {
            r: DMatrix::identity(l, l) * DEGENERATE_LOADING,
            subarray_len: l,
            loading,
            degenerate: true,
        });
    }
    let diag = loading * trace / l as f64;
    for i in 0..l {
        r[(i, i)] += diag;
    }
    Ok(CovarianceEstimate {
        r,
        subarray_len: l,
        loading,
        degenerate: false,
    })
}

/// Channel vectors of the pixel `(ix, iy)` and its depth neighbors within
/// `halfwidth` rows, restricted to `channels`. The first returned vector is
/// the pixel itself.
pub fn pixel_snapshots(z: &DelayedDataTensor, e: usize, ix: usize, iy: usize, halfwidth: usize, channels: &[usize]) -> Vec<Vec<f64>> {
    let (nx, _) = z.grid_dim();
    let gather = |row: usize| -> Vec<f64> {
        let v = z.channels(e, row, iy);
        channels.iter().map(|&c| v[c]).collect()
    };
    let mut out = vec![gather(ix)];
    for k in 1..=halfwidth {
        if ix >= k {
            out.push(gather(ix - k));
        }
        if ix + k < nx {
            out.push(gather(ix + k));
        }
    }
    out
}
