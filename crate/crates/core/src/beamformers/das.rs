use ndarray::Array2;
use rayon::prelude::*;

use super::{ApodizationTensor, BeamformedImage, PixelDiagnostics};
use crate::error::Result;
use crate::migration::DelayedDataTensor;

/// Weighted sum of the valid channels of one pixel, renormalized by the
/// weight mass that survived the validity mask. `None` if nothing survived.
pub(crate) fn weighted_sum(z: &[f64], valid: &[bool], w: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    let mut kept = 0.0;
    let mut acc = 0.0;
    for ((&zc, &vc), &wc) in z.iter().zip(valid).zip(w) {
        total += wc;
        if vc {
            kept += wc;
            acc += wc * zc;
        }
    }
    if kept == 0.0 {
        None
    } else {
        Some(acc * total / kept)
    }
}

/// Delay-and-sum image of a single transmit event.
pub fn das_event(z: &DelayedDataTensor, w: &ApodizationTensor, e: usize) -> Result<BeamformedImage> {
    let (nx, ny) = z.grid_dim();
    w.check_shape(z.num_events(), nx, ny, z.num_channels())?;
    let cells: Vec<Option<f64>> = (0..nx * ny)
        .into_par_iter()
        .map(|p| {
            let (ix, iy) = (p / ny, p % ny);
            weighted_sum(z.channels(e, ix, iy), z.validity(e, ix, iy), w.weights_at(e, ix, iy))
        })
        .collect();
    let empty = cells.iter().filter(|c| c.is_none()).count();
    let y = Array2::from_shape_vec((nx, ny), cells.into_iter().map(|c| c.unwrap_or(0.0)).collect())
        .expect("sized from grid");
    let mut img = BeamformedImage::new(y, format!("das(event={e})"));
    img.diagnostics = PixelDiagnostics {
        empty_pixels: empty,
        ..Default::default()
    };
    Ok(img)
}

/// `Y = sum_e sum_c W * Z`, summed coherently over every event.
pub fn das(z: &DelayedDataTensor, w: &ApodizationTensor) -> Result<BeamformedImage> {
    let (nx, ny) = z.grid_dim();
    let mut y = Array2::zeros((nx, ny));
    let mut diagnostics = PixelDiagnostics::default();
    for e in 0..z.num_events() {
        let img = das_event(z, w, e)?;
        y += &img.y;
        diagnostics = diagnostics.merge(img.diagnostics);
    }
    let mut img = BeamformedImage::new(y, "das");
    img.diagnostics = diagnostics;
    Ok(img)
}
