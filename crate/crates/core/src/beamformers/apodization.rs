use std::f64::consts::PI;

use ndarray::{Array3, Array4};

use crate::acoustics::{ArrayGeometry, ImagingGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Boxcar,
    Hann,
    Hamming,
}

impl WindowKind {
    /// Window value at normalized aperture position `u` in `[-1, 1]`.
    pub fn at(self, u: f64) -> f64 {
        match self {
            WindowKind::Boxcar => 1.0,
            WindowKind::Hann => 0.5 + 0.5 * (PI * u).cos(),
            WindowKind::Hamming => 0.54 + 0.46 * (PI * u).cos(),
        }
    }
}

/// Apodization weights `W`, stored with broadcasting over the axes it does
/// not depend on.
#[derive(Debug, Clone, PartialEq)]
pub enum ApodizationWeights {
    /// One weight per channel, shared by every event and pixel.
    PerChannel(Vec<f64>),
    /// `Nx x Ny x C`, shared by every event.
    PerPixel(Array3<f64>),
    /// `E x Nx x Ny x C`.
    Full(Array4<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApodizationTensor {
    pub weights: ApodizationWeights,
    /// Pixels where no channel fell inside the aperture and the nearest
    /// channel was used alone.
    pub fallback_pixels: usize,
}

impl ApodizationTensor {
    pub fn uniform(num_channels: usize) -> Self {
        Self {
            weights: ApodizationWeights::PerChannel(vec![1.0 / num_channels as f64; num_channels]),
            fallback_pixels: 0,
        }
    }

    pub fn num_channels(&self) -> usize {
        match &self.weights {
            ApodizationWeights::PerChannel(w) => w.len(),
            ApodizationWeights::PerPixel(w) => w.shape()[2],
            ApodizationWeights::Full(w) => w.shape()[3],
        }
    }

    /// Channel weights for event `e` at pixel `(ix, iy)`.
    pub fn weights_at(&self, e: usize, ix: usize, iy: usize) -> &[f64] {
        match &self.weights {
            ApodizationWeights::PerChannel(w) => w,
            ApodizationWeights::PerPixel(w) => {
                let (_, ny, c) = w.dim();
                let start = (ix * ny + iy) * c;
                &w.as_slice().expect("standard layout")[start..start + c]
            }
            ApodizationWeights::Full(w) => {
                let (_, nx, ny, c) = w.dim();
                let start = ((e * nx + ix) * ny + iy) * c;
                &w.as_slice().expect("standard layout")[start..start + c]
            }
        }
    }

    pub(crate) fn check_shape(&self, events: usize, nx: usize, ny: usize, channels: usize) -> Result<()> {
        let ok = match &self.weights {
            ApodizationWeights::PerChannel(w) => w.len() == channels,
            ApodizationWeights::PerPixel(w) => w.dim() == (nx, ny, channels),
            ApodizationWeights::Full(w) => w.dim() == (events, nx, ny, channels),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::shape("apodization tensor does not match the delayed data"))
        }
    }
}

/// Half-width of the receive aperture for a pixel at `depth` and f-number `f`.
pub fn active_half_aperture(depth: f64, f_number: f64) -> f64 {
    if f_number <= 0.0 {
        f64::INFINITY
    } else {
        depth / (2.0 * f_number)
    }
}

/// Receive apodization. With `f_number == 0` the window spans the whole
/// array; otherwise it spans the channels with `|y_c - y| <= x / (2 F)`
/// around each pixel. Weights are normalized to sum 1.
pub fn window_weights(kind: WindowKind, f_number: f64, grid: &ImagingGrid, array: &ArrayGeometry) -> Result<ApodizationTensor> {
    if !(f_number >= 0.0) {
        return Err(Error::invalid("f-number must be non-negative"));
    }
    let c_n = array.num_elements();
    if f_number == 0.0 {
        let w: Vec<f64> = (0..c_n)
            .map(|c| kind.at(2.0 * c as f64 / (c_n - 1) as f64 - 1.0))
            .collect();
        let sum: f64 = w.iter().sum();
        return Ok(ApodizationTensor {
            weights: ApodizationWeights::PerChannel(w.into_iter().map(|v| v / sum).collect()),
            fallback_pixels: 0,
        });
    }
    let mut fallback = 0;
    let mut w = Array3::zeros((grid.nx(), grid.ny(), c_n));
    for ix in 0..grid.nx() {
        for iy in 0..grid.ny() {
            let p = grid.position(ix, iy);
            let half = active_half_aperture(p.x, f_number);
            let mut sum = 0.0;
            for (c, e) in array.positions().iter().enumerate() {
                let off = e.y - p.y;
                if off.abs() <= half {
                    let v = kind.at(off / half);
                    w[(ix, iy, c)] = v;
                    sum += v;
                }
            }
            if sum > 0.0 {
                for c in 0..c_n {
                    w[(ix, iy, c)] /= sum;
                }
            } else {
                fallback += 1;
                let nearest = array
                    .positions()
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1.y - p.y).abs().total_cmp(&(b.1.y - p.y).abs()))
                    .map(|(c, _)| c)
                    .unwrap_or(0);
                for c in 0..c_n {
                    w[(ix, iy, c)] = 0.0;
                }
                w[(ix, iy, nearest)] = 1.0;
            }
        }
    }
    Ok(ApodizationTensor {
        weights: ApodizationWeights::PerPixel(w),
        fallback_pixels: fallback,
    })
}
