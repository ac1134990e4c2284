use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::{estimate_covariance, pixel_snapshots};
use super::das::weighted_sum;
use super::mvdr::{eigenspace_mv, mvdr_output, mvdr_weights};
use super::postfilter::{coherence_factor, imap, wiener_postfilter};
use super::{compound, ApodizationTensor, BeamformedImage, CompoundMode, PixelDiagnostics};
use crate::error::Result;
use crate::migration::DelayedDataTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerKind {
    Das,
    Mvdr,
    EigenspaceMv,
    CoherenceFactor,
    Wiener,
    Imap,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 6] = [
        BeamformerKind::Das,
        BeamformerKind::Mvdr,
        BeamformerKind::EigenspaceMv,
        BeamformerKind::CoherenceFactor,
        BeamformerKind::Wiener,
        BeamformerKind::Imap,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BeamformerKind::Das => "das",
            BeamformerKind::Mvdr => "mvdr",
            BeamformerKind::EigenspaceMv => "eigenspace_mv",
            BeamformerKind::CoherenceFactor => "coherence_factor",
            BeamformerKind::Wiener => "wiener",
            BeamformerKind::Imap => "imap",
        }
    }

    fn uses_covariance(self) -> bool {
        matches!(self, BeamformerKind::Mvdr | BeamformerKind::EigenspaceMv | BeamformerKind::Wiener)
    }
}

/// Parameters of the adaptive combiners. `None` picks the per-pixel default
/// from the number `M` of valid channels: `L = M / 2`, `delta = 1 / (10 L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveParams {
    pub subarray_len: Option<usize>,
    pub temporal_halfwidth: usize,
    pub loading: Option<f64>,
    pub subspace_fraction: f64,
    pub imap_iterations: usize,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            subarray_len: None,
            temporal_halfwidth: 2,
            loading: None,
            subspace_fraction: 0.5,
            imap_iterations: 10,
        }
    }
}

impl AdaptiveParams {
    /// Subarray length and loading used for a pixel with `m` valid channels.
    pub fn resolve(&self, m: usize) -> (usize, f64) {
        let l = self.subarray_len.unwrap_or(m / 2).clamp(1, m.max(1));
        let loading = self.loading.unwrap_or(1.0 / (10.0 * l as f64));
        (l, loading)
    }

    fn describe(&self, kind: BeamformerKind) -> String {
        let l = self.subarray_len.map_or("M/2".to_string(), |v| v.to_string());
        let d = self.loading.map_or("1/(10L)".to_string(), |v| format!("{v}"));
        match kind {
            BeamformerKind::Das | BeamformerKind::CoherenceFactor => kind.id().to_string(),
            BeamformerKind::Mvdr | BeamformerKind::Wiener => {
                format!("{}(L={l},K={},delta={d})", kind.id(), self.temporal_halfwidth)
            }
            BeamformerKind::EigenspaceMv => format!(
                "{}(L={l},K={},delta={d},fraction={})",
                kind.id(),
                self.temporal_halfwidth,
                self.subspace_fraction
            ),
            BeamformerKind::Imap => format!("imap(iterations={})", self.imap_iterations),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct PixelOut {
    value: f64,
    distortionless_error: f64,
    degenerate: bool,
    empty: bool,
}

fn pixel(
    z: &DelayedDataTensor,
    w: &ApodizationTensor,
    kind: BeamformerKind,
    params: &AdaptiveParams,
    e: usize,
    ix: usize,
    iy: usize,
) -> Result<PixelOut> {
    let values = z.channels(e, ix, iy);
    let valid = z.validity(e, ix, iy);
    let active: Vec<usize> = (0..values.len()).filter(|&c| valid[c]).collect();
    if active.is_empty() {
        return Ok(PixelOut {
            empty: true,
            ..Default::default()
        });
    }
    let zv: Vec<f64> = active.iter().map(|&c| values[c]).collect();
    let mut out = PixelOut::default();
    out.value = match kind {
        BeamformerKind::Das => weighted_sum(values, valid, w.weights_at(e, ix, iy)).unwrap_or(0.0),
        BeamformerKind::CoherenceFactor => {
            weighted_sum(values, valid, w.weights_at(e, ix, iy)).unwrap_or(0.0) * coherence_factor(&zv)
        }
        BeamformerKind::Imap => {
            let floor = 1e-12 * zv.iter().fold(0.0_f64, |m, v| m.max(v * v));
            imap(&zv, params.imap_iterations, floor)
        }
        BeamformerKind::Mvdr | BeamformerKind::EigenspaceMv | BeamformerKind::Wiener => {
            let (l, loading) = params.resolve(zv.len());
            let snaps = pixel_snapshots(z, e, ix, iy, params.temporal_halfwidth, &active);
            let refs: Vec<&[f64]> = snaps.iter().map(|s| s.as_slice()).collect();
            let cov = estimate_covariance(&refs, l, loading)?;
            out.degenerate = cov.degenerate;
            let w_mv = mvdr_weights(&cov)?;
            match kind {
                BeamformerKind::EigenspaceMv => {
                    let w_es = eigenspace_mv(&cov, &w_mv, params.subspace_fraction)?;
                    mvdr_output(&zv, w_es.as_slice())
                }
                BeamformerKind::Wiener => {
                    out.distortionless_error = (w_mv.sum() - 1.0).abs();
                    wiener_postfilter(&zv, w_mv.as_slice()).value
                }
                _ => {
                    out.distortionless_error = (w_mv.sum() - 1.0).abs();
                    mvdr_output(&zv, w_mv.as_slice())
                }
            }
        }
    };
    Ok(out)
}

/// Image of transmit event `e`. The apodization is used by DAS and CF;
/// the other combiners weight the valid channels adaptively.
pub fn beamform_event(
    z: &DelayedDataTensor,
    w: &ApodizationTensor,
    kind: BeamformerKind,
    params: &AdaptiveParams,
    e: usize,
) -> Result<BeamformedImage> {
    let (nx, ny) = z.grid_dim();
    w.check_shape(z.num_events(), nx, ny, z.num_channels())?;
    let cells: Vec<PixelOut> = (0..nx * ny)
        .into_par_iter()
        .map(|p| pixel(z, w, kind, params, e, p / ny, p % ny))
        .collect::<Result<_>>()?;
    let mut diagnostics = PixelDiagnostics::default();
    for c in &cells {
        diagnostics.max_distortionless_error = diagnostics.max_distortionless_error.max(c.distortionless_error);
        diagnostics.degenerate_pixels += c.degenerate as usize;
        diagnostics.empty_pixels += c.empty as usize;
    }
    let y = Array2::from_shape_vec((nx, ny), cells.iter().map(|c| c.value).collect()).expect("sized from grid");
    let mut img = BeamformedImage::new(y, params.describe(kind));
    img.diagnostics = diagnostics;
    if kind.uses_covariance() && diagnostics.degenerate_pixels > 0 {
        img.provenance.push_str(&format!("[degenerate={}]", diagnostics.degenerate_pixels));
    }
    Ok(img)
}

/// Per-event images compounded by coherent summation, matching `das`.
pub fn beamform(
    z: &DelayedDataTensor,
    w: &ApodizationTensor,
    kind: BeamformerKind,
    params: &AdaptiveParams,
) -> Result<BeamformedImage> {
    let images = (0..z.num_events())
        .map(|e| beamform_event(z, w, kind, params, e))
        .collect::<Result<Vec<_>>>()?;
    let mut img = compound(&images, CompoundMode::CoherentSum)?;
    img.provenance = params.describe(kind);
    Ok(img)
}
