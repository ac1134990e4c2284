//! Channel combiners operating on migrated data: DAS with engineered
//! apodization, minimum-variance weights, postfilters and compounding.
//!
//! Every adaptive combiner is a per-pixel map over one transmit event;
//! per-event images are compounded afterwards.

use ndarray::Array2;

mod apodization;
mod compound;
mod covariance;
mod das;
mod image;
mod mvdr;
mod postfilter;

pub use apodization::{active_half_aperture, window_weights, ApodizationTensor, ApodizationWeights, WindowKind};
pub use compound::{compound, CompoundMode};
pub use covariance::{estimate_covariance, pixel_snapshots, CovarianceEstimate};
pub use das::{das, das_event};
pub use image::{beamform, beamform_event, AdaptiveParams, BeamformerKind};
pub use mvdr::{eigenspace_mv, mvdr_output, mvdr_weights, MAX_CONDITION_NUMBER};
pub use postfilter::{coherence_factor, imap, wiener_gain, wiener_postfilter, NoiseCovariance, WienerOutput, IMAP_TOLERANCE};

/// Beamformed RF image `Y` (pre-envelope), `Nx x Ny`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pub y: Array2<f64>,
    /// Beamformer id and parameters, e.g. `mvdr(L=32,K=2,delta=0.003125)`.
    pub provenance: String,
    pub diagnostics: PixelDiagnostics,
}

impl BeamformedImage {
    pub fn new(y: Array2<f64>, provenance: impl Into<String>) -> Self {
        Self {
            y,
            provenance: provenance.into(),
            diagnostics: PixelDiagnostics::default(),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.y.dim()
    }
}

/// Per-image bookkeeping collected while beamforming.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelDiagnostics {
    /// Largest `|w^T 1 - 1|` over all MVDR-family pixels.
    pub max_distortionless_error: f64,
    /// Pixels whose covariance was all zero and replaced by a tiny identity.
    pub degenerate_pixels: usize,
    /// Pixels with no valid channel (output 0).
    pub empty_pixels: usize,
}

impl PixelDiagnostics {
    pub(crate) fn merge(self, other: PixelDiagnostics) -> PixelDiagnostics {
        PixelDiagnostics {
            max_distortionless_error: self.max_distortionless_error.max(other.max_distortionless_error),
            degenerate_pixels: self.degenerate_pixels + other.degenerate_pixels,
            empty_pixels: self.empty_pixels + other.empty_pixels,
        }
    }
}
