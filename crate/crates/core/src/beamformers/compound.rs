use super::BeamformedImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompoundMode {
    #[default]
    CoherentSum,
    Mean,
}

/// Pixelwise sum or mean of per-event images.
pub fn compound(images: &[BeamformedImage], mode: CompoundMode) -> Result<BeamformedImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("nothing to compound"))?;
    let mut y = first.y.clone();
    let mut diagnostics = first.diagnostics;
    for img in &images[1..] {
        if img.dim() != first.dim() {
            return Err(Error::invalid(format!(
                "cannot compound images on different grids: {:?} vs {:?}",
                first.dim(),
                img.dim()
            )));
        }
        y += &img.y;
        diagnostics = diagnostics.merge(img.diagnostics);
    }
    if mode == CompoundMode::Mean {
        y /= images.len() as f64;
    }
    let tag = match mode {
        CompoundMode::CoherentSum => "sum",
        CompoundMode::Mean => "mean",
    };
    let mut out = BeamformedImage::new(y, format!("compound[{tag}x{}]({})", images.len(), first.provenance));
    out.diagnostics = diagnostics;
    Ok(out)
}
