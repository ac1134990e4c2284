//! Envelope detection, log compression and image-quality metrics.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::acoustics::{ImagingGrid, Point2, Region};
use crate::beamformers::BeamformedImage;
use crate::error::{Error, Result};

/// Magnitude of the analytic signal of a real trace.
pub fn analytic_envelope(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    // one-sided spectrum: keep DC (and Nyquist), double positive bins
    let half = n / 2;
    for (k, b) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            continue;
        }
        if k <= (n - 1) / 2 {
            *b *= 2.0;
        } else {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|b| b.norm() / n as f64).collect()
}

/// Envelope of a beamformed RF image, computed along depth on each lateral line.
pub fn envelope(y: &BeamformedImage) -> Result<Array2<f64>> {
    envelope_of(&y.y)
}

pub fn envelope_of(y: &Array2<f64>) -> Result<Array2<f64>> {
    if y.nrows() < 4 {
        return Err(Error::invalid(format!(
            "envelope detection needs at least 4 depth samples, got {}",
            y.nrows()
        )));
    }
    let mut out = Array2::zeros(y.raw_dim());
    for (col, mut dst) in y.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        let line: Vec<f64> = col.to_vec();
        for (d, e) in dst.iter_mut().zip(analytic_envelope(&line)) {
            *d = e;
        }
    }
    Ok(out)
}

/// Log-compressed image: 0 dB at the envelope maximum, clipped at `-dynamic_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmodeImage {
    pub db: Array2<f64>,
    pub dynamic_range: f64,
}

pub fn log_compress(env: &Array2<f64>, dynamic_range: f64) -> Result<BmodeImage> {
    if !(dynamic_range > 0.0) {
        return Err(Error::invalid("dynamic range must be positive"));
    }
    let max = env.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::invalid("cannot log-compress an envelope without a positive maximum"));
    }
    let db = env.mapv(|v| {
        let level = 20.0 * (v / max).log10();
        if level.is_nan() || level < -dynamic_range {
            -dynamic_range
        } else {
            level
        }
    });
    Ok(BmodeImage { db, dynamic_range })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileAxis {
    /// Along depth (rows).
    Axial,
    /// Along the lateral direction (columns).
    Lateral,
}

/// Moves from `start` to the highest pixel within `radius` pixels.
pub fn refine_peak(db: &Array2<f64>, start: (usize, usize), radius: usize) -> (usize, usize) {
    let (nx, ny) = db.dim();
    let mut best = start;
    for ix in start.0.saturating_sub(radius)..(start.0 + radius + 1).min(nx) {
        for iy in start.1.saturating_sub(radius)..(start.1 + radius + 1).min(ny) {
            if db[(ix, iy)] > db[best] {
                best = (ix, iy);
            }
        }
    }
    best
}

/// Global maximum location.
pub fn argmax(img: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    for ((ix, iy), &v) in img.indexed_iter() {
        if v > img[best] {
            best = (ix, iy);
        }
    }
    best
}

/// Width of the -6 dB contour through `point` along `axis`, in meters.
pub fn measure_fwhm(bmode: &BmodeImage, grid: &ImagingGrid, point: (usize, usize), axis: ProfileAxis) -> Result<f64> {
    let (profile, coords) = match axis {
        ProfileAxis::Axial => (bmode.db.column(point.1).to_vec(), grid.x_axis().to_vec()),
        ProfileAxis::Lateral => (bmode.db.row(point.0).to_vec(), grid.y_axis().to_vec()),
    };
    let center = match axis {
        ProfileAxis::Axial => point.0,
        ProfileAxis::Lateral => point.1,
    };
    // linear amplitude relative to the peak
    let peak = profile[center];
    let amp: Vec<f64> = profile.iter().map(|&d| 10f64.powf((d - peak) / 20.0)).collect();
    let level = 10f64.powf(-6.0 / 20.0);
    let crossing = |step: isize| -> Option<f64> {
        let mut i = center as isize;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= amp.len() {
                return None;
            }
            let (a, b) = (amp[i as usize], amp[j as usize]);
            if b < level {
                let frac = (a - level) / (a - b);
                let (ca, cb) = (coords[i as usize], coords[j as usize]);
                return Some(ca + frac * (cb - ca));
            }
            i = j;
        }
    };
    match (crossing(-1), crossing(1)) {
        (Some(lo), Some(hi)) => Ok((hi - lo).abs()),
        _ => Err(Error::Unresolved(
            "profile never drops 6 dB below the peak inside the grid".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastReport {
    /// `20 log10(mu_out / mu_in)`; `+inf` when the inside mean is zero.
    pub contrast_ratio_db: f64,
    pub cnr: f64,
    pub inside_is_zero: bool,
}

/// Contrast ratio and contrast-to-noise ratio on envelope values.
pub fn measure_contrast(env: &Array2<f64>, inside: &Array2<bool>, outside: &Array2<bool>) -> Result<ContrastReport> {
    if inside.dim() != env.dim() || outside.dim() != env.dim() {
        return Err(Error::shape("contrast masks must match the image shape"));
    }
    if inside.iter().zip(outside.iter()).any(|(a, b)| *a && *b) {
        return Err(Error::invalid("contrast masks must be disjoint"));
    }
    let stats = |mask: &Array2<bool>| -> Result<(f64, f64)> {
        let vals: Vec<f64> = env.iter().zip(mask.iter()).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
        if vals.is_empty() {
            return Err(Error::invalid("contrast masks must be non-empty"));
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok((mean, var))
    };
    let (mu_in, var_in) = stats(inside)?;
    let (mu_out, var_out) = stats(outside)?;
    let spread = (var_in + var_out).sqrt();
    let cnr = if spread > 0.0 { (mu_out - mu_in).abs() / spread } else { 0.0 };
    if mu_in == 0.0 {
        return Ok(ContrastReport {
            contrast_ratio_db: f64::INFINITY,
            cnr,
            inside_is_zero: true,
        });
    }
    Ok(ContrastReport {
        contrast_ratio_db: 20.0 * (mu_out / mu_in).log10(),
        cnr,
        inside_is_zero: false,
    })
}

/// Highest level (dB) outside disks of `radius` around each `points` entry.
/// Returns `-dynamic_range` if every pixel is excluded.
pub fn peak_sidelobe_db(bmode: &BmodeImage, grid: &ImagingGrid, points: &[Point2], radius: f64) -> f64 {
    let mut best = -bmode.dynamic_range;
    for ((ix, iy), &v) in bmode.db.indexed_iter() {
        let p = grid.position(ix, iy);
        if points.iter().all(|c| c.distance(&p) > radius) {
            best = best.max(v);
        }
    }
    best
}

/// Pixels within `radius` of `center`.
pub fn disk_mask(grid: &ImagingGrid, center: Point2, radius: f64) -> Array2<bool> {
    Array2::from_shape_fn((grid.nx(), grid.ny()), |(ix, iy)| grid.position(ix, iy).distance(&center) <= radius)
}

/// Pixels with `inner < distance <= outer` from `center`.
pub fn annulus_mask(grid: &ImagingGrid, center: Point2, inner: f64, outer: f64) -> Array2<bool> {
    Array2::from_shape_fn((grid.nx(), grid.ny()), |(ix, iy)| {
        let d = grid.position(ix, iy).distance(&center);
        d > inner && d <= outer
    })
}

/// Standard masks for an anechoic disk: inside at 2/3 of the radius,
/// background annulus between 4/3 and 2 radii.
pub fn region_masks(grid: &ImagingGrid, region: &Region) -> (Array2<bool>, Array2<bool>) {
    match *region {
        Region::AnechoicDisk { center, radius } => (
            disk_mask(grid, center, radius * 2.0 / 3.0),
            annulus_mask(grid, center, radius * 4.0 / 3.0, radius * 2.0),
        ),
    }
}

/// Summary metrics for one reconstructed image.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub fwhm_lateral: Option<f64>,
    pub fwhm_axial: Option<f64>,
    pub contrast_ratio: Option<f64>,
    pub cnr: Option<f64>,
    pub peak_sidelobe: Option<f64>,
    pub flops_per_pixel: Option<u64>,
}

/// Nearest-neighbor polar to Cartesian scan conversion. Pixels outside the
/// polar sector get `fill`.
pub fn scan_convert(img: &Array2<f64>, polar: &ImagingGrid, cartesian: &ImagingGrid, fill: f64) -> Array2<f64> {
    let radii = polar.x_axis();
    let angles = polar.y_axis();
    let (rmin, rmax) = (radii[0].min(radii[radii.len() - 1]), radii[0].max(radii[radii.len() - 1]));
    let (amin, amax) = (angles[0].min(angles[angles.len() - 1]), angles[0].max(angles[angles.len() - 1]));
    Array2::from_shape_fn((cartesian.nx(), cartesian.ny()), |(ix, iy)| {
        let p = cartesian.position(ix, iy);
        let r = p.x.hypot(p.y);
        let th = p.y.atan2(p.x);
        if r < rmin || r > rmax || th < amin || th > amax {
            return fill;
        }
        img[(
            crate::acoustics::nearest_index(radii, r),
            crate::acoustics::nearest_index(angles, th),
        )]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::GridKind;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_has_unit_envelope() {
        let fs = 40e6;
        let f = 3e6;
        let line: Vec<f64> = (0..400).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / fs).cos()).collect();
        let env = analytic_envelope(&line);
        for &e in &env[40..360] {
            assert!((e - 1.0).abs() < 0.01, "{e}");
        }
    }

    #[test]
    fn zero_image_has_zero_envelope_and_scaling_is_homogeneous() {
        let z = Array2::<f64>::zeros((16, 3));
        assert!(envelope_of(&z).unwrap().iter().all(|&v| v == 0.0));
        let y = Array2::from_shape_fn((32, 2), |(i, j)| ((i * 7 + j) as f64 * 0.3).sin());
        let e1 = envelope_of(&y).unwrap();
        let e2 = envelope_of(&(&y * 2.5)).unwrap();
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert_relative_eq!(2.5 * a, *b, epsilon = 1e-12);
        }
        assert!(envelope_of(&Array2::zeros((3, 2))).is_err());
    }

    #[test]
    fn log_compression_levels() {
        let env = Array2::from_shape_vec((1, 3), vec![2.0, 0.2, 1e-9]).unwrap();
        let b = log_compress(&env, 60.0).unwrap();
        assert_eq!(b.db[(0, 0)], 0.0);
        assert_relative_eq!(b.db[(0, 1)], -20.0, epsilon = 1e-12);
        assert_eq!(b.db[(0, 2)], -60.0);
        assert!(log_compress(&Array2::zeros((2, 2)), 60.0).is_err());
    }

    #[test]
    fn gaussian_fwhm() {
        let sigma = 0.4e-3;
        let grid = ImagingGrid::linspace((0.03, 0.03), 1, (-4e-3, 4e-3), 801).unwrap();
        let env = Array2::from_shape_fn((1, 801), |(_, iy)| (-grid.y_axis()[iy].powi(2) / (2.0 * sigma * sigma)).exp());
        let b = log_compress(&env, 80.0).unwrap();
        let w = measure_fwhm(&b, &grid, (0, 400), ProfileAxis::Lateral).unwrap();
        let expected = 2.0 * sigma * (2.0 * std::f64::consts::LN_2).sqrt();
        assert!((w - expected).abs() / expected < 0.02, "{w} vs {expected}");
    }

    #[test]
    fn fwhm_unresolved_profile() {
        let grid = ImagingGrid::linspace((0.01, 0.02), 5, (0.0, 1.0), 1).unwrap();
        let b = BmodeImage {
            db: Array2::from_shape_vec((5, 1), vec![-1.0, -0.5, 0.0, -0.5, -1.0]).unwrap(),
            dynamic_range: 60.0,
        };
        assert!(matches!(
            measure_fwhm(&b, &grid, (2, 0), ProfileAxis::Axial),
            Err(Error::Unresolved(_))
        ));
    }

    #[test]
    fn contrast_of_scaled_regions() {
        let env = Array2::from_shape_fn((4, 4), |(i, j)| if i < 2 { 1.0 + (j % 2) as f64 } else { 10.0 + 10.0 * (j % 2) as f64 });
        let inside = Array2::from_shape_fn((4, 4), |(i, _)| i < 2);
        let outside = inside.mapv(|v| !v);
        let r = measure_contrast(&env, &inside, &outside).unwrap();
        assert_relative_eq!(r.contrast_ratio_db, 20.0, epsilon = 1e-12);
        let same = Array2::from_elem((4, 4), 3.0);
        let r = measure_contrast(&same, &inside, &outside).unwrap();
        assert_eq!(r.contrast_ratio_db, 0.0);
        assert_eq!(r.cnr, 0.0);
        let zero_in = Array2::from_shape_fn((4, 4), |(i, _)| if i < 2 { 0.0 } else { 1.0 });
        let r = measure_contrast(&zero_in, &inside, &outside).unwrap();
        assert!(r.inside_is_zero && r.contrast_ratio_db.is_infinite());
        assert!(measure_contrast(&env, &inside, &inside).is_err());
    }

    #[test]
    fn scan_conversion_nearest_neighbor() {
        let polar = ImagingGrid::new(vec![0.01, 0.02, 0.03], vec![-0.2, 0.0, 0.2], GridKind::Polar).unwrap();
        let img = Array2::from_shape_fn((3, 3), |(i, j)| (i * 3 + j) as f64);
        let cart = ImagingGrid::linspace((0.02, 0.02), 1, (0.0, 0.0), 1).unwrap();
        let out = scan_convert(&img, &polar, &cart, -1.0);
        assert_eq!(out[(0, 0)], 4.0);
        let far = ImagingGrid::linspace((0.05, 0.05), 1, (0.0, 0.0), 1).unwrap();
        assert_eq!(scan_convert(&img, &polar, &far, -1.0)[(0, 0)], -1.0);
    }
}
