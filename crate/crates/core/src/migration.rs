//! Time-of-flight computation and time-to-space migration of channel data.

use std::f64::consts::PI;

use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::acoustics::{AcquisitionSetup, ImagingGrid, Point2, TransmitEvent};
use crate::error::{Error, Result};
use crate::simulator::RfDataCube;

/// Two-way times of flight, stored as a transmit part `E x Nx x Ny` and a
/// receive part `Nx x Ny x C`. The full table is their broadcast sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TofTable {
    tx: Array3<f64>,
    rx: Array3<f64>,
}

impl TofTable {
    pub fn num_events(&self) -> usize {
        self.tx.shape()[0]
    }

    pub fn num_channels(&self) -> usize {
        self.rx.shape()[2]
    }

    pub fn grid_dim(&self) -> (usize, usize) {
        (self.rx.shape()[0], self.rx.shape()[1])
    }

    /// Time of flight in seconds for event `e`, channel `c` and pixel `(ix, iy)`.
    pub fn tau(&self, e: usize, c: usize, ix: usize, iy: usize) -> f64 {
        self.tx[(e, ix, iy)] + self.rx[(ix, iy, c)]
    }

    pub fn transmit_part(&self) -> &Array3<f64> {
        &self.tx
    }

    pub fn receive_part(&self) -> &Array3<f64> {
        &self.rx
    }
}

/// Transmit path length from the event origin to `r`, with the same
/// min-normalization as the simulator's firing delays.
pub fn transmit_distance(event: &TransmitEvent, r: Point2, setup: &AcquisitionSetup) -> f64 {
    let positions = setup.array.positions();
    match *event {
        TransmitEvent::PlaneWave { angle } => {
            let (s, c) = angle.sin_cos();
            let offset = positions.iter().map(|p| p.y * s).fold(f64::INFINITY, f64::min);
            r.x * c + r.y * s - offset
        }
        TransmitEvent::SyntheticAperture { element } => positions[element].distance(&r),
        TransmitEvent::Focused {
            center,
            focal_depth,
            half_width,
        } => {
            let origin = positions[center];
            let focus = Point2::new(focal_depth, origin.y);
            let d_max = positions[center - half_width..=center + half_width]
                .iter()
                .map(|p| p.distance(&focus))
                .fold(0.0_f64, f64::max);
            origin.distance(&r) + (d_max - focus.distance(&origin))
        }
        TransmitEvent::DivergingWave { source } => {
            let d_min = positions.iter().map(|p| p.distance(&source)).fold(f64::INFINITY, f64::min);
            source.distance(&r) - d_min
        }
    }
}

pub fn compute_tof(setup: &AcquisitionSetup, grid: &ImagingGrid) -> TofTable {
    let v = setup.speed_of_sound();
    let (nx, ny) = (grid.nx(), grid.ny());
    let events = setup.scheme.events();
    let positions = setup.array.positions();
    let tx = Array3::from_shape_fn((events.len(), nx, ny), |(e, ix, iy)| {
        transmit_distance(&events[e], grid.position(ix, iy), setup) / v
    });
    let rx = Array3::from_shape_fn((nx, ny, positions.len()), |(ix, iy, c)| {
        positions[c].distance(&grid.position(ix, iy)) / v
    });
    TofTable { tx, rx }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Linear,
    /// Hann-windowed sinc with `half_width` taps on each side.
    Sinc { half_width: usize },
}

impl Interpolation {
    pub const DEFAULT_SINC: Interpolation = Interpolation::Sinc { half_width: 8 };
}

/// Sampling of a fast-time trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAxis {
    pub sampling_rate: f64,
    pub t0: f64,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Sample offsets closer than this to an integer are treated as on-grid.
const ON_GRID_TOLERANCE: f64 = 1e-9;

/// Evaluates the trace `x` at time `tau`. `None` when `tau` falls outside
/// the recorded window.
pub fn delay_time_domain(x: &[f64], axis: TimeAxis, tau: f64, interp: Interpolation) -> Option<f64> {
    let n = x.len();
    let mut u = (tau - axis.t0) * axis.sampling_rate;
    if (u - u.round()).abs() < ON_GRID_TOLERANCE {
        u = u.round();
    }
    if !(u >= 0.0) || u > (n - 1) as f64 {
        return None;
    }
    let base = u.floor();
    let frac = u - base;
    let i = base as usize;
    if frac == 0.0 {
        return Some(x[i]);
    }
    match interp {
        Interpolation::Nearest => Some(x[(u.round() as usize).min(n - 1)]),
        Interpolation::Linear => Some(x[i] * (1.0 - frac) + x[i + 1] * frac),
        Interpolation::Sinc { half_width } => {
            let hw = half_width.max(1) as isize;
            let lo = (i as isize - hw + 1).max(0);
            let hi = (i as isize + hw).min(n as isize - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                let d = u - k as f64;
                let w = 0.5 + 0.5 * (PI * d / hw as f64).cos();
                acc += x[k as usize] * sinc(d) * w;
            }
            Some(acc)
        }
    }
}

/// Delays `x` by `tau` seconds with a linear phase ramp on its DFT
/// (circular in the record length).
pub fn delay_fourier_domain(x: &[f64], sampling_rate: f64, tau: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("Fourier delay needs at least 2 samples"));
    }
    if tau == 0.0 {
        return Ok(x.to_vec());
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let f = signed * sampling_rate / n as f64;
        if n % 2 == 0 && k == n / 2 {
            // the Nyquist bin has no conjugate partner; keep it real
            *b *= (2.0 * PI * f * tau).cos();
        } else {
            *b *= Complex64::from_polar(1.0, -2.0 * PI * f * tau);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf.iter().map(|b| b.re / n as f64).collect())
}

/// Channel/event selection applied during migration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsamplingMask {
    pub active_channels: Vec<bool>,
    pub active_events: Vec<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    Full,
    /// Keep indices `0, k, 2k, ...`.
    UniformDecimate(usize),
    /// Keep each index independently with probability `p`.
    Random { p: f64, seed: u64 },
}

fn pattern(kind: MaskKind, n: usize, stream: u64) -> Result<Vec<bool>> {
    Ok(match kind {
        MaskKind::Full => vec![true; n],
        MaskKind::UniformDecimate(k) => {
            if k == 0 {
                return Err(Error::invalid("decimation factor must be >= 1"));
            }
            (0..n).map(|i| i % k == 0).collect()
        }
        MaskKind::Random { p, seed } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("keep probability must lie in (0, 1], got {p}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            (0..n).map(|_| rng.gen_bool(p)).collect()
        }
    })
}

impl SubsamplingMask {
    pub fn full(num_channels: usize, num_events: usize) -> Self {
        Self {
            active_channels: vec![true; num_channels],
            active_events: vec![true; num_events],
            seed: None,
        }
    }

    /// Replaces the event pattern (transmit subsampling).
    pub fn with_events(mut self, kind: MaskKind) -> Result<Self> {
        let events = pattern(kind, self.active_events.len(), 1)?;
        if !events.iter().any(|&a| a) {
            return Err(Error::invalid("mask leaves no active transmit event"));
        }
        self.active_events = events;
        Ok(self)
    }

    pub fn num_active_channels(&self) -> usize {
        self.active_channels.iter().filter(|&&a| a).count()
    }

    pub fn num_active_events(&self) -> usize {
        self.active_events.iter().filter(|&&a| a).count()
    }
}

/// Channel subsampling pattern over `C` channels; all `E` events stay active.
pub fn make_mask(kind: MaskKind, num_channels: usize, num_events: usize) -> Result<SubsamplingMask> {
    let active_channels = pattern(kind, num_channels, 0)?;
    if !active_channels.iter().any(|&a| a) {
        return Err(Error::invalid("mask leaves no active channel"));
    }
    if num_events == 0 {
        return Err(Error::invalid("mask needs at least one event"));
    }
    Ok(SubsamplingMask {
        active_channels,
        active_events: vec![true; num_events],
        seed: match kind {
            MaskKind::Random { seed, .. } => Some(seed),
            _ => None,
        },
    })
}

/// Migrated data `Z = D(X)`. Logically `E x C x Nx x Ny`; stored pixel-major
/// (`E x Nx x Ny x C`) so each pixel's channel vector is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedDataTensor {
    z: Array4<f64>,
    valid: Array4<bool>,
}

impl DelayedDataTensor {
    /// Builds a tensor from `(e, c, ix, iy)`-indexed closures; invalid
    /// entries are forced to zero.
    pub fn from_fn(
        shape: (usize, usize, usize, usize),
        mut value: impl FnMut(usize, usize, usize, usize) -> f64,
        mut valid: impl FnMut(usize, usize, usize, usize) -> bool,
    ) -> Self {
        let (e, c, nx, ny) = shape;
        let valid = Array4::from_shape_fn((e, nx, ny, c), |(e, ix, iy, c)| valid(e, c, ix, iy));
        let z = Array4::from_shape_fn((e, nx, ny, c), |(e, ix, iy, c)| {
            if valid[(e, ix, iy, c)] {
                value(e, c, ix, iy)
            } else {
                0.0
            }
        });
        Self { z, valid }
    }

    pub fn num_events(&self) -> usize {
        self.z.shape()[0]
    }

    pub fn num_channels(&self) -> usize {
        self.z.shape()[3]
    }

    pub fn grid_dim(&self) -> (usize, usize) {
        (self.z.shape()[1], self.z.shape()[2])
    }

    pub fn get(&self, e: usize, c: usize, ix: usize, iy: usize) -> f64 {
        self.z[(e, ix, iy, c)]
    }

    pub fn is_valid(&self, e: usize, c: usize, ix: usize, iy: usize) -> bool {
        self.valid[(e, ix, iy, c)]
    }

    /// Channel vector of one pixel for one event.
    pub fn channels(&self, e: usize, ix: usize, iy: usize) -> &[f64] {
        let c = self.num_channels();
        let (nx, ny) = self.grid_dim();
        let start = ((e * nx + ix) * ny + iy) * c;
        &self.z.as_slice().expect("standard layout")[start..start + c]
    }

    pub fn validity(&self, e: usize, ix: usize, iy: usize) -> &[bool] {
        let c = self.num_channels();
        let (nx, ny) = self.grid_dim();
        let start = ((e * nx + ix) * ny + iy) * c;
        &self.valid.as_slice().expect("standard layout")[start..start + c]
    }

    /// Raw storage in `E x Nx x Ny x C` order.
    pub fn values(&self) -> &Array4<f64> {
        &self.z
    }

    pub fn valid_mask(&self) -> &Array4<bool> {
        &self.valid
    }
}

pub fn migrate(
    cube: &RfDataCube,
    tof: &TofTable,
    interp: Interpolation,
    mask: &SubsamplingMask,
) -> Result<DelayedDataTensor> {
    let (e_n, c_n) = (cube.num_events(), cube.num_channels());
    if tof.num_events() != e_n || tof.num_channels() != c_n {
        return Err(Error::shape(format!(
            "RF cube is {e_n}x{c_n} (events x channels) but TOF table is {}x{}",
            tof.num_events(),
            tof.num_channels()
        )));
    }
    if mask.active_channels.len() != c_n || mask.active_events.len() != e_n {
        return Err(Error::shape("subsampling mask does not match the RF cube"));
    }
    let (nx, ny) = tof.grid_dim();
    let axis = TimeAxis {
        sampling_rate: cube.sampling_rate,
        t0: cube.t0,
    };
    let pixel_len = ny * c_n;
    let mut z = vec![0.0_f64; e_n * nx * pixel_len];
    let mut valid = vec![false; e_n * nx * pixel_len];
    z.par_chunks_mut(pixel_len)
        .zip(valid.par_chunks_mut(pixel_len))
        .enumerate()
        .for_each(|(row, (zrow, vrow))| {
            let e = row / nx;
            let ix = row % nx;
            if !mask.active_events[e] {
                return;
            }
            for c in (0..c_n).filter(|&c| mask.active_channels[c]) {
                let trace = cube.trace(e, c);
                for iy in 0..ny {
                    if let Some(v) = delay_time_domain(trace, axis, tof.tau(e, c, ix, iy), interp) {
                        zrow[iy * c_n + c] = v;
                        vrow[iy * c_n + c] = true;
                    }
                }
            }
        });
    Ok(DelayedDataTensor {
        z: Array4::from_shape_vec((e_n, nx, ny, c_n), z).expect("sized from shape"),
        valid: Array4::from_shape_vec((e_n, nx, ny, c_n), valid).expect("sized from shape"),
    })
}
