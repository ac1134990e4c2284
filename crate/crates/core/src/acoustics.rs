//! Domain types shared by every stage: array geometry, transmit schemes,
//! pulses, imaging grids, phantoms and medium parameters.
//!
//! Coordinates are in meters with `x` the depth (positive into the medium)
//! and `y` the lateral position. Elements sit at depth 0.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default speed of sound in soft tissue, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 1540.0;

/// A point in the imaging plane: `x` is depth, `y` is lateral.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApertureKind {
    Linear,
    Phased,
}

/// One-dimensional transducer array made of ideal point elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Point2>,
    pitch: f64,
    kind: ApertureKind,
}

impl ArrayGeometry {
    /// Builds an array from explicit element positions. Lateral coordinates
    /// must be strictly increasing; the pitch is the mean spacing.
    pub fn from_positions(positions: Vec<Point2>, kind: ApertureKind) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("an array needs at least 2 elements"));
        }
        if positions.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("element positions must be finite"));
        }
        if positions.windows(2).any(|w| w[1].y <= w[0].y) {
            return Err(Error::invalid(
                "element lateral positions must be strictly increasing",
            ));
        }
        let span = positions[positions.len() - 1].y - positions[0].y;
        let pitch = span / (positions.len() - 1) as f64;
        Ok(Self {
            positions,
            pitch,
            kind,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn position(&self, element: usize) -> Point2 {
        self.positions[element]
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn kind(&self) -> ApertureKind {
        self.kind
    }

    /// Distance between the outermost element centers.
    pub fn aperture(&self) -> f64 {
        self.positions[self.positions.len() - 1].y - self.positions[0].y
    }
}

/// Uniform linear array centered on the lateral origin at depth 0.
pub fn make_linear_array(num_elements: usize, pitch: f64) -> Result<ArrayGeometry> {
    make_array(num_elements, pitch, ApertureKind::Linear)
}

/// Same element layout as [`make_linear_array`], tagged as a phased array.
pub fn make_phased_array(num_elements: usize, pitch: f64) -> Result<ArrayGeometry> {
    make_array(num_elements, pitch, ApertureKind::Phased)
}

fn make_array(num_elements: usize, pitch: f64, kind: ApertureKind) -> Result<ArrayGeometry> {
    if num_elements < 2 {
        return Err(Error::invalid(format!(
            "element count must be >= 2, got {num_elements}"
        )));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(Error::invalid(format!("pitch must be positive, got {pitch}")));
    }
    let half = (num_elements - 1) as f64 / 2.0;
    let positions = (0..num_elements)
        .map(|c| Point2::new(0.0, (c as f64 - half) * pitch))
        .collect();
    Ok(ArrayGeometry {
        positions,
        pitch,
        kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    FocusedLine,
    PlaneWave,
    SyntheticAperture,
    DivergingWave,
}

/// A single transmit event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransmitEvent {
    /// Focused line: subaperture `[center - half_width, center + half_width]`
    /// focused at `focal_depth` below the center element.
    Focused {
        center: usize,
        focal_depth: f64,
        half_width: usize,
    },
    /// Steered plane wave, angle in radians from broadside.
    PlaneWave { angle: f64 },
    /// Single firing element.
    SyntheticAperture { element: usize },
    /// Diverging wave from a virtual source behind the array (`x < 0`).
    DivergingWave { source: Point2 },
}

impl TransmitEvent {
    pub fn kind(&self) -> SchemeKind {
        match self {
            TransmitEvent::Focused { .. } => SchemeKind::FocusedLine,
            TransmitEvent::PlaneWave { .. } => SchemeKind::PlaneWave,
            TransmitEvent::SyntheticAperture { .. } => SchemeKind::SyntheticAperture,
            TransmitEvent::DivergingWave { .. } => SchemeKind::DivergingWave,
        }
    }
}

/// An ordered list of transmit events of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitScheme {
    kind: SchemeKind,
    events: Vec<TransmitEvent>,
}

impl TransmitScheme {
    pub fn new(events: Vec<TransmitEvent>) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::invalid("a transmit scheme needs at least one event"))?;
        let kind = first.kind();
        if events.iter().any(|e| e.kind() != kind) {
            return Err(Error::invalid("all events of a scheme must share one kind"));
        }
        for event in &events {
            match *event {
                TransmitEvent::PlaneWave { angle } => {
                    if !(angle.is_finite() && angle.abs() < FRAC_PI_2) {
                        return Err(Error::invalid(format!(
                            "plane-wave angle {angle} rad outside (-pi/2, pi/2)"
                        )));
                    }
                }
                TransmitEvent::DivergingWave { source } => {
                    if !(source.x < 0.0) || !source.y.is_finite() {
                        return Err(Error::invalid(
                            "diverging-wave virtual sources must lie behind the array (negative depth)",
                        ));
                    }
                }
                TransmitEvent::Focused { focal_depth, .. } => {
                    if !(focal_depth > 0.0 && focal_depth.is_finite()) {
                        return Err(Error::invalid("focal depth must be positive"));
                    }
                }
                TransmitEvent::SyntheticAperture { .. } => {}
            }
        }
        Ok(Self { kind, events })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn events(&self) -> &[TransmitEvent] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Checks element indices against an array.
    pub fn validate_for(&self, array: &ArrayGeometry) -> Result<()> {
        let n = array.num_elements();
        for (k, event) in self.events.iter().enumerate() {
            match *event {
                TransmitEvent::Focused {
                    center, half_width, ..
                } => {
                    if center < half_width || center + half_width >= n {
                        return Err(Error::invalid(format!(
                            "event {k}: focused subaperture [{}, {}] exceeds array of {n} elements",
                            center as i64 - half_width as i64,
                            center + half_width
                        )));
                    }
                }
                TransmitEvent::SyntheticAperture { element } => {
                    if element >= n {
                        return Err(Error::invalid(format!(
                            "event {k}: firing element {element} outside array of {n} elements"
                        )));
                    }
                }
                TransmitEvent::PlaneWave { .. } | TransmitEvent::DivergingWave { .. } => {}
            }
        }
        Ok(())
    }
}

pub fn make_plane_wave_scheme(angles: &[f64]) -> Result<TransmitScheme> {
    if angles.is_empty() {
        return Err(Error::invalid("plane-wave scheme needs at least one angle"));
    }
    TransmitScheme::new(
        angles
            .iter()
            .map(|&angle| TransmitEvent::PlaneWave { angle })
            .collect(),
    )
}

/// One event per listed firing element.
pub fn make_synthetic_aperture_scheme(elements: &[usize]) -> Result<TransmitScheme> {
    TransmitScheme::new(
        elements
            .iter()
            .map(|&element| TransmitEvent::SyntheticAperture { element })
            .collect(),
    )
}

/// One focused line per listed center element.
pub fn make_focused_scheme(
    centers: &[usize],
    focal_depth: f64,
    half_width: usize,
) -> Result<TransmitScheme> {
    TransmitScheme::new(
        centers
            .iter()
            .map(|&center| TransmitEvent::Focused {
                center,
                focal_depth,
                half_width,
            })
            .collect(),
    )
}

pub fn make_diverging_scheme(sources: &[Point2]) -> Result<TransmitScheme> {
    TransmitScheme::new(
        sources
            .iter()
            .map(|&source| TransmitEvent::DivergingWave { source })
            .collect(),
    )
}

/// Transmitted pulse: a Gaussian-modulated cosine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    center_frequency: f64,
    fractional_bandwidth: f64,
    sampling_rate: f64,
}

impl PulseSpec {
    pub fn new(center_frequency: f64, fractional_bandwidth: f64, sampling_rate: f64) -> Result<Self> {
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(Error::invalid("center frequency must be positive"));
        }
        if !(fractional_bandwidth > 0.0 && fractional_bandwidth <= 1.0) {
            return Err(Error::invalid(format!(
                "fractional bandwidth must lie in (0, 1], got {fractional_bandwidth}"
            )));
        }
        if !(sampling_rate >= 4.0 * center_frequency) || !sampling_rate.is_finite() {
            return Err(Error::invalid(format!(
                "sampling rate {sampling_rate} Hz is below 4x the center frequency"
            )));
        }
        Ok(Self {
            center_frequency,
            fractional_bandwidth,
            sampling_rate,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn fractional_bandwidth(&self) -> f64 {
        self.fractional_bandwidth
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    /// Standard deviation of the Gaussian envelope, seconds. Chosen so the
    /// -6 dB (half amplitude) width of the spectrum equals `B * f0`.
    pub fn sigma_t(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt() / (PI * self.fractional_bandwidth * self.center_frequency)
    }

    /// Number of carrier cycles inside the -6 dB envelope.
    pub fn num_cycles_equivalent(&self) -> f64 {
        2.0 * self.sigma_t() * (2.0 * std::f64::consts::LN_2).sqrt() * self.center_frequency
    }

    pub fn wavelength(&self, speed_of_sound: f64) -> f64 {
        speed_of_sound / self.center_frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// `x_axis` is depth, `y_axis` lateral position.
    Cartesian,
    /// `x_axis` is radius from the array center, `y_axis` steering angle.
    Polar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid {
    x_axis: Vec<f64>,
    y_axis: Vec<f64>,
    kind: GridKind,
}

fn strictly_monotone(axis: &[f64]) -> bool {
    axis.iter().all(|v| v.is_finite())
        && (axis.windows(2).all(|w| w[1] > w[0]) || axis.windows(2).all(|w| w[1] < w[0]))
}

impl ImagingGrid {
    pub fn new(x_axis: Vec<f64>, y_axis: Vec<f64>, kind: GridKind) -> Result<Self> {
        if x_axis.is_empty() || y_axis.is_empty() {
            return Err(Error::invalid("grid axes must be non-empty"));
        }
        if !strictly_monotone(&x_axis) || !strictly_monotone(&y_axis) {
            return Err(Error::invalid("grid axes must be strictly monotone"));
        }
        Ok(Self {
            x_axis,
            y_axis,
            kind,
        })
    }

    /// Cartesian grid with evenly spaced axes, endpoints included.
    pub fn linspace(depth: (f64, f64), nx: usize, lateral: (f64, f64), ny: usize) -> Result<Self> {
        Self::new(linspace(depth.0, depth.1, nx), linspace(lateral.0, lateral.1, ny), GridKind::Cartesian)
    }

    pub fn x_axis(&self) -> &[f64] {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.y_axis
    }

    pub fn nx(&self) -> usize {
        self.x_axis.len()
    }

    pub fn ny(&self) -> usize {
        self.y_axis.len()
    }

    pub fn num_pixels(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn position(&self, ix: usize, iy: usize) -> Point2 {
        match self.kind {
            GridKind::Cartesian => Point2::new(self.x_axis[ix], self.y_axis[iy]),
            GridKind::Polar => {
                let (r, th) = (self.x_axis[ix], self.y_axis[iy]);
                Point2::new(r * th.cos(), r * th.sin())
            }
        }
    }

    /// Nearest pixel to a Cartesian point (Cartesian grids only).
    pub fn nearest_pixel(&self, p: Point2) -> (usize, usize) {
        (nearest_index(&self.x_axis, p.x), nearest_index(&self.y_axis, p.y))
    }

    pub fn dx(&self) -> f64 {
        mean_spacing(&self.x_axis)
    }

    pub fn dy(&self) -> f64 {
        mean_spacing(&self.y_axis)
    }
}

fn mean_spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        return 0.0;
    }
    (axis[axis.len() - 1] - axis[0]).abs() / (axis.len() - 1) as f64
}

pub(crate) fn nearest_index(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point2,
    pub amplitude: f64,
}

/// Labeled shapes used for metric masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    AnechoicDisk { center: Point2, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Region::AnechoicDisk { center, radius } => center.distance(&p) <= radius,
        }
    }
}

/// Test scene for the simulator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    scatterers: Vec<Scatterer>,
    regions: Vec<Region>,
}

impl Phantom {
    pub fn new(scatterers: Vec<Scatterer>, regions: Vec<Region>) -> Result<Self> {
        for s in &scatterers {
            if !s.amplitude.is_finite() || !s.position.x.is_finite() || !s.position.y.is_finite() {
                return Err(Error::invalid("scatterer amplitude and position must be finite"));
            }
            if regions.iter().any(|r| r.contains(s.position)) {
                return Err(Error::invalid(format!(
                    "scatterer at ({}, {}) lies inside an anechoic region",
                    s.position.x, s.position.y
                )));
            }
        }
        Ok(Self {
            scatterers,
            regions,
        })
    }

    pub fn point(position: Point2, amplitude: f64) -> Self {
        Self {
            scatterers: vec![Scatterer {
                position,
                amplitude,
            }],
            regions: Vec::new(),
        }
    }

    /// Uniformly placed scatterers with Gaussian amplitudes, rejecting any
    /// that would land inside `regions`.
    pub fn random_speckle(
        count: usize,
        depth: (f64, f64),
        lateral: (f64, f64),
        regions: Vec<Region>,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::StandardNormal;
        let mut scatterers = Vec::with_capacity(count);
        while scatterers.len() < count {
            let p = Point2::new(rng.gen_range(depth.0..depth.1), rng.gen_range(lateral.0..lateral.1));
            if regions.iter().any(|r| r.contains(p)) {
                continue;
            }
            let amplitude: f64 = rng.sample(normal);
            scatterers.push(Scatterer {
                position: p,
                amplitude,
            });
        }
        Self {
            scatterers,
            regions,
        }
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn union(&self, other: &Phantom) -> Result<Phantom> {
        let mut scatterers = self.scatterers.clone();
        scatterers.extend_from_slice(&other.scatterers);
        let mut regions = self.regions.clone();
        regions.extend_from_slice(&other.regions);
        Phantom::new(scatterers, regions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumParams {
    speed_of_sound: f64,
}

impl MediumParams {
    pub fn new(speed_of_sound: f64) -> Result<Self> {
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        Ok(Self { speed_of_sound })
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }
}

impl Default for MediumParams {
    fn default() -> Self {
        Self {
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

/// Everything the simulator and migration need to know about an acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSetup {
    pub array: ArrayGeometry,
    pub scheme: TransmitScheme,
    pub pulse: PulseSpec,
    pub medium: MediumParams,
}

impl AcquisitionSetup {
    pub fn new(
        array: ArrayGeometry,
        scheme: TransmitScheme,
        pulse: PulseSpec,
        medium: MediumParams,
    ) -> Result<Self> {
        scheme.validate_for(&array)?;
        Ok(Self {
            array,
            scheme,
            pulse,
            medium,
        })
    }

    pub fn num_events(&self) -> usize {
        self.scheme.num_events()
    }

    pub fn num_channels(&self) -> usize {
        self.array.num_elements()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.medium.speed_of_sound()
    }

    pub fn wavelength(&self) -> f64 {
        self.pulse.wavelength(self.speed_of_sound())
    }
}
