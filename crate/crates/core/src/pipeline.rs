//! Configuration document and the simulate / beamform / train / evaluate
//! chain built on it.

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::acoustics::{
    make_diverging_scheme, make_focused_scheme, make_linear_array, make_phased_array, make_plane_wave_scheme,
    make_synthetic_aperture_scheme, AcquisitionSetup, ImagingGrid, MediumParams, Phantom, Point2, PulseSpec, Region,
    Scatterer, TransmitScheme,
};
use crate::beamformers::{beamform, window_weights, AdaptiveParams, BeamformedImage, BeamformerKind, WindowKind};
use crate::error::{Error, Result};
use crate::flops::{flop_ledger, network_flops};
use crate::imaging::{
    envelope, log_compress, measure_contrast, measure_fwhm, peak_sidelobe_db, refine_peak, region_masks, BmodeImage,
    MetricsReport, ProfileAxis,
};
use crate::migration::{compute_tof, make_mask, migrate, DelayedDataTensor, Interpolation, MaskKind};
use crate::neural::{AdamParams, Dataset, LossSpec, LrSchedule, TrainConfig, WeightNetwork};
use crate::simulator::{simulate_rf, NoiseSpec, RfDataCube, SimulationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKindCfg {
    #[default]
    Linear,
    Phased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(default)]
    pub kind: ArrayKindCfg,
    pub num_elements: usize,
    /// Element pitch in meters; defaults to half a wavelength.
    #[serde(default)]
    pub pitch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransmitConfig {
    PlaneWave {
        angles_deg: Vec<f64>,
    },
    SyntheticAperture {
        /// Firing elements; all elements when omitted.
        #[serde(default)]
        elements: Option<Vec<usize>>,
    },
    Focused {
        centers: Vec<usize>,
        focal_depth: f64,
        half_width: usize,
    },
    DivergingWave {
        /// Virtual sources as `[depth, lateral]` (depth negative).
        sources: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub center_frequency: f64,
    pub fractional_bandwidth: f64,
    pub sampling_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub depth: [f64; 2],
    pub nx: usize,
    pub lateral: [f64; 2],
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckleConfig {
    pub count: usize,
    pub depth: [f64; 2],
    pub lateral: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CystConfig {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    #[serde(default)]
    pub points: Vec<PointConfig>,
    #[serde(default)]
    pub speckle: Option<SpeckleConfig>,
    #[serde(default)]
    pub cysts: Vec<CystConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub spherical_spreading: bool,
}

fn default_speed() -> f64 {
    1540.0
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            speed_of_sound: default_speed(),
            points: Vec::new(),
            speckle: None,
            cysts: Vec::new(),
            noise: None,
            spherical_spreading: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowCfg {
    #[default]
    Boxcar,
    Hann,
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterpCfg {
    Nearest,
    #[default]
    Linear,
    Sinc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformerConfig {
    pub kind: BeamformerKind,
    pub window: WindowCfg,
    pub f_number: f64,
    pub interpolation: InterpCfg,
    pub sinc_half_width: usize,
    /// Keep every k-th receive channel.
    pub channel_decimation: usize,
    pub dynamic_range: f64,
    pub adaptive: AdaptiveParams,
}

impl Default for BeamformerConfig {
    fn default() -> Self {
        Self {
            kind: BeamformerKind::Das,
            window: WindowCfg::Boxcar,
            f_number: 0.0,
            interpolation: InterpCfg::Linear,
            sinc_half_width: 8,
            channel_decimation: 1,
            dynamic_range: 60.0,
            adaptive: AdaptiveParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Network layer sizes; the scaled-down default when omitted.
    pub layer_dims: Option<Vec<usize>>,
    pub loss: LossSpec,
    pub target: BeamformerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamParams,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            layer_dims: None,
            loss: LossSpec::default(),
            target: BeamformerKind::Mvdr,
            epochs: t.epochs,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            lr_schedule: t.schedule,
            seed: t.seed,
        }
    }
}

impl TrainingConfig {
    pub fn schedule(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            schedule: self.lr_schedule,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub array: ArrayConfig,
    pub transmit: TransmitConfig,
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub beamformer: BeamformerConfig,
    #[serde(default)]
    pub training: TrainingConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.setup()?;
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self> {
        let cfg: Config = serde_json::from_value(v)?;
        cfg.setup()?;
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }

    pub fn setup(&self) -> Result<AcquisitionSetup> {
        let pulse = PulseSpec::new(self.pulse.center_frequency, self.pulse.fractional_bandwidth, self.pulse.sampling_rate)
            .map_err(cfg_err)?;
        let medium = MediumParams::new(self.phantom.speed_of_sound).map_err(cfg_err)?;
        let pitch = self
            .array
            .pitch
            .unwrap_or_else(|| pulse.wavelength(medium.speed_of_sound()) / 2.0);
        let array = match self.array.kind {
            ArrayKindCfg::Linear => make_linear_array(self.array.num_elements, pitch),
            ArrayKindCfg::Phased => make_phased_array(self.array.num_elements, pitch),
        }
        .map_err(cfg_err)?;
        let scheme: TransmitScheme = match &self.transmit {
            TransmitConfig::PlaneWave { angles_deg } => {
                let rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();
                make_plane_wave_scheme(&rad)
            }
            TransmitConfig::SyntheticAperture { elements } => {
                let all: Vec<usize> = (0..self.array.num_elements).collect();
                make_synthetic_aperture_scheme(elements.as_deref().unwrap_or(&all))
            }
            TransmitConfig::Focused {
                centers,
                focal_depth,
                half_width,
            } => make_focused_scheme(centers, *focal_depth, *half_width),
            TransmitConfig::DivergingWave { sources } => {
                let pts: Vec<Point2> = sources.iter().map(|s| Point2::new(s[0], s[1])).collect();
                make_diverging_scheme(&pts)
            }
        }
        .map_err(cfg_err)?;
        AcquisitionSetup::new(array, scheme, pulse, medium).map_err(cfg_err)
    }

    pub fn grid(&self) -> Result<ImagingGrid> {
        let g = &self.grid;
        ImagingGrid::linspace((g.depth[0], g.depth[1]), g.nx, (g.lateral[0], g.lateral[1]), g.ny).map_err(cfg_err)
    }

    pub fn regions(&self) -> Vec<Region> {
        self.phantom
            .cysts
            .iter()
            .map(|c| Region::AnechoicDisk {
                center: Point2::new(c.x, c.y),
                radius: c.radius,
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Point2> {
        self.phantom.points.iter().map(|p| Point2::new(p.x, p.y)).collect()
    }

    pub fn phantom(&self) -> Result<Phantom> {
        let regions = self.regions();
        let mut scatterers: Vec<Scatterer> = self
            .phantom
            .points
            .iter()
            .map(|p| Scatterer {
                position: Point2::new(p.x, p.y),
                amplitude: p.amplitude,
            })
            .collect();
        if let Some(s) = &self.phantom.speckle {
            let bg = Phantom::random_speckle(
                s.count,
                (s.depth[0], s.depth[1]),
                (s.lateral[0], s.lateral[1]),
                regions.clone(),
                s.seed,
            );
            scatterers.extend_from_slice(bg.scatterers());
        }
        let p = Phantom::new(scatterers, regions).map_err(cfg_err)?;
        if p.is_empty() {
            return Err(Error::Config("phantom has no scatterers".into()));
        }
        Ok(p)
    }

    pub fn simulation_options(&self) -> SimulationOptions {
        SimulationOptions {
            num_samples: None,
            t0: 0.0,
            spherical_spreading: self.phantom.spherical_spreading,
            noise: self.phantom.noise.as_ref().map(|n| NoiseSpec {
                snr_db: n.snr_db,
                seed: n.seed,
            }),
        }
    }

    pub fn interpolation(&self) -> Interpolation {
        match self.beamformer.interpolation {
            InterpCfg::Nearest => Interpolation::Nearest,
            InterpCfg::Linear => Interpolation::Linear,
            InterpCfg::Sinc => Interpolation::Sinc {
                half_width: self.beamformer.sinc_half_width,
            },
        }
    }

    pub fn network(&self, num_channels: usize) -> Result<WeightNetwork> {
        match &self.training.layer_dims {
            Some(d) => WeightNetwork::new(d, self.training.seed),
            None => WeightNetwork::desk(num_channels, self.training.seed),
        }
        .map_err(cfg_err)
    }
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) | Error::ShapeMismatch(m) => Error::Config(m),
        other => other,
    }
}

pub fn simulate(cfg: &Config) -> Result<RfDataCube> {
    simulate_rf(&cfg.phantom()?, &cfg.setup()?, &cfg.simulation_options())
}

/// Time-of-flight correction of `cube` onto the configured grid.
pub fn migrate_rf(cfg: &Config, cube: &RfDataCube) -> Result<DelayedDataTensor> {
    let setup = cfg.setup()?;
    let grid = cfg.grid()?;
    let tof = compute_tof(&setup, &grid);
    let kind = match cfg.beamformer.channel_decimation {
        0 | 1 => MaskKind::Full,
        k => MaskKind::UniformDecimate(k),
    };
    let mask = make_mask(kind, cube.num_channels(), cube.num_events())?;
    migrate(cube, &tof, cfg.interpolation(), &mask)
}

pub fn beamform_rf(cfg: &Config, z: &DelayedDataTensor, kind: BeamformerKind) -> Result<BeamformedImage> {
    let setup = cfg.setup()?;
    let grid = cfg.grid()?;
    let window = match cfg.beamformer.window {
        WindowCfg::Boxcar => WindowKind::Boxcar,
        WindowCfg::Hann => WindowKind::Hann,
        WindowCfg::Hamming => WindowKind::Hamming,
    };
    let w = window_weights(window, cfg.beamformer.f_number, &grid, &setup.array)?;
    beamform(z, &w, kind, &cfg.beamformer.adaptive)
}

pub fn bmode(cfg: &Config, img: &BeamformedImage) -> Result<BmodeImage> {
    log_compress(&envelope(img)?, cfg.beamformer.dynamic_range)
}

/// Resolution metrics at the first configured point, sidelobes around all
/// of them, and contrast of the first cyst.
pub fn metrics(cfg: &Config, img: &BeamformedImage, flops_per_pixel: Option<u64>) -> Result<MetricsReport> {
    let grid = cfg.grid()?;
    let env = envelope(img)?;
    let b = log_compress(&env, cfg.beamformer.dynamic_range)?;
    let mut report = MetricsReport {
        flops_per_pixel,
        ..Default::default()
    };
    let points = cfg.points();
    if let Some(&p) = points.first() {
        let px = refine_peak(&b.db, grid.nearest_pixel(p), 3);
        report.fwhm_lateral = measure_fwhm(&b, &grid, px, ProfileAxis::Lateral).ok();
        report.fwhm_axial = measure_fwhm(&b, &grid, px, ProfileAxis::Axial).ok();
        // 1.2 times the lateral first-null distance of the full aperture
        let setup = cfg.setup()?;
        let radius = 1.2 * setup.wavelength() * p.x / setup.array.aperture();
        report.peak_sidelobe = Some(peak_sidelobe_db(&b, &grid, &points, radius));
    }
    if let Some(region) = cfg.regions().first() {
        let (inside, outside) = region_masks(&grid, region);
        if let Ok(c) = measure_contrast(&env, &inside, &outside) {
            report.contrast_ratio = Some(c.contrast_ratio_db);
            report.cnr = Some(c.cnr);
        }
    }
    Ok(report)
}

/// Per-pixel cost of `kind` (the network when `None`) under the two-FLOP
/// multiply-add convention.
pub fn flops_for(cfg: &Config, kind: Option<BeamformerKind>, num_channels: usize) -> Result<u64> {
    let net = cfg.network(num_channels)?;
    let Some(kind) = kind else {
        return Ok(network_flops(net.layer_dims()).two_flop_convention());
    };
    let (l, _) = cfg.beamformer.adaptive.resolve(num_channels);
    flop_ledger(num_channels, l, cfg.beamformer.adaptive.temporal_halfwidth, net.layer_dims())
        .into_iter()
        .find(|r| r.beamformer == kind.id())
        .map(|r| r.two_flop)
        .ok_or_else(|| Error::invalid(format!("no ledger row for {}", kind.id())))
}

/// Pixel channel vectors of every event as samples, with the chosen
/// beamformer's per-event output as target. Samples are ordered event by
/// event, each a row-major `Nx x Ny` image.
pub fn training_set(cfg: &Config, z: &DelayedDataTensor, target: BeamformerKind) -> Result<Dataset> {
    let (e_n, c_n) = (z.num_events(), z.num_channels());
    let (nx, ny) = z.grid_dim();
    let setup = cfg.setup()?;
    let grid = cfg.grid()?;
    let w = window_weights(WindowKind::Boxcar, 0.0, &grid, &setup.array)?;
    let mut inputs = Array2::zeros((e_n * nx * ny, c_n));
    let mut targets = Vec::with_capacity(e_n * nx * ny);
    for e in 0..e_n {
        let img = crate::beamformers::beamform_event(z, &w, target, &cfg.beamformer.adaptive, e)?;
        for ix in 0..nx {
            for iy in 0..ny {
                let row = (e * nx + ix) * ny + iy;
                inputs
                    .index_axis_mut(Axis(0), row)
                    .assign(&ndarray::ArrayView1::from(z.channels(e, ix, iy)));
                targets.push(img.y[(ix, iy)]);
            }
        }
    }
    Dataset::new(inputs, targets, Some((nx, ny)))
}
