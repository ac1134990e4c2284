//! Point-scatterer RF channel data synthesis.
//!
//! Every firing element is treated as an ideal point source emitting the
//! same pulse after its transmit delay; every scatterer re-radiates the
//! incident field to every receive element. The model is single-scattering
//! and exactly linear in the scatterer amplitudes.

use std::f64::consts::PI;

use ndarray::Array3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::acoustics::{AcquisitionSetup, Phantom, Point2, PulseSpec, TransmitEvent};
use crate::error::{Error, Result};

/// Pulse support used for sample generation and record sizing, in units of
/// the envelope standard deviation.
pub const PULSE_SUPPORT_SIGMAS: f64 = 8.0;

/// Raw channel data `X`, shape `E x C x Nt` with fast time last.
#[derive(Debug, Clone, PartialEq)]
pub struct RfDataCube {
    pub samples: Array3<f64>,
    pub sampling_rate: f64,
    /// Time of the first sample, seconds.
    pub t0: f64,
}

impl RfDataCube {
    pub fn new(samples: Array3<f64>, sampling_rate: f64, t0: f64) -> Result<Self> {
        if samples.shape()[2] == 0 {
            return Err(Error::invalid("RF cube needs at least one fast-time sample"));
        }
        if !(sampling_rate > 0.0) {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("RF samples must be finite"));
        }
        Ok(Self {
            samples,
            sampling_rate,
            t0,
        })
    }

    pub fn num_events(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn num_channels(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn num_samples(&self) -> usize {
        self.samples.shape()[2]
    }

    /// Fast-time trace of one transmit/receive pair.
    pub fn trace(&self, event: usize, channel: usize) -> &[f64] {
        let nt = self.num_samples();
        let start = (event * self.num_channels() + channel) * nt;
        &self.samples.as_slice().expect("standard layout")[start..start + nt]
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 / self.sampling_rate
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Gaussian-modulated cosine centered at `t = 0`.
pub fn pulse_waveform(t: f64, spec: &PulseSpec) -> f64 {
    let sigma = spec.sigma_t();
    (2.0 * PI * spec.center_frequency() * t).cos() * (-t * t / (2.0 * sigma * sigma)).exp()
}

/// Firing delay of `element` for `event`, seconds, min-normalized over the
/// firing elements. `None` means the element does not fire.
pub fn transmit_delay(event: &TransmitEvent, element: usize, setup: &AcquisitionSetup) -> Option<f64> {
    firing_delays(event, setup)
        .into_iter()
        .find(|(j, _)| *j == element)
        .map(|(_, d)| d)
}

/// All firing elements of an event together with their delays.
pub fn firing_delays(event: &TransmitEvent, setup: &AcquisitionSetup) -> Vec<(usize, f64)> {
    let v = setup.speed_of_sound();
    let positions = setup.array.positions();
    let raw: Vec<(usize, f64)> = match *event {
        TransmitEvent::PlaneWave { angle } => positions
            .iter()
            .enumerate()
            .map(|(j, p)| (j, p.y * angle.sin() / v))
            .collect(),
        TransmitEvent::Focused {
            center,
            focal_depth,
            half_width,
        } => {
            let focus = Point2::new(focal_depth, positions[center].y);
            let d_center = focus.distance(&positions[center]);
            (center - half_width..=center + half_width)
                .map(|j| (j, (d_center - focus.distance(&positions[j])) / v))
                .collect()
        }
        TransmitEvent::SyntheticAperture { element } => vec![(element, 0.0)],
        TransmitEvent::DivergingWave { source } => positions
            .iter()
            .enumerate()
            .map(|(j, p)| (j, p.distance(&source) / v))
            .collect(),
    };
    let min = raw.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    raw.into_iter().map(|(j, d)| (j, d - min)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Signal-to-noise ratio in dB relative to the peak RF amplitude.
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulationOptions {
    /// Record length; sized automatically when `None`.
    pub num_samples: Option<usize>,
    pub t0: f64,
    /// Apply a `1/d` amplitude factor on each propagation leg.
    pub spherical_spreading: bool,
    pub noise: Option<NoiseSpec>,
}

struct Arrival {
    time: f64,
    amplitude: f64,
}

/// Synthesizes the RF cube of `phantom` under `setup`.
pub fn simulate_rf(phantom: &Phantom, setup: &AcquisitionSetup, options: &SimulationOptions) -> Result<RfDataCube> {
    let fs = setup.pulse.sampling_rate();
    let sigma = setup.pulse.sigma_t();
    let v = setup.speed_of_sound();
    let positions = setup.array.positions();
    let num_events = setup.num_events();
    let num_channels = setup.num_channels();

    // Transmit arrivals per event and scatterer: (time, amplitude) for every firing element.
    let tx: Vec<Vec<Vec<Arrival>>> = setup
        .scheme
        .events()
        .iter()
        .map(|event| {
            let fired = firing_delays(event, setup);
            phantom
                .scatterers()
                .iter()
                .map(|s| {
                    fired
                        .iter()
                        .map(|&(j, delay)| {
                            let d = positions[j].distance(&s.position);
                            let spread = if options.spherical_spreading { 1.0 / d.max(1e-6) } else { 1.0 };
                            Arrival {
                                time: delay + d / v,
                                amplitude: s.amplitude * spread,
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let support = PULSE_SUPPORT_SIGMAS * sigma;
    let latest = tx
        .iter()
        .flat_map(|per_scat| per_scat.iter().zip(phantom.scatterers()))
        .flat_map(|(arrivals, s)| {
            let rx_max = positions
                .iter()
                .map(|p| p.distance(&s.position))
                .fold(0.0_f64, f64::max);
            arrivals.iter().map(move |a| a.time + rx_max / v)
        })
        .fold(0.0_f64, f64::max);
    let required = (((latest + support - options.t0) * fs).ceil().max(0.0) as usize) + 1;
    let nt = match options.num_samples {
        None => required,
        Some(n) if n >= required && n >= 1 => n,
        Some(n) => {
            return Err(Error::invalid(format!(
                "record length {n} too short, need at least {required} samples"
            )))
        }
    };

    let mut samples = vec![0.0_f64; num_events * num_channels * nt];
    let omega_dt = 2.0 * PI * setup.pulse.center_frequency() / fs;
    let rot = Complex64::from_polar(1.0, omega_dt);
    let dt = 1.0 / fs;
    let gauss_step = (-dt * dt / (sigma * sigma)).exp();

    samples.par_chunks_mut(nt).enumerate().for_each(|(row, trace)| {
        let e = row / num_channels;
        let c = row % num_channels;
        let rc = positions[c];
        for (s, arrivals) in phantom.scatterers().iter().zip(&tx[e]) {
            let d_rx = rc.distance(&s.position);
            let rx_gain = if options.spherical_spreading { 1.0 / d_rx.max(1e-6) } else { 1.0 };
            for a in arrivals {
                let arrival = a.time + d_rx / v;
                add_pulse(
                    trace,
                    arrival - options.t0,
                    a.amplitude * rx_gain,
                    PulseKernel {
                        fs,
                        sigma,
                        support,
                        omega_dt,
                        rot,
                        gauss_step,
                    },
                );
            }
        }
    });

    let mut samples = Array3::from_shape_vec((num_events, num_channels, nt), samples)
        .expect("buffer sized from shape");

    if let Some(noise) = options.noise {
        let peak = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let std = peak / 10f64.powf(noise.snr_db / 20.0);
        if std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
            samples.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
        }
    }

    RfDataCube::new(samples, fs, options.t0)
}

#[derive(Clone, Copy)]
struct PulseKernel {
    fs: f64,
    sigma: f64,
    support: f64,
    omega_dt: f64,
    rot: Complex64,
    gauss_step: f64,
}

/// Adds `amplitude * pulse(t - arrival)` sampled at `n / fs`, using phase
/// and Gaussian recurrences along the support window.
fn add_pulse(trace: &mut [f64], arrival: f64, amplitude: f64, k: PulseKernel) {
    let first = ((arrival - k.support) * k.fs).ceil().max(0.0) as usize;
    let last = ((arrival + k.support) * k.fs).floor();
    if last < 0.0 {
        return;
    }
    let last = (last as usize).min(trace.len().saturating_sub(1));
    if first > last {
        return;
    }
    let dt = 1.0 / k.fs;
    let u0 = first as f64 * dt - arrival;
    let two_var = 2.0 * k.sigma * k.sigma;
    let mut phase = Complex64::from_polar(1.0, u0 * k.omega_dt * k.fs);
    let mut gauss = (-u0 * u0 / two_var).exp();
    let mut ratio = (-(2.0 * u0 * dt + dt * dt) / two_var).exp();
    for x in &mut trace[first..=last] {
        *x += amplitude * phase.re * gauss;
        phase *= k.rot;
        gauss *= ratio;
        ratio *= k.gauss_step;
    }
}
