use beamforge_core::acoustics::*;
use beamforge_core::beamformers::*;
use beamforge_core::imaging::*;
use beamforge_core::migration::*;
use beamforge_core::simulator::*;

const V: f64 = 1540.0;

fn setup(n: usize, scheme: TransmitScheme) -> AcquisitionSetup {
    let pulse = PulseSpec::new(5e6, 0.6, 40e6).unwrap();
    let pitch = pulse.wavelength(V) / 2.0;
    AcquisitionSetup::new(make_linear_array(n, pitch).unwrap(), scheme, pulse, MediumParams::new(V).unwrap()).unwrap()
}

fn image(target: Point2, s: &AcquisitionSetup, interp: Interpolation) -> (ImagingGrid, BeamformedImage) {
    let g = ImagingGrid::linspace((0.008, 0.012), 81, (-0.002, 0.002), 41).unwrap();
    let cube = simulate_rf(&Phantom::point(target, 1.0), s, &SimulationOptions::default()).unwrap();
    let z = migrate(&cube, &compute_tof(s, &g), interp, &SubsamplingMask::full(s.num_channels(), s.num_events())).unwrap();
    let img = das(&z, &ApodizationTensor::uniform(s.num_channels())).unwrap();
    (g, img)
}

fn assert_peak_at(target: Point2, g: &ImagingGrid, img: &BeamformedImage) {
    let env = envelope(img).unwrap();
    let (ix, iy) = argmax(&env);
    let p = g.position(ix, iy);
    assert!((p.x - target.x).abs() <= 1.5 * g.dx(), "depth {} vs {}", p.x, target.x);
    assert!((p.y - target.y).abs() <= 1.5 * g.dy(), "lateral {} vs {}", p.y, target.y);
}

#[test]
fn point_focuses_under_every_scheme() {
    let target = Point2::new(0.0102, 0.0005);
    let schemes = [
        make_plane_wave_scheme(&[0.0]).unwrap(),
        make_plane_wave_scheme(&[-0.1, 0.0, 0.1]).unwrap(),
        make_synthetic_aperture_scheme(&[0, 15, 31]).unwrap(),
        make_diverging_scheme(&[Point2::new(-0.005, 0.0)]).unwrap(),
    ];
    for scheme in schemes {
        let s = setup(32, scheme);
        let (g, img) = image(target, &s, Interpolation::Linear);
        assert_peak_at(target, &g, &img);
    }
}

#[test]
fn interpolators_agree_near_the_focus() {
    let target = Point2::new(0.01, 0.0);
    let s = setup(32, make_plane_wave_scheme(&[0.0]).unwrap());
    let peaks: Vec<f64> = [Interpolation::Nearest, Interpolation::Linear, Interpolation::DEFAULT_SINC]
        .into_iter()
        .map(|interp| {
            let (g, img) = image(target, &s, interp);
            assert_peak_at(target, &g, &img);
            envelope(&img).unwrap().iter().fold(0.0_f64, |m, &v| m.max(v))
        })
        .collect();
    assert!((peaks[1] - peaks[2]).abs() < 0.05 * peaks[2], "{peaks:?}");
    assert!((peaks[0] - peaks[2]).abs() < 0.15 * peaks[2], "{peaks:?}");
}

#[test]
fn delayed_channels_line_up_at_the_scatterer() {
    let target = Point2::new(0.01, 0.0);
    let s = setup(16, make_plane_wave_scheme(&[0.0]).unwrap());
    let g = ImagingGrid::new(vec![target.x], vec![target.y], GridKind::Cartesian).unwrap();
    let cube = simulate_rf(&Phantom::point(target, 1.0), &s, &SimulationOptions::default()).unwrap();
    let z = migrate(&cube, &compute_tof(&s, &g), Interpolation::DEFAULT_SINC, &SubsamplingMask::full(16, 1)).unwrap();
    let ch = z.channels(0, 0, 0);
    let mean = ch.iter().sum::<f64>() / ch.len() as f64;
    assert!(mean > 0.5, "{mean}");
    assert!(ch.iter().all(|v| (v - mean).abs() < 0.05 * mean), "{ch:?}");
}

#[test]
fn decimated_mask_drops_channels() {
    let s = setup(16, make_plane_wave_scheme(&[0.0]).unwrap());
    let g = ImagingGrid::linspace((0.009, 0.011), 5, (-0.001, 0.001), 3).unwrap();
    let cube = simulate_rf(&Phantom::point(Point2::new(0.01, 0.0), 1.0), &s, &SimulationOptions::default()).unwrap();
    let mask = make_mask(MaskKind::UniformDecimate(4), 16, 1).unwrap();
    assert_eq!(mask.num_active_channels(), 4);
    let z = migrate(&cube, &compute_tof(&s, &g), Interpolation::Linear, &mask).unwrap();
    for c in 0..16 {
        let any = (0..5).any(|ix| (0..3).any(|iy| z.is_valid(0, c, ix, iy)));
        assert_eq!(any, c % 4 == 0, "channel {c}");
    }
}
