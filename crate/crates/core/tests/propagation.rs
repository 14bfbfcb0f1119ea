use cqed_cpf::dynamics::{integrate_time_domain, TimeDomainConfig};
use cqed_cpf::pulse::{apply_reflection, make_gaussian, spectral_overlap};
use cqed_cpf::reflection::{steady_loss_probs, AtomState, CqedParams};
use cqed_cpf::{PulseSpec, SpectralAmplitude, SpectralGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(g: f64, kappa_ext: f64, kappa_int: f64) -> CqedParams {
    CqedParams::with_unit_gamma(g, kappa_ext, kappa_int).unwrap()
}

/// L2 distance between the spectral and integrated output pulses.
fn oracle_distance(p: &CqedParams, width: f64, atom: AtomState) -> f64 {
    let spec = PulseSpec::new(width).unwrap();
    let grid = SpectralGrid::for_pulse(p, &spec).unwrap();
    let output = apply_reflection(&make_gaussian(&spec, &grid).unwrap(), p, atom);
    let samples = output.to_time_domain(0.0);

    let config = TimeDomainConfig::aligned_to(&grid, p, &spec);
    let traj = integrate_time_domain(p, &spec, atom, &config).unwrap();
    assert_eq!(traj.len(), samples.values.len());
    let sum: f64 = traj
        .output
        .iter()
        .zip(&samples.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    (sum * samples.step()).sqrt()
}

#[test]
fn spectral_and_time_domain_outputs_agree() {
    for (g, ke, ki) in [(10.0, 3.0, 0.1), (2.0, 0.5, 0.05), (0.0, 1.0, 0.3)] {
        for width in [0.3, 3.0] {
            let p = params(g, ke, ki);
            for atom in [AtomState::Uncoupled, AtomState::Coupled] {
                let d = oracle_distance(&p, width, atom);
                assert!(d <= 1e-6, "{p:?} W = {width} {atom:?}: {d}");
            }
        }
    }
}

#[test]
fn spectral_loss_equals_time_domain_dissipation() {
    for (g, ke, ki) in [(10.0, 3.0, 0.1), (3.0, 1.0, 1.0), (30.0, 40.0, 5.0)] {
        let p = params(g, ke, ki);
        let spec = PulseSpec::new(1.0).unwrap();
        let grid = SpectralGrid::for_pulse(&p, &spec).unwrap();
        let input = make_gaussian(&spec, &grid).unwrap();
        for atom in [AtomState::Uncoupled, AtomState::Coupled] {
            let spectral_loss = 1.0 - apply_reflection(&input, &p, atom).norm_sqr();
            let traj = integrate_time_domain(
                &p,
                &spec,
                atom,
                &TimeDomainConfig::recommended(&p, &spec),
            )
            .unwrap();
            let last = traj.len() - 1;
            let dissipated = traj.dissipated[last] + traj.residual_norm(last);
            assert!(
                (spectral_loss - dissipated).abs() < 1e-6,
                "{atom:?}: {spectral_loss} vs {dissipated}"
            );
        }
    }
}

#[test]
fn overlap_with_reflected_pulse_matches_trajectory_overlap() {
    let p = params(10.0, 3.0, 0.1);
    let spec = PulseSpec::new(1.0).unwrap();
    let grid = SpectralGrid::for_pulse(&p, &spec).unwrap();
    let input = make_gaussian(&spec, &grid).unwrap();
    let spectral = spectral_overlap(&input, &apply_reflection(&input, &p, AtomState::Uncoupled))
        .unwrap();

    let config = TimeDomainConfig::aligned_to(&grid, &p, &spec);
    let traj = integrate_time_domain(&p, &spec, AtomState::Uncoupled, &config).unwrap();
    let dt = grid.time_step();
    let temporal: Complex64 = traj
        .input
        .iter()
        .zip(&traj.output)
        .map(|(a, b)| a.conj() * b * dt)
        .sum();
    assert!((spectral - temporal).norm() < 1e-6, "{spectral} vs {temporal}");
    assert!((spectral.re + 0.847_447_173_835_002_7).abs() < 1e-9);
}

#[test]
fn narrowband_loss_converges_to_the_steady_state() {
    for (g, ke, ki) in [(10.0, 3.0, 0.1), (1.0, 2.0, 0.5)] {
        let p = params(g, ke, ki);
        let (pl0, pl1) = steady_loss_probs(&p);
        for (atom, steady) in [(AtomState::Uncoupled, pl0), (AtomState::Coupled, pl1)] {
            let mut previous = f64::INFINITY;
            for width in [1e1, 1e2, 1e3, 1e4] {
                let spec = PulseSpec::new(width).unwrap();
                let grid = SpectralGrid::for_pulse(&p, &spec).unwrap();
                let input = make_gaussian(&spec, &grid).unwrap();
                let loss = 1.0 - apply_reflection(&input, &p, atom).norm_sqr();
                let error = (loss - steady).abs();
                assert!(error < previous, "{atom:?} W = {width}: {error} after {previous}");
                previous = error;
            }
            assert!(previous <= 1e-4);
        }
    }
}

fn random_spectrum(grid: SpectralGrid, seed: &[f64]) -> SpectralAmplitude {
    SpectralAmplitude::from_fn(grid, |delta| {
        let k = ((delta + grid.delta_max()) / grid.spacing()).round() as usize;
        let s = seed[k % seed.len()];
        Complex64::new(s.sin(), (1.7 * s).cos()) * (-delta * delta / 8.0).exp()
    })
}

proptest! {
    #[test]
    fn reflection_is_linear(
        g in 0.0f64..50.0,
        ke in 0.01f64..50.0,
        ki in 0.0f64..10.0,
        seed_x in prop::collection::vec(-3.0f64..3.0, 7),
        seed_y in prop::collection::vec(-3.0f64..3.0, 5),
        a_re in -2.0f64..2.0, a_im in -2.0f64..2.0,
        b_re in -2.0f64..2.0, b_im in -2.0f64..2.0,
    ) {
        let p = params(g, ke, ki);
        let grid = SpectralGrid::new(256, 12.0).unwrap();
        let x = random_spectrum(grid, &seed_x);
        let y = random_spectrum(grid, &seed_y);
        let (a, b) = (Complex64::new(a_re, a_im), Complex64::new(b_re, b_im));
        for atom in [AtomState::Uncoupled, AtomState::Coupled] {
            let combined = x.scaled(a).try_add(&y.scaled(b)).unwrap();
            let lhs = apply_reflection(&combined, &p, atom);
            let rhs = apply_reflection(&x, &p, atom)
                .scaled(a)
                .try_add(&apply_reflection(&y, &p, atom).scaled(b))
                .unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12 * (1.0 + lhs.norm_sqr().sqrt()));
        }
    }

    #[test]
    fn reflected_pulses_never_gain_norm(
        g in 0.0f64..100.0,
        ke in 0.01f64..100.0,
        ki in 0.0f64..10.0,
        width in 0.1f64..50.0,
    ) {
        let p = params(g, ke, ki);
        let spec = PulseSpec::new(width).unwrap();
        let grid = SpectralGrid::for_pulse(&p, &spec).unwrap();
        let input = make_gaussian(&spec, &grid).unwrap();
        for atom in [AtomState::Uncoupled, AtomState::Coupled] {
            prop_assert!(apply_reflection(&input, &p, atom).norm_sqr() <= input.norm_sqr() + 1e-12);
        }
    }
}
