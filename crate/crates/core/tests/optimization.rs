use cqed_cpf::optimizer::{
    cavity_scan, evaluate_objective, log_ratios, optimize_kappa_ext, scale_by_cavity_length,
    CavityScaling,
};
use cqed_cpf::sweep::{evaluate_point, extract_contour, requirement_report};
use cqed_cpf::{
    ftqc_parameter, kappa_ext_loss, run_sweep, CqedParams, KextPolicy, LogGrid, Objective,
    PulseLength, SweepConfig, ThresholdFit,
};

fn fit() -> ThresholdFit {
    ThresholdFit::default()
}

#[test]
fn minimizing_p_never_loses_to_the_loss_formula() {
    let mut strict = false;
    for width in [0.3, 30.0] {
        let pulse = PulseLength::finite(width).unwrap();
        for kappa_int in [0.001, 0.1, 10.0] {
            for g in [2.0, 20.0, 200.0] {
                let by_loss = evaluate_point(g, kappa_int, &pulse, KextPolicy::LossFormula, &fit(), None)
                    .unwrap();
                let by_p = evaluate_point(g, kappa_int, &pulse, KextPolicy::MinimizeP, &fit(), None)
                    .unwrap();
                assert!(by_p.p_ftqc <= by_loss.p_ftqc + 1e-6, "{by_p:?} vs {by_loss:?}");
                if width == 30.0 && kappa_int == 0.001 && by_p.p_ftqc < 0.95 * by_loss.p_ftqc {
                    strict = true;
                }
            }
        }
    }
    assert!(strict);
}

#[test]
fn optimal_coupling_ratio_crosses_one_near_unit_internal_loss() {
    let pulse = PulseLength::finite(0.3).unwrap();
    let ratio = |kappa_int: f64| {
        let template = CqedParams::with_unit_gamma(30.0, 1.0, kappa_int).unwrap();
        let r = optimize_kappa_ext(&template, &pulse, Objective::FtqcP, &fit()).unwrap();
        r.kappa_ext_opt / kappa_ext_loss(&template).unwrap()
    };
    assert!(ratio(0.1) > 1.0);
    assert!(ratio(10.0) < 1.0);
}

#[test]
fn search_result_is_inside_its_bracket() {
    let pulse = PulseLength::finite(0.3).unwrap();
    for (g, ki) in [(50.0, 10.0), (300.0, 30.0), (30.0, 0.1)] {
        let template = CqedParams::with_unit_gamma(g, 1.0, ki).unwrap();
        let r = optimize_kappa_ext(&template, &pulse, Objective::FtqcP, &fit()).unwrap();
        assert!(r.bracket[0] < r.kappa_ext_opt && r.kappa_ext_opt < r.bracket[1]);
        for end in r.bracket {
            let at_end = evaluate_objective(
                &template.with_kappa_ext(end),
                &pulse,
                Objective::FtqcP,
                &fit(),
            )
            .unwrap();
            assert!(r.objective_value <= at_end);
        }
    }
}

#[test]
fn internal_cooperativity_is_constant_along_a_scan() {
    let base = CqedParams::with_unit_gamma(2.0, 0.05, 0.001).unwrap();
    for ratio in log_ratios(-3.0, 1.0, 4) {
        let scaled = scale_by_cavity_length(&CavityScaling {
            base_params: base,
            length_ratio: ratio,
        })
        .unwrap();
        let rel = scaled.internal_cooperativity() / base.internal_cooperativity() - 1.0;
        assert!(rel.abs() <= 1e-12);
    }
}

#[test]
fn long_pulse_scan_keeps_p_constant() {
    let base = CqedParams::with_unit_gamma(2.0, 0.05, 0.001).unwrap();
    let scan = cavity_scan(&base, &log_ratios(-3.0, 1.0, 2), &PulseLength::LongLimit, &fit())
        .unwrap();
    let ps: Vec<f64> = scan.points.iter().map(|p| p.p_ftqc).collect();
    let (lo, hi) = ps
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(*p), hi.max(*p)));
    assert!(hi / lo - 1.0 <= 0.05, "{ps:?}");
}

fn small_config(pulse: PulseLength, policy: KextPolicy) -> SweepConfig {
    SweepConfig {
        g_range: LogGrid::new(3.0, 3000.0, 7).unwrap(),
        kappa_int_range: LogGrid::new(0.01, 100.0, 5).unwrap(),
        pulse,
        kext_policy: policy,
        threshold_fit: fit(),
    }
}

#[test]
fn sweeps_are_reproducible_across_thread_counts() {
    let config = small_config(PulseLength::finite(3.0).unwrap(), KextPolicy::MinimizeP);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_sweep(&config).unwrap())
    };
    let serial = run(1);
    let parallel = run(4);
    assert_eq!(serial, parallel);
    for p in serial.iter() {
        assert_eq!(p.p_ftqc, ftqc_parameter(p.p_loss, p.p_cond, &fit()));
    }
}

#[test]
fn long_pulse_p_depends_only_on_internal_cooperativity() {
    for c_int in [100.0, 1130.0, 1e4] {
        let values: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&ki: &f64| {
                let g = (2.0 * c_int * ki).sqrt();
                evaluate_point(g, ki, &PulseLength::LongLimit, KextPolicy::LossFormula, &fit(), None)
                    .unwrap()
                    .p_ftqc
            })
            .collect();
        for v in &values {
            assert!((v / values[0] - 1.0).abs() < 0.01, "{values:?}");
        }
    }
}

#[test]
fn finite_pulse_p_is_not_set_by_internal_cooperativity_alone() {
    let pulse = PulseLength::finite(30.0).unwrap();
    let c_int = 2000.0;
    let values: Vec<f64> = [0.001, 0.01]
        .iter()
        .map(|&ki: &f64| {
            let g = (2.0 * c_int * ki).sqrt();
            evaluate_point(g, ki, &pulse, KextPolicy::MinimizeP, &fit(), None)
                .unwrap()
                .p_ftqc
        })
        .collect();
    let spread = values[0].max(values[1]) / values[0].min(values[1]) - 1.0;
    assert!(spread > 0.1, "{values:?}");
}

#[test]
fn long_pulse_contour_has_slope_two() {
    let map = run_sweep(&SweepConfig {
        g_range: LogGrid::new(1.0, 1e3, 16).unwrap(),
        // One row per third of a decade, so kappa_int = 1 is a grid row.
        kappa_int_range: LogGrid::new(1e-3, 1e3, 19).unwrap(),
        ..SweepConfig::default()
    })
    .unwrap();
    let lines = extract_contour(&map, 1.0);
    assert_eq!(lines.len(), 1);
    let pts: Vec<(f64, f64)> = lines[0].iter().map(|(g, k)| (g.log10(), k.log10())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope - 2.0).abs() <= 0.05, "slope {slope}");

    let report = requirement_report(&map);
    let at_one = report.min_g_at(1.0).unwrap();
    let expected = (2.0f64 * 1130.0).sqrt();
    assert!((at_one / expected - 1.0).abs() <= 0.1, "{at_one}");
    for typical in &report.typical_points {
        assert_eq!(typical.fault_tolerant, Some(false));
    }
}

#[test]
fn reducing_internal_loss_stops_helping_for_finite_pulses() {
    let config = SweepConfig {
        g_range: LogGrid::new(1.0, 2.0, 2).unwrap(),
        kappa_int_range: LogGrid::new(1e-4, 1.0, 9).unwrap(),
        pulse: PulseLength::finite(30.0).unwrap(),
        kext_policy: KextPolicy::MinimizeP,
        threshold_fit: fit(),
    };
    let report = requirement_report(&run_sweep(&config).unwrap());
    assert!(report.columns.iter().all(|c| c.saturates), "{:?}", report.columns);
}

#[test]
fn huge_coupling_is_fault_tolerant_everywhere() {
    let config = SweepConfig {
        g_range: LogGrid::new(1e5, 1e6, 3).unwrap(),
        kappa_int_range: LogGrid::new(0.1, 10.0, 3).unwrap(),
        ..SweepConfig::default()
    };
    let report = requirement_report(&run_sweep(&config).unwrap());
    assert!(report.all_fault_tolerant);
}
