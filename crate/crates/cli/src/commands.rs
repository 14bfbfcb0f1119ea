use cqed_cpf::gate::{gate_loss, Detector};
use cqed_cpf::optimizer::{cavity_scan, scale_by_cavity_length, CavityScaling};
use cqed_cpf::pulse::{apply_reflection, make_gaussian, TimeSeries};
use cqed_cpf::reflection::{resonant_reflections, steady_loss_probs, AtomState};
use cqed_cpf::sweep::{extract_contour, requirement_report};
use cqed_cpf::{
    average_errors, ftqc_parameter, CqedParams, kappa_ext_loss, optimize_kappa_ext, run_sweep, simulate_cpf,
    threshold_boundary, PulseLength, PulseSpec, SpectralAmplitude, SpectralGrid, TwoQubitState,
};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{num, Artifacts};
use crate::CliError;

fn complex_rows<'a>(
    axis: impl IntoIterator<Item = f64> + 'a,
    values: &'a [Complex64],
) -> impl Iterator<Item = Vec<String>> + 'a {
    axis.into_iter()
        .zip(values)
        .map(|(x, v)| vec![num(x), num(v.re), num(v.im)])
}

fn write_series(out: &mut Artifacts, name: &str, series: &TimeSeries) -> Result<(), CliError> {
    out.csv(
        name,
        &["t", "re", "im"],
        complex_rows(series.times.iter().copied(), &series.values),
    )?;
    Ok(())
}

fn write_spectrum(out: &mut Artifacts, name: &str, s: &SpectralAmplitude) -> Result<(), CliError> {
    out.csv(
        name,
        &["delta", "re", "im"],
        complex_rows(s.grid().detunings().collect::<Vec<_>>(), s.values()),
    )?;
    Ok(())
}

pub fn reflect(config: &RunConfig) -> Result<(), CliError> {
    let params = config.cqed_params()?;
    let pulse = config.pulse_length()?;
    let mut out = Artifacts::create("reflect", config)?;
    let (l0, l1) = resonant_reflections(&params);
    let (steady0, steady1) = steady_loss_probs(&params);
    let summary = match pulse {
        PulseLength::LongLimit => json!({
            "params": params,
            "pulse_spec": null,
            "reflection": {"uncoupled": l0, "coupled": l1},
            "loss": {"uncoupled": steady0, "coupled": steady1},
        }),
        PulseLength::Finite(spec) => {
            let grid = SpectralGrid::for_pulse(&params, &spec)?;
            let input = make_gaussian(&spec, &grid)?;
            write_series(&mut out, "input.csv", &input.to_time_domain(0.0))?;
            write_spectrum(&mut out, "spectrum_input.csv", &input)?;
            let mut loss = serde_json::Map::new();
            for (atom, label) in [(AtomState::Uncoupled, "uncoupled"), (AtomState::Coupled, "coupled")] {
                let output = apply_reflection(&input, &params, atom);
                write_series(&mut out, &format!("output_{label}.csv"), &output.to_time_domain(0.0))?;
                write_spectrum(&mut out, &format!("spectrum_{label}.csv"), &output)?;
                loss.insert(label.into(), json!(1.0 - output.norm_sqr() / input.norm_sqr()));
            }
            json!({
                "params": params,
                "pulse_spec": spec,
                "grid": {"points": grid.len(), "delta_max": grid.delta_max()},
                "reflection": {"uncoupled": l0, "coupled": l1},
                "loss": loss,
                "steady_loss": {"uncoupled": steady0, "coupled": steady1},
            })
        }
    };
    println!(
        "loss: uncoupled {} coupled {}",
        num(summary["loss"]["uncoupled"].as_f64().unwrap_or(f64::NAN)),
        num(summary["loss"]["coupled"].as_f64().unwrap_or(f64::NAN)),
    );
    out.json("reflect.json", &summary)?;
    report(&out);
    Ok(())
}

#[derive(Serialize)]
struct DetectProbs {
    h: f64,
    v: f64,
}

#[derive(Serialize)]
struct GateReport {
    params: CqedParams,
    pulse_spec: Option<PulseSpec>,
    p_l: f64,
    p_c: f64,
    p_ftqc: f64,
    /// Detector probabilities for the equal-amplitude input state.
    detect_probs: Option<DetectProbs>,
}

pub fn gate(config: &RunConfig) -> Result<(), CliError> {
    let params = config.cqed_params()?;
    let pulse = config.pulse_length()?;
    let fit = config.threshold_fit()?;
    let mut out = Artifacts::create("gate", config)?;
    let errors = average_errors(&params, &pulse)?;
    let (pulse_spec, detect_probs) = match pulse {
        PulseLength::LongLimit => (None, None),
        PulseLength::Finite(spec) => {
            let grid = SpectralGrid::for_pulse(&params, &spec)?;
            let input = make_gaussian(&spec, &grid)?;
            let outcome = simulate_cpf(&params, &input, &TwoQubitState::uniform())?;
            debug_assert!((gate_loss(&outcome) - errors.p_loss).abs() < 1e-12);
            let probs = DetectProbs {
                h: outcome.detect_prob(Detector::H),
                v: outcome.detect_prob(Detector::V),
            };
            (Some(spec), Some(probs))
        }
    };
    let report_data = GateReport {
        params,
        pulse_spec,
        p_l: errors.p_loss,
        p_c: errors.p_cond,
        p_ftqc: ftqc_parameter(errors.p_loss, errors.p_cond, &fit),
        detect_probs,
    };
    println!(
        "p_l {}  p_c {}  P {}",
        num(report_data.p_l),
        num(report_data.p_c),
        num(report_data.p_ftqc)
    );
    out.json("gate.json", &report_data)?;
    report(&out);
    Ok(())
}

pub fn optimize(config: &RunConfig) -> Result<(), CliError> {
    let template = config.cqed_params()?;
    let pulse = config.pulse_length()?;
    let fit = config.threshold_fit()?;
    let closed = kappa_ext_loss(&template)?;
    let mut out = Artifacts::create("optimize", config)?;
    let result = optimize_kappa_ext(&template, &pulse, config.objective, &fit)?;
    let at_opt = average_errors(&template.with_kappa_ext(result.kappa_ext_opt), &pulse)?;
    let ratio = result.kappa_ext_opt / closed;
    println!(
        "kappa_ext_opt {}  kappa_ext_loss {}  ratio {}{}",
        num(result.kappa_ext_opt),
        num(closed),
        num(ratio),
        if result.unimodal { "" } else { "  (minimum on bracket edge)" }
    );
    out.json(
        "optimize.json",
        &json!({
            "params": template,
            "pulse": pulse,
            "result": result,
            "kappa_ext_loss": closed,
            "ratio": ratio,
            "p_loss": at_opt.p_loss,
            "p_cond": at_opt.p_cond,
            "p_ftqc": ftqc_parameter(at_opt.p_loss, at_opt.p_cond, &fit),
        }),
    )?;
    report(&out);
    Ok(())
}

pub fn sweep(config: &RunConfig) -> Result<(), CliError> {
    let sweep_config = config.sweep_config()?;
    let level = config.sweep.contour_level;
    let mut out = Artifacts::create("sweep", config)?;
    let map = run_sweep(&sweep_config)?;
    out.csv(
        "map.csv",
        &["g", "kappa_int", "kappa_ext", "p_loss", "p_cond", "P"],
        map.iter().map(|p| {
            [p.g, p.kappa_int, p.kappa_ext, p.p_loss, p.p_cond, p.p_ftqc]
                .into_iter()
                .map(num)
                .collect::<Vec<_>>()
        }),
    )?;
    let lines = extract_contour(&map, level);
    out.csv(
        "contour.csv",
        &["line", "g", "kappa_int"],
        lines.iter().enumerate().flat_map(|(k, line)| {
            line.iter()
                .map(move |(g, ki)| vec![k.to_string(), num(*g), num(*ki)])
        }),
    )?;
    let requirements = requirement_report(&map);
    out.json(
        "sweep.json",
        &json!({
            "sweep_config": sweep_config,
            "contour_level": level,
            "contour_lines": lines.len(),
            "holes": map.holes,
            "requirements": requirements,
        }),
    )?;
    println!(
        "{} of {} points evaluated, {} contour line(s) at P = {level}",
        map.iter().count(),
        map.rows() * map.cols(),
        lines.len()
    );
    report(&out);
    Ok(())
}

pub fn cavity_scan_cmd(config: &RunConfig) -> Result<(), CliError> {
    let base = config.cqed_params()?;
    let pulse = config.pulse_length()?;
    let fit = config.threshold_fit()?;
    let ratios = config.scan_ratios()?;
    for &length_ratio in &ratios {
        scale_by_cavity_length(&CavityScaling {
            base_params: base,
            length_ratio,
        })?;
    }
    let mut out = Artifacts::create("cavity-scan", config)?;
    let scan = cavity_scan(&base, &ratios, &pulse, &fit)?;
    out.csv(
        "scan.csv",
        &["ratio", "g", "kappa_int", "kappa_ext_opt", "p_loss", "p_cond", "P"],
        scan.points.iter().map(|p| {
            [p.ratio, p.g, p.kappa_int, p.kappa_ext_opt, p.p_loss, p.p_cond, p.p_ftqc]
                .into_iter()
                .map(num)
                .collect::<Vec<_>>()
        }),
    )?;
    out.json(
        "scan.json",
        &json!({
            "base_params": base,
            "pulse": pulse,
            "fit": scan.fit,
            "fit_error": scan.fit_error,
        }),
    )?;
    match (&scan.fit, &scan.fit_error) {
        (Some(f), _) => println!("P = {} r^{} + {}", num(f.a), num(f.b), num(f.c)),
        (None, Some(e)) => println!("power-law fit failed: {e}"),
        (None, None) => {}
    }
    report(&out);
    Ok(())
}

pub fn threshold(config: &RunConfig) -> Result<(), CliError> {
    let fit = config.threshold_fit()?;
    let p_cond = threshold_boundary(config.p_loss, &fit)?;
    let mut out = Artifacts::create("threshold", config)?;
    out.json(
        "threshold.json",
        &json!({"p_loss": config.p_loss, "p_cond_threshold": p_cond, "fit": fit}),
    )?;
    println!("{}", num(p_cond));
    Ok(())
}

fn report(out: &Artifacts) {
    for path in out.written() {
        eprintln!("wrote {}", path.display());
    }
}
