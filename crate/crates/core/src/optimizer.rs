//! Choice of the external coupling rate and cavity-length scans.

use std::cell::{Cell, RefCell};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};
use crate::ftqc::{ftqc_parameter, ThresholdFit};
use crate::gate::{average_errors, AverageErrors};
use crate::pulse::{apply_reflection, make_gaussian, PulseLength, SpectralGrid};
use crate::reflection::{resonant_reflections, AtomState, CqedParams};

/// Default bracket half-width (multiplicative) around the loss-optimal coupling.
pub const BRACKET_FACTOR: f64 = 100.0;
/// Factor applied to the bracket on the single widening retry.
pub const WIDEN_FACTOR: f64 = 100.0;
/// Relative width at which the search stops.
pub const RELATIVE_TOLERANCE: f64 = 1e-4;
const SEED_FACTOR: f64 = 10.0;

/// Quantity minimized over `kappa_ext`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Single-reflection photon loss averaged over the two atom states,
    /// see [`reflection_loss`].
    Loss,
    /// Fault-tolerance error parameter `P`.
    FtqcP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub kappa_ext_opt: f64,
    pub objective_value: f64,
    pub objective_kind: Objective,
    /// Final search interval in `kappa_ext`.
    pub bracket: [f64; 2],
    pub evaluations: usize,
    /// False when the minimum sat on a bracket edge even after widening, or
    /// when the loss-optimal coupling beat the search result.
    pub unimodal: bool,
}

/// External coupling that minimizes photon loss in the long-pulse limit,
/// `kappa_int sqrt(1 + 2 C_int)`.
///
/// It is the point where `L0 = -L1`. For `C_int < 3 + 2 sqrt 3` the two loss
/// peaks overlap and this point is a local maximum of [`reflection_loss`]
/// instead.
pub fn kappa_ext_loss(params: &CqedParams) -> Result<f64> {
    if params.kappa_int <= 0.0 {
        return Err(CpfError::LosslessCavity);
    }
    Ok(params.kappa_int * (1.0 + 2.0 * params.internal_cooperativity()).sqrt())
}

/// `1 - (|L0|^2 + |L1|^2) / 2`, integrated over the pulse spectrum for a
/// finite pulse.
///
/// This is the loss that `kappa_ext_loss` minimizes exactly. The gate-level
/// loss is not used here: it vanishes as `kappa_ext -> 0`, where the photon
/// is reflected off the input mirror without entering the cavity.
pub fn reflection_loss(params: &CqedParams, pulse: &PulseLength) -> Result<f64> {
    params.validate()?;
    match pulse {
        PulseLength::LongLimit => {
            let (l0, l1) = resonant_reflections(params);
            Ok(1.0 - 0.5 * (l0 * l0 + l1 * l1))
        }
        PulseLength::Finite(spec) => {
            let grid = SpectralGrid::for_pulse(params, spec)?;
            let input = make_gaussian(spec, &grid)?;
            let kept: f64 = [AtomState::Uncoupled, AtomState::Coupled]
                .iter()
                .map(|&atom| apply_reflection(&input, params, atom).norm_sqr())
                .sum();
            Ok(1.0 - 0.5 * kept / input.norm_sqr())
        }
    }
}

/// Evaluates `objective` for `params` (with its own `kappa_ext`).
pub fn evaluate_objective(
    params: &CqedParams,
    pulse: &PulseLength,
    objective: Objective,
    fit: &ThresholdFit,
) -> Result<f64> {
    match objective {
        Objective::Loss => reflection_loss(params, pulse),
        Objective::FtqcP => {
            let AverageErrors { p_loss, p_cond } = average_errors(params, pulse)?;
            Ok(ftqc_parameter(p_loss, p_cond, fit))
        }
    }
}

struct Search {
    x: f64,
    fx: f64,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Search {
    fn interior(&self, tol: f64) -> bool {
        self.x - self.lo > 2.0 * tol
            && self.hi - self.x > 2.0 * tol
            && self.fx <= self.f_lo
            && self.fx <= self.f_hi
    }
}

/// Golden-section minimization of `f` on `[lo, hi]` down to width `tol`.
fn golden_section(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Search {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (f_lo, f_hi) = (f(lo), f(hi));
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    Search {
        x,
        fx,
        lo,
        hi,
        f_lo,
        f_hi,
    }
}

/// Minimizes `objective` over `kappa_ext` with the other rates of `template`.
///
/// The search runs on `ln kappa_ext` over
/// `[kappa_ext_loss / 100, 100 kappa_ext_loss]`, widened by another factor
/// of 100 if the minimum lands on an edge. For [`Objective::Loss`] the
/// bracket is clipped to `[kappa_int, kappa_int + g^2/gamma]`.
pub fn optimize_kappa_ext(
    template: &CqedParams,
    pulse: &PulseLength,
    objective: Objective,
    fit: &ThresholdFit,
) -> Result<OptimizationResult> {
    optimize_kappa_ext_seeded(template, pulse, objective, fit, None)
}

/// As [`optimize_kappa_ext`], first trying a narrow bracket around `seed`.
/// The default bracket is used whenever the seeded minimum touches an edge.
pub fn optimize_kappa_ext_seeded(
    template: &CqedParams,
    pulse: &PulseLength,
    objective: Objective,
    fit: &ThresholdFit,
    seed: Option<f64>,
) -> Result<OptimizationResult> {
    template.validate()?;
    let anchor = kappa_ext_loss(&template.normalized())?;
    let gamma = template.gamma;

    let evaluations = Cell::new(0usize);
    let first_error: RefCell<Option<CpfError>> = RefCell::new(None);
    let best = Cell::new((f64::NAN, f64::INFINITY));
    let mut f = |u: f64| -> f64 {
        evaluations.set(evaluations.get() + 1);
        let kappa_ext = u.exp() * gamma;
        match evaluate_objective(&template.with_kappa_ext(kappa_ext), pulse, objective, fit) {
            Ok(v) if v.is_finite() => {
                if v < best.get().1 {
                    best.set((u, v));
                }
                v
            }
            Ok(_) => f64::INFINITY,
            Err(e) => {
                first_error.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        }
    };

    let tol = (1.0 + RELATIVE_TOLERANCE).ln();
    let centre = anchor.ln();
    let default_half = BRACKET_FACTOR.ln();
    // The reflection loss peaks at kappa_int and kappa_int + g^2/gamma and
    // falls to zero beyond them, where the photon no longer interacts with
    // the atom; its search stays between the peaks.
    let (floor, ceiling) = match objective {
        Objective::Loss => {
            let p = template.normalized();
            (p.kappa_int.ln(), (p.kappa_int + p.g * p.g).ln())
        }
        Objective::FtqcP => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    if let Some(seed) = seed.filter(|s| *s > 0.0 && s.is_finite()) {
        let s = (seed / gamma).ln();
        candidates.push((
            (s - SEED_FACTOR.ln()).max(centre - default_half),
            (s + SEED_FACTOR.ln()).min(centre + default_half),
        ));
    }
    candidates.push((centre - default_half, centre + default_half));
    let wide = default_half + WIDEN_FACTOR.ln();
    candidates.push((centre - wide, centre + wide));
    let attempts: Vec<(f64, f64)> = candidates
        .into_iter()
        .map(|(lo, hi)| (lo.max(floor), hi.min(ceiling)))
        .filter(|(lo, hi)| hi - lo > 4.0 * tol)
        .collect();

    let mut result = None;
    for &(lo, hi) in &attempts {
        let search = golden_section(&mut f, lo, hi, tol);
        if search.interior(tol) {
            result = Some((search.x, search.fx, lo, hi, true));
            break;
        }
    }
    let (mut u, mut value, lo, hi, mut unimodal) = match (result, attempts.last()) {
        (Some(r), _) => r,
        (None, Some(&(lo, hi))) => {
            let (u, v) = best.get();
            (u, v, lo, hi, false)
        }
        // Coinciding loss peaks (g = 0): the closed form is the only candidate.
        (None, None) => (centre, f64::INFINITY, centre, centre, true),
    };
    let at_anchor = f(centre);
    if at_anchor < value {
        // A distant anchor beating the search means the objective has
        // another basin.
        unimodal &= (u - centre).abs() <= 10.0 * tol;
        u = centre;
        value = at_anchor;
    }
    if !value.is_finite() {
        return Err(first_error.into_inner().unwrap_or_else(|| {
            CpfError::InvalidParams("objective is not finite anywhere in the bracket".into())
        }));
    }
    Ok(OptimizationResult {
        kappa_ext_opt: u.exp() * gamma,
        objective_value: value,
        objective_kind: objective,
        bracket: [lo.exp() * gamma, hi.exp() * gamma],
        evaluations: evaluations.get(),
        unimodal,
    })
}

/// Reference parameters and a cavity-length ratio `L_c / L_c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityScaling {
    pub base_params: CqedParams,
    pub length_ratio: f64,
}

/// Rescales the rates for a cavity of a different length.
///
/// `g` scales as `1/sqrt(L)` (mode volume), `kappa_int` and `kappa_ext` as
/// `1/L` (fixed mirror losses and transmittance), `gamma` is unchanged.
pub fn scale_by_cavity_length(scaling: &CavityScaling) -> Result<CqedParams> {
    let r = scaling.length_ratio;
    if !(r > 0.0 && r.is_finite()) {
        return Err(CpfError::InvalidConfig(format!("length ratio {r}")));
    }
    let base = &scaling.base_params;
    CqedParams::new(
        base.g / r.sqrt(),
        base.kappa_ext / r,
        base.kappa_int / r,
        base.gamma,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub ratio: f64,
    pub g: f64,
    pub kappa_int: f64,
    pub kappa_ext_opt: f64,
    pub p_loss: f64,
    pub p_cond: f64,
    pub p_ftqc: f64,
}

/// Least-squares fit `P = a ratio^b + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub residual_sum_squares: f64,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.powf(self.b) + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityScan {
    pub points: Vec<ScanPoint>,
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
}

/// Ratios `10^lo ... 10^hi` with `per_decade` points per decade.
pub fn log_ratios(lo_exp: f64, hi_exp: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi_exp - lo_exp) * per_decade as f64).round() as usize;
    (0..=n)
        .map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / n.max(1) as f64))
        .collect()
}

/// Optimizes `kappa_ext` for the P objective at every cavity length and
/// fits the power law. Points are evaluated in parallel in the current rayon
/// pool; their order follows `ratios`.
pub fn cavity_scan(
    base: &CqedParams,
    ratios: &[f64],
    pulse: &PulseLength,
    fit: &ThresholdFit,
) -> Result<CavityScan> {
    base.validate()?;
    if ratios.len() < 5 || ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(CpfError::InvalidConfig(
            "cavity scan needs at least 5 positive length ratios".into(),
        ));
    }
    let (min, max) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    if max / min < 100.0 * (1.0 - 1e-9) {
        return Err(CpfError::InvalidConfig(
            "cavity scan ratios must span at least two decades".into(),
        ));
    }

    let points = ratios
        .par_iter()
        .map(|&ratio| {
            let params = scale_by_cavity_length(&CavityScaling {
                base_params: *base,
                length_ratio: ratio,
            })?;
            let opt = optimize_kappa_ext(&params, pulse, Objective::FtqcP, fit)?;
            let tuned = params.with_kappa_ext(opt.kappa_ext_opt);
            let errors = average_errors(&tuned, pulse)?;
            Ok(ScanPoint {
                ratio,
                g: params.g,
                kappa_int: params.kappa_int,
                kappa_ext_opt: opt.kappa_ext_opt,
                p_loss: errors.p_loss,
                p_cond: errors.p_cond,
                p_ftqc: ftqc_parameter(errors.p_loss, errors.p_cond, fit),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.p_ftqc).collect();
    let (fit, fit_error) = match fit_power_law(&xs, &ys) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(CavityScan {
        points,
        fit,
        fit_error,
    })
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [
        [m[0][0], m[0][1], m[0][2], rhs[0]],
        [m[1][0], m[1][1], m[1][2], rhs[1]],
        [m[2][0], m[2][1], m[2][2], rhs[2]],
    ];
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][3] - tail) / a[row][row];
    }
    Some(x)
}

/// Unweighted Levenberg-Marquardt fit of `y = a x^b + c`, started from
/// `(y(max x), 0.5, y(min x))`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(CpfError::FitFailed("need at least three points".into()));
    }
    let imax = (0..xs.len()).max_by(|&i, &j| xs[i].total_cmp(&xs[j])).unwrap();
    let imin = (0..xs.len()).min_by(|&i, &j| xs[i].total_cmp(&xs[j])).unwrap();
    let mut theta = [ys[imax], 0.5, ys[imin]];

    let rss = |t: &[f64; 3]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (t[0] * x.powf(t[1]) + t[2] - y).powi(2))
            .sum()
    };
    let mut current = rss(&theta);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < 500 {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (x, y) in xs.iter().zip(ys) {
            let xb = x.powf(theta[1]);
            let row = [xb, theta[0] * xb * x.ln(), 1.0];
            let r = theta[0] * xb + theta[2] - y;
            for i in 0..3 {
                jtr[i] += row[i] * r;
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let det_scale = jtj[0][0] * jtj[1][1] * jtj[2][2];
        if !(det_scale > 0.0) || solve3(jtj, [0.0, 0.0, 0.0]).is_none() {
            return Err(CpfError::FitFailed("singular Jacobian".into()));
        }
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i];
        }
        let step = solve3(damped, jtr.map(|v| -v))
            .ok_or_else(|| CpfError::FitFailed("singular normal equations".into()))?;
        let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
        let trial_rss = rss(&trial);
        if trial_rss.is_finite() && trial_rss <= current {
            let small = step
                .iter()
                .zip(&theta)
                .all(|(s, t)| s.abs() <= 1e-12 * (t.abs() + 1e-12));
            let improvement = current - trial_rss;
            theta = trial;
            current = trial_rss;
            lambda = (lambda / 10.0).max(1e-15);
            if small || improvement <= 1e-15 * current.max(1e-300) {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e15 {
                break;
            }
        }
    }
    if !theta.iter().all(|t| t.is_finite()) {
        return Err(CpfError::FitFailed("diverged".into()));
    }
    Ok(PowerLawFit {
        a: theta[0],
        b: theta[1],
        c: theta[2],
        residual_sum_squares: current,
        iterations,
    })
}
