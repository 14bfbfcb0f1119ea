//! Error maps over the `(g, kappa_int)` plane and their `P = 1` contours.
//!
//! Rows of a map follow `kappa_int`, columns follow `g`; both axes are
//! log-spaced. Rows are evaluated in parallel and assembled row-major, so the
//! output does not depend on scheduling.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};
use crate::ftqc::{ftqc_parameter, ThresholdFit};
use crate::gate::average_errors;
use crate::optimizer::{kappa_ext_loss, optimize_kappa_ext_seeded, Objective};
use crate::pulse::PulseLength;
use crate::reflection::CqedParams;

/// Fraction of grid points that must succeed for a sweep to be returned.
pub const MIN_SUCCESS_FRACTION: f64 = 0.99;
/// Relative improvement below which lowering `kappa_int` counts as saturated.
pub const SATURATION_GAIN: f64 = 0.01;
/// Typical experimental `(g, kappa_int)` pairs checked in every report.
pub const TYPICAL_POINTS: [(f64, f64); 2] = [(2.5, 0.067), (5.36, 0.04)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let grid = Self { min, max, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min < self.max && self.max.is_finite()) || self.points < 2 {
            return Err(CpfError::InvalidConfig(format!(
                "log grid needs 0 < min < max and at least 2 points: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.log10(), self.max.log10());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| match k {
                0 => self.min,
                k if k + 1 == self.points => self.max,
                k => 10f64.powf(lo + (hi - lo) * k as f64 / last),
            })
            .collect()
    }
}

/// How `kappa_ext` is chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KextPolicy {
    /// `kappa_int sqrt(1 + 2 C_int)`.
    LossFormula,
    /// Numerical minimum of `P`.
    MinimizeP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub g_range: LogGrid,
    pub kappa_int_range: LogGrid,
    pub pulse: PulseLength,
    pub kext_policy: KextPolicy,
    pub threshold_fit: ThresholdFit,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            g_range: LogGrid {
                min: 1.0,
                max: 1e3,
                points: 40,
            },
            kappa_int_range: LogGrid {
                min: 1e-3,
                max: 1e3,
                points: 40,
            },
            pulse: PulseLength::LongLimit,
            kext_policy: KextPolicy::LossFormula,
            threshold_fit: ThresholdFit::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.g_range.validate()?;
        self.kappa_int_range.validate()?;
        self.threshold_fit.validate()?;
        if let PulseLength::Finite(spec) = self.pulse {
            if !(spec.width > 0.0 && spec.width.is_finite()) {
                return Err(CpfError::InvalidConfig(format!(
                    "pulse width {}",
                    spec.width
                )));
            }
        }
        Ok(())
    }
}

/// One evaluated grid point; rates in units of `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub g: f64,
    pub kappa_int: f64,
    pub kappa_ext: f64,
    pub p_loss: f64,
    pub p_cond: f64,
    pub p_ftqc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepHole {
    pub row: usize,
    pub col: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMap {
    pub config: SweepConfig,
    pub g_values: Vec<f64>,
    pub kappa_int_values: Vec<f64>,
    /// Row-major, `rows = kappa_int`, `cols = g`; `None` marks a hole.
    pub points: Vec<Option<MapPoint>>,
    pub holes: Vec<SweepHole>,
}

impl ErrorMap {
    pub fn rows(&self) -> usize {
        self.kappa_int_values.len()
    }

    pub fn cols(&self) -> usize {
        self.g_values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&MapPoint> {
        self.points[row * self.cols() + col].as_ref()
    }

    /// `P` at every grid point, NaN at holes.
    pub fn ftqc_values(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| {
                (0..self.cols())
                    .map(|c| self.get(r, c).map_or(f64::NAN, |p| p.p_ftqc))
                    .collect()
            })
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MapPoint> {
        self.points.iter().flatten()
    }
}

/// Evaluates a single `(g, kappa_int)` point. `seed` is a starting guess for
/// the P search and is ignored by the loss formula.
pub fn evaluate_point(
    g: f64,
    kappa_int: f64,
    pulse: &PulseLength,
    policy: KextPolicy,
    fit: &ThresholdFit,
    seed: Option<f64>,
) -> Result<MapPoint> {
    let template = CqedParams::with_unit_gamma(g, 1.0, kappa_int)?;
    let loss_optimal = kappa_ext_loss(&template)?;
    let kappa_ext = match policy {
        KextPolicy::LossFormula => loss_optimal,
        KextPolicy::MinimizeP => {
            optimize_kappa_ext_seeded(&template, pulse, Objective::FtqcP, fit, seed)?.kappa_ext_opt
        }
    };
    let errors = average_errors(&template.with_kappa_ext(kappa_ext), pulse)?;
    Ok(MapPoint {
        g,
        kappa_int,
        kappa_ext,
        p_loss: errors.p_loss,
        p_cond: errors.p_cond,
        p_ftqc: ftqc_parameter(errors.p_loss, errors.p_cond, fit),
    })
}

/// Evaluates the whole grid in the current rayon pool.
///
/// Points of a row are solved in order of increasing `g`, each P search
/// seeded from its left neighbour.
pub fn run_sweep(config: &SweepConfig) -> Result<ErrorMap> {
    config.validate()?;
    let g_values = config.g_range.values();
    let kappa_int_values = config.kappa_int_range.values();

    let rows: Vec<Vec<Result<MapPoint>>> = kappa_int_values
        .par_iter()
        .map(|&kappa_int| {
            let mut seed = None;
            g_values
                .iter()
                .map(|&g| {
                    let point = evaluate_point(
                        g,
                        kappa_int,
                        &config.pulse,
                        config.kext_policy,
                        &config.threshold_fit,
                        seed,
                    );
                    seed = point.as_ref().ok().map(|p| p.kappa_ext);
                    point
                })
                .collect()
        })
        .collect();

    let total = g_values.len() * kappa_int_values.len();
    let mut points = Vec::with_capacity(total);
    let mut holes = Vec::new();
    for (row, results) in rows.into_iter().enumerate() {
        for (col, result) in results.into_iter().enumerate() {
            match result {
                Ok(p) => points.push(Some(p)),
                Err(e) => {
                    holes.push(SweepHole {
                        row,
                        col,
                        error: e.to_string(),
                    });
                    points.push(None);
                }
            }
        }
    }
    if ((total - holes.len()) as f64) < MIN_SUCCESS_FRACTION * total as f64 {
        return Err(CpfError::SweepFailed {
            failed: holes.len(),
            total,
        });
    }
    Ok(ErrorMap {
        config: *config,
        g_values,
        kappa_int_values,
        points,
        holes,
    })
}

// Cell edges: horizontal edges run along g at a fixed row, vertical edges
// along kappa_int at a fixed column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    Horizontal(usize, usize),
    Vertical(usize, usize),
}

/// Level set of `P` by marching squares in `(log10 g, log10 kappa_int)`.
///
/// Returns ordered polylines in linear `(g, kappa_int)` coordinates. Cells
/// touching a hole are skipped; saddle cells are resolved with the mean of
/// the four corners.
pub fn extract_contour(map: &ErrorMap, level: f64) -> Vec<Vec<(f64, f64)>> {
    let values = map.ftqc_values();
    let xs: Vec<f64> = map.g_values.iter().map(|g| g.log10()).collect();
    let ys: Vec<f64> = map.kappa_int_values.iter().map(|k| k.log10()).collect();
    let (rows, cols) = (ys.len(), xs.len());
    if rows < 2 || cols < 2 {
        return Vec::new();
    }

    let crossing = |edge: Edge| -> (f64, f64) {
        let ((r0, c0), (r1, c1)) = match edge {
            Edge::Horizontal(r, c) => ((r, c), (r, c + 1)),
            Edge::Vertical(r, c) => ((r, c), (r + 1, c)),
        };
        let (v0, v1) = (values[r0][c0], values[r1][c1]);
        let t = ((level - v0) / (v1 - v0)).clamp(0.0, 1.0);
        let x = xs[c0] + t * (xs[c1] - xs[c0]);
        let y = ys[r0] + t * (ys[r1] - ys[r0]);
        (x, y)
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let corners = [
                values[r][c],
                values[r][c + 1],
                values[r + 1][c + 1],
                values[r + 1][c],
            ];
            if corners.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let case = corners
                .iter()
                .enumerate()
                .fold(0u8, |acc, (k, v)| acc | (((*v >= level) as u8) << k));
            // Edges in corner order: bottom, right, top, left.
            let bottom = Edge::Horizontal(r, c);
            let right = Edge::Vertical(r, c + 1);
            let top = Edge::Horizontal(r + 1, c);
            let left = Edge::Vertical(r, c);
            let centre_high = corners.iter().sum::<f64>() / 4.0 >= level;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if centre_high {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if centre_high {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut chains: Vec<Vec<Edge>> = Vec::new();

    let follow = |start_seg: usize, start_edge: Edge, used: &mut Vec<bool>| -> Vec<Edge> {
        let mut chain = vec![start_edge];
        let (mut seg, mut at) = (start_seg, start_edge);
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            chain.push(next);
            at = next;
            match by_edge[&at].iter().find(|s| !used[**s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        chain
    };

    // Open chains start at an edge used by a single segment; ordering by
    // segment index keeps the output deterministic.
    for k in 0..segments.len() {
        if used[k] {
            continue;
        }
        let (a, b) = segments[k];
        if by_edge[&a].len() == 1 {
            chains.push(follow(k, a, &mut used));
        } else if by_edge[&b].len() == 1 {
            chains.push(follow(k, b, &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            chains.push(follow(k, segments[k].0, &mut used));
        }
    }

    chains
        .into_iter()
        .map(|chain| {
            chain
                .into_iter()
                .map(|e| {
                    let (x, y) = crossing(e);
                    (10f64.powf(x), 10f64.powf(y))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowRequirement {
    pub kappa_int: f64,
    /// Smallest `g` with `P <= 1`, interpolated in `log g`; `None` when no
    /// grid point of the row is fault tolerant.
    pub min_g: Option<f64>,
    /// The row is already fault tolerant at the smallest grid `g`, so the
    /// true requirement may be lower.
    pub at_grid_edge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSaturation {
    pub g: f64,
    /// Largest `kappa_int` below which `P` improves by less than
    /// [`SATURATION_GAIN`] anywhere on the grid.
    pub kappa_int: f64,
    /// False when the saturation point is the smallest grid `kappa_int`,
    /// i.e. `P` still decreases at the edge of the map.
    pub saturates: bool,
    pub p_ftqc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalPoint {
    pub g: f64,
    pub kappa_int: f64,
    pub p_ftqc: Option<f64>,
    pub fault_tolerant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementReport {
    pub rows: Vec<RowRequirement>,
    pub columns: Vec<ColumnSaturation>,
    pub typical_points: Vec<TypicalPoint>,
    pub all_fault_tolerant: bool,
    pub none_fault_tolerant: bool,
}

impl RequirementReport {
    pub fn min_g_at(&self, kappa_int: f64) -> Option<f64> {
        self.rows
            .iter()
            .min_by(|a, b| {
                (a.kappa_int.ln() - kappa_int.ln())
                    .abs()
                    .total_cmp(&(b.kappa_int.ln() - kappa_int.ln()).abs())
            })
            .and_then(|r| r.min_g)
    }
}

/// Fault-tolerance requirements read off an error map.
pub fn requirement_report(map: &ErrorMap) -> RequirementReport {
    let values = map.ftqc_values();

    let rows = map
        .kappa_int_values
        .iter()
        .enumerate()
        .map(|(r, &kappa_int)| {
            let row = &values[r];
            let mut min_g = None;
            let mut at_grid_edge = false;
            let mut prev: Option<(f64, f64)> = None;
            for (c, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    prev = None;
                    continue;
                }
                let x = map.g_values[c].ln();
                if p <= 1.0 {
                    min_g = Some(match prev {
                        Some((x0, p0)) => (x0 + (1.0 - p0) / (p - p0) * (x - x0)).exp(),
                        None => {
                            at_grid_edge = c == 0;
                            map.g_values[c]
                        }
                    });
                    break;
                }
                prev = Some((x, p));
            }
            RowRequirement {
                kappa_int,
                min_g,
                at_grid_edge,
            }
        })
        .collect();

    let columns = map
        .g_values
        .iter()
        .enumerate()
        .filter_map(|(c, &g)| {
            let column: Vec<(usize, f64)> = (0..map.rows())
                .map(|r| (r, values[r][c]))
                .filter(|(_, p)| p.is_finite())
                .collect();
            let first = *column.first()?;
            let mut best_below = f64::INFINITY;
            let mut found = first;
            for &(r, p) in &column {
                best_below = best_below.min(p);
                if best_below >= (1.0 - SATURATION_GAIN) * p {
                    found = (r, p);
                }
            }
            Some(ColumnSaturation {
                g,
                kappa_int: map.kappa_int_values[found.0],
                saturates: found.0 != first.0,
                p_ftqc: found.1,
            })
        })
        .collect();

    let typical_points = TYPICAL_POINTS
        .iter()
        .map(|&(g, kappa_int)| {
            let p = evaluate_point(
                g,
                kappa_int,
                &map.config.pulse,
                map.config.kext_policy,
                &map.config.threshold_fit,
                None,
            )
            .ok()
            .map(|p| p.p_ftqc);
            TypicalPoint {
                g,
                kappa_int,
                p_ftqc: p,
                fault_tolerant: p.map(|p| p <= 1.0),
            }
        })
        .collect();

    let finite: Vec<f64> = values.iter().flatten().copied().filter(|p| p.is_finite()).collect();
    RequirementReport {
        rows,
        columns,
        typical_points,
        all_fault_tolerant: finite.iter().all(|p| *p <= 1.0),
        none_fault_tolerant: finite.iter().all(|p| *p > 1.0),
    }
}

/// Smallest `g` in `[g_lo, g_hi]` with `P <= 1` at fixed `kappa_int`,
/// by bisection in `log g` to a relative width of `1e-4`. `P` is assumed to
/// decrease with `g`. Returns `None` if `P > 1` at `g_hi`.
pub fn minimum_coupling(
    kappa_int: f64,
    pulse: &PulseLength,
    policy: KextPolicy,
    fit: &ThresholdFit,
    g_lo: f64,
    g_hi: f64,
) -> Result<Option<f64>> {
    if !(g_lo > 0.0 && g_lo < g_hi) {
        return Err(CpfError::InvalidConfig(format!(
            "coupling bracket [{g_lo}, {g_hi}]"
        )));
    }
    let p = |g: f64| evaluate_point(g, kappa_int, pulse, policy, fit, None).map(|m| m.p_ftqc);
    if p(g_hi)? > 1.0 {
        return Ok(None);
    }
    if p(g_lo)? <= 1.0 {
        return Ok(Some(g_lo));
    }
    let (mut lo, mut hi) = (g_lo.ln(), g_hi.ln());
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if p(mid.exp())? <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_map(values: impl Fn(f64, f64) -> f64, n: usize) -> ErrorMap {
        let config = SweepConfig {
            g_range: LogGrid::new(1.0, 1e3, n).unwrap(),
            kappa_int_range: LogGrid::new(1e-3, 1e3, n).unwrap(),
            ..SweepConfig::default()
        };
        let g_values = config.g_range.values();
        let kappa_int_values = config.kappa_int_range.values();
        let mut points = Vec::new();
        for &k in &kappa_int_values {
            for &g in &g_values {
                points.push(Some(MapPoint {
                    g,
                    kappa_int: k,
                    kappa_ext: 1.0,
                    p_loss: 0.0,
                    p_cond: 0.0,
                    p_ftqc: values(g, k),
                }));
            }
        }
        ErrorMap {
            config,
            g_values,
            kappa_int_values,
            points,
            holes: Vec::new(),
        }
    }

    #[test]
    fn log_grid_end_points_are_exact() {
        let v = LogGrid::new(1e-3, 1e3, 7).unwrap().values();
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[6], 1e3);
        assert!((v[3] - 1.0).abs() < 1e-12);
        assert!(LogGrid::new(1.0, 1.0, 5).is_err());
        assert!(LogGrid::new(0.0, 1.0, 5).is_err());
        assert!(LogGrid::new(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn constant_map_has_no_contour() {
        let map = synthetic_map(|_, _| 0.5, 6);
        assert!(extract_contour(&map, 1.0).is_empty());
        let report = requirement_report(&map);
        assert!(report.all_fault_tolerant);
        assert!(report.rows.iter().all(|r| r.at_grid_edge));
    }

    #[test]
    fn power_law_contour_is_recovered() {
        // P = 2000 kappa_int / g^2: level 1 is kappa_int = g^2 / 2000.
        let map = synthetic_map(|g, k| 2000.0 * k / (g * g), 25);
        let lines = extract_contour(&map, 1.0);
        assert_eq!(lines.len(), 1);
        let line = &lines[0];
        assert!(line.len() > 10);
        // Linear interpolation of P between nodes a quarter decade apart.
        for &(g, k) in line {
            assert!((k * 2000.0 / (g * g) - 1.0).abs() < 0.1);
        }
        // Ordered along the curve.
        let increasing = line.windows(2).all(|w| w[1].0 >= w[0].0);
        let decreasing = line.windows(2).all(|w| w[1].0 <= w[0].0);
        assert!(increasing || decreasing);
    }

    #[test]
    fn closed_contour_is_a_loop() {
        let map = synthetic_map(
            |g, k| (g.log10() - 1.5).powi(2) + k.log10().powi(2),
            21,
        );
        let lines = extract_contour(&map, 1.0);
        assert_eq!(lines.len(), 1);
        let line = &lines[0];
        assert_eq!(line.first(), line.last());
    }

    #[test]
    fn holes_are_skipped() {
        let mut map = synthetic_map(|g, k| 2000.0 * k / (g * g), 10);
        map.points[12] = None;
        let lines = extract_contour(&map, 1.0);
        assert!(!lines.is_empty());
        assert!(lines.iter().flatten().all(|(g, k)| g.is_finite() && k.is_finite()));
    }

    #[test]
    fn report_interpolates_the_requirement() {
        let map = synthetic_map(|g, k| 2000.0 * k / (g * g), 31);
        let report = requirement_report(&map);
        let expected = (2000.0f64).sqrt();
        let got = report.min_g_at(1.0).unwrap();
        assert!((got / expected - 1.0).abs() < 0.05, "{got}");
        let last = report.rows.last().unwrap();
        assert_eq!(last.min_g, None);
        assert!(!report.all_fault_tolerant && !report.none_fault_tolerant);
    }

    #[test]
    fn saturation_is_detected() {
        // P stops improving below kappa_int = 0.1.
        let map = synthetic_map(|_, k| 1.0 + k.max(0.1), 13);
        let report = requirement_report(&map);
        for col in &report.columns {
            assert!(col.saturates);
            assert!((col.kappa_int.log10() + 1.0).abs() < 0.6, "{}", col.kappa_int);
        }
        let steep = synthetic_map(|_, k| k, 13);
        assert!(requirement_report(&steep).columns.iter().all(|c| !c.saturates));
    }

    #[test]
    fn small_sweep_is_consistent_and_deterministic() {
        let config = SweepConfig {
            g_range: LogGrid::new(10.0, 300.0, 4).unwrap(),
            kappa_int_range: LogGrid::new(0.1, 10.0, 3).unwrap(),
            pulse: PulseLength::finite(3.0).unwrap(),
            kext_policy: KextPolicy::MinimizeP,
            threshold_fit: ThresholdFit::default(),
        };
        let a = run_sweep(&config).unwrap();
        let b = run_sweep(&config).unwrap();
        assert_eq!(a, b);
        assert!(a.holes.is_empty());
        for p in a.iter() {
            assert_eq!(
                p.p_ftqc,
                ftqc_parameter(p.p_loss, p.p_cond, &config.threshold_fit)
            );
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut config = SweepConfig::default();
        config.g_range.points = 1;
        assert!(run_sweep(&config).is_err());
    }
}
