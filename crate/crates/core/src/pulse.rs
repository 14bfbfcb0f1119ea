//! Single-photon pulses on a uniform detuning grid.
//!
//! Spectral amplitudes use the convention
//! `f(t) = (2 pi)^{-1/2} \int F(delta) e^{-i delta t} d delta`, so a cavity
//! response evaluated at detuning `delta` multiplies `F(delta)` directly.
//! Propagation through the linear single-excitation system is then exact
//! up to discretization.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};
use crate::reflection::{reflection, AtomState, CqedParams};

/// Half-span of the detuning axis in units of the inverse pulse width.
/// The Gaussian amplitude at the edge is `exp(-72)`.
pub const SPECTRAL_SPAN: f64 = 12.0;
/// Pulse extent on either side of its centre, in pulse widths.
pub const PULSE_EXTENT: f64 = 6.0;
/// Ring-down allowance in units of the slowest cavity decay time.
pub const RING_DOWN: f64 = 36.0;
/// Largest grid the automatic sizing will produce.
pub const MAX_GRID_POINTS: usize = 1 << 24;
const MIN_GRID_POINTS: usize = 64;

/// Gaussian single-photon input pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// 1/e half-width of the temporal amplitude (units of 1/gamma).
    pub width: f64,
    /// Arrival time of the pulse centre (units of 1/gamma).
    pub center: f64,
}

impl PulseSpec {
    /// Pulse centred at `6 * width`, so the amplitude at `t = 0` is negligible.
    pub fn new(width: f64) -> Result<Self> {
        Self::with_center(width, PULSE_EXTENT * width)
    }

    pub fn with_center(width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(CpfError::InvalidConfig(format!(
                "pulse width must be positive, got {width}"
            )));
        }
        if !center.is_finite() {
            return Err(CpfError::InvalidConfig(format!("pulse centre {center}")));
        }
        Ok(Self { width, center })
    }

    /// Temporal amplitude `(sqrt(pi) W)^{-1/2} exp(-(t - t0)^2 / (2 W^2))`.
    pub fn amplitude(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        (PI.sqrt() * self.width).powf(-0.5) * (-0.5 * x * x).exp()
    }

    /// Analytic Fourier transform of [`PulseSpec::amplitude`].
    pub fn spectrum(&self, delta: f64) -> Complex64 {
        let x = delta * self.width;
        let magnitude = PI.powf(-0.25) * self.width.sqrt() * (-0.5 * x * x).exp();
        Complex64::from_polar(magnitude, delta * self.center)
    }
}

/// Pulse length used when evaluating gate errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseLength {
    /// Monochromatic limit, evaluated with the closed-form resonant expressions.
    LongLimit,
    /// Gaussian pulse propagated on a spectral grid.
    Finite(PulseSpec),
}

impl PulseLength {
    pub fn finite(width: f64) -> Result<Self> {
        Ok(PulseLength::Finite(PulseSpec::new(width)?))
    }
}

/// Uniform detuning grid `delta_k = -delta_max + k * spacing`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    n_points: usize,
    delta_max: f64,
}

impl SpectralGrid {
    pub fn new(n_points: usize, delta_max: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(CpfError::InvalidGrid(format!(
                "{n_points} points is not a power of two >= 2"
            )));
        }
        if !(delta_max > 0.0 && delta_max.is_finite()) {
            return Err(CpfError::InvalidGrid(format!("delta_max = {delta_max}")));
        }
        Ok(Self {
            n_points,
            delta_max,
        })
    }

    /// Grid sized for propagating `pulse` through a cavity with `params`.
    ///
    /// The detuning span covers the pulse bandwidth, and the induced time
    /// window covers the pulse plus the ring-down of the slowest cavity pole,
    /// whose decay rate is never below `min(kappa, gamma)`.
    pub fn for_pulse(params: &CqedParams, pulse: &PulseSpec) -> Result<Self> {
        let p = params.normalized();
        let slowest = p.kappa().min(p.gamma);
        let start = (pulse.center - PULSE_EXTENT * pulse.width).min(0.0);
        let end = pulse.center + PULSE_EXTENT * pulse.width + RING_DOWN / slowest;
        Self::covering(SPECTRAL_SPAN / pulse.width, end - start)
    }

    /// Smallest power-of-two grid with half-span `delta_max` whose time
    /// window is at least `window`.
    pub fn covering(delta_max: f64, window: f64) -> Result<Self> {
        let needed = (delta_max * window / PI).ceil();
        if !needed.is_finite() || needed > MAX_GRID_POINTS as f64 {
            return Err(CpfError::GridTooLarge {
                required: if needed.is_finite() {
                    needed as usize
                } else {
                    usize::MAX
                },
                limit: MAX_GRID_POINTS,
            });
        }
        let n = (needed as usize).max(MIN_GRID_POINTS).next_power_of_two();
        Self::new(n, delta_max)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.delta_max / self.n_points as f64
    }

    /// Length of the periodic time window, `2 pi / spacing`.
    pub fn window(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Time between samples of the inverse transform, `pi / delta_max`.
    pub fn time_step(&self) -> f64 {
        PI / self.delta_max
    }

    pub fn detuning(&self, k: usize) -> f64 {
        -self.delta_max + k as f64 * self.spacing()
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.detuning(k))
    }
}

/// Complex spectral amplitude sampled on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl SpectralAmplitude {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples an arbitrary spectral shape; this is the hook for non-Gaussian pulses.
    pub fn from_fn(grid: SpectralGrid, mut shape: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid.detunings().map(&mut shape).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CpfError::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `sum |f_k|^2 * spacing`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Pointwise multiplication by a transfer function of the detuning.
    pub fn filtered(&self, transfer: impl Fn(f64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * transfer(self.grid.detuning(k)))
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// L2 distance `sqrt(sum |a_k - b_k|^2 * spacing)`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.spacing()).sqrt())
    }

    /// Temporal samples `f(origin + k * dt)`, `k = 0..n`, `dt = pi / delta_max`.
    pub fn to_time_domain(&self, origin: f64) -> TimeSeries {
        let n = self.grid.len();
        let scale = self.grid.spacing() / (2.0 * PI).sqrt();
        let mut buffer: Vec<Complex64> = self
            .values
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let delta = self.grid.detuning(m);
                v * Complex64::from_polar(scale, -delta * origin)
            })
            .collect();
        forward_fft(n).process(&mut buffer);
        let dt = self.grid.time_step();
        for (k, v) in buffer.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
        TimeSeries {
            times: (0..n).map(|k| origin + k as f64 * dt).collect(),
            values: buffer,
        }
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.values.len() != other.values.len() {
            Err(CpfError::GridMismatch)
        } else {
            Ok(())
        }
    }
}

fn forward_fft(n: usize) -> Arc<dyn rustfft::Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// Uniformly sampled complex signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl TimeSeries {
    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.step()
    }
}

/// Gaussian pulse `spec` sampled on `grid`.
pub fn make_gaussian(spec: &PulseSpec, grid: &SpectralGrid) -> Result<SpectralAmplitude> {
    let required = 2.0 * PULSE_EXTENT * spec.width;
    if grid.window() < required {
        return Err(CpfError::WindowTooShort {
            required,
            available: grid.window(),
        });
    }
    // Amplitude exp(-32) at the band edge keeps the truncated norm within 1e-12.
    if grid.delta_max() * spec.width < 8.0 {
        return Err(CpfError::InvalidGrid(format!(
            "detuning span {} does not cover the pulse bandwidth 1/{}",
            grid.delta_max(),
            spec.width
        )));
    }
    Ok(SpectralAmplitude::from_fn(*grid, |delta| spec.spectrum(delta)))
}

/// Reflects `input` from a cavity whose atom is in `atom`.
pub fn apply_reflection(
    input: &SpectralAmplitude,
    params: &CqedParams,
    atom: AtomState,
) -> SpectralAmplitude {
    input.filtered(|delta| reflection(params, atom, delta))
}

/// `sum conj(a_k) b_k * spacing`.
pub fn spectral_overlap(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<Complex64> {
    a.check_grid(b)?;
    let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.spacing())
}
