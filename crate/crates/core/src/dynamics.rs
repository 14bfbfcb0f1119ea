//! Time-domain integration of the cavity amplitudes driven by a pulse.
//!
//! This is the independent check on the spectral propagation in
//! [`crate::pulse`]. With drive `f_in(t)` entering through the mirror,
//!
//! ```text
//! dC/dt = g D - kappa C - sqrt(2 kappa_ext) f_in
//! dD/dt = -g C - gamma D
//! f_out = f_in + sqrt(2 kappa_ext) C
//! ```
//!
//! where `D` is only populated when the atom is in `|1>`. The coupling
//! constant `sqrt(2 kappa_ext)` is the one for which a monochromatic drive
//! reproduces the resonant reflection amplitudes exactly.

use num_complex::Complex64;

use crate::error::{CpfError, Result};
use crate::pulse::{PulseSpec, SpectralGrid, TimeSeries, PULSE_EXTENT};
use crate::reflection::{AtomState, CqedParams};

/// Largest accepted step as a fraction of the fastest timescale.
pub const STEP_FRACTION: f64 = 0.01;
/// Allowed mismatch in the norm balance before integration aborts.
pub const BOOKKEEPING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDomainConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Store every `record_every`-th step (the initial state is always stored).
    pub record_every: usize,
}

impl TimeDomainConfig {
    /// Largest step allowed for `params` and `pulse`.
    pub fn max_step(params: &CqedParams, pulse: &PulseSpec) -> f64 {
        let p = params.normalized();
        let mut fastest = p.kappa().max(p.gamma).max(1.0 / pulse.width);
        if p.g > 0.0 {
            fastest = fastest.max(p.g);
        }
        STEP_FRACTION / fastest
    }

    /// Largest stable step, run until the cavity has rung down.
    pub fn recommended(params: &CqedParams, pulse: &PulseSpec) -> Self {
        let p = params.normalized();
        let slowest = p.kappa().min(p.gamma);
        Self {
            dt: Self::max_step(params, pulse),
            horizon: pulse.center + PULSE_EXTENT * pulse.width + 20.0 / slowest,
            record_every: 1,
        }
    }

    /// Steps that land exactly on the sample times of `grid`'s inverse
    /// transform, covering one full window.
    pub fn aligned_to(grid: &SpectralGrid, params: &CqedParams, pulse: &PulseSpec) -> Self {
        let sample = grid.time_step();
        let substeps = (sample / Self::max_step(params, pulse)).ceil().max(1.0) as usize;
        Self {
            dt: sample / substeps as f64,
            horizon: sample * (grid.len() - 1) as f64,
            record_every: substeps,
        }
    }
}

/// Sampled solution of the driven cavity equations.
#[derive(Debug, Clone)]
pub struct CavityTrajectory {
    pub atom: AtomState,
    pub times: Vec<f64>,
    /// Cavity amplitude (`C0` for an uncoupled atom, `C1` otherwise).
    pub cavity: Vec<Complex64>,
    /// Excited-state amplitude `D`; identically zero for an uncoupled atom.
    pub excited: Vec<Complex64>,
    pub input: Vec<Complex64>,
    pub output: Vec<Complex64>,
    /// Cumulative `\int |f_in|^2 dt`.
    pub input_norm: Vec<f64>,
    /// Cumulative `\int |f_out|^2 dt`.
    pub output_norm: Vec<f64>,
    /// Cumulative norm lost through `kappa_int` and `gamma`.
    pub dissipated: Vec<f64>,
}

impl CavityTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Norm still stored in the cavity and atom at sample `k`.
    pub fn residual_norm(&self, k: usize) -> f64 {
        self.cavity[k].norm_sqr() + self.excited[k].norm_sqr()
    }

    /// `input - output - residual - dissipated` at sample `k`; zero up to
    /// integration error.
    pub fn bookkeeping_error(&self, k: usize) -> f64 {
        self.input_norm[k] - self.output_norm[k] - self.residual_norm(k) - self.dissipated[k]
    }

    pub fn output_series(&self) -> TimeSeries {
        TimeSeries {
            times: self.times.clone(),
            values: self.output.clone(),
        }
    }

    pub fn input_series(&self) -> TimeSeries {
        TimeSeries {
            times: self.times.clone(),
            values: self.input.clone(),
        }
    }
}

// State layout: [Re C, Im C, Re D, Im D, in, out, dissipated].
type State = [f64; 7];

struct Rates {
    g: f64,
    kappa: f64,
    kappa_int: f64,
    gamma: f64,
    coupling: f64,
}

impl Rates {
    fn derivative(&self, drive: f64, y: &State) -> State {
        let c = Complex64::new(y[0], y[1]);
        let d = Complex64::new(y[2], y[3]);
        let dc = d * self.g - c * self.kappa - self.coupling * drive;
        let dd = -c * self.g - d * self.gamma;
        let out = c * self.coupling + drive;
        [
            dc.re,
            dc.im,
            dd.re,
            dd.im,
            drive * drive,
            out.norm_sqr(),
            2.0 * self.kappa_int * c.norm_sqr() + 2.0 * self.gamma * d.norm_sqr(),
        ]
    }
}

fn axpy(y: &State, h: f64, k: &State) -> State {
    let mut out = *y;
    for (o, k) in out.iter_mut().zip(k) {
        *o += h * k;
    }
    out
}

/// Integrates the cavity response to `pulse` with classical fixed-step RK4.
pub fn integrate_time_domain(
    params: &CqedParams,
    pulse: &PulseSpec,
    atom: AtomState,
    config: &TimeDomainConfig,
) -> Result<CavityTrajectory> {
    params.validate()?;
    let max = TimeDomainConfig::max_step(params, pulse);
    if !(config.dt > 0.0) || config.dt > max * (1.0 + 1e-9) {
        return Err(CpfError::StepTooLarge { dt: config.dt, max });
    }
    if config.record_every == 0 || !(config.horizon >= 0.0) {
        return Err(CpfError::InvalidConfig(format!("{config:?}")));
    }

    let p = params.normalized();
    let rates = Rates {
        g: if atom == AtomState::Coupled { p.g } else { 0.0 },
        kappa: p.kappa(),
        kappa_int: p.kappa_int,
        gamma: p.gamma,
        coupling: (2.0 * p.kappa_ext).sqrt(),
    };

    let steps = (config.horizon / config.dt).round() as usize;
    let capacity = steps / config.record_every + 1;
    let mut traj = CavityTrajectory {
        atom,
        times: Vec::with_capacity(capacity),
        cavity: Vec::with_capacity(capacity),
        excited: Vec::with_capacity(capacity),
        input: Vec::with_capacity(capacity),
        output: Vec::with_capacity(capacity),
        input_norm: Vec::with_capacity(capacity),
        output_norm: Vec::with_capacity(capacity),
        dissipated: Vec::with_capacity(capacity),
    };

    let mut y: State = [0.0; 7];
    let record = |traj: &mut CavityTrajectory, t: f64, y: &State| -> Result<()> {
        let c = Complex64::new(y[0], y[1]);
        let drive = pulse.amplitude(t);
        traj.times.push(t);
        traj.cavity.push(c);
        traj.excited.push(Complex64::new(y[2], y[3]));
        traj.input.push(Complex64::from(drive));
        traj.output.push(c * rates.coupling + drive);
        traj.input_norm.push(y[4]);
        traj.output_norm.push(y[5]);
        traj.dissipated.push(y[6]);
        let k = traj.len() - 1;
        let violation = traj.bookkeeping_error(k).abs().max(-y[6]);
        if violation > BOOKKEEPING_TOLERANCE {
            return Err(CpfError::NormBookkeeping { violation, time: t });
        }
        Ok(())
    };

    record(&mut traj, 0.0, &y)?;
    let h = config.dt;
    for step in 1..=steps {
        let t = (step - 1) as f64 * h;
        let f0 = pulse.amplitude(t);
        let fh = pulse.amplitude(t + 0.5 * h);
        let f1 = pulse.amplitude(t + h);
        let k1 = rates.derivative(f0, &y);
        let k2 = rates.derivative(fh, &axpy(&y, 0.5 * h, &k1));
        let k3 = rates.derivative(fh, &axpy(&y, 0.5 * h, &k2));
        let k4 = rates.derivative(f1, &axpy(&y, h, &k3));
        for i in 0..7 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if step % config.record_every == 0 {
            record(&mut traj, step as f64 * h, &y)?;
        }
    }
    Ok(traj)
}
