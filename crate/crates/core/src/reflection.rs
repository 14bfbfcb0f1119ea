//! Single-frequency reflection of a single-sided cavity containing one
//! three-level atom, and the closed-form error probabilities of the
//! long-pulse limit (zero detuning).
//!
//! All rates are measured in units of the atomic polarization decay rate
//! `gamma`. Parameters built with a different `gamma` are rescaled on entry,
//! so detunings passed to these functions are always in units of `gamma`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};
use crate::gate::TwoQubitState;

/// Cavity-QED rate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqedParams {
    /// Atom-cavity coupling rate.
    pub g: f64,
    /// Field decay into the useful external mode (mirror transmission).
    pub kappa_ext: f64,
    /// Field decay into internal loss channels (scattering, absorption).
    pub kappa_int: f64,
    /// Atomic polarization decay rate.
    pub gamma: f64,
}

impl CqedParams {
    pub fn new(g: f64, kappa_ext: f64, kappa_int: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            g,
            kappa_ext,
            kappa_int,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters in units of `gamma = 1`.
    pub fn with_unit_gamma(g: f64, kappa_ext: f64, kappa_int: f64) -> Result<Self> {
        Self::new(g, kappa_ext, kappa_int, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.kappa_ext, self.kappa_int, self.gamma]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(CpfError::InvalidParams(format!("non-finite rate in {self:?}")));
        }
        if self.g < 0.0 {
            return Err(CpfError::InvalidParams(format!("g = {} < 0", self.g)));
        }
        if self.kappa_ext <= 0.0 {
            return Err(CpfError::InvalidParams(format!(
                "kappa_ext = {} must be positive",
                self.kappa_ext
            )));
        }
        if self.kappa_int < 0.0 {
            return Err(CpfError::InvalidParams(format!(
                "kappa_int = {} < 0",
                self.kappa_int
            )));
        }
        if self.gamma <= 0.0 {
            return Err(CpfError::InvalidParams(format!(
                "gamma = {} must be positive",
                self.gamma
            )));
        }
        Ok(())
    }

    /// The same physical system expressed with `gamma = 1`.
    pub fn normalized(&self) -> Self {
        let s = 1.0 / self.gamma;
        Self {
            g: self.g * s,
            kappa_ext: self.kappa_ext * s,
            kappa_int: self.kappa_int * s,
            gamma: 1.0,
        }
    }

    /// Total cavity field decay rate.
    pub fn kappa(&self) -> f64 {
        self.kappa_ext + self.kappa_int
    }

    /// `g^2 / (2 kappa_int gamma)`; infinite for a lossless cavity.
    pub fn internal_cooperativity(&self) -> f64 {
        if self.kappa_int == 0.0 {
            f64::INFINITY
        } else {
            self.g * self.g / (2.0 * self.kappa_int * self.gamma)
        }
    }

    /// Conventional cooperativity `g^2 / (2 kappa gamma)`.
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (2.0 * self.kappa() * self.gamma)
    }

    pub fn with_kappa_ext(mut self, kappa_ext: f64) -> Self {
        self.kappa_ext = kappa_ext;
        self
    }
}

/// Atomic qubit state seen by the photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomState {
    /// `|0>`: uncoupled to the cavity mode.
    Uncoupled,
    /// `|1>`: the `|1> <-> |e>` transition is resonant with the cavity.
    Coupled,
}

impl AtomState {
    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            AtomState::Uncoupled
        } else {
            AtomState::Coupled
        }
    }

    pub fn bit(self) -> usize {
        match self {
            AtomState::Uncoupled => 0,
            AtomState::Coupled => 1,
        }
    }
}

/// Reflection amplitudes for both atom states at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPair {
    pub l0: Complex64,
    pub l1: Complex64,
    pub detuning: f64,
}

impl ReflectionPair {
    pub fn new(params: &CqedParams, detuning: f64) -> Self {
        Self {
            l0: reflection_empty(params, detuning),
            l1: reflection_coupled(params, detuning),
            detuning,
        }
    }

    pub fn get(&self, atom: AtomState) -> Complex64 {
        match atom {
            AtomState::Uncoupled => self.l0,
            AtomState::Coupled => self.l1,
        }
    }
}

/// Reflection amplitude with the atom in `|0>`:
/// `(-kappa_ext + kappa_int - i delta) / (kappa_ext + kappa_int - i delta)`.
pub fn reflection_empty(params: &CqedParams, delta: f64) -> Complex64 {
    let p = params.normalized();
    let shift = Complex64::new(0.0, -delta);
    (shift + (p.kappa_int - p.kappa_ext)) / (shift + p.kappa())
}

/// Reflection amplitude with the atom in `|1>`. The atom adds the
/// susceptibility `g^2 / (gamma - i delta)` to both numerator and denominator.
pub fn reflection_coupled(params: &CqedParams, delta: f64) -> Complex64 {
    let p = params.normalized();
    let shift = Complex64::new(0.0, -delta);
    let atom = Complex64::from(p.g * p.g) / (shift + p.gamma);
    (shift + (p.kappa_int - p.kappa_ext) + atom) / (shift + p.kappa() + atom)
}

pub fn reflection(params: &CqedParams, atom: AtomState, delta: f64) -> Complex64 {
    match atom {
        AtomState::Uncoupled => reflection_empty(params, delta),
        AtomState::Coupled => reflection_coupled(params, delta),
    }
}

/// Real resonant reflection amplitudes `(L0, L1)` at zero detuning.
pub fn resonant_reflections(params: &CqedParams) -> (f64, f64) {
    let p = params.normalized();
    let kappa = p.kappa();
    let l0 = (p.kappa_int - p.kappa_ext) / kappa;
    let atom = p.g * p.g / p.gamma;
    let l1 = (p.kappa_int - p.kappa_ext + atom) / (kappa + atom);
    (l0, l1)
}

/// Photon-loss probabilities `(1 - |L0|^2, 1 - |L1|^2)` on resonance.
pub fn steady_loss_probs(params: &CqedParams) -> (f64, f64) {
    let (l0, l1) = resonant_reflections(params);
    ((1.0 - l0 * l0).clamp(0.0, 1.0), (1.0 - l1 * l1).clamp(0.0, 1.0))
}

/// Single atom-photon conditional errors on resonance for the probe
/// `(|H> + |V>)/sqrt 2`, where only `|H>` is reflected from the cavity.
pub fn steady_conditional_errors(params: &CqedParams) -> (f64, f64) {
    let (l0, l1) = resonant_reflections(params);
    (
        conditional_error_uncoupled(l0),
        conditional_error_coupled(l1),
    )
}

pub(crate) fn conditional_error_uncoupled(l0: f64) -> f64 {
    1.0 - 0.5 * (1.0 - l0).powi(2) / (1.0 + l0 * l0)
}

pub(crate) fn conditional_error_coupled(l1: f64) -> f64 {
    1.0 - 0.5 * (1.0 + l1).powi(2) / (1.0 + l1 * l1)
}

/// Branch norms `eta_{ij}` (times 4) of the two-cavity circuit on resonance,
/// indexed `2 i + j`.
pub(crate) fn branch_etas(l0: f64, l1: f64) -> [f64; 4] {
    let l = [l0, l1];
    let mut eta = [0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            eta[2 * i + j] = l[j].powi(2) * (l[i] - 1.0).powi(2) + (l[i] + 1.0).powi(2);
        }
    }
    eta
}

/// Long-pulse photon-loss probability of the atom-atom gate for `state`.
pub fn steady_gate_loss(params: &CqedParams, state: &TwoQubitState) -> Result<f64> {
    state.check_normalized()?;
    let (l0, l1) = resonant_reflections(params);
    let eta = branch_etas(l0, l1);
    let kept: f64 = state.weights().iter().zip(eta).map(|(w, e)| w * e).sum();
    Ok((1.0 - 0.25 * kept).clamp(0.0, 1.0))
}

const TOTAL_LOSS_EPS: f64 = 1e-14;

/// Long-pulse conditional error of the atom-atom gate for `state`.
///
/// The fidelity compares the full atom+photon state with the ideal gate
/// output (ideal branch signs `+, -, +, +` for `|00>, |01>, |10>, |11>`).
/// Returns [`CpfError::TotalLoss`] when no branch survives.
pub fn steady_gate_conditional(params: &CqedParams, state: &TwoQubitState) -> Result<f64> {
    state.check_normalized()?;
    let (l0, l1) = resonant_reflections(params);
    let w = state.weights();
    let eta = branch_etas(l0, l1);
    let numerator = w[0] * l0 * (l0 - 1.0) - w[1] * l1 * (l0 - 1.0)
        + w[2] * (l1 + 1.0)
        + w[3] * (l1 + 1.0);
    let denominator: f64 = w.iter().zip(eta).map(|(w, e)| w * e).sum();
    if denominator <= TOTAL_LOSS_EPS {
        return Err(CpfError::TotalLoss);
    }
    Ok((1.0 - numerator * numerator / denominator).clamp(0.0, 1.0))
}

/// State-averaged long-pulse errors `(mean loss, mean conditional error)`,
/// using the uniform state for the loss average and the
/// maximally-entangled conversion `1 - (4F + 1)/5` for the conditional error.
pub fn steady_average_errors(params: &CqedParams) -> Result<(f64, f64)> {
    let uniform = TwoQubitState::uniform();
    let p_loss = steady_gate_loss(params, &uniform)?;
    let p_cond = steady_gate_conditional(params, &uniform)?;
    let fidelity = 1.0 - p_cond;
    Ok((p_loss, 1.0 - (4.0 * fidelity + 1.0) / 5.0))
}
