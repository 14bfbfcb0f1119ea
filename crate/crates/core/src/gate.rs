//! The atom-atom controlled-phase-flip gate mediated by one photon.
//!
//! The photon starts in `|V>`. Each half-wave plate applies the Hadamard
//! `|H> -> (|H> + |V>)/sqrt 2`, `|V> -> (|H> - |V>)/sqrt 2`. Only the `|H>`
//! component is routed to a cavity; the `|V>` path is ideal. The circuit is
//!
//! ```text
//! |V> -- Had -- cavity(atom 1) -- Had -- cavity(atom 2) -- Had -- measure H/V
//! ```
//!
//! and a Pauli-Z is applied to atom 1 when the `|V>` detector clicks. For
//! ideal reflections (`L0 = -1`, `L1 = +1`) both outcomes leave the atoms in
//! `CPF |psi>` with branch signs `(+, -, +, +)` on `|00>, |01>, |10>, |11>`.
//!
//! Because the cavity responses are linear and time-invariant, each branch is
//! propagated exactly by multiplying transfer functions on the detuning grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CpfError, Result};
use crate::pulse::{make_gaussian, spectral_overlap, PulseLength, SpectralAmplitude, SpectralGrid};
use crate::reflection::{reflection, steady_average_errors, AtomState, CqedParams};

const NORM_TOLERANCE: f64 = 1e-12;
const PULSE_NORM_TOLERANCE: f64 = 1e-6;

/// Coefficients `alpha_{ij}` of `sum alpha_{ij} |i>_1 |j>_2`, indexed `2 i + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    alpha: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(alpha: [Complex64; 4]) -> Result<Self> {
        let state = Self { alpha };
        state.check_normalized()?;
        Ok(state)
    }

    /// Rescales `alpha` to unit norm.
    pub fn normalize(alpha: [Complex64; 4]) -> Result<Self> {
        let norm = alpha.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(CpfError::UnnormalizedState {
                norm_sqr: norm * norm,
            });
        }
        Ok(Self {
            alpha: alpha.map(|a| a / norm),
        })
    }

    /// Equal-weight superposition; all `|alpha_{ij}|^2 = 1/4`.
    pub fn uniform() -> Self {
        Self {
            alpha: [Complex64::new(0.5, 0.0); 4],
        }
    }

    pub fn basis(i: usize, j: usize) -> Self {
        let mut alpha = [Complex64::new(0.0, 0.0); 4];
        alpha[2 * (i & 1) + (j & 1)] = Complex64::new(1.0, 0.0);
        Self { alpha }
    }

    pub fn alpha(&self) -> &[Complex64; 4] {
        &self.alpha
    }

    pub fn coefficient(&self, i: usize, j: usize) -> Complex64 {
        self.alpha[2 * i + j]
    }

    /// `|alpha_{ij}|^2`.
    pub fn weights(&self) -> [f64; 4] {
        self.alpha.map(|a| a.norm_sqr())
    }

    /// Exchanges the roles of the two atoms: `alpha'_{ij} = alpha_{ji}`.
    pub fn swapped(&self) -> Self {
        let a = self.alpha;
        Self {
            alpha: [a[0], a[2], a[1], a[3]],
        }
    }

    pub fn check_normalized(&self) -> Result<()> {
        let norm_sqr: f64 = self.weights().iter().sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            Err(CpfError::UnnormalizedState { norm_sqr })
        } else {
            Ok(())
        }
    }
}

/// Ideal gate signs on `|00>, |01>, |10>, |11>`.
pub const CPF_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

/// Frequency response of one cavity as seen by the `|H>` photon component.
pub trait CavityResponse: Sync {
    fn reflect(&self, atom: AtomState, delta: f64) -> Complex64;
}

impl CavityResponse for CqedParams {
    fn reflect(&self, atom: AtomState, delta: f64) -> Complex64 {
        reflection(self, atom, delta)
    }
}

/// Perfect selective phase flip: `L0 = -1`, `L1 = +1` at every detuning.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealResponse;

impl CavityResponse for IdealResponse {
    fn reflect(&self, atom: AtomState, _delta: f64) -> Complex64 {
        match atom {
            AtomState::Uncoupled => Complex64::new(-1.0, 0.0),
            AtomState::Coupled => Complex64::new(1.0, 0.0),
        }
    }
}

/// Which photodetector fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    H,
    V,
}

impl Detector {
    pub const ALL: [Detector; 2] = [Detector::H, Detector::V];

    fn index(self) -> usize {
        match self {
            Detector::H => 0,
            Detector::V => 1,
        }
    }
}

/// Which physical atom sits in the first cavity. Feedback always acts on
/// the atom in the first cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AtomOrder {
    #[default]
    Direct,
    Swapped,
}

/// Photon spectra for every atom branch and detector outcome, after feedback.
#[derive(Debug, Clone)]
pub struct GateOutcome {
    /// `branch_spectra[2 i + j][detector]`, including the factor `alpha_{ij}`.
    branch_spectra: Vec<[SpectralAmplitude; 2]>,
    detect_prob: [f64; 2],
    loss_prob: f64,
    order: AtomOrder,
}

impl GateOutcome {
    pub fn branch(&self, i: usize, j: usize, detector: Detector) -> &SpectralAmplitude {
        &self.branch_spectra[2 * i + j][detector.index()]
    }

    pub fn detect_prob(&self, detector: Detector) -> f64 {
        self.detect_prob[detector.index()]
    }

    pub fn loss_prob(&self) -> f64 {
        self.loss_prob
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.branch_spectra[0][0].grid()
    }

    pub fn order(&self) -> AtomOrder {
        self.order
    }
}

/// Ideal CPF sign of branch `|i>_1 |j>_2`; the atom in the first cavity acts
/// as the control.
fn ideal_sign(i: usize, j: usize, order: AtomOrder) -> f64 {
    match order {
        AtomOrder::Direct => CPF_SIGNS[2 * i + j],
        AtomOrder::Swapped => CPF_SIGNS[2 * j + i],
    }
}

/// Runs the gate with both atoms in identical cavities.
pub fn simulate_cpf(
    params: &CqedParams,
    pulse: &SpectralAmplitude,
    state: &TwoQubitState,
) -> Result<GateOutcome> {
    params.validate()?;
    simulate_cpf_with(params, params, pulse, state, AtomOrder::Direct)
}

/// Runs the gate with arbitrary responses for the first and second cavity.
pub fn simulate_cpf_with<A: CavityResponse, B: CavityResponse>(
    first: &A,
    second: &B,
    pulse: &SpectralAmplitude,
    state: &TwoQubitState,
    order: AtomOrder,
) -> Result<GateOutcome> {
    state.check_normalized()?;
    let norm_sqr = pulse.norm_sqr();
    if (norm_sqr - 1.0).abs() > PULSE_NORM_TOLERANCE {
        return Err(CpfError::UnnormalizedPulse { norm_sqr });
    }

    let grid = *pulse.grid();
    let detunings: Vec<f64> = grid.detunings().collect();
    let response = |cavity: &dyn Fn(AtomState, f64) -> Complex64| -> [Vec<Complex64>; 2] {
        [AtomState::Uncoupled, AtomState::Coupled]
            .map(|atom| detunings.iter().map(|&d| cavity(atom, d)).collect())
    };
    let first_l = response(&|a, d| first.reflect(a, d));
    let second_l = response(&|a, d| second.reflect(a, d));

    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
    let mut branch_spectra = Vec::with_capacity(4);
    let mut detect_prob = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            // (a, b) = (qubit of the atom in cavity 1, qubit of the atom in cavity 2).
            let (a, b) = match order {
                AtomOrder::Direct => (i, j),
                AtomOrder::Swapped => (j, i),
            };
            let alpha = state.coefficient(i, j);
            let feedback = if a == 1 { -1.0 } else { 1.0 };
            let l_a = &first_l[a];
            let l_b = &second_l[b];
            let mut h_out = Vec::with_capacity(grid.len());
            let mut v_out = Vec::with_capacity(grid.len());
            for (k, f) in pulse.values().iter().enumerate() {
                let amp = alpha * f * 0.5;
                let h = amp * l_b[k] * (l_a[k] - 1.0);
                let v = amp * (l_a[k] + 1.0);
                h_out.push((h + v) * sqrt_half);
                v_out.push((h - v) * (sqrt_half * feedback));
            }
            let h_spec = SpectralAmplitude::from_values(grid, h_out)?;
            let v_spec = SpectralAmplitude::from_values(grid, v_out)?;
            detect_prob[0] += h_spec.norm_sqr();
            detect_prob[1] += v_spec.norm_sqr();
            branch_spectra.push([h_spec, v_spec]);
        }
    }
    let loss_prob = (1.0 - detect_prob[0] - detect_prob[1]).max(0.0);
    Ok(GateOutcome {
        branch_spectra,
        detect_prob,
        loss_prob,
        order,
    })
}

/// Heralded failure probability: no detector clicks.
pub fn gate_loss(outcome: &GateOutcome) -> f64 {
    outcome.loss_prob
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalFidelity {
    pub fidelity: f64,
    pub p_cond: f64,
}

/// Renormalized fidelity of the atom+photon state with the ideal output
/// `CPF|psi> (x) |+> (x) ideal_pulse`.
///
/// The overlap is summed coherently over both detector outcomes, so the
/// photon's polarization and temporal mode are both part of the comparison.
pub fn conditional_fidelity(
    outcome: &GateOutcome,
    state: &TwoQubitState,
    ideal_pulse: &SpectralAmplitude,
) -> Result<ConditionalFidelity> {
    state.check_normalized()?;
    if outcome.grid() != ideal_pulse.grid() {
        return Err(CpfError::GridMismatch);
    }
    let detected = outcome.detect_prob[0] + outcome.detect_prob[1];
    if detected <= f64::MIN_POSITIVE {
        return Err(CpfError::ZeroDetection);
    }
    let mut overlap = Complex64::new(0.0, 0.0);
    for (b, alpha) in state.alpha().iter().enumerate() {
        let sign = ideal_sign(b / 2, b % 2, outcome.order);
        let ideal_amp = (alpha * sign).conj() * std::f64::consts::FRAC_1_SQRT_2;
        for spectrum in &outcome.branch_spectra[b] {
            overlap += ideal_amp * spectral_overlap(ideal_pulse, spectrum)?;
        }
    }
    let fidelity = (overlap.norm_sqr() / detected).clamp(0.0, 1.0);
    Ok(ConditionalFidelity {
        fidelity,
        p_cond: 1.0 - fidelity,
    })
}

/// State-averaged errors of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageErrors {
    pub p_loss: f64,
    pub p_cond: f64,
}

/// Converts the maximally-entangled fidelity to an average conditional error.
pub fn average_conditional_error(fidelity: f64) -> f64 {
    1.0 - (4.0 * fidelity + 1.0) / 5.0
}

/// Average loss and conditional error over input states.
///
/// The loss is linear in `|alpha_{ij}|^2`, so any permutation-symmetric state
/// average reduces to equal weights `1/4`. The conditional error uses the
/// fidelity of the equal-amplitude state, which carries the same branch
/// weights as a maximally entangled input extended by a reference system.
pub fn average_errors(params: &CqedParams, pulse: &PulseLength) -> Result<AverageErrors> {
    params.validate()?;
    match pulse {
        PulseLength::LongLimit => {
            let (p_loss, p_cond) = steady_average_errors(params)?;
            Ok(AverageErrors { p_loss, p_cond })
        }
        PulseLength::Finite(spec) => {
            let grid = SpectralGrid::for_pulse(params, spec)?;
            let input = make_gaussian(spec, &grid)?;
            let state = TwoQubitState::uniform();
            let outcome = simulate_cpf(params, &input, &state)?;
            let fidelity = conditional_fidelity(&outcome, &state, &input)?;
            Ok(AverageErrors {
                p_loss: gate_loss(&outcome),
                p_cond: average_conditional_error(fidelity.fidelity),
            })
        }
    }
}
