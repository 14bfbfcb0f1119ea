//! Simulation of a cavity-QED controlled-phase-flip gate between two atoms,
//! mediated by a single photon of finite duration, and of the resulting
//! fault-tolerance requirements.
//!
//! All rates are in units of the atomic polarization decay rate `gamma` and
//! all times in units of `1/gamma`.

pub mod dynamics;
pub mod error;
pub mod ftqc;
pub mod gate;
pub mod optimizer;
pub mod pulse;
pub mod reflection;
pub mod sweep;

pub use error::{CpfError, Result};
pub use ftqc::{ftqc_parameter, is_fault_tolerant, threshold_boundary, ErrorBudget, ThresholdFit};
pub use gate::{average_errors, simulate_cpf, AverageErrors, TwoQubitState};
pub use optimizer::{kappa_ext_loss, optimize_kappa_ext, Objective};
pub use pulse::{PulseLength, PulseSpec, SpectralAmplitude, SpectralGrid};
pub use reflection::{AtomState, CqedParams};
pub use sweep::{run_sweep, ErrorMap, KextPolicy, LogGrid, SweepConfig};
