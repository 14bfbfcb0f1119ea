//! Run configuration: a JSON file, overridden key by key by flags and
//! environment variables.

use std::fs;
use std::path::{Path, PathBuf};

use cqed_cpf::optimizer::log_ratios;
use cqed_cpf::{CqedParams, KextPolicy, LogGrid, Objective, PulseLength, SweepConfig, ThresholdFit};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub g: f64,
    pub kappa_ext: f64,
    pub kappa_int: f64,
    pub gamma: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            g: 2.0,
            kappa_ext: 1.0,
            kappa_int: 0.001,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    /// Temporal half-width in units of 1/gamma.
    pub width: f64,
    /// Use the monochromatic closed forms and ignore `width`.
    pub long_pulse: bool,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            width: 30.0,
            long_pulse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        let fit = ThresholdFit::default();
        Self {
            a: fit.a,
            b: fit.b,
            d: fit.d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub g_min: f64,
    pub g_max: f64,
    pub g_points: usize,
    pub kappa_int_min: f64,
    pub kappa_int_max: f64,
    pub kappa_int_points: usize,
    pub kext_policy: KextPolicy,
    /// Level of the extracted contour of P.
    pub contour_level: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::default();
        Self {
            g_min: d.g_range.min,
            g_max: d.g_range.max,
            g_points: d.g_range.points,
            kappa_int_min: d.kappa_int_range.min,
            kappa_int_max: d.kappa_int_range.max,
            kappa_int_points: d.kappa_int_range.points,
            kext_policy: d.kext_policy,
            contour_level: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Length ratios run from `10^ratio_min_exp` to `10^ratio_max_exp`.
    pub ratio_min_exp: f64,
    pub ratio_max_exp: f64,
    pub per_decade: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            ratio_min_exp: -3.0,
            ratio_max_exp: 1.0,
            per_decade: 4,
        }
    }
}

/// Everything a run depends on. Saved next to every output, so passing the
/// saved file back through `--config` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub pulse: PulseSection,
    pub objective: Objective,
    pub threshold: ThresholdSection,
    pub sweep: SweepSection,
    pub scan: ScanSection,
    /// Loss probability for the `threshold` command.
    pub p_loss: f64,
    pub out: PathBuf,
    /// Worker threads; `None` means machine parallelism for sweeps and one
    /// thread elsewhere.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsSection::default(),
            pulse: PulseSection::default(),
            objective: Objective::FtqcP,
            threshold: ThresholdSection::default(),
            sweep: SweepSection::default(),
            scan: ScanSection::default(),
            p_loss: 0.0,
            out: PathBuf::from("cqed-cpf-out"),
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn cqed_params(&self) -> Result<CqedParams, CliError> {
        let p = &self.params;
        Ok(CqedParams::new(p.g, p.kappa_ext, p.kappa_int, p.gamma)?)
    }

    pub fn pulse_length(&self) -> Result<PulseLength, CliError> {
        if self.pulse.long_pulse {
            Ok(PulseLength::LongLimit)
        } else {
            Ok(PulseLength::finite(self.pulse.width)?)
        }
    }

    pub fn threshold_fit(&self) -> Result<ThresholdFit, CliError> {
        let t = &self.threshold;
        Ok(ThresholdFit::new(t.a, t.b, t.d)?)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let s = &self.sweep;
        let config = SweepConfig {
            g_range: LogGrid::new(s.g_min, s.g_max, s.g_points)?,
            kappa_int_range: LogGrid::new(s.kappa_int_min, s.kappa_int_max, s.kappa_int_points)?,
            pulse: self.pulse_length()?,
            kext_policy: s.kext_policy,
            threshold_fit: self.threshold_fit()?,
        };
        config.validate()?;
        if !s.contour_level.is_finite() || s.contour_level <= 0.0 {
            return Err(CliError::Usage(format!(
                "contour level must be positive, got {}",
                s.contour_level
            )));
        }
        Ok(config)
    }

    pub fn scan_ratios(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.scan;
        if !(s.ratio_min_exp.is_finite() && s.ratio_max_exp > s.ratio_min_exp) || s.per_decade == 0 {
            return Err(CliError::Usage(format!(
                "scan needs ratio_min_exp < ratio_max_exp and per_decade >= 1, got {s:?}"
            )));
        }
        Ok(log_ratios(s.ratio_min_exp, s.ratio_max_exp, s.per_decade))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
