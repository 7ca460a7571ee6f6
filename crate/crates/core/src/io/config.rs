//! Run configuration documents. Unknown keys are rejected at every level;
//! omitted keys take their defaults, and the echoed config written next to
//! each output spells every value out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photophysics::EmitterModel;
use crate::simulator::InstrumentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// One time-tag stream at a fixed laser axis and optional detection polarizer.
    Timetags,
    ExcitationSweep,
    EmissionSweep,
    DecayMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    /// Laser polarization; `None` parks it on the emitter's excitation axis.
    pub laser_axis_deg: Option<f64>,
    pub detection_polarizer_deg: Option<f64>,
    /// Polarizer (or laser) axes for the sweep modes.
    pub angles_deg: Vec<f64>,
    pub n_pulses: u64,
    pub acquisition_s: f64,
    pub time_bin_ps: u64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::Timetags,
            laser_axis_deg: None,
            detection_polarizer_deg: None,
            angles_deg: (0..24).map(|i| i as f64 * 15.0).collect(),
            n_pulses: 1_000_000,
            acquisition_s: 1.0,
            time_bin_ps: 41,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub emitter: EmitterModel,
    pub instrument: InstrumentConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.instrument.validate()?;
        let x = &self.experiment;
        if x.n_pulses == 0 {
            return Err(Error::Config("experiment.n_pulses must be >= 1".into()));
        }
        if !(x.acquisition_s > 0.0) {
            return Err(Error::Config("experiment.acquisition_s must be > 0".into()));
        }
        if x.time_bin_ps == 0 {
            return Err(Error::Config("experiment.time_bin_ps must be >= 1".into()));
        }
        for a in x.laser_axis_deg.iter().chain(&x.detection_polarizer_deg).chain(&x.angles_deg) {
            if !a.is_finite() {
                return Err(Error::Config(format!("non-finite angle {a}")));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
