//! Analysis chain: correlators, decay histograms, polarization extraction,
//! time-resolved polarization, spot integration and dipole-angle statistics.

pub mod correlate;
pub mod dynamics;
pub mod lifetime;
pub mod polarization;
pub mod spot;
pub mod stats;

pub use correlate::{
    correlate_g2, correlate_g2_brute_force, estimate_g2_zero, fit_g2_comb, predicted_g2_zero, G2Comb,
    G2Estimate, G2Histogram,
};
pub use dynamics::{
    extract_polarization_dynamics, fit_relaxation, DynamicsBin, DynamicsOptions, PolarizationDynamics, Relaxation,
};
pub use lifetime::{build_decay_histogram, fit_lifetime, DecayCurve, LifetimeFit};
pub use polarization::{
    analyze_polarization_sweep, analyze_shg_sweep, fit_power_law, PolarizationFit, ShgFit, UNDEFINED_AXIS_ERR_DEG,
};
pub use spot::{integrate_spot, SpotIntegral};
pub use stats::{
    angle_statistics, synthetic_cohort, two_means, AngleReport, ClusterSummary, CohortSpec, DipoleRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Integrated intensity versus polarizer (or laser) angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarSweep {
    /// Raw angles in degrees; anything in 0–360 (or beyond) is accepted.
    pub angles_deg: Vec<f64>,
    pub intensities: Vec<f64>,
    pub errors: Vec<f64>,
    /// Acquisition time per point.
    pub acquisition_s: f64,
    /// Known flat background per point (same units as `intensities`).
    pub background: f64,
}

impl PolarSweep {
    pub fn validate(&self) -> Result<()> {
        let n = self.angles_deg.len();
        if self.intensities.len() != n || self.errors.len() != n {
            return Err(invalid("sweep", "angle, intensity and error series differ in length"));
        }
        if self.intensities.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("sweep", "intensities must be finite and >= 0"));
        }
        if self.angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(invalid("sweep", "angles must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }
}

/// Photon counts binned by time after the excitation pulse (rows) and
/// polarizer angle (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMap {
    /// `rows + 1` strictly increasing edges, in ps relative to the pulse.
    pub time_edges_ps: Vec<i64>,
    pub angles_deg: Vec<f64>,
    /// `counts[row][angle]`.
    pub counts: Vec<Vec<u64>>,
    pub acquisition_s: f64,
}

impl DecayMap {
    pub fn validate(&self) -> Result<()> {
        if self.time_edges_ps.len() < 2 {
            return Err(invalid("decay map", "needs at least one time row"));
        }
        if self.time_edges_ps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("decay map", "time edges must be strictly increasing"));
        }
        if self.counts.len() + 1 != self.time_edges_ps.len() {
            return Err(invalid("decay map", "row count does not match time edges"));
        }
        if self.counts.iter().any(|r| r.len() != self.angles_deg.len()) {
            return Err(invalid("decay map", "ragged angle columns"));
        }
        if self.angles_deg.is_empty() {
            return Err(invalid("decay map", "no angle columns"));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn column_totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.angles_deg.len()];
        for row in &self.counts {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    /// First row whose start edge is at or after `t_ps`.
    pub fn first_row_at(&self, t_ps: i64) -> usize {
        self.time_edges_ps[..self.n_rows()]
            .iter()
            .position(|&e| e >= t_ps)
            .unwrap_or(self.n_rows())
    }

    /// Mean dark counts per ps per angle, estimated from rows that end
    /// before `-guard_ps` (before the pulse arrives). Zero if there are none.
    pub fn background_rate_per_ps(&self, guard_ps: i64) -> Vec<f64> {
        let mut sum = vec![0.0; self.angles_deg.len()];
        let mut span = 0i64;
        for (row, counts) in self.counts.iter().enumerate() {
            if self.time_edges_ps[row + 1] <= -guard_ps {
                span += self.time_edges_ps[row + 1] - self.time_edges_ps[row];
                for (s, c) in sum.iter_mut().zip(counts) {
                    *s += *c as f64;
                }
            }
        }
        if span == 0 {
            return vec![0.0; self.angles_deg.len()];
        }
        sum.into_iter().map(|s| s / span as f64).collect()
    }

    /// Sum rows `[start, end)` into a polarization sweep. The background is
    /// the pre-pulse dark rate integrated over the summed time span, averaged
    /// over angles.
    pub fn sweep_over_rows(&self, start: usize, end: usize, guard_ps: i64) -> PolarSweep {
        let mut intensities = vec![0.0; self.angles_deg.len()];
        for row in &self.counts[start..end] {
            for (i, c) in intensities.iter_mut().zip(row) {
                *i += *c as f64;
            }
        }
        let span = (self.time_edges_ps[end] - self.time_edges_ps[start]) as f64;
        let rates = self.background_rate_per_ps(guard_ps);
        let background = span * rates.iter().sum::<f64>() / rates.len() as f64;
        PolarSweep {
            angles_deg: self.angles_deg.clone(),
            errors: intensities.iter().map(|v| v.max(1.0).sqrt()).collect(),
            intensities,
            acquisition_s: self.acquisition_s,
            background,
        }
    }
}
