//! Minimal strain and out-of-plane field models acting on a transition pair.
//!
//! Both perturbations admix a fixed partner orbital into the final state
//! with a coefficient linear in the perturbation strength. The mixing
//! constants are fixture calibrations chosen to land in the qualitative
//! regimes reported for the two defect classes, not first-principles values.

use serde::{Deserialize, Serialize};

use super::WavefunctionGrid;
use crate::error::{invalid, Error, Result};

pub const MAX_STRAIN: f64 = 0.01;
pub const MAX_FIELD_V_PER_ANGSTROM: f64 = 0.7;

/// Strain mixing for a strain-sensitive, vacancy-like centre: ±1% strain
/// turns the axis by about 5°.
pub const VACANCY_STRAIN_MIXING: f64 = 9.0;
/// Strain mixing for a stiff carbon-complex-like centre: ±1% strain turns
/// the axis by about 0.3°.
pub const C2C2_STRAIN_MIXING: f64 = 0.5;
/// Field admixture per V/Å.
pub const FIELD_MIXING_PER_V_PER_ANGSTROM: f64 = 1.0;
/// Tilt of the field partner out of the pure p_z direction towards the
/// in-plane perpendicular orbital.
pub const FIELD_PARTNER_TILT_DEG: f64 = 15.0;

/// Initial and final orbitals plus the partner states the perturbations
/// admix into the final state. A missing partner disables that channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPair {
    pub initial: WavefunctionGrid,
    pub final_state: WavefunctionGrid,
    pub strain_partner: Option<WavefunctionGrid>,
    pub field_partner: Option<WavefunctionGrid>,
}

impl TransitionPair {
    pub fn new(initial: WavefunctionGrid, final_state: WavefunctionGrid) -> Self {
        Self { initial, final_state, strain_partner: None, field_partner: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    BiaxialStrain,
    OutOfPlaneField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    /// Strain fraction (|m| ≤ 0.01) or field in V/Å (0 ≤ E ≤ 0.7).
    pub magnitude: f64,
    pub mixing_coefficient: f64,
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, magnitude: f64, mixing_coefficient: f64) -> Result<Self> {
        let ok = match kind {
            PerturbationKind::BiaxialStrain => magnitude.abs() <= MAX_STRAIN,
            PerturbationKind::OutOfPlaneField => (0.0..=MAX_FIELD_V_PER_ANGSTROM).contains(&magnitude),
        };
        if !ok || !magnitude.is_finite() {
            return Err(invalid("magnitude", format!("{magnitude} outside the declared range for {kind:?}")));
        }
        if !mixing_coefficient.is_finite() {
            return Err(invalid("mixing_coefficient", "must be finite"));
        }
        Ok(Self { kind, magnitude, mixing_coefficient })
    }

    pub fn strain(m: f64, mixing: f64) -> Result<Self> {
        Self::new(PerturbationKind::BiaxialStrain, m, mixing)
    }

    pub fn field(e_v_per_angstrom: f64) -> Result<Self> {
        Self::new(PerturbationKind::OutOfPlaneField, e_v_per_angstrom, FIELD_MIXING_PER_V_PER_ANGSTROM)
    }

    pub fn admixture(&self) -> f64 {
        self.mixing_coefficient * self.magnitude
    }
}

fn admix(state: &WavefunctionGrid, partner: &WavefunctionGrid, c: f64) -> Result<WavefunctionGrid> {
    if !state.same_grid(partner) {
        return Err(Error::GridMismatch("partner orbital lives on a different grid".into()));
    }
    let mut out = state.clone();
    for (v, p) in out.values.iter_mut().zip(&partner.values) {
        *v += p * c;
    }
    out.normalize()?;
    Ok(out)
}

/// Strain rescales in-plane coordinates `(x, y) ← (1+m)(x, y)` for every
/// orbital and admixes `κ·m` of the strain partner; the field admixes `κ·E`
/// of the field partner. All outputs are renormalized.
pub fn apply_perturbation(pair: &TransitionPair, pert: &Perturbation) -> Result<TransitionPair> {
    let p = Perturbation::new(pert.kind, pert.magnitude, pert.mixing_coefficient)?;
    if p.magnitude == 0.0 {
        return Ok(pair.clone());
    }
    match p.kind {
        PerturbationKind::BiaxialStrain => {
            let s = 1.0 + p.magnitude;
            let stretch = |g: &WavefunctionGrid| g.resampled(|x, y, z| (x / s, y / s, z));
            let initial = stretch(&pair.initial)?;
            let mut final_state = stretch(&pair.final_state)?;
            let strain_partner = pair.strain_partner.as_ref().map(stretch).transpose()?;
            let field_partner = pair.field_partner.as_ref().map(stretch).transpose()?;
            if let Some(q) = &strain_partner {
                final_state = admix(&final_state, q, p.admixture())?;
            }
            Ok(TransitionPair { initial, final_state, strain_partner, field_partner })
        }
        PerturbationKind::OutOfPlaneField => {
            let mut out = pair.clone();
            if let Some(q) = &pair.field_partner {
                out.final_state = admix(&pair.final_state, q, p.admixture())?;
            }
            Ok(out)
        }
    }
}
