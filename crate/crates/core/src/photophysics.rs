//! Parametric emitter model: excitation response, excited-state decay,
//! time-dependent emission polarization and the Huang-Rhys emission spectrum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_axis, AxialAngle};

/// hc in eV·nm.
pub const HC_EV_NM: f64 = 1239.841_984;

/// Photophysical parameters of a single emitter.
///
/// Emission polarization relaxes exponentially after excitation:
/// `V(t) = vis_ss - vis_delta·exp(-t/relax_ns)` and
/// `θ(t) = em_axis_ss + em_axis_delta·exp(-t/relax_ns)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterModel {
    pub lifetime_ns: f64,
    pub exc_axis: AxialAngle,
    pub em_axis_ss: AxialAngle,
    pub em_axis_delta: f64,
    pub vis_ss: f64,
    pub vis_delta: f64,
    pub relax_ns: f64,
    pub exc_prob_max: f64,
    pub exc_visibility: f64,
    pub spectrum: HuangRhysSpectrum,
}

impl Default for EmitterModel {
    fn default() -> Self {
        Self {
            lifetime_ns: 3.96,
            exc_axis: wrap_axis(0.0).unwrap(),
            em_axis_ss: wrap_axis(0.0).unwrap(),
            em_axis_delta: 0.0,
            vis_ss: 1.0,
            vis_delta: 0.0,
            relax_ns: 1.0,
            exc_prob_max: 0.1,
            exc_visibility: 1.0,
            spectrum: HuangRhysSpectrum::default(),
        }
    }
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_ns > 0.0 && self.lifetime_ns.is_finite()) {
            return Err(invalid("lifetime_ns", "must be > 0"));
        }
        if !(self.relax_ns > 0.0 && self.relax_ns.is_finite()) {
            return Err(invalid("relax_ns", "must be > 0"));
        }
        if !self.em_axis_delta.is_finite() {
            return Err(invalid("em_axis_delta", "must be finite"));
        }
        for (name, v) in [
            ("vis_ss", self.vis_ss),
            ("exc_prob_max", self.exc_prob_max),
            ("exc_visibility", self.exc_visibility),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        // V(t) is monotone, so checking both ends covers every t >= 0.
        let v0 = self.vis_ss - self.vis_delta;
        if !(0.0..=1.0).contains(&v0) {
            return Err(invalid(
                "vis_delta",
                format!("initial visibility vis_ss - vis_delta = {v0} leaves [0, 1]"),
            ));
        }
        self.spectrum.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionState {
    pub axis: AxialAngle,
    pub visibility: f64,
}

pub fn excitation_probability(m: &EmitterModel, laser_axis: AxialAngle, power_scale: f64) -> Result<f64> {
    if !(power_scale >= 0.0) {
        return Err(invalid("power_scale", "must be >= 0"));
    }
    let c = (2.0 * (laser_axis.radians() - m.exc_axis.radians())).cos();
    let p = m.exc_prob_max * power_scale * 0.5 * (1.0 + m.exc_visibility * c);
    Ok(p.clamp(0.0, 1.0))
}

pub fn emission_state_at(m: &EmitterModel, t_ns: f64) -> Result<EmissionState> {
    if !(t_ns >= 0.0) {
        return Err(Error::NegativeTime(t_ns));
    }
    let decay = (-t_ns / m.relax_ns).exp();
    Ok(EmissionState {
        axis: m.em_axis_ss.rotated(m.em_axis_delta * decay),
        visibility: (m.vis_ss - m.vis_delta * decay).clamp(0.0, 1.0),
    })
}

/// Probability that a photon emitted in `state` passes a linear polarizer.
pub fn detection_probability(state: &EmissionState, polarizer: AxialAngle) -> f64 {
    let c = (2.0 * (polarizer.radians() - state.axis.radians())).cos();
    (0.5 * (1.0 + state.visibility * c)).clamp(0.0, 1.0)
}

/// Inverse CDF of the exponential decay: `-τ·ln(1-u)` for `u ∈ [0, 1)`.
pub fn decay_delay_from_uniform(lifetime_ns: f64, u: f64) -> f64 {
    -lifetime_ns * (-u).ln_1p()
}

pub fn sample_decay_delay<R: Rng + ?Sized>(m: &EmitterModel, rng: &mut R) -> f64 {
    decay_delay_from_uniform(m.lifetime_ns, rng.random::<f64>())
}

/// Zero-phonon line plus Poisson-weighted phonon replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HuangRhysSpectrum {
    pub zpl_nm: f64,
    pub huang_rhys_s: f64,
    pub phonon_energy_mev: f64,
    pub max_phonon_n: u32,
    /// Lorentzian FWHM of every replica, in nm.
    pub linewidth_nm: f64,
}

impl Default for HuangRhysSpectrum {
    fn default() -> Self {
        Self {
            zpl_nm: 573.0,
            huang_rhys_s: 1.0,
            phonon_energy_mev: 165.0,
            max_phonon_n: 6,
            linewidth_nm: 5.0,
        }
    }
}

impl HuangRhysSpectrum {
    pub fn validate(&self) -> Result<()> {
        if !(self.zpl_nm > 0.0) {
            return Err(invalid("zpl_nm", "must be > 0"));
        }
        if !(self.huang_rhys_s >= 0.0) {
            return Err(invalid("huang_rhys_s", "must be >= 0"));
        }
        if !(self.phonon_energy_mev > 0.0) {
            return Err(invalid("phonon_energy_mev", "must be > 0"));
        }
        if !(self.linewidth_nm > 0.0) {
            return Err(invalid("linewidth_nm", "must be > 0"));
        }
        let e_last = HC_EV_NM / self.zpl_nm - self.max_phonon_n as f64 * self.phonon_energy_mev * 1e-3;
        if e_last <= 0.0 {
            return Err(invalid("max_phonon_n", "replica energies must stay positive"));
        }
        Ok(())
    }

    /// Poisson weight `e^{-S} S^n / n!` of the n-phonon replica.
    pub fn weight(&self, n: u32) -> f64 {
        let s = self.huang_rhys_s;
        if s == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        // log-space keeps large n finite
        let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        (-s + n as f64 * s.ln() - ln_fact).exp()
    }

    /// `(wavelength_nm, weight)` for n = 0..=max_phonon_n.
    pub fn replicas(&self) -> Vec<(f64, f64)> {
        let e_zpl = HC_EV_NM / self.zpl_nm;
        (0..=self.max_phonon_n)
            .map(|n| {
                let e = e_zpl - n as f64 * self.phonon_energy_mev * 1e-3;
                (HC_EV_NM / e, self.weight(n))
            })
            .collect()
    }
}

/// Lorentzian-broadened replica spectrum on `wavelength_grid_nm`, normalized
/// to unit trapezoidal area over the grid.
pub fn huang_rhys_lineshape(s: &HuangRhysSpectrum, wavelength_grid_nm: &[f64]) -> Result<Vec<f64>> {
    s.validate()?;
    if wavelength_grid_nm.len() < 2 {
        return Err(invalid("wavelength_grid_nm", "needs at least two points"));
    }
    if wavelength_grid_nm.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("wavelength_grid_nm", "must be strictly increasing"));
    }
    let (lo, hi) = (wavelength_grid_nm[0], *wavelength_grid_nm.last().unwrap());
    if s.zpl_nm < lo || s.zpl_nm > hi {
        return Err(invalid(
            "wavelength_grid_nm",
            format!("grid [{lo}, {hi}] nm does not cover the ZPL at {} nm", s.zpl_nm),
        ));
    }
    let half = 0.5 * s.linewidth_nm;
    let replicas = s.replicas();
    let mut out: Vec<f64> = wavelength_grid_nm
        .iter()
        .map(|&l| {
            replicas
                .iter()
                .map(|&(c, w)| w * half / (std::f64::consts::PI * ((l - c).powi(2) + half * half)))
                .sum()
        })
        .collect();
    let area = trapezoid(wavelength_grid_nm, &out);
    if area > 0.0 {
        out.iter_mut().for_each(|v| *v /= area);
    }
    Ok(out)
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}
