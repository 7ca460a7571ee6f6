//! Analytic wavefunction fixtures standing in for electronic-structure output.

use num_complex::Complex64;

use super::perturb::{TransitionPair, FIELD_PARTNER_TILT_DEG};
use super::{WavefunctionGrid, HARTREE_EV};
use crate::error::Result;
use crate::geometry::{nearest_crystal_axis, CrystalAxes};

/// `|⟨1s|z|2p_z⟩|` for hydrogen in bohr: 128√2/243.
pub const HYDROGEN_1S_2PZ_DIPOLE: f64 = 0.744_935_539_027_803_3;

/// Photon energy of a 573 nm line in Hartree; default transition energy of
/// the Gaussian fixtures.
pub const ZPL_573NM_HARTREE: f64 = 1_239.841_984 / 573.0 / HARTREE_EV;

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

pub fn gaussian_s(dims: [usize; 3], spacing: [f64; 3], alpha: f64, energy: f64) -> Result<WavefunctionGrid> {
    WavefunctionGrid::from_fn(dims, spacing, energy, |x, y, z| real((-alpha * (x * x + y * y + z * z)).exp()))
}

/// In-plane p orbital pointing at `phi_deg` from the x axis.
pub fn gaussian_p(
    dims: [usize; 3],
    spacing: [f64; 3],
    alpha: f64,
    phi_deg: f64,
    energy: f64,
) -> Result<WavefunctionGrid> {
    let (s, c) = phi_deg.to_radians().sin_cos();
    WavefunctionGrid::from_fn(dims, spacing, energy, move |x, y, z| {
        real((c * x + s * y) * (-alpha * (x * x + y * y + z * z)).exp())
    })
}

pub fn gaussian_pz(dims: [usize; 3], spacing: [f64; 3], alpha: f64, energy: f64) -> Result<WavefunctionGrid> {
    WavefunctionGrid::from_fn(dims, spacing, energy, |x, y, z| real(z * (-alpha * (x * x + y * y + z * z)).exp()))
}

pub fn hydrogen_1s(dims: [usize; 3], spacing: [f64; 3]) -> Result<WavefunctionGrid> {
    WavefunctionGrid::from_fn(dims, spacing, -0.5, |x, y, z| real((-(x * x + y * y + z * z).sqrt()).exp()))
}

pub fn hydrogen_2pz(dims: [usize; 3], spacing: [f64; 3]) -> Result<WavefunctionGrid> {
    WavefunctionGrid::from_fn(dims, spacing, -0.125, |x, y, z| {
        real(z * (-0.5 * (x * x + y * y + z * z).sqrt()).exp())
    })
}

/// Hydrogen 1s → 2p_z on a cubic grid of half-width `half_width` bohr.
pub fn hydrogen_pair(half_width: f64, spacing: f64) -> Result<TransitionPair> {
    let n = 2 * (half_width / spacing).round() as usize + 1;
    let (d, h) = ([n; 3], [spacing; 3]);
    Ok(TransitionPair::new(hydrogen_1s(d, h)?, hydrogen_2pz(d, h)?))
}

/// s → p(φ) Gaussian pair with the perturbation partners attached: the
/// strain partner is the in-plane p orbital at φ + 90°, the field partner
/// is `cos β·p_z + sin β·p(φ+90°)`.
pub fn gaussian_sp_pair(
    dims: [usize; 3],
    spacing: [f64; 3],
    alpha: f64,
    phi_deg: f64,
    transition_energy: f64,
) -> Result<TransitionPair> {
    let s = gaussian_s(dims, spacing, alpha, 0.0)?;
    let p = gaussian_p(dims, spacing, alpha, phi_deg, transition_energy)?;
    let perp = gaussian_p(dims, spacing, alpha, phi_deg + 90.0, transition_energy)?;
    let pz = gaussian_pz(dims, spacing, alpha, transition_energy)?;
    let (sb, cb) = FIELD_PARTNER_TILT_DEG.to_radians().sin_cos();
    let mut field = pz.clone();
    for (f, q) in field.values.iter_mut().zip(&perp.values) {
        *f = *f * cb + q * sb;
    }
    field.normalize()?;
    Ok(TransitionPair { initial: s, final_state: p, strain_partner: Some(perp), field_partner: Some(field) })
}

/// Gaussian pair whose polarization axis sits `offset_deg` from a crystal
/// axis (`|offset_deg| < 30`).
pub fn defect_like_pair(crystal: &CrystalAxes, offset_deg: f64, dims: [usize; 3], spacing: [f64; 3]) -> Result<TransitionPair> {
    let (axis, _) = nearest_crystal_axis(crystal.theta0, crystal);
    // Polarization axis = dipole direction + 90°.
    let phi = axis.degrees() + offset_deg - 90.0;
    gaussian_sp_pair(dims, spacing, 0.5, phi, ZPL_573NM_HARTREE)
}
