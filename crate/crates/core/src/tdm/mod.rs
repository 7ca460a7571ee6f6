//! Transition dipole moments from gridded wavefunctions.
//!
//! Everything inside this module is in Hartree atomic units (ħ = m = e = 1,
//! lengths in bohr, energies in Hartree). Conversions to Debye and degrees
//! happen at the interface. In these units the velocity-form dipole is
//! `μ = i·⟨ψ_f|p|ψ_i⟩ / (E_f − E_i)` with `p = −i∇`.

mod fixtures;
mod perturb;
mod wfg;

pub use fixtures::{
    defect_like_pair, gaussian_p, gaussian_pz, gaussian_s, gaussian_sp_pair, hydrogen_1s, hydrogen_2pz,
    hydrogen_pair, HYDROGEN_1S_2PZ_DIPOLE, ZPL_573NM_HARTREE,
};
pub use perturb::{
    apply_perturbation, Perturbation, PerturbationKind, TransitionPair, C2C2_STRAIN_MIXING, FIELD_MIXING_PER_V_PER_ANGSTROM,
    FIELD_PARTNER_TILT_DEG, MAX_FIELD_V_PER_ANGSTROM, MAX_STRAIN, VACANCY_STRAIN_MIXING,
};
pub use wfg::{read_wfg, write_wfg, WFG_HEADER_BYTES, WFG_MAGIC};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{nearest_crystal_axis, AxialAngle, CrystalAxes};

/// One atomic unit of electric dipole moment (e·a₀) in Debye.
pub const DEBYE_PER_AU: f64 = 2.541_746_473;
pub const HARTREE_EV: f64 = 27.211_386_245_988;
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;

/// Smallest transition energy accepted before the pair counts as degenerate.
pub const DEGENERACY_TOLERANCE_HARTREE: f64 = 1e-8;
/// In-plane fraction of `|μ|²` below which no in-plane axis is reported.
pub const IN_PLANE_UNDEFINED_FRACTION: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Uniform grid centred on the origin: sample `i` along an axis sits at
/// `(i − (n−1)/2)·h`. Values are row-major with `z` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefunctionGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub values: Vec<Complex64>,
    /// Orbital eigenvalue in Hartree.
    pub energy: f64,
}

impl WavefunctionGrid {
    /// Validates shape and normalization (trapezoidal quadrature, 1 ± 10⁻⁶).
    pub fn new(dims: [usize; 3], spacing: [f64; 3], values: Vec<Complex64>, energy: f64) -> Result<Self> {
        let g = Self::unchecked(dims, spacing, values, energy)?;
        let n = g.norm_squared();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid("values", format!("norm² = {n}, expected 1 ± {NORM_TOLERANCE}")));
        }
        Ok(g)
    }

    /// Shape checks only; used while building a state before normalizing.
    pub(crate) fn unchecked(dims: [usize; 3], spacing: [f64; 3], values: Vec<Complex64>, energy: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 5) {
            return Err(invalid("dims", "every axis needs at least 5 samples"));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(invalid("spacing", "must be finite and > 0"));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(invalid("values", "length does not match dims"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("values", "non-finite amplitude"));
        }
        if !energy.is_finite() {
            return Err(invalid("energy", "must be finite"));
        }
        Ok(Self { dims, spacing, values, energy })
    }

    /// Samples `f(x, y, z)` on a centred grid and normalizes the result.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        energy: f64,
        f: impl Fn(f64, f64, f64) -> Complex64 + Sync,
    ) -> Result<Self> {
        let [nx, ny, nz] = dims;
        let values: Vec<Complex64> = (0..nx * ny * nz)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (ny * nz), (idx / nz) % ny, idx % nz);
                f(coord(i, nx, spacing[0]), coord(j, ny, spacing[1]), coord(k, nz, spacing[2]))
            })
            .collect();
        let mut g = Self::unchecked(dims, spacing, values, energy)?;
        g.normalize()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        coord(i, self.dims[axis], self.spacing[axis])
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    /// `⟨self|other⟩` under trapezoidal quadrature.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_grids(self, other)?;
        let [nx, ny, nz] = self.dims;
        let wz: Vec<f64> = (0..nz).map(|k| trap_weight(k, nz, self.spacing[2])).collect();
        let s = (0..nx)
            .into_par_iter()
            .map(|i| {
                let wi = trap_weight(i, nx, self.spacing[0]);
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..ny {
                    let wij = wi * trap_weight(j, ny, self.spacing[1]);
                    let base = self.index(i, j, 0);
                    for k in 0..nz {
                        acc += self.values[base + k].conj() * other.values[base + k] * (wij * wz[k]);
                    }
                }
                acc
            })
            .reduce(|| Complex64::new(0.0, 0.0), |a, b| a + b);
        Ok(s)
    }

    pub fn norm_squared(&self) -> f64 {
        self.inner(self).map(|c| c.re).unwrap_or(f64::NAN)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_squared();
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid("values", "cannot normalize a zero or non-finite state"));
        }
        let s = 1.0 / n.sqrt();
        self.values.par_iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    /// Multiplies by a global phase `e^{iφ}`.
    pub fn with_phase(mut self, phi_rad: f64) -> Self {
        let ph = Complex64::from_polar(1.0, phi_rad);
        self.values.iter_mut().for_each(|v| *v *= ph);
        self
    }

    /// Exact rotation by +90° about z by index permutation. Needs a square
    /// x–y cross-section.
    pub fn rotated_z_90(&self) -> Result<Self> {
        let [nx, ny, nz] = self.dims;
        if nx != ny || self.spacing[0] != self.spacing[1] {
            return Err(Error::GridMismatch("exact 90° rotation needs nx = ny and hx = hy".into()));
        }
        // ψ'(x, y) = ψ(y, −x); x ↦ −x is i ↦ n−1−i on a centred grid.
        let mut values = vec![Complex64::new(0.0, 0.0); self.len()];
        for i in 0..nx {
            for j in 0..ny {
                let src = self.index(j, nx - 1 - i, 0);
                let dst = self.index(i, j, 0);
                values[dst..dst + nz].copy_from_slice(&self.values[src..src + nz]);
            }
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Rotation by `deg` about z with trilinear resampling. The result is
    /// renormalized; samples mapped from outside the grid are zero.
    pub fn rotated_z(&self, deg: f64) -> Result<Self> {
        if !deg.is_finite() {
            return Err(Error::NonFiniteAngle(deg));
        }
        let (s, c) = deg.to_radians().sin_cos();
        self.resampled(|x, y, z| (c * x + s * y, -s * x + c * y, z))
    }

    /// `ψ'(r) = ψ(map(r))`, trilinearly interpolated, then renormalized.
    pub fn resampled(&self, map: impl Fn(f64, f64, f64) -> (f64, f64, f64) + Sync) -> Result<Self> {
        let [nx, ny, nz] = self.dims;
        let h = self.spacing;
        let values: Vec<Complex64> = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (ny * nz), (idx / nz) % ny, idx % nz);
                let (x, y, z) = map(coord(i, nx, h[0]), coord(j, ny, h[1]), coord(k, nz, h[2]));
                self.interpolate(x, y, z)
            })
            .collect();
        let mut g = Self { values, ..self.clone() };
        g.normalize()?;
        Ok(g)
    }

    /// Trilinear interpolation; zero outside the sampled box.
    pub fn interpolate(&self, x: f64, y: f64, z: f64) -> Complex64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for (a, r) in [x, y, z].into_iter().enumerate() {
            let n = self.dims[a];
            let u = r / self.spacing[a] + (n as f64 - 1.0) / 2.0;
            if !(u >= 0.0 && u <= (n - 1) as f64) {
                return Complex64::new(0.0, 0.0);
            }
            let b = (u.floor() as usize).min(n - 2);
            base[a] = b;
            frac[a] = u - b as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for di in 0..2 {
            let wx = if di == 0 { 1.0 - frac[0] } else { frac[0] };
            for dj in 0..2 {
                let wy = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
                for dk in 0..2 {
                    let wz = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
                    let w = wx * wy * wz;
                    if w != 0.0 {
                        acc += self.values[self.index(base[0] + di, base[1] + dj, base[2] + dk)] * w;
                    }
                }
            }
        }
        acc
    }
}

#[inline]
fn coord(i: usize, n: usize, h: f64) -> f64 {
    (i as f64 - (n as f64 - 1.0) / 2.0) * h
}

#[inline]
fn trap_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * h
    } else {
        h
    }
}

fn check_grids(a: &WavefunctionGrid, b: &WavefunctionGrid) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "dims {:?} / {:?}, spacing {:?} / {:?}",
            a.dims, b.dims, a.spacing, b.spacing
        )));
    }
    Ok(())
}

/// `⟨f|−i∂_a|i⟩` for each axis. Fourth-order central differences with zero
/// padding outside the grid, trapezoidal quadrature.
pub fn momentum_matrix_element(psi_f: &WavefunctionGrid, psi_i: &WavefunctionGrid) -> Result<[Complex64; 3]> {
    check_grids(psi_f, psi_i)?;
    let [nx, ny, nz] = psi_i.dims;
    let h = psi_i.spacing;
    let v = &psi_i.values;
    let at = |i: isize, j: isize, k: isize| -> Complex64 {
        if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
            Complex64::new(0.0, 0.0)
        } else {
            v[psi_i.index(i as usize, j as usize, k as usize)]
        }
    };
    let d = |c: [isize; 3], axis: usize| -> Complex64 {
        let shifted = |s: isize| {
            let mut p = c;
            p[axis] += s;
            at(p[0], p[1], p[2])
        };
        (shifted(-2) - shifted(-1) * 8.0 + shifted(1) * 8.0 - shifted(2)) / (12.0 * h[axis])
    };
    let zero = [Complex64::new(0.0, 0.0); 3];
    let grad = (0..nx)
        .into_par_iter()
        .map(|i| {
            let wi = trap_weight(i, nx, h[0]);
            let mut acc = zero;
            for j in 0..ny {
                let wij = wi * trap_weight(j, ny, h[1]);
                for k in 0..nz {
                    let w = wij * trap_weight(k, nz, h[2]);
                    let f = psi_f.values[psi_f.index(i, j, k)].conj() * w;
                    if f == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let c = [i as isize, j as isize, k as isize];
                    for (a, slot) in acc.iter_mut().enumerate() {
                        *slot += f * d(c, a);
                    }
                }
            }
            acc
        })
        .reduce(|| zero, |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    let minus_i = Complex64::new(0.0, -1.0);
    Ok(grad.map(|g| minus_i * g))
}

/// `⟨f|r_a|i⟩` for each axis; the length-form counterpart used as a cross-check.
pub fn position_matrix_element(psi_f: &WavefunctionGrid, psi_i: &WavefunctionGrid) -> Result<[Complex64; 3]> {
    check_grids(psi_f, psi_i)?;
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (axis, slot) in out.iter_mut().enumerate() {
        let mut weighted = psi_i.clone();
        let [nx, ny, nz] = psi_i.dims;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let r = psi_i.coordinate(axis, [i, j, k][axis]);
                    let idx = psi_i.index(i, j, k);
                    weighted.values[idx] *= r;
                }
            }
        }
        *slot = psi_f.inner(&weighted)?;
    }
    Ok(out)
}

/// In-plane polarization read-out of a dipole vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolePolarization {
    /// Measured polarization axis, 90° from the in-plane dipole direction.
    /// `None` when the dipole is purely out of plane.
    pub axis: Option<AxialAngle>,
    /// `|μ∥|² / |μ|²`.
    pub visibility: f64,
    /// Signed offset of `axis` from the nearest crystal axis, in `[−30, 30]`
    /// with an exact tie reported as `+30`.
    pub offset_deg: Option<f64>,
}

/// Projects `μ` onto the x–y plane. For complex `μ` the in-plane direction
/// is the one maximizing `|ê·μ|²`, which is invariant under a global phase.
pub fn dipole_to_polarization(mu: &[Complex64; 3], crystal: &CrystalAxes) -> Result<DipolePolarization> {
    let total: f64 = mu.iter().map(|c| c.norm_sqr()).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(invalid("mu", "dipole must be non-zero and finite"));
    }
    let (xx, yy) = (mu[0].norm_sqr(), mu[1].norm_sqr());
    let xy = (mu[0] * mu[1].conj()).re;
    let in_plane = xx + yy;
    let visibility = (in_plane / total).clamp(0.0, 1.0);
    if in_plane <= IN_PLANE_UNDEFINED_FRACTION * total {
        return Ok(DipolePolarization { axis: None, visibility, offset_deg: None });
    }
    let dipole_dir = 0.5 * (2.0 * xy).atan2(xx - yy).to_degrees();
    let axis = AxialAngle::new(dipole_dir + 90.0)?;
    let (_, offset) = nearest_crystal_axis(axis, crystal);
    Ok(DipolePolarization { axis: Some(axis), visibility, offset_deg: Some(offset) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleResult {
    /// Atomic units (e·a₀).
    pub mu: [Complex64; 3],
    pub transition_energy_hartree: f64,
    pub in_plane_axis: Option<AxialAngle>,
    pub in_plane_visibility: f64,
    pub offset_from_crystal_axis_deg: Option<f64>,
}

impl DipoleResult {
    pub fn magnitude_au(&self) -> f64 {
        self.mu.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn magnitude_debye(&self) -> f64 {
        self.magnitude_au() * DEBYE_PER_AU
    }
}

/// `μ = i·⟨f|p|i⟩ / (E_f − E_i)` with the energies taken from the grids.
pub fn transition_dipole(
    psi_f: &WavefunctionGrid,
    psi_i: &WavefunctionGrid,
    crystal: &CrystalAxes,
) -> Result<DipoleResult> {
    let de = psi_f.energy - psi_i.energy;
    if de.abs() < DEGENERACY_TOLERANCE_HARTREE {
        return Err(Error::DegenerateTransition(de.abs()));
    }
    let p = momentum_matrix_element(psi_f, psi_i)?;
    let scale = Complex64::new(0.0, 1.0 / de);
    let mu = p.map(|c| scale * c);
    let pol = dipole_to_polarization(&mu, crystal)?;
    Ok(DipoleResult {
        mu,
        transition_energy_hartree: de,
        in_plane_axis: pol.axis,
        in_plane_visibility: pol.visibility,
        offset_from_crystal_axis_deg: pol.offset_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: Complex64 = Complex64::new(0.0, 0.0);

    fn grid(n: usize, h: f64) -> ([usize; 3], [f64; 3]) {
        ([n; 3], [h; 3])
    }

    fn axes0() -> CrystalAxes {
        CrystalAxes::new(0.0).unwrap()
    }

    #[test]
    fn diagonal_momentum_of_real_state_vanishes() {
        let (d, h) = grid(41, 0.25);
        let s = gaussian_p(d, h, 0.6, 30.0, 0.0).unwrap();
        let p = momentum_matrix_element(&s, &s).unwrap();
        assert!(p.iter().all(|c| c.norm() < 1e-12), "{p:?}");
    }

    #[test]
    fn gaussian_s_to_px_closed_form() {
        // Independent oracle: separable 1D quadrature of x·e^{-2αx²} times the
        // analytic derivative, with the Gaussian normalizations worked out by
        // direct summation on a much finer 1D mesh.
        let alpha: f64 = 0.5;
        let (fine_n, fine_h) = (200_001usize, 1e-4);
        let (mut ss, mut pp, mut cross) = (0.0, 0.0, 0.0);
        for i in 0..fine_n {
            let x = (i as f64 - (fine_n - 1) as f64 / 2.0) * fine_h;
            let g = (-alpha * x * x).exp();
            ss += g * g * fine_h;
            pp += x * x * g * g * fine_h;
            cross += x * g * (-2.0 * alpha * x * g) * fine_h;
        }
        // ⟨p_x|∂_x|s⟩ = cross·S² / sqrt(P·S⁵) with S = ∫g², P = ∫x²g².
        let d = cross * ss * ss / (pp * ss.powi(5)).sqrt();

        let (d3, h) = grid(81, 0.2);
        let s = gaussian_s(d3, h, alpha, 0.0).unwrap();
        let px = gaussian_p(d3, h, alpha, 0.0, 0.1).unwrap();
        let p = momentum_matrix_element(&px, &s).unwrap();
        // p = −i·d, so the imaginary part is −d (= √α analytically).
        assert!((p[0].im + d).abs() < 1e-3 * d.abs(), "{:?} vs {}", p[0], -d);
        assert!((d + alpha.sqrt()).abs() < 1e-6);
        assert!(p[0].re.abs() < 1e-12 && p[1].norm() < 1e-12 && p[2].norm() < 1e-12);
    }

    #[test]
    fn conjugate_symmetry() {
        let (d, h) = grid(41, 0.25);
        let a = gaussian_s(d, h, 0.7, 0.0).unwrap().with_phase(0.4);
        let b = gaussian_p(d, h, 0.5, 23.0, 0.1).unwrap().with_phase(-1.1);
        let fi = momentum_matrix_element(&b, &a).unwrap();
        let if_ = momentum_matrix_element(&a, &b).unwrap();
        for ax in 0..3 {
            assert!((fi[ax] - if_[ax].conj()).norm() < 1e-8);
        }
    }

    #[test]
    fn in_plane_dipole_axis_and_visibility() {
        let (d, h) = grid(41, 0.25);
        let s = gaussian_s(d, h, 0.5, 0.0).unwrap();
        let px = gaussian_p(d, h, 0.5, 0.0, 0.1).unwrap();
        let r = transition_dipole(&px, &s, &axes0()).unwrap();
        assert!((r.in_plane_visibility - 1.0).abs() < 1e-12);
        assert!((r.in_plane_axis.unwrap().degrees() - 90.0).abs() < 1e-9);
        assert!(r.mu[1].norm() < 1e-12 && r.mu[2].norm() < 1e-12);

        let pz = gaussian_pz(d, h, 0.5, 0.1).unwrap();
        let r = transition_dipole(&pz, &s, &axes0()).unwrap();
        assert!(r.in_plane_visibility < 1e-12);
        assert!(r.in_plane_axis.is_none() && r.offset_from_crystal_axis_deg.is_none());
    }

    #[test]
    fn degenerate_and_mismatched_pairs_rejected() {
        let (d, h) = grid(21, 0.4);
        let s = gaussian_s(d, h, 0.5, 0.0).unwrap();
        let px = gaussian_p(d, h, 0.5, 0.0, 0.0).unwrap();
        assert!(matches!(transition_dipole(&px, &s, &axes0()), Err(Error::DegenerateTransition(_))));
        let other = gaussian_s([23; 3], h, 0.5, 0.1).unwrap();
        assert!(matches!(momentum_matrix_element(&other, &s), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn polarization_projection_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mu = [Complex64::new(r, 0.0), C0, Complex64::new(r, 0.0)];
        let p = dipole_to_polarization(&mu, &axes0()).unwrap();
        assert!((p.visibility - 0.5).abs() < 1e-12);
        // A dipole along a crystal axis polarizes 30° from the neighbouring axes.
        let along = [Complex64::new(1.0, 0.0), C0, C0];
        let p = dipole_to_polarization(&along, &axes0()).unwrap();
        assert_eq!(p.offset_deg, Some(30.0));
        assert!(dipole_to_polarization(&[C0; 3], &axes0()).is_err());
        // Global phase does not move the axis.
        let phased = [Complex64::from_polar(0.8, 1.3), Complex64::from_polar(0.6, 1.3), C0];
        let plain = [Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0), C0];
        let (a, b) = (
            dipole_to_polarization(&phased, &axes0()).unwrap(),
            dipole_to_polarization(&plain, &axes0()).unwrap(),
        );
        assert!((a.axis.unwrap().degrees() - b.axis.unwrap().degrees()).abs() < 1e-9);
    }

    #[test]
    fn exact_quarter_turn_maps_px_to_py() {
        let (d, h) = grid(31, 0.3);
        let px = gaussian_p(d, h, 0.5, 0.0, 0.0).unwrap();
        let py = gaussian_p(d, h, 0.5, 90.0, 0.0).unwrap();
        let r = px.rotated_z_90().unwrap();
        let max = r.values.iter().zip(&py.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(max < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_grid_samples() {
        let (d, h) = grid(21, 0.4);
        let p = gaussian_p(d, h, 0.5, 17.0, 0.0).unwrap();
        let (x, y, z) = (p.coordinate(0, 7), p.coordinate(1, 12), p.coordinate(2, 3));
        assert!((p.interpolate(x, y, z) - p.values[p.index(7, 12, 3)]).norm() < 1e-14);
        assert_eq!(p.interpolate(100.0, 0.0, 0.0), C0);
    }
}
