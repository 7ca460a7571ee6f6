//! Cohort statistics of excitation/emission dipole axes relative to the
//! crystal axes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    circular_mean_std, nearest_crystal_axis, signed_axis_difference, wrap_axis, CrystalAxes, CRYSTAL_AXIS_PERIOD_DEG,
};
use crate::simulator::FWHM_PER_SIGMA;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleRecord {
    pub emitter_id: String,
    pub exc_axis_deg: f64,
    pub exc_axis_err_deg: f64,
    pub em_axis_deg: f64,
    pub em_axis_err_deg: f64,
    pub exc_visibility: f64,
    pub em_visibility: f64,
    pub g2_0: f64,
    pub lifetime_ns: f64,
}

impl DipoleRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("exc_axis_deg", self.exc_axis_deg), ("em_axis_deg", self.em_axis_deg)] {
            if !(0.0..180.0).contains(&a) {
                return Err(invalid(name, format!("axis must lie in [0, 180), got {a}")));
            }
        }
        for (name, v) in [("exc_visibility", self.exc_visibility), ("em_visibility", self.em_visibility)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("visibility must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// Indices into the input records.
    pub members: Vec<usize>,
    pub em_offset_mean_deg: f64,
    pub em_offset_std_deg: f64,
    pub misalignment_mean_deg: f64,
    /// Orthogonal-regression slope of emission against excitation axis;
    /// `None` with fewer than two members or no spread.
    pub slope: Option<f64>,
    pub intercept_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub n: usize,
    pub crystal_theta0_deg: f64,
    pub exc_offsets_deg: Vec<f64>,
    pub em_offsets_deg: Vec<f64>,
    /// Circular statistics with the 60° crystal period.
    pub exc_offset_mean_deg: f64,
    pub exc_offset_std_deg: f64,
    pub em_offset_mean_deg: f64,
    pub em_offset_std_deg: f64,
    /// `em − exc` folded into (−90, 90].
    pub misalignment_signed_deg: Vec<f64>,
    /// Axial (180°-periodic) statistics of the signed misalignment.
    pub misalignment_axial_mean_deg: f64,
    pub misalignment_axial_std_deg: f64,
    /// Arithmetic statistics of `|em − exc|`.
    pub misalignment_abs_mean_deg: f64,
    pub misalignment_abs_std_deg: f64,
    /// 1-based cluster label per record.
    pub assignment: Vec<u8>,
    pub clusters: Vec<ClusterSummary>,
    /// Set when one of the two clusters ended up empty.
    pub degenerate_clusters: bool,
    /// Difference of the cluster mean emission offsets (cluster 2 − 1).
    pub group_spacing_deg: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// 1D two-means (Lloyd) with centers initialized at −15 and +15. Ties go
/// to cluster 1. Returns labels 1/2.
pub fn two_means(values: &[f64]) -> Vec<u8> {
    let mut c = [-15.0, 15.0];
    let mut labels = vec![0u8; values.len()];
    for _ in 0..1000 {
        let next: Vec<u8> = values
            .iter()
            .map(|&v| if (v - c[0]).abs() <= (v - c[1]).abs() { 1 } else { 2 })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
        for (k, ck) in c.iter_mut().enumerate() {
            let members: Vec<f64> =
                values.iter().zip(&labels).filter(|(_, &l)| l as usize == k + 1).map(|(v, _)| *v).collect();
            if !members.is_empty() {
                *ck = members.iter().sum::<f64>() / members.len() as f64;
            }
        }
    }
    labels
}

fn orthogonal_regression(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() < 2 {
        return None;
    }
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxy == 0.0 {
        return None;
    }
    let slope = (syy - sxx + ((syy - sxx).powi(2) + 4.0 * sxy * sxy).sqrt()) / (2.0 * sxy);
    Some((slope, my - slope * mx))
}

pub fn angle_statistics(records: &[DipoleRecord], crystal: &CrystalAxes) -> Result<AngleReport> {
    if records.len() < 2 {
        return Err(Error::Analysis("angle statistics need at least 2 records".into()));
    }
    for r in records {
        r.validate()?;
    }
    let mut exc_offsets = Vec::new();
    let mut em_offsets = Vec::new();
    let mut exc_unwrapped = Vec::new();
    let mut signed = Vec::new();
    for r in records {
        let (exc_axis, exc_off) = nearest_crystal_axis(wrap_axis(r.exc_axis_deg)?, crystal);
        let (_, em_off) = nearest_crystal_axis(wrap_axis(r.em_axis_deg)?, crystal);
        exc_offsets.push(exc_off);
        em_offsets.push(em_off);
        exc_unwrapped.push(exc_axis.degrees() + exc_off);
        signed.push(signed_axis_difference(r.em_axis_deg, r.exc_axis_deg));
    }
    let p = CRYSTAL_AXIS_PERIOD_DEG;
    let (exc_m, exc_s) = circular_mean_std(&exc_offsets, p).expect("non-empty");
    let (em_m, em_s) = circular_mean_std(&em_offsets, p).expect("non-empty");
    let (mis_m, mis_s) = circular_mean_std(&signed, 180.0).expect("non-empty");
    let abs: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
    let (abs_m, abs_s) = mean_std(&abs);

    let assignment = two_means(&em_offsets);
    let clusters: Vec<ClusterSummary> = [1u8, 2]
        .iter()
        .filter_map(|&k| {
            let members: Vec<usize> = (0..records.len()).filter(|&i| assignment[i] == k).collect();
            if members.is_empty() {
                return None;
            }
            let offs: Vec<f64> = members.iter().map(|&i| em_offsets[i]).collect();
            let mis: Vec<f64> = members.iter().map(|&i| signed[i]).collect();
            let x: Vec<f64> = members.iter().map(|&i| exc_unwrapped[i]).collect();
            let y: Vec<f64> = members.iter().map(|&i| exc_unwrapped[i] + signed[i]).collect();
            let (om, os) = mean_std(&offs);
            let reg = orthogonal_regression(&x, &y);
            Some(ClusterSummary {
                members,
                em_offset_mean_deg: om,
                em_offset_std_deg: os,
                misalignment_mean_deg: mean_std(&mis).0,
                slope: reg.map(|r| r.0),
                intercept_deg: reg.map(|r| r.1),
            })
        })
        .collect();
    let degenerate = clusters.len() < 2;
    let spacing = (!degenerate).then(|| clusters[1].em_offset_mean_deg - clusters[0].em_offset_mean_deg);
    Ok(AngleReport {
        n: records.len(),
        crystal_theta0_deg: crystal.theta0.degrees(),
        exc_offsets_deg: exc_offsets,
        em_offsets_deg: em_offsets,
        exc_offset_mean_deg: exc_m,
        exc_offset_std_deg: exc_s,
        em_offset_mean_deg: em_m,
        em_offset_std_deg: em_s,
        misalignment_signed_deg: signed,
        misalignment_axial_mean_deg: mis_m,
        misalignment_axial_std_deg: mis_s,
        misalignment_abs_mean_deg: abs_m,
        misalignment_abs_std_deg: abs_s,
        assignment,
        clusters,
        degenerate_clusters: degenerate,
        group_spacing_deg: spacing,
    })
}

/// Generator for a synthetic cohort: each emitter sits on a random crystal
/// axis; its excitation axis scatters around that axis and its emission axis
/// is displaced by ±`misalignment_deg` with a random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSpec {
    pub n: usize,
    pub crystal_theta0_deg: f64,
    pub exc_center_deg: f64,
    pub exc_fwhm_deg: f64,
    pub em_fwhm_deg: f64,
    pub misalignment_deg: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n: 23,
            crystal_theta0_deg: 43.52,
            exc_center_deg: 0.0,
            exc_fwhm_deg: 8.0,
            em_fwhm_deg: 4.0,
            misalignment_deg: 18.9,
        }
    }
}

impl CohortSpec {
    pub fn exc_sigma_deg(&self) -> f64 {
        self.exc_fwhm_deg / FWHM_PER_SIGMA
    }

    pub fn em_sigma_deg(&self) -> f64 {
        self.em_fwhm_deg / FWHM_PER_SIGMA
    }
}

pub fn synthetic_cohort(spec: &CohortSpec, seed: u64) -> Result<Vec<DipoleRecord>> {
    if spec.n < 2 {
        return Err(invalid("n", "cohort needs at least 2 emitters"));
    }
    if !(spec.exc_fwhm_deg >= 0.0 && spec.em_fwhm_deg >= 0.0) {
        return Err(invalid("fwhm", "widths must be >= 0"));
    }
    let crystal = CrystalAxes::new(spec.crystal_theta0_deg)?;
    let axes = crystal.axes();
    let exc_noise = Normal::new(0.0, spec.exc_sigma_deg()).map_err(|e| invalid("exc_fwhm_deg", e.to_string()))?;
    let em_noise = Normal::new(0.0, spec.em_sigma_deg()).map_err(|e| invalid("em_fwhm_deg", e.to_string()))?;
    let lifetime = Normal::new(4.0, 0.3).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.n)
        .map(|i| {
            let axis = axes[rng.random_range(0..3)].degrees();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let exc = wrap_axis(axis + spec.exc_center_deg + exc_noise.sample(&mut rng))?;
            let em = wrap_axis(axis + sign * spec.misalignment_deg + em_noise.sample(&mut rng))?;
            Ok(DipoleRecord {
                emitter_id: format!("E{:02}", i + 1),
                exc_axis_deg: exc.degrees(),
                exc_axis_err_deg: 0.5,
                em_axis_deg: em.degrees(),
                em_axis_err_deg: 0.5,
                exc_visibility: rng.random_range(0.85..0.99),
                em_visibility: rng.random_range(0.90..0.99),
                g2_0: rng.random_range(0.01..0.1),
                lifetime_ns: lifetime.sample(&mut rng),
            })
        })
        .collect()
}
