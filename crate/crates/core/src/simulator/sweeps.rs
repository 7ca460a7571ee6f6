use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, simulate_timetags, InstrumentConfig};
use crate::analysis::{DecayMap, PolarSweep};
use crate::error::{invalid, Result};
use crate::geometry::{wrap_axis, CrystalAxes};
use crate::photophysics::{detection_probability, emission_state_at, excitation_probability, EmitterModel};

/// Decay-map rows start this far before the nominal pulse arrival so that
/// IRF spill-over and pre-pulse darks stay on the map.
pub const DECAY_MAP_PRE_PS: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Laser polarization rotates, detection unpolarized.
    Excitation,
    /// Laser parked on the excitation axis, detection polarizer rotates.
    Emission,
}

/// Time-averaged polarizer transmission of the emitted light,
/// `∫ τ⁻¹e^{-t/τ} p_det(θ; t) dt`, by Simpson's rule in `u = 1 - e^{-t/τ}`.
pub fn emission_transmission(m: &EmitterModel, polarizer_deg: f64) -> Result<f64> {
    let pol = wrap_axis(polarizer_deg)?;
    const N: usize = 4096;
    let f = |u: f64| -> Result<f64> {
        let t = if u >= 1.0 {
            f64::INFINITY
        } else {
            -m.lifetime_ns * (-u).ln_1p()
        };
        Ok(detection_probability(&emission_state_at(m, t)?, pol))
    };
    let h = 1.0 / N as f64;
    let mut acc = f(0.0)? + f(1.0)?;
    for i in 1..N {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Integrated counts per angle. With `seed == None` the expected (noiseless)
/// counts are returned; otherwise each point is a Poisson draw. Dead time is
/// not modelled at this level.
pub fn simulate_polarization_sweep(
    m: &EmitterModel,
    inst: &InstrumentConfig,
    mode: SweepMode,
    angles_deg: &[f64],
    acquisition_s: f64,
    seed: Option<u64>,
) -> Result<PolarSweep> {
    m.validate()?;
    inst.validate()?;
    if angles_deg.is_empty() {
        return Err(invalid("angles", "empty angle list"));
    }
    let mut distinct: Vec<f64> = angles_deg
        .iter()
        .map(|a| wrap_axis(*a).map(|w| w.degrees()))
        .collect::<Result<_>>()?;
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 8 {
        return Err(invalid("angles", "need at least 8 distinct polarizer axes"));
    }
    if !(acquisition_s > 0.0) {
        return Err(invalid("acquisition_s", "must be > 0"));
    }

    let pulses = acquisition_s * inst.rep_rate_mhz * 1e6;
    let eta = inst.detection_efficiency;
    let (background, expected): (f64, Vec<f64>) = match mode {
        SweepMode::Excitation => {
            let bg = 2.0 * inst.dark_rate_cps * acquisition_s;
            let e = angles_deg
                .iter()
                .map(|a| Ok(bg + pulses * eta * excitation_probability(m, wrap_axis(*a)?, 1.0)?))
                .collect::<Result<_>>()?;
            (bg, e)
        }
        SweepMode::Emission => {
            let bg = inst.dark_rate_cps * acquisition_s;
            let p = excitation_probability(m, m.exc_axis, 1.0)?;
            let e = angles_deg
                .iter()
                .map(|a| Ok(bg + pulses * eta * p * emission_transmission(m, *a)?))
                .collect::<Result<_>>()?;
            (bg, e)
        }
    };

    let intensities: Vec<f64> = match seed {
        None => expected,
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            expected.iter().map(|&mu| poisson_draw(mu, &mut rng)).collect()
        }
    };
    Ok(PolarSweep {
        angles_deg: angles_deg.to_vec(),
        errors: intensities.iter().map(|v| v.max(1.0).sqrt()).collect(),
        intensities,
        acquisition_s,
        background,
    })
}

fn poisson_draw(mu: f64, rng: &mut ChaCha8Rng) -> f64 {
    if mu <= 0.0 {
        0.0
    } else {
        Poisson::new(mu).expect("positive mean").sample(rng)
    }
}

/// Polarization-resolved decay map: for each detection-polarizer angle a
/// time-tag stream is simulated with the laser on the excitation axis, and
/// clicks are histogrammed by their delay after the pulse.
pub fn simulate_decay_map(
    m: &EmitterModel,
    inst: &InstrumentConfig,
    angles_deg: &[f64],
    n_pulses: u64,
    time_bin_ps: u64,
    seed: u64,
) -> Result<DecayMap> {
    inst.validate()?;
    let period = inst.sync_period_ps();
    if time_bin_ps == 0 {
        return Err(invalid("time_bin_ps", "must be >= 1"));
    }
    if time_bin_ps > period {
        return Err(invalid(
            "time_bin_ps",
            format!("bin width {time_bin_ps} ps exceeds the pulse period {period} ps"),
        ));
    }
    if angles_deg.is_empty() {
        return Err(invalid("angles", "empty angle list"));
    }
    let n_rows = period.div_ceil(time_bin_ps) as usize;
    let mut edges: Vec<i64> = (0..n_rows as i64)
        .map(|r| r * time_bin_ps as i64 - DECAY_MAP_PRE_PS)
        .collect();
    edges.push(period as i64 - DECAY_MAP_PRE_PS);

    let columns: Vec<Vec<u64>> = angles_deg
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let pol = wrap_axis(*a)?;
            let stream = simulate_timetags(m, inst, m.exc_axis, Some(pol), n_pulses, derive_seed(seed, i as u64))?;
            let mut col = vec![0u64; n_rows];
            let shift = inst.timing_offset_ps.round() as i64 - DECAY_MAP_PRE_PS;
            for r in &stream.records {
                let rel = (r.timestamp_ps as i64 - shift).rem_euclid(period as i64);
                col[(rel as u64 / time_bin_ps) as usize] += 1;
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;

    let counts = (0..n_rows)
        .map(|row| columns.iter().map(|c| c[row]).collect())
        .collect();
    Ok(DecayMap {
        time_edges_ps: edges,
        angles_deg: angles_deg.to_vec(),
        counts,
        acquisition_s: n_pulses as f64 / (inst.rep_rate_mhz * 1e6),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShgConfig {
    Parallel,
    Perpendicular,
}

/// Second-harmonic source strength and detector background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShgSource {
    pub counts_per_mw2: f64,
    pub background_counts: f64,
    pub acquisition_s: f64,
}

impl Default for ShgSource {
    fn default() -> Self {
        Self {
            counts_per_mw2: 50.0,
            background_counts: 20.0,
            acquisition_s: 10.0,
        }
    }
}

/// Six-fold SHG polar pattern `A·P²·cos²(3(θ−θ₀)) + B` (sin² in the
/// perpendicular configuration).
pub fn simulate_shg_sweep(
    crystal: &CrystalAxes,
    pump_power_mw: f64,
    angles_deg: &[f64],
    config: ShgConfig,
    source: &ShgSource,
    seed: Option<u64>,
) -> Result<PolarSweep> {
    if !(pump_power_mw > 0.0) {
        return Err(invalid("pump_power", "must be > 0"));
    }
    if angles_deg.is_empty() {
        return Err(invalid("angles", "empty angle list"));
    }
    let amp = source.counts_per_mw2 * pump_power_mw * pump_power_mw;
    let theta0 = crystal.theta0.radians();
    let expected: Vec<f64> = angles_deg
        .iter()
        .map(|a| {
            let x = 3.0 * (a.to_radians() - theta0);
            let shape = match config {
                ShgConfig::Parallel => x.cos().powi(2),
                ShgConfig::Perpendicular => x.sin().powi(2),
            };
            amp * shape + source.background_counts
        })
        .collect();
    let intensities: Vec<f64> = match seed {
        None => expected,
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            expected.iter().map(|&mu| poisson_draw(mu, &mut rng)).collect()
        }
    };
    Ok(PolarSweep {
        angles_deg: angles_deg.to_vec(),
        errors: intensities.iter().map(|v| v.max(1.0).sqrt()).collect(),
        intensities,
        acquisition_s: source.acquisition_s,
        background: source.background_counts,
    })
}
