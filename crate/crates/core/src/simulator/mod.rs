//! Monte Carlo generation of detector time-tag streams and of the derived
//! measurement products (polarization sweeps, decay maps, PL maps, SHG sweeps).
//!
//! Randomness is drawn from ChaCha8 streams. A time-tag simulation is split
//! into fixed-size pulse blocks; block `b` always uses stream `b` of the run
//! seed, so the merged output does not depend on how blocks are scheduled.

mod plmap;
mod sweeps;

pub use plmap::{simulate_pl_map, PlEmitter, PlMap, PlScan};
pub(crate) use plmap::gaussian_interval;
pub use sweeps::{
    emission_transmission, simulate_decay_map, simulate_polarization_sweep, simulate_shg_sweep,
    ShgConfig, ShgSource, SweepMode, DECAY_MAP_PRE_PS,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::AxialAngle;
use crate::photophysics::{
    detection_probability, emission_state_at, excitation_probability, sample_decay_delay, EmitterModel,
};

/// FWHM of a Gaussian divided by its standard deviation, `2·sqrt(2·ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Pulses simulated per rng stream.
pub const BLOCK_PULSES: u64 = 1 << 16;

/// Record flag set on dark/background counts (ground truth, ignored by analyzers).
pub const FLAG_BACKGROUND: u16 = 0x1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstrumentConfig {
    pub rep_rate_mhz: f64,
    pub irf_fwhm_ps: f64,
    /// Per channel.
    pub dark_rate_cps: f64,
    pub dead_time_ns: f64,
    /// Probability that a photon is routed to channel 0.
    pub splitter_ratio: f64,
    pub detection_efficiency: f64,
    pub polarizer_in_path: bool,
    /// Fixed delay between the sync edge and a zero-delay photon arrival.
    pub timing_offset_ps: f64,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            rep_rate_mhz: 20.0,
            irf_fwhm_ps: 70.0,
            dark_rate_cps: 100.0,
            dead_time_ns: 77.0,
            splitter_ratio: 0.5,
            detection_efficiency: 0.35,
            polarizer_in_path: false,
            timing_offset_ps: 2000.0,
        }
    }
}

impl InstrumentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_mhz > 0.0 && self.rep_rate_mhz.is_finite()) {
            return Err(invalid("rep_rate_mhz", "must be > 0"));
        }
        if self.sync_period_ps() == 0 {
            return Err(invalid("rep_rate_mhz", "pulse period rounds to zero picoseconds"));
        }
        for (name, v) in [
            ("irf_fwhm_ps", self.irf_fwhm_ps),
            ("dark_rate_cps", self.dark_rate_cps),
            ("dead_time_ns", self.dead_time_ns),
            ("timing_offset_ps", self.timing_offset_ps),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("splitter_ratio", self.splitter_ratio),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn sync_period_ps(&self) -> u64 {
        (1e6 / self.rep_rate_mhz).round() as u64
    }

    pub fn irf_sigma_ps(&self) -> f64 {
        self.irf_fwhm_ps / FWHM_PER_SIGMA
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    pub timestamp_ps: u64,
    pub channel: u16,
    pub flags: u16,
}

/// Time-ordered detector clicks of one acquisition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagStream {
    pub records: Vec<TimeTag>,
    pub duration_ps: u64,
    pub sync_period_ps: u64,
}

impl TimeTagStream {
    pub fn is_sorted(&self) -> bool {
        self.records.windows(2).all(|w| w[0].timestamp_ps <= w[1].timestamp_ps)
    }

    pub fn channel_count(&self, channel: u16) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }

    pub fn channel_timestamps(&self, channel: u16) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.timestamp_ps)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// SplitMix64 finalizer; derives independent sub-seeds from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub fn simulate_timetags(
    m: &EmitterModel,
    inst: &InstrumentConfig,
    laser_axis: AxialAngle,
    det_polarizer: Option<AxialAngle>,
    n_pulses: u64,
    seed: u64,
) -> Result<TimeTagStream> {
    simulate_timetags_with(m, inst, laser_axis, det_polarizer, n_pulses, seed, Execution::Parallel)
}

pub fn simulate_timetags_with(
    m: &EmitterModel,
    inst: &InstrumentConfig,
    laser_axis: AxialAngle,
    det_polarizer: Option<AxialAngle>,
    n_pulses: u64,
    seed: u64,
    execution: Execution,
) -> Result<TimeTagStream> {
    m.validate()?;
    inst.validate()?;
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "must be >= 1"));
    }
    let period = inst.sync_period_ps();
    let duration = n_pulses
        .checked_mul(period)
        .filter(|d| *d <= i64::MAX as u64 / 2)
        .ok_or_else(|| Error::TimestampOverflow(format!("{n_pulses} pulses of {period} ps")))?;

    let ctx = BlockContext {
        model: m,
        inst,
        det_polarizer,
        p_exc: excitation_probability(m, laser_axis, 1.0)?,
        period,
        n_pulses,
        duration,
        seed,
    };
    let n_blocks = n_pulses.div_ceil(BLOCK_PULSES);
    let blocks: Vec<Vec<TimeTag>> = match execution {
        Execution::Sequential => (0..n_blocks).map(|b| ctx.run_block(b)).collect(),
        Execution::Parallel => (0..n_blocks).into_par_iter().map(|b| ctx.run_block(b)).collect(),
    };
    let mut records: Vec<TimeTag> = blocks.into_iter().flatten().collect();
    records.par_sort_unstable();

    let records = apply_dead_time(records, (inst.dead_time_ns * 1e3).round() as u64);
    Ok(TimeTagStream {
        records,
        duration_ps: duration,
        sync_period_ps: period,
    })
}

/// Non-paralyzable dead time per channel: a click is kept only if it falls at
/// least `dead_ps` after the previous kept click of the same channel.
pub fn apply_dead_time(records: Vec<TimeTag>, dead_ps: u64) -> Vec<TimeTag> {
    if dead_ps == 0 {
        return records;
    }
    let mut last: Vec<Option<u64>> = Vec::new();
    records
        .into_iter()
        .filter(|r| {
            let ch = r.channel as usize;
            if ch >= last.len() {
                last.resize(ch + 1, None);
            }
            match last[ch] {
                Some(t) if r.timestamp_ps < t + dead_ps => false,
                _ => {
                    last[ch] = Some(r.timestamp_ps);
                    true
                }
            }
        })
        .collect()
}

struct BlockContext<'a> {
    model: &'a EmitterModel,
    inst: &'a InstrumentConfig,
    det_polarizer: Option<AxialAngle>,
    p_exc: f64,
    period: u64,
    n_pulses: u64,
    duration: u64,
    seed: u64,
}

impl BlockContext<'_> {
    fn run_block(&self, block: u64) -> Vec<TimeTag> {
        let mut rng = block_rng(self.seed, block);
        let start = block * BLOCK_PULSES;
        let end = (start + BLOCK_PULSES).min(self.n_pulses);
        let mut out = Vec::new();

        if self.p_exc > 0.0 {
            let skip = Geometric::new(self.p_exc).expect("probability in (0, 1]");
            let sigma = self.inst.irf_sigma_ps();
            let jitter = Normal::new(0.0, sigma).expect("finite sigma");
            let mut pulse = start + skip.sample(&mut rng);
            while pulse < end {
                if let Some(tag) = self.emit(pulse, &mut rng, &jitter) {
                    out.push(tag);
                }
                pulse = pulse.saturating_add(1 + skip.sample(&mut rng));
            }
        }

        let mut dark = self.inst.dark_rate_cps;
        if self.det_polarizer.is_some() {
            dark *= 0.5;
        }
        if dark > 0.0 {
            let t0 = start * self.period;
            let span = (end - start) * self.period;
            let mean = dark * span as f64 * 1e-12;
            let counts = Poisson::new(mean).expect("positive mean");
            for channel in 0..2u16 {
                let n = counts.sample(&mut rng) as u64;
                for _ in 0..n {
                    let t = t0 + rng.random_range(0..span);
                    out.push(TimeTag {
                        timestamp_ps: t,
                        channel,
                        flags: FLAG_BACKGROUND,
                    });
                }
            }
        }
        out
    }

    /// One excitation at `pulse`; returns the detected click, if any.
    fn emit(&self, pulse: u64, rng: &mut ChaCha8Rng, jitter: &Normal<f64>) -> Option<TimeTag> {
        let delay_ns = sample_decay_delay(self.model, rng);
        if let Some(pol) = self.det_polarizer {
            let state = emission_state_at(self.model, delay_ns).expect("delay is non-negative");
            if !rng.random_bool(detection_probability(&state, pol)) {
                return None;
            }
        }
        let jitter_ps = jitter.sample(rng);
        let channel = if rng.random::<f64>() < self.inst.splitter_ratio { 0 } else { 1 };
        if !rng.random_bool(self.inst.detection_efficiency) {
            return None;
        }
        let t = (pulse * self.period) as f64 + self.inst.timing_offset_ps + delay_ns * 1e3 + jitter_ps;
        let t = t.round();
        if t < 0.0 || t >= self.duration as f64 {
            return None;
        }
        Some(TimeTag {
            timestamp_ps: t as u64,
            channel,
            flags: 0,
        })
    }
}
