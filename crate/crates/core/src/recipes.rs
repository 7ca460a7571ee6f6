//! Desk-scale reproduction recipes. Each one simulates a measurement from
//! published ground-truth parameters, runs the analysis chain on it and
//! returns both the inputs and the recovered values, so a single call (and a
//! single CLI invocation) regenerates one figure's numbers.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    analyze_polarization_sweep, analyze_shg_sweep, correlate_g2, estimate_g2_zero, extract_polarization_dynamics,
    fit_g2_comb, fit_power_law, fit_relaxation, predicted_g2_zero, DecayMap, DynamicsOptions, G2Estimate,
    G2Histogram, PolarizationDynamics, PolarizationFit, Relaxation, ShgFit,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{wrap_axis, CrystalAxes};
use crate::photophysics::EmitterModel;
use crate::simulator::{
    derive_seed, simulate_decay_map, simulate_polarization_sweep, simulate_shg_sweep, simulate_timetags,
    InstrumentConfig, ShgConfig, ShgSource, SweepMode,
};

/// Angles `start, start+step, …` below `end`.
pub fn angle_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..n).map(|i| start + i as f64 * step).collect()
}

// ---------------------------------------------------------------- g²(0)

/// A two-detector antibunching fixture: a single emitter plus a per-channel
/// uncorrelated background tuned so that the expected estimator value
/// equals `target_g2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Fixture {
    pub label: String,
    pub target_g2: f64,
    /// Standard error the pulse count is matched to.
    pub target_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1dConfig {
    pub emitter: EmitterModel,
    pub instrument: InstrumentConfig,
    pub fixtures: Vec<G2Fixture>,
    /// Pulse count multiplier on top of the matched statistics.
    pub statistics_scale: f64,
    pub window_fraction: f64,
    /// Correlation range in periods on each side.
    pub range_periods: u32,
    pub bin_ps: u64,
    pub seed: u64,
}

impl Default for Fig1dConfig {
    fn default() -> Self {
        Self {
            emitter: EmitterModel { exc_prob_max: 1.0, ..Default::default() },
            // The dark-rate tuning model has no dead time, so neither does the simulation.
            instrument: InstrumentConfig { dark_rate_cps: 0.0, dead_time_ns: 0.0, ..Default::default() },
            fixtures: vec![
                G2Fixture { label: "x1".into(), target_g2: 0.017, target_error: 0.003 },
                G2Fixture { label: "x2".into(), target_g2: 0.042, target_error: 0.002 },
            ],
            statistics_scale: 1.0,
            window_fraction: 1.0,
            range_periods: 8,
            bin_ps: 256,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2FixtureResult {
    pub label: String,
    pub target_g2: f64,
    pub dark_rate_cps: f64,
    pub expected_g2: f64,
    pub n_pulses: u64,
    pub estimate: G2Estimate,
    pub comb_raw_g2: f64,
    pub comb_raw_g2_err: f64,
    pub comb_tau_ns: f64,
    #[serde(skip)]
    pub histogram: Option<G2Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1dResult {
    pub fixtures: Vec<G2FixtureResult>,
}

/// Per-channel signal click probability per pulse with the laser on the
/// excitation axis.
pub fn signal_per_pulse(m: &EmitterModel, inst: &InstrumentConfig) -> [f64; 2] {
    let s = m.exc_prob_max * inst.detection_efficiency;
    [s * inst.splitter_ratio, s * (1.0 - inst.splitter_ratio)]
}

/// Per-channel dark rate that makes the expected estimator equal `target`,
/// by bisection on the monotone background dependence.
pub fn tune_dark_rate(m: &EmitterModel, inst: &InstrumentConfig, target: f64, window_fraction: f64) -> Result<f64> {
    let [s0, s1] = signal_per_pulse(m, inst);
    let period_ns = inst.sync_period_ps() as f64 * 1e-3;
    let g = |b: f64| predicted_g2_zero(s0, s1, b, b, m.lifetime_ns, period_ns, window_fraction);
    let (mut lo, mut hi) = (0.0, 1.0);
    if !(target > g(lo) && target < g(hi)) {
        return Err(invalid("target_g2", format!("{target} is outside the reachable range [{}, {})", g(lo), g(hi))));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / (period_ns * 1e-9))
}

/// Pulses needed for the window estimator to reach `error` at `g2`, given
/// per-channel click probabilities.
pub fn matched_pulses(g2: f64, error: f64, p0: f64, p1: f64, n_side: usize) -> u64 {
    let side = (g2 + g2 * g2 / n_side as f64) / (error * error);
    (side / (p0 * p1)).ceil() as u64
}

pub fn fig1d(cfg: &Fig1dConfig) -> Result<Fig1dResult> {
    if !(cfg.statistics_scale > 0.0) {
        return Err(invalid("statistics_scale", "must be > 0"));
    }
    let period_ns = cfg.instrument.sync_period_ps() as f64 * 1e-3;
    let n_side = 2 * (cfg.range_periods as usize - 1);
    let fixtures = cfg
        .fixtures
        .iter()
        .enumerate()
        .map(|(i, fx)| {
            let dark = tune_dark_rate(&cfg.emitter, &cfg.instrument, fx.target_g2, cfg.window_fraction)?;
            let inst = InstrumentConfig { dark_rate_cps: dark, ..cfg.instrument.clone() };
            let [s0, s1] = signal_per_pulse(&cfg.emitter, &inst);
            let b = dark * period_ns * 1e-9;
            let expected =
                predicted_g2_zero(s0, s1, b, b, cfg.emitter.lifetime_ns, period_ns, cfg.window_fraction);
            let n_pulses = (matched_pulses(fx.target_g2, fx.target_error, s0 + b, s1 + b, n_side) as f64
                * cfg.statistics_scale)
                .ceil() as u64;
            let stream = simulate_timetags(
                &cfg.emitter,
                &inst,
                cfg.emitter.exc_axis,
                None,
                n_pulses,
                derive_seed(cfg.seed, i as u64),
            )?;
            let hist = correlate_g2(&stream, cfg.range_periods as f64 * period_ns, cfg.bin_ps)?;
            let estimate = estimate_g2_zero(&hist, period_ns, cfg.window_fraction)?;
            let comb = fit_g2_comb(&hist, period_ns, cfg.emitter.lifetime_ns, cfg.window_fraction)?;
            Ok(G2FixtureResult {
                label: fx.label.clone(),
                target_g2: fx.target_g2,
                dark_rate_cps: dark,
                expected_g2: expected,
                n_pulses,
                estimate,
                comb_raw_g2: comb.raw_g2,
                comb_raw_g2_err: comb.raw_g2_err,
                comb_tau_ns: comb.params.tau_ns,
                histogram: Some(hist),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig1dResult { fixtures })
}

// ------------------------------------------------------ polarization sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2bConfig {
    pub emitter: EmitterModel,
    pub instrument: InstrumentConfig,
    pub step_deg: f64,
    pub acquisition_s: f64,
    /// `None` gives the noiseless expectation.
    pub seed: Option<u64>,
}

impl Default for Fig2bConfig {
    fn default() -> Self {
        Self {
            emitter: EmitterModel {
                exc_axis: wrap_axis(63.0).unwrap(),
                em_axis_ss: wrap_axis(81.0).unwrap(),
                vis_ss: 0.9801,
                exc_visibility: 0.9667,
                ..Default::default()
            },
            instrument: InstrumentConfig::default(),
            step_deg: 10.0,
            acquisition_s: 0.1,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2bResult {
    pub excitation: PolarizationFit,
    pub emission: PolarizationFit,
    pub misalignment_deg: f64,
    #[serde(skip)]
    pub sweeps: Option<(crate::analysis::PolarSweep, crate::analysis::PolarSweep)>,
}

pub fn fig2b(cfg: &Fig2bConfig) -> Result<Fig2bResult> {
    let angles = angle_grid(0.0, 360.0, cfg.step_deg);
    let seeds = cfg.seed.map(|s| (derive_seed(s, 0), derive_seed(s, 1)));
    let exc = simulate_polarization_sweep(
        &cfg.emitter,
        &cfg.instrument,
        SweepMode::Excitation,
        &angles,
        cfg.acquisition_s,
        seeds.map(|s| s.0),
    )?;
    let em = simulate_polarization_sweep(
        &cfg.emitter,
        &cfg.instrument,
        SweepMode::Emission,
        &angles,
        cfg.acquisition_s,
        seeds.map(|s| s.1),
    )?;
    let excitation = analyze_polarization_sweep(&exc)?;
    let emission = analyze_polarization_sweep(&em)?;
    Ok(Fig2bResult {
        misalignment_deg: crate::geometry::signed_axis_difference(emission.axis_deg, excitation.axis_deg),
        excitation,
        emission,
        sweeps: Some((exc, em)),
    })
}

// ------------------------------------------------------ temporal dynamics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Config {
    pub emitter: EmitterModel,
    pub instrument: InstrumentConfig,
    pub step_deg: f64,
    pub n_pulses_per_angle: u64,
    pub time_bin_ps: u64,
    pub options: DynamicsOptions,
    pub seed: u64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            emitter: EmitterModel {
                em_axis_ss: wrap_axis(30.0).unwrap(),
                exc_axis: wrap_axis(30.0).unwrap(),
                vis_ss: 0.9,
                vis_delta: 0.3,
                relax_ns: 1.5,
                em_axis_delta: 5.0,
                exc_prob_max: 0.3,
                ..Default::default()
            },
            instrument: InstrumentConfig { dead_time_ns: 0.0, ..Default::default() },
            step_deg: 15.0,
            n_pulses_per_angle: 2_000_000,
            time_bin_ps: 41,
            options: DynamicsOptions { min_counts_per_bin: 20_000, ..Default::default() },
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Result {
    pub dynamics: PolarizationDynamics,
    pub relaxation: Relaxation,
    #[serde(skip)]
    pub map: Option<DecayMap>,
}

pub fn fig3(cfg: &Fig3Config) -> Result<Fig3Result> {
    let angles = angle_grid(0.0, 180.0, cfg.step_deg);
    let map = simulate_decay_map(
        &cfg.emitter,
        &cfg.instrument,
        &angles,
        cfg.n_pulses_per_angle,
        cfg.time_bin_ps,
        cfg.seed,
    )?;
    let dynamics = extract_polarization_dynamics(&map, &cfg.options)?;
    let relaxation = fit_relaxation(&dynamics)?;
    Ok(Fig3Result { dynamics, relaxation, map: Some(map) })
}

// --------------------------------------------------------------------- SHG

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2cConfig {
    pub crystal_theta0_deg: f64,
    pub source: ShgSource,
    pub pump_power_mw: f64,
    /// Powers for the power-law check; one decade by default.
    pub power_sweep_mw: Vec<f64>,
    pub step_deg: f64,
    pub seed: Option<u64>,
}

impl Default for Fig2cConfig {
    fn default() -> Self {
        Self {
            crystal_theta0_deg: 43.52,
            source: ShgSource::default(),
            pump_power_mw: 20.0,
            power_sweep_mw: vec![2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 20.0],
            step_deg: 5.0,
            seed: Some(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2cResult {
    pub parallel: ShgFit,
    pub perpendicular: ShgFit,
    pub power_mw: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub power_law_exponent: f64,
    pub power_law_exponent_err: f64,
}

pub fn fig2c(cfg: &Fig2cConfig) -> Result<Fig2cResult> {
    let crystal = CrystalAxes::new(cfg.crystal_theta0_deg)?;
    let angles = angle_grid(0.0, 360.0, cfg.step_deg);
    let seed = |i: u64| cfg.seed.map(|s| derive_seed(s, i));
    let par = simulate_shg_sweep(&crystal, cfg.pump_power_mw, &angles, ShgConfig::Parallel, &cfg.source, seed(0))?;
    let perp =
        simulate_shg_sweep(&crystal, cfg.pump_power_mw, &angles, ShgConfig::Perpendicular, &cfg.source, seed(1))?;
    let parallel = analyze_shg_sweep(&par, ShgConfig::Parallel)?;
    let perpendicular = analyze_shg_sweep(&perp, ShgConfig::Perpendicular)?;
    if cfg.power_sweep_mw.len() < 3 {
        return Err(invalid("power_sweep_mw", "need at least 3 powers"));
    }
    let amplitude = cfg
        .power_sweep_mw
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = simulate_shg_sweep(&crystal, p, &angles, ShgConfig::Parallel, &cfg.source, seed(10 + i as u64))?;
            Ok(analyze_shg_sweep(&s, ShgConfig::Parallel)?.amplitude)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (k, k_err) = fit_power_law(&cfg.power_sweep_mw, &amplitude)?;
    if !k.is_finite() {
        return Err(Error::Fit("power-law slope is not finite".into()));
    }
    Ok(Fig2cResult {
        parallel,
        perpendicular,
        power_mw: cfg.power_sweep_mw.clone(),
        amplitude,
        power_law_exponent: k,
        power_law_exponent_err: k_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_grid_excludes_end() {
        assert_eq!(angle_grid(0.0, 60.0, 15.0), vec![0.0, 15.0, 30.0, 45.0]);
    }

    #[test]
    fn tuned_dark_rate_hits_target() {
        let cfg = Fig1dConfig::default();
        let d = tune_dark_rate(&cfg.emitter, &cfg.instrument, 0.017, 1.0).unwrap();
        let [s0, s1] = signal_per_pulse(&cfg.emitter, &cfg.instrument);
        let b = d * 50e-9;
        let g = predicted_g2_zero(s0, s1, b, b, 3.96, 50.0, 1.0);
        assert!((g - 0.017).abs() < 1e-9);
        assert!(tune_dark_rate(&cfg.emitter, &cfg.instrument, 1.5, 1.0).is_err());
    }

    #[test]
    fn noiseless_fig2b_recovers_inputs() {
        let r = fig2b(&Fig2bConfig::default()).unwrap();
        assert!((r.emission.visibility - 0.9801).abs() < 1e-6);
        assert!((r.excitation.visibility - 0.9667).abs() < 1e-6);
        assert!((r.emission.axis_deg - 81.0).abs() < 1e-6);
        assert!((r.misalignment_deg - 18.0).abs() < 1e-6);
    }
}
