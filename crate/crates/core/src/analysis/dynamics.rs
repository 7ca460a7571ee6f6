//! Time-resolved polarization: adaptive time bins over a decay map, one
//! cosine-squared fit per bin, and a shared-constant relaxation fit.

use serde::{Deserialize, Serialize};

use super::polarization::{analyze_polarization_sweep, PolarizationFit};
use super::DecayMap;
use crate::error::{invalid, Error, Result};
use crate::fitting::{levenberg_marquardt, Bounds, FitResult, FnResiduals, LmOptions};
use crate::geometry::{signed_axis_difference, wrap_into};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsOptions {
    pub min_counts_per_bin: u64,
    /// Rows starting before this delay are discarded.
    pub t_cut_ps: i64,
    /// Pre-pulse rows ending later than `-guard` are excluded from the
    /// background estimate.
    pub background_guard_ps: i64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            min_counts_per_bin: 2000,
            t_cut_ps: 120,
            background_guard_ps: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsBin {
    pub first_row: usize,
    pub end_row: usize,
    pub t_start_ps: i64,
    pub t_end_ps: i64,
    /// Count-weighted mean delay of the merged rows.
    pub t_center_ns: f64,
    pub counts: u64,
    pub fit: PolarizationFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationDynamics {
    pub options: DynamicsOptions,
    pub bins: Vec<DynamicsBin>,
    /// Fit of every row from the cut onwards merged into one sweep.
    pub integrated: PolarizationFit,
}

fn row_center_ns(map: &DecayMap, row: usize) -> f64 {
    0.5 * (map.time_edges_ps[row] + map.time_edges_ps[row + 1]) as f64 * 1e-3
}

/// Row ranges `[start, end)` holding at least `min` counts each; a short
/// remainder is merged into the last range.
fn adaptive_ranges(map: &DecayMap, first: usize, min: u64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let (mut start, mut acc) = (first, 0u64);
    for row in first..map.n_rows() {
        acc += map.row_total(row);
        if acc >= min {
            out.push((start, row + 1));
            start = row + 1;
            acc = 0;
        }
    }
    if start < map.n_rows() {
        match out.last_mut() {
            Some(last) => last.1 = map.n_rows(),
            None => out.push((start, map.n_rows())),
        }
    }
    out
}

pub fn extract_polarization_dynamics(map: &DecayMap, opts: &DynamicsOptions) -> Result<PolarizationDynamics> {
    map.validate()?;
    if opts.min_counts_per_bin == 0 {
        return Err(invalid("min_counts_per_bin", "must be >= 1"));
    }
    let first = map.first_row_at(opts.t_cut_ps);
    if first >= map.n_rows() {
        return Err(Error::Analysis("no rows after the time cut".into()));
    }
    let total: u64 = (first..map.n_rows()).map(|r| map.row_total(r)).sum();
    if total < opts.min_counts_per_bin {
        return Err(Error::Analysis(format!(
            "{total} counts after the cut, fewer than the {} needed for one bin",
            opts.min_counts_per_bin
        )));
    }
    let bins = adaptive_ranges(map, first, opts.min_counts_per_bin)
        .into_iter()
        .map(|(s, e)| {
            let counts: u64 = (s..e).map(|r| map.row_total(r)).sum();
            let weighted: f64 = (s..e).map(|r| map.row_total(r) as f64 * row_center_ns(map, r)).sum();
            let fit = analyze_polarization_sweep(&map.sweep_over_rows(s, e, opts.background_guard_ps))?;
            Ok(DynamicsBin {
                first_row: s,
                end_row: e,
                t_start_ps: map.time_edges_ps[s],
                t_end_ps: map.time_edges_ps[e],
                t_center_ns: weighted / counts as f64,
                counts,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let integrated = analyze_polarization_sweep(&map.sweep_over_rows(first, map.n_rows(), opts.background_guard_ps))?;
    Ok(PolarizationDynamics {
        options: *opts,
        bins,
        integrated,
    })
}

/// `V(t) = V_ss − ΔV·e^(−t/τ)` and `θ(t) = θ_ss + Δθ·e^(−t/τ)` with one
/// shared relaxation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub vis_ss: f64,
    pub vis_ss_err: f64,
    pub vis_delta: f64,
    pub vis_delta_err: f64,
    pub tau_ns: f64,
    pub tau_err_ns: f64,
    pub axis_ss_deg: f64,
    pub axis_ss_err_deg: f64,
    pub axis_delta_deg: f64,
    pub axis_delta_err_deg: f64,
    pub fit: FitResult,
}

/// Joint weighted fit over the bins of `dyn_`. Axes are unwrapped relative
/// to the integrated axis; bins with an undefined axis only constrain the
/// visibility.
pub fn fit_relaxation(dyn_: &PolarizationDynamics) -> Result<Relaxation> {
    let ref_axis = dyn_.integrated.axis_deg;
    let mut rows: Vec<(f64, f64, f64, Option<(f64, f64)>)> = Vec::new();
    for b in &dyn_.bins {
        let f = &b.fit;
        let axis = f
            .axis_defined
            .then(|| (ref_axis + signed_axis_difference(f.axis_deg, ref_axis), f.axis_err_deg.max(1e-9)));
        rows.push((b.t_center_ns, f.visibility, f.visibility_err.max(1e-9), axis));
    }
    let n_axis = rows.iter().filter(|r| r.3.is_some()).count();
    if rows.len() + n_axis < 6 {
        return Err(Error::Analysis("too few bins for a relaxation fit".into()));
    }
    let m = rows.len() + n_axis;
    let problem = FnResiduals::new(m, |p: &[f64], out: &mut [f64]| {
        let mut k = 0;
        for &(t, v, ve, axis) in &rows {
            let e = (-t / p[2]).exp();
            out[k] = (v - (p[0] - p[1] * e)) / ve;
            k += 1;
            if let Some((a, ae)) = axis {
                out[k] = (a - (p[3] + p[4] * e)) / ae;
                k += 1;
            }
        }
    });
    let late = &rows[rows.len() - rows.len().div_ceil(3)..];
    let v_ss0 = late.iter().map(|r| r.1).sum::<f64>() / late.len() as f64;
    let dv0 = v_ss0 - rows[0].1;
    let first_axis = rows.iter().find_map(|r| r.3).map(|a| a.0).unwrap_or(ref_axis);
    let late_axes: Vec<f64> = late.iter().filter_map(|r| r.3.map(|a| a.0)).collect();
    let axis_ss0 = if late_axes.is_empty() { ref_axis } else { late_axes.iter().sum::<f64>() / late_axes.len() as f64 };

    let bounds = Bounds {
        lower: vec![0.0, f64::NEG_INFINITY, 1e-3, f64::NEG_INFINITY, f64::NEG_INFINITY],
        upper: vec![1.0, f64::INFINITY, 1e3, f64::INFINITY, f64::INFINITY],
    };
    let mut best: Option<FitResult> = None;
    for tau0 in [0.3, 1.0, 3.0] {
        let init = [v_ss0.clamp(0.0, 1.0), dv0, tau0, axis_ss0, first_axis - axis_ss0];
        let fit = levenberg_marquardt(&problem, &init, Some(&bounds), &LmOptions::default())?;
        if fit.converged && best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::Fit("relaxation fit did not converge".into()))?;
    let e = fit.uncertainties();
    let p = &fit.params;
    Ok(Relaxation {
        vis_ss: p[0],
        vis_ss_err: e[0],
        vis_delta: p[1],
        vis_delta_err: e[1],
        tau_ns: p[2],
        tau_err_ns: e[2],
        axis_ss_deg: wrap_into(p[3], 180.0),
        axis_ss_err_deg: e[3],
        axis_delta_deg: p[4],
        axis_delta_err_deg: e[4],
        fit: fit.clone(),
    })
}
