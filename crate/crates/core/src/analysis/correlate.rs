//! Inter-channel coincidence histograms and g²(0) estimators for pulsed
//! excitation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fitting::{
    g2_comb_integral, levenberg_marquardt, poisson_deviance_residual, Bounds, FitResult, FnResiduals, G2CombParams,
    LmOptions,
};
use crate::simulator::TimeTagStream;

const CHUNK: usize = 1 << 15;

/// Histogram of `t₁ − t₀` for every (channel 0, channel 1) pair. Bin `i`
/// covers `[(i − n_half)·bin, (i − n_half + 1)·bin)` ps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct G2Histogram {
    pub bin_ps: u64,
    pub n_half: usize,
    pub counts: Vec<u64>,
}

impl G2Histogram {
    pub fn half_range_ps(&self) -> i64 {
        self.n_half as i64 * self.bin_ps as i64
    }

    pub fn bin_start_ps(&self, i: usize) -> i64 {
        (i as i64 - self.n_half as i64) * self.bin_ps as i64
    }

    pub fn bin_center_ns(&self, i: usize) -> f64 {
        (self.bin_start_ps(i) as f64 + 0.5 * self.bin_ps as f64) * 1e-3
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn index(&self, delta: i64) -> Option<usize> {
        let shifted = delta + self.half_range_ps();
        if shifted < 0 || shifted >= 2 * self.half_range_ps() {
            return None;
        }
        Some((shifted / self.bin_ps as i64) as usize)
    }

    /// Sum of bins whose center lies in `[lo_ns, hi_ns)`.
    fn window_sum(&self, lo_ns: f64, hi_ns: f64) -> u64 {
        (0..self.counts.len())
            .filter(|&i| {
                let c = self.bin_center_ns(i);
                c >= lo_ns && c < hi_ns
            })
            .map(|i| self.counts[i])
            .sum()
    }
}

fn empty_histogram(max_delay_ns: f64, bin_ps: u64) -> Result<G2Histogram> {
    if bin_ps == 0 {
        return Err(invalid("bin_ps", "must be >= 1"));
    }
    if !(max_delay_ns > 0.0 && max_delay_ns.is_finite()) {
        return Err(invalid("max_delay_ns", "must be > 0"));
    }
    let n_half = ((max_delay_ns * 1e3) / bin_ps as f64).ceil() as usize;
    Ok(G2Histogram {
        bin_ps,
        n_half,
        counts: vec![0; 2 * n_half],
    })
}

fn split_channels(stream: &TimeTagStream) -> Result<(Vec<i64>, Vec<i64>)> {
    if !stream.is_sorted() {
        return Err(invalid("stream", "records must be sorted by timestamp"));
    }
    let a: Vec<i64> = stream.channel_timestamps(0).into_iter().map(|t| t as i64).collect();
    let b: Vec<i64> = stream.channel_timestamps(1).into_iter().map(|t| t as i64).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::Analysis("correlation needs clicks on both channel 0 and channel 1".into()));
    }
    Ok((a, b))
}

/// Sliding-window start-stop correlator, chunk-parallel over channel 0.
/// Each chunk locates its own window start, so the result is independent of
/// the chunking.
pub fn correlate_g2(stream: &TimeTagStream, max_delay_ns: f64, bin_ps: u64) -> Result<G2Histogram> {
    let mut hist = empty_histogram(max_delay_ns, bin_ps)?;
    let (a, b) = split_channels(stream)?;
    let w = hist.half_range_ps();
    let template = hist.clone();
    let partial: Vec<Vec<u64>> = a
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; template.counts.len()];
            let mut lo = b.partition_point(|&t| t < chunk[0] - w);
            for &t0 in chunk {
                while lo < b.len() && b[lo] < t0 - w {
                    lo += 1;
                }
                for &t1 in &b[lo..] {
                    if t1 >= t0 + w {
                        break;
                    }
                    if let Some(i) = template.index(t1 - t0) {
                        counts[i] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    for p in partial {
        for (h, c) in hist.counts.iter_mut().zip(p) {
            *h += c;
        }
    }
    Ok(hist)
}

/// O(n²) reference implementation over every channel pair.
pub fn correlate_g2_brute_force(stream: &TimeTagStream, max_delay_ns: f64, bin_ps: u64) -> Result<G2Histogram> {
    let mut hist = empty_histogram(max_delay_ns, bin_ps)?;
    let (a, b) = split_channels(stream)?;
    for &t0 in &a {
        for &t1 in &b {
            if let Some(i) = hist.index(t1 - t0) {
                hist.counts[i] += 1;
            }
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2_0: f64,
    pub error: f64,
    pub center_counts: u64,
    pub side_mean: f64,
    pub n_side_peaks: usize,
}

fn side_peaks(hist: &G2Histogram, period_ns: f64, window_fraction: f64) -> Vec<i64> {
    let half = 0.5 * window_fraction * period_ns;
    let range = hist.half_range_ps() as f64 * 1e-3;
    let kmax = (range / period_ns).floor() as i64 + 1;
    (-kmax..=kmax)
        .filter(|&k| k != 0)
        .filter(|&k| {
            let c = k as f64 * period_ns;
            c - half >= -range && c + half <= range
        })
        .collect()
}

fn check_windows(period_ns: f64, window_fraction: f64) -> Result<()> {
    if !(period_ns > 0.0) {
        return Err(invalid("period_ns", "must be > 0"));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(invalid("window_fraction", "must lie in (0, 1]"));
    }
    Ok(())
}

/// Area of the zero-delay window divided by the mean area of the side
/// windows at `k·period`. Windows are `window_fraction·period` wide.
pub fn estimate_g2_zero(hist: &G2Histogram, period_ns: f64, window_fraction: f64) -> Result<G2Estimate> {
    check_windows(period_ns, window_fraction)?;
    let half = 0.5 * window_fraction * period_ns;
    let ks = side_peaks(hist, period_ns, window_fraction);
    let (neg, pos) = (ks.iter().filter(|&&k| k < 0).count(), ks.iter().filter(|&&k| k > 0).count());
    if neg < 5 || pos < 5 {
        return Err(Error::Analysis(format!(
            "need at least 5 side peaks per side, histogram range holds {neg} and {pos}"
        )));
    }
    let side_total: u64 = ks
        .iter()
        .map(|&k| {
            let c = k as f64 * period_ns;
            hist.window_sum(c - half, c + half)
        })
        .sum();
    if side_total == 0 {
        return Err(Error::Analysis("side windows are empty".into()));
    }
    let center = hist.window_sum(-half, half);
    let side_mean = side_total as f64 / ks.len() as f64;
    let c = center as f64;
    let g2_0 = c / side_mean;
    let error = (c.max(1.0) + c * c / side_total as f64).sqrt() / side_mean;
    Ok(G2Estimate {
        g2_0,
        error,
        center_counts: center,
        side_mean,
        n_side_peaks: ks.len(),
    })
}

/// Expected g²(0) estimate for per-pulse signal (`s`) and uniform
/// background (`b`) click probabilities on each channel. Signal pairs from
/// neighboring pulses leak into the zero-delay window through the
/// exponential tails; with full-period windows the leakage fraction is
/// `e^(−P/2τ)`.
pub fn predicted_g2_zero(
    s0: f64,
    s1: f64,
    b0: f64,
    b1: f64,
    tau_ns: f64,
    period_ns: f64,
    window_fraction: f64,
) -> f64 {
    let h = 0.5 * window_fraction * period_ns / tau_ns;
    let q = (-period_ns / tau_ns).exp();
    let own = 1.0 - (-h).exp();
    let big_p = period_ns / tau_ns;
    let others = ((h - big_p).exp() - (-h - big_p).exp()) / (1.0 - q);
    let uniform = window_fraction * (s0 * b1 + b0 * s1 + b0 * b1);
    let center = s0 * s1 * others + uniform;
    let side = s0 * s1 * (own + others) + uniform;
    center / side
}

/// Poisson maximum-likelihood comb fit of the whole histogram. `g2_0` is the fitted center-peak
/// weight above background; `raw_g2` integrates the fitted curve, including
/// background, over the same windows as [`estimate_g2_zero`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Comb {
    pub params: G2CombParams,
    pub g2_0: f64,
    pub g2_0_err: f64,
    pub raw_g2: f64,
    pub raw_g2_err: f64,
    pub fit: FitResult,
}

pub fn fit_g2_comb(hist: &G2Histogram, period_ns: f64, tau_guess_ns: f64, window_fraction: f64) -> Result<G2Comb> {
    check_windows(period_ns, window_fraction)?;
    if !(tau_guess_ns > 0.0) {
        return Err(invalid("tau_guess_ns", "must be > 0"));
    }
    let est = estimate_g2_zero(hist, period_ns, window_fraction)?;
    let bin_ns = hist.bin_ps as f64 * 1e-3;
    let edges: Vec<(f64, f64)> = (0..hist.counts.len())
        .map(|i| {
            let a = hist.bin_start_ps(i) as f64 * 1e-3;
            (a, a + bin_ns)
        })
        .collect();
    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();

    // Background density from the valleys halfway between peaks.
    let valley: Vec<f64> = (0..hist.counts.len())
        .filter(|&i| {
            let c = hist.bin_center_ns(i) / period_ns;
            (c - c.floor() - 0.5).abs() < 0.05
        })
        .map(|i| y[i])
        .collect();
    let bg0 = if valley.is_empty() { 0.0 } else { valley.iter().sum::<f64>() / valley.len() as f64 / bin_ns };
    let area0 = (est.side_mean - bg0 * window_fraction * period_ns).max(1.0);

    let make = |p: &[f64]| G2CombParams {
        peak_area: p[0],
        g2_0: p[1],
        period_ns,
        tau_ns: p[2],
        background: p[3],
    };
    let problem = FnResiduals::new(y.len(), |p: &[f64], out: &mut [f64]| {
        let params = make(p);
        for (i, (a, b)) in edges.iter().enumerate() {
            out[i] = poisson_deviance_residual(y[i], g2_comb_integral(&params, *a, *b));
        }
    });
    let bounds = Bounds {
        lower: vec![0.0, 0.0, 1e-3, 1e-9],
        upper: vec![f64::INFINITY, f64::INFINITY, period_ns, f64::INFINITY],
    };
    let init = [area0, est.g2_0.max(0.0), tau_guess_ns, bg0];
    let fit = levenberg_marquardt(&problem, &init, Some(&bounds), &LmOptions::default())?;
    if !fit.converged {
        return Err(Error::Fit(format!("g2 comb fit did not converge ({:?})", fit.status)));
    }
    let params = make(&fit.params);
    let err = fit.uncertainties();

    let half = 0.5 * window_fraction * period_ns;
    let ks = side_peaks(hist, period_ns, window_fraction);
    let side: f64 = ks
        .iter()
        .map(|&k| {
            let c = k as f64 * period_ns;
            g2_comb_integral(&params, c - half, c + half)
        })
        .sum::<f64>()
        / ks.len() as f64;
    let center = g2_comb_integral(&params, -half, half);
    let raw_g2 = center / side;
    // Only the center weight moves the raw ratio to first order.
    let d_center = params.peak_area * {
        let unit = G2CombParams { peak_area: 1.0, g2_0: 1.0, background: 0.0, ..params };
        let zero = G2CombParams { g2_0: 0.0, ..unit };
        g2_comb_integral(&unit, -half, half) - g2_comb_integral(&zero, -half, half)
    };
    let raw_g2_err = d_center * err[1] / side;
    Ok(G2Comb {
        params,
        g2_0: params.g2_0,
        g2_0_err: err[1],
        raw_g2,
        raw_g2_err,
        fit,
    })
}
