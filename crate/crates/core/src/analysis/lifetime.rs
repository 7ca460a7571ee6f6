//! Decay histograms relative to the excitation sync and IRF-convolved
//! lifetime fits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fitting::{
    eval_exp_irf_bin, levenberg_marquardt, poisson_deviance_residual, Bounds, ExpIrfParams, FitResult, FnResiduals,
    LmOptions,
};
use crate::simulator::TimeTagStream;

/// Counts versus `timestamp mod sync_period`. Bin `i` covers
/// `[i·bin, min((i+1)·bin, period))` ps; the last bin may be short.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub bin_ps: u64,
    pub sync_period_ps: u64,
    pub counts: Vec<u64>,
}

impl DecayCurve {
    pub fn bin_edges_ns(&self, i: usize) -> (f64, f64) {
        let a = i as u64 * self.bin_ps;
        let b = (a + self.bin_ps).min(self.sync_period_ps);
        (a as f64 * 1e-3, b as f64 * 1e-3)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn build_decay_histogram(stream: &TimeTagStream, sync_period_ps: u64, bin_ps: u64) -> Result<DecayCurve> {
    if sync_period_ps == 0 {
        return Err(invalid("sync_period_ps", "must be > 0"));
    }
    if bin_ps == 0 {
        return Err(invalid("bin_ps", "must be >= 1"));
    }
    let n = sync_period_ps.div_ceil(bin_ps) as usize;
    let mut counts = vec![0u64; n];
    for r in &stream.records {
        counts[((r.timestamp_ps % sync_period_ps) / bin_ps) as usize] += 1;
    }
    Ok(DecayCurve { bin_ps, sync_period_ps, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    pub params: ExpIrfParams,
    pub tau_ns: f64,
    pub tau_err_ns: f64,
    pub fit: FitResult,
}

/// Bin-integrated exponential ⊗ Gaussian fit with the IRF width held fixed,
/// by Poisson maximum likelihood. Free parameters: amplitude, τ, t0 and a
/// flat background density.
pub fn fit_lifetime(curve: &DecayCurve, irf_sigma_ns: f64) -> Result<LifetimeFit> {
    if !(irf_sigma_ns >= 0.0) {
        return Err(invalid("irf_sigma_ns", "must be >= 0"));
    }
    let n = curve.counts.len();
    if n < 8 {
        return Err(Error::Analysis("decay curve needs at least 8 bins".into()));
    }
    if curve.total() == 0 {
        return Err(Error::Analysis("decay curve is empty".into()));
    }
    let y: Vec<f64> = curve.counts.iter().map(|&c| c as f64).collect();
    let edges: Vec<(f64, f64)> = (0..n).map(|i| curve.bin_edges_ns(i)).collect();
    let period_ns = curve.sync_period_ps as f64 * 1e-3;
    let bin_ns = curve.bin_ps as f64 * 1e-3;

    let peak = (0..n).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    // Background from the quietest tenth of the curve.
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let low = &sorted[..(n / 10).max(1)];
    let bg0 = low.iter().sum::<f64>() / low.len() as f64 / bin_ns;
    let above = y[peak] - bg0 * bin_ns;
    let fall = (peak..n)
        .find(|&i| y[i] - bg0 * bin_ns < above / std::f64::consts::E)
        .unwrap_or(n - 1);
    let tau0 = ((fall - peak) as f64 * bin_ns).clamp(bin_ns, 0.5 * period_ns);
    let t00 = edges[peak].0;
    let amp0 = (y.iter().sum::<f64>() - bg0 * period_ns).max(1.0);

    let make = |p: &[f64]| ExpIrfParams {
        amplitude: p[0],
        tau_ns: p[1],
        t0_ns: p[2],
        irf_sigma_ns,
        background: p[3],
    };
    let problem = FnResiduals::new(n, |p: &[f64], out: &mut [f64]| {
        let params = make(p);
        for (i, (a, b)) in edges.iter().enumerate() {
            out[i] = poisson_deviance_residual(y[i], eval_exp_irf_bin(&params, *a, *b));
        }
    });
    let bounds = Bounds {
        lower: vec![0.0, 1e-3, -period_ns, 1e-9],
        upper: vec![f64::INFINITY, 10.0 * period_ns, 2.0 * period_ns, f64::INFINITY],
    };
    let fit = levenberg_marquardt(&problem, &[amp0, tau0, t00, bg0], Some(&bounds), &LmOptions::default())?;
    if !fit.converged {
        return Err(Error::Fit(format!("lifetime fit did not converge ({:?})", fit.status)));
    }
    let params = make(&fit.params);
    let err = fit.uncertainties();
    Ok(LifetimeFit {
        params,
        tau_ns: params.tau_ns,
        tau_err_ns: err[1],
        fit,
    })
}
