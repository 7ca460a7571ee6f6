//! Cosine-squared and six-fold polarization fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PolarSweep;
use crate::error::{invalid, Error, Result};
use crate::fitting::{
    cosine_squared_gradient, eval_cosine_squared, eval_sixfold, levenberg_marquardt, poisson_inverse_sigma,
    sixfold_gradient, Bounds, FitResult, LmOptions, Residuals, SixfoldParams,
};
use crate::geometry::{wrap_axis, wrap_into, AxialAngle, MalusParams, CRYSTAL_AXIS_PERIOD_DEG};
use crate::simulator::ShgConfig;

/// Axis uncertainty reported when the visibility is compatible with zero.
pub const UNDEFINED_AXIS_ERR_DEG: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub axis_deg: f64,
    pub axis_err_deg: f64,
    /// Background held fixed during the fit.
    pub background: f64,
    /// `false` when the visibility is within two standard errors of zero.
    pub axis_defined: bool,
    pub fit: FitResult,
}

impl PolarizationFit {
    pub fn params(&self) -> MalusParams {
        MalusParams {
            amplitude: self.amplitude,
            visibility: self.visibility,
            axis: wrap_axis(self.axis_deg).expect("finite axis"),
            background: self.background,
        }
    }
}

struct Weighted {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Weighted {
    fn new(sweep: &PolarSweep) -> Self {
        Self {
            x: sweep.angles_deg.clone(),
            y: sweep.intensities.clone(),
            w: sweep
                .intensities
                .iter()
                .zip(&sweep.errors)
                .map(|(&y, &e)| poisson_inverse_sigma(y, Some(e)))
                .collect(),
        }
    }

    /// Weighted linear least squares on `{1, cos kθ, sin kθ}`.
    fn harmonic(&self, k: f64, offset: f64) -> Option<[f64; 3]> {
        let n = self.x.len();
        let a = DMatrix::from_fn(n, 3, |i, j| {
            let t = (k * self.x[i]).to_radians();
            self.w[i] * [1.0, t.cos(), t.sin()][j]
        });
        let b = DVector::from_fn(n, |i, _| self.w[i] * (self.y[i] - offset));
        let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
        Some([sol[0], sol[1], sol[2]])
    }
}

struct CosineProblem<'a> {
    data: &'a Weighted,
    background: f64,
}

impl CosineProblem<'_> {
    fn params(&self, p: &[f64]) -> MalusParams {
        MalusParams {
            amplitude: p[0],
            visibility: p[1],
            axis: AxialAngle::wrapping(p[2]),
            background: self.background,
        }
    }
}

impl Residuals for CosineProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.data.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let m = self.params(p);
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.data.y[i] - eval_cosine_squared(&m, self.data.x[i])) * self.data.w[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let m = self.params(p);
        for i in 0..self.data.x.len() {
            let g = cosine_squared_gradient(&m, self.data.x[i]);
            for j in 0..3 {
                jac[(i, j)] = -self.data.w[i] * g[j];
            }
        }
        true
    }
}

fn check_coverage(sweep: &PolarSweep) -> Result<()> {
    sweep.validate()?;
    if sweep.len() < 8 {
        return Err(invalid("sweep", "need at least 8 points"));
    }
    let mut axes: Vec<f64> = sweep
        .angles_deg
        .iter()
        .map(|&a| wrap_axis(a).map(|w| w.degrees()))
        .collect::<Result<_>>()?;
    axes.sort_by(f64::total_cmp);
    axes.dedup();
    let mut gap = axes[0] + 180.0 - axes[axes.len() - 1];
    for w in axes.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    if gap >= 90.0 {
        return Err(invalid("sweep", "angles do not cover the half circle of polarizer axes"));
    }
    Ok(())
}

/// Multi-start cosine-squared fit with the background held at
/// `sweep.background` (it is otherwise degenerate with amplitude and
/// visibility). Starts: axis 0/45/90/135° and the linear harmonic solution.
pub fn analyze_polarization_sweep(sweep: &PolarSweep) -> Result<PolarizationFit> {
    check_coverage(sweep)?;
    let data = Weighted::new(sweep);
    let problem = CosineProblem { data: &data, background: sweep.background };
    let bounds = Bounds {
        lower: vec![0.0, 0.0, f64::NEG_INFINITY],
        upper: vec![f64::INFINITY, 1.0, f64::INFINITY],
    };
    let mean = (data.y.iter().sum::<f64>() / data.y.len() as f64 - sweep.background).max(0.0);
    let mut starts: Vec<[f64; 3]> = [0.0, 45.0, 90.0, 135.0].iter().map(|&a| [2.0 * mean, 0.5, a]).collect();
    if let Some([c0, c1, c2]) = data.harmonic(2.0, sweep.background) {
        if c0 > 0.0 {
            let v = (c1.hypot(c2) / c0).clamp(0.0, 1.0);
            starts.push([2.0 * c0, v, 0.5 * c2.atan2(c1).to_degrees()]);
        }
    }

    let opts = LmOptions::default();
    let mut best: Option<FitResult> = None;
    for s in &starts {
        let fit = levenberg_marquardt(&problem, s, Some(&bounds), &opts)?;
        if !fit.converged {
            continue;
        }
        if best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::Fit("cosine-squared fit did not converge from any start".into()))?;
    let err = fit.uncertainties();
    let (amplitude, visibility) = (fit.params[0], fit.params[1]);
    let axis_deg = wrap_into(fit.params[2], 180.0);
    let axis_defined = visibility > 2.0 * err[1] && visibility > 0.0;
    Ok(PolarizationFit {
        amplitude,
        amplitude_err: err[0],
        visibility,
        visibility_err: err[1],
        axis_deg,
        axis_err_deg: if axis_defined { err[2] } else { UNDEFINED_AXIS_ERR_DEG },
        background: sweep.background,
        axis_defined,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShgFit {
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// Crystal-axis angle in `[0, 60)`.
    pub theta0_deg: f64,
    pub theta0_err_deg: f64,
    pub background: f64,
    pub background_err: f64,
    pub fit: FitResult,
}

struct SixfoldProblem<'a> {
    data: &'a Weighted,
}

impl Residuals for SixfoldProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.data.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let m = SixfoldParams { amplitude: p[0], theta0_deg: p[1], background: p[2] };
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.data.y[i] - eval_sixfold(&m, self.data.x[i])) * self.data.w[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) -> bool {
        let m = SixfoldParams { amplitude: p[0], theta0_deg: p[1], background: p[2] };
        for i in 0..self.data.x.len() {
            let g = sixfold_gradient(&m, self.data.x[i]);
            for j in 0..3 {
                jac[(i, j)] = -self.data.w[i] * g[j];
            }
        }
        true
    }
}

/// Six-fold fit `A·cos²(3(θ−θ₀)) + B`. In the perpendicular configuration
/// the pattern is the parallel one shifted by 30°, which is undone before
/// reporting θ₀.
pub fn analyze_shg_sweep(sweep: &PolarSweep, config: ShgConfig) -> Result<ShgFit> {
    sweep.validate()?;
    if sweep.len() < 6 {
        return Err(invalid("sweep", "need at least 6 points"));
    }
    let data = Weighted::new(sweep);
    let problem = SixfoldProblem { data: &data };
    let bounds = Bounds {
        lower: vec![0.0, f64::NEG_INFINITY, 0.0],
        upper: vec![f64::INFINITY; 3],
    };
    let ymin = data.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let ymax = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut starts: Vec<[f64; 3]> =
        [0.0, 15.0, 30.0, 45.0].iter().map(|&t| [(ymax - ymin).max(1.0), t, ymin.max(0.0)]).collect();
    if let Some([c0, c1, c2]) = data.harmonic(6.0, 0.0) {
        let a = 2.0 * c1.hypot(c2);
        starts.push([a, c2.atan2(c1).to_degrees() / 6.0, (c0 - 0.5 * a).max(0.0)]);
    }
    let opts = LmOptions::default();
    let mut best: Option<FitResult> = None;
    for s in &starts {
        let fit = levenberg_marquardt(&problem, s, Some(&bounds), &opts)?;
        if fit.converged && best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::Fit("six-fold fit did not converge from any start".into()))?;
    let err = fit.uncertainties();
    let shift = match config {
        ShgConfig::Parallel => 0.0,
        ShgConfig::Perpendicular => 30.0,
    };
    Ok(ShgFit {
        amplitude: fit.params[0],
        amplitude_err: err[0],
        theta0_deg: wrap_into(fit.params[1] - shift, CRYSTAL_AXIS_PERIOD_DEG),
        theta0_err_deg: err[1],
        background: fit.params[2],
        background_err: err[2],
        fit,
    })
}

/// Least-squares slope of `ln y` against `ln x`, with its standard error.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(invalid("power law", "need at least 3 paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("power law", "values must be > 0"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("power law", "x values are all equal"));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    Ok((slope, (rss / (n - 2.0) / sxx).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{malus_intensity, CrystalAxes};
    use crate::simulator::{simulate_shg_sweep, ShgSource};

    fn sweep_from(p: &MalusParams, angles: &[f64]) -> PolarSweep {
        let y: Vec<f64> = angles.iter().map(|a| malus_intensity(p, wrap_axis(*a).unwrap())).collect();
        PolarSweep {
            angles_deg: angles.to_vec(),
            errors: y.iter().map(|v| v.max(1.0).sqrt()).collect(),
            intensities: y,
            acquisition_s: 5.0,
            background: p.background,
        }
    }

    fn steps(step: f64) -> Vec<f64> {
        (0..(360.0 / step) as usize).map(|i| i as f64 * step).collect()
    }

    #[test]
    fn noiseless_visibility_is_exact() {
        let p = MalusParams::new(5e4, 0.9801, 63.0, 120.0).unwrap();
        let f = analyze_polarization_sweep(&sweep_from(&p, &steps(10.0))).unwrap();
        assert!((f.visibility - 0.9801).abs() < 1e-6);
        assert!((f.axis_deg - 63.0).abs() < 1e-6);
        assert!(f.axis_defined);
    }

    #[test]
    fn axis_off_by_forty_degrees_matches_grid_scan() {
        let p = MalusParams::new(1e4, 0.7, 170.0, 0.0).unwrap();
        let s = sweep_from(&p, &steps(15.0));
        let f = analyze_polarization_sweep(&s).unwrap();
        // Brute-force 1° scan of the axis with amplitude/visibility at truth.
        let best = (0..180)
            .map(|a| {
                let q = MalusParams { axis: wrap_axis(a as f64).unwrap(), ..p };
                let chi: f64 = s
                    .angles_deg
                    .iter()
                    .zip(&s.intensities)
                    .map(|(x, y)| (y - malus_intensity(&q, wrap_axis(*x).unwrap())).powi(2))
                    .sum();
                (chi, a as f64)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        let d = crate::geometry::signed_axis_difference(f.axis_deg, best);
        assert!(d.abs() <= 0.5);
        assert!(crate::geometry::signed_axis_difference(f.axis_deg, 170.0).abs() < 1e-6);
    }

    #[test]
    fn flat_sweep_flags_undefined_axis() {
        let p = MalusParams::new(1e4, 0.0, 0.0, 10.0).unwrap();
        let mut s = sweep_from(&p, &steps(10.0));
        // A little deterministic jitter keeps the problem well posed.
        for (i, v) in s.intensities.iter_mut().enumerate() {
            *v += [3.0, -2.0, 1.0, -4.0, 2.0][i % 5];
        }
        let f = analyze_polarization_sweep(&s).unwrap();
        assert!(f.visibility < 0.02);
        assert!(!f.axis_defined);
        assert_eq!(f.axis_err_deg, UNDEFINED_AXIS_ERR_DEG);
    }

    #[test]
    fn shifted_by_180_is_unchanged() {
        let p = MalusParams::new(2e4, 0.9, 12.0, 50.0).unwrap();
        let a = sweep_from(&p, &steps(15.0));
        let mut b = a.clone();
        for x in b.angles_deg.iter_mut() {
            *x += 180.0;
        }
        let fa = analyze_polarization_sweep(&a).unwrap();
        let fb = analyze_polarization_sweep(&b).unwrap();
        assert!((fa.axis_deg - fb.axis_deg).abs() < 1e-6);
        assert!((fa.visibility - fb.visibility).abs() < 1e-9);
    }

    #[test]
    fn coverage_is_checked() {
        let p = MalusParams::new(1e4, 0.5, 0.0, 0.0).unwrap();
        let narrow: Vec<f64> = (0..10).map(|i| i as f64 * 5.0).collect();
        assert!(analyze_polarization_sweep(&sweep_from(&p, &narrow)).is_err());
    }

    #[test]
    fn shg_axis_in_both_configurations() {
        let crystal = CrystalAxes::new(43.52).unwrap();
        let src = ShgSource::default();
        for cfg in [ShgConfig::Parallel, ShgConfig::Perpendicular] {
            let s = simulate_shg_sweep(&crystal, 2.0, &steps(5.0), cfg, &src, None).unwrap();
            let f = analyze_shg_sweep(&s, cfg).unwrap();
            assert!((f.theta0_deg - 43.52).abs() < 1e-6, "{cfg:?}: {}", f.theta0_deg);
        }
        let s = simulate_shg_sweep(&CrystalAxes::new(5.0).unwrap(), 2.0, &steps(5.0), ShgConfig::Parallel, &src, None)
            .unwrap();
        let f = analyze_shg_sweep(&s, ShgConfig::Parallel).unwrap();
        assert!((0.0..60.0).contains(&f.theta0_deg) && (f.theta0_deg - 5.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_slope() {
        let x = [1.0, 2.0, 5.0, 10.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        let (k, e) = fit_power_law(&x, &y).unwrap();
        assert!((k - 2.0).abs() < 1e-12 && e < 1e-10);
    }
}
