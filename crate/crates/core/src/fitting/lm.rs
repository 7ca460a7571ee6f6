//! Bounded Levenberg-Marquardt solver for weighted nonlinear least squares.
//!
//! The caller supplies already-weighted residuals `r_i = (y_i - f_i(p)) / σ_i`;
//! the solver minimizes `Σ r_i²`. The reported covariance is the unscaled
//! `(JᵀJ)⁻¹`, i.e. the σ_i are taken as absolute uncertainties.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Residuals {
    fn n_residuals(&self) -> usize;

    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Writes `∂r_i/∂p_j` into `jac` and returns `true`, or returns `false`
    /// to request a central finite-difference Jacobian.
    fn jacobian(&self, _params: &[f64], _jac: &mut DMatrix<f64>) -> bool {
        false
    }
}

/// Adapts a closure `(params, out)` into a [`Residuals`] without a Jacobian.
pub struct FnResiduals<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnResiduals<F> {
    pub fn new(n_residuals: usize, f: F) -> Self {
        Self { n: n_residuals, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Residuals for FnResiduals<F> {
    fn n_residuals(&self) -> usize {
        self.n
    }
    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        (self.f)(params, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with(mut self, index: usize, lower: f64, upper: f64) -> Self {
        self.lower[index] = lower;
        self.upper[index] = upper;
        self
    }

    fn clamp(&self, p: &mut [f64]) {
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub tol_g: f64,
    pub tol_x: f64,
    /// Relative objective reduction below which an accepted step ends the fit.
    pub tol_f: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            tol_g: 1e-8,
            tol_x: 1e-10,
            tol_f: 1e-15,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    GradientTolerance,
    StepTolerance,
    ObjectiveTolerance,
    ExactFit,
    MaxIterations,
    /// Residuals turned non-finite and no finite step could be found.
    NonFinite,
    /// Damping diverged without an acceptable step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
}

impl FitResult {
    pub fn uncertainties(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }
}

fn finite_difference_jacobian<R: Residuals + ?Sized>(
    problem: &R,
    p: &[f64],
    bounds: Option<&Bounds>,
    jac: &mut DMatrix<f64>,
) {
    let m = problem.n_residuals();
    let mut hi = vec![0.0; m];
    let mut lo = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 6e-6 * p[j].abs().max(1e-3);
        // Stay inside the box: one-sided differences next to a bound.
        let (mut up, mut down) = (p[j] + h, p[j] - h);
        if let Some(b) = bounds {
            if down < b.lower[j] {
                down = p[j];
            }
            if up > b.upper[j] {
                up = p[j];
            }
        }
        q[j] = up;
        problem.residuals(&q, &mut hi);
        q[j] = down;
        problem.residuals(&q, &mut lo);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (hi[i] - lo[i]) / (up - down);
        }
    }
}

fn evaluate_jacobian<R: Residuals + ?Sized>(problem: &R, p: &[f64], bounds: Option<&Bounds>, jac: &mut DMatrix<f64>) {
    if !problem.jacobian(p, jac) {
        finite_difference_jacobian(problem, p, bounds, jac);
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<R: Residuals + ?Sized>(
    problem: &R,
    init: &[f64],
    bounds: Option<&Bounds>,
    opts: &LmOptions,
) -> Result<FitResult> {
    let n = init.len();
    let m = problem.n_residuals();
    if n == 0 {
        return Err(Error::Fit("no free parameters".into()));
    }
    if m == 0 {
        return Err(Error::Fit("no residuals".into()));
    }
    let mut p = init.to_vec();
    if let Some(b) = bounds {
        if b.lower.len() != n || b.upper.len() != n {
            return Err(Error::Fit("bounds length does not match parameter count".into()));
        }
        b.clamp(&mut p);
    }

    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("residuals are not finite at the initial parameters".into()));
    }
    let mut cost = sum_sq(&r);
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut r_trial = vec![0.0; m];
    // Damping is relative to diag(JᵀJ), so λ is dimensionless.
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            status = FitStatus::ExactFit;
            break;
        }
        evaluate_jacobian(problem, &p, bounds, &mut jac);
        let rv = DVector::from_column_slice(&r);
        let a = jac.tr_mul(&jac);
        let mut g = jac.tr_mul(&rv);
        // Parameters pinned at a bound by the descent direction are frozen
        // for this iteration; the gradient test uses the projected gradient.
        let active: Vec<bool> = (0..n)
            .map(|i| {
                bounds.is_some_and(|b| (p[i] <= b.lower[i] && g[i] > 0.0) || (p[i] >= b.upper[i] && g[i] < 0.0))
            })
            .collect();
        for i in 0..n {
            if active[i] {
                g[i] = 0.0;
            }
        }
        if g.amax() <= opts.tol_g {
            status = FitStatus::GradientTolerance;
            break;
        }
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].max(1e-300)).collect();

        loop {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * diag[i];
            }
            for i in (0..n).filter(|&i| active[i]) {
                for j in 0..n {
                    damped[(i, j)] = 0.0;
                    damped[(j, i)] = 0.0;
                }
                damped[(i, i)] = 1.0;
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= nu;
                        nu *= 2.0;
                        if !lambda.is_finite() || lambda > 1e30 {
                            status = FitStatus::Stalled;
                            break 'outer;
                        }
                        continue;
                    }
                },
            };

            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(b) = bounds {
                b.clamp(&mut trial);
            }
            let delta: Vec<f64> = trial.iter().zip(&p).map(|(a, b)| a - b).collect();
            let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d_norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d_norm <= opts.tol_x * (p_norm + opts.tol_x) {
                status = FitStatus::StepTolerance;
                break 'outer;
            }

            problem.residuals(&trial, &mut r_trial);
            let trial_cost = if r_trial.iter().all(|v| v.is_finite()) {
                sum_sq(&r_trial)
            } else {
                f64::INFINITY
            };

            if trial_cost < cost {
                let dv = DVector::from_column_slice(&delta);
                let predicted = -(2.0 * g.dot(&dv) + dv.dot(&(&a * &dv)));
                let rho = if predicted > 0.0 { (cost - trial_cost) / predicted } else { 1.0 };
                let reduction = cost - trial_cost;
                p = trial;
                std::mem::swap(&mut r, &mut r_trial);
                let old = cost;
                cost = trial_cost;
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                if reduction <= opts.tol_f * old {
                    status = FitStatus::ObjectiveTolerance;
                    break 'outer;
                }
                break;
            }

            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || lambda > 1e30 {
                status = if trial_cost.is_finite() {
                    FitStatus::Stalled
                } else {
                    FitStatus::NonFinite
                };
                break 'outer;
            }
        }
    }

    let converged = matches!(
        status,
        FitStatus::GradientTolerance | FitStatus::StepTolerance | FitStatus::ObjectiveTolerance | FitStatus::ExactFit
    );
    evaluate_jacobian(problem, &p, bounds, &mut jac);
    let a = jac.tr_mul(&jac);
    let cov = if a.iter().all(|v| v.is_finite()) {
        a.clone()
            .try_svd(true, true, f64::EPSILON, 10_000)
            .and_then(|svd| svd.pseudo_inverse(1e-12 * a.amax().max(1e-300)).ok())
    } else {
        None
    }
    .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let covariance = (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect();
    let dof = m.saturating_sub(n);
    Ok(FitResult {
        params: p,
        covariance,
        chi2: cost,
        reduced_chi2: if dof > 0 { cost / dof as f64 } else { f64::NAN },
        n_iterations: iterations,
        converged,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let prob = FnResiduals::new(xs.len(), |p: &[f64], out: &mut [f64]| {
            for i in 0..out.len() {
                out[i] = ys[i] - (p[0] * xs[i] + p[1]);
            }
        });
        let fit = levenberg_marquardt(&prob, &[0.0, 0.0], None, &LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 2.0).abs() < 1e-10);
        assert!((fit.params[1] - 1.0).abs() < 1e-10);
    }

    fn rosenbrock() -> FnResiduals<impl Fn(&[f64], &mut [f64])> {
        FnResiduals::new(2, |p: &[f64], out: &mut [f64]| {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        })
    }

    #[test]
    fn rosenbrock_converges() {
        let fit = levenberg_marquardt(&rosenbrock(), &[-1.2, 1.0], None, &LmOptions::default()).unwrap();
        assert!(fit.converged, "{:?}", fit.status);
        assert!((fit.params[0] - 1.0).abs() < 1e-6);
        assert!((fit.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock_grid_refinement_agrees() {
        // Independent check of the optimum: successive grid refinement of the
        // objective around the best cell.
        let f = |x: f64, y: f64| (10.0 * (y - x * x)).powi(2) + (1.0 - x).powi(2);
        let (mut cx, mut cy, mut half) = (0.0, 0.0, 2.0);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, cx, cy);
            for i in -10..=10 {
                for j in -10..=10 {
                    let (x, y) = (cx + half * i as f64 / 10.0, cy + half * j as f64 / 10.0);
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, x, y);
                    }
                }
            }
            cx = best.1;
            cy = best.2;
            half *= 0.5;
        }
        let fit = levenberg_marquardt(&rosenbrock(), &[-1.2, 1.0], None, &LmOptions::default()).unwrap();
        assert!((fit.params[0] - cx).abs() < 1e-6 && (fit.params[1] - cy).abs() < 1e-6);
    }

    #[test]
    fn objective_never_increases() {
        use std::cell::RefCell;
        let seen = RefCell::new(Vec::new());
        let prob = FnResiduals::new(2, |p: &[f64], out: &mut [f64]| {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
            seen.borrow_mut().push(out[0] * out[0] + out[1] * out[1]);
        });
        let opts = LmOptions { max_iterations: 1, ..Default::default() };
        let mut p = vec![-1.2, 1.0];
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let fit = levenberg_marquardt(&prob, &p, None, &opts).unwrap();
            assert!(fit.chi2 <= last);
            last = fit.chi2;
            p = fit.params;
        }
    }

    #[test]
    fn bounds_are_respected() {
        let prob = FnResiduals::new(1, |p: &[f64], out: &mut [f64]| out[0] = p[0] - 5.0);
        let b = Bounds::unbounded(1).with(0, 0.0, 2.0);
        let fit = levenberg_marquardt(&prob, &[1.0], Some(&b), &LmOptions::default()).unwrap();
        assert!((fit.params[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_residuals_are_diagnosed() {
        let prob = FnResiduals::new(1, |p: &[f64], out: &mut [f64]| out[0] = (p[0] - 0.5).ln());
        assert!(levenberg_marquardt(&prob, &[0.0], None, &LmOptions::default()).is_err());

        // Finite at start, NaN everywhere the solver wants to go.
        let prob = FnResiduals::new(1, |p: &[f64], out: &mut [f64]| {
            out[0] = if p[0] == 3.0 { 1.0 } else { f64::NAN };
        });
        let fit = levenberg_marquardt(&prob, &[3.0], None, &LmOptions::default()).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn max_iterations_reported() {
        let opts = LmOptions { max_iterations: 2, ..Default::default() };
        let fit = levenberg_marquardt(&rosenbrock(), &[-1.2, 1.0], None, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.status, FitStatus::MaxIterations);
    }
}
