//! Weighted nonlinear least squares and the model functions fitted by the
//! analysis chain.

pub mod lm;
pub mod models;

pub use lm::{levenberg_marquardt, Bounds, FitResult, FitStatus, FnResiduals, LmOptions, Residuals};
pub use models::{
    cosine_squared_gradient, eval_cosine_squared, eval_exp_irf, eval_exp_irf_bin, eval_g2_pulsed, eval_sixfold,
    g2_comb_integral, sixfold_gradient, ExpIrfParams, G2CombParams, SixfoldParams,
};

/// Count-data weight `1/σ` with `σ = sqrt(max(y, 1))`, or the supplied error.
pub fn poisson_inverse_sigma(y: f64, error: Option<f64>) -> f64 {
    match error {
        Some(e) if e > 0.0 => 1.0 / e,
        _ => 1.0 / y.max(1.0).sqrt(),
    }
}

/// Signed Poisson deviance residual, `sign(y − μ)·sqrt(2(μ − y + y·ln(y/μ)))`.
/// Minimizing the sum of squares is the Poisson maximum-likelihood fit; it
/// avoids the low bias that `1/y` weights give in sparsely populated bins.
pub fn poisson_deviance_residual(y: f64, mu: f64) -> f64 {
    if !(mu > 0.0) {
        return if y > 0.0 || mu < 0.0 { f64::NAN } else { 0.0 };
    }
    let d = if y > 0.0 { mu - y + y * (y / mu).ln() } else { mu };
    let r = (2.0 * d.max(0.0)).sqrt();
    if y >= mu {
        r
    } else {
        -r
    }
}
