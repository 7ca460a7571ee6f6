//! Model functions used by the analysis fits, with analytic gradients where
//! the solver benefits from them.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::geometry::MalusParams;

/// Same contract as [`crate::geometry::malus_intensity`], with the polarizer
/// angle in raw degrees (the model is 180°-periodic, so no wrapping is needed).
pub fn eval_cosine_squared(p: &MalusParams, theta_deg: f64) -> f64 {
    let c = (2.0 * (theta_deg.to_radians() - p.axis.radians())).cos();
    p.background + 0.5 * p.amplitude * (1.0 + p.visibility * c)
}

/// `∂I/∂(A, V, θ₀[deg], B)`.
pub fn cosine_squared_gradient(p: &MalusParams, theta_deg: f64) -> [f64; 4] {
    let x = 2.0 * (theta_deg.to_radians() - p.axis.radians());
    let (s, c) = x.sin_cos();
    [
        0.5 * (1.0 + p.visibility * c),
        0.5 * p.amplitude * c,
        p.amplitude * p.visibility * s * std::f64::consts::PI / 180.0,
        1.0,
    ]
}

/// Exponential decay convolved with a Gaussian IRF. `amplitude` is the
/// total decay area (counts·ns per ns of density), `background` a flat
/// density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpIrfParams {
    pub amplitude: f64,
    pub tau_ns: f64,
    pub t0_ns: f64,
    pub irf_sigma_ns: f64,
    pub background: f64,
}

impl ExpIrfParams {
    pub fn new(amplitude: f64, tau_ns: f64, t0_ns: f64, irf_sigma_ns: f64, background: f64) -> Result<Self> {
        if !(tau_ns > 0.0 && tau_ns.is_finite()) {
            return Err(invalid("tau_ns", format!("must be > 0, got {tau_ns}")));
        }
        if !(irf_sigma_ns >= 0.0 && irf_sigma_ns.is_finite()) {
            return Err(invalid("irf_sigma_ns", format!("must be >= 0, got {irf_sigma_ns}")));
        }
        if !(background >= 0.0) {
            return Err(invalid("background", format!("must be >= 0, got {background}")));
        }
        if !t0_ns.is_finite() || !amplitude.is_finite() {
            return Err(invalid("exp_irf", "amplitude and t0 must be finite"));
        }
        Ok(Self { amplitude, tau_ns, t0_ns, irf_sigma_ns, background })
    }
}

fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// Unit-area exponentially modified Gaussian density at `t`.
fn emg_density(tau: f64, t0: f64, sigma: f64, t: f64) -> f64 {
    let x = t - t0;
    if sigma == 0.0 {
        return if x >= 0.0 { (-x / tau).exp() / tau } else { 0.0 };
    }
    let expo = sigma * sigma / (2.0 * tau * tau) - x / tau;
    let z = (sigma / tau - x / sigma) / std::f64::consts::SQRT_2;
    if expo > 700.0 {
        // Far before t0: the Gaussian tail has underflowed.
        let u = x / sigma;
        let tail = (-0.5 * u * u).exp();
        return if tail == 0.0 { 0.0 } else { tail * erfcx_large(z) / (2.0 * tau) };
    }
    expo.exp() * erfc(z) / (2.0 * tau)
}

/// `exp(z²)·erfc(z)` for large positive `z` (asymptotic series).
fn erfcx_large(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / (2.0 * z2);
        sum += term;
    }
    sum / (z * std::f64::consts::PI.sqrt())
}

/// Unit-area cumulative distribution of the decay shape:
/// `Φ(x/σ) − τ·density(t)`.
fn emg_cdf(tau: f64, t0: f64, sigma: f64, t: f64) -> f64 {
    let x = t - t0;
    if sigma == 0.0 {
        return if x >= 0.0 { -(-x / tau).exp_m1() } else { 0.0 };
    }
    std_normal_cdf(x / sigma) - tau * emg_density(tau, t0, sigma, t)
}

/// Density `(A/(2τ))·exp(σ²/(2τ²) − (t−t0)/τ)·erfc((σ/τ − (t−t0)/σ)/√2) + B`.
pub fn eval_exp_irf(p: &ExpIrfParams, t_ns: f64) -> f64 {
    p.amplitude * emg_density(p.tau_ns, p.t0_ns, p.irf_sigma_ns, t_ns) + p.background
}

/// Expected counts in `[a, b)`: the density integrated over the bin.
pub fn eval_exp_irf_bin(p: &ExpIrfParams, a_ns: f64, b_ns: f64) -> f64 {
    let s = p.irf_sigma_ns;
    p.amplitude * (emg_cdf(p.tau_ns, p.t0_ns, s, b_ns) - emg_cdf(p.tau_ns, p.t0_ns, s, a_ns))
        + p.background * (b_ns - a_ns)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixfoldParams {
    pub amplitude: f64,
    pub theta0_deg: f64,
    pub background: f64,
}

/// `A·cos²(3(θ−θ₀)) + B`.
pub fn eval_sixfold(p: &SixfoldParams, theta_deg: f64) -> f64 {
    let x = 3.0 * (theta_deg - p.theta0_deg).to_radians();
    p.amplitude * x.cos().powi(2) + p.background
}

/// `∂I/∂(A, θ₀[deg], B)`.
pub fn sixfold_gradient(p: &SixfoldParams, theta_deg: f64) -> [f64; 3] {
    let x = 3.0 * (theta_deg - p.theta0_deg).to_radians();
    [
        x.cos().powi(2),
        3.0 * p.amplitude * (2.0 * x).sin() * std::f64::consts::PI / 180.0,
        1.0,
    ]
}

/// Pulsed-excitation coincidence comb. Side peaks carry `peak_area`
/// coincidences each, the center peak `g2_0·peak_area`; `background` is a
/// flat density per ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2CombParams {
    pub peak_area: f64,
    pub g2_0: f64,
    pub period_ns: f64,
    pub tau_ns: f64,
    pub background: f64,
}

fn comb_range(p: &G2CombParams, lo: f64, hi: f64) -> (i64, i64) {
    let reach = 40.0 * p.tau_ns;
    (
        ((lo - reach) / p.period_ns).floor() as i64,
        ((hi + reach) / p.period_ns).ceil() as i64,
    )
}

fn peak_weight(p: &G2CombParams, k: i64) -> f64 {
    if k == 0 {
        p.g2_0 * p.peak_area
    } else {
        p.peak_area
    }
}

/// Coincidence density per ns at `delay_ns`: two-sided exponential peaks
/// `(1/(2τ))·e^(−|δ−kP|/τ)`.
pub fn eval_g2_pulsed(p: &G2CombParams, delay_ns: f64) -> f64 {
    let (k0, k1) = comb_range(p, delay_ns, delay_ns);
    let mut s = p.background;
    for k in k0..=k1 {
        let d = (delay_ns - k as f64 * p.period_ns).abs();
        s += peak_weight(p, k) * (-d / p.tau_ns).exp() / (2.0 * p.tau_ns);
    }
    s
}

/// Integral of [`eval_g2_pulsed`] over `[lo, hi]`.
pub fn g2_comb_integral(p: &G2CombParams, lo: f64, hi: f64) -> f64 {
    let laplace_cdf = |x: f64| {
        if x < 0.0 {
            0.5 * (x / p.tau_ns).exp()
        } else {
            1.0 - 0.5 * (-x / p.tau_ns).exp()
        }
    };
    let (k0, k1) = comb_range(p, lo, hi);
    let mut s = p.background * (hi - lo);
    for k in k0..=k1 {
        let c = k as f64 * p.period_ns;
        s += peak_weight(p, k) * (laplace_cdf(hi - c) - laplace_cdf(lo - c));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{malus_intensity, wrap_axis};

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let p = MalusParams::new(1234.0, 0.83, 37.0, 12.0).unwrap();
        for &th in &[0.0, 22.0, 91.0, 250.0] {
            let g = cosine_squared_gradient(&p, th);
            let fa = central_diff(|a| eval_cosine_squared(&MalusParams { amplitude: a, ..p }, th), p.amplitude);
            let fv = central_diff(|v| eval_cosine_squared(&MalusParams { visibility: v, ..p }, th), p.visibility);
            let ft = central_diff(
                |t| eval_cosine_squared(&MalusParams { axis: wrap_axis(t).unwrap(), ..p }, th),
                37.0,
            );
            let fb = central_diff(|b| eval_cosine_squared(&MalusParams { background: b, ..p }, th), p.background);
            for (a, b) in g.iter().zip([fa, fv, ft, fb]) {
                assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
        for &th in &[0.0, 44.0, 190.0] {
            let a = eval_cosine_squared(&p, th);
            assert!((a - malus_intensity(&p, wrap_axis(th).unwrap())).abs() < 1e-9);
        }
        let flat = MalusParams { visibility: 0.0, ..p };
        assert_eq!(cosine_squared_gradient(&flat, 10.0)[2], 0.0);
    }

    #[test]
    fn zero_width_irf_is_pure_exponential() {
        let p = ExpIrfParams::new(100.0, 3.96, 1.0, 0.0, 2.0).unwrap();
        for &t in &[1.0, 2.5, 10.0] {
            let want = 100.0 / 3.96 * (-(t - 1.0) / 3.96_f64).exp() + 2.0;
            assert!((eval_exp_irf(&p, t) - want).abs() < 1e-12);
        }
        assert_eq!(eval_exp_irf(&p, 0.5), 2.0);
        assert!(ExpIrfParams::new(1.0, 1.0, 0.0, -0.1, 0.0).is_err());
        assert!(ExpIrfParams::new(1.0, 0.0, 0.0, 0.1, 0.0).is_err());
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn area_invariant_and_peak_shifts_with_sigma() {
        let mut last_peak = f64::NEG_INFINITY;
        for &sigma in &[0.03, 0.1, 0.3, 0.6] {
            let p = ExpIrfParams::new(1.0, 2.0, 5.0, sigma, 0.0).unwrap();
            let area = simpson(|t| eval_exp_irf(&p, t), 0.0, 60.0, 200_000);
            assert!((area - 1.0).abs() < 1e-6, "sigma {sigma}: area {area}");
            let peak = (0..100_000)
                .map(|i| 4.0 + i as f64 * 4e-5)
                .max_by(|a, b| eval_exp_irf(&p, *a).total_cmp(&eval_exp_irf(&p, *b)))
                .unwrap();
            assert!(peak > last_peak);
            last_peak = peak;
        }
    }

    #[test]
    fn bin_integral_matches_quadrature() {
        let p = ExpIrfParams::new(500.0, 3.96, 2.0, 0.0297, 0.4).unwrap();
        for &(a, b) in &[(1.0, 1.9), (1.95, 2.05), (2.0, 2.1), (10.0, 10.1), (-5.0, 0.0)] {
            let q = simpson(|t| eval_exp_irf(&p, t), a, b, 20_000);
            let c = eval_exp_irf_bin(&p, a, b);
            assert!((q - c).abs() < 1e-8 * (1.0 + q.abs()), "{a}..{b}: {q} vs {c}");
        }
        // Stable far before and long after t0.
        assert_eq!(eval_exp_irf(&p, -1e4), 0.4);
        assert!(eval_exp_irf(&p, 1e4).is_finite());
    }

    #[test]
    fn sixfold_examples_and_gradient() {
        let p = SixfoldParams { amplitude: 10.0, theta0_deg: 43.52, background: 2.0 };
        assert!((eval_sixfold(&p, 43.52) - 12.0).abs() < 1e-12);
        assert!((eval_sixfold(&p, 73.52) - 2.0).abs() < 1e-12);
        assert!((eval_sixfold(&p, 103.52) - 12.0).abs() < 1e-12);
        let g = sixfold_gradient(&p, 20.0);
        let ft = central_diff(|t| eval_sixfold(&SixfoldParams { theta0_deg: t, ..p }, 20.0), 43.52);
        assert!((g[1] - ft).abs() < 1e-6 * (1.0 + ft.abs()));
    }

    #[test]
    fn g2_comb_limits() {
        let p = G2CombParams { peak_area: 1000.0, g2_0: 0.0, period_ns: 50.0, tau_ns: 3.96, background: 0.0 };
        assert!(eval_g2_pulsed(&p, 0.0) < 1e-3);
        let poisson = G2CombParams { g2_0: 1.0, ..p };
        let c = g2_comb_integral(&poisson, -25.0, 25.0);
        let s = g2_comb_integral(&poisson, 25.0, 75.0);
        assert!((c - s).abs() < 1e-9 * s);
        let area = simpson(|d| eval_g2_pulsed(&poisson, d), -25.0, 25.0, 100_000);
        assert!((area - c).abs() < 1e-6 * c);
    }
}
