use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::FWHM_PER_SIGMA;
use crate::error::{invalid, Result};

/// Detected count rate of a point emitter at a lateral position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlEmitter {
    pub x_nm: f64,
    pub y_nm: f64,
    pub rate_cps: f64,
}

/// Raster-scan settings. Pixel `(ix, iy)` covers
/// `[ix·p, (ix+1)·p) × [iy·p, (iy+1)·p)` with `p = pixel_size_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlScan {
    pub width: usize,
    pub height: usize,
    pub pixel_size_nm: f64,
    pub dwell_ms: f64,
    pub psf_fwhm_nm: f64,
    pub background_cps: f64,
    /// Lateral stage drift accumulated per frame.
    pub drift_nm_per_frame: [f64; 2],
    pub frame: u32,
}

impl Default for PlScan {
    fn default() -> Self {
        Self {
            width: 40,
            height: 40,
            pixel_size_nm: 50.0,
            dwell_ms: 5.0,
            psf_fwhm_nm: 400.0,
            background_cps: 0.0,
            drift_nm_per_frame: [0.0, 0.0],
            frame: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlMap {
    pub width: usize,
    pub height: usize,
    pub pixel_size_nm: f64,
    pub dwell_ms: f64,
    /// Row-major counts, `values[iy * width + ix]`.
    pub values: Vec<f64>,
}

impl PlMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Fraction of a unit 1D Gaussian (center `mu`, width `sigma`) inside `[a, b)`.
pub(crate) fn gaussian_interval(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * (statrs::function::erf::erf((b - mu) / s) - statrs::function::erf::erf((a - mu) / s))
}

/// Pixel-integrated Gaussian PSF spots plus flat background. `seed == None`
/// yields the noiseless expectation, otherwise Poisson counts.
pub fn simulate_pl_map(emitters: &[PlEmitter], scan: &PlScan, seed: Option<u64>) -> Result<PlMap> {
    if scan.width == 0 || scan.height == 0 {
        return Err(invalid("scan", "map must have at least one pixel"));
    }
    if !(scan.pixel_size_nm > 0.0 && scan.psf_fwhm_nm > 0.0 && scan.dwell_ms > 0.0) {
        return Err(invalid("scan", "pixel size, PSF width and dwell time must be > 0"));
    }
    let (w_nm, h_nm) = (
        scan.width as f64 * scan.pixel_size_nm,
        scan.height as f64 * scan.pixel_size_nm,
    );
    for e in emitters {
        if !(0.0..w_nm).contains(&e.x_nm) || !(0.0..h_nm).contains(&e.y_nm) {
            return Err(invalid("emitters", format!("emitter at ({}, {}) nm lies outside the field", e.x_nm, e.y_nm)));
        }
    }
    let sigma = scan.psf_fwhm_nm / FWHM_PER_SIGMA;
    let dwell = scan.dwell_ms * 1e-3;
    let p = scan.pixel_size_nm;
    let drift = [
        scan.drift_nm_per_frame[0] * scan.frame as f64,
        scan.drift_nm_per_frame[1] * scan.frame as f64,
    ];

    let mut values = vec![scan.background_cps * dwell; scan.width * scan.height];
    for e in emitters {
        let (cx, cy) = (e.x_nm + drift[0], e.y_nm + drift[1]);
        let fx: Vec<f64> = (0..scan.width)
            .map(|ix| gaussian_interval(ix as f64 * p, (ix + 1) as f64 * p, cx, sigma))
            .collect();
        let fy: Vec<f64> = (0..scan.height)
            .map(|iy| gaussian_interval(iy as f64 * p, (iy + 1) as f64 * p, cy, sigma))
            .collect();
        for (iy, gy) in fy.iter().enumerate() {
            for (ix, gx) in fx.iter().enumerate() {
                values[iy * scan.width + ix] += e.rate_cps * dwell * gx * gy;
            }
        }
    }
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in values.iter_mut() {
            *v = if *v > 0.0 {
                Poisson::new(*v).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            };
        }
    }
    Ok(PlMap {
        width: scan.width,
        height: scan.height,
        pixel_size_nm: scan.pixel_size_nm,
        dwell_ms: scan.dwell_ms,
        values,
    })
}
