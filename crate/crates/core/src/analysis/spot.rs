//! Flux of a diffraction-limited spot in a PL map, by a pixel-integrated
//! 2D Gaussian plus flat background fit inside a circular region.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fitting::{levenberg_marquardt, poisson_deviance_residual, Bounds, FitResult, FnResiduals, LmOptions};
use crate::simulator::{gaussian_interval, PlMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotIntegral {
    pub flux: f64,
    pub flux_err: f64,
    /// Pixel coordinates; pixel `i` spans `[i, i+1)`.
    pub centroid_px: (f64, f64),
    pub centroid_nm: (f64, f64),
    pub sigma_px: f64,
    pub background_per_px: f64,
    /// `false` when the Gaussian fit failed and the flux is a
    /// background-subtracted region sum.
    pub fitted: bool,
    pub fit: Option<FitResult>,
}

fn roi_pixels(map: &PlMap, center: (f64, f64), radius: f64) -> Result<Vec<(usize, usize)>> {
    if !(radius >= 1.0) {
        return Err(invalid("roi_radius_px", "must be >= 1"));
    }
    let (cx, cy) = center;
    if cx - radius < 0.0 || cy - radius < 0.0 || cx + radius > map.width as f64 || cy + radius > map.height as f64 {
        return Err(invalid("roi", "region of interest extends beyond the map"));
    }
    let mut px = Vec::new();
    for iy in 0..map.height {
        for ix in 0..map.width {
            let (dx, dy) = (ix as f64 + 0.5 - cx, iy as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= radius * radius {
                px.push((ix, iy));
            }
        }
    }
    Ok(px)
}

pub fn integrate_spot(map: &PlMap, approx_center_px: (f64, f64), roi_radius_px: f64) -> Result<SpotIntegral> {
    let px = roi_pixels(map, approx_center_px, roi_radius_px)?;
    let y: Vec<f64> = px.iter().map(|&(x, yy)| map.at(x, yy)).collect();
    let n = px.len() as f64;

    // Background from the outer ring of the region.
    let (cx, cy) = approx_center_px;
    let ring: Vec<f64> = px
        .iter()
        .zip(&y)
        .filter(|((x, yy), _)| {
            let (dx, dy) = (*x as f64 + 0.5 - cx, *yy as f64 + 0.5 - cy);
            (dx * dx + dy * dy).sqrt() > roi_radius_px - 1.5
        })
        .map(|(_, v)| *v)
        .collect();
    let bg0 = if ring.is_empty() { 0.0 } else { ring.iter().sum::<f64>() / ring.len() as f64 };
    let total: f64 = y.iter().sum();
    let sum_flux = total - bg0 * n;

    let (mut mx, mut my, mut mw) = (0.0, 0.0, 0.0);
    for (&(x, yy), &v) in px.iter().zip(&y) {
        let s = (v - bg0).max(0.0);
        mx += s * (x as f64 + 0.5);
        my += s * (yy as f64 + 0.5);
        mw += s;
    }
    let (x0, y0) = if mw > 0.0 { (mx / mw, my / mw) } else { approx_center_px };

    let problem = FnResiduals::new(px.len(), |p: &[f64], out: &mut [f64]| {
        for (i, &(x, yy)) in px.iter().enumerate() {
            let gx = gaussian_interval(x as f64, x as f64 + 1.0, p[1], p[3]);
            let gy = gaussian_interval(yy as f64, yy as f64 + 1.0, p[2], p[3]);
            // Deviance residuals stay unbiased at a few counts per pixel.
            out[i] = poisson_deviance_residual(y[i], p[0] * gx * gy + p[4]);
        }
    });
    let bounds = Bounds {
        lower: vec![0.0, cx - roi_radius_px, cy - roi_radius_px, 0.2, 1e-9],
        upper: vec![f64::INFINITY, cx + roi_radius_px, cy + roi_radius_px, roi_radius_px, f64::INFINITY],
    };
    let init = [sum_flux.max(1.0), x0, y0, (roi_radius_px / 3.0).max(0.5), bg0.max(1e-3)];
    let fit = levenberg_marquardt(&problem, &init, Some(&bounds), &LmOptions::default()).ok();
    let p = map.pixel_size_nm;
    match fit {
        Some(f) if f.converged && f.params.iter().all(|v| v.is_finite()) => {
            let e = f.uncertainties();
            Ok(SpotIntegral {
                flux: f.params[0],
                flux_err: e[0],
                centroid_px: (f.params[1], f.params[2]),
                centroid_nm: (f.params[1] * p, f.params[2] * p),
                sigma_px: f.params[3],
                background_per_px: f.params[4],
                fitted: true,
                fit: Some(f),
            })
        }
        other => Ok(SpotIntegral {
            flux: sum_flux,
            flux_err: (total + n * n * bg0 / ring.len().max(1) as f64).sqrt(),
            centroid_px: (x0, y0),
            centroid_nm: (x0 * p, y0 * p),
            sigma_px: f64::NAN,
            background_per_px: bg0,
            fitted: false,
            fit: other,
        }),
    }
}
