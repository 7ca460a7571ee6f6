//! Axial-angle arithmetic, crystal-axis sets and the Malus-law intensity model.
//!
//! All public angles are in degrees. A polarization axis is an *axial*
//! quantity: 10° and 190° describe the same axis, so every angle is kept in
//! the canonical range `[0, 180)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Angular period of the in-plane crystal axes of a hexagonal lattice.
pub const CRYSTAL_AXIS_PERIOD_DEG: f64 = 60.0;

/// A polarization axis in degrees, wrapped into `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AxialAngle(f64);

impl AxialAngle {
    pub fn new(degrees: f64) -> Result<Self> {
        wrap_axis(degrees)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Wraps without validation; a non-finite input stays non-finite.
    pub(crate) fn wrapping(degrees: f64) -> Self {
        AxialAngle(wrap_into(degrees, 180.0))
    }

    /// Axis rotated by `delta` degrees.
    pub fn rotated(self, delta: f64) -> Self {
        AxialAngle(wrap_into(self.0 + delta, 180.0))
    }
}

impl TryFrom<f64> for AxialAngle {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        wrap_axis(value)
    }
}

impl From<AxialAngle> for f64 {
    fn from(a: AxialAngle) -> f64 {
        a.0
    }
}

impl std::fmt::Display for AxialAngle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}°", self.0)
    }
}

/// `x mod period` in `[0, period)`. `rem_euclid` can round up to `period`
/// for tiny negative inputs, which is folded back to zero.
pub(crate) fn wrap_into(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

pub fn wrap_axis(degrees: f64) -> Result<AxialAngle> {
    if !degrees.is_finite() {
        return Err(Error::NonFiniteAngle(degrees));
    }
    Ok(AxialAngle(wrap_into(degrees, 180.0)))
}

/// Signed axial difference `a - b` folded into `(-90, 90]`.
pub fn signed_axis_difference(a: f64, b: f64) -> f64 {
    let d = wrap_into(a - b, 180.0);
    if d > 90.0 {
        d - 180.0
    } else {
        d
    }
}

/// Unsigned axial distance in `[0, 90]`.
pub fn axis_distance(a: AxialAngle, b: AxialAngle) -> f64 {
    let d = wrap_into(a.0 - b.0, 180.0);
    d.min(180.0 - d)
}

/// The three in-plane crystal axes, 60° apart, anchored at `theta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalAxes {
    pub theta0: AxialAngle,
}

impl CrystalAxes {
    pub fn new(theta0_deg: f64) -> Result<Self> {
        Ok(Self {
            theta0: wrap_axis(theta0_deg)?,
        })
    }

    pub fn period(&self) -> f64 {
        CRYSTAL_AXIS_PERIOD_DEG
    }

    /// Axis set sorted ascending within `[0, 180)`.
    pub fn axes(&self) -> [AxialAngle; 3] {
        let mut a = [0.0, 60.0, 120.0].map(|k| self.theta0.rotated(k));
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        a
    }
}

/// Nearest crystal axis and the signed offset `angle - axis`, with
/// `|offset| <= 30` and an exact ±30° tie resolved to `+30`.
pub fn nearest_crystal_axis(angle: AxialAngle, axes: &CrystalAxes) -> (AxialAngle, f64) {
    let half = CRYSTAL_AXIS_PERIOD_DEG / 2.0;
    let mut offset = wrap_into(angle.0 - axes.theta0.0 + half, CRYSTAL_AXIS_PERIOD_DEG) - half;
    if offset <= -half {
        offset = half;
    }
    (angle.rotated(-offset), offset)
}

/// Cosine-squared (Malus) model `I(θ) = B + (A/2)·(1 + V·cos 2(θ−θ₀))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalusParams {
    pub amplitude: f64,
    pub visibility: f64,
    pub axis: AxialAngle,
    pub background: f64,
}

impl MalusParams {
    pub fn new(amplitude: f64, visibility: f64, axis_deg: f64, background: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(invalid("amplitude", format!("must be >= 0, got {amplitude}")));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid("visibility", format!("must lie in [0, 1], got {visibility}")));
        }
        if !(background >= 0.0) {
            return Err(invalid("background", format!("must be >= 0, got {background}")));
        }
        Ok(Self {
            amplitude,
            visibility,
            axis: wrap_axis(axis_deg)?,
            background,
        })
    }
}

pub fn malus_intensity(p: &MalusParams, polarizer: AxialAngle) -> f64 {
    let c = (2.0 * (polarizer.radians() - p.axis.radians())).cos();
    p.background + 0.5 * p.amplitude * (1.0 + p.visibility * c)
}

/// Mean and circular standard deviation of values living on a circle of the
/// given period (180 for axes, 60 for crystal-axis offsets). The mean is
/// returned in `[-period/2, period/2)`.
pub fn circular_mean_std(values: &[f64], period: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let k = std::f64::consts::TAU / period;
    let n = values.len() as f64;
    let (s, c) = values
        .iter()
        .fold((0.0, 0.0), |(s, c), v| (s + (k * v).sin(), c + (k * v).cos()));
    let (s, c) = (s / n, c / n);
    let r = (s * s + c * c).sqrt().min(1.0);
    let mean = s.atan2(c) / k;
    let mean = wrap_into(mean + period / 2.0, period) - period / 2.0;
    let std = if r > 0.0 {
        (-2.0 * r.ln()).max(0.0).sqrt() / k
    } else {
        f64::INFINITY
    };
    Some((mean, std))
}
