//! Cutoff ramps: functions flat near the endpoints of `[0,1]` that climb
//! linearly in between, and the smoothed step built on top of them.  They
//! turn particle fractions into interpolation weights whose increments
//! stay of order `1/n` under single jumps.

use crate::error::{CoreError, Result};

/// A `C^1` ramp with plateaus `[0,3e] -> 0` and `[1-3e,1] -> 1`, the exact
/// linear middle `(t-4e)/(1-8e)` on `[5e,1-5e]`, and parabolic bridges on
/// the two transition bands.  `smooth_step` composes the classic cubic
/// step `3u^2 - 2u^3` with the ramp, so it shares the plateaus and gains
/// a flat derivative at both ends of the climb.
#[derive(Clone, Copy, Debug)]
pub struct CutoffProfile {
    epsilon: f64,
    /// Slope of the linear middle, `1/(1-8e)`; also the sup of `ramp_slope`.
    slope: f64,
}

impl CutoffProfile {
    /// Width parameter `e` must lie in `(0, 1/16]` so the linear middle
    /// `[5e, 1-5e]` is nonempty.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0 / 16.0) {
            return Err(CoreError::argument(format!(
                "cutoff profile: width must lie in (0, 1/16], got {epsilon}"
            )));
        }
        Ok(CutoffProfile {
            epsilon,
            slope: 1.0 / (1.0 - 8.0 * epsilon),
        })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sup of the ramp derivative, attained on the linear middle.
    #[inline]
    pub fn max_slope(&self) -> f64 {
        self.slope
    }

    /// Lower half of the ramp, valid for `t <= 1/2`.  The bridge on
    /// `[3e, 5e]` is the parabola `s*e*u^2`, `u = (t-3e)/(2e)`: it meets
    /// the plateau and the linear middle with matching value and slope.
    fn low(&self, t: f64) -> f64 {
        let e = self.epsilon;
        if t <= 3.0 * e {
            0.0
        } else if t < 5.0 * e {
            let u = (t - 3.0 * e) / (2.0 * e);
            self.slope * e * u * u
        } else {
            self.slope * (t - 4.0 * e)
        }
    }

    fn low_slope(&self, t: f64) -> f64 {
        let e = self.epsilon;
        if t <= 3.0 * e {
            0.0
        } else if t < 5.0 * e {
            self.slope * (t - 3.0 * e) / (2.0 * e)
        } else {
            self.slope
        }
    }

    /// Ramp value; the upper half is `1 - low(1-t)`, which makes the
    /// symmetry `ramp(t) + ramp(1-t) = 1` hold by construction.
    pub fn ramp(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        if t <= 0.5 {
            self.low(t)
        } else {
            1.0 - self.low(1.0 - t)
        }
    }

    /// Ramp derivative (one-sided at the junctions, where both sides agree).
    pub fn ramp_slope(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        if t <= 0.5 {
            self.low_slope(t)
        } else {
            self.low_slope(1.0 - t)
        }
    }

    /// Smoothed step `3 r^2 - 2 r^3` with `r = ramp(t)`: 0 on `[0,3e]`,
    /// 1 on `[1-3e,1]`, strictly inside `(0,1)` in between.
    pub fn smooth_step(&self, t: f64) -> f64 {
        let r = self.ramp(t);
        r * r * (3.0 - 2.0 * r)
    }
}
