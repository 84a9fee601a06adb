//! Ground-motion attenuation and intensity conversion.
//!
//! The attenuation law is a saturated log-linear form
//! `log10 PGA = a*M - b*log10(r + r0) + c` with PGA in cm/s^2 and
//! hypocentral distance r in km. The form is algebraically invertible in
//! magnitude, which is how the detector estimates M from reported
//! amplitudes; any model with the same four-coefficient interface (for
//! example a fitted envelope-model reduction) can be dropped in through
//! scenario configuration. The crate-wide convention is cm/s^2 inside
//! this module and m/s^2 on trigger messages; callers convert with a
//! factor of 100 at the boundary.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Saturated log-linear attenuation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundMotionModel {
    /// Magnitude scaling, log10 units per magnitude unit. > 0.
    pub a: f64,
    /// Geometric-spreading coefficient. > 0.
    pub b: f64,
    /// Offset, log10 cm/s^2.
    pub c: f64,
    /// Near-field saturation distance, km. > 0 (keeps the log finite at r = 0).
    pub r0: f64,
}

impl GroundMotionModel {
    pub fn new(a: f64, b: f64, c: f64, r0: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && r0 > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!(
                "attenuation coefficients must satisfy a > 0, b > 0, r0 > 0, got a={a}, b={b}, c={c}, r0={r0}"
            )));
        }
        Ok(GroundMotionModel { a, b, c, r0 })
    }

    /// Predicted log10 PGA (cm/s^2) at hypocentral distance `r_hyp` km.
    pub fn predict_log_pga(&self, magnitude: f64, r_hyp: f64) -> f64 {
        self.a * magnitude - self.b * (r_hyp + self.r0).log10() + self.c
    }

    /// Exact algebraic inverse of [`predict_log_pga`] in magnitude.
    ///
    /// [`predict_log_pga`]: GroundMotionModel::predict_log_pga
    pub fn invert_magnitude(&self, log_pga: f64, r_hyp: f64) -> f64 {
        (log_pga - self.c + self.b * (r_hyp + self.r0).log10()) / self.a
    }
}

impl Default for GroundMotionModel {
    /// Reference coefficients used throughout the test fixtures; real
    /// scenarios should supply region-calibrated values.
    fn default() -> Self {
        GroundMotionModel {
            a: 1.0,
            b: 1.5,
            c: -1.0,
            r0: 10.0,
        }
    }
}

/// Linear PGA -> Modified Mercalli Intensity conversion, clipped to [1, 10].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmiScale {
    /// Slope, MMI per log10 cm/s^2. > 0.
    pub m1: f64,
    /// Intercept.
    pub m0: f64,
}

impl MmiScale {
    pub const LO: f64 = 1.0;
    pub const HI: f64 = 10.0;

    pub fn new(m1: f64, m0: f64) -> Result<Self> {
        if !(m1 > 0.0 && m0.is_finite()) {
            return Err(Error::Config(format!(
                "MMI scale must have m1 > 0, got m1={m1}, m0={m0}"
            )));
        }
        Ok(MmiScale { m1, m0 })
    }

    /// MMI for a peak ground acceleration in cm/s^2.
    pub fn pga_to_mmi(&self, pga: f64) -> Result<f64> {
        if !(pga > 0.0) {
            return Err(Error::Input(format!("PGA must be positive, got {pga}")));
        }
        Ok((self.m1 * pga.log10() + self.m0).clamp(Self::LO, Self::HI))
    }
}

impl Default for MmiScale {
    fn default() -> Self {
        MmiScale { m1: 3.66, m0: -1.66 }
    }
}
