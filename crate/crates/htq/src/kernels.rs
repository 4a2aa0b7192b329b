//! Numerically stable evaluation of the transform kernel
//!
//! ```text
//! K(s, t) = -(1/pi) ln[ tan(pi (s+t) / 4T) tan(pi |t-s| / 4T) ]
//! ```
//!
//! and of the regularized logarithmic factors the assembly schemes need.
//! Everything routes through one primitive, `logtan_over_x`, which evaluates
//! `ln(tan(pi r / 4T) / r)` with its removable singularity at `r = 0` filled
//! by a short Taylor series, so the stability of every factor is tested in
//! one place. Arguments with `s + t > T` use the cotangent identity
//! `tan(pi u / 4T) = 1 / tan(pi (2T - u) / 4T)` to stay away from the tangent
//! pole.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Horizon-bound kernel evaluator.
#[derive(Debug, Clone)]
pub struct KernelContext {
    horizon: f64,
    eps_series: f64,
    log_pi_over_4t: f64,
}

/// Which regularized factor to evaluate; the same formulas serve both the
/// double-integral and the endpoint-trace schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegFactor {
    /// Both elements touch `t = 0`: both logs divided out,
    /// `ln[ tan(.. (s+t))/(s+t) * tan(.. |t-s|)/|t-s| ]`.
    FirstFirst,
    /// Both elements touch `t = T`: the `s + t` factor regularized at `2T`,
    /// `ln[ tan(.. (s+t)) (2T-s-t) * tan(.. |t-s|)/|t-s| ]`.
    LastLast,
    /// Interior pairs: only the diagonal factor divided out,
    /// `ln[ tan(.. (s+t)) * tan(.. |t-s|)/|t-s| ]`.
    General,
    /// Single-element meshes, where the first and last element coincide:
    /// both endpoints regularized,
    /// `ln[ tan(.. (s+t)) (2T-s-t)/(s+t) * tan(.. |t-s|)/|t-s| ]`.
    FirstLast,
}

impl KernelContext {
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("kernel context needs T > 0"));
        }
        Ok(KernelContext {
            horizon,
            eps_series: 1e-4 * horizon,
            log_pi_over_4t: (PI / (4.0 * horizon)).ln(),
        })
    }

    /// Override the series/direct switchover radius (default `1e-4 T`).
    pub fn with_eps_series(mut self, eps: f64) -> Self {
        self.eps_series = eps;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `ln(pi / 4T)`, the `r -> 0` limit of [`Self::logtan_over_x`].
    pub fn logtan_limit(&self) -> f64 {
        self.log_pi_over_4t
    }

    /// `ln( tan(pi r / 4T) / r )` for `r` in `(0, 2T)`.
    pub fn logtan_over_x(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 2.0 * self.horizon) {
            return Err(Error::domain(format!(
                "logtan_over_x needs r in (0, 2T); got r = {r}, T = {}",
                self.horizon
            )));
        }
        Ok(self.logtan_over_x_unchecked(r))
    }

    /// Same as [`Self::logtan_over_x`] but extended by continuity to `r = 0`;
    /// used internally where quadrature arguments can hit the corner.
    #[inline]
    pub(crate) fn logtan_over_x_unchecked(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0 && r < 2.0 * self.horizon);
        if r < self.eps_series {
            // ln(tan x / x) = x^2/3 + 7 x^4/90 + 62 x^6 / 2835 + ...
            let x = PI * r / (4.0 * self.horizon);
            let x2 = x * x;
            self.log_pi_over_4t + x2 * (1.0 / 3.0 + x2 * (7.0 / 90.0 + x2 * (62.0 / 2835.0)))
        } else {
            ((PI * r / (4.0 * self.horizon)).tan() / r).ln()
        }
    }

    /// `ln tan(pi u / 4T)` for `u` in `(0, 2T)`, using the cotangent form on
    /// the upper half so the tangent argument never approaches its pole.
    #[inline]
    pub(crate) fn logtan(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 2.0 * self.horizon);
        if u <= self.horizon {
            self.logtan_over_x_unchecked(u) + u.ln()
        } else {
            let v = 2.0 * self.horizon - u;
            -self.logtan_over_x_unchecked(v) - v.ln()
        }
    }

    /// The weakly singular kernel `K(s, t)`; errors on the diagonal `s = t`
    /// (where every assembly path must use a regularized factor instead) and
    /// at `(0, 0)`.
    pub fn calk(&self, s: f64, t: f64) -> Result<f64> {
        let tt = self.horizon;
        if !(s >= 0.0 && s <= tt && t >= 0.0 && t <= tt) {
            return Err(Error::domain(format!("calK arguments ({s}, {t}) outside [0, T]^2")));
        }
        if s == t {
            return Err(Error::domain(
                "calK is singular on the diagonal s = t; use a regularized factor",
            ));
        }
        if s + t == 0.0 {
            return Err(Error::domain("calK is singular at (0, 0)"));
        }
        Ok(-(self.logtan(s + t) + self.logtan((t - s).abs())) / PI)
    }

    /// Cauchy principal value kernel
    /// `(1/2T) [ 1/sin(pi (s+t) / 2T) + 1/sin(pi (s-t) / 2T) ]`.
    pub fn k_cauchy(&self, s: f64, t: f64) -> Result<f64> {
        let tt = self.horizon;
        if s == t {
            return Err(Error::domain("Cauchy kernel is singular at s = t"));
        }
        let upt = s + t;
        if !(upt > 0.0 && upt < 2.0 * tt) {
            return Err(Error::domain(format!(
                "Cauchy kernel needs s + t in (0, 2T); got {upt}"
            )));
        }
        let a = (PI * upt / (2.0 * tt)).sin();
        let b = (PI * (s - t) / (2.0 * tt)).sin();
        Ok((1.0 / a + 1.0 / b) / (2.0 * tt))
    }

    /// Regularized logarithmic factor for the given element-pair case.
    pub fn reg_factor(&self, case: RegFactor, s: f64, t: f64) -> Result<f64> {
        let tt = self.horizon;
        let sum = s + t;
        let diff = (t - s).abs();
        let co = 2.0 * tt - sum;
        let ok = match case {
            RegFactor::FirstFirst => sum > 0.0 || diff > 0.0,
            RegFactor::LastLast => co >= 0.0 && sum > 0.0,
            RegFactor::General => sum > 0.0 && co > 0.0,
            RegFactor::FirstLast => true,
        } && s >= 0.0
            && t >= 0.0
            && s <= tt
            && t <= tt;
        if !ok {
            return Err(Error::domain(format!(
                "reg_factor {case:?} arguments ({s}, {t}) outside its regular domain"
            )));
        }
        Ok(self.reg_factor_unchecked(case, s, t))
    }

    #[inline]
    pub(crate) fn reg_factor_unchecked(&self, case: RegFactor, s: f64, t: f64) -> f64 {
        let sum = s + t;
        let diff = (t - s).abs();
        let dterm = self.logtan_over_x_unchecked(diff);
        match case {
            RegFactor::FirstFirst => self.logtan_over_x_unchecked(sum) + dterm,
            RegFactor::LastLast => -self.logtan_over_x_unchecked(2.0 * self.horizon - sum) + dterm,
            RegFactor::General => self.logtan(sum) + dterm,
            // smooth part once both ln(s+t) and ln(2T-s-t) are extracted:
            // ln[tan(pi(s+t)/4T) (2T-s-t)/(s+t)] + ln[tan(pi|t-s|/4T)/|t-s|]
            RegFactor::FirstLast => {
                if sum <= self.horizon {
                    self.logtan_over_x_unchecked(sum) + (2.0 * self.horizon - sum).ln() + dterm
                } else {
                    let v = 2.0 * self.horizon - sum;
                    -self.logtan_over_x_unchecked(v) - sum.ln() + dterm
                }
            }
        }
    }
}
