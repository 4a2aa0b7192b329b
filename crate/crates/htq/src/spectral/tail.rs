//! Machine-precision tails of the spectral mode sums.
//!
//! The oracle's entry sums truncate series of the form
//! `sum_{k >= K} e^{i lambda_k x} / lambda_k^s` with `lambda_k =
//! pi (k + 1/2) / T`. Sharp truncation converges like `1/K^{s-1}` at best, far
//! too slowly for a 1e-10 certificate, so the tails are summed analytically:
//!
//! - resonant phase (`x = 0 mod 2T`): Hurwitz zeta by Euler-Maclaurin;
//! - otherwise: fold the sum into at most 16 subsequences whose phase step is
//!   small, then Euler-Maclaurin per subsequence, with the oscillatory
//!   integral reduced to `int_w0^inf e^{iw} w^-s dw` (sine/cosine integrals
//!   plus an upward recurrence in `s`).

use crate::{Error, Result};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

/// Minimal complex arithmetic; avoids pulling a dependency for one module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cx {
    pub re: f64,
    pub im: f64,
}

pub(crate) const CX_ZERO: Cx = Cx { re: 0.0, im: 0.0 };

impl Cx {
    pub fn new(re: f64, im: f64) -> Self {
        Cx { re, im }
    }

    /// `e^{i t}`.
    pub fn cis(t: f64) -> Self {
        Cx {
            re: t.cos(),
            im: t.sin(),
        }
    }

    pub fn conj(self) -> Self {
        Cx {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn scale(self, a: f64) -> Self {
        Cx {
            re: self.re * a,
            im: self.im * a,
        }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Multiplication by `i^q` for any integer `q`.
    pub fn mul_i_pow(self, q: i64) -> Self {
        match q.rem_euclid(4) {
            0 => self,
            1 => Cx::new(-self.im, self.re),
            2 => Cx::new(-self.re, -self.im),
            _ => Cx::new(self.im, -self.re),
        }
    }

    pub fn div(self, other: Cx) -> Self {
        let d = other.re * other.re + other.im * other.im;
        Cx {
            re: (self.re * other.re + self.im * other.im) / d,
            im: (self.im * other.re - self.re * other.im) / d,
        }
    }
}

impl Add for Cx {
    type Output = Cx;
    fn add(self, o: Cx) -> Cx {
        Cx::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Cx {
    type Output = Cx;
    fn sub(self, o: Cx) -> Cx {
        Cx::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Cx {
    type Output = Cx;
    fn mul(self, o: Cx) -> Cx {
        Cx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Neg for Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        Cx::new(-self.re, -self.im)
    }
}

const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `zeta(s, a)` for integer `s >= 2` by Euler-Maclaurin.
pub(crate) fn hurwitz_zeta(s: u32, a: f64) -> f64 {
    debug_assert!(s >= 2 && a > 0.0);
    // advance until the EM expansion converges fast
    let mut head = 0.0;
    let mut a0 = a;
    while a0 < 48.0 {
        head += a0.powi(-(s as i32));
        a0 += 1.0;
    }
    let sf = s as f64;
    let mut tail = a0.powf(1.0 - sf) / (sf - 1.0) + 0.5 * a0.powf(-sf);
    // B_{2j}/(2j)! * (s)_{2j-1} * a0^{-s-2j+1}
    let mut rising = sf; // (s)_1
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * rising * a0.powf(-(sf + 2.0 * j as f64 + 1.0));
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let jj = 2.0 * (j + 1) as f64;
        rising *= (sf + jj - 1.0) * (sf + jj);
        fact *= (jj + 1.0) * (jj + 2.0);
    }
    head + tail
}

/// Sine and cosine integrals `Si(x)`, `Ci(x)` for `x > 0`.
fn si_ci(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= 6.0 {
        // Si(x)       = sum_{k>=0} (-1)^k x^{2k+1} / ((2k+1) (2k+1)!)
        // Ci(x) - ln x - gamma = sum_{k>=1} (-1)^k x^{2k} / (2k (2k)!)
        let mut si = 0.0;
        let mut ci_sum = 0.0;
        let mut pow = x; // (-1)^k x^{2k+1} / (2k+1)!
        let mut k = 0usize;
        loop {
            si += pow / (2.0 * k as f64 + 1.0);
            let k1 = (k + 1) as f64;
            let pc = -pow * x / (2.0 * k1); // (-1)^{k+1} x^{2k+2} / (2k+2)!
            ci_sum += pc / (2.0 * k1);
            pow = -pow * x * x / ((2.0 * k1) * (2.0 * k1 + 1.0));
            k += 1;
            if pow.abs() < 1e-19 && k > 4 {
                break;
            }
        }
        const EULER_GAMMA: f64 = 0.5772156649015328606;
        (si, EULER_GAMMA + x.ln() + ci_sum)
    } else {
        // continued fraction for E1(-ix) = -Ci(x) + i (pi/2 - Si(x)),
        // modified Lentz on E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
        let z = Cx::new(0.0, -x);
        let tiny = 1e-290;
        let mut b = z + Cx::new(1.0, 0.0);
        let mut c = Cx::new(1.0 / tiny, 0.0);
        let mut d = Cx::new(1.0, 0.0).div(b);
        let mut f = d;
        let mut k = 1.0f64;
        for _ in 0..200 {
            let a = -k * k;
            b = b + Cx::new(2.0, 0.0);
            d = Cx::new(a, 0.0) * d + b;
            if d.abs() < tiny {
                d = Cx::new(tiny, 0.0);
            }
            c = b + Cx::new(a, 0.0).div(c);
            if c.abs() < tiny {
                c = Cx::new(tiny, 0.0);
            }
            d = Cx::new(1.0, 0.0).div(d);
            let delta = c * d;
            f = f * delta;
            if (delta - Cx::new(1.0, 0.0)).abs() < 1e-16 {
                break;
            }
            k += 1.0;
        }
        let e1 = Cx::cis(x) * f; // e^{-z} = e^{ix}
        (PI / 2.0 - e1.im, -e1.re)
    }
}

/// `I_1(w0) = int_{w0}^inf e^{iw} / w dw = -Ci(w0) + i (pi/2 - Si(w0))`.
fn int_exp_over_w(w0: f64) -> Cx {
    let (si, ci) = si_ci(w0);
    Cx::new(-ci, PI / 2.0 - si)
}

/// Scaled oscillatory integrals `J_s = phi^{s-1} int_{w0}^inf e^{iw} w^{-s} dw`
/// for `s = 1..=s_max`, with `w0 = c * phi`, `phi > 0`. Upward recurrence
/// (stable: each step divides by `s`).
fn scaled_int_exp(s_max: u32, phi: f64, c: f64) -> Vec<Cx> {
    debug_assert!(phi > 0.0 && c > 0.0);
    let w0 = c * phi;
    let mut out = Vec::with_capacity(s_max as usize);
    let j1 = int_exp_over_w(w0);
    out.push(j1);
    let mut inv_c_pow = 1.0 / c; // (phi/w0)^s = c^{-s}
    let e = Cx::cis(w0);
    for s in 1..s_max {
        // J_{s+1} = (i e^{i w0} c^{-s} - phi J_s) / (i s)
        let prev = out[s as usize - 1];
        let num = e.mul_i_pow(1).scale(inv_c_pow) - prev.scale(phi);
        let next = num.div(Cx::new(0.0, s as f64));
        out.push(next);
        inv_c_pow /= c;
    }
    out
}

const PHI_MAX: f64 = 0.40;
const C_MIN: f64 = 64.0;

/// Rising factorial `(s)_n`.
fn rising(s: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, j| acc * (s + j as f64))
}

/// `sum_{q >= 0} e^{i q phi} (q + c)^{-s}` for `s >= 2`, `0 < phi <= PHI_MAX`,
/// `c >= C_MIN`, by Euler-Maclaurin with the closed-form oscillatory integral.
fn em_sum(s: u32, phi: f64, c: f64) -> Cx {
    debug_assert!(s >= 2);
    debug_assert!(phi > 0.0 && phi <= PHI_MAX, "phi = {phi}");
    debug_assert!(c >= C_MIN);
    let sf = s as f64;
    // integral: e^{-i c phi} phi^{s-1} I_s(c phi)
    let js = scaled_int_exp(s, phi, c);
    let mut total = Cx::cis(-c * phi) * js[s as usize - 1];
    // + g(0)/2
    total = total + Cx::new(0.5 * c.powf(-sf), 0.0);
    // - sum_j B_{2j}/(2j)! g^{(2j-1)}(0)
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI.iter().enumerate() {
        let r = (2 * (j + 1) - 1) as u32; // derivative order 2j-1
        let g_r = g_derivative_at_zero(sf, phi, c, r);
        let term = g_r.scale(-b / fact);
        total = total + term;
        if term.abs() <= 1e-19 * total.abs().max(c.powf(-sf)) {
            break;
        }
        let jj = 2.0 * (j + 1) as f64;
        fact *= (jj + 1.0) * (jj + 2.0);
    }
    total
}

/// `d^r/dq^r [ e^{i q phi} (q + c)^{-s} ]` at `q = 0`.
fn g_derivative_at_zero(s: f64, phi: f64, c: f64, r: u32) -> Cx {
    let mut sum = CX_ZERO;
    let mut binom = 1.0f64;
    for n in 0..=r {
        // binom(r, n) (i phi)^{r-n} (-1)^n (s)_n c^{-s-n}
        let coef = binom * rising(s, n) * c.powf(-s - n as f64) * phi.powi((r - n) as i32);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sum = sum + Cx::new(sign * coef, 0.0).mul_i_pow((r - n) as i64);
        binom *= (r - n) as f64 / (n as f64 + 1.0);
    }
    sum
}

/// `sum_{q >= 0} e^{i q phi} (q + c)^{-1}` for small positive phases:
/// direct Euler-Maclaurin on the kernel. The remainder carries a factor
/// `phi^{2J}` from the exponential's derivatives, so this is accurate
/// exactly where the Abel-step variant loses digits to its `1/(1 - z)`
/// prefactor.
fn em_sum_one_small_phase(phi: f64, c: f64) -> Cx {
    debug_assert!(phi > 0.0 && c >= C_MIN);
    let mut total = Cx::cis(-c * phi) * scaled_int_exp(1, phi, c)[0];
    total = total + Cx::new(0.5 / c, 0.0);
    let mut fact = 2.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let r = (2 * (j + 1) - 1) as u32;
        let term = g_derivative_at_zero(1.0, phi, c, r).scale(-b / fact);
        total = total + term;
        if term.abs() <= 1e-19 * total.abs().max(1.0 / c) {
            break;
        }
        let jj = 2.0 * (j + 1) as f64;
        fact *= (jj + 1.0) * (jj + 2.0);
    }
    total
}

/// `sum_{q >= 0} e^{i q phi} (q + c)^{-1}`: one exact Abel step down to a
/// `(q+c)^{-1}(q+c+1)^{-1}` series, then Euler-Maclaurin on that. Below a
/// small-phase threshold the Abel prefactor `1/(1 - z)` amplifies rounding,
/// and the direct form takes over.
fn em_sum_one(phi: f64, c: f64) -> Cx {
    debug_assert!(phi > 0.0 && phi <= PHI_MAX && c >= C_MIN);
    if phi < 0.02 {
        return em_sum_one_small_phase(phi, c);
    }
    let z = Cx::cis(phi);
    let one_minus_z = Cx::new(1.0 - z.re, -z.im);
    // P = sum z^q (q+c)^{-1} (q+c+1)^{-1}, via partial fractions
    // integral part
    let ja = Cx::cis(-c * phi) * scaled_int_exp(1, phi, c)[0];
    let jb = Cx::cis(-(c + 1.0) * phi) * scaled_int_exp(1, phi, c + 1.0)[0];
    let mut p = ja - jb;
    p = p + Cx::new(0.5 / (c * (c + 1.0)), 0.0);
    let mut fact = 2.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let r = (2 * (j + 1) - 1) as u32;
        let g_r = g_derivative_at_zero(1.0, phi, c, r) - g_derivative_at_zero(1.0, phi, c + 1.0, r);
        let term = g_r.scale(-b / fact);
        p = p + term;
        if term.abs() <= 1e-19 * p.abs().max(1.0 / (c * c)) {
            break;
        }
        let jj = 2.0 * (j + 1) as f64;
        fact *= (jj + 1.0) * (jj + 2.0);
    }
    // sum = c^{-1}/(1-z) - z/(1-z) * P
    Cx::new(1.0 / c, 0.0).div(one_minus_z) - z.div(one_minus_z) * p
}

/// Digamma for large arguments (`x >= 32`) by the asymptotic series.
fn digamma(x: f64) -> f64 {
    debug_assert!(x >= 32.0);
    let mut v = x.ln() - 0.5 / x;
    let x2 = 1.0 / (x * x);
    let mut p = x2;
    for (j, b) in BERNOULLI.iter().enumerate() {
        v -= b / (2.0 * (j + 1) as f64) * p;
        p *= x2;
    }
    v
}

/// Reduce `theta` to `(-pi, pi]`.
fn reduce_phase(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = theta % two_pi;
    if r > PI {
        r -= two_pi;
    } else if r <= -PI {
        r += two_pi;
    }
    r
}

/// `sum_{k >= k_start} e^{i (k + 1/2) theta} (k + 1/2)^{-s}` for integer
/// `s >= 1`, any real `theta`.
///
/// Errors only in the genuinely divergent case `s = 1` with resonant phase.
pub(crate) fn half_integer_tail(s: u32, theta: f64, k_start: usize) -> Result<Cx> {
    debug_assert!(s >= 1);
    // e^{i (k+1/2) theta} is invariant under theta -> theta - 2 pi n up to the
    // constant factor (-1)^n
    let two_pi = 2.0 * PI;
    let n_turns = (theta / two_pi).round();
    let theta_red = theta - two_pi * n_turns;
    let sign = if (n_turns as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };

    // march the start index up until the asymptotic machinery is comfortable
    let mut k0 = k_start;
    let mut head = CX_ZERO;
    let target_k = 2048usize;
    while k0 < target_k {
        let a = k0 as f64 + 0.5;
        head = head + Cx::cis(a * theta_red).scale(a.powf(-(s as f64)));
        k0 += 1;
    }

    let tail = if theta_red == 0.0 {
        if s == 1 {
            return Err(Error::Internal(
                "divergent resonant tail with s = 1".into(),
            ));
        }
        Cx::new(hurwitz_zeta(s, k0 as f64 + 0.5), 0.0)
    } else {
        // fold into m subsequences so the phase step is small
        let mut best_m = 1usize;
        let mut best_phi = reduce_phase(theta_red);
        for m in 2..=16usize {
            let phi = reduce_phase(m as f64 * theta_red);
            if phi.abs() < best_phi.abs() {
                best_phi = phi;
                best_m = m;
            }
            if best_phi.abs() <= PHI_MAX / 2.0 {
                break;
            }
        }
        debug_assert!(best_phi.abs() <= PHI_MAX, "phi = {best_phi}");
        let m = best_m;
        let mf = m as f64;
        if s == 1 && best_phi == 0.0 {
            // resonant subsequences of a conditionally convergent series:
            // regroup; the divergent parts cancel because the phases sum to
            // zero, leaving digamma differences:
            // sum = -(1/m) sum_r e^{i a_r theta} psi(a_r / m)
            let mut total = CX_ZERO;
            for r in 0..m {
                let a = (k0 + r) as f64 + 0.5;
                total = total + Cx::cis(a * theta_red).scale(-digamma(a / mf) / mf);
            }
            return Ok((head + total).scale(sign));
        }
        let mut total = CX_ZERO;
        for r in 0..m {
            let a = (k0 + r) as f64 + 0.5;
            let c = a / mf;
            let inner = if best_phi == 0.0 {
                Cx::new(hurwitz_zeta(s, c), 0.0)
            } else if best_phi > 0.0 {
                if s == 1 {
                    em_sum_one(best_phi, c)
                } else {
                    em_sum(s, best_phi, c)
                }
            } else if s == 1 {
                em_sum_one(-best_phi, c).conj()
            } else {
                em_sum(s, -best_phi, c).conj()
            };
            total = total + Cx::cis(a * theta_red).scale(mf.powi(-(s as i32))) * inner;
        }
        total
    };
    Ok((head + tail).scale(sign))
}

/// `sum_{k >= k_start} e^{i lambda_k x} / lambda_k^s` with
/// `lambda_k = pi (k + 1/2) / horizon`.
pub(crate) fn lambda_tail(s: u32, x: f64, horizon: f64, k_start: usize) -> Result<Cx> {
    let theta = PI * x / horizon;
    let scale = (horizon / PI).powi(s as i32);
    Ok(half_integer_tail(s, theta, k_start)?.scale(scale))
}
