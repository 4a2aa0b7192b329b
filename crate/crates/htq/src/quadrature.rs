//! Gauss quadrature on `[0, 1]` for the unit weight and for the logarithmic
//! weight `-ln t`, plus the tensor-product forms used by the assembly
//! schemes.
//!
//! The log-weight rule integrates `-int_0^1 g(t) ln t dt` exactly for
//! polynomials of degree `2K - 1`. Its recurrence coefficients come from the
//! modified Chebyshev algorithm fed with the analytically known modified
//! moments of `-ln t` against shifted Legendre polynomials; Golub-Welsch
//! (symmetric tridiagonal eigendecomposition) then yields nodes and weights.

use crate::linalg::symtri_eigen_first;
use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Weight function of a [`GaussRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// Unit weight on `[0, 1]`.
    Legendre,
    /// Weight `-ln t` on `[0, 1]`.
    LogJacobi,
}

/// Quadrature nodes and weights on `[0, 1]`, ascending nodes.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub weight_kind: WeightKind,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Apply the rule to `f`.
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for i in 1..self.order {
            if !(self.nodes[i] > self.nodes[i - 1]) {
                return Err(Error::Internal(format!(
                    "{:?} rule K={}: nodes not strictly ascending",
                    self.weight_kind, self.order
                )));
            }
        }
        if self
            .nodes
            .iter()
            .any(|&x| !(x > 0.0 && x < 1.0) && self.weight_kind == WeightKind::LogJacobi)
        {
            return Err(Error::Internal("log rule node outside (0,1)".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Internal(format!(
                "{:?} rule K={}: nonpositive weight",
                self.weight_kind, self.order
            )));
        }
        Ok(())
    }
}

pub const MAX_ORDER: usize = 64;

type Cache = Mutex<HashMap<(WeightKind, usize), Arc<GaussRule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Legendre rule of order `K` on `[0, 1]`; exact for polynomials of
/// degree `2K - 1`. Rules are cached.
pub fn gauss_legendre(k: usize) -> Result<Arc<GaussRule>> {
    if k == 0 || k > MAX_ORDER {
        return Err(Error::invalid(format!(
            "Gauss-Legendre order {k} out of range 1..={MAX_ORDER}"
        )));
    }
    let mut guard = cache().lock().unwrap();
    if let Some(rule) = guard.get(&(WeightKind::Legendre, k)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_gauss_legendre(k)?);
    guard.insert((WeightKind::Legendre, k), rule.clone());
    Ok(rule)
}

/// Log-weight Gauss-Jacobi rule of order `K` on `[0, 1]`:
/// `-int_0^1 g(t) ln t dt = sum_v w_v g(x_v)` exactly for `g` of degree
/// `2K - 1`. Rules are cached.
pub fn gauss_log(k: usize) -> Result<Arc<GaussRule>> {
    if k == 0 || k > MAX_ORDER {
        return Err(Error::invalid(format!(
            "log-weight rule order {k} out of range 1..={MAX_ORDER}"
        )));
    }
    let mut guard = cache().lock().unwrap();
    if let Some(rule) = guard.get(&(WeightKind::LogJacobi, k)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build_gauss_log(k)?);
    guard.insert((WeightKind::LogJacobi, k), rule.clone());
    Ok(rule)
}

/// Legendre value and derivative at `y` in `[-1, 1]` from the three-term
/// recurrence.
fn legendre_pair(n: usize, y: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = y;
    let mut d0 = 0.0;
    let mut d1 = 1.0;
    if n == 0 {
        return (p0, d0);
    }
    for kk in 1..n {
        let kf = kk as f64;
        let p2 = ((2.0 * kf + 1.0) * y * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

fn build_gauss_legendre(k: usize) -> Result<GaussRule> {
    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for i in 1..=k {
        // Chebyshev-angle initial guess, then Newton on P_k
        let mut y = (std::f64::consts::PI * (i as f64 - 0.25) / (k as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_pair(k, y);
            let dy = p / dp;
            y -= dy;
            if dy.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Internal(format!(
                "Newton iteration for Gauss-Legendre node {i} of K={k} did not converge"
            )));
        }
        let (_, dp) = legendre_pair(k, y);
        let w = 2.0 / ((1.0 - y * y) * dp * dp);
        nodes.push(0.5 * (1.0 + y));
        weights.push(0.5 * w);
    }
    nodes.reverse();
    weights.reverse();
    let rule = GaussRule {
        weight_kind: WeightKind::Legendre,
        order: k,
        nodes,
        weights,
    };
    rule.validate()?;
    Ok(rule)
}

/// Modified moments of `-ln t` against monic shifted Legendre polynomials.
///
/// Against the standard normalization (`L_k(1) = 1`) they are `m_0 = 1` and
/// `m_k = (-1)^k / (k (k+1))` for `k >= 1` (one integration by parts against
/// the Lobatto antiderivative); dividing by the leading coefficient
/// `binom(2k, k)` makes them monic.
fn log_modified_moments(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut lead = 1.0f64; // binom(2k, k)
    for k in 0..count {
        if k == 0 {
            out.push(1.0);
        } else {
            lead *= 2.0 * (2.0 * k as f64 - 1.0) / k as f64;
            let kf = k as f64;
            let mk = if k % 2 == 0 { 1.0 } else { -1.0 } / (kf * (kf + 1.0));
            out.push(mk / lead);
        }
    }
    out
}

fn build_gauss_log(k: usize) -> Result<GaussRule> {
    let n = k;
    // monic shifted Legendre recurrence coefficients
    let a = vec![0.5f64; 2 * n];
    let mut b = vec![0.0f64; 2 * n];
    for (l, bl) in b.iter_mut().enumerate().skip(1) {
        let lf = l as f64;
        *bl = lf * lf / (4.0 * (4.0 * lf * lf - 1.0));
    }
    let moments = log_modified_moments(2 * n);

    // modified Chebyshev algorithm
    let mut alpha = vec![0.0f64; n];
    let mut beta = vec![0.0f64; n];
    alpha[0] = a[0] + moments[1] / moments[0];
    beta[0] = moments[0];
    let mut sigma_prev = vec![0.0f64; 2 * n]; // sigma_{k-2, l}
    let mut sigma = moments.clone(); // sigma_{k-1, l}
    for kk in 1..n {
        let mut sigma_new = vec![0.0f64; 2 * n];
        for l in kk..=(2 * n - kk - 1) {
            sigma_new[l] = sigma[l + 1] - (alpha[kk - 1] - a[l]) * sigma[l]
                - beta[kk - 1] * sigma_prev[l]
                + b[l] * sigma[l - 1];
        }
        alpha[kk] = a[kk] + sigma_new[kk + 1] / sigma_new[kk] - sigma[kk] / sigma[kk - 1];
        beta[kk] = sigma_new[kk] / sigma[kk - 1];
        sigma_prev = sigma;
        sigma = sigma_new;
    }

    // Golub-Welsch on the Jacobi matrix
    let offdiag: Vec<f64> = beta[1..]
        .iter()
        .map(|&bb| {
            if bb > 0.0 {
                Ok(bb.sqrt())
            } else {
                Err(Error::Internal(format!(
                    "modified Chebyshev produced nonpositive beta {bb:.3e} for K={k}"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let pairs = symtri_eigen_first(&alpha, &offdiag)?;
    let nodes: Vec<f64> = pairs.iter().map(|&(x, _)| x).collect();
    let weights: Vec<f64> = pairs.iter().map(|&(_, z)| beta[0] * z * z).collect();
    let rule = GaussRule {
        weight_kind: WeightKind::LogJacobi,
        order: k,
        nodes,
        weights,
    };
    rule.validate()?;
    Ok(rule)
}

/// Tensor product of two Gauss-Legendre rules applied to `g(x1, x2)` on the
/// unit square.
pub fn tensor_apply(rule_a: &GaussRule, rule_b: &GaussRule, mut g: impl FnMut(f64, f64) -> f64) -> f64 {
    debug_assert_eq!(rule_a.weight_kind, WeightKind::Legendre);
    debug_assert_eq!(rule_b.weight_kind, WeightKind::Legendre);
    let mut sum = 0.0;
    for (&x1, &w1) in rule_a.nodes.iter().zip(&rule_a.weights) {
        let mut inner = 0.0;
        for (&x2, &w2) in rule_b.nodes.iter().zip(&rule_b.weights) {
            inner += w2 * g(x1, x2);
        }
        sum += w1 * inner;
    }
    sum
}

/// Quadrature for `int_0^1 int_0^1 g(s, t) ln|s - t| ds dt` combining the
/// order-`K` Gauss-Legendre and log-weight rules; exact for bivariate
/// polynomials of total degree `2K - 2`.
pub fn logtensor_apply(k: usize, mut g: impl FnMut(f64, f64) -> f64) -> Result<f64> {
    let gl = gauss_legendre(k)?;
    let lg = gauss_log(k)?;
    let mut sum = 0.0;
    for (&xh, &wh) in lg.nodes.iter().zip(&lg.weights) {
        let mut inner = 0.0;
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let u = (1.0 - x) * xh;
            inner += w * (g(u, xh) + g(1.0 - u, 1.0 - xh));
        }
        sum -= wh * xh * inner;
    }
    for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
        let mut inner = 0.0;
        for (&xh, &wh) in lg.nodes.iter().zip(&lg.weights) {
            let u = (1.0 - xh) * x;
            inner += wh * (g(u, x) + g(1.0 - u, 1.0 - x));
        }
        sum -= w * x * inner;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_midpoint_and_two_point() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.5]);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);

        let r = gauss_legendre(2).unwrap();
        let s3 = 1.0 / 3.0f64.sqrt();
        assert!((r.nodes[0] - 0.5 * (1.0 - s3)).abs() < 1e-15);
        assert!((r.nodes[1] - 0.5 * (1.0 + s3)).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[1] - 0.5).abs() < 1e-15);
        // cubic exactness
        let v = r.apply(|t| t * t * t);
        assert!((v - 0.25).abs() < 1e-16);
    }

    #[test]
    fn legendre_monomial_exactness_and_symmetry() {
        for k in 1..=30usize {
            let r = gauss_legendre(k).unwrap();
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for i in 0..k {
                let sym = r.nodes[i] + r.nodes[k - 1 - i];
                assert!((sym - 1.0).abs() < 1e-14, "K={k} node symmetry");
            }
            for d in 0..=(2 * k - 1).min(40) {
                let v = r.apply(|t| t.powi(d as i32));
                let exact = 1.0 / (d as f64 + 1.0);
                assert!(
                    (v - exact).abs() <= 1e-14 * exact.abs().max(1.0),
                    "K={k} d={d}: {v} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn log_rule_one_point() {
        let r = gauss_log(1).unwrap();
        assert!((r.nodes[0] - 0.25).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_rule_monomials() {
        for k in 1..=30usize {
            let r = gauss_log(k).unwrap();
            let wsum: f64 = r.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 2e-13, "K={k}: weight sum {wsum}");
            for d in 0..=(2 * k - 1) {
                let v = r.apply(|t| t.powi(d as i32));
                let exact = 1.0 / ((d as f64 + 1.0) * (d as f64 + 1.0));
                assert!(
                    (v - exact).abs() <= 1e-13,
                    "K={k} d={d}: {v} vs {exact}, err {:.2e}",
                    (v - exact).abs()
                );
            }
        }
    }

    #[test]
    fn log_rule_rejects_out_of_range() {
        assert!(gauss_log(0).is_err());
        assert!(gauss_log(MAX_ORDER + 1).is_err());
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn tensor_small_cases() {
        let r1 = gauss_legendre(1).unwrap();
        let v = tensor_apply(&r1, &r1, |s, t| s * t);
        assert!((v - 0.25).abs() < 1e-15);
        let r2 = gauss_legendre(2).unwrap();
        let v = tensor_apply(&r2, &r2, |s, t| s * s * t * t);
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
        let v = tensor_apply(&r2, &r2, |_, _| 1.0);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn logtensor_constant_and_linear() {
        // int int ln|s-t| = -3/2
        let v = logtensor_apply(1, |_, _| 1.0).unwrap();
        assert!((v + 1.5).abs() < 1e-14, "{v}");
        for k in 2..=8 {
            let v = logtensor_apply(k, |_, _| 1.0).unwrap();
            assert!((v + 1.5).abs() < 1e-13, "K={k}: {v}");
            // by s -> 1-s symmetry the linear case halves the constant one
            let v = logtensor_apply(k, |s, _| s).unwrap();
            assert!((v + 0.75).abs() < 1e-13, "K={k}: {v}");
        }
    }

    /// Exact value of `int int s^a t^b ln|s-t| ds dt` by splitting at the
    /// diagonal and reducing each triangle to beta-type integrals:
    /// with `H_n` the harmonic numbers,
    /// `I = -(1/(a+1) + 1/(b+1))/(a+b+2)^2
    ///      - (H_{a+1}/(a+1) + H_{b+1}/(b+1))/(a+b+2)`.
    pub(crate) fn logtensor_monomial_exact(a: u32, b: u32) -> f64 {
        let harmonic = |n: u32| (1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
        let (af, bf) = (a as f64, b as f64);
        let d = af + bf + 2.0;
        -(1.0 / (af + 1.0) + 1.0 / (bf + 1.0)) / (d * d)
            - (harmonic(a + 1) / (af + 1.0) + harmonic(b + 1) / (bf + 1.0)) / d
    }

    #[test]
    fn logtensor_matches_exact_monomial_values() {
        assert!((logtensor_monomial_exact(0, 0) + 1.5).abs() < 1e-15);
        assert!((logtensor_monomial_exact(1, 0) + 0.75).abs() < 1e-15);
        for k in [2usize, 5, 9, 12] {
            for a in 0..=(2 * k as u32 - 2) {
                for b in 0..=(2 * k as u32 - 2 - a) {
                    let v = logtensor_apply(k, |s, t| s.powi(a as i32) * t.powi(b as i32)).unwrap();
                    let r = logtensor_monomial_exact(a, b);
                    assert!(
                        (v - r).abs() <= 5e-13,
                        "K={k} a={a} b={b}: {v} vs {r}, err {:.2e}",
                        (v - r).abs()
                    );
                }
            }
        }
    }
}
