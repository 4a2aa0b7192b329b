//! Lobatto (integrated Legendre) shape functions on the reference interval
//! `[0, 1]`.
//!
//! With `L_n` the n-th shifted Legendre polynomial on `[0, 1]`, the modes of
//! degree `p` are
//!
//! ```text
//! psi_1(x) = 1 - x,   psi_2(x) = x,
//! psi_m(x) = integral of L_{m-2} from 0 to x   for 3 <= m <= p + 1,
//! ```
//!
//! so all modes `m >= 3` vanish at both endpoints and their first derivative
//! is a Legendre polynomial. Mode indices are one-based to match the usual
//! hierarchic-basis convention.

use crate::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 32;

fn check_args(p: usize, m: usize) -> Result<()> {
    if p == 0 || p > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "degree p = {p} out of supported range 1..={MAX_DEGREE}"
        )));
    }
    if m == 0 || m > p + 1 {
        return Err(Error::invalid(format!(
            "mode index m = {m} out of range 1..={}",
            p + 1
        )));
    }
    Ok(())
}

/// Shifted Legendre values `L_0(x) .. L_nmax(x)` on `[0, 1]`.
pub(crate) fn legendre_values(nmax: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    let y = 2.0 * x - 1.0;
    out.push(1.0);
    if nmax == 0 {
        return;
    }
    out.push(y);
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Shifted Legendre values and x-derivatives up to order `nmax`.
pub(crate) fn legendre_values_derivs(
    nmax: usize,
    x: f64,
    vals: &mut Vec<f64>,
    derivs: &mut Vec<f64>,
) {
    legendre_values(nmax, x, vals);
    derivs.clear();
    derivs.push(0.0);
    if nmax == 0 {
        return;
    }
    derivs.push(2.0);
    // dP_{k+1}/dy = dP_{k-1}/dy + (2k+1) P_k; factor 2 converts d/dy to d/dx
    for k in 1..nmax {
        let dp = derivs[k - 1] + 2.0 * (2.0 * k as f64 + 1.0) * vals[k];
        derivs.push(dp);
    }
}

/// Value of `psi_m` for degree `p` at `x` in `[0, 1]`.
pub fn eval_psi(p: usize, m: usize, x: f64) -> Result<f64> {
    check_args(p, m)?;
    let mut vals = Vec::new();
    psi_all(p, x, &mut vals);
    Ok(vals[m - 1])
}

/// First derivative of `psi_m` with respect to the reference coordinate.
pub fn eval_dpsi(p: usize, m: usize, x: f64) -> Result<f64> {
    check_args(p, m)?;
    let mut vals = Vec::new();
    dpsi_all(p, x, &mut vals);
    Ok(vals[m - 1])
}

/// Second reference derivative of `psi_m`; identically zero for `m <= 2`.
pub fn eval_d2psi(p: usize, m: usize, x: f64) -> Result<f64> {
    check_args(p, m)?;
    let mut vals = Vec::new();
    d2psi_all(p, x, &mut vals);
    Ok(vals[m - 1])
}

/// All `p + 1` shape values at `x`; `out[m-1]` is `psi_m(x)`.
pub fn psi_all(p: usize, x: f64, out: &mut Vec<f64>) {
    debug_assert!(p >= 1 && p <= MAX_DEGREE);
    let mut leg = Vec::with_capacity(p + 1);
    legendre_values(p, x, &mut leg);
    out.clear();
    out.push(1.0 - x);
    out.push(x);
    // psi_m = (L_{n+1} - L_{n-1}) / (2 (2n+1)) with n = m - 2
    for m in 3..=p + 1 {
        let n = m - 2;
        out.push((leg[n + 1] - leg[n - 1]) / (2.0 * (2.0 * n as f64 + 1.0)));
    }
}

/// All first derivatives at `x`; `out[m-1]` is `psi_m'(x)`.
pub fn dpsi_all(p: usize, x: f64, out: &mut Vec<f64>) {
    debug_assert!(p >= 1 && p <= MAX_DEGREE);
    let mut leg = Vec::with_capacity(p);
    legendre_values(p.saturating_sub(1), x, &mut leg);
    out.clear();
    out.push(-1.0);
    out.push(1.0);
    for m in 3..=p + 1 {
        out.push(leg[m - 2]);
    }
}

/// All second derivatives at `x`; `out[m-1]` is `psi_m''(x)`.
pub fn d2psi_all(p: usize, x: f64, out: &mut Vec<f64>) {
    debug_assert!(p >= 1 && p <= MAX_DEGREE);
    let mut vals = Vec::new();
    let mut ders = Vec::new();
    legendre_values_derivs(p.saturating_sub(1), x, &mut vals, &mut ders);
    out.clear();
    out.push(0.0);
    out.push(0.0);
    for m in 3..=p + 1 {
        out.push(ders[m - 2]);
    }
}

/// `r`-th reference derivative of `psi_m` at an endpoint (`end` is 0 or 1),
/// from the closed form for endpoint derivatives of Legendre polynomials.
pub fn psi_endpoint_derivative(m: usize, r: usize, end: u8) -> f64 {
    debug_assert!(end <= 1);
    match (m, r) {
        (1, 0) => {
            if end == 0 {
                1.0
            } else {
                0.0
            }
        }
        (2, 0) => {
            if end == 0 {
                0.0
            } else {
                1.0
            }
        }
        (1, 1) => -1.0,
        (2, 1) => 1.0,
        (1, _) | (2, _) => 0.0,
        (_, 0) => 0.0, // bubbles vanish at both endpoints
        _ => legendre_endpoint_derivative(m - 2, r - 1, end),
    }
}

/// `q`-th x-derivative of the shifted Legendre polynomial `L_n` at `x = end`:
/// `L_n^(q)(1) = (n+q)! / (q! (n-q)!)` and `L_n^(q)(0) = (-1)^{n+q}` times it.
pub(crate) fn legendre_endpoint_derivative(n: usize, q: usize, end: u8) -> f64 {
    if q > n {
        return 0.0;
    }
    let mut c = 1.0f64;
    for j in 0..q {
        c *= (n + j + 1) as f64 * (n - j) as f64 / (j + 1) as f64;
    }
    if end == 0 && (n + q) % 2 == 1 {
        -c
    } else {
        c
    }
}

/// Expansion of `psi_m` in shifted Legendre polynomials as `(degree, coeff)`
/// pairs. Every mode is a two-term combination, which keeps downstream
/// oscillatory integrals free of large cancelling coefficients.
pub(crate) fn psi_legendre_expansion(m: usize) -> Vec<(usize, f64)> {
    match m {
        1 => vec![(0, 0.5), (1, -0.5)],
        2 => vec![(0, 0.5), (1, 0.5)],
        _ => {
            let n = m - 2;
            let c = 1.0 / (2.0 * (2.0 * n as f64 + 1.0));
            vec![(n - 1, -c), (n + 1, c)]
        }
    }
}

/// Legendre expansion of `psi_m'`.
pub(crate) fn dpsi_legendre_expansion(m: usize) -> Vec<(usize, f64)> {
    match m {
        1 => vec![(0, -1.0)],
        2 => vec![(0, 1.0)],
        _ => vec![(m - 2, 1.0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_values() {
        assert_eq!(eval_psi(2, 1, 0.0).unwrap(), 1.0);
        assert!((eval_psi(2, 3, 0.5).unwrap() - (-0.25)).abs() < 1e-15);
        assert_eq!(eval_psi(5, 4, 0.0).unwrap(), 0.0);
        assert_eq!(eval_psi(5, 4, 1.0).unwrap(), 0.0);

        assert_eq!(eval_dpsi(2, 2, 0.3).unwrap(), 1.0);
        assert!((eval_dpsi(2, 3, 0.5).unwrap()).abs() < 1e-15);
        assert!((eval_dpsi(3, 4, 1.0).unwrap() - 1.0).abs() < 1e-15);

        assert_eq!(eval_d2psi(1, 2, 0.3).unwrap(), 0.0);
        assert!((eval_d2psi(2, 3, 0.7).unwrap() - 2.0).abs() < 1e-13);
        assert!((eval_d2psi(3, 4, 0.5).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_mode_and_degree() {
        assert!(eval_psi(2, 0, 0.5).is_err());
        assert!(eval_psi(2, 4, 0.5).is_err());
        assert!(eval_psi(0, 1, 0.5).is_err());
        assert!(eval_psi(MAX_DEGREE + 1, 1, 0.5).is_err());
    }

    #[test]
    fn partition_of_unity() {
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            let s = eval_psi(4, 1, x).unwrap() + eval_psi(4, 2, x).unwrap();
            assert!((s - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for p in 1..=10usize {
            for m in 1..=p + 1 {
                for i in 1..10 {
                    let x = i as f64 / 10.0;
                    let d_fd = (eval_psi(p, m, x + h).unwrap() - eval_psi(p, m, x - h).unwrap())
                        / (2.0 * h);
                    let d = eval_dpsi(p, m, x).unwrap();
                    assert!((d - d_fd).abs() < 1e-7, "p={p} m={m} x={x}: {d} vs {d_fd}");
                    let dd_fd = (eval_dpsi(p, m, x + h).unwrap()
                        - eval_dpsi(p, m, x - h).unwrap())
                        / (2.0 * h);
                    let dd = eval_d2psi(p, m, x).unwrap();
                    assert!(
                        (dd - dd_fd).abs() < 1e-6 * dd.abs().max(1.0),
                        "p={p} m={m} x={x}: {dd} vs {dd_fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn endpoint_derivative_closed_form_matches_finite_differences() {
        // compare against one-sided differences of the recurrence evaluation
        for m in 1..=8usize {
            for r in 0..=3usize {
                for end in [0u8, 1u8] {
                    let closed = psi_endpoint_derivative(m, r, end);
                    // numerical r-th derivative via central differences on a
                    // fine interior stencil extrapolated to the endpoint
                    let x0 = if end == 0 { 1e-3 } else { 1.0 - 1e-3 };
                    let h = 1e-3;
                    let p = 8;
                    let f = |x: f64| eval_psi(p, m, x).unwrap();
                    let num = match r {
                        0 => f(x0),
                        1 => (f(x0 + h) - f(x0 - h)) / (2.0 * h),
                        2 => (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h),
                        _ => {
                            (f(x0 + 2.0 * h) - 2.0 * f(x0 + h) + 2.0 * f(x0 - h)
                                - f(x0 - 2.0 * h))
                                / (2.0 * h * h * h)
                        }
                    };
                    // endpoint offset allows a loose comparison only
                    let scale = closed.abs().max(1.0);
                    assert!(
                        (closed - num).abs() < 0.15 * scale + 1e-6,
                        "m={m} r={r} end={end}: closed {closed} vs numeric {num}"
                    );
                }
            }
        }
    }

    #[test]
    fn bubble_derivatives_inherit_legendre_orthogonality() {
        // int_0^1 psi_m' psi_n' = 0 for distinct bubble modes
        let p = 10usize;
        let rule = crate::quadrature::gauss_legendre(24).unwrap();
        let mut dvals = Vec::new();
        let mut gram = vec![vec![0.0; p + 2]; p + 2];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            dpsi_all(p, x, &mut dvals);
            for m in 3..=p + 1 {
                for n in 3..=p + 1 {
                    gram[m][n] += w * dvals[m - 1] * dvals[n - 1];
                }
            }
        }
        for m in 3..=p + 1 {
            for n in 3..=p + 1 {
                if m != n {
                    assert!(
                        gram[m][n].abs() <= 1e-13,
                        "modes {m}, {n}: {:.2e}",
                        gram[m][n]
                    );
                } else {
                    // diagonal carries the Legendre normalization 1/(2k+1)
                    let k = (m - 2) as f64;
                    let expect = 1.0 / (2.0 * k + 1.0);
                    assert!((gram[m][m] - expect).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn legendre_expansions_reproduce_values() {
        let mut leg = Vec::new();
        for m in 1..=9usize {
            let p = 8;
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                legendre_values(10, x, &mut leg);
                let from_exp: f64 = psi_legendre_expansion(m)
                    .iter()
                    .map(|&(n, c)| c * leg[n])
                    .sum();
                assert!((from_exp - eval_psi(p, m, x).unwrap()).abs() < 1e-14);
                let from_exp: f64 = dpsi_legendre_expansion(m)
                    .iter()
                    .map(|&(n, c)| c * leg[n])
                    .sum();
                assert!((from_exp - eval_dpsi(p, m, x).unwrap()).abs() < 1e-13);
            }
        }
    }
}
