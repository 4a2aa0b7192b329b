//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! and symmetric eigenvalue solvers (tridiagonal QL, Householder reduction).
//!
//! The systems in this crate stay small (a few hundred unknowns), so plain
//! dense kernels are the right tool.

use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Trailing submatrix dropping the first `k` rows and columns.
    pub fn trailing(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows - k, self.cols - k, |i, j| self[(i + k, j + k)])
    }

    pub fn scaled_add(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Symmetric part `(A + A^T)/2` of a square matrix.
    pub fn symmetric_part(&self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting.
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu> {
        if a.rows != a.cols {
            return Err(Error::invalid("LU requires a square matrix"));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            // pivot search
            let mut p = k;
            let mut pmax = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if !pmax.is_finite() {
                return Err(Error::SingularSystem("non-finite pivot".into()));
            }
            if pmax < 1e-300 {
                return Err(Error::SingularSystem(format!(
                    "pivot {pmax:.3e} below threshold at step {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / piv;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn det(&self) -> f64 {
        let mut d = self.sign;
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// 1-norm condition number via explicit inverse (fine at these sizes).
    pub fn cond_one(&self, a: &Matrix) -> f64 {
        let n = self.lu.rows;
        let mut inv_norm: f64 = 0.0;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let x = self.solve(&e);
            e[j] = 0.0;
            let s: f64 = x.iter().map(|v| v.abs()).sum();
            inv_norm = inv_norm.max(s);
        }
        a.norm_one() * inv_norm
    }
}

/// Solve `a x = b` by LU with partial pivoting, reporting the scaled residual
/// `||Ax - b||_inf / (||A||_inf ||x||_inf)`.
pub fn lu_solve_with_residual(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = Lu::factor(a)?;
    let x = lu.solve(b);
    let ax = a.matvec(&x);
    let rnorm = ax
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = a.norm_inf() * xnorm;
    let res = if denom > 0.0 { rnorm / denom } else { rnorm };
    Ok((x, res))
}

/// Eigenvalues of a symmetric tridiagonal matrix together with the first
/// component of each normalized eigenvector (all that Golub-Welsch needs).
///
/// Implicit-shift QL on the tridiagonal, rotations applied to a single row.
pub fn symtri_eigen_first(diag: &[f64], offdiag: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = diag.len();
    assert_eq!(offdiag.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    // e[i] couples i and i+1; last slot is scratch.
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    // first row of the accumulated orthogonal transform
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a negligible off-diagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Internal(
                    "tridiagonal QL failed to converge in 50 sweeps".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // rotate the tracked row
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Eigenvalues of a dense symmetric matrix: Householder tridiagonalization
/// followed by QL. Only the spectrum is returned.
pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let mut m = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // Householder reduction (tred2 without eigenvector accumulation)
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| m[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = m[(i, l)];
            } else {
                for k in 0..=l {
                    m[(i, k)] /= scale;
                    h += m[(i, k)] * m[(i, k)];
                }
                let mut f = m[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                m[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += m[(j, k)] * m[(i, k)];
                    }
                    for k in j + 1..=l {
                        g += m[(k, j)] * m[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * m[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = m[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        m[(j, k)] -= f * e[k] + g * m[(i, k)];
                    }
                }
            }
        } else {
            e[i] = m[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        d[i] = m[(i, i)];
    }

    let off: Vec<f64> = e[1..].to_vec();
    let pairs = symtri_eigen_first(&d, &off)?;
    Ok(pairs.into_iter().map(|(v, _)| v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_rng::Rng;

    #[test]
    fn lu_identity_returns_rhs() {
        let a = Matrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let (x, res) = lu_solve_with_residual(&a, &b).unwrap();
        assert_eq!(x, b);
        assert!(res <= 1e-15);
    }

    #[test]
    fn lu_diagonal_two_by_two() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 4.0;
        let (x, _) = lu_solve_with_residual(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lu_random_system_residual() {
        let mut rng = Rng::new(42);
        let n = 50;
        // diagonally dominant, so comfortably well conditioned
        let a = Matrix::from_fn(n, n, |i, j| {
            let v = rng.uniform(-1.0, 1.0);
            if i == j {
                v + 2.0 * n as f64
            } else {
                v
            }
        });
        let b: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (_, res) = lu_solve_with_residual(&a, &b).unwrap();
        assert!(res <= 1e-12, "residual {res:e}");
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::zeros(3, 3);
        assert!(matches!(Lu::factor(&a), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn tridiagonal_eigen_known_spectrum() {
        // second difference matrix: eigenvalues 2 - 2 cos(k pi / (n+1))
        let n = 12;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let pairs = symtri_eigen_first(&d, &e).unwrap();
        for (k, (lam, _)) in pairs.iter().enumerate() {
            let expect = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n as f64 + 1.0)).cos();
            assert!((lam - expect).abs() < 1e-13, "k={k}: {lam} vs {expect}");
        }
        // eigenvector first components squared sum to 1
        let s: f64 = pairs.iter().map(|(_, z)| z * z).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_symmetric_eigenvalues_match_tridiagonal_route() {
        let mut rng = Rng::new(7);
        let n = 9;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.uniform(-1.0, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = sym_eigenvalues(&a).unwrap();
        // eigenvalue sum equals the trace, product equals the determinant
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum: f64 = eig.iter().sum();
        assert!((trace - sum).abs() < 1e-12);
        let det = Lu::factor(&a).unwrap().det();
        let prod: f64 = eig.iter().product();
        assert!((det - prod).abs() < 1e-10 * det.abs().max(1.0));
    }
}
