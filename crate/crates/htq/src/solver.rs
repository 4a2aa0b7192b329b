//! Discrete systems for the model ODEs and the h/hp refinement studies.
//!
//! The parabolic problem `u' + mu u = f, u(0) = 0` discretizes to
//! `(A~ + mu M~) x = F`, the hyperbolic problem `u'' + mu u = f,
//! u(0) = u'(0) = 0` to `(B~^T + mu M~) x = F`, where the tildes are the
//! zero-trace submatrices and `F[i] = (f, H_T phi_{i+1})`. The right-hand
//! side is realized by an L2 projection of `f` onto the trial space
//! followed by one multiplication with the full `M` matrix, which is
//! exact whenever `f` lies in the trial space and well defined for any
//! square-integrable `f`.

use crate::assembly::{GlobalMatrix, MatrixKind};
use crate::linalg::{lu_solve_with_residual, Matrix};
use crate::mesh::{DegreeVector, DofMap, TemporalMesh};
use crate::quadrature::{gauss_legendre, GaussRule};
use crate::shapefn;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Model equation class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeKind {
    Parabolic,
    Hyperbolic,
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Model problem `u' + mu u = f` or `u'' + mu u = f` with optional exact
/// solution handles for error measurement.
#[derive(Clone)]
pub struct OdeProblem {
    pub kind: OdeKind,
    pub mu: f64,
    pub f: ScalarFn,
    pub u_exact: Option<ScalarFn>,
    pub du_exact: Option<ScalarFn>,
}

impl OdeProblem {
    pub fn new(kind: OdeKind, mu: f64, f: ScalarFn) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::invalid("mu must be nonnegative"));
        }
        Ok(OdeProblem {
            kind,
            mu,
            f,
            u_exact: None,
            du_exact: None,
        })
    }

    pub fn with_exact(mut self, u: ScalarFn, du: ScalarFn) -> Self {
        self.u_exact = Some(u);
        self.du_exact = Some(du);
        self
    }
}

/// Zero-trace system matrix for the problem: `A~ + mu M~` (parabolic) or
/// `B~^T + mu M~` (hyperbolic).
pub fn build_system(
    problem: &OdeProblem,
    m_mat: &GlobalMatrix,
    a_mat: Option<&GlobalMatrix>,
    b_mat: Option<&GlobalMatrix>,
) -> Result<Matrix> {
    if m_mat.kind != MatrixKind::M {
        return Err(Error::invalid("first matrix must be of kind M"));
    }
    let m_tilde = m_mat.tilde();
    let mut sys = match problem.kind {
        OdeKind::Parabolic => {
            let a = a_mat.ok_or_else(|| Error::invalid("parabolic system needs A"))?;
            if a.kind != MatrixKind::A {
                return Err(Error::invalid("expected a matrix of kind A"));
            }
            a.tilde()
        }
        OdeKind::Hyperbolic => {
            let b = b_mat.ok_or_else(|| Error::invalid("hyperbolic system needs B"))?;
            if b.kind != MatrixKind::B {
                return Err(Error::invalid("expected a matrix of kind B"));
            }
            b.tilde().transpose()
        }
    };
    if sys.rows() != m_tilde.rows() {
        return Err(Error::invalid("matrix dimensions do not match"));
    }
    if problem.mu != 0.0 {
        sys.scaled_add(problem.mu, &m_tilde);
    }
    Ok(sys)
}

/// Graded panels of the reference interval: geometric refinement of ratio
/// 1/4 over 12 levels towards 0, so weakly singular behaviour at the left
/// end integrates cleanly. This is a measurement device, not part of the
/// discretization.
fn graded_panels() -> Vec<(f64, f64)> {
    let mut edges = vec![1.0];
    let mut w = 1.0;
    for _ in 0..12 {
        w *= 0.25;
        edges.push(w);
    }
    edges.push(0.0);
    edges.reverse();
    edges.windows(2).map(|e| (e[0], e[1])).collect()
}

/// L2 projection of `f` onto the trial space (mass-matrix solve), returned
/// as coefficients over the full basis. Exact for `f` in the space and well
/// defined for any square-integrable `f`; the global projection keeps the
/// residual orthogonal to every basis function, which the right-hand-side
/// functional inherits almost entirely.
pub fn project_rhs(
    f: &ScalarFn,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    dof: &DofMap,
) -> Result<Vec<f64>> {
    let n = mesh.n_elements();
    let m_dofs = dof.n_global();
    let mut gram = Matrix::zeros(m_dofs, m_dofs);
    let mut moments = vec![0.0; m_dofs];
    let mut vals = Vec::new();
    for l in 0..n {
        let p = deg.degree(l);
        let rule = gauss_legendre((p + 4).min(crate::quadrature::MAX_ORDER))?;
        let (a, b) = mesh.element(l);
        let h = b - a;
        // graded towards t = 0 on the first element; harmless (still exact
        // for polynomials) elsewhere in its effect, so only applied where
        // singular data can live
        let panels = if l == 0 {
            graded_panels()
        } else {
            vec![(0.0, 1.0)]
        };
        for (lo, hi) in panels {
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let xi = lo + (hi - lo) * x;
                let t = a + h * xi;
                shapefn::psi_all(p, xi, &mut vals);
                let scale = w * (hi - lo) * h;
                let fv = scale * f(t);
                for mi in 0..=p {
                    let gi = dof.global(mi, l);
                    moments[gi] += fv * vals[mi];
                    for mj in 0..=p {
                        gram[(gi, dof.global(mj, l))] += scale * vals[mi] * vals[mj];
                    }
                }
            }
        }
    }
    let (coeffs, _) = lu_solve_with_residual(&gram, &moments)
        .map_err(|e| Error::Internal(format!("global mass system: {e}")))?;
    Ok(coeffs)
}

/// Right-hand side vector `F[i] = (f, H_T phi_{i+1})`, realized through the
/// projected coefficients and the full `M` matrix.
pub fn build_rhs(
    problem: &OdeProblem,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    dof: &DofMap,
    m_mat: &GlobalMatrix,
) -> Result<Vec<f64>> {
    if m_mat.kind != MatrixKind::M {
        return Err(Error::invalid("right-hand side needs the M matrix"));
    }
    let coeffs = project_rhs(&problem.f, mesh, deg, dof)?;
    let m_dofs = dof.n_global();
    let mut out = vec![0.0; m_dofs - 1];
    for (i, o) in out.iter_mut().enumerate() {
        let row = i + 1;
        *o = (0..m_dofs).map(|j| coeffs[j] * m_mat.mat[(row, j)]).sum();
    }
    Ok(out)
}

/// Solution coefficients over the zero-trace basis with its discretization.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    /// Coefficients of the basis functions with global indices `1..M`.
    pub coeffs: Vec<f64>,
    pub mesh: TemporalMesh,
    pub deg: DegreeVector,
    pub dof: DofMap,
    /// Scaled solve residual `||Ax - b||_inf / (||A||_inf ||x||_inf)`.
    pub residual: f64,
}

impl DiscreteSolution {
    fn coeff_global(&self, g: usize) -> f64 {
        if g == 0 {
            0.0
        } else {
            self.coeffs[g - 1]
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let l = self.mesh.element_of(t);
        let (a, b) = self.mesh.element(l);
        let xi = (t - a) / (b - a);
        let p = self.deg.degree(l);
        let mut vals = Vec::new();
        shapefn::psi_all(p, xi, &mut vals);
        (0..=p)
            .map(|m| self.coeff_global(self.dof.global(m, l)) * vals[m])
            .sum()
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let l = self.mesh.element_of(t);
        let (a, b) = self.mesh.element(l);
        let xi = (t - a) / (b - a);
        let p = self.deg.degree(l);
        let mut vals = Vec::new();
        shapefn::dpsi_all(p, xi, &mut vals);
        (0..=p)
            .map(|m| self.coeff_global(self.dof.global(m, l)) * vals[m])
            .sum::<f64>()
            / (b - a)
    }
}

/// Solve the dense system by LU with partial pivoting.
pub fn lu_solve(
    system: &Matrix,
    rhs: &[f64],
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    dof: &DofMap,
) -> Result<DiscreteSolution> {
    let (coeffs, residual) = lu_solve_with_residual(system, rhs)?;
    Ok(DiscreteSolution {
        coeffs,
        mesh: mesh.clone(),
        deg: deg.clone(),
        dof: dof.clone(),
        residual,
    })
}

/// Error norms of a discrete solution against exact handles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
    /// `sqrt(l2 * h1_semi)`, the computable upper bound used in place of the
    /// fractional-order norm.
    pub bracket: f64,
}

/// Per-element Gauss quadrature of the error and its derivative, with the
/// first element sub-split geometrically so singular-derivative exact
/// solutions are resolved well below the discretization error.
pub fn error_norms(
    sol: &DiscreteSolution,
    u_exact: &ScalarFn,
    du_exact: &ScalarFn,
) -> Result<ErrorNorms> {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut vals = Vec::new();
    let mut dvals = Vec::new();
    for l in 0..sol.mesh.n_elements() {
        let p = sol.deg.degree(l);
        let rule: Arc<GaussRule> = gauss_legendre((p + 6).min(crate::quadrature::MAX_ORDER))?;
        let (a, b) = sol.mesh.element(l);
        let h = b - a;
        let panels = if l == 0 {
            graded_panels()
        } else {
            vec![(0.0, 1.0)]
        };
        for (lo, hi) in panels {
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let xi = lo + (hi - lo) * x;
                let t = a + h * xi;
                shapefn::psi_all(p, xi, &mut vals);
                shapefn::dpsi_all(p, xi, &mut dvals);
                let mut uh = 0.0;
                let mut duh = 0.0;
                for m in 0..=p {
                    let c = sol.coeff_global(sol.dof.global(m, l));
                    uh += c * vals[m];
                    duh += c * dvals[m];
                }
                duh /= h;
                let we = w * (hi - lo) * h;
                let eu = uh - u_exact(t);
                let edu = duh - du_exact(t);
                l2 += we * eu * eu;
                h1 += we * edu * edu;
            }
        }
    }
    let l2 = l2.sqrt();
    let h1 = h1.sqrt();
    Ok(ErrorNorms {
        l2,
        h1_semi: h1,
        bracket: (l2 * h1).sqrt(),
    })
}

/// Refinement strategy of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Uniform meshes, fixed uniform degree.
    H,
    /// Geometric meshes graded towards `t = 0`, degrees `p_l = l`.
    Hp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyParams {
    pub kind: StudyKind,
    pub horizon: f64,
    /// Element counts per refinement level.
    pub n_values: Vec<usize>,
    /// Uniform degree for h-refinement.
    pub p: usize,
    /// Grading parameter for hp-refinement.
    pub sigma: f64,
    /// Gauss-Legendre order knob; 0 picks the defaults.
    pub quad_k: usize,
}

impl StudyParams {
    pub fn h_study(horizon: f64, n_values: Vec<usize>, p: usize) -> Self {
        StudyParams {
            kind: StudyKind::H,
            horizon,
            n_values,
            p,
            sigma: 0.17,
            quad_k: 0,
        }
    }

    pub fn hp_study(horizon: f64, n_max: usize, sigma: f64) -> Self {
        StudyParams {
            kind: StudyKind::Hp,
            horizon,
            n_values: (2..=n_max).collect(),
            p: 0,
            sigma,
            quad_k: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub m_dofs: usize,
    pub l2: f64,
    pub h1_semi: f64,
    pub bracket: f64,
    pub residual: f64,
}

/// Assemble, solve, and measure one discretization level.
pub fn solve_level(
    problem: &OdeProblem,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    quad_k: usize,
) -> Result<(DiscreteSolution, Option<ErrorNorms>)> {
    let dof = DofMap::build(mesh, deg)?;
    let cfg = if quad_k == 0 {
        crate::assembly::QuadConfig::for_degrees(deg)
    } else {
        crate::assembly::QuadConfig::with_knob(deg.max_degree(), quad_k)
    };
    let m_mat = crate::assembly::assemble(MatrixKind::M, mesh, deg, &dof, &cfg)?;
    let (a_mat, b_mat) = match problem.kind {
        OdeKind::Parabolic => (
            Some(crate::assembly::assemble(MatrixKind::A, mesh, deg, &dof, &cfg)?),
            None,
        ),
        OdeKind::Hyperbolic => (
            None,
            Some(crate::assembly::assemble(MatrixKind::B, mesh, deg, &dof, &cfg)?),
        ),
    };
    let system = build_system(problem, &m_mat, a_mat.as_ref(), b_mat.as_ref())?;
    let rhs = build_rhs(problem, mesh, deg, &dof, &m_mat)?;
    let sol = lu_solve(&system, &rhs, mesh, deg, &dof)?;
    let norms = match (&problem.u_exact, &problem.du_exact) {
        (Some(u), Some(du)) => Some(error_norms(&sol, u, du)?),
        _ => None,
    };
    Ok((sol, norms))
}

/// Run an h- or hp-refinement study, one row per level.
pub fn run_study(problem: &OdeProblem, params: &StudyParams) -> Result<Vec<StudyRow>> {
    if problem.u_exact.is_none() || problem.du_exact.is_none() {
        return Err(Error::invalid(
            "convergence studies need exact-solution handles",
        ));
    }
    let mut rows = Vec::new();
    for &n in &params.n_values {
        let (mesh, deg) = match params.kind {
            StudyKind::H => (
                TemporalMesh::uniform(n, params.horizon)?,
                DegreeVector::uniform(n, params.p)?,
            ),
            StudyKind::Hp => (
                TemporalMesh::geometric(n, params.horizon, params.sigma)?,
                DegreeVector::linear(n)?,
            ),
        };
        let (sol, norms) = solve_level(problem, &mesh, &deg, params.quad_k)?;
        let norms = norms.expect("exact handles are present");
        rows.push(StudyRow {
            n,
            m_dofs: sol.dof.n_global(),
            l2: norms.l2,
            h1_semi: norms.h1_semi,
            bracket: norms.bracket,
            residual: sol.residual,
        });
    }
    Ok(rows)
}

/// Pearson correlation coefficient, used by the studies to quantify
/// exponential trends.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests;
