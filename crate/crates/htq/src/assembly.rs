//! Element-pair quadrature schemes and global assembly of the transform
//! matrices.
//!
//! Every local block reduces to the reference double integral
//!
//! ```text
//! D[n, m] = int_0^1 int_0^1 u_m(eta) K(t_{k-1} + xi h_k, t_{l-1} + eta h_l) w_n(xi) dxi deta
//! ```
//!
//! plus, for the first element, a one-dimensional log-tangent trace term, and
//! for the `B` matrix the endpoint-trace vectors `J0`, `J1`. The kernel
//! logarithms split into an analytic factor (tensor Gauss-Legendre after a
//! Duffy split of the square into two triangles) and explicit `ln` terms that
//! the log-weight rule integrates exactly for polynomial factors. The element
//! pair determines which singularities are present:
//!
//! - both elements touch `t = 0`: `ln(s + t)` and `ln|s - t|` are extracted;
//! - both touch `t = T`: `ln(2T - s - t)` and `ln|s - t|` are extracted;
//! - a single element spanning all of `(0, T)`: all three;
//! - otherwise only `ln|s - t|`, which is singular exactly when the elements
//!   coincide or share a vertex.
//!
//! Quadrature orders for the polynomial-weighted log and Gauss rules are
//! fixed from the degree vector so those parts are exact by construction; the
//! single order `K` (`k_reg`) drives every rule applied to an analytic,
//! non-polynomial integrand, and the total quadrature error decays
//! exponentially in `K` (provided `max_l h_l <= T/2`).

use crate::kernels::{KernelContext, RegFactor};
use crate::linalg::Matrix;
use crate::mesh::{DegreeVector, DofMap, TemporalMesh};
use crate::quadrature::{gauss_legendre, gauss_log, GaussRule};
use crate::shapefn;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Which Galerkin matrix: `M`, `A`, or `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    /// `(phi_j, H_T phi_i)`
    M,
    /// `(phi_j', H_T phi_i)`
    A,
    /// `(phi_j', H_T phi_i')`
    B,
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatrixKind::M => write!(f, "M"),
            MatrixKind::A => write!(f, "A"),
            MatrixKind::B => write!(f, "B"),
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(MatrixKind::M),
            "A" | "a" => Ok(MatrixKind::A),
            "B" | "b" => Ok(MatrixKind::B),
            other => Err(Error::Config(format!("unknown matrix kind '{other}'"))),
        }
    }
}

/// Assembled global matrix with its kind tag. Row `i` corresponds to the
/// basis function inside the transform, column `j` to the test factor.
#[derive(Debug, Clone)]
pub struct GlobalMatrix {
    pub kind: MatrixKind,
    pub mat: Matrix,
}

impl GlobalMatrix {
    /// Zero-trace ("tilde") matrix: drop the row and column of the single
    /// basis function with a nonzero value at `t = 0`.
    pub fn tilde(&self) -> Matrix {
        self.mat.trailing(1)
    }
}

/// Local element-pair block; `rows` spans the modes of the transform-side
/// element `k`, `cols` the modes of the test-side element `l`.
#[derive(Debug, Clone)]
pub struct LocalBlock {
    pub mat: Matrix,
}

impl LocalBlock {
    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn cols(&self) -> usize {
        self.mat.cols()
    }
}

/// Quadrature orders for the assembly schemes.
///
/// `k_reg` is the study knob: the Gauss-Legendre order for every analytic,
/// non-polynomial integrand. `k_log` and the auxiliary orders `k1..k5` of the
/// corner decomposition are clamped so that all polynomial-weighted integrals
/// are exact, which keeps the `K`-convergence of an assembly purely the
/// Gauss-Legendre behaviour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadConfig {
    pub k_reg: usize,
    pub k_log: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub k4: usize,
    pub k5: usize,
    /// Gauss-Legendre order used for exact integrals of plain polynomial
    /// factors (shape-function moments multiplying `ln h` terms).
    pub gl_exact: usize,
    pub(crate) p_max: usize,
}

impl QuadConfig {
    /// Defaults for a degree vector: `K = max(ceil((p+1)/2), 16)` and exact
    /// log orders `ceil(p + 1/2) + 2`.
    pub fn for_degrees(deg: &DegreeVector) -> Self {
        let p = deg.max_degree();
        Self::for_max_degree(p)
    }

    pub fn for_max_degree(p: usize) -> Self {
        let k = ((p + 2) / 2).max(16);
        Self::with_knob(p, k)
    }

    /// Same exactness clamps with an explicit study knob `K`.
    pub fn with_knob(p: usize, k: usize) -> Self {
        let gl_bound = (p + 2) / 2; // ceil((p+1)/2)
        let log_bound = p + 1; // ceil(p + 1/2)
        QuadConfig {
            k_reg: k.max(1),
            k_log: log_bound + 2,
            k1: k.max(gl_bound),
            k2: k.max(p.div_ceil(2).max(1)),
            k3: k.max(log_bound),
            k4: k.max(log_bound),
            k5: k.max(gl_bound),
            gl_exact: p + 2,
            p_max: p,
        }
    }

    fn validate(&self, deg: &DegreeVector) -> Result<()> {
        let p = deg.max_degree();
        let gl_bound = (p + 2) / 2;
        let log_bound = p + 1;
        if self.k_log < log_bound || self.k3 < log_bound || self.k4 < log_bound {
            return Err(Error::invalid(format!(
                "log-rule orders must be at least p + 1 = {log_bound} for exactness"
            )));
        }
        if self.k1 < gl_bound || self.k5 < gl_bound || self.k2 * 2 < p || self.gl_exact <= p / 2 {
            return Err(Error::invalid(
                "Gauss-Legendre orders below the polynomial exactness bounds",
            ));
        }
        if self.k_reg == 0 {
            return Err(Error::invalid("k_reg must be positive"));
        }
        Ok(())
    }
}

/// Shape-function family entering a block factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fam {
    Psi,
    DPsi,
    D2Psi,
}

impl Fam {
    fn eval(self, p: usize, x: f64, out: &mut Vec<f64>) {
        match self {
            Fam::Psi => shapefn::psi_all(p, x, out),
            Fam::DPsi => shapefn::dpsi_all(p, x, out),
            Fam::D2Psi => shapefn::d2psi_all(p, x, out),
        }
    }

    /// Exact `int_0^1` of each mode, as a vector.
    fn moments(self, p: usize, gl: &GaussRule) -> Vec<f64> {
        let mut out = vec![0.0; p + 1];
        let mut vals = Vec::new();
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            self.eval(p, x, &mut vals);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += w * v;
            }
        }
        out
    }
}

fn rank1(block: &mut Matrix, f: f64, w: &[f64], u: &[f64]) {
    if f == 0.0 {
        return;
    }
    for (n, &wn) in w.iter().enumerate() {
        let fw = f * wn;
        if fw == 0.0 {
            continue;
        }
        for (m, &um) in u.iter().enumerate() {
            block[(n, m)] += fw * um;
        }
    }
}

struct Assembler<'a> {
    mesh: &'a TemporalMesh,
    deg: &'a DegreeVector,
    ctx: KernelContext,
    cfg: &'a QuadConfig,
    gl_reg: Arc<GaussRule>,
    gl_exact: Arc<GaussRule>,
    gl_k1: Arc<GaussRule>,
    gl_k2: Arc<GaussRule>,
    gl_k5: Arc<GaussRule>,
    lg: Arc<GaussRule>,
    lg_k3: Arc<GaussRule>,
    lg_k4: Arc<GaussRule>,
    /// test hook: drop the Kronecker-delta trace term of the first element
    include_first_vertex_term: bool,
}

impl<'a> Assembler<'a> {
    fn new(mesh: &'a TemporalMesh, deg: &'a DegreeVector, cfg: &'a QuadConfig) -> Result<Self> {
        cfg.validate(deg)?;
        Ok(Assembler {
            mesh,
            deg,
            ctx: KernelContext::new(mesh.horizon())?,
            cfg,
            gl_reg: gauss_legendre(cfg.k_reg)?,
            gl_exact: gauss_legendre(cfg.gl_exact)?,
            gl_k1: gauss_legendre(cfg.k1)?,
            gl_k2: gauss_legendre(cfg.k2)?,
            gl_k5: gauss_legendre(cfg.k5)?,
            lg: gauss_log(cfg.k_log)?,
            lg_k3: gauss_log(cfg.k3)?,
            lg_k4: gauss_log(cfg.k4)?,
            include_first_vertex_term: true,
        })
    }

    /// Regularized-factor case for the element pair.
    fn pair_case(&self, k: usize, l: usize) -> Option<RegFactor> {
        let n = self.mesh.n_elements();
        if n == 1 {
            Some(RegFactor::FirstLast)
        } else if k == 0 && l == 0 {
            Some(RegFactor::FirstFirst)
        } else if k == n - 1 && l == n - 1 {
            Some(RegFactor::LastLast)
        } else {
            None
        }
    }

    /// Duffy-split tensor quadrature of
    /// `int int u(eta) F(s, t) w(xi) dxi deta` with physical arguments
    /// `s = t_{k-1} + xi' h_k`, `t = t_{l-1} + eta' h_l` and the regularized
    /// factor `F` of the given case.
    fn duffy_factor_block(
        &self,
        k: usize,
        l: usize,
        case: RegFactor,
        u: Fam,
        pu: usize,
        w: Fam,
        pw: usize,
    ) -> Matrix {
        let (ak, _) = self.mesh.element(k);
        let (al, _) = self.mesh.element(l);
        let (hk, hl) = (self.mesh.h(k), self.mesh.h(l));
        let mut block = Matrix::zeros(pw + 1, pu + 1);
        let mut uvals = Vec::new();
        let mut wvals = Vec::new();
        let gl = &self.gl_reg;
        for (&xi, &wxi) in gl.nodes.iter().zip(&gl.weights) {
            for (&eta, &weta) in gl.nodes.iter().zip(&gl.weights) {
                // triangle xi' <= eta': xi' = (1 - xi) eta, Jacobian eta
                let s = ak + (1.0 - xi) * eta * hk;
                let t = al + eta * hl;
                let f = self.ctx.reg_factor_unchecked(case, s, t);
                u.eval(pu, eta, &mut uvals);
                w.eval(pw, (1.0 - xi) * eta, &mut wvals);
                rank1(&mut block, wxi * weta * f * eta, &wvals, &uvals);
                // triangle eta' <= xi': eta' = (1 - eta) xi, Jacobian xi
                let s = ak + xi * hk;
                let t = al + (1.0 - eta) * xi * hl;
                let f = self.ctx.reg_factor_unchecked(case, s, t);
                u.eval(pu, (1.0 - eta) * xi, &mut uvals);
                w.eval(pw, xi, &mut wvals);
                rank1(&mut block, wxi * weta * f * xi, &wvals, &uvals);
            }
        }
        block
    }

    /// Block form of `int int u(eta) w(xi) ln|xi - eta| dxi deta` via the
    /// combined Gauss-Legendre/log-rule tensor identity.
    fn logtensor_block(&self, u: Fam, pu: usize, w: Fam, pw: usize) -> Matrix {
        let mut block = Matrix::zeros(pw + 1, pu + 1);
        let mut uvals = Vec::new();
        let mut wvals = Vec::new();
        // both rules at the log order so the identity stays exact
        let log_rule = &self.lg;
        let leg_rule = gauss_legendre(self.cfg.k_log).expect("validated order");
        let mut add = |sv: f64, tv: f64, fac: f64, block: &mut Matrix| {
            w.eval(pw, sv, &mut wvals);
            u.eval(pu, tv, &mut uvals);
            rank1(block, fac, &wvals, &uvals);
        };
        for (&xh, &wh) in log_rule.nodes.iter().zip(&log_rule.weights) {
            for (&x, &wx) in leg_rule.nodes.iter().zip(&leg_rule.weights) {
                let fac = -wh * xh * wx;
                let v = (1.0 - x) * xh;
                add(v, xh, fac, &mut block);
                add(1.0 - v, 1.0 - xh, fac, &mut block);
            }
        }
        for (&x, &wx) in leg_rule.nodes.iter().zip(&leg_rule.weights) {
            for (&xh, &wh) in log_rule.nodes.iter().zip(&log_rule.weights) {
                let fac = -wx * x * wh;
                let v = (1.0 - xh) * x;
                add(v, x, fac, &mut block);
                add(1.0 - v, 1.0 - x, fac, &mut block);
            }
        }
        block
    }

    /// Block form of `int int u(eta) w(xi) ln(xi + eta) dxi deta`, optionally
    /// with both arguments reflected (`ln(2 - xi - eta)` case). The log parts
    /// are exact; the `ln(1 + .)` parts ride on the `K` knob.
    fn corner_ln_block(&self, u: Fam, pu: usize, w: Fam, pw: usize, reflected: bool) -> Matrix {
        let mut block = Matrix::zeros(pw + 1, pu + 1);
        let mut uvals = Vec::new();
        let mut wvals = Vec::new();
        let map = |x: f64| if reflected { 1.0 - x } else { x };
        // -sum GL(k2) x log(k3) of u(eta) eta w(xi eta) (the ln eta factor)
        for (&xi, &wxi) in self.gl_k2.nodes.iter().zip(&self.gl_k2.weights) {
            for (&eta, &weta) in self.lg_k3.nodes.iter().zip(&self.lg_k3.weights) {
                u.eval(pu, map(eta), &mut uvals);
                w.eval(pw, map(xi * eta), &mut wvals);
                rank1(&mut block, -wxi * weta * eta, &wvals, &uvals);
            }
        }
        // -sum log(k4) x GL(k5) of u(xi eta) xi w(xi) (the ln xi factor)
        for (&xi, &wxi) in self.lg_k4.nodes.iter().zip(&self.lg_k4.weights) {
            for (&eta, &weta) in self.gl_k5.nodes.iter().zip(&self.gl_k5.weights) {
                u.eval(pu, map(xi * eta), &mut uvals);
                w.eval(pw, map(xi), &mut wvals);
                rank1(&mut block, -wxi * weta * xi, &wvals, &uvals);
            }
        }
        // + tensor GL(k_reg) of the bounded ln(1 + .) parts
        for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
            for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                let fac = wxi * weta;
                u.eval(pu, map(eta), &mut uvals);
                w.eval(pw, map(xi * eta), &mut wvals);
                rank1(&mut block, fac * eta * (1.0 + xi).ln(), &wvals, &uvals);
                u.eval(pu, map(xi * eta), &mut uvals);
                w.eval(pw, map(xi), &mut wvals);
                rank1(&mut block, fac * xi * (1.0 + eta).ln(), &wvals, &uvals);
            }
        }
        block
    }

    /// `int int u(eta) w(xi) ln|s - t| dxi deta` for the four relative
    /// positions of distinct element pairs (shared diagonal handled by the
    /// log-tensor identity, shared vertices by a Duffy corner split, far
    /// pairs by plain tensor quadrature).
    fn offdiag_log_block(&self, k: usize, l: usize, u: Fam, pu: usize, w: Fam, pw: usize) -> Matrix {
        let (hk, hl) = (self.mesh.h(k), self.mesh.h(l));
        let mut block;
        let mut uvals = Vec::new();
        let mut wvals = Vec::new();
        if k == l {
            block = self.logtensor_block(u, pu, w, pw);
            // ln h_l (int u)(int w)
            let mu = u.moments(pu, &self.gl_exact);
            let mw = w.moments(pw, &self.gl_exact);
            rank1(&mut block, hl.ln(), &mw, &mu);
        } else if k == l + 1 {
            block = Matrix::zeros(pw + 1, pu + 1);
            // |s - t| = xi' h_k + (1 - eta') h_l; corner at (0, 1)
            // part 1: xi' = eta xi, eta' = 1 - eta, Jacobian eta
            for (&xi, &wxi) in self.gl_exact.nodes.iter().zip(&self.gl_exact.weights) {
                for (&eta, &weta) in self.lg.nodes.iter().zip(&self.lg.weights) {
                    u.eval(pu, 1.0 - eta, &mut uvals);
                    w.eval(pw, eta * xi, &mut wvals);
                    rank1(&mut block, -wxi * weta * eta, &wvals, &uvals);
                }
            }
            for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                    u.eval(pu, 1.0 - eta, &mut uvals);
                    w.eval(pw, eta * xi, &mut wvals);
                    let fac = wxi * weta * eta * (xi * hk + hl).ln();
                    rank1(&mut block, fac, &wvals, &uvals);
                }
            }
            // part 2: eta' = 1 - xi + eta xi, xi' = xi, Jacobian xi
            for (&xi, &wxi) in self.lg.nodes.iter().zip(&self.lg.weights) {
                for (&eta, &weta) in self.gl_exact.nodes.iter().zip(&self.gl_exact.weights) {
                    u.eval(pu, 1.0 - xi + eta * xi, &mut uvals);
                    w.eval(pw, xi, &mut wvals);
                    rank1(&mut block, -wxi * weta * xi, &wvals, &uvals);
                }
            }
            for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                    u.eval(pu, 1.0 - xi + eta * xi, &mut uvals);
                    w.eval(pw, xi, &mut wvals);
                    let fac = wxi * weta * xi * ((1.0 - eta) * hl + hk).ln();
                    rank1(&mut block, fac, &wvals, &uvals);
                }
            }
        } else if k + 1 == l {
            block = Matrix::zeros(pw + 1, pu + 1);
            // |s - t| = (1 - xi') h_k + eta' h_l; corner at (1, 0)
            // part 1: eta' = (1 - xi) eta, xi' = 1 - eta, Jacobian eta
            for (&xi, &wxi) in self.gl_exact.nodes.iter().zip(&self.gl_exact.weights) {
                for (&eta, &weta) in self.lg.nodes.iter().zip(&self.lg.weights) {
                    u.eval(pu, (1.0 - xi) * eta, &mut uvals);
                    w.eval(pw, 1.0 - eta, &mut wvals);
                    rank1(&mut block, -wxi * weta * eta, &wvals, &uvals);
                }
            }
            for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                    u.eval(pu, (1.0 - xi) * eta, &mut uvals);
                    w.eval(pw, 1.0 - eta, &mut wvals);
                    let fac = wxi * weta * eta * (hk + (1.0 - xi) * hl).ln();
                    rank1(&mut block, fac, &wvals, &uvals);
                }
            }
            // part 2: eta' = eta, xi' = 1 - eta + xi eta, Jacobian eta
            for (&xi, &wxi) in self.gl_exact.nodes.iter().zip(&self.gl_exact.weights) {
                for (&eta, &weta) in self.lg.nodes.iter().zip(&self.lg.weights) {
                    u.eval(pu, eta, &mut uvals);
                    w.eval(pw, 1.0 - eta + xi * eta, &mut wvals);
                    rank1(&mut block, -wxi * weta * eta, &wvals, &uvals);
                }
            }
            for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                    u.eval(pu, eta, &mut uvals);
                    w.eval(pw, 1.0 - eta + xi * eta, &mut wvals);
                    let fac = wxi * weta * eta * ((1.0 - xi) * hk + hl).ln();
                    rank1(&mut block, fac, &wvals, &uvals);
                }
            }
        } else {
            // separated elements: plain tensor quadrature
            block = Matrix::zeros(pw + 1, pu + 1);
            let (ak, _) = self.mesh.element(k);
            let (al, _) = self.mesh.element(l);
            for (&xi, &wxi) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                for (&eta, &weta) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                    u.eval(pu, eta, &mut uvals);
                    w.eval(pw, xi, &mut wvals);
                    let dist = (ak + xi * hk - al - eta * hl).abs();
                    rank1(&mut block, wxi * weta * dist.ln(), &wvals, &uvals);
                }
            }
        }
        block
    }

    /// Reference kernel double integral `D` of the module docs.
    fn kernel_double_block(&self, k: usize, l: usize, u: Fam, pu: usize, w: Fam, pw: usize) -> Matrix {
        let mut total = match self.pair_case(k, l) {
            Some(case) => {
                let mut blk = self.duffy_factor_block(k, l, case, u, pu, w, pw);
                let mut log_blk = self.logtensor_block(u, pu, w, pw);
                let mu = u.moments(pu, &self.gl_k1);
                let mw = w.moments(pw, &self.gl_exact);
                let h = self.mesh.h(k);
                match case {
                    RegFactor::FirstFirst => {
                        // ln(s+t) and ln|s-t| extracted: 2 ln h + corners
                        rank1(&mut log_blk, 2.0 * h.ln(), &mw, &mu);
                        let corner = self.corner_ln_block(u, pu, w, pw, false);
                        blk.scaled_add(1.0, &log_blk);
                        blk.scaled_add(1.0, &corner);
                    }
                    RegFactor::LastLast => {
                        // ln h terms cancel between ln|s-t| and -ln(2T-s-t)
                        let corner = self.corner_ln_block(u, pu, w, pw, true);
                        blk.scaled_add(1.0, &log_blk);
                        blk.scaled_add(-1.0, &corner);
                    }
                    RegFactor::FirstLast => {
                        rank1(&mut log_blk, h.ln(), &mw, &mu);
                        let corner = self.corner_ln_block(u, pu, w, pw, false);
                        let corner_r = self.corner_ln_block(u, pu, w, pw, true);
                        blk.scaled_add(1.0, &log_blk);
                        blk.scaled_add(1.0, &corner);
                        blk.scaled_add(-1.0, &corner_r);
                    }
                    RegFactor::General => unreachable!(),
                }
                blk
            }
            None => {
                let mut blk = self.duffy_factor_block(k, l, RegFactor::General, u, pu, w, pw);
                let log_blk = self.offdiag_log_block(k, l, u, pu, w, pw);
                blk.scaled_add(1.0, &log_blk);
                blk
            }
        };
        // D = -(1/pi) [ ... ]
        total = Matrix::from_fn(total.rows(), total.cols(), |n, m| -total[(n, m)] / PI);
        total
    }

    /// First-element trace integral
    /// `L_l[m] = int_0^1 u_m(eta) ln tan(pi (t_{l-1} + eta h_l) / 4T) deta`.
    fn first_trace_vector(&self, l: usize, u: Fam, pu: usize) -> Vec<f64> {
        let (al, _) = self.mesh.element(l);
        let hl = self.mesh.h(l);
        let mut out = vec![0.0; pu + 1];
        let mut uvals = Vec::new();
        if l == 0 {
            // ln tan(pi eta h / 4T) = logtan_over_x(eta h) + ln eta + ln h
            for (&x, &wx) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                u.eval(pu, x, &mut uvals);
                let f = wx * self.ctx.logtan_over_x_unchecked(x * hl);
                for (o, v) in out.iter_mut().zip(&uvals) {
                    *o += f * v;
                }
            }
            for (&x, &wx) in self.lg.nodes.iter().zip(&self.lg.weights) {
                u.eval(pu, x, &mut uvals);
                for (o, v) in out.iter_mut().zip(&uvals) {
                    *o -= wx * v;
                }
            }
            let mu = u.moments(pu, &self.gl_k1);
            for (o, v) in out.iter_mut().zip(&mu) {
                *o += hl.ln() * v;
            }
        } else {
            for (&x, &wx) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                u.eval(pu, x, &mut uvals);
                let f = wx * self.ctx.logtan(al + x * hl);
                for (o, v) in out.iter_mut().zip(&uvals) {
                    *o += f * v;
                }
            }
        }
        out
    }

    /// Endpoint-trace vectors `J0` (`which = 0`) and `J1` (`which = 1`):
    /// `-pi int_0^1 psi_m'(eta) K(t_edge, t_{l-1} + eta h_l) deta`.
    fn j_vector(&self, k: usize, l: usize, which: u8) -> Vec<f64> {
        let n_el = self.mesh.n_elements();
        let pl = self.deg.degree(l);
        let (al, _) = self.mesh.element(l);
        let hl = self.mesh.h(l);
        let hk = self.mesh.h(k);
        let u = Fam::DPsi;
        let mut out = vec![0.0; pl + 1];
        let mut uvals = Vec::new();

        let mut add_gl = |f: &dyn Fn(f64) -> f64, out: &mut Vec<f64>| {
            for (&x, &wx) in self.gl_reg.nodes.iter().zip(&self.gl_reg.weights) {
                u.eval(pl, x, &mut uvals);
                let fac = wx * f(x);
                for (o, v) in out.iter_mut().zip(&uvals) {
                    *o += fac * v;
                }
            }
        };
        // int_0^1 u(map(eta)) ln(eta) deta via the log rule
        let add_log = |flip: bool, scale: f64, out: &mut Vec<f64>| {
            let mut vals = Vec::new();
            for (&x, &wx) in self.lg.nodes.iter().zip(&self.lg.weights) {
                u.eval(pl, if flip { 1.0 - x } else { x }, &mut vals);
                for (o, v) in out.iter_mut().zip(&vals) {
                    *o -= scale * wx * v;
                }
            }
        };
        // ln h_l (psi_m(1) - psi_m(0)) terms
        let endpoint_diff: Vec<f64> = (1..=pl + 1)
            .map(|m| {
                shapefn::psi_endpoint_derivative(m, 0, 1) - shapefn::psi_endpoint_derivative(m, 0, 0)
            })
            .collect();

        let last = n_el - 1;
        if k == 0 && l == 0 && which == 0 {
            // F_{1,1}(0, eta h) is finite for single-element meshes too
            add_gl(
                &|x| self.ctx.reg_factor_unchecked(RegFactor::FirstFirst, 0.0, x * hl),
                &mut out,
            );
            add_log(false, 2.0, &mut out);
            for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                *o += 2.0 * hl.ln() * d;
            }
        } else if k == last && l == last && which == 1 {
            // K(T, t) vanishes identically
            out.iter_mut().for_each(|v| *v = 0.0);
        } else if k == 0 && l == 0 && which == 1 {
            let t1 = self.mesh.breakpoints()[1];
            add_gl(
                &|x| self.ctx.reg_factor_unchecked(RegFactor::FirstFirst, t1, x * hl),
                &mut out,
            );
            add_gl(&|x| (1.0 + x).ln(), &mut out);
            add_log(true, 1.0, &mut out);
            for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                *o += 2.0 * hl.ln() * d;
            }
        } else if k == last && l == last && which == 0 {
            let t_prev = self.mesh.breakpoints()[last];
            add_gl(
                &|x| {
                    self.ctx
                        .reg_factor_unchecked(RegFactor::LastLast, t_prev, t_prev + x * hl)
                },
                &mut out,
            );
            add_log(false, 1.0, &mut out);
            add_gl(&|x| -(2.0 - x).ln(), &mut out);
        } else {
            // general pair: regular factor plus the singular table
            let edge = if which == 0 {
                self.mesh.breakpoints()[k]
            } else {
                self.mesh.breakpoints()[k + 1]
            };
            add_gl(
                &|x| {
                    self.ctx
                        .reg_factor_unchecked(RegFactor::General, edge, al + x * hl)
                },
                &mut out,
            );
            let same = k == l;
            let k_right = k == l + 1; // t_edge of interest to the right cases
            let k_left = k + 1 == l;
            match (which, same, k_right, k_left) {
                (0, true, _, _) => {
                    add_log(false, 1.0, &mut out);
                    for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                        *o += hl.ln() * d;
                    }
                }
                (0, _, true, _) => {
                    add_log(true, 1.0, &mut out);
                    for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                        *o += hl.ln() * d;
                    }
                }
                (0, _, _, true) => {
                    add_gl(&|x| (hk + x * hl).ln(), &mut out);
                }
                (0, _, _, _) => {
                    let tk = self.mesh.breakpoints()[k];
                    add_gl(&|x| (tk - (al + x * hl)).abs().ln(), &mut out);
                }
                (_, true, _, _) => {
                    add_log(true, 1.0, &mut out);
                    for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                        *o += hl.ln() * d;
                    }
                }
                (_, _, true, _) => {
                    add_gl(&|x| (hk + (1.0 - x) * hl).ln(), &mut out);
                }
                (_, _, _, true) => {
                    add_log(false, 1.0, &mut out);
                    for (o, d) in out.iter_mut().zip(&endpoint_diff) {
                        *o += hl.ln() * d;
                    }
                }
                (_, _, _, _) => {
                    let tk = self.mesh.breakpoints()[k + 1];
                    add_gl(&|x| (tk - (al + x * hl)).abs().ln(), &mut out);
                }
            }
        }
        out
    }

    fn local_block(&self, kind: MatrixKind, k: usize, l: usize) -> Matrix {
        let (pk, pl) = (self.deg.degree(k), self.deg.degree(l));
        let (hk, hl) = (self.mesh.h(k), self.mesh.h(l));
        match kind {
            MatrixKind::M => {
                let d = self.kernel_double_block(k, l, Fam::Psi, pl, Fam::DPsi, pk);
                let mut blk = Matrix::from_fn(pk + 1, pl + 1, |n, m| hl * d[(n, m)]);
                if k == 0 && self.include_first_vertex_term {
                    let trace = self.first_trace_vector(l, Fam::Psi, pl);
                    for n in 0..=pk {
                        let c = shapefn::psi_endpoint_derivative(n + 1, 0, 0);
                        if c != 0.0 {
                            for m in 0..=pl {
                                blk[(n, m)] -= c * 2.0 * hl / PI * trace[m];
                            }
                        }
                    }
                }
                blk
            }
            MatrixKind::A => {
                let d = self.kernel_double_block(k, l, Fam::DPsi, pl, Fam::DPsi, pk);
                let mut blk = d;
                if k == 0 && self.include_first_vertex_term {
                    let trace = self.first_trace_vector(l, Fam::DPsi, pl);
                    for n in 0..=pk {
                        let c = shapefn::psi_endpoint_derivative(n + 1, 0, 0);
                        if c != 0.0 {
                            for m in 0..=pl {
                                blk[(n, m)] -= c * 2.0 / PI * trace[m];
                            }
                        }
                    }
                }
                blk
            }
            MatrixKind::B => {
                let d = self.kernel_double_block(k, l, Fam::DPsi, pl, Fam::D2Psi, pk);
                let j0 = self.j_vector(k, l, 0);
                let j1 = self.j_vector(k, l, 1);
                Matrix::from_fn(pk + 1, pl + 1, |n, m| {
                    let dp0 = shapefn::psi_endpoint_derivative(n + 1, 1, 0);
                    let dp1 = shapefn::psi_endpoint_derivative(n + 1, 1, 1);
                    (-dp0 * j0[m] + dp1 * j1[m]) / (PI * hk) + d[(n, m)] / hk
                })
            }
        }
    }
}

/// Local matrix block of the mass-type matrix `M` for the element pair
/// `(k, l)` (zero-based element indices).
pub fn local_m(
    k: usize,
    l: usize,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    cfg: &QuadConfig,
) -> Result<LocalBlock> {
    local_block(MatrixKind::M, k, l, mesh, deg, cfg)
}

/// Local block of `A` (test factor differentiated).
pub fn local_a(
    k: usize,
    l: usize,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    cfg: &QuadConfig,
) -> Result<LocalBlock> {
    local_block(MatrixKind::A, k, l, mesh, deg, cfg)
}

/// Local block of `B` (both factors differentiated).
pub fn local_b(
    k: usize,
    l: usize,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    cfg: &QuadConfig,
) -> Result<LocalBlock> {
    local_block(MatrixKind::B, k, l, mesh, deg, cfg)
}

fn local_block(
    kind: MatrixKind,
    k: usize,
    l: usize,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    cfg: &QuadConfig,
) -> Result<LocalBlock> {
    let n = mesh.n_elements();
    if k >= n || l >= n {
        return Err(Error::invalid(format!(
            "element pair ({k}, {l}) out of range for N = {n}"
        )));
    }
    if deg.len() != n {
        return Err(Error::invalid("degree vector does not match mesh"));
    }
    let asm = Assembler::new(mesh, deg, cfg)?;
    Ok(LocalBlock {
        mat: asm.local_block(kind, k, l),
    })
}

/// Endpoint-trace vector `J0` (`which = 0`) or `J1` (`which = 1`) for the
/// element pair `(k, l)`; length `p_l + 1`.
pub fn compute_j(
    k: usize,
    l: usize,
    which: u8,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    cfg: &QuadConfig,
) -> Result<Vec<f64>> {
    let n = mesh.n_elements();
    if k >= n || l >= n || which > 1 {
        return Err(Error::invalid("invalid element pair or trace side"));
    }
    if deg.len() != n {
        return Err(Error::invalid("degree vector does not match mesh"));
    }
    let asm = Assembler::new(mesh, deg, cfg)?;
    Ok(asm.j_vector(k, l, which))
}

/// Assemble the global matrix of the given kind: zero-initialize, compute
/// every local block, scatter through the DOF map in lexicographic pair
/// order. Blocks are evaluated in parallel; the accumulation order is fixed,
/// so results are bitwise reproducible at any thread count.
pub fn assemble(
    kind: MatrixKind,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    dof: &DofMap,
    cfg: &QuadConfig,
) -> Result<GlobalMatrix> {
    assemble_gated(kind, mesh, deg, dof, cfg, true)
}

pub(crate) fn assemble_gated(
    kind: MatrixKind,
    mesh: &TemporalMesh,
    deg: &DegreeVector,
    dof: &DofMap,
    cfg: &QuadConfig,
    include_first_vertex_term: bool,
) -> Result<GlobalMatrix> {
    if deg.len() != mesh.n_elements() {
        return Err(Error::invalid("degree vector does not match mesh"));
    }
    if dof.n_global() != 1 + deg.as_slice().iter().sum::<usize>() {
        return Err(Error::invalid("DOF map does not match degree vector"));
    }
    if !mesh.mesh_assumption_ok() {
        // once per process; geometric study meshes trip this on every level
        static WARNED: std::sync::Once = std::sync::Once::new();
        WARNED.call_once(|| {
            eprintln!(
                "warning: max element size exceeds T/2; assembly quadratures stay well defined \
                 but the exponential-convergence guarantee does not apply"
            );
        });
    }
    let mut asm = Assembler::new(mesh, deg, cfg)?;
    asm.include_first_vertex_term = include_first_vertex_term;
    let n = mesh.n_elements();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|k| (0..n).map(move |l| (k, l)))
        .collect();
    let blocks: Vec<Matrix> = pairs
        .par_iter()
        .map(|&(k, l)| asm.local_block(kind, k, l))
        .collect();
    let m_dofs = dof.n_global();
    let mut mat = Matrix::zeros(m_dofs, m_dofs);
    for (&(k, l), block) in pairs.iter().zip(&blocks) {
        for n_mode in 0..=deg.degree(k) {
            let gi = dof.global(n_mode, k);
            for m_mode in 0..=deg.degree(l) {
                let gj = dof.global(m_mode, l);
                mat[(gi, gj)] += block[(n_mode, m_mode)];
            }
        }
    }
    Ok(GlobalMatrix { kind, mat })
}
