//! Temporal meshes, per-element polynomial degrees, and the global
//! degree-of-freedom map.
//!
//! A mesh partitions `(0, T)` into `N` elements `(t_{l-1}, t_l)`. On element
//! `l` the local shape functions `psi_1 .. psi_{p_l+1}` map to global basis
//! functions through [`DofMap`]: the two vertex modes share indices with the
//! neighbouring elements, interior (bubble) modes get their own. Indices are
//! zero-based throughout; global index 0 belongs to the vertex at `t = 0`,
//! which carries the only basis function with a nonzero value there. Dropping
//! row/column 0 of an assembled matrix therefore yields the zero-trace
//! ("tilde") system matrix.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Partition `0 = t_0 < t_1 < ... < t_N = T` of the time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    horizon: f64,
    breakpoints: Vec<f64>,
}

impl TemporalMesh {
    /// Mesh from explicit breakpoints; validates ordering and endpoints.
    pub fn from_breakpoints(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid("mesh needs at least two breakpoints"));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::invalid("first breakpoint must be 0"));
        }
        let horizon = *breakpoints.last().unwrap();
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("horizon T must be positive and finite"));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("breakpoints must be strictly increasing"));
            }
        }
        Ok(TemporalMesh {
            horizon,
            breakpoints,
        })
    }

    /// Uniform mesh `t_l = T l / N`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform mesh needs N >= 1"));
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid("uniform mesh needs T > 0"));
        }
        let pts = (0..=n)
            .map(|l| horizon * l as f64 / n as f64)
            .collect::<Vec<_>>();
        Self::from_breakpoints(pts)
    }

    /// Geometrically graded mesh towards `t = 0`: `t_l = T sigma^{N-l}` for
    /// `l >= 1`, `t_0 = 0`.
    pub fn geometric(n: usize, horizon: f64, sigma: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("geometric mesh needs N >= 2"));
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid("geometric mesh needs T > 0"));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::invalid("grading parameter sigma must lie in (0,1)"));
        }
        let mut pts = vec![0.0];
        for l in 1..=n {
            pts.push(horizon * sigma.powi((n - l) as i32));
        }
        Self::from_breakpoints(pts)
    }

    /// Dyadically graded mesh towards `t = 0`: `t_l = 2^{l-N} T` for `l >= 1`.
    pub fn dyadic(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dyadic mesh needs N >= 1"));
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid("dyadic mesh needs T > 0"));
        }
        let mut pts = vec![0.0];
        for l in 1..=n {
            pts.push(horizon * (2.0f64).powi(l as i32 - n as i32));
        }
        Self::from_breakpoints(pts)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of elements `N`.
    pub fn n_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Element interval `(t_l, t_{l+1})` for `l` in `0..N`.
    pub fn element(&self, l: usize) -> (f64, f64) {
        (self.breakpoints[l], self.breakpoints[l + 1])
    }

    /// Element size `h_l`.
    pub fn h(&self, l: usize) -> f64 {
        self.breakpoints[l + 1] - self.breakpoints[l]
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_elements()).map(|l| self.h(l)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.n_elements())
            .map(|l| self.h(l))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `max_l h_l <= T/2`, the mesh assumption of the exponential
    /// convergence estimate for the assembly quadratures. Assembly proceeds
    /// with a warning when this fails; the schemes stay well defined.
    pub fn mesh_assumption_ok(&self) -> bool {
        self.h_max() <= self.horizon / 2.0 + self.horizon * 1e-14
    }

    /// Zero-based index of the element containing `t`, breaking ties to the
    /// left element at interior breakpoints.
    pub fn element_of(&self, t: f64) -> usize {
        debug_assert!(t >= 0.0 && t <= self.horizon);
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.saturating_sub(1).min(self.n_elements() - 1),
            Err(i) => i - 1,
        }
    }
}

/// Per-element polynomial degrees `p_l >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    p: Vec<usize>,
}

impl DegreeVector {
    pub fn from_vec(p: Vec<usize>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("degree vector must not be empty"));
        }
        if p.iter().any(|&d| d == 0) {
            return Err(Error::invalid("all polynomial degrees must be >= 1"));
        }
        if p.iter().any(|&d| d > crate::shapefn::MAX_DEGREE) {
            return Err(Error::invalid(format!(
                "polynomial degrees above {} are not supported",
                crate::shapefn::MAX_DEGREE
            )));
        }
        Ok(DegreeVector { p })
    }

    pub fn uniform(n: usize, p: usize) -> Result<Self> {
        Self::from_vec(vec![p; n])
    }

    /// The hp distribution `p_l = l` (one-based element count).
    pub fn linear(n: usize) -> Result<Self> {
        Self::from_vec((1..=n).collect())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn degree(&self, l: usize) -> usize {
        self.p[l]
    }

    pub fn max_degree(&self) -> usize {
        *self.p.iter().max().unwrap()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.p
    }
}

/// Global numbering of the basis functions.
///
/// Vertex modes first (`alpha(0, l) = l`, `alpha(1, l) = l + 1`), then the
/// bubbles element by element, mode by mode. This ordering makes the
/// zero-trace system matrices exactly the trailing submatrices of the full
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_global: usize,
    // alpha[l][m] = global index of local mode m on element l
    alpha: Vec<Vec<usize>>,
}

impl DofMap {
    pub fn build(mesh: &TemporalMesh, deg: &DegreeVector) -> Result<Self> {
        let n = mesh.n_elements();
        if deg.len() != n {
            return Err(Error::invalid(format!(
                "degree vector length {} does not match element count {}",
                deg.len(),
                n
            )));
        }
        let mut alpha = Vec::with_capacity(n);
        let mut next_bubble = n + 1;
        for l in 0..n {
            let p = deg.degree(l);
            let mut local = Vec::with_capacity(p + 1);
            local.push(l);
            local.push(l + 1);
            for _ in 2..=p {
                local.push(next_bubble);
                next_bubble += 1;
            }
            alpha.push(local);
        }
        Ok(DofMap {
            n_global: next_bubble,
            alpha,
        })
    }

    /// Total number of degrees of freedom `M = 1 + sum_l p_l`.
    pub fn n_global(&self) -> usize {
        self.n_global
    }

    /// Global index of local mode `m` (zero-based) on element `l`.
    pub fn global(&self, m: usize, l: usize) -> usize {
        self.alpha[l][m]
    }

    pub fn local_modes(&self, l: usize) -> &[usize] {
        &self.alpha[l]
    }

    /// Elements supporting global index `i`, with the local mode on each.
    pub fn support(&self, i: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (l, modes) in self.alpha.iter().enumerate() {
            for (m, &g) in modes.iter().enumerate() {
                if g == i {
                    out.push((l, m));
                }
            }
        }
        out
    }
}

/// Declarative mesh description, parseable from config files and CLI strings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub kind: MeshKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Uniform,
    Geometric,
    Dyadic,
    Explicit,
}

impl MeshSpec {
    pub fn build(&self) -> Result<TemporalMesh> {
        match self.kind {
            MeshKind::Uniform => TemporalMesh::uniform(
                self.n
                    .ok_or_else(|| Error::Config("uniform mesh needs n".into()))?,
                self.t,
            ),
            MeshKind::Geometric => TemporalMesh::geometric(
                self.n
                    .ok_or_else(|| Error::Config("geometric mesh needs n".into()))?,
                self.t,
                self.sigma
                    .ok_or_else(|| Error::Config("geometric mesh needs sigma".into()))?,
            ),
            MeshKind::Dyadic => TemporalMesh::dyadic(
                self.n
                    .ok_or_else(|| Error::Config("dyadic mesh needs n".into()))?,
                self.t,
            ),
            MeshKind::Explicit => {
                let mut pts = self
                    .breakpoints
                    .clone()
                    .ok_or_else(|| Error::Config("explicit mesh needs breakpoints".into()))?;
                if let Some(last) = pts.last_mut() {
                    if (*last - self.t).abs() > 1e-12 * self.t.abs() {
                        return Err(Error::Config(
                            "explicit breakpoints must end at t".into(),
                        ));
                    }
                    *last = self.t;
                }
                TemporalMesh::from_breakpoints(pts)
            }
        }
    }

    /// Compact CLI form: `uniform:N`, `geometric:N:SIGMA`, `dyadic:N`,
    /// `explicit:t0,t1,...`. The horizon comes in separately.
    pub fn parse_compact(s: &str, horizon: f64) -> Result<Self> {
        let mut parts = s.splitn(2, ':');
        let kind = parts.next().unwrap_or("");
        let rest = parts.next().unwrap_or("");
        let parse_n = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad element count in mesh spec '{s}'")))
        };
        match kind {
            "uniform" => Ok(MeshSpec {
                kind: MeshKind::Uniform,
                n: Some(parse_n(rest)?),
                t: horizon,
                sigma: None,
                breakpoints: None,
            }),
            "dyadic" => Ok(MeshSpec {
                kind: MeshKind::Dyadic,
                n: Some(parse_n(rest)?),
                t: horizon,
                sigma: None,
                breakpoints: None,
            }),
            "geometric" => {
                let mut sub = rest.splitn(2, ':');
                let n = parse_n(sub.next().unwrap_or(""))?;
                let sigma = sub
                    .next()
                    .ok_or_else(|| Error::Config("geometric mesh spec needs sigma".into()))?
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sigma in mesh spec '{s}'")))?;
                Ok(MeshSpec {
                    kind: MeshKind::Geometric,
                    n: Some(n),
                    t: horizon,
                    sigma: Some(sigma),
                    breakpoints: None,
                })
            }
            "explicit" => {
                let pts = rest
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config(format!("bad breakpoint list in '{s}'")))?;
                Ok(MeshSpec {
                    kind: MeshKind::Explicit,
                    n: None,
                    t: horizon,
                    sigma: None,
                    breakpoints: Some(pts),
                })
            }
            other => Err(Error::Config(format!("unknown mesh kind '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_rng::Rng;

    #[test]
    fn uniform_small() {
        let m = TemporalMesh::uniform(2, 1.0).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 0.5, 1.0]);
        let m = TemporalMesh::uniform(4, 10.0).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 2.5, 5.0, 7.5, 10.0]);
    }

    #[test]
    fn uniform_single_element_violates_mesh_assumption() {
        let m = TemporalMesh::uniform(1, 1.0).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 1.0]);
        assert!(!m.mesh_assumption_ok());
        assert!(TemporalMesh::uniform(0, 1.0).is_err());
        assert!(TemporalMesh::uniform(3, 0.0).is_err());
    }

    #[test]
    fn geometric_values() {
        let m = TemporalMesh::geometric(3, 1.0, 0.17).unwrap();
        let expect = [0.0, 0.0289, 0.17, 1.0];
        for (a, b) in m.breakpoints().iter().zip(expect) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
        let m = TemporalMesh::geometric(2, 1.0, 0.5).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 0.5, 1.0]);
        let m = TemporalMesh::geometric(4, 1.0, 0.17).unwrap();
        assert!((m.breakpoints()[1] - 0.004913).abs() < 1e-15);
        assert!((m.breakpoints()[2] - 0.0289).abs() < 1e-15);
        assert!(TemporalMesh::geometric(3, 1.0, 1.0).is_err());
        assert!(TemporalMesh::geometric(3, 1.0, 0.0).is_err());
    }

    #[test]
    fn dyadic_values() {
        let m = TemporalMesh::dyadic(6, 10.0).unwrap();
        let expect = [0.0, 0.3125, 0.625, 1.25, 2.5, 5.0, 10.0];
        for (a, b) in m.breakpoints().iter().zip(expect) {
            assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
        }
        assert_eq!(TemporalMesh::dyadic(1, 1.0).unwrap().breakpoints(), &[0.0, 1.0]);
        assert_eq!(
            TemporalMesh::dyadic(2, 4.0).unwrap().breakpoints(),
            &[0.0, 2.0, 4.0]
        );
    }

    #[test]
    fn dofmap_counts_and_numbering() {
        let mesh = TemporalMesh::dyadic(6, 10.0).unwrap();
        let deg = DegreeVector::uniform(6, 2).unwrap();
        let dof = DofMap::build(&mesh, &deg).unwrap();
        assert_eq!(dof.n_global(), 13);

        // N=2, p=(2,3): M=6, bubbles numbered element by element
        let mesh = TemporalMesh::uniform(2, 1.0).unwrap();
        let deg = DegreeVector::from_vec(vec![2, 3]).unwrap();
        let dof = DofMap::build(&mesh, &deg).unwrap();
        assert_eq!(dof.n_global(), 6);
        assert_eq!(dof.global(2, 0), 3); // alpha(3,1) = 4 in one-based terms
        assert_eq!(dof.global(2, 1), 4);
        assert_eq!(dof.global(3, 1), 5);

        let mesh = TemporalMesh::uniform(1, 1.0).unwrap();
        let deg = DegreeVector::uniform(1, 1).unwrap();
        let dof = DofMap::build(&mesh, &deg).unwrap();
        assert_eq!(dof.n_global(), 2);
        assert_eq!(dof.global(0, 0), 0);
        assert_eq!(dof.global(1, 0), 1);
    }

    #[test]
    fn dofmap_shared_vertices_and_dof_count_random() {
        let mut rng = Rng::new(123);
        for _ in 0..1000 {
            let n = rng.int(1, 12);
            let p: Vec<usize> = (0..n).map(|_| rng.int(1, 8)).collect();
            let expect_m = 1 + p.iter().sum::<usize>();
            let mesh = TemporalMesh::uniform(n, 1.0 + rng.unit()).unwrap();
            let deg = DegreeVector::from_vec(p).unwrap();
            let dof = DofMap::build(&mesh, &deg).unwrap();
            assert_eq!(dof.n_global(), expect_m);
            // shared vertex: alpha(1, l) == alpha(0, l+1)
            for l in 0..n - 1 {
                assert_eq!(dof.global(1, l), dof.global(0, l + 1));
            }
            // surjectivity
            let mut seen = vec![false; expect_m];
            for l in 0..n {
                for &g in dof.local_modes(l) {
                    seen[g] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn element_lookup() {
        let m = TemporalMesh::uniform(4, 1.0).unwrap();
        assert_eq!(m.element_of(0.0), 0);
        assert_eq!(m.element_of(0.1), 0);
        assert_eq!(m.element_of(0.25), 0);
        assert_eq!(m.element_of(0.26), 1);
        assert_eq!(m.element_of(1.0), 3);
    }

    #[test]
    fn mesh_spec_roundtrip_and_compact() {
        let spec = MeshSpec::parse_compact("geometric:5:0.17", 1.0).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: MeshSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let mesh = back.build().unwrap();
        assert_eq!(mesh.n_elements(), 5);

        let spec = MeshSpec::parse_compact("explicit:0,0.3,1.0", 1.0).unwrap();
        let mesh = spec.build().unwrap();
        assert_eq!(mesh.n_elements(), 2);

        assert!(MeshSpec::parse_compact("triangular:3", 1.0).is_err());
    }
}
