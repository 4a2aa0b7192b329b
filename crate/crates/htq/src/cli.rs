//! Command layer behind the `htq` binary: configuration types, the command
//! implementations, and their CSV/JSON outputs.
//!
//! Every command is deterministic for a given configuration, so re-running
//! one produces byte-identical CSV. Each file-producing run writes a JSON
//! metadata sidecar holding the full [`RunConfig`]; `htq rerun meta.json`
//! repeats the run from it.

use crate::assembly::{assemble, MatrixKind, QuadConfig};
use crate::linalg::Matrix;
use crate::mesh::{DegreeVector, DofMap, MeshSpec, TemporalMesh};
use crate::quadrature::{gauss_legendre, gauss_log, WeightKind};
use crate::solver::{self, OdeKind, OdeProblem, ScalarFn, StudyKind, StudyParams};
use crate::spectral::{oracle_matrix, OracleCertificate, SpectralConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Per-element polynomial degree specification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegreeSpec {
    Uniform { p: usize },
    /// `p_l = l`, the hp distribution.
    Linear,
    List { p: Vec<usize> },
}

impl DegreeSpec {
    /// Compact CLI form: `uniform:P`, `linear`, or `list:p1,p2,...`.
    pub fn parse_compact(s: &str) -> Result<Self> {
        if s == "linear" {
            return Ok(DegreeSpec::Linear);
        }
        if let Some(rest) = s.strip_prefix("uniform:") {
            let p = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad degree in '{s}'")))?;
            return Ok(DegreeSpec::Uniform { p });
        }
        if let Some(rest) = s.strip_prefix("list:") {
            let p = rest
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad degree list in '{s}'")))?;
            return Ok(DegreeSpec::List { p });
        }
        Err(Error::Config(format!("unknown degree spec '{s}'")))
    }

    pub fn build(&self, n_elements: usize) -> Result<DegreeVector> {
        match self {
            DegreeSpec::Uniform { p } => DegreeVector::uniform(n_elements, *p),
            DegreeSpec::Linear => DegreeVector::linear(n_elements),
            DegreeSpec::List { p } => {
                if p.len() != n_elements {
                    return Err(Error::Config(format!(
                        "degree list has {} entries for {} elements",
                        p.len(),
                        n_elements
                    )));
                }
                DegreeVector::from_vec(p.clone())
            }
        }
    }
}

/// Right-hand side presets for the model problems.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RhsSpec {
    /// `f = 1`; the exact solution is known for either equation class.
    One,
    /// `f(t) = sum_j c_j t^j` (no exact solution attached).
    Poly { coeffs: Vec<f64> },
    /// Manufactured from the exact solution `u(t) = t^{3/4}` (parabolic
    /// only): `f = 3/4 t^{-1/4} + mu t^{3/4}`.
    T34,
}

impl RhsSpec {
    pub fn parse_compact(s: &str) -> Result<Self> {
        if s == "one" {
            return Ok(RhsSpec::One);
        }
        if s == "t34" {
            return Ok(RhsSpec::T34);
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coeffs = rest
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad coefficient list in '{s}'")))?;
            return Ok(RhsSpec::Poly { coeffs });
        }
        Err(Error::Config(format!("unknown rhs preset '{s}'")))
    }

    /// Build the problem, attaching exact-solution handles where the preset
    /// defines them.
    pub fn problem(&self, kind: OdeKind, mu: f64) -> Result<OdeProblem> {
        match self {
            RhsSpec::One => {
                let problem = OdeProblem::new(kind, mu, Arc::new(|_| 1.0))?;
                let (u, du): (ScalarFn, ScalarFn) = match (kind, mu) {
                    (OdeKind::Parabolic, m) if m == 0.0 => (Arc::new(|t| t), Arc::new(|_| 1.0)),
                    (OdeKind::Parabolic, m) => (
                        Arc::new(move |t: f64| (1.0 - (-m * t).exp()) / m),
                        Arc::new(move |t: f64| (-m * t).exp()),
                    ),
                    (OdeKind::Hyperbolic, m) if m == 0.0 => {
                        (Arc::new(|t| 0.5 * t * t), Arc::new(|t| t))
                    }
                    (OdeKind::Hyperbolic, m) => (
                        Arc::new(move |t: f64| (1.0 - (m.sqrt() * t).cos()) / m),
                        Arc::new(move |t: f64| (m.sqrt() * t).sin() / m.sqrt()),
                    ),
                };
                Ok(problem.with_exact(u, du))
            }
            RhsSpec::Poly { coeffs } => {
                let c = coeffs.clone();
                OdeProblem::new(
                    kind,
                    mu,
                    Arc::new(move |t| c.iter().rev().fold(0.0, |acc, &v| acc * t + v)),
                )
            }
            RhsSpec::T34 => {
                if kind != OdeKind::Parabolic {
                    return Err(Error::Config(
                        "the t34 preset is defined for the parabolic problem".into(),
                    ));
                }
                let problem = OdeProblem::new(
                    kind,
                    mu,
                    Arc::new(move |t: f64| {
                        if t <= 0.0 {
                            0.0
                        } else {
                            0.75 * t.powf(-0.25) + mu * t.powf(0.75)
                        }
                    }),
                )?;
                Ok(problem.with_exact(
                    Arc::new(|t: f64| t.powf(0.75)),
                    Arc::new(|t: f64| {
                        if t <= 0.0 {
                            0.0
                        } else {
                            0.75 * t.powf(-0.25)
                        }
                    }),
                ))
            }
        }
    }
}

/// A full command description; serialized into every metadata sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Assemble {
        kind: MatrixKind,
        mesh: MeshSpec,
        degrees: DegreeSpec,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
    },
    Oracle {
        kind: MatrixKind,
        mesh: MeshSpec,
        degrees: DegreeSpec,
        k_f: usize,
        tol: f64,
        accelerate: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
    },
    QuadStudy {
        mesh: MeshSpec,
        degrees: DegreeSpec,
        k_min: usize,
        k_max: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
    },
    Solve {
        kind: OdeKind,
        mu: f64,
        f: RhsSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        study: Option<StudyKind>,
        horizon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mesh: Option<MeshSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degrees: Option<DegreeSpec>,
        p: usize,
        sigma: f64,
        n_max: usize,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
    },
    Rules {
        kind: String,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    timing_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<CertificateInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct CertificateInfo {
    k_f: usize,
    tol: f64,
    accelerate: bool,
    selfconsistency: f64,
    satisfied: bool,
}

impl From<&OracleCertificate> for CertificateInfo {
    fn from(c: &OracleCertificate) -> Self {
        CertificateInfo {
            k_f: c.k_f,
            tol: c.tol,
            accelerate: c.accelerate,
            selfconsistency: c.max_entry_diff,
            satisfied: c.max_entry_diff <= c.tol,
        }
    }
}

fn matrix_csv(mat: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..mat.rows() {
        let row: Vec<String> = mat.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Write the output set atomically as a group: stage everything, then
/// rename; any failure leaves no partial files behind.
fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for (path, content) in files {
        let tmp = path.with_extension(format!(
            "{}.tmp",
            path.extension().and_then(|e| e.to_str()).unwrap_or("out")
        ));
        if let Err(e) = std::fs::write(&tmp, content) {
            cleanup(&staged);
            return Err(e.into());
        }
        staged.push((tmp, path.clone()));
    }
    for (tmp, path) in &staged {
        if let Err(e) = std::fs::rename(tmp, path) {
            cleanup(&staged);
            for (_, done) in &staged {
                if done != path {
                    let _ = std::fs::remove_file(done);
                }
            }
            return Err(e.into());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn emit(
    out: &Option<PathBuf>,
    csv: String,
    config: &RunConfig,
    timing_ms: f64,
    certificate: Option<CertificateInfo>,
    details: Option<serde_json::Value>,
    extra_files: Vec<(PathBuf, String)>,
) -> Result<()> {
    match out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(path) => {
            let sidecar = Sidecar {
                tool: "htq",
                version: env!("CARGO_PKG_VERSION"),
                config,
                timing_ms,
                certificate,
                details,
            };
            let json = serde_json::to_string_pretty(&sidecar)
                .map_err(|e| Error::Internal(format!("metadata serialization failed: {e}")))?;
            let mut files = vec![
                (path.clone(), csv),
                (path.with_extension("json"), json + "\n"),
            ];
            files.extend(extra_files);
            write_all(&files)
        }
    }
}

fn build_discretization(
    mesh_spec: &MeshSpec,
    degrees: &DegreeSpec,
) -> Result<(TemporalMesh, DegreeVector, DofMap)> {
    let mesh = mesh_spec.build()?;
    let deg = degrees.build(mesh.n_elements())?;
    let dof = DofMap::build(&mesh, &deg)?;
    Ok((mesh, deg, dof))
}

/// Execute a command. I/O and configuration problems map to exit code 2 in
/// the binary, computational failures to 1.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    match cfg {
        RunConfig::Assemble {
            kind,
            mesh,
            degrees,
            k,
            out,
        } => {
            let (mesh_b, deg, dof) = build_discretization(mesh, degrees)?;
            let qcfg = if *k == 0 {
                QuadConfig::for_degrees(&deg)
            } else {
                QuadConfig::with_knob(deg.max_degree(), *k)
            };
            let global = assemble(*kind, &mesh_b, &deg, &dof, &qcfg)?;
            let details = serde_json::json!({
                "n_dofs": dof.n_global(),
                "breakpoints": mesh_b.breakpoints(),
                "degrees": deg.as_slice(),
                "orders": qcfg,
                "mesh_assumption_ok": mesh_b.mesh_assumption_ok(),
            });
            emit(
                out,
                matrix_csv(&global.mat),
                cfg,
                start.elapsed().as_secs_f64() * 1e3,
                None,
                Some(details),
                vec![],
            )
        }
        RunConfig::Oracle {
            kind,
            mesh,
            degrees,
            k_f,
            tol,
            accelerate,
            out,
        } => {
            let (mesh_b, deg, dof) = build_discretization(mesh, degrees)?;
            let scfg = SpectralConfig {
                k_f: *k_f,
                tol: *tol,
                accelerate: *accelerate,
            };
            let (mat, cert) = oracle_matrix(*kind, &mesh_b, &deg, &dof, &scfg)?;
            let details = serde_json::json!({
                "n_dofs": dof.n_global(),
                "breakpoints": mesh_b.breakpoints(),
                "degrees": deg.as_slice(),
            });
            emit(
                out,
                matrix_csv(&mat),
                cfg,
                start.elapsed().as_secs_f64() * 1e3,
                Some(CertificateInfo::from(&cert)),
                Some(details),
                vec![],
            )
        }
        RunConfig::QuadStudy {
            mesh,
            degrees,
            k_min,
            k_max,
            out,
        } => {
            if *k_min == 0 || k_max < k_min {
                return Err(Error::Config("need 1 <= k_min <= k_max".into()));
            }
            let (mesh_b, deg, dof) = build_discretization(mesh, degrees)?;
            let scfg = SpectralConfig::default();
            let mut references = Vec::new();
            let mut certs = Vec::new();
            for kind in [MatrixKind::M, MatrixKind::A, MatrixKind::B] {
                let (mat, cert) = oracle_matrix(kind, &mesh_b, &deg, &dof, &scfg)?;
                references.push(mat);
                certs.push(CertificateInfo::from(&cert));
            }
            let mut csv = String::from("K,errM,errA,errB\n");
            for k in *k_min..=*k_max {
                let qcfg = QuadConfig::with_knob(deg.max_degree(), k);
                write!(csv, "{k}").unwrap();
                for (kind, reference) in [MatrixKind::M, MatrixKind::A, MatrixKind::B]
                    .iter()
                    .zip(&references)
                {
                    let global = assemble(*kind, &mesh_b, &deg, &dof, &qcfg)?;
                    write!(csv, ",{:.16e}", global.mat.max_abs_diff(reference)).unwrap();
                }
                csv.push('\n');
            }
            let details = serde_json::json!({
                "n_dofs": dof.n_global(),
                "breakpoints": mesh_b.breakpoints(),
                "degrees": deg.as_slice(),
                "oracle_certificates": certs,
            });
            let plot = out
                .as_ref()
                .map(|p| (p.with_extension("py"), quad_study_plot_script(p)));
            emit(
                out,
                csv,
                cfg,
                start.elapsed().as_secs_f64() * 1e3,
                None,
                Some(details),
                plot.into_iter().collect(),
            )
        }
        RunConfig::Solve {
            kind,
            mu,
            f,
            study,
            horizon,
            mesh,
            degrees,
            p,
            sigma,
            n_max,
            k,
            out,
        } => {
            let problem = f.problem(*kind, *mu)?;
            match study {
                Some(study_kind) => {
                    let params = match study_kind {
                        StudyKind::H => {
                            let mut n_values = Vec::new();
                            let mut n = 2;
                            while n <= *n_max {
                                n_values.push(n);
                                n *= 2;
                            }
                            let mut sp = StudyParams::h_study(*horizon, n_values, *p);
                            sp.quad_k = *k;
                            sp
                        }
                        StudyKind::Hp => {
                            let mut sp = StudyParams::hp_study(*horizon, *n_max, *sigma);
                            sp.quad_k = *k;
                            sp
                        }
                    };
                    let rows = solver::run_study(&problem, &params)?;
                    let mut csv = String::from("N,M,L2,H1semi,bracket\n");
                    for r in &rows {
                        writeln!(
                            csv,
                            "{},{},{:.16e},{:.16e},{:.16e}",
                            r.n, r.m_dofs, r.l2, r.h1_semi, r.bracket
                        )
                        .unwrap();
                    }
                    let plot = out
                        .as_ref()
                        .map(|pp| (pp.with_extension("py"), study_plot_script(pp, *study_kind)));
                    emit(
                        out,
                        csv,
                        cfg,
                        start.elapsed().as_secs_f64() * 1e3,
                        None,
                        Some(serde_json::json!({ "params": params })),
                        plot.into_iter().collect(),
                    )
                }
                None => {
                    let mesh_spec = mesh.clone().ok_or_else(|| {
                        Error::Config("solve without --study needs a mesh".into())
                    })?;
                    let deg_spec = degrees.clone().ok_or_else(|| {
                        Error::Config("solve without --study needs degrees".into())
                    })?;
                    let (mesh_b, deg, dof) = build_discretization(&mesh_spec, &deg_spec)?;
                    let (sol, norms) = solver::solve_level(&problem, &mesh_b, &deg, *k)?;
                    let mut csv = String::from("index,coefficient\n");
                    for (i, c) in sol.coeffs.iter().enumerate() {
                        writeln!(csv, "{},{:.16e}", i + 1, c).unwrap();
                    }
                    let details = serde_json::json!({
                        "n_dofs": dof.n_global(),
                        "residual": sol.residual,
                        "norms": norms,
                    });
                    emit(
                        out,
                        csv,
                        cfg,
                        start.elapsed().as_secs_f64() * 1e3,
                        None,
                        Some(details),
                        vec![],
                    )
                }
            }
        }
        RunConfig::Rules { kind, k, out } => {
            let rule = match kind.as_str() {
                "legendre" => gauss_legendre(*k)?,
                "log" => gauss_log(*k)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown rule kind '{other}' (expected legendre or log)"
                    )))
                }
            };
            let mut csv = String::from("node,weight\n");
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                writeln!(csv, "{x:.17e},{w:.17e}").unwrap();
            }
            let details = serde_json::json!({
                "weight_kind": match rule.weight_kind {
                    WeightKind::Legendre => "legendre",
                    WeightKind::LogJacobi => "log",
                },
                "order": rule.order,
            });
            emit(
                out,
                csv,
                cfg,
                start.elapsed().as_secs_f64() * 1e3,
                None,
                Some(details),
                vec![],
            )
        }
    }
}

/// Re-execute a run from its metadata sidecar.
pub fn rerun(meta_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(meta_path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("unreadable metadata: {e}")))?;
    let config = value
        .get("config")
        .ok_or_else(|| Error::Config("metadata has no config field".into()))?;
    let cfg: RunConfig = serde_json::from_value(config.clone())
        .map_err(|e| Error::Config(format!("unusable config in metadata: {e}")))?;
    execute(&cfg)
}

fn quad_study_plot_script(csv_path: &Path) -> String {
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("study.csv");
    format!(
        r#"#!/usr/bin/env python3
"""Max-norm assembly error against the spectral reference, per Gauss order."""
import csv
import matplotlib.pyplot as plt

ks, errs = [], {{"M": [], "A": [], "B": []}}
with open("{name}") as fh:
    for row in csv.DictReader(fh):
        ks.append(int(row["K"]))
        errs["M"].append(float(row["errM"]))
        errs["A"].append(float(row["errA"]))
        errs["B"].append(float(row["errB"]))

for label, marker in (("M", "o"), ("A", "s"), ("B", "^")):
    plt.semilogy(ks, errs[label], marker=marker, label=label)
plt.xlabel("Gauss-Legendre order K")
plt.ylabel("max-norm error vs spectral reference")
plt.legend()
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig("{stem}.png", dpi=150)
"#,
        name = name,
        stem = csv_path
            .file_stem()
            .and_then(|n| n.to_str())
            .unwrap_or("study"),
    )
}

fn study_plot_script(csv_path: &Path, kind: StudyKind) -> String {
    let name = csv_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("study.csv");
    let (xexpr, xlabel) = match kind {
        StudyKind::Hp => ("m ** 0.5", "sqrt(M)"),
        StudyKind::H => ("m", "degrees of freedom M"),
    };
    format!(
        r#"#!/usr/bin/env python3
"""Bracket-norm error per refinement level."""
import csv
import matplotlib.pyplot as plt

xs, ys = [], []
with open("{name}") as fh:
    for row in csv.DictReader(fh):
        m = float(row["M"])
        xs.append({xexpr})
        ys.append(float(row["bracket"]))

plt.semilogy(xs, ys, "o-")
plt.xlabel("{xlabel}")
plt.ylabel("bracket-norm error")
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
plt.savefig("{stem}.png", dpi=150)
"#,
        name = name,
        xexpr = xexpr,
        xlabel = xlabel,
        stem = csv_path
            .file_stem()
            .and_then(|n| n.to_str())
            .unwrap_or("study"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_parsers() {
        assert_eq!(
            DegreeSpec::parse_compact("uniform:3").unwrap(),
            DegreeSpec::Uniform { p: 3 }
        );
        assert_eq!(
            DegreeSpec::parse_compact("linear").unwrap(),
            DegreeSpec::Linear
        );
        assert_eq!(
            DegreeSpec::parse_compact("list:1,2,3").unwrap(),
            DegreeSpec::List { p: vec![1, 2, 3] }
        );
        assert!(DegreeSpec::parse_compact("cubic").is_err());

        assert_eq!(RhsSpec::parse_compact("one").unwrap(), RhsSpec::One);
        assert!(matches!(
            RhsSpec::parse_compact("poly:1,0,2").unwrap(),
            RhsSpec::Poly { .. }
        ));
        assert!(RhsSpec::parse_compact("step").is_err());
    }

    #[test]
    fn run_config_roundtrips_through_json() {
        let cfg = RunConfig::Assemble {
            kind: MatrixKind::M,
            mesh: MeshSpec::parse_compact("uniform:4", 1.0).unwrap(),
            degrees: DegreeSpec::Uniform { p: 1 },
            k: 12,
            out: None,
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        let json2 = serde_json::to_string(&back).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn t34_preset_is_parabolic_only() {
        assert!(RhsSpec::T34.problem(OdeKind::Hyperbolic, 0.0).is_err());
        let p = RhsSpec::T34.problem(OdeKind::Parabolic, 2.0).unwrap();
        // f(1) = 3/4 + mu
        assert!(((p.f)(1.0) - 2.75).abs() < 1e-15);
        let u = p.u_exact.unwrap();
        assert!((u(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_one_preset_solution_satisfies_ode() {
        let p = RhsSpec::One.problem(OdeKind::Hyperbolic, 4.0).unwrap();
        let u = p.u_exact.unwrap();
        // u'' + 4 u = 1 via finite differences
        let h = 1e-5;
        for t in [0.3, 0.9] {
            let upp = (u(t + h) - 2.0 * u(t) + u(t - h)) / (h * h);
            assert!((upp + 4.0 * u(t) - 1.0).abs() < 1e-5);
        }
        assert!(u(0.0).abs() < 1e-15);
    }
}
