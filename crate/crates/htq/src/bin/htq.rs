//! Thin command-line front end over the library's command layer.
//!
//! Exit codes: 0 on success, 1 on computational failure (singular systems,
//! non-converged oracle), 2 on usage or I/O problems. `HTQ_THREADS` caps the
//! worker pool used for parallel assembly.

use clap::{Args, Parser, Subcommand};
use htq::cli::{self, DegreeSpec, RhsSpec, RunConfig};
use htq::mesh::MeshSpec;
use htq::solver::{OdeKind, StudyKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "htq",
    version,
    about = "Temporal finite element matrices for the modified Hilbert transformation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Discretization {
    /// Mesh: uniform:N | geometric:N:SIGMA | dyadic:N | explicit:t0,t1,...
    #[arg(long)]
    mesh: String,
    /// Time horizon T
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Degrees: uniform:P | linear | list:p1,p2,...
    #[arg(long)]
    degrees: String,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a transform matrix as CSV (plus a JSON sidecar with --out).
    Assemble {
        /// Matrix kind: M | A | B
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        disc: Discretization,
        /// Gauss-Legendre order knob; 0 = defaults
        #[arg(long = "K", default_value_t = 0)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the spectral reference matrix with its convergence
    /// certificate.
    Oracle {
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        disc: Discretization,
        /// Number of directly summed Fourier modes
        #[arg(long = "KF", default_value_t = 4000)]
        k_f: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Disable the analytic tail summation (plain truncation)
        #[arg(long)]
        no_accelerate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the Gauss order K and report max-norm assembly errors against
    /// the spectral reference for all three matrices.
    QuadStudy {
        /// Mesh (defaults to the dyadic 6-element benchmark)
        #[arg(long, default_value = "dyadic:6")]
        mesh: String,
        #[arg(long = "T", default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value = "uniform:2")]
        degrees: String,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 20)]
        k_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a model ODE, either on one mesh or as an h/hp refinement study.
    Solve {
        /// Problem kind: parabolic | hyperbolic
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Right-hand side: one | poly:c0,c1,... | t34
        #[arg(long, default_value = "one")]
        f: String,
        /// Run a refinement study: h | hp
        #[arg(long)]
        study: Option<String>,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        /// Mesh for single solves (ignored by studies)
        #[arg(long)]
        mesh: Option<String>,
        /// Degrees for single solves (ignored by studies)
        #[arg(long)]
        degrees: Option<String>,
        /// Uniform degree for h-studies
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Grading parameter for hp-studies
        #[arg(long, default_value_t = 0.17)]
        sigma: f64,
        /// Largest element count of a study
        #[arg(long = "Nmax", default_value_t = 10)]
        n_max: usize,
        #[arg(long = "K", default_value_t = 0)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadrature rule inspection.
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
    /// Repeat a run from its JSON metadata sidecar.
    Rerun { meta: PathBuf },
}

#[derive(Subcommand)]
enum RulesAction {
    /// Emit the nodes and weights of a rule as CSV.
    Dump {
        /// Rule kind: legendre | log
        #[arg(long)]
        kind: String,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn to_config(command: Command) -> Result<RunConfig, htq::Error> {
    Ok(match command {
        Command::Assemble { kind, disc, k, out } => RunConfig::Assemble {
            kind: kind.parse()?,
            mesh: MeshSpec::parse_compact(&disc.mesh, disc.horizon)?,
            degrees: DegreeSpec::parse_compact(&disc.degrees)?,
            k,
            out,
        },
        Command::Oracle {
            kind,
            disc,
            k_f,
            tol,
            no_accelerate,
            out,
        } => RunConfig::Oracle {
            kind: kind.parse()?,
            mesh: MeshSpec::parse_compact(&disc.mesh, disc.horizon)?,
            degrees: DegreeSpec::parse_compact(&disc.degrees)?,
            k_f,
            tol,
            accelerate: !no_accelerate,
            out,
        },
        Command::QuadStudy {
            mesh,
            horizon,
            degrees,
            k_min,
            k_max,
            out,
        } => RunConfig::QuadStudy {
            mesh: MeshSpec::parse_compact(&mesh, horizon)?,
            degrees: DegreeSpec::parse_compact(&degrees)?,
            k_min,
            k_max,
            out,
        },
        Command::Solve {
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
            let kind = match kind.as_str() {
                "parabolic" => OdeKind::Parabolic,
                "hyperbolic" => OdeKind::Hyperbolic,
                other => {
                    return Err(htq::Error::Config(format!(
                        "unknown problem kind '{other}'"
                    )))
                }
            };
            let study = match study.as_deref() {
                None => None,
                Some("h") => Some(StudyKind::H),
                Some("hp") => Some(StudyKind::Hp),
                Some(other) => {
                    return Err(htq::Error::Config(format!("unknown study kind '{other}'")))
                }
            };
            RunConfig::Solve {
                kind,
                mu,
                f: RhsSpec::parse_compact(&f)?,
                study,
                horizon,
                mesh: mesh
                    .map(|m| MeshSpec::parse_compact(&m, horizon))
                    .transpose()?,
                degrees: degrees.map(|d| DegreeSpec::parse_compact(&d)).transpose()?,
                p,
                sigma,
                n_max,
                k,
                out,
            }
        }
        Command::Rules {
            action: RulesAction::Dump { kind, k, out },
        } => RunConfig::Rules { kind, k, out },
        Command::Rerun { .. } => unreachable!("handled before conversion"),
    })
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HTQ_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("htq: ignoring unparsable HTQ_THREADS value '{threads}'");
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rerun { meta } => cli::rerun(&meta),
        other => to_config(other).and_then(|cfg| cli::execute(&cfg)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("htq: {e}");
            match e {
                htq::Error::Config(_) | htq::Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
