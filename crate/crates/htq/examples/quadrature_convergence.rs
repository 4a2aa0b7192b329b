//! Exponential convergence of the assembly quadratures in the Gauss order
//! `K`, measured against the spectral reference on the benchmark
//! configuration (dyadic 6-element mesh, T = 10, quadratics).
//!
//! Run with `cargo run --release --example quadrature_convergence`.

use htq::assembly::{assemble, MatrixKind, QuadConfig};
use htq::mesh::{DegreeVector, DofMap, TemporalMesh};
use htq::spectral::{oracle_matrix, SpectralConfig};

fn main() -> htq::Result<()> {
    let mesh = TemporalMesh::dyadic(6, 10.0)?;
    let deg = DegreeVector::uniform(6, 2)?;
    let dof = DofMap::build(&mesh, &deg)?;
    let kinds = [MatrixKind::M, MatrixKind::A, MatrixKind::B];
    let references: Vec<_> = kinds
        .iter()
        .map(|&k| oracle_matrix(k, &mesh, &deg, &dof, &SpectralConfig::default()).unwrap().0)
        .collect();

    println!("{:>3}  {:>12}  {:>12}  {:>12}", "K", "errM", "errA", "errB");
    for k in 2..=20usize {
        let qcfg = QuadConfig::with_knob(deg.max_degree(), k);
        print!("{k:>3}");
        for (kind, reference) in kinds.iter().zip(&references) {
            let g = assemble(*kind, &mesh, &deg, &dof, &qcfg)?;
            print!("  {:>12.4e}", g.mat.max_abs_diff(reference));
        }
        println!();
    }
    println!(
        "\nAll log-weighted integrals are exact by construction, so the decay \
         isolates the Gauss-Legendre error; it reaches machine precision near \
         K = 12. The same table is produced by `htq quad-study`."
    );
    Ok(())
}
