//! Assemble the three transform matrices on a small non-uniform mesh and
//! show the zero-trace submatrix relation.
//!
//! Run with `cargo run --release --example assemble_matrices`.

use htq::assembly::{assemble, MatrixKind, QuadConfig};
use htq::mesh::{DegreeVector, DofMap, TemporalMesh};

fn main() -> htq::Result<()> {
    let mesh = TemporalMesh::from_breakpoints(vec![0.0, 0.3, 0.7, 1.0])?;
    let deg = DegreeVector::from_vec(vec![2, 1, 2])?;
    let dof = DofMap::build(&mesh, &deg)?;
    let cfg = QuadConfig::for_degrees(&deg);
    println!(
        "mesh {:?}, degrees {:?}, M = {} global basis functions\n",
        mesh.breakpoints(),
        deg.as_slice(),
        dof.n_global()
    );

    for kind in [MatrixKind::M, MatrixKind::A, MatrixKind::B] {
        let global = assemble(kind, &mesh, &deg, &dof, &cfg)?;
        println!("{kind} matrix:");
        for i in 0..global.mat.rows() {
            let row: Vec<String> = global
                .mat
                .row(i)
                .iter()
                .map(|v| format!("{v:+.6e}"))
                .collect();
            println!("  [{}]", row.join(", "));
        }
        println!();
    }

    // the system matrices of the model problems drop the single basis
    // function with a nonzero value at t = 0, i.e. the first row and column
    let m = assemble(MatrixKind::M, &mesh, &deg, &dof, &cfg)?;
    let tilde = m.tilde();
    println!(
        "zero-trace M has shape {}x{} (trailing submatrix), entry (0,0) = {:+.6e}",
        tilde.rows(),
        tilde.cols(),
        tilde[(0, 0)]
    );
    Ok(())
}
