//! The quadrature toolbox: Gauss-Legendre, the log-weight rule, and the
//! combined tensor identity for `ln|s - t|` kernels.
//!
//! Run with `cargo run --release --example quadrature_rules`.

use htq::quadrature::{gauss_legendre, gauss_log, logtensor_apply, tensor_apply};

fn main() -> htq::Result<()> {
    let lg = gauss_log(6)?;
    println!("log-weight rule, K = 6 (integrates -ln t exactly against degree <= 11):");
    for (x, w) in lg.nodes.iter().zip(&lg.weights) {
        println!("  node {x:.15}  weight {w:.15}");
    }
    // -int t^5 ln t dt = 1/36
    let v = lg.apply(|t| t.powi(5));
    println!("  -int t^5 ln t dt = {v:.15} (exact 1/36 = {:.15})\n", 1.0 / 36.0);

    let gl = gauss_legendre(8)?;
    let v = tensor_apply(&gl, &gl, |s, t| (s * t).cos());
    println!("tensor Gauss on cos(s t): {v:.15}");

    // int int ln|s - t| ds dt = -3/2, reproduced by the combined rule at
    // every order
    for k in [1usize, 2, 4, 8] {
        let v = logtensor_apply(k, |_, _| 1.0)?;
        println!("log-kernel tensor rule, K = {k}: int int ln|s-t| = {v:.15}");
    }
    Ok(())
}
