//! Pointwise application of the transform to a compactly supported piecewise
//! polynomial, two ways: the weakly singular integral representation and the
//! certified spectral series.
//!
//! Run with `cargo run --release --example pointwise_transform`.

use htq::spectral::{ht_apply_spectral, ht_pointwise_integral, ht_pointwise_series, PolyPiece};

fn main() -> htq::Result<()> {
    let horizon = 1.0;
    // hat function on [0.25, 0.5]
    let hat = [
        PolyPiece {
            a: 0.25,
            b: 0.375,
            coeffs: vec![0.0, 1.0],
        },
        PolyPiece {
            a: 0.375,
            b: 0.5,
            coeffs: vec![1.0, -1.0],
        },
    ];
    println!("transform of a hat function supported on [0.25, 0.5]:");
    println!("{:>6}  {:>22}  {:>22}  {:>10}", "t", "integral form", "spectral series", "diff");
    for t in [0.1, 0.25, 0.37, 0.5, 0.55, 0.9] {
        let integral: f64 = hat
            .iter()
            .map(|p| ht_pointwise_integral(p, t, horizon).unwrap())
            .sum();
        let series = ht_pointwise_series(&hat, t, horizon, 4000)?;
        println!(
            "{t:>6.3}  {integral:>22.15}  {series:>22.15}  {:>10.2e}",
            (integral - series).abs()
        );
    }

    // the transform maps each sine mode to the matching cosine mode
    let coeffs = [0.0, 0.0, 1.0]; // third sine mode
    let t = 0.4;
    let lam = htq::spectral::lambda(2, horizon);
    println!(
        "\nsingle sine mode k = 2 at t = {t}: H_T value {:.15}, cos(lambda_2 t) = {:.15}",
        ht_apply_spectral(&coeffs, t, horizon),
        (lam * t).cos()
    );
    Ok(())
}
