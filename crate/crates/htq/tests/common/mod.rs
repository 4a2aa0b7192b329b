//! Shared helpers for the integration suites.
//
// Each integration test target compiles this module independently and uses
// a different subset of it.
#![allow(dead_code)]

/// Deterministic splitmix64 generator.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.unit()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

/// Pearson correlation coefficient.
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

/// Exact `int_0^1 int_0^1 s^a t^b ln|s-t| ds dt` through beta-type integrals
/// and harmonic numbers (independent of every quadrature code path).
pub fn logtensor_monomial_exact(a: u32, b: u32) -> f64 {
    let harmonic = |n: u32| (1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
    let (af, bf) = (a as f64, b as f64);
    let d = af + bf + 2.0;
    -(1.0 / (af + 1.0) + 1.0 / (bf + 1.0)) / (d * d)
        - (harmonic(a + 1) / (af + 1.0) + harmonic(b + 1) / (bf + 1.0)) / d
}

/// Random mesh on `(0, T)` with a minimum relative element size, also
/// honoring the mesh assumption `max h <= T/2` of the convergence theory
/// (needs `n >= 3`).
pub fn random_mesh(rng: &mut Rng, n: usize, horizon: f64) -> htq::mesh::TemporalMesh {
    assert!(n >= 3);
    loop {
        let mut pts: Vec<f64> = (0..n - 1).map(|_| rng.uniform(0.05, 0.95)).collect();
        pts.push(0.0);
        pts.push(1.0);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if pts.windows(2).all(|w| w[1] - w[0] >= 0.05 && w[1] - w[0] <= 0.5) {
            let scaled: Vec<f64> = pts.iter().map(|p| p * horizon).collect();
            return htq::mesh::TemporalMesh::from_breakpoints(scaled).unwrap();
        }
    }
}
