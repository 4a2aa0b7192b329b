use super::*;
use crate::assembly::{assemble, QuadConfig};
use crate::spectral::{ht_pointwise_series, PolyPiece};

fn constant_one() -> ScalarFn {
    Arc::new(|_| 1.0)
}

fn setup(
    mesh: &TemporalMesh,
    deg: &DegreeVector,
) -> (DofMap, GlobalMatrix, GlobalMatrix, GlobalMatrix) {
    let dof = DofMap::build(mesh, deg).unwrap();
    let cfg = QuadConfig::for_degrees(deg);
    let m = assemble(MatrixKind::M, mesh, deg, &dof, &cfg).unwrap();
    let a = assemble(MatrixKind::A, mesh, deg, &dof, &cfg).unwrap();
    let b = assemble(MatrixKind::B, mesh, deg, &dof, &cfg).unwrap();
    (dof, m, a, b)
}

#[test]
fn system_matrix_combinations() {
    let mesh = TemporalMesh::uniform(3, 1.0).unwrap();
    let deg = DegreeVector::uniform(3, 2).unwrap();
    let (_, m, a, b) = setup(&mesh, &deg);

    let par0 = OdeProblem::new(OdeKind::Parabolic, 0.0, constant_one()).unwrap();
    let sys = build_system(&par0, &m, Some(&a), None).unwrap();
    assert_eq!(sys.max_abs_diff(&a.tilde()), 0.0);

    let hyp0 = OdeProblem::new(OdeKind::Hyperbolic, 0.0, constant_one()).unwrap();
    let sys = build_system(&hyp0, &m, None, Some(&b)).unwrap();
    assert_eq!(sys.max_abs_diff(&b.tilde().transpose()), 0.0);

    let par5 = OdeProblem::new(OdeKind::Parabolic, 5.0, constant_one()).unwrap();
    let sys5 = build_system(&par5, &m, Some(&a), None).unwrap();
    let mt = m.tilde();
    let at = a.tilde();
    for i in 0..sys5.rows() {
        for j in 0..sys5.cols() {
            let expect = at[(i, j)] + 5.0 * mt[(i, j)];
            assert!((sys5[(i, j)] - expect).abs() < 1e-15 * expect.abs().max(1.0));
        }
    }
    assert!(build_system(&par5, &m, None, None).is_err());
    assert!(OdeProblem::new(OdeKind::Parabolic, -1.0, constant_one()).is_err());
}

#[test]
fn projection_reproduces_polynomials() {
    let mesh = TemporalMesh::from_breakpoints(vec![0.0, 0.4, 1.0]).unwrap();
    let deg = DegreeVector::from_vec(vec![2, 3]).unwrap();
    let dof = DofMap::build(&mesh, &deg).unwrap();

    // f = 0
    let zero: ScalarFn = Arc::new(|_| 0.0);
    let c = project_rhs(&zero, &mesh, &deg, &dof).unwrap();
    assert!(c.iter().all(|&v| v == 0.0));

    // constants reproduce through the vertex modes only
    let c = project_rhs(&constant_one(), &mesh, &deg, &dof).unwrap();
    for l in 0..2 {
        assert!((c[dof.global(0, l)] - 1.0).abs() < 1e-13);
        assert!((c[dof.global(1, l)] - 1.0).abs() < 1e-13);
        for m in 2..=deg.degree(l) {
            assert!(c[dof.global(m, l)].abs() < 1e-13);
        }
    }

    // f(t) = t on a single quadratic element: coefficients (0, 1, 0)
    let mesh1 = TemporalMesh::uniform(1, 1.0).unwrap();
    let deg1 = DegreeVector::uniform(1, 2).unwrap();
    let dof1 = DofMap::build(&mesh1, &deg1).unwrap();
    let ident: ScalarFn = Arc::new(|t| t);
    let c = project_rhs(&ident, &mesh1, &deg1, &dof1).unwrap();
    assert!(c[0].abs() < 1e-13 && (c[1] - 1.0).abs() < 1e-13 && c[2].abs() < 1e-13);
}

#[test]
fn rhs_matches_direct_pairing_with_transform() {
    // F[i] = (f, H_T phi_{i+1}) for f(t) = t on a single quadratic element,
    // cross-checked by quadrature against the spectral pointwise evaluator
    let mesh = TemporalMesh::uniform(1, 1.0).unwrap();
    let deg = DegreeVector::uniform(1, 2).unwrap();
    let dof = DofMap::build(&mesh, &deg).unwrap();
    let cfg = QuadConfig::for_degrees(&deg);
    let m = assemble(MatrixKind::M, &mesh, &deg, &dof, &cfg).unwrap();
    let problem = OdeProblem::new(OdeKind::Parabolic, 0.0, Arc::new(|t| t)).unwrap();
    let rhs = build_rhs(&problem, &mesh, &deg, &dof, &m).unwrap();

    // basis functions on the single element as polynomial pieces
    let pieces = [
        PolyPiece {
            a: 0.0,
            b: 1.0,
            coeffs: vec![0.0, 1.0], // psi_2 = xi, global index 1
        },
        PolyPiece {
            a: 0.0,
            b: 1.0,
            coeffs: vec![0.0, -1.0, 1.0], // psi_3 = xi^2 - xi, global index 2
        },
    ];
    let gl = gauss_legendre(32).unwrap();
    for (idx, piece) in pieces.iter().enumerate() {
        let mut reference = 0.0;
        let panels = 24;
        for pnl in 0..panels {
            let lo = pnl as f64 / panels as f64;
            let hi = (pnl + 1) as f64 / panels as f64;
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let t = lo + (hi - lo) * x;
                let ht = ht_pointwise_series(std::slice::from_ref(piece), t, 1.0, 2000).unwrap();
                reference += w * (hi - lo) * t * ht;
            }
        }
        assert!(
            (rhs[idx] - reference).abs() <= 1e-9,
            "row {idx}: {} vs {reference}",
            rhs[idx]
        );
    }
}

#[test]
fn error_norms_analytic_case() {
    // the zero solution against u(t) = t on (0, 1)
    let mesh = TemporalMesh::uniform(2, 1.0).unwrap();
    let deg = DegreeVector::uniform(2, 1).unwrap();
    let dof = DofMap::build(&mesh, &deg).unwrap();
    let sol = DiscreteSolution {
        coeffs: vec![0.0; dof.n_global() - 1],
        mesh: mesh.clone(),
        deg: deg.clone(),
        dof,
        residual: 0.0,
    };
    let u: ScalarFn = Arc::new(|t| t);
    let du: ScalarFn = Arc::new(|_| 1.0);
    let norms = error_norms(&sol, &u, &du).unwrap();
    assert!((norms.l2 - 1.0 / 3.0f64.sqrt()).abs() < 1e-13);
    assert!((norms.h1_semi - 1.0).abs() < 1e-13);
    assert!((norms.bracket - (1.0 / 3.0f64).powf(0.25)).abs() < 1e-13);
}

#[test]
fn galerkin_reproduces_trial_space_solutions() {
    // parabolic, mu = 0, f = 1: u(t) = t lies in every trial space
    let u: ScalarFn = Arc::new(|t| t);
    let du: ScalarFn = Arc::new(|_| 1.0);
    let problem = OdeProblem::new(OdeKind::Parabolic, 0.0, constant_one())
        .unwrap()
        .with_exact(u, du);
    for (mesh, p) in [
        (TemporalMesh::uniform(4, 1.0).unwrap(), 1),
        (TemporalMesh::dyadic(5, 2.0).unwrap(), 2),
        (TemporalMesh::geometric(4, 1.0, 0.3).unwrap(), 3),
    ] {
        let deg = DegreeVector::uniform(mesh.n_elements(), p).unwrap();
        let (sol, norms) = solve_level(&problem, &mesh, &deg, 0).unwrap();
        let norms = norms.unwrap();
        assert!(sol.residual <= 1e-12, "residual {:.2e}", sol.residual);
        assert!(norms.bracket <= 1e-10, "bracket {:.2e}", norms.bracket);
        // the reconstruction vanishes at t = 0 by construction
        assert_eq!(sol.eval(0.0), 0.0);
    }

    // hyperbolic, mu = 0, f = 1: u(t) = t^2 / 2 needs p >= 2
    let u: ScalarFn = Arc::new(|t| 0.5 * t * t);
    let du: ScalarFn = Arc::new(|t| t);
    let problem = OdeProblem::new(OdeKind::Hyperbolic, 0.0, constant_one())
        .unwrap()
        .with_exact(u, du);
    for (mesh, p) in [
        (TemporalMesh::uniform(3, 1.0).unwrap(), 2),
        (TemporalMesh::dyadic(4, 2.0).unwrap(), 3),
    ] {
        let deg = DegreeVector::uniform(mesh.n_elements(), p).unwrap();
        let (_, norms) = solve_level(&problem, &mesh, &deg, 0).unwrap();
        assert!(norms.unwrap().bracket <= 1e-9);
    }
}

#[test]
fn damped_parabolic_errors_decrease() {
    // mu = 10, f = 1: u(t) = (1 - e^{-10 t}) / 10
    let mu = 10.0;
    let u: ScalarFn = Arc::new(move |t| (1.0 - (-mu * t).exp()) / mu);
    let du: ScalarFn = Arc::new(move |t| (-mu * t).exp());
    let problem = OdeProblem::new(OdeKind::Parabolic, mu, constant_one())
        .unwrap()
        .with_exact(u, du);
    let params = StudyParams::h_study(1.0, vec![2, 4, 8, 16], 2);
    let rows = run_study(&problem, &params).unwrap();
    for w in rows.windows(2) {
        assert!(
            w[1].bracket < w[0].bracket,
            "errors not decreasing: {} -> {}",
            w[0].bracket,
            w[1].bracket
        );
    }
}

#[test]
fn correlation_of_exact_line_is_minus_one() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys = [8.0, 6.0, 4.0, 2.0];
    assert!((correlation(&xs, &ys) + 1.0).abs() < 1e-14);
}
