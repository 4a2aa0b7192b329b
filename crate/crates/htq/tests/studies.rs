//! Refinement-study invariants beyond the acceptance criteria: high-degree
//! h-refinement keeps the regularity-limited rate, and the hp driver
//! produces the expected discretizations.

use htq::mesh::{DegreeVector, TemporalMesh};
use htq::solver::{run_study, OdeKind, OdeProblem, StudyKind, StudyParams};
use std::sync::Arc;

fn t34_problem() -> OdeProblem {
    OdeProblem::new(
        OdeKind::Parabolic,
        0.0,
        Arc::new(|t: f64| if t <= 0.0 { 0.0 } else { 0.75 * t.powf(-0.25) }),
    )
    .unwrap()
    .with_exact(
        Arc::new(|t: f64| t.powf(0.75)),
        Arc::new(|t: f64| if t <= 0.0 { 0.0 } else { 0.75 * t.powf(-0.25) }),
    )
}

#[test]
fn high_degree_h_refinement_stays_regularity_limited() {
    // raising the degree cannot beat the solution's regularity: the bracket
    // rate stays in the same window as for p = 2
    let params = StudyParams::h_study(1.0, vec![4, 8, 16, 32], 10);
    let rows = run_study(&t34_problem(), &params).unwrap();
    let rates: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[0].bracket / w[1].bracket).ln() / 2f64.ln())
        .collect();
    for rate in rates.iter().rev().take(2) {
        assert!(
            (0.6..=0.9).contains(rate),
            "p = 10 observed rate {rate:.4}; all {rates:?}"
        );
    }
}

#[test]
fn hp_driver_builds_graded_meshes_with_linear_degrees() {
    let params = StudyParams::hp_study(2.0, 6, 0.17);
    assert_eq!(params.kind, StudyKind::Hp);
    assert_eq!(params.n_values, vec![2, 3, 4, 5, 6]);
    // the discretization the driver uses at level N
    let mesh = TemporalMesh::geometric(6, 2.0, 0.17).unwrap();
    let deg = DegreeVector::linear(6).unwrap();
    assert_eq!(deg.as_slice(), &[1, 2, 3, 4, 5, 6]);
    assert!((mesh.breakpoints()[1] - 2.0 * 0.17f64.powi(5)).abs() < 1e-15);
    let rows = run_study(&t34_problem(), &params).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].m_dofs, 4);
    assert_eq!(rows[4].m_dofs, 22);
    // measured on meshes produced by the driver itself
    assert!(rows[4].bracket < rows[0].bracket);
}
