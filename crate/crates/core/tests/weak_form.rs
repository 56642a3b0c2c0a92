//! The weak-form identity exercised end to end: residual collapse under
//! joint space/time refinement, discrimination against a wrong candidate,
//! and the push-forward identity tying the two flow directions together.

use stochlab_core::drift::DriftField;
use stochlab_core::flow;
use stochlab_core::geom::AxisBox;
use stochlab_core::transport::{
    pairing, weak_residual_report, InitialDatum, QuadratureSpec, TestFunction, WeakSolution,
};
use stochlab_core::BrownianPath;

fn bump() -> InitialDatum<f64> {
    InitialDatum::radial_bump(vec![0.0, 0.0], 1.0, 1.0)
}

fn phi() -> TestFunction<f64> {
    TestFunction::new(vec![0.3, -0.2], 1.0, 1.0).unwrap()
}

fn quad(nodes: usize) -> QuadratureSpec<f64> {
    QuadratureSpec::new(AxisBox::centered_cube(3.0, 2).unwrap(), nodes).unwrap()
}

#[test]
fn residual_collapses_under_joint_refinement_and_flags_the_frozen_control() {
    let b = DriftField::shear(0.8, 2.0).unwrap();
    let coarse = BrownianPath::sample(500, 2, 1.0, 16).unwrap();
    let mid = coarse.refine();
    let fine = mid.refine();
    let ladder = [(coarse, 33usize), (mid, 65), (fine.clone(), 129)];

    let mut residuals = Vec::new();
    for (w, nodes) in &ladder {
        let ws = WeakSolution::representation(b.clone(), w.clone(), bump()).unwrap();
        let report = weak_residual_report(&ws, &phi(), 1.0, &quad(*nodes)).unwrap();
        residuals.push(report.residual.abs());
    }
    assert!(
        residuals[1] < residuals[0] && residuals[2] < residuals[1],
        "residuals {residuals:?}"
    );

    let control = WeakSolution::frozen_control(b, fine, bump()).unwrap();
    let control_res = weak_residual_report(&control, &phi(), 1.0, &quad(129))
        .unwrap()
        .residual
        .abs();
    assert!(
        control_res >= 10.0 * residuals[2],
        "control {control_res} vs solution {}",
        residuals[2]
    );
}

#[test]
fn forward_push_forward_equals_backward_pairing() {
    // integral of u0(y) phi(X_t(y)) dy = integral of u0(Y_t(x)) phi(x) dx
    // for measure-preserving flows; both sides discretized independently.
    let b = DriftField::shear(0.8, 2.0).unwrap();
    let w = BrownianPath::sample(501, 2, 1.0, 256).unwrap();
    let t = 0.75;
    let u0 = bump();
    let phi = phi();
    let q = quad(129);

    let grid = q.grid().unwrap();
    let mut lhs = 0.0;
    for (y, weight) in grid.iter() {
        let traj = flow::forward_flow(&b, &w, &y, 0.0, t).unwrap();
        lhs += weight * u0.evaluate(&y) * phi.value(traj.terminal_position());
    }

    let ws = WeakSolution::representation(b, w, u0).unwrap();
    let rhs = pairing(&ws, &phi, t, &q).unwrap();

    assert!((lhs - rhs).abs() <= 2e-3, "lhs {lhs} rhs {rhs}");
}
