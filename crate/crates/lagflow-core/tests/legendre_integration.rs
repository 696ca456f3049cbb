//! Legendre-transform checks on states produced by the flow, not just on
//! closed-form fields.

use lagflow_core::{
    build_grid, dual_flow_residual, gradient_reciprocity, involution_defect, legendre_transform,
    run_experiment, ConvexDomain, ExperimentConfig, FlowState, ForcingFunction, InitialData,
    Outcome, Tau,
};
use std::f64::consts::FRAC_PI_2;

fn disc(r: f64) -> ConvexDomain {
    ConvexDomain::disc([0.0, 0.0], r).unwrap()
}

#[test]
fn converged_forcing_run_satisfies_the_dual_equation() {
    let h = 1.0 / 32.0;
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        tau: FRAC_PI_2,
        spacing: h,
        cfl: 0.9,
        tol_c: 1e-6,
        tol_bc: 1e-10,
        t_max: 10.0,
        record_every: 100,
        kappa: [0.02, 0.0],
        initial: InitialData::Quadratic,
        seed: 0,
        threads: 1,
        omega: disc(1.0),
        omega_tilde: disc(1.0),
        output_dir: dir.path().to_path_buf(),
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.outcome, Outcome::Converged);

    let src = build_grid(cfg.omega, h).unwrap();
    let dst = build_grid(cfg.omega_tilde, h).unwrap();
    let state = lagflow_core::load_state(report.state_path.as_ref().unwrap(), &src).unwrap();
    let dual = legendre_transform(&src, &state.u, &dst, state.t);
    let op = Tau::new(cfg.tau).unwrap();
    let (sup, count) = dual_flow_residual(
        &op,
        &ForcingFunction::Linear { kappa: cfg.kappa },
        &src,
        &state.u,
        &dst,
        &dual,
    );
    assert!(count > 100, "dual residual checked on too few nodes: {count}");
    assert!(sup < 10.0 * h, "dual flow residual {sup} at h = {h}");
}

#[test]
fn anisotropic_affine_state_has_matrix_inverse_dual() {
    // Du = (x/2, y) maps the (2,1) ellipse onto the unit disc; the conjugate
    // of (x^2/4 + y^2/2) + l.x is quadratic with the inverse Hessian.
    let h = 1.0 / 24.0;
    let src = build_grid(ConvexDomain::ellipse([0.0, 0.0], [2.0, 1.0]).unwrap(), h).unwrap();
    let dst = build_grid(disc(1.0), h).unwrap();
    let st = FlowState::from_fn(&src, |p| 0.25 * p[0] * p[0] + 0.5 * p[1] * p[1]);
    let dual = legendre_transform(&src, &st.u, &dst, 0.0);

    let (inv, n_inv) = involution_defect(&src, &st.u, &dst, &dual);
    assert!(n_inv > 100);
    assert!(inv < 10.0 * h * h, "involution defect {inv}");

    let (rec, n_rec) = gradient_reciprocity(&src, &st.u, &dst, &dual);
    assert!(n_rec > 100);
    assert!(rec < 10.0 * h, "reciprocity defect {rec}");

    // Closed form: conjugate of x^2/4 + y^2/2 is y1^2 + y2^2/2.
    let mut worst = 0.0f64;
    for j in 0..dst.ny() {
        for i in 0..dst.nx() {
            let k = dst.flat(i, j);
            if !dual.valid[k] {
                continue;
            }
            let y = dst.node_pos(i, j);
            let exact = y[0] * y[0] + 0.5 * y[1] * y[1];
            worst = worst.max((exact - dual.values[k]).abs());
        }
    }
    assert!(worst < h * h, "closed-form conjugate defect {worst}");
}

#[test]
fn bump_state_involution_tightens_after_convergence() {
    // Before the flow: the bump leaves an O(1)-curvature wrinkle, and the
    // involution defect still obeys the O(h^2) bound.  After convergence the
    // state is numerically quadratic and the defect drops further.
    let h = 1.0 / 32.0;
    let dir = tempfile::tempdir().unwrap();
    let src = build_grid(disc(1.0), h).unwrap();
    let dst = build_grid(disc(1.0), h).unwrap();

    let before = FlowState::from_fn(&src, |p| {
        let r2 = p[0] * p[0] + p[1] * p[1];
        0.5 * r2 + 0.05 * (-r2 / 0.08).exp()
    });
    let u0 = dir.path().join("u0.txt");
    lagflow_core::save_state(&u0, &src, &before).unwrap();
    let dual_before = legendre_transform(&src, &before.u, &dst, 0.0);
    let (inv_before, n_before) = involution_defect(&src, &before.u, &dst, &dual_before);
    assert!(n_before > 100);
    assert!(inv_before < 10.0 * h * h, "pre-flow involution {inv_before}");

    let cfg = ExperimentConfig {
        tau: FRAC_PI_2,
        spacing: h,
        cfl: 0.9,
        tol_c: 1e-5,
        tol_bc: 1e-10,
        t_max: 10.0,
        record_every: 100,
        kappa: [0.0, 0.0],
        initial: InitialData::File(u0),
        seed: 0,
        threads: 1,
        omega: disc(1.0),
        omega_tilde: disc(1.0),
        output_dir: dir.path().to_path_buf(),
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.outcome, Outcome::Converged);
    let after = lagflow_core::load_state(report.state_path.as_ref().unwrap(), &src).unwrap();
    let dual_after = legendre_transform(&src, &after.u, &dst, after.t);
    let (inv_after, n_after) = involution_defect(&src, &after.u, &dst, &dual_after);
    assert!(n_after > 100);
    assert!(
        inv_after < 0.5 * inv_before.max(1e-9),
        "involution did not tighten: {inv_before} -> {inv_after}"
    );
}
