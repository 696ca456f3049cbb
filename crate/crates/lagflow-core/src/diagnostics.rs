//! Runtime verification of the a priori estimates.
//!
//! The continuum theory guarantees, for admissible data: preservation of the
//! pointwise `du/dt` bounds, an eigenvalue straddle window obtained by
//! inverting the operator level set (at every point the smallest Hessian
//! eigenvalue stays below `mu` and the largest above `omega`), strict
//! obliqueness of the boundary condition, and decay of the `du/dt`
//! oscillation.  The `EstimateLedger` freezes the bounds from the initial
//! data and re-checks every recorded step against them, logging violations
//! instead of silently accepting a run that left the regime the theory
//! covers.

use crate::flow::{Flow, FlowState, StepReport};
use crate::operators::Tau;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(
        "operator level {level} is outside the attainable range ({lo}, {hi}); \
         no eigenvalue window exists"
    )]
    LevelOutOfRange { level: f64, lo: f64, hi: f64 },
    #[error("boundary Hessian at node ({i},{j}) is not invertible; obliqueness identity undefined")]
    SingularHessian { i: u32, j: u32 },
}

/// Pre-flight gate: the estimates only hold when the forcing is concave and
/// small against the operator's range and the initial data honours the
/// boundary condition to grid accuracy.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    /// Room between the initial operator values and the range endpoints.
    pub delta_max: f64,
    pub osc_f: f64,
    pub df_max: f64,
    pub df_threshold: f64,
    pub concave_ok: bool,
    pub initial_bc_residual: f64,
    pub min_operator_value: f64,
    pub max_operator_value: f64,
    pub admissible: bool,
}

pub fn check_admissibility(flow: &Flow, state: &FlowState) -> AdmissibilityReport {
    let grid = flow.grid();
    let op = flow.operator();
    let floor = op.spectral_floor();
    let mut min_f = f64::INFINITY;
    let mut max_f = f64::NEG_INFINITY;
    let mut s1_obs = f64::NEG_INFINITY;
    let mut evaluable = true;
    for &k in grid.interior() {
        let hm = flow.interior_hessian(&state.u, k as usize);
        let (l1, l2) = hm.eigenvalues();
        if l1 <= floor {
            evaluable = false;
            break;
        }
        let v = op.phi(l1) + op.phi(l2);
        min_f = min_f.min(v);
        max_f = max_f.max(v);
        // Running max of the *smaller* eigenvalue: at every node some
        // eigenvalue is <= s1_obs, so the gradient trace is >= dphi(s1_obs).
        s1_obs = s1_obs.max(l1);
    }
    if !evaluable {
        min_f = f64::NAN;
        max_f = f64::NAN;
    }
    let (range_lo, range_hi) = op.endpoints(2);
    let delta_max = (range_hi - max_f).min(min_f - range_lo);

    let forcing = flow.forcing();
    let osc_f = forcing.osc_over(grid.omega());
    let df_max = forcing.grad_norm_max();
    // Structure bound: Lambda_1 is the floor of sum_i dF/dlambda_i at the
    // observed eigenvalue ceiling, theta the uniform convexity of the target
    // and the gradient bound is taken over the target boundary.
    let lambda1 = op.dphi(s1_obs);
    let theta = flow.target().theta();
    let (_, grad_hi) = flow.target().boundary_grad_bounds();
    let df_threshold = theta * lambda1 / (2.0 * grad_hi);

    let initial_bc_residual = flow.boundary_residual(&state.u);
    let h = grid.spacing();
    let concave_ok = forcing.is_concave();
    let bc_ok = initial_bc_residual < 10.0 * h;
    let df_ok = df_max < df_threshold;
    // A spatially constant forcing (osc 0) shifts the flow by a gauge and is
    // always tolerable, even when the data already exhausts the operator
    // range; otherwise the oscillation must fit strictly inside the room.
    let oscillation_ok = (osc_f == 0.0 && delta_max.is_finite()) || osc_f < delta_max;
    let admissible = concave_ok && bc_ok && df_ok && oscillation_ok;

    AdmissibilityReport {
        delta_max,
        osc_f,
        df_max,
        df_threshold,
        concave_ok,
        initial_bc_residual,
        min_operator_value: min_f,
        max_operator_value: max_f,
        admissible,
    }
}

/// Pointwise extremes of `du/dt = F[D^2 u] - f` over interior nodes.
pub fn udot_bounds(flow: &Flow, state: &FlowState) -> (f64, f64) {
    let grid = flow.grid();
    let op = flow.operator();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &k in grid.interior() {
        let k = k as usize;
        let hm = flow.interior_hessian(&state.u, k);
        let (l1, l2) = hm.eigenvalues();
        let (i, j) = grid.coords(k);
        let v = op.phi(l1) + op.phi(l2) - flow.forcing().eval(grid.node_pos(i, j));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Hessian eigenvalue extremes over interior nodes.
pub fn c2_pinch(flow: &Flow, state: &FlowState) -> (f64, f64) {
    let grid = flow.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &k in grid.interior() {
        let (l1, l2) = flow.interior_hessian(&state.u, k as usize).eigenvalues();
        lo = lo.min(l1);
        hi = hi.max(l2);
    }
    (lo, hi)
}

/// Equal-eigenvalue inversions of the operator level bounds.  The estimate
/// they encode is a straddle, not a containment: at every point the smallest
/// Hessian eigenvalue is `<= mu` and the largest is `>= omega` (so
/// `omega <= mu` whenever the level bounds are ordered).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenWindow {
    pub mu: f64,
    pub omega: f64,
}

fn invert_level(op: &Tau, level: f64) -> f64 {
    // Solve 2 phi(s) = level for the equal-eigenvalue spectrum by bisection;
    // phi is strictly increasing so the root is unique.
    let f = |s: f64| 2.0 * op.phi(s) - level;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut grow = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Invert the operator level bounds into the eigenvalue straddle window:
/// `mu` solves `2 phi(mu) = level_hi`, `omega` solves `2 phi(omega) = level_lo`.
/// Since `2 phi(min eig) <= level <= 2 phi(max eig)` pointwise and the levels
/// stay inside the frozen bounds, every node has `min eig <= mu` and
/// `max eig >= omega`.  Both levels must lie strictly inside the attainable
/// range `(2 phi(0), 2 phi_inf)`.
pub fn eigenvalue_window(
    op: &Tau,
    level_lo: f64,
    level_hi: f64,
) -> Result<EigenWindow, DiagnosticsError> {
    let (lo, hi) = op.endpoints(2);
    for level in [level_lo, level_hi] {
        if !(level > lo && level < hi) {
            return Err(DiagnosticsError::LevelOutOfRange { level, lo, hi });
        }
    }
    Ok(EigenWindow {
        mu: invert_level(op, level_hi),
        omega: invert_level(op, level_lo),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ObliquenessReport {
    /// Minimum of `<Dh(Du), nu> / |Dh(Du)|` over boundary nodes.
    pub min_chi: f64,
    /// Largest defect of the identity
    /// `<Dh(Du), nu> = sqrt( nu^T (D^2u)^{-1} nu * Dh^T (D^2u) Dh )`.
    pub max_identity_residual: f64,
}

pub fn obliqueness(flow: &Flow, state: &FlowState) -> Result<ObliquenessReport, DiagnosticsError> {
    let grid = flow.grid();
    let mut min_chi = f64::INFINITY;
    let mut max_res = 0.0f64;
    for (b, node) in grid.boundary().iter().enumerate() {
        let du = flow.boundary_gradient(&state.u, b);
        let hb = flow.boundary_hessian(&state.u, b);
        let beta = flow.target().h_grad(du);
        let nu = node.proj.inward_normal;
        let dot = beta[0] * nu[0] + beta[1] * nu[1];
        let norm = beta[0].hypot(beta[1]);
        if norm > 0.0 {
            min_chi = min_chi.min(dot / norm);
        }
        let hinv = hb.inverse().ok_or(DiagnosticsError::SingularHessian {
            i: node.i,
            j: node.j,
        })?;
        let q1 = hinv.quad(nu);
        let q2 = hb.quad(beta);
        if q1 <= 0.0 || q2 <= 0.0 {
            return Err(DiagnosticsError::SingularHessian {
                i: node.i,
                j: node.j,
            });
        }
        max_res = max_res.max((dot - (q1 * q2).sqrt()).abs());
    }
    Ok(ObliquenessReport {
        min_chi,
        max_identity_residual: max_res,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LedgerRow {
    pub t: f64,
    pub dt: f64,
    pub c_estimate: f64,
    pub osc_udot: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub mu: f64,
    pub omega: f64,
    pub obliq_min: f64,
    pub obliq_identity_residual: f64,
    pub bc_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub t: f64,
    pub estimate: &'static str,
    pub detail: String,
}

/// Frozen initial bounds plus the record/check loop.
#[derive(Debug, Clone)]
pub struct EstimateLedger {
    pub udot_lo: f64,
    pub udot_hi: f64,
    pub window: Option<EigenWindow>,
    slack: f64,
    prev_osc: Option<f64>,
    pub rows: Vec<LedgerRow>,
    pub violations: Vec<Violation>,
}

pub const CSV_HEADER: &str =
    "t,dt,c_estimate,osc_udot,min_eig,max_eig,mu,omega,obliq_min,obliq_identity_residual,bc_residual";

impl EstimateLedger {
    /// Freeze the bounds from the (boundary-enforced) initial state.
    pub fn new(flow: &Flow, state0: &FlowState) -> Self {
        let (lo, hi) = udot_bounds(flow, state0);
        let (f_lo, f_hi) = flow.forcing().extremes_over(flow.grid().omega());
        let window = eigenvalue_window(flow.operator(), lo + f_lo, hi + f_hi).ok();
        let h = flow.grid().spacing();
        EstimateLedger {
            udot_lo: lo,
            udot_hi: hi,
            window,
            // Discretisation headroom for checks of continuum statements.
            slack: 1e-9 + 10.0 * h * h,
            prev_osc: None,
            rows: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn violation(&mut self, t: f64, estimate: &'static str, detail: String) {
        self.violations.push(Violation {
            t,
            estimate,
            detail,
        });
    }

    pub fn record(&mut self, flow: &Flow, state: &FlowState, report: &StepReport) {
        let (mu, omega) = match self.window {
            Some(w) => (w.mu, w.omega),
            None => (f64::NAN, f64::NAN),
        };
        let identity_residual = match obliqueness(flow, state) {
            Ok(r) => r.max_identity_residual,
            Err(e) => {
                self.violation(report.t, "obliqueness-identity", e.to_string());
                f64::NAN
            }
        };
        let row = LedgerRow {
            t: report.t,
            dt: report.dt,
            c_estimate: report.c_estimate,
            osc_udot: report.osc_udot,
            min_eig: report.min_eig,
            max_eig: report.max_eig,
            mu,
            omega,
            obliq_min: report.min_obliqueness,
            obliq_identity_residual: identity_residual,
            bc_residual: report.bc_residual,
        };

        if row.c_estimate < self.udot_lo - self.slack || row.c_estimate > self.udot_hi + self.slack
        {
            self.violation(
                row.t,
                "udot-bounds",
                format!(
                    "c_estimate {} outside [{}, {}]",
                    row.c_estimate, self.udot_lo, self.udot_hi
                ),
            );
        }
        if let Some(w) = self.window {
            if row.min_eig > w.mu + self.slack {
                self.violation(
                    row.t,
                    "eigenvalue-window-min",
                    format!("min_eig {} above mu {}", row.min_eig, w.mu),
                );
            }
            if row.max_eig < w.omega - self.slack {
                self.violation(
                    row.t,
                    "eigenvalue-window-max",
                    format!("max_eig {} below omega {}", row.max_eig, w.omega),
                );
            }
        }
        if let Some(prev) = self.prev_osc {
            let allowed = prev * (1.0 + 1e-3) + 1e-12;
            if row.osc_udot > allowed {
                self.violation(
                    row.t,
                    "osc-monotone",
                    format!("osc grew from {prev} to {}", row.osc_udot),
                );
            }
        }
        self.prev_osc = Some(row.osc_udot);
        if !(row.obliq_min > 0.0) {
            self.violation(
                row.t,
                "obliqueness-sign",
                format!("min obliqueness {}", row.obliq_min),
            );
        }
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.dt,
                r.c_estimate,
                r.osc_udot,
                r.min_eig,
                r.max_eig,
                r.mu,
                r.omega,
                r.obliq_min,
                r.obliq_identity_residual,
                r.bc_residual
            )?;
        }
        Ok(())
    }
}
