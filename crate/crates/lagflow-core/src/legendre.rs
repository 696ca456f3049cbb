//! Discrete Legendre transform and the dual-equation diagnostics.
//!
//! The transform is the exact discrete supremum
//! `u~(y) = max_x [ x . y - u(x) ]` over all non-exterior source nodes.
//! A dual value is trusted ("valid") only when its maximizer sits deep in
//! the source grid — an interior node whose full nine-point neighbourhood is
//! interior — since a maximizer pressed against the sampled hull means the
//! true supremum lives outside the data.
//!
//! Under the flow `u_t = F[D^2 u] - f`, the transform satisfies the dual
//! evolution with the reflected operator `G(mu) = -F(1/mu)` and the forcing
//! moved to the gradient slot: at a dual node `y` with maximizer `x*`,
//!
//! `u_t(x*) + G(lambda(D^2 u~)(y)) + f(Du~(y)) = 0`,
//!
//! which is what `dual_flow_residual` measures.

use crate::forcing::ForcingFunction;
use crate::grid::{FlowGrid, NodeClass};
use crate::operators::Tau;
use crate::spectral::SymMatrix2;

/// Legendre transform of a state, sampled on a grid over the target domain.
#[derive(Debug, Clone)]
pub struct DualState {
    pub t: f64,
    /// One value per dual-grid node (meaningful where `valid`).
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    /// Flat source-grid index of the maximizer (`u32::MAX` when unknown).
    pub argmax: Vec<u32>,
}

/// Interior nodes whose whole nine-point neighbourhood is interior.
fn deep_interior(grid: &FlowGrid) -> Vec<bool> {
    let nx = grid.nx();
    let mut deep = vec![false; grid.node_count()];
    for &k in grid.interior() {
        let k = k as usize;
        let mut ok = true;
        for dj in [-(nx as i64), 0, nx as i64] {
            for di in [-1i64, 0, 1] {
                let kk = (k as i64 + di + dj) as usize;
                ok &= grid.class(kk) == NodeClass::Interior;
            }
        }
        deep[k] = ok;
    }
    deep
}

fn node_positions(grid: &FlowGrid) -> (Vec<u32>, Vec<[f64; 2]>) {
    let mut flats = Vec::new();
    let mut pos = Vec::new();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = grid.flat(i, j);
            if grid.class(k) != NodeClass::Exterior {
                flats.push(k as u32);
                pos.push(grid.node_pos(i, j));
            }
        }
    }
    (flats, pos)
}

/// Brute-force discrete Legendre transform of `u` onto the dual grid.
pub fn legendre_transform(src: &FlowGrid, u: &[f64], dst: &FlowGrid, t: f64) -> DualState {
    let (flats, pos) = node_positions(src);
    let deep = deep_interior(src);
    let n = dst.node_count();
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut argmax = vec![u32::MAX; n];
    for j in 0..dst.ny() {
        for i in 0..dst.nx() {
            let ky = dst.flat(i, j);
            if dst.class(ky) == NodeClass::Exterior {
                continue;
            }
            let y = dst.node_pos(i, j);
            let mut best = f64::NEG_INFINITY;
            let mut best_k = u32::MAX;
            for (m, &kx) in flats.iter().enumerate() {
                let p = pos[m];
                let v = p[0] * y[0] + p[1] * y[1] - u[kx as usize];
                if v > best {
                    best = v;
                    best_k = kx;
                }
            }
            values[ky] = best;
            argmax[ky] = best_k;
            valid[ky] = best_k != u32::MAX && deep[best_k as usize];
        }
    }
    DualState {
        t,
        values,
        valid,
        argmax,
    }
}

/// Sup of `|L(L u) - u|` over source nodes where the double transform is
/// trustworthy on both legs.  Returns `(sup, points_checked)`.
pub fn involution_defect(
    src: &FlowGrid,
    u: &[f64],
    dst: &FlowGrid,
    dual: &DualState,
) -> (f64, usize) {
    let deep_src = deep_interior(src);
    let deep_dst = deep_interior(dst);
    let (dflats, dpos) = node_positions(dst);
    let mut sup = 0.0f64;
    let mut count = 0usize;
    for j in 0..src.ny() {
        for i in 0..src.nx() {
            let kx = src.flat(i, j);
            if !deep_src[kx] {
                continue;
            }
            let x = src.node_pos(i, j);
            let mut best = f64::NEG_INFINITY;
            let mut best_k = usize::MAX;
            for (m, &ky) in dflats.iter().enumerate() {
                let ky = ky as usize;
                if !dual.valid[ky] {
                    continue;
                }
                let y = dpos[m];
                let v = x[0] * y[0] + x[1] * y[1] - dual.values[ky];
                if v > best {
                    best = v;
                    best_k = ky;
                }
            }
            if best_k == usize::MAX || !deep_dst[best_k] {
                continue;
            }
            sup = sup.max((best - u[kx]).abs());
            count += 1;
        }
    }
    (sup, count)
}

fn central_gradient(grid: &FlowGrid, v: &[f64], flat: usize) -> [f64; 2] {
    let nx = grid.nx();
    let inv_2h = 0.5 / grid.spacing();
    [
        (v[flat + 1] - v[flat - 1]) * inv_2h,
        (v[flat + nx] - v[flat - nx]) * inv_2h,
    ]
}

fn nine_point_hessian(grid: &FlowGrid, v: &[f64], flat: usize) -> SymMatrix2 {
    let nx = grid.nx();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let v0 = v[flat];
    SymMatrix2::new(
        (v[flat + 1] - 2.0 * v0 + v[flat - 1]) * inv_h2,
        (v[flat + nx + 1] + v[flat - nx - 1] - v[flat + nx - 1] - v[flat - nx + 1])
            * (0.25 * inv_h2),
        (v[flat + nx] - 2.0 * v0 + v[flat - nx]) * inv_h2,
    )
}

/// True when the node and its whole nine-point neighbourhood carry valid
/// dual values.
fn dual_deep_valid(dst: &FlowGrid, dual: &DualState, flat: usize) -> bool {
    let nx = dst.nx();
    for dj in [-(nx as i64), 0, nx as i64] {
        for di in [-1i64, 0, 1] {
            let kk = (flat as i64 + di + dj) as usize;
            if dst.class(kk) == NodeClass::Exterior || !dual.valid[kk] {
                return false;
            }
        }
    }
    true
}

/// Sup of `|Du~(Du(x)) - x|` over deep source nodes whose image lands on a
/// usable dual node.  Returns `(sup, points_checked)`.
pub fn gradient_reciprocity(
    src: &FlowGrid,
    u: &[f64],
    dst: &FlowGrid,
    dual: &DualState,
) -> (f64, usize) {
    let deep_src = deep_interior(src);
    let mut sup = 0.0f64;
    let mut count = 0usize;
    for j in 0..src.ny() {
        for i in 0..src.nx() {
            let kx = src.flat(i, j);
            if !deep_src[kx] {
                continue;
            }
            let x = src.node_pos(i, j);
            let du = central_gradient(src, u, kx);
            let (yi, yj) = dst.nearest_node(du);
            let ky = dst.flat(yi, yj);
            if !dual_deep_valid(dst, dual, ky) {
                continue;
            }
            let dv = central_gradient(dst, &dual.values, ky);
            sup = sup.max((dv[0] - x[0]).hypot(dv[1] - x[1]));
            count += 1;
        }
    }
    (sup, count)
}

/// Sup over usable dual nodes of the dual stationarity defect
/// `|udot(x*) + G(lambda(D^2 u~)) + f(Du~)|`, where `udot = F[D^2 u] - f`
/// is evaluated at the maximizer.  Returns `(sup, points_checked)`.
pub fn dual_flow_residual(
    op: &Tau,
    forcing: &ForcingFunction,
    src: &FlowGrid,
    u: &[f64],
    dst: &FlowGrid,
    dual: &DualState,
) -> (f64, usize) {
    let deep_src = deep_interior(src);
    let floor = op.spectral_floor();
    let mut sup = 0.0f64;
    let mut count = 0usize;
    for j in 0..dst.ny() {
        for i in 0..dst.nx() {
            let ky = dst.flat(i, j);
            if dst.class(ky) == NodeClass::Exterior || !dual_deep_valid(dst, dual, ky) {
                continue;
            }
            let kx = dual.argmax[ky] as usize;
            if dual.argmax[ky] == u32::MAX || !deep_src[kx] {
                continue;
            }
            // Primal side: udot at the maximizer.
            let hu = nine_point_hessian(src, u, kx);
            let (l1, l2) = hu.eigenvalues();
            if l1 <= floor {
                continue;
            }
            let (xi, xj) = src.coords(kx);
            let xpos = src.node_pos(xi, xj);
            let udot = op.phi(l1) + op.phi(l2) - forcing.eval(xpos);
            // Dual side: reflected operator on D^2 u~ plus forcing at Du~.
            let hv = nine_point_hessian(dst, &dual.values, ky);
            let (m1, m2) = hv.eigenvalues();
            if m1 <= 0.0 {
                continue;
            }
            let g = match op.dual_eval(&[m1, m2]) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let dv = central_gradient(dst, &dual.values, ky);
            let res = (udot + g + forcing.eval(dv)).abs();
            sup = sup.max(res);
            count += 1;
        }
    }
    (sup, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::ConvexDomain;
    use crate::flow::FlowState;
    use crate::grid::build_grid;
    use std::f64::consts::FRAC_PI_2;

    fn disc(r: f64) -> ConvexDomain {
        ConvexDomain::disc([0.0, 0.0], r).unwrap()
    }

    #[test]
    fn quadratic_is_self_dual_up_to_lattice_gap() {
        // u = |x|^2/2 transforms to |y|^2/2; the discrete sup only
        // undershoots, by at most h^2/4 (half the squared distance to the
        // nearest lattice node).
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(1.0), h).unwrap();
        let st = FlowState::from_fn(&src, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        let mut checked = 0;
        for j in 0..dst.ny() {
            for i in 0..dst.nx() {
                let k = dst.flat(i, j);
                if !dual.valid[k] {
                    continue;
                }
                let y = dst.node_pos(i, j);
                let exact = 0.5 * (y[0] * y[0] + y[1] * y[1]);
                let gap = exact - dual.values[k];
                assert!(
                    gap >= -1e-12 && gap <= 0.25 * h * h + 1e-12,
                    "node ({i},{j}): gap={gap}"
                );
                checked += 1;
            }
        }
        assert!(checked > 100, "validity mask too aggressive: {checked}");
    }

    #[test]
    fn anisotropic_quadratic_inverts_the_matrix() {
        // u = x^T A x / 2  =>  u~ = y^T A^{-1} y / 2.
        let a = SymMatrix2::new(2.0, 0.3, 0.9);
        let ainv = a.inverse().unwrap();
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(0.6), h).unwrap();
        let st = FlowState::from_fn(&src, |p| 0.5 * a.quad(p));
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        for j in 0..dst.ny() {
            for i in 0..dst.nx() {
                let k = dst.flat(i, j);
                if !dual.valid[k] {
                    continue;
                }
                let y = dst.node_pos(i, j);
                let exact = 0.5 * ainv.quad(y);
                assert!(
                    (exact - dual.values[k]).abs() < h * h,
                    "node ({i},{j}): {} vs {exact}",
                    dual.values[k]
                );
            }
        }
    }

    #[test]
    fn validity_mask_clips_outside_the_gradient_image() {
        // Du = x/2 maps the unit disc onto the half disc; dual nodes beyond
        // radius 1/2 must be flagged invalid.
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(1.0), h).unwrap();
        let st = FlowState::from_fn(&src, |p| 0.25 * (p[0] * p[0] + p[1] * p[1]));
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        let mut valid_count = 0;
        for j in 0..dst.ny() {
            for i in 0..dst.nx() {
                let k = dst.flat(i, j);
                if dual.valid[k] {
                    let y = dst.node_pos(i, j);
                    let r = y[0].hypot(y[1]);
                    assert!(r < 0.5 + 3.0 * h, "valid node outside image: r={r}");
                    valid_count += 1;
                }
            }
        }
        assert!(valid_count > 50);
    }

    #[test]
    fn involution_returns_to_the_original() {
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(1.0), h).unwrap();
        // Slightly non-quadratic convex data.
        let st = FlowState::from_fn(&src, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            0.5 * r2 + 0.05 * r2 * r2
        });
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        let (sup, count) = involution_defect(&src, &st.u, &dst, &dual);
        assert!(count > 100, "too few checkable points: {count}");
        assert!(sup < 10.0 * h * h, "involution defect {sup} at h={h}");
    }

    #[test]
    fn gradients_invert_each_other() {
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(1.0), h).unwrap();
        let st = FlowState::from_fn(&src, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            0.5 * r2 + 0.05 * r2 * r2
        });
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        let (sup, count) = gradient_reciprocity(&src, &st.u, &dst, &dual);
        assert!(count > 100, "too few checkable points: {count}");
        assert!(sup < 10.0 * h, "reciprocity defect {sup} at h={h}");
    }

    #[test]
    fn dual_equation_holds_on_stationary_data() {
        // u = |x|^2/2 is stationary for any tau with udot = F(1,1); the dual
        // side must cancel it: G(1,1) = -F(1,1).
        let h = 1.0 / 16.0;
        let src = build_grid(disc(1.0), h).unwrap();
        let dst = build_grid(disc(1.0), h).unwrap();
        let st = FlowState::from_fn(&src, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let op = Tau::new(FRAC_PI_2).unwrap();
        let dual = legendre_transform(&src, &st.u, &dst, 0.0);
        let (sup, count) = dual_flow_residual(
            &op,
            &ForcingFunction::Zero,
            &src,
            &st.u,
            &dst,
            &dual,
        );
        assert!(count > 50, "too few checkable points: {count}");
        assert!(sup < 10.0 * h, "dual residual {sup} at h={h}");
    }
}
