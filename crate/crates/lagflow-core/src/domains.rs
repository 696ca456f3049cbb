//! Uniformly convex planar domains described by concave defining functions.
//!
//! A domain is represented by a smooth function `h` with
//!
//! * `h > 0` inside, `h = 0` on the boundary, `h < 0` outside,
//! * `D^2 h <= -theta I` for a reported constant `theta > 0`,
//! * `|Dh|` bounded above and below by reported constants on the boundary.
//!
//! Two shapes are provided.  The disc uses the exact normalised defining
//! function `h(p) = (R^2 - |p - c|^2) / (2R)`, which has `|Dh| = 1`
//! everywhere on the boundary.  The axis-aligned ellipse uses the scaled
//! quadratic `h(p) = (1 - q(p)) * k0` with
//! `q(p) = ((p1-c1)/a1)^2 + ((p2-c2)/a2)^2` and `k0 = min(a1, a2)/2`; its
//! boundary gradient modulus then ranges over
//! `[min(a1,a2)/max(a1,a2), 1]`, and it reduces exactly to the disc form
//! when the semi-axes agree.  Code consuming boundary gradients must not
//! assume unit length; the reported bounds are the contract.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("domain parameters must be positive (got {0})")]
    NonPositiveSize(f64),
    #[error("cannot project the non-finite point ({0}, {1})")]
    NonFinitePoint(f64, f64),
}

/// A point on the boundary of a domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Position on the boundary curve.
    pub position: [f64; 2],
    /// Unit normal pointing into the domain.
    pub inward_normal: [f64; 2],
    /// Parameter of the point on the boundary curve, in `[0, 2 pi)`;
    /// the elliptic angle, strictly monotone along the curve.
    pub arc_parameter: f64,
}

/// A uniformly convex planar domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexDomain {
    Disc { center: [f64; 2], radius: f64 },
    AxisEllipse { center: [f64; 2], semi_axes: [f64; 2] },
}

impl ConvexDomain {
    pub fn disc(center: [f64; 2], radius: f64) -> Result<Self, DomainError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(DomainError::NonPositiveSize(radius));
        }
        Ok(ConvexDomain::Disc { center, radius })
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2]) -> Result<Self, DomainError> {
        for &s in &semi_axes {
            if !(s > 0.0) || !s.is_finite() {
                return Err(DomainError::NonPositiveSize(s));
            }
        }
        Ok(ConvexDomain::AxisEllipse { center, semi_axes })
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            ConvexDomain::Disc { center, .. } => center,
            ConvexDomain::AxisEllipse { center, .. } => center,
        }
    }

    /// Semi-axes of the shape (equal for a disc).
    pub fn semi_axes(&self) -> [f64; 2] {
        match *self {
            ConvexDomain::Disc { radius, .. } => [radius, radius],
            ConvexDomain::AxisEllipse { semi_axes, .. } => semi_axes,
        }
    }

    /// Scale factor of the ellipse defining function, `min(a1,a2)/2`.
    /// For a disc this is `R/2`, matching the exact disc form.
    fn k0(&self) -> f64 {
        let s = self.semi_axes();
        0.5 * s[0].min(s[1])
    }

    /// Defining function value.
    pub fn h_eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            ConvexDomain::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                (radius * radius - dx * dx - dy * dy) / (2.0 * radius)
            }
            ConvexDomain::AxisEllipse { center, semi_axes } => {
                let qx = (p[0] - center[0]) / semi_axes[0];
                let qy = (p[1] - center[1]) / semi_axes[1];
                (1.0 - qx * qx - qy * qy) * self.k0()
            }
        }
    }

    /// Defining function gradient.
    pub fn h_grad(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            ConvexDomain::Disc { center, radius } => {
                [-(p[0] - center[0]) / radius, -(p[1] - center[1]) / radius]
            }
            ConvexDomain::AxisEllipse { center, semi_axes } => {
                let k0 = self.k0();
                [
                    -2.0 * k0 * (p[0] - center[0]) / (semi_axes[0] * semi_axes[0]),
                    -2.0 * k0 * (p[1] - center[1]) / (semi_axes[1] * semi_axes[1]),
                ]
            }
        }
    }

    /// Defining function Hessian, a constant negative definite diagonal
    /// matrix `(h11, h12, h22)` for both shapes.
    pub fn h_hess(&self) -> (f64, f64, f64) {
        match *self {
            ConvexDomain::Disc { radius, .. } => (-1.0 / radius, 0.0, -1.0 / radius),
            ConvexDomain::AxisEllipse { semi_axes, .. } => {
                let k0 = self.k0();
                (
                    -2.0 * k0 / (semi_axes[0] * semi_axes[0]),
                    0.0,
                    -2.0 * k0 / (semi_axes[1] * semi_axes[1]),
                )
            }
        }
    }

    /// Uniform convexity constant: `D^2 h <= -theta I`.
    pub fn theta(&self) -> f64 {
        let (h11, _, h22) = self.h_hess();
        (-h11).min(-h22)
    }

    /// Closed-form bounds `(lo, hi)` for `|Dh|` on the boundary.
    pub fn boundary_grad_bounds(&self) -> (f64, f64) {
        match *self {
            ConvexDomain::Disc { .. } => (1.0, 1.0),
            ConvexDomain::AxisEllipse { semi_axes, .. } => {
                let lo = semi_axes[0].min(semi_axes[1]) / semi_axes[0].max(semi_axes[1]);
                (lo, 1.0)
            }
        }
    }

    /// Strict interior test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.h_eval(p) > 0.0
    }

    /// Point on the boundary at elliptic angle `t`, with inward normal.
    pub fn boundary_at(&self, t: f64) -> BoundaryPoint {
        let c = self.center();
        let s = self.semi_axes();
        let position = [c[0] + s[0] * t.cos(), c[1] + s[1] * t.sin()];
        let g = self.h_grad(position);
        let inv = g[0].hypot(g[1]).recip();
        BoundaryPoint {
            position,
            inward_normal: [g[0] * inv, g[1] * inv],
            arc_parameter: t.rem_euclid(std::f64::consts::TAU),
        }
    }

    /// `m` boundary points at equally spaced elliptic angles starting at 0.
    pub fn sample_boundary(&self, m: usize) -> Vec<BoundaryPoint> {
        (0..m)
            .map(|k| self.boundary_at(std::f64::consts::TAU * k as f64 / m as f64))
            .collect()
    }

    /// Nearest boundary point.  The disc is closed form; the ellipse runs a
    /// guarded Newton iteration on the stationarity condition
    /// `(x(t) - p) . x'(t) = 0` of the squared distance.
    ///
    /// Intended for points near the boundary (the flow projects its
    /// boundary-layer grid nodes); for such points the iteration is
    /// well-conditioned and converges in a handful of steps.
    pub fn project_to_boundary(&self, p: [f64; 2]) -> Result<BoundaryPoint, DomainError> {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(DomainError::NonFinitePoint(p[0], p[1]));
        }
        match *self {
            ConvexDomain::Disc { center, .. } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let t = dy.atan2(dx);
                Ok(self.boundary_at(t))
            }
            ConvexDomain::AxisEllipse { center, semi_axes } => {
                let px = p[0] - center[0];
                let py = p[1] - center[1];
                let (a, b) = (semi_axes[0], semi_axes[1]);
                // The squared distance to x(t) = (a cos t, b sin t) has up
                // to four critical points (points inside the evolute, or far
                // outside, see several basins), so a local root-finder alone
                // can land on the wrong side.  A coarse scan picks the
                // global basin; the scan minimiser brackets a sign change of
                // the derivative g(t) = (x(t) - p) . x'(t), which bisection
                // then pins to machine precision.
                const SCAN: usize = 64;
                let tau = std::f64::consts::TAU;
                let d2 = |t: f64| {
                    let dx = a * t.cos() - px;
                    let dy = b * t.sin() - py;
                    dx * dx + dy * dy
                };
                let g = |t: f64| {
                    let (ct, st) = (t.cos(), t.sin());
                    (a * ct - px) * (-a * st) + (b * st - py) * (b * ct)
                };
                let mut t0 = 0.0;
                let mut best = f64::INFINITY;
                for k in 0..SCAN {
                    let tk = k as f64 / SCAN as f64 * tau;
                    let v = d2(tk);
                    if v < best {
                        best = v;
                        t0 = tk;
                    }
                }
                // The continuous minimiser lies within one scan cell of t0,
                // so g changes sign over [t0 - dt, t0 + dt].
                let dt = tau / SCAN as f64;
                let (mut lo, mut hi) = (t0 - dt, t0 + dt);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) <= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mut t = 0.5 * (lo + hi);
                // Keep the scan point if rounding made the refinement worse
                // (exact ties on the symmetry axes).
                if d2(t) > best {
                    t = t0;
                }
                Ok(self.boundary_at(t.rem_euclid(tau)))
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)` of the closure.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let c = self.center();
        let s = self.semi_axes();
        ([c[0] - s[0], c[1] - s[1]], [c[0] + s[0], c[1] + s[1]])
    }

    /// Diameter of the domain.
    pub fn diameter(&self) -> f64 {
        let s = self.semi_axes();
        2.0 * s[0].max(s[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn disc(r: f64) -> ConvexDomain {
        ConvexDomain::disc([0.0, 0.0], r).unwrap()
    }

    fn ellipse(a: f64, b: f64) -> ConvexDomain {
        ConvexDomain::ellipse([0.0, 0.0], [a, b]).unwrap()
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(ConvexDomain::disc([0.0, 0.0], 0.0).is_err());
        assert!(ConvexDomain::disc([0.0, 0.0], -1.0).is_err());
        assert!(ConvexDomain::ellipse([0.0, 0.0], [1.0, 0.0]).is_err());
        assert!(ConvexDomain::ellipse([0.0, 0.0], [f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn disc_defining_function_closed_forms() {
        let d = disc(2.0);
        // Center value R/2 scaled: (R^2 - 0)/(2R) = R/2.
        assert_eq!(d.h_eval([0.0, 0.0]), 1.0);
        assert_eq!(d.h_eval([2.0, 0.0]), 0.0);
        assert!(d.h_eval([3.0, 0.0]) < 0.0);
        // |Dh| = 1 on the boundary.
        let g = d.h_grad([2.0, 0.0]);
        assert_eq!(g, [-1.0, 0.0]);
        assert_eq!(d.theta(), 0.5);
        assert_eq!(d.boundary_grad_bounds(), (1.0, 1.0));
    }

    #[test]
    fn ellipse_center_value_and_theta() {
        let e = ellipse(2.0, 1.0);
        // k0 = min(a1,a2)/2 = 1/2.
        assert_eq!(e.h_eval([0.0, 0.0]), 0.5);
        assert_eq!(e.h_eval([2.0, 0.0]), 0.0);
        assert_eq!(e.h_eval([0.0, 1.0]), 0.0);
        // theta = 2 k0 / max(a)^2 = 1/4.
        assert!((e.theta() - 0.25).abs() < 1e-15);
        // Equal axes reduce to the disc form.
        let e1 = ellipse(1.5, 1.5);
        let d1 = disc(1.5);
        for p in [[0.3, 0.4], [1.0, -0.2], [1.5, 0.0]] {
            assert!((e1.h_eval(p) - d1.h_eval(p)).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd4bb);
        for dom in [disc(1.0), ellipse(2.0, 1.0), ellipse(0.7, 1.9)] {
            for _ in 0..200 {
                let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let g = dom.h_grad(p);
                let h = 1e-6;
                let fdx = (dom.h_eval([p[0] + h, p[1]]) - dom.h_eval([p[0] - h, p[1]])) / (2.0 * h);
                let fdy = (dom.h_eval([p[0], p[1] + h]) - dom.h_eval([p[0], p[1] - h])) / (2.0 * h);
                assert!((g[0] - fdx).abs() < 1e-8);
                assert!((g[1] - fdy).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hessian_is_exact_and_uniformly_negative() {
        for dom in [disc(1.0), disc(0.4), ellipse(2.0, 1.0)] {
            let (h11, h12, h22) = dom.h_hess();
            assert_eq!(h12, 0.0);
            assert!(h11 < 0.0 && h22 < 0.0);
            assert!(dom.theta() > 0.0);
            assert!(h11 <= -dom.theta() + 1e-15 && h22 <= -dom.theta() + 1e-15);
            // Quadratic defining functions: second difference is exact.
            let p = [0.3, -0.2];
            let h = 0.25;
            let fd = (dom.h_eval([p[0] + h, p[1]]) - 2.0 * dom.h_eval(p)
                + dom.h_eval([p[0] - h, p[1]]))
                / (h * h);
            assert!((fd - h11).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_gradient_bounds_hold_on_samples() {
        for dom in [disc(1.0), disc(2.5), ellipse(2.0, 1.0), ellipse(1.0, 3.0)] {
            let (lo, hi) = dom.boundary_grad_bounds();
            let mut seen_lo = f64::INFINITY;
            let mut seen_hi = f64::NEG_INFINITY;
            for bp in dom.sample_boundary(1000) {
                let g = dom.h_grad(bp.position);
                let n = g[0].hypot(g[1]);
                seen_lo = seen_lo.min(n);
                seen_hi = seen_hi.max(n);
                assert!(n >= lo - 1e-12 && n <= hi + 1e-12);
            }
            // The closed-form bounds are attained.
            assert!((seen_lo - lo).abs() < 1e-6);
            assert!((seen_hi - hi).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_samples_lie_on_the_zero_level() {
        for dom in [disc(1.0), ellipse(2.0, 1.0)] {
            for bp in dom.sample_boundary(257) {
                assert!(dom.h_eval(bp.position).abs() < 1e-12);
                // Inward normal shrinks h the other way: stepping inward
                // raises h.
                let eps = 1e-6;
                let inside = [
                    bp.position[0] + eps * bp.inward_normal[0],
                    bp.position[1] + eps * bp.inward_normal[1],
                ];
                assert!(dom.h_eval(inside) > 0.0);
            }
        }
    }

    #[test]
    fn disc_sampling_hits_cardinal_angles() {
        let pts = disc(1.0).sample_boundary(4);
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (bp, e) in pts.iter().zip(expect) {
            assert!((bp.position[0] - e[0]).abs() < 1e-12);
            assert!((bp.position[1] - e[1]).abs() < 1e-12);
        }
        assert!((pts[1].arc_parameter - FRAC_PI_2).abs() < 1e-12);
        assert!((pts[2].arc_parameter - PI).abs() < 1e-12);
    }

    #[test]
    fn projection_golden_cases() {
        let d = disc(1.0);
        let bp = d.project_to_boundary([3.0, 0.0]).unwrap();
        assert!((bp.position[0] - 1.0).abs() < 1e-14 && bp.position[1].abs() < 1e-14);
        assert!((bp.inward_normal[0] + 1.0).abs() < 1e-14);

        let e = ellipse(2.0, 1.0);
        let bp = e.project_to_boundary([4.0, 0.0]).unwrap();
        assert!((bp.position[0] - 2.0).abs() < 1e-12 && bp.position[1].abs() < 1e-12);
    }

    #[test]
    fn projection_lands_on_boundary_and_is_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xe5cc);
        for dom in [disc(1.0), ellipse(2.0, 1.0), ellipse(0.8, 1.7)] {
            for _ in 0..300 {
                // Near-boundary points, the regime the flow uses.
                let t = rng.gen_range(0.0..TAU);
                let bp = dom.boundary_at(t);
                let off = rng.gen_range(-0.05..0.05);
                let p = [
                    bp.position[0] + off * bp.inward_normal[0],
                    bp.position[1] + off * bp.inward_normal[1],
                ];
                let proj = dom.project_to_boundary(p).unwrap();
                assert!(dom.h_eval(proj.position).abs() < 1e-10);
                // Nearest among a dense sample of boundary points.
                let d2 = |q: [f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                let dp = d2(proj.position);
                for probe in dom.sample_boundary(720) {
                    assert!(dp <= d2(probe.position) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn bounding_box_and_diameter() {
        let e = ConvexDomain::ellipse([1.0, -0.5], [2.0, 1.0]).unwrap();
        let (lo, hi) = e.bounding_box();
        assert_eq!(lo, [-1.0, -1.5]);
        assert_eq!(hi, [3.0, 0.5]);
        assert_eq!(e.diameter(), 4.0);
    }
}
