//! Spatial forcing terms for the flow equation `u_t = F[D^2 u] - f(x)`.
//!
//! The admissibility theory only needs concave forcings with small
//! oscillation and gradient, and the solver's needs are covered by linear
//! terms, so the representation is a small closed enum.  Extremes over a
//! domain are computed in closed form, which keeps the admissibility gate
//! exact rather than grid-sampled.

use crate::domains::ConvexDomain;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingFunction {
    /// `f = 0`.
    Zero,
    /// `f(x) = kappa . x`.
    Linear { kappa: [f64; 2] },
}

impl ForcingFunction {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            ForcingFunction::Zero => 0.0,
            ForcingFunction::Linear { kappa } => kappa[0] * p[0] + kappa[1] * p[1],
        }
    }

    pub fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        match *self {
            ForcingFunction::Zero => [0.0, 0.0],
            ForcingFunction::Linear { kappa } => kappa,
        }
    }

    /// Supremum of `|Df|` over any domain.
    pub fn grad_norm_max(&self) -> f64 {
        match *self {
            ForcingFunction::Zero => 0.0,
            ForcingFunction::Linear { kappa } => kappa[0].hypot(kappa[1]),
        }
    }

    /// Both shipped forcings are concave (linear ones trivially so).
    pub fn is_concave(&self) -> bool {
        true
    }

    /// Exact `(min, max)` over the closure of a domain.  For a linear form
    /// over an ellipse the extremes sit at `kappa . c +- sqrt(sum (kappa_i a_i)^2)`.
    pub fn extremes_over(&self, domain: &ConvexDomain) -> (f64, f64) {
        match *self {
            ForcingFunction::Zero => (0.0, 0.0),
            ForcingFunction::Linear { kappa } => {
                let c = domain.center();
                let s = domain.semi_axes();
                let mid = kappa[0] * c[0] + kappa[1] * c[1];
                let amp = (kappa[0] * s[0]).hypot(kappa[1] * s[1]);
                (mid - amp, mid + amp)
            }
        }
    }

    /// Exact oscillation `max - min` over the closure of a domain.
    pub fn osc_over(&self, domain: &ConvexDomain) -> f64 {
        let (lo, hi) = self.extremes_over(domain);
        hi - lo
    }
}
