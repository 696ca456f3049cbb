//! The concave spectral operator family used as the flow speed.
//!
//! Every operator in the family is parametrised by an angle `tau` in
//! `(0, pi/2]` and acts on the eigenvalues of a positive definite symmetric
//! matrix as a sum of identical scalar terms,
//!
//! ```text
//!     F_tau(lambda) = sum_i phi_tau(lambda_i),
//! ```
//!
//! so it is symmetric under permutations, strictly increasing and concave in
//! each eigenvalue.  With `a = cot(tau)` and `b = sqrt(|a^2 - 1|)` the scalar
//! term takes one of four closed forms:
//!
//! * `0 < tau < pi/4` (log branch, `a > 1`):
//!   `phi = sqrt(a^2+1)/(2b) * ln((l+a-b)/(l+a+b))`
//! * `tau = pi/4` (inverse branch, `a = 1`, `b = 0`):
//!   `phi = -sqrt(2)/(1+l)`
//! * `pi/4 < tau < pi/2` (arctan branch, `0 < a < 1`):
//!   `phi = sqrt(a^2+1)/b * arctan((l+a-b)/(l+a+b))`
//! * `tau = pi/2` (pure arctan, `a = 0`, `b = 1`):
//!   `phi = arctan(l)`
//!
//! The branch classification snaps `tau` to the two closed branches within
//! [`TAU_CLASSIFY_TOL`] so callers never hit the removable `b -> 0`
//! singularities of the open branches.  On the log branch `a - b = 1/(a+b)`
//! can underflow the naive subtraction badly for small `tau`, so evaluation
//! rewrites the logarithm as `ln_1p(-2b/(l+a+b))`; the same form stays
//! accurate as `b -> 0`.
//!
//! Besides plain evaluation the module exposes the endpoint values
//! `F(0,...,0)` and `F(+inf,...,+inf)` (whose strict ordering makes the
//! boundary-value problem solvable), first and second derivatives in the
//! eigenvalues, the dual operator `G(mu) = -F(1/mu)` induced by the Legendre
//! transform, and closed-form windows that pin the trace-like quantities
//! `sum_i dF/dl_i` and `sum_i dF/dl_i * l_i^2` on spectra with a small and a
//! large eigenvalue.  Those windows feed the a priori diagnostics of the
//! flow driver.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use thiserror::Error;

/// Half-width of the interval around `pi/4` and `pi/2` (and around `0`)
/// inside which `tau` is snapped to the closed branch.
pub const TAU_CLASSIFY_TOL: f64 = 1e-12;

/// Errors produced by operator construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    /// `tau = 0` has no finite normalisation: the log-branch prefactor
    /// `sqrt(a^2+1)/(2b)` diverges as `tau -> 0`.
    #[error("tau = 0 is not part of the operator family")]
    TauZeroUnsupported,
    /// `tau` outside `(0, pi/2]`.
    #[error("tau = {0} is outside (0, pi/2]")]
    TauOutOfRange(f64),
    /// An eigenvalue outside the positive cone was passed to a checked
    /// evaluation.
    #[error("eigenvalue lambda[{index}] = {value} is not positive")]
    NonPositiveEigenvalue { index: usize, value: f64 },
    /// Structure-window thresholds must be positive.
    #[error("structure window thresholds must be positive (s1 = {s1}, s2 = {s2})")]
    InvalidWindow { s1: f64, s2: f64 },
}

/// Which of the four closed forms applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `0 < tau < pi/4`.
    Log,
    /// `tau = pi/4`.
    Inverse,
    /// `pi/4 < tau < pi/2`.
    Arctan,
    /// `tau = pi/2`.
    PureArctan,
}

/// A validated eigenvalue vector in the open positive cone.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Checks that every entry is finite and strictly positive.
    pub fn new(values: Vec<f64>) -> Result<Self, OperatorError> {
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(OperatorError::NonPositiveEigenvalue { index, value });
            }
        }
        Ok(Spectrum(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Closed-form bounds for a trace-like quantity over the spectra that have
/// at least one eigenvalue `<= s1` (respectively `>= s2`).
///
/// `lambda1 <= lambda2` always holds, with both endpoints strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureWindow {
    /// Small-eigenvalue threshold the window was evaluated at.
    pub s1: f64,
    /// Large-eigenvalue threshold the window was evaluated at.
    pub s2: f64,
    /// Lower endpoint.
    pub lambda1: f64,
    /// Upper endpoint.
    pub lambda2: f64,
}

/// One member of the operator family, with the branch and the derived
/// constants resolved once at construction.
#[derive(Debug, Clone, Copy)]
pub struct Tau {
    tau: f64,
    branch: Branch,
    /// `cot(tau)`, exactly `1` / `0` on the closed branches.
    a: f64,
    /// `sqrt(|a^2 - 1|)`, exactly `0` / `1` on the closed branches.
    b: f64,
    /// `sqrt(a^2 + 1)`.
    coef: f64,
    /// `a + b`.
    apb: f64,
    /// `a - b`; on the log branch computed stably as `1/(a+b)`.
    amb: f64,
}

impl Tau {
    /// Classifies `tau` and precomputes the branch constants.
    pub fn new(tau: f64) -> Result<Self, OperatorError> {
        if !tau.is_finite() {
            return Err(OperatorError::TauOutOfRange(tau));
        }
        if tau.abs() <= TAU_CLASSIFY_TOL {
            return Err(OperatorError::TauZeroUnsupported);
        }
        if tau < 0.0 || tau > FRAC_PI_2 + TAU_CLASSIFY_TOL {
            return Err(OperatorError::TauOutOfRange(tau));
        }
        let branch = if (tau - FRAC_PI_4).abs() <= TAU_CLASSIFY_TOL {
            Branch::Inverse
        } else if (tau - FRAC_PI_2).abs() <= TAU_CLASSIFY_TOL {
            Branch::PureArctan
        } else if tau < FRAC_PI_4 {
            Branch::Log
        } else {
            Branch::Arctan
        };
        let (a, b) = match branch {
            Branch::Inverse => (1.0, 0.0),
            Branch::PureArctan => (0.0, 1.0),
            Branch::Log | Branch::Arctan => {
                let a = tau.tan().recip();
                // |a^2 - 1| factored to keep precision when a is near 1.
                let b = ((a - 1.0).abs() * (a + 1.0)).sqrt();
                (a, b)
            }
        };
        let coef = a.hypot(1.0);
        let apb = a + b;
        let amb = if branch == Branch::Log { apb.recip() } else { a - b };
        Ok(Tau { tau, branch, a, b, coef, apb, amb })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `cot(tau)` as used by the closed forms.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `sqrt(|cot^2(tau) - 1|)` as used by the closed forms.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Infimum of the maximal interval on which the scalar term stays
    /// defined and smooth.  The positive cone always sits strictly inside,
    /// but transient states produced by the explicit flow may dip below
    /// zero; they remain evaluable down to this floor.
    pub fn spectral_floor(&self) -> f64 {
        match self.branch {
            Branch::Log => -self.amb,
            Branch::Inverse => -1.0,
            Branch::Arctan => -self.apb,
            Branch::PureArctan => f64::NEG_INFINITY,
        }
    }

    /// Scalar term `phi(l)` on the maximal domain (`l > spectral_floor()`).
    #[inline]
    pub fn phi(&self, l: f64) -> f64 {
        match self.branch {
            Branch::Log => self.coef / (2.0 * self.b) * (-2.0 * self.b / (l + self.apb)).ln_1p(),
            Branch::Inverse => -SQRT_2 / (1.0 + l),
            Branch::Arctan => self.coef / self.b * ((l + self.amb) / (l + self.apb)).atan(),
            Branch::PureArctan => l.atan(),
        }
    }

    /// Limit of the scalar term as `l -> +inf`.
    pub fn phi_inf(&self) -> f64 {
        match self.branch {
            Branch::Log | Branch::Inverse => 0.0,
            Branch::Arctan => self.coef / self.b * FRAC_PI_4,
            Branch::PureArctan => FRAC_PI_2,
        }
    }

    /// Derivative `phi'(l) > 0` of the scalar term.
    #[inline]
    pub fn dphi(&self, l: f64) -> f64 {
        match self.branch {
            Branch::Log => self.coef / ((l + self.amb) * (l + self.apb)),
            Branch::Inverse => {
                let d = 1.0 + l;
                SQRT_2 / (d * d)
            }
            Branch::Arctan => {
                let d = l + self.a;
                self.coef / (d * d + self.b * self.b)
            }
            Branch::PureArctan => 1.0 / (1.0 + l * l),
        }
    }

    /// Second derivative `phi''(l) <= 0` of the scalar term.
    #[inline]
    pub fn ddphi(&self, l: f64) -> f64 {
        match self.branch {
            Branch::Log => {
                let q = (l + self.amb) * (l + self.apb);
                -2.0 * self.coef * (l + self.a) / (q * q)
            }
            Branch::Inverse => {
                let d = 1.0 + l;
                -2.0 * SQRT_2 / (d * d * d)
            }
            Branch::Arctan => {
                let d = l + self.a;
                let q = d * d + self.b * self.b;
                -2.0 * self.coef * d / (q * q)
            }
            Branch::PureArctan => {
                let q = 1.0 + l * l;
                -2.0 * l / (q * q)
            }
        }
    }

    /// Checked evaluation `F(lambda)` on the positive cone.
    pub fn eval(&self, lambda: &[f64]) -> Result<f64, OperatorError> {
        check_positive(lambda)?;
        Ok(lambda.iter().map(|&l| self.phi(l)).sum())
    }

    /// Evaluation for pre-validated spectra.
    pub fn eval_spectrum(&self, lambda: &Spectrum) -> f64 {
        lambda.as_slice().iter().map(|&l| self.phi(l)).sum()
    }

    /// `(F(0,...,0), F(+inf,...,+inf))` in dimension `n`.  The first entry
    /// is always strictly below the second, which is what makes levels
    /// strictly between them reachable by diagonal spectra.
    pub fn endpoints(&self, n: usize) -> (f64, f64) {
        let n = n as f64;
        (n * self.phi(0.0), n * self.phi_inf())
    }

    /// Gradient `dF/dlambda_i`, strictly positive on the cone.
    pub fn grad(&self, lambda: &[f64]) -> Result<Vec<f64>, OperatorError> {
        check_positive(lambda)?;
        Ok(lambda.iter().map(|&l| self.dphi(l)).collect())
    }

    /// Hessian of `F` in the eigenvalues.  The mixed second derivatives of a
    /// sum of scalar terms vanish identically, so only the diagonal is
    /// returned; every entry is `<= 0`.
    pub fn hess(&self, lambda: &[f64]) -> Result<Vec<f64>, OperatorError> {
        check_positive(lambda)?;
        Ok(lambda.iter().map(|&l| self.ddphi(l)).collect())
    }

    /// Dual operator `G(mu) = -F(1/mu_1, ..., 1/mu_n)`, the flow speed seen
    /// by the Legendre transform of a solution.  Concave in `mu` like `F`
    /// is in `lambda`.
    pub fn dual_eval(&self, mu: &[f64]) -> Result<f64, OperatorError> {
        check_positive(mu)?;
        Ok(-mu.iter().map(|&m| self.phi(m.recip())).sum::<f64>())
    }

    /// Gradient of the dual operator: `dG/dmu_i = lambda_i^2 dF/dlambda_i`
    /// at `lambda_i = 1/mu_i`.
    pub fn dual_grad(&self, mu: &[f64]) -> Result<Vec<f64>, OperatorError> {
        check_positive(mu)?;
        Ok(mu
            .iter()
            .map(|&m| {
                let l = m.recip();
                l * l * self.dphi(l)
            })
            .collect())
    }

    /// Closed-form windows for spectra in the positive cone that have some
    /// eigenvalue `<= s1` and some eigenvalue `>= s2`:
    ///
    /// * first window: `sum_i dF/dlambda_i  in  [phi'(s1), n phi'(0)]`
    /// * second window: `sum_i dF/dlambda_i lambda_i^2  in  [s2^2 phi'(s2), n sqrt(a^2+1)]`
    ///
    /// The first follows from `phi'` being positive and decreasing, the
    /// second from `l^2 phi'(l)` being increasing with limit `sqrt(a^2+1)`.
    pub fn structure_window(
        &self,
        s1: f64,
        s2: f64,
        n: usize,
    ) -> Result<(StructureWindow, StructureWindow), OperatorError> {
        if !(s1 > 0.0) || !(s2 > 0.0) || !s1.is_finite() || !s2.is_finite() {
            return Err(OperatorError::InvalidWindow { s1, s2 });
        }
        let nf = n as f64;
        let trace = StructureWindow {
            s1,
            s2,
            lambda1: self.dphi(s1),
            lambda2: nf * self.dphi(0.0),
        };
        let quad = StructureWindow {
            s1,
            s2,
            lambda1: s2 * s2 * self.dphi(s2),
            lambda2: nf * self.coef,
        };
        Ok((trace, quad))
    }
}

fn check_positive(lambda: &[f64]) -> Result<(), OperatorError> {
    for (index, &value) in lambda.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(OperatorError::NonPositiveEigenvalue { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const TAUS: [f64; 4] = [PI / 8.0, FRAC_PI_4, 3.0 * PI / 8.0, FRAC_PI_2];

    fn op(tau: f64) -> Tau {
        Tau::new(tau).unwrap()
    }

    /// Central finite difference of `phi`, stepped relative to the distance
    /// from the branch's singularity so the truncation error stays uniform
    /// across branches.
    fn fd_dphi(t: &Tau, l: f64) -> f64 {
        let floor = t.spectral_floor();
        let scale = if floor.is_finite() { l - floor } else { 1.0 + l };
        let h = 1e-5 * scale;
        (t.phi(l + h) - t.phi(l - h)) / (2.0 * h)
    }

    fn fd_ddphi(t: &Tau, l: f64) -> f64 {
        let floor = t.spectral_floor();
        let scale = if floor.is_finite() { l - floor } else { 1.0 + l };
        let h = 1e-5 * scale;
        (t.dphi(l + h) - t.dphi(l - h)) / (2.0 * h)
    }

    #[test]
    fn rejects_tau_zero_and_out_of_range() {
        assert!(matches!(Tau::new(0.0), Err(OperatorError::TauZeroUnsupported)));
        assert!(matches!(Tau::new(5e-13), Err(OperatorError::TauZeroUnsupported)));
        assert!(matches!(Tau::new(-0.3), Err(OperatorError::TauOutOfRange(_))));
        assert!(matches!(Tau::new(1.8), Err(OperatorError::TauOutOfRange(_))));
        assert!(matches!(Tau::new(f64::NAN), Err(OperatorError::TauOutOfRange(_))));
        assert!(Tau::new(FRAC_PI_2).is_ok());
    }

    #[test]
    fn branch_classification_snaps_within_tolerance() {
        assert_eq!(op(FRAC_PI_4).branch(), Branch::Inverse);
        assert_eq!(op(FRAC_PI_4 + 5e-13).branch(), Branch::Inverse);
        assert_eq!(op(FRAC_PI_4 - 5e-13).branch(), Branch::Inverse);
        assert_eq!(op(FRAC_PI_4 - 1e-9).branch(), Branch::Log);
        assert_eq!(op(FRAC_PI_4 + 1e-9).branch(), Branch::Arctan);
        assert_eq!(op(FRAC_PI_2).branch(), Branch::PureArctan);
        assert_eq!(op(FRAC_PI_2 - 1e-9).branch(), Branch::Arctan);
        assert_eq!(op(0.1).branch(), Branch::Log);
    }

    #[test]
    fn golden_values_on_the_diagonal() {
        // Pure arctan: F(1,1) = 2 atan(1) = pi/2.
        assert_eq!(op(FRAC_PI_2).eval(&[1.0, 1.0]).unwrap(), FRAC_PI_2);
        // Inverse branch: F(1,1) = -sqrt(2) (1/2 + 1/2).
        assert_eq!(op(FRAC_PI_4).eval(&[1.0, 1.0]).unwrap(), -SQRT_2);
    }

    #[test]
    fn arctan_branch_matches_independent_form() {
        // arctan((l+a-b)/(l+a+b)) = arctan((l+a)/b) - pi/4 wherever the
        // argument stays in the principal range, which gives an independent
        // route to the same value.
        let t = op(3.0 * PI / 8.0);
        let (a, b) = (t.a(), t.b());
        let coef = a.hypot(1.0);
        let alt = |l: f64| coef / b * (((l + a) / b).atan() - FRAC_PI_4);
        let direct = t.eval(&[1.0, 2.0]).unwrap();
        let indep = alt(1.0) + alt(2.0);
        assert!((direct - indep).abs() < 1e-12, "{direct} vs {indep}");
    }

    #[test]
    fn log_branch_matches_plain_logarithm() {
        // Away from the cancellation regime the naive form is accurate and
        // serves as an independent check of the ln_1p rewrite.
        let t = op(PI / 8.0);
        let (a, b) = (t.a(), t.b());
        let coef = a.hypot(1.0);
        let naive = |l: f64| coef / (2.0 * b) * ((l + a - b) / (l + a + b)).ln();
        for &l in &[0.05, 0.3, 1.0, 2.0, 7.5, 120.0] {
            let d = (t.phi(l) - naive(l)).abs();
            assert!(d < 1e-13, "l = {l}: {d}");
        }
    }

    #[test]
    fn endpoint_table() {
        let (lo, hi) = op(FRAC_PI_2).endpoints(2);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, PI);

        let (lo, hi) = op(FRAC_PI_4).endpoints(2);
        assert_eq!(lo, -2.0 * SQRT_2);
        assert_eq!(hi, 0.0);

        // Log branch, n = 1: F(0) = sqrt(a^2+1)/(2b) ln((a-b)/(a+b)), F(inf) = 0.
        let t = op(PI / 8.0);
        let (a, b) = (t.a(), t.b());
        let expected = a.hypot(1.0) / (2.0 * b) * ((a - b) / (a + b)).ln();
        let (lo, hi) = t.endpoints(1);
        assert!((lo - expected).abs() < 1e-12, "{lo} vs {expected}");
        assert_eq!(hi, 0.0);

        // Arctan branch, n = 1: F(0) = sqrt(a^2+1)/b atan((a-b)/(a+b)),
        // F(inf) = pi sqrt(a^2+1) / (4 b).
        let t = op(3.0 * PI / 8.0);
        let (a, b) = (t.a(), t.b());
        let coef = a.hypot(1.0);
        let (lo, hi) = t.endpoints(1);
        assert!((lo - coef / b * ((a - b) / (a + b)).atan()).abs() < 1e-12);
        assert!((hi - PI * coef / (4.0 * b)).abs() < 1e-12);
    }

    #[test]
    fn endpoints_approached_by_extreme_spectra() {
        for &tau in &TAUS {
            let t = op(tau);
            let (lo, hi) = t.endpoints(2);
            let near_zero = t.eval(&[1e-9, 1e-9]).unwrap();
            let near_inf = t.eval(&[1e9, 1e9]).unwrap();
            assert!((near_zero - lo).abs() < 1e-6, "tau = {tau}");
            assert!((near_inf - hi).abs() < 1e-6, "tau = {tau}");
        }
    }

    #[test]
    fn endpoint_ordering_across_the_family() {
        // F(0,...,0) < F(+inf,...,+inf) for every tau on a fine sweep.
        for k in 1..=100 {
            let tau = FRAC_PI_2 * k as f64 / 100.0;
            let t = op(tau);
            for n in [1, 2, 3] {
                let (lo, hi) = t.endpoints(n);
                assert!(lo < hi, "tau = {tau}, n = {n}: {lo} !< {hi}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1a6f);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..500 {
                let l = 10f64.powf(rng.gen_range(-2.0..2.0));
                let fd = fd_dphi(&t, l);
                let an = t.dphi(l);
                let rel = (an - fd).abs() / an.abs();
                assert!(rel < 1e-6, "tau = {tau}, l = {l}: rel = {rel}");
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_and_is_nonpositive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x2b7e);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..500 {
                let l = 10f64.powf(rng.gen_range(-2.0..2.0));
                let fd = fd_ddphi(&t, l);
                let an = t.ddphi(l);
                assert!(an <= 0.0, "tau = {tau}, l = {l}");
                let rel = (an - fd).abs() / an.abs().max(1e-10);
                assert!(rel < 1e-6, "tau = {tau}, l = {l}: rel = {rel}");
            }
        }
    }

    #[test]
    fn inverse_branch_hessian_endpoint() {
        // At lambda -> 0 the inverse-branch second derivative approaches
        // -2 sqrt(2).
        let t = op(FRAC_PI_4);
        assert!((t.ddphi(1e-9) + 2.0 * SQRT_2).abs() < 1e-6);
        assert_eq!(t.ddphi(0.0), -2.0 * SQRT_2);
    }

    #[test]
    fn monotone_in_each_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3c11);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..200 {
                let l1 = 10f64.powf(rng.gen_range(-2.0..2.0));
                let l2 = 10f64.powf(rng.gen_range(-2.0..2.0));
                let bump = 10f64.powf(rng.gen_range(-4.0..0.0));
                let lo = t.eval(&[l1, l2]).unwrap();
                let hi = t.eval(&[l1 + bump, l2]).unwrap();
                assert!(hi > lo, "tau = {tau}: F not increasing at ({l1}, {l2})");
            }
        }
    }

    #[test]
    fn permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4d22);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..200 {
                let l: Vec<f64> = (0..3).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
                let mut p = l.clone();
                p.rotate_left(1);
                let a = t.eval(&l).unwrap();
                let b = t.eval(&p).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn concavity_along_random_segments() {
        // Midpoint concavity of F along segments in the cone.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e33);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..200 {
                let x: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
                let y: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
                let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let fx = t.eval(&x).unwrap();
                let fy = t.eval(&y).unwrap();
                let fm = t.eval(&mid).unwrap();
                assert!(
                    fm >= 0.5 * (fx + fy) - 1e-10 * fm.abs().max(1.0),
                    "tau = {tau}: concavity violated"
                );
            }
        }
    }

    #[test]
    fn rejects_nonpositive_eigenvalues() {
        let t = op(FRAC_PI_2);
        assert!(matches!(
            t.eval(&[1.0, 0.0]),
            Err(OperatorError::NonPositiveEigenvalue { index: 1, .. })
        ));
        assert!(matches!(
            t.eval(&[-0.5, 1.0]),
            Err(OperatorError::NonPositiveEigenvalue { index: 0, .. })
        ));
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn dual_identities() {
        // mu_i^2 dG/dmu_i = dF/dlambda_i at lambda = 1/mu, and
        // dG/dmu_i = lambda_i^2 dF/dlambda_i.
        let mut rng = ChaCha8Rng::seed_from_u64(0x6f44);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..250 {
                let mu: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
                let lambda: Vec<f64> = mu.iter().map(|m| m.recip()).collect();
                let gf = t.grad(&lambda).unwrap();
                let gg = t.dual_grad(&mu).unwrap();
                for i in 0..2 {
                    let lhs = mu[i] * mu[i] * gg[i];
                    let rel = (lhs - gf[i]).abs() / gf[i].abs();
                    assert!(rel < 1e-10, "tau = {tau}: identity off by {rel}");
                    let rhs = lambda[i] * lambda[i] * gf[i];
                    assert!((gg[i] - rhs).abs() / rhs.abs() < 1e-10);
                }
                // Values are opposite by construction.
                let v = t.eval(&lambda).unwrap();
                let d = t.dual_eval(&mu).unwrap();
                assert!((v + d).abs() < 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a55);
        for &tau in &TAUS {
            let t = op(tau);
            for _ in 0..200 {
                let mu: Vec<f64> = (0..2).map(|_| 10f64.powf(rng.gen_range(-1.5..1.5))).collect();
                let g = t.dual_grad(&mu).unwrap();
                for i in 0..2 {
                    let h = 1e-6 * mu[i];
                    let mut up = mu.clone();
                    let mut dn = mu.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (t.dual_eval(&up).unwrap() - t.dual_eval(&dn).unwrap()) / (2.0 * h);
                    let rel = (fd - g[i]).abs() / g[i].abs();
                    assert!(rel < 1e-6, "tau = {tau}, mu = {mu:?}: rel = {rel}");
                }
            }
        }
    }

    #[test]
    fn dual_concavity_from_closed_forms() {
        // Second finite differences of the dual match the closed forms
        // -2 sqrt(a^2+1) (mu + a) / ((1+a mu)^2 -+ (b mu)^2)^2 (log / arctan
        // branches; the sign under the square distinguishes them) and stay
        // nonpositive.
        let mut rng = ChaCha8Rng::seed_from_u64(0x8b66);
        for &tau in &TAUS {
            let t = op(tau);
            let (a, b) = (t.a(), t.b());
            let coef = a.hypot(1.0);
            let expected = |m: f64| -> f64 {
                match t.branch() {
                    Branch::Log => {
                        let q = (1.0 + a * m) * (1.0 + a * m) - (b * m) * (b * m);
                        -2.0 * coef * (m + a) / (q * q)
                    }
                    Branch::Inverse => {
                        let d = 1.0 + m;
                        -2.0 * SQRT_2 / (d * d * d)
                    }
                    Branch::Arctan => {
                        let q = (1.0 + a * m) * (1.0 + a * m) + (b * m) * (b * m);
                        -2.0 * coef * (m + a) / (q * q)
                    }
                    Branch::PureArctan => {
                        let q = 1.0 + m * m;
                        -2.0 * m / (q * q)
                    }
                }
            };
            for _ in 0..200 {
                let m = 10f64.powf(rng.gen_range(-1.5..1.5));
                // Proportional step balancing truncation against roundoff in
                // the second difference (absolute noise scales as eps/h^2).
                let h = 1e-3 * m;
                let fd = (t.dual_eval(&[m + h]).unwrap() - 2.0 * t.dual_eval(&[m]).unwrap()
                    + t.dual_eval(&[m - h]).unwrap())
                    / (h * h);
                let ex = expected(m);
                assert!(ex <= 0.0);
                let err = (fd - ex).abs() / ex.abs().max(1e-8);
                assert!(err < 1e-4, "tau = {tau}, mu = {m}: err = {err}");
            }
        }
    }

    #[test]
    fn window_golden_values() {
        // Inverse branch, s1 = s2 = 1, n = 2.
        let (w1, w2) = op(FRAC_PI_4).structure_window(1.0, 1.0, 2).unwrap();
        assert!((w1.lambda1 - SQRT_2 / 4.0).abs() < 1e-14);
        assert!((w1.lambda2 - 2.0 * SQRT_2).abs() < 1e-14);
        assert!((w2.lambda1 - SQRT_2 / 4.0).abs() < 1e-14);
        assert!((w2.lambda2 - 2.0 * SQRT_2).abs() < 1e-14);

        // Pure arctan, s1 = 1, s2 = 2, n = 2.
        let (w1, w2) = op(FRAC_PI_2).structure_window(1.0, 2.0, 2).unwrap();
        assert!((w1.lambda1 - 0.5).abs() < 1e-14);
        assert!((w1.lambda2 - 2.0).abs() < 1e-14);
        assert!((w2.lambda1 - 0.8).abs() < 1e-14);
        assert!((w2.lambda2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn window_rejects_nonpositive_thresholds() {
        let t = op(FRAC_PI_2);
        assert!(matches!(
            t.structure_window(0.0, 1.0, 2),
            Err(OperatorError::InvalidWindow { .. })
        ));
        assert!(matches!(
            t.structure_window(1.0, -2.0, 2),
            Err(OperatorError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn window_containment_monte_carlo() {
        // Spectra with min <= s1 and max >= s2 keep both trace-like sums
        // inside their closed-form windows.
        let mut rng = ChaCha8Rng::seed_from_u64(0x9c77);
        for &tau in &TAUS {
            let t = op(tau);
            for &(s1, s2) in &[(1.0, 2.0), (0.5, 3.0)] {
                let (w1, w2) = t.structure_window(s1, s2, 2).unwrap();
                for _ in 0..1000 {
                    let small = rng.gen_range(1e-6..s1);
                    let large = s2 + rng.gen_range(0.0..1e3 - s2);
                    let (l1, l2) = if rng.gen_bool(0.5) { (small, large) } else { (large, small) };
                    let g = t.grad(&[l1, l2]).unwrap();
                    let trace = g[0] + g[1];
                    let quad = g[0] * l1 * l1 + g[1] * l2 * l2;
                    assert!(
                        trace >= w1.lambda1 - 1e-12 && trace <= w1.lambda2 + 1e-12,
                        "tau = {tau}: trace {trace} outside [{}, {}]",
                        w1.lambda1,
                        w1.lambda2
                    );
                    assert!(
                        quad >= w2.lambda1 - 1e-12 && quad <= w2.lambda2 + 1e-12,
                        "tau = {tau}: quad {quad} outside [{}, {}]",
                        w2.lambda1,
                        w2.lambda2
                    );
                }
            }
        }
    }

    #[test]
    fn values_continuous_into_the_inverse_branch_from_below() {
        // Log-branch values converge to the inverse branch as tau -> pi/4-;
        // gradients converge from both sides.  (The arctan-branch values
        // carry a diverging additive normalisation as tau -> pi/4+, so no
        // two-sided value comparison is possible; see the gradient check.)
        let at = op(FRAC_PI_4);
        let lo = op(FRAC_PI_4 - 1e-6);
        let lam = [1.0, 2.0];
        let v = at.eval(&lam).unwrap();
        let vl = lo.eval(&lam).unwrap();
        assert!((v - vl).abs() < 1e-4, "{v} vs {vl}");
    }

    #[test]
    fn gradients_continuous_across_the_inverse_branch() {
        let at = op(FRAC_PI_4);
        let lo = op(FRAC_PI_4 - 1e-6);
        let hi = op(FRAC_PI_4 + 1e-6);
        for &l in &[0.2, 1.0, 2.0, 10.0] {
            let g = at.dphi(l);
            assert!((lo.dphi(l) - g).abs() < 1e-4);
            assert!((hi.dphi(l) - g).abs() < 1e-4);
        }
    }

    #[test]
    fn gradients_continuous_into_pure_arctan() {
        let at = op(FRAC_PI_2);
        let near = op(FRAC_PI_2 - 1e-6);
        for &l in &[0.2, 1.0, 2.0, 10.0] {
            assert!((near.dphi(l) - at.dphi(l)).abs() < 1e-4);
        }
    }

    #[test]
    fn spectral_floor_brackets_the_domain() {
        for &tau in &TAUS {
            let t = op(tau);
            let floor = t.spectral_floor();
            if floor.is_finite() {
                // Evaluation just above the floor is finite, and blows up /
                // stays monotone toward it.
                let eps = 1e-9;
                assert!(t.phi(floor + eps).is_finite());
                assert!(t.dphi(floor + eps) > 0.0);
            } else {
                assert!(t.phi(-1e6).is_finite());
            }
        }
    }
}
