//! Explicit parabolic flow `u_t = F[D^2 u] - f(x)` with the gradient image
//! constrained to a target convex domain: `Du(Omega) = OmegaTilde`, expressed
//! through the defining function as `h_tilde(Du) = 0` on the boundary.
//!
//! Interior nodes use the standard nine-point second differences (exact on
//! quadratic data).  Boundary nodes do not carry the PDE; instead their value
//! `g` is chosen so the *transported* gradient
//!
//! `Du(p) ~ G(x_b; g) + H(x_b; g) (p - x_b)`
//!
//! satisfies `h_tilde(Du(p)) = 0` at the projection `p` of the node onto the
//! continuous boundary.  `G` is a second-order one-sided gradient and `H` a
//! one-sided Hessian, both linear in `g`, so each node reduces to a scalar
//! concave root find solved by Newton; nodes are relaxed in ascending
//! arc-parameter order (Gauss-Seidel) until the residual drops below `tol_bc`.
//!
//! The time step obeys the spectral parabolicity bound
//! `dt = cfl * h^2 / (4 * max_i dphi(lambda_i))` taken over all interior
//! eigenvalues of the current Hessian field.

use crate::domains::ConvexDomain;
use crate::forcing::ForcingFunction;
use crate::grid::{FlowGrid, NodeClass};
use crate::operators::Tau;
use crate::spectral::SymMatrix2;
use thiserror::Error;

/// Relaxation sweeps are capped; a non-converged sweep is reported through
/// the residual rather than treated as fatal.
pub const MAX_SWEEPS: usize = 20;
/// Newton iterations per boundary node.
pub const MAX_NEWTON: usize = 50;
/// The boundary Newton derivative `<Dh(Du), dDu/dg>` must stay below this
/// (it is negative for an oblique, inward-pushing condition; the scale
/// already carries the 1/spacing factor through `dDu/dg`).
pub const OBLIQUENESS_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("cfl must lie in (0, 1], got {0}")]
    InvalidCfl(f64),
    #[error(
        "convexity lost at t={t}: Hessian eigenvalue {eig} at node ({i},{j}) \
         reached the operator domain floor {floor}"
    )]
    ConvexityLost {
        t: f64,
        i: usize,
        j: usize,
        eig: f64,
        floor: f64,
    },
    #[error("boundary Newton diverged at node ({i},{j}) (final residual {residual:e})")]
    NewtonDiverged { i: usize, j: usize, residual: f64 },
    #[error(
        "obliqueness lost at node ({i},{j}): boundary derivative {derivative:e} \
         is not safely negative"
    )]
    ObliquenessLost { i: usize, j: usize, derivative: f64 },
}

/// Discrete solution: one value per lattice node (exterior entries unused).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: Vec<f64>,
}

impl FlowState {
    pub fn from_fn(grid: &FlowGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut u = vec![0.0; grid.node_count()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let k = grid.flat(i, j);
                if grid.class(k) != NodeClass::Exterior {
                    u[k] = f(grid.node_pos(i, j));
                }
            }
        }
        FlowState { t: 0.0, u }
    }

    /// Add a constant to every non-exterior value (gauge shift).
    pub fn shift(&mut self, grid: &FlowGrid, c: f64) {
        for (k, v) in self.u.iter_mut().enumerate() {
            if grid.class(k) != NodeClass::Exterior {
                *v += c;
            }
        }
    }
}

/// The natural initial condition for a pair of domains: gradient map is the
/// affine map taking `Omega` onto `OmegaTilde` axis by axis, so
/// `u0(x) = c_tilde . x + 1/2 sum_i (b_i / a_i) (x_i - o_i)^2`.
pub fn quadratic_initial(grid: &FlowGrid, target: &ConvexDomain) -> FlowState {
    let o = grid.omega().center();
    let a = grid.omega().semi_axes();
    let ot = target.center();
    let b = target.semi_axes();
    FlowState::from_fn(grid, |p| {
        let dx = p[0] - o[0];
        let dy = p[1] - o[1];
        ot[0] * p[0] + ot[1] * p[1] + 0.5 * (b[0] / a[0] * dx * dx + b[1] / a[1] * dy * dy)
    })
}

#[derive(Debug, Clone, Copy)]
enum D1 {
    /// `(u[kp] - u[km]) / 2h`, no dependence on the node value.
    Central { kp: usize, km: usize },
    /// `s * (-3 g + 4 u[k1] - u[k2]) / 2h`, second order, exact on quadratics.
    Sided2 { s: f64, k1: usize, k2: usize },
    /// `s * (u[k1] - g) / h`, first-order fallback.
    Sided1 { s: f64, k1: usize },
}

#[derive(Debug, Clone, Copy)]
enum D2 {
    /// `(u[kp] - 2 g + u[km]) / h^2`.
    Central { kp: usize, km: usize },
    /// `(g - 2 u[k1] + u[k2]) / h^2` along one side.
    Sided { k1: usize, k2: usize },
    /// No stencil available; transport term dropped.
    None,
}

#[derive(Debug, Clone, Copy)]
enum DCross {
    /// `(u[kpp] + u[kmm] - u[kpm] - u[kmp]) / 4h^2`.
    Full {
        kpp: usize,
        kmm: usize,
        kpm: usize,
        kmp: usize,
    },
    /// `sgn * (u[kxy] - u[kx] - u[ky] + g) / h^2` into one quadrant.
    Sided {
        sgn: f64,
        kxy: usize,
        kx: usize,
        ky: usize,
    },
    None,
}

#[derive(Debug, Clone)]
struct BStencil {
    flat: usize,
    i: usize,
    j: usize,
    /// Offset from the node to its boundary projection.
    d: [f64; 2],
    /// Inward unit normal at the projection.
    nu: [f64; 2],
    d1x: D1,
    d1y: D1,
    d2x: D2,
    d2y: D2,
    dxy: DCross,
    /// `d(Du)/dg`: the transported gradient is linear in the node value.
    m: [f64; 2],
    /// True when every part of the stencil is exact on quadratic data.
    exact: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub cfl: f64,
    pub tol_bc: f64,
    pub threads: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            cfl: 0.5,
            tol_bc: 1e-10,
            threads: 1,
        }
    }
}

/// Per-step diagnostics, one row of the estimate ledger.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    /// Mean of `du/dt` over interior nodes; converges to the flow constant.
    pub c_estimate: f64,
    /// Oscillation (max - min) of `du/dt` over interior nodes.
    pub osc_udot: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    /// `min <Dh(Du), nu> / |Dh(Du)|` over boundary nodes.
    pub min_obliqueness: f64,
    /// Sup of `|h_tilde(Du)|` over boundary nodes after relaxation.
    pub bc_residual: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_max: f64,
    pub tol_c: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub converged: bool,
    pub steps: usize,
    pub final_report: Option<StepReport>,
}

impl RunSummary {
    pub fn c_infinity(&self) -> Option<f64> {
        self.final_report.map(|r| r.c_estimate)
    }
}

#[derive(Debug, Clone, Copy)]
struct ChunkStats {
    min_eig: f64,
    max_eig: f64,
    gmax: f64,
}

impl ChunkStats {
    fn empty() -> Self {
        ChunkStats {
            min_eig: f64::INFINITY,
            max_eig: f64::NEG_INFINITY,
            gmax: 0.0,
        }
    }
    fn merge(&mut self, o: ChunkStats) {
        self.min_eig = self.min_eig.min(o.min_eig);
        self.max_eig = self.max_eig.max(o.max_eig);
        self.gmax = self.gmax.max(o.gmax);
    }
}

#[derive(Debug, Clone, Copy)]
struct RhsStats {
    min_eig: f64,
    max_eig: f64,
    gmax: f64,
    c_mean: f64,
    osc: f64,
}

pub struct Flow<'g> {
    grid: &'g FlowGrid,
    op: Tau,
    target: ConvexDomain,
    forcing: ForcingFunction,
    params: FlowParams,
    floor: f64,
    f_packed: Vec<f64>,
    bstencils: Vec<BStencil>,
    udot: Vec<f64>,
    cache: Option<RhsStats>,
}

impl<'g> Flow<'g> {
    pub fn new(
        grid: &'g FlowGrid,
        op: Tau,
        target: ConvexDomain,
        forcing: ForcingFunction,
        params: FlowParams,
    ) -> Result<Self, FlowError> {
        if !(params.cfl > 0.0 && params.cfl <= 1.0) {
            return Err(FlowError::InvalidCfl(params.cfl));
        }
        let f_packed: Vec<f64> = grid
            .interior()
            .iter()
            .map(|&k| {
                let (i, j) = grid.coords(k as usize);
                forcing.eval(grid.node_pos(i, j))
            })
            .collect();
        let bstencils = build_boundary_stencils(grid);
        let udot = vec![0.0; grid.interior_count()];
        Ok(Flow {
            grid,
            op,
            target,
            forcing,
            params,
            floor: op.spectral_floor(),
            f_packed,
            bstencils,
            udot,
            cache: None,
        })
    }

    pub fn grid(&self) -> &FlowGrid {
        self.grid
    }
    pub fn operator(&self) -> &Tau {
        &self.op
    }
    pub fn target(&self) -> &ConvexDomain {
        &self.target
    }
    pub fn forcing(&self) -> &ForcingFunction {
        &self.forcing
    }
    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// True when every boundary stencil is exact on quadratic data
    /// (second-order sided gradients, full transport terms).
    pub fn stencils_second_order(&self) -> bool {
        self.bstencils.iter().all(|s| s.exact)
    }

    /// Interior nine-point Hessian at a flat index (caller must pass an
    /// interior node).
    pub fn interior_hessian(&self, u: &[f64], flat: usize) -> SymMatrix2 {
        let nx = self.grid.nx();
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let u0 = u[flat];
        let a11 = (u[flat + 1] - 2.0 * u0 + u[flat - 1]) * inv_h2;
        let a22 = (u[flat + nx] - 2.0 * u0 + u[flat - nx]) * inv_h2;
        let a12 = (u[flat + nx + 1] + u[flat - nx - 1] - u[flat + nx - 1] - u[flat - nx + 1])
            * (0.25 * inv_h2);
        SymMatrix2::new(a11, a12, a22)
    }

    /// Transported gradient at the projection of boundary node `b`
    /// (index into `grid.boundary()` order), using the current node value.
    pub fn boundary_gradient(&self, u: &[f64], b: usize) -> [f64; 2] {
        let st = &self.bstencils[b];
        self.transported_gradient(u, st, u[st.flat])
    }

    /// One-sided Hessian at boundary node `b` (transport matrix).
    pub fn boundary_hessian(&self, u: &[f64], b: usize) -> SymMatrix2 {
        let st = &self.bstencils[b];
        let g = u[st.flat];
        let (hxx, hyy, hxy) = self.boundary_second(u, st, g);
        SymMatrix2::new(hxx, hxy, hyy)
    }

    /// Sup of `|h_tilde(Du)|` over boundary nodes for the current values.
    pub fn boundary_residual(&self, u: &[f64]) -> f64 {
        let mut r = 0.0f64;
        for st in &self.bstencils {
            let du = self.transported_gradient(u, st, u[st.flat]);
            r = r.max(self.target.h_eval(du).abs());
        }
        r
    }

    /// `min <Dh(Du), nu> / |Dh(Du)|` over boundary nodes.
    pub fn min_obliqueness(&self, u: &[f64]) -> f64 {
        let mut worst = f64::INFINITY;
        for st in &self.bstencils {
            let du = self.transported_gradient(u, st, u[st.flat]);
            let beta = self.target.h_grad(du);
            let norm = beta[0].hypot(beta[1]);
            if norm > 0.0 {
                worst = worst.min((beta[0] * st.nu[0] + beta[1] * st.nu[1]) / norm);
            }
        }
        worst
    }

    fn boundary_second(&self, u: &[f64], st: &BStencil, g: f64) -> (f64, f64, f64) {
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let hxx = match st.d2x {
            D2::Central { kp, km } => (u[kp] - 2.0 * g + u[km]) * inv_h2,
            D2::Sided { k1, k2 } => (g - 2.0 * u[k1] + u[k2]) * inv_h2,
            D2::None => 0.0,
        };
        let hyy = match st.d2y {
            D2::Central { kp, km } => (u[kp] - 2.0 * g + u[km]) * inv_h2,
            D2::Sided { k1, k2 } => (g - 2.0 * u[k1] + u[k2]) * inv_h2,
            D2::None => 0.0,
        };
        let hxy = match st.dxy {
            DCross::Full { kpp, kmm, kpm, kmp } => {
                (u[kpp] + u[kmm] - u[kpm] - u[kmp]) * (0.25 * inv_h2)
            }
            DCross::Sided { sgn, kxy, kx, ky } => sgn * (u[kxy] - u[kx] - u[ky] + g) * inv_h2,
            DCross::None => 0.0,
        };
        (hxx, hyy, hxy)
    }

    fn transported_gradient(&self, u: &[f64], st: &BStencil, g: f64) -> [f64; 2] {
        let h = self.grid.spacing();
        let inv_2h = 0.5 / h;
        let inv_h = 1.0 / h;
        let gx = match st.d1x {
            D1::Central { kp, km } => (u[kp] - u[km]) * inv_2h,
            D1::Sided2 { s, k1, k2 } => s * (-3.0 * g + 4.0 * u[k1] - u[k2]) * inv_2h,
            D1::Sided1 { s, k1 } => s * (u[k1] - g) * inv_h,
        };
        let gy = match st.d1y {
            D1::Central { kp, km } => (u[kp] - u[km]) * inv_2h,
            D1::Sided2 { s, k1, k2 } => s * (-3.0 * g + 4.0 * u[k1] - u[k2]) * inv_2h,
            D1::Sided1 { s, k1 } => s * (u[k1] - g) * inv_h,
        };
        let (hxx, hyy, hxy) = self.boundary_second(u, st, g);
        [
            gx + hxx * st.d[0] + hxy * st.d[1],
            gy + hyy * st.d[1] + hxy * st.d[0],
        ]
    }

    fn solve_boundary_node(&self, u: &[f64], st: &BStencil) -> Result<f64, FlowError> {
        let mut g = u[st.flat];
        for _ in 0..MAX_NEWTON {
            let du = self.transported_gradient(u, st, g);
            let phi = self.target.h_eval(du);
            let beta = self.target.h_grad(du);
            let dphi = beta[0] * st.m[0] + beta[1] * st.m[1];
            if dphi >= -OBLIQUENESS_FLOOR {
                return Err(FlowError::ObliquenessLost {
                    i: st.i,
                    j: st.j,
                    derivative: dphi,
                });
            }
            let delta = phi / dphi;
            g -= delta;
            if delta.abs() <= 1e-15 * (1.0 + g.abs()) {
                return Ok(g);
            }
        }
        let du = self.transported_gradient(u, st, g);
        let phi = self.target.h_eval(du);
        if phi.abs() < 1e-8 {
            Ok(g)
        } else {
            Err(FlowError::NewtonDiverged {
                i: st.i,
                j: st.j,
                residual: phi.abs(),
            })
        }
    }

    /// Gauss-Seidel relaxation of the boundary condition in ascending
    /// arc-parameter order.  Returns `(sweeps_done, final_residual)`; the
    /// state is untouched when the residual already meets `tol_bc`.
    pub fn enforce_boundary(&self, u: &mut [f64]) -> Result<(usize, f64), FlowError> {
        let mut sweeps = 0;
        loop {
            let res = self.boundary_residual(u);
            if res < self.params.tol_bc || sweeps >= MAX_SWEEPS {
                return Ok((sweeps, res));
            }
            for st in &self.bstencils {
                u[st.flat] = self.solve_boundary_node(u, st)?;
            }
            sweeps += 1;
        }
    }

    fn refresh_rhs(&mut self, state: &FlowState) -> Result<RhsStats, FlowError> {
        let n = self.grid.interior_count();
        let threads = self.params.threads.clamp(1, n.max(1));
        let op = self.op;
        let floor = self.floor;
        let nx = self.grid.nx();
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let t = state.t;
        let interior = self.grid.interior();
        let u: &[f64] = &state.u;
        let f_packed: &[f64] = &self.f_packed;
        let udot: &mut [f64] = &mut self.udot;

        let mut stats = ChunkStats::empty();
        if threads == 1 {
            stats.merge(rhs_chunk(
                op, floor, nx, inv_h2, t, interior, f_packed, u, udot,
            )?);
        } else {
            let chunk = n.div_ceil(threads);
            let results: Vec<Result<ChunkStats, FlowError>> = std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for ((idx, fv), out) in interior
                    .chunks(chunk)
                    .zip(f_packed.chunks(chunk))
                    .zip(udot.chunks_mut(chunk))
                {
                    handles.push(
                        scope.spawn(move || rhs_chunk(op, floor, nx, inv_h2, t, idx, fv, u, out)),
                    );
                }
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            // Merge in spawn order; min/max are exactly associative so the
            // outcome is identical for every thread count.
            for r in results {
                stats.merge(r?);
            }
        }

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in self.udot.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
        }
        let out = RhsStats {
            min_eig: stats.min_eig,
            max_eig: stats.max_eig,
            gmax: stats.gmax,
            c_mean: sum / n as f64,
            osc: hi - lo,
        };
        self.cache = Some(out);
        Ok(out)
    }

    /// One explicit Euler step followed by boundary relaxation.  The
    /// right-hand side evaluated at the end of the previous step is reused,
    /// so the flow makes exactly one interior pass per step.
    pub fn step(&mut self, state: &mut FlowState) -> Result<StepReport, FlowError> {
        let pre = match self.cache {
            Some(s) => s,
            None => self.refresh_rhs(state)?,
        };
        let h = self.grid.spacing();
        let dt = self.params.cfl * h * h / (4.0 * pre.gmax);
        for (m, &k) in self.grid.interior().iter().enumerate() {
            state.u[k as usize] += dt * self.udot[m];
        }
        // Boundary values drift with the mean interior speed so the Newton
        // warm start stays inside its basin even when the operator carries a
        // large additive level; the relaxation below only corrects the gap.
        for st in &self.bstencils {
            state.u[st.flat] += dt * pre.c_mean;
        }
        state.t += dt;
        let (sweeps, bc_residual) = self.enforce_boundary(&mut state.u)?;
        let post = self.refresh_rhs(state)?;
        Ok(StepReport {
            t: state.t,
            dt,
            c_estimate: post.c_mean,
            osc_udot: post.osc,
            min_eig: post.min_eig,
            max_eig: post.max_eig,
            min_obliqueness: self.min_obliqueness(&state.u),
            bc_residual,
            sweeps,
        })
    }

    /// Run until the interior time derivative flattens (`osc < tol_c`) or
    /// `t_max` is reached.  The recorder fires on the first step, every
    /// `record_every`-th step, and on the final step.
    pub fn run(
        &mut self,
        state: &mut FlowState,
        opts: &RunOptions,
        mut recorder: impl FnMut(&Flow, &FlowState, &StepReport),
    ) -> Result<RunSummary, FlowError> {
        debug_assert_eq!(state.u.len(), self.grid.node_count());
        self.enforce_boundary(&mut state.u)?;
        self.cache = None;
        let every = opts.record_every.max(1);
        let mut steps = 0usize;
        let mut last: Option<StepReport> = None;
        let mut last_recorded = false;
        let mut converged = false;
        while state.t < opts.t_max {
            let rep = self.step(state)?;
            steps += 1;
            converged = rep.osc_udot < opts.tol_c;
            let record = steps == 1 || steps % every == 0 || converged;
            if record {
                recorder(self, state, &rep);
            }
            last_recorded = record;
            last = Some(rep);
            if converged {
                break;
            }
        }
        if !last_recorded {
            if let Some(rep) = &last {
                recorder(self, state, rep);
            }
        }
        Ok(RunSummary {
            converged,
            steps,
            final_report: last,
        })
    }
}

fn rhs_chunk(
    op: Tau,
    floor: f64,
    nx: usize,
    inv_h2: f64,
    t: f64,
    idx: &[u32],
    f: &[f64],
    u: &[f64],
    out: &mut [f64],
) -> Result<ChunkStats, FlowError> {
    let mut st = ChunkStats::empty();
    for ((&k, &fv), o) in idx.iter().zip(f.iter()).zip(out.iter_mut()) {
        let k = k as usize;
        let u0 = u[k];
        let a11 = (u[k + 1] - 2.0 * u0 + u[k - 1]) * inv_h2;
        let a22 = (u[k + nx] - 2.0 * u0 + u[k - nx]) * inv_h2;
        let a12 =
            (u[k + nx + 1] + u[k - nx - 1] - u[k + nx - 1] - u[k - nx + 1]) * (0.25 * inv_h2);
        let mean = 0.5 * (a11 + a22);
        let half = 0.5 * (a11 - a22);
        let dd = (half * half + a12 * a12).sqrt();
        let l1 = mean - dd;
        let l2 = mean + dd;
        if l1 <= floor {
            return Err(FlowError::ConvexityLost {
                t,
                i: k % nx,
                j: k / nx,
                eig: l1,
                floor,
            });
        }
        *o = op.phi(l1) + op.phi(l2) - fv;
        st.min_eig = st.min_eig.min(l1);
        st.max_eig = st.max_eig.max(l2);
        st.gmax = st.gmax.max(op.dphi(l1).max(op.dphi(l2)));
    }
    Ok(st)
}

fn build_boundary_stencils(grid: &FlowGrid) -> Vec<BStencil> {
    let nx = grid.nx();
    let h = grid.spacing();
    let avail = |k: usize| grid.class(k) != NodeClass::Exterior;
    let mut out = Vec::with_capacity(grid.boundary().len());
    for b in grid.boundary() {
        let k = b.flat as usize;
        let (i, j) = (b.i as usize, b.j as usize);
        let pos = grid.node_pos(i, j);
        let d = [
            b.proj.position[0] - pos[0],
            b.proj.position[1] - pos[1],
        ];

        // Gradients at boundary nodes are one-sided *inward* (direction of
        // the inward normal component) whenever two inside nodes exist on
        // that side.  This keeps the node-value sensitivity of the
        // transported gradient at O(1/h) with a sign matching the outward
        // derivative of h-tilde; a centred gradient would leave only the
        // O(d/h^2) transport terms, whose sign points the wrong way and
        // makes the scalar boundary solve ill-posed.  All preferred branches
        // remain exact on quadratics.
        let axis = |sn: f64, kp: usize, km: usize, kp2: usize, km2: usize| -> (D1, D2, bool) {
            let s = if sn >= 0.0 { 1.0 } else { -1.0 };
            let (k1, k2, l1, l2) = if s > 0.0 {
                (kp, kp2, km, km2)
            } else {
                (km, km2, kp, kp2)
            };
            if avail(k1) && avail(k2) {
                (D1::Sided2 { s, k1, k2 }, D2::Sided { k1, k2 }, true)
            } else if avail(k1) && avail(l1) {
                (D1::Central { kp, km }, D2::Central { kp, km }, true)
            } else if avail(l1) && avail(l2) {
                (
                    D1::Sided2 {
                        s: -s,
                        k1: l1,
                        k2: l2,
                    },
                    D2::Sided { k1: l1, k2: l2 },
                    true,
                )
            } else if avail(k1) {
                (D1::Sided1 { s, k1 }, D2::None, false)
            } else if avail(l1) {
                (D1::Sided1 { s: -s, k1: l1 }, D2::None, false)
            } else {
                // Sliver demotion in the grid builder guarantees an inside
                // axis neighbour on at least one side.
                unreachable!("boundary node without axis neighbours")
            }
        };
        let nu = b.proj.inward_normal;
        let (d1x, d2x, ex) = axis(nu[0], k + 1, k - 1, k + 2, k - 2);
        let (d1y, d2y, ey) = axis(nu[1], k + nx, k - nx, k + 2 * nx, k - 2 * nx);

        let dxy = if avail(k + nx + 1) && avail(k - nx - 1) && avail(k + nx - 1) && avail(k - nx + 1)
        {
            DCross::Full {
                kpp: k + nx + 1,
                kmm: k - nx - 1,
                kpm: k - nx + 1,
                kmp: k + nx - 1,
            }
        } else {
            // Try the inward quadrant first, then its reflections.
            let sx = if nu[0] >= 0.0 { 1i64 } else { -1 };
            let sy = if nu[1] >= 0.0 { 1i64 } else { -1 };
            let mut found = DCross::None;
            for (dx, dy) in [(sx, sy), (sx, -sy), (-sx, sy), (-sx, -sy)] {
                let kx = (k as i64 + dx) as usize;
                let ky = (k as i64 + dy * nx as i64) as usize;
                let kxy = (k as i64 + dx + dy * nx as i64) as usize;
                if avail(kx) && avail(ky) && avail(kxy) {
                    found = DCross::Sided {
                        sgn: (dx * dy) as f64,
                        kxy,
                        kx,
                        ky,
                    };
                    break;
                }
            }
            found
        };

        let inv_2h = 0.5 / h;
        let inv_h2 = 1.0 / (h * h);
        let c1 = |d1: &D1| match *d1 {
            D1::Central { .. } => 0.0,
            D1::Sided2 { s, .. } => -3.0 * s * inv_2h,
            D1::Sided1 { s, .. } => -s / h,
        };
        let c2 = |d2: &D2| match *d2 {
            D2::Central { .. } => -2.0 * inv_h2,
            D2::Sided { .. } => inv_h2,
            D2::None => 0.0,
        };
        let cc = match dxy {
            DCross::Full { .. } => 0.0,
            DCross::Sided { sgn, .. } => sgn * inv_h2,
            DCross::None => 0.0,
        };
        let m = [
            c1(&d1x) + c2(&d2x) * d[0] + cc * d[1],
            c1(&d1y) + c2(&d2y) * d[1] + cc * d[0],
        ];
        let exact = ex && ey && !matches!(dxy, DCross::None);

        out.push(BStencil {
            flat: k,
            i,
            j,
            d,
            nu,
            d1x,
            d1y,
            d2x,
            d2y,
            dxy,
            m,
            exact,
        });
    }
    out
}
