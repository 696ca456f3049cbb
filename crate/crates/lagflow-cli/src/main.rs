//! `lagflow` — batch front end for the second-boundary-value parabolic flow.
//!
//! Subcommands:
//! * `run <config>` — parse an experiment config, run the flow with the
//!   estimate ledger attached, write `ledger.csv`, `final_state.txt` and
//!   `summary.txt` into the configured output directory.
//! * `check-operator` — verify the operator family's structure conditions
//!   (monotonicity, concavity, dual concavity, gradient consistency, dual
//!   gradient identity, bounded range) at randomly sampled spectra.
//! * `check-domain` — report a domain's convexity constant and boundary
//!   gradient bounds and verify the defining-function calculus.
//! * `legendre-verify` — check involution, gradient reciprocity and the
//!   closed-form conjugate of a quadratic field on a lattice.
//!
//! Exit codes: 0 success / all checks pass; 1 argument, config or I/O
//! errors; 2 flow did not converge (or a verification table has failures);
//! 3 estimate violations or a hard flow abort; 4 inadmissible initial data.

use clap::{Args, Parser, Subcommand};
use lagflow_core::{
    build_grid, gradient_reciprocity, involution_defect, legendre_transform, parse_config,
    run_experiment, ConvexDomain, ExperimentError, FlowState, OperatorError, Tau,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

/// `out!` that tolerates a closed pipe (`lagflow ... | head`) instead of
/// panicking mid-table.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "lagflow",
    version,
    about = "Second-boundary-value parabolic flow: run experiments and verify structure conditions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a config file.
    Run(RunArgs),
    /// Verify operator structure conditions at sampled spectra.
    CheckOperator(CheckOperatorArgs),
    /// Report and verify a convex domain's defining-function calculus.
    CheckDomain(CheckDomainArgs),
    /// Verify the discrete Legendre transform on a closed-form field.
    LegendreVerify(LegendreArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (INI-style, see README).
    config: PathBuf,
    /// Override the `threads` value from the config (results are
    /// byte-identical for every thread count).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CheckOperatorArgs {
    /// Operator parameter in (0, pi/2].
    #[arg(long)]
    tau: f64,
    /// Number of random spectra to test.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// RNG seed for the sampled spectra.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckDomainArgs {
    /// Disc of this radius.
    #[arg(long, value_name = "R", conflicts_with = "ellipse")]
    disc: Option<f64>,
    /// Axis-aligned ellipse with these semi-axes.
    #[arg(long, value_name = "A,B")]
    ellipse: Option<String>,
    /// Domain center.
    #[arg(long, value_name = "X,Y", default_value = "0,0")]
    center: String,
    /// Number of boundary/projection samples.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// RNG seed for the projection probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LegendreArgs {
    /// Field to transform; currently `quadratic:A,B` for (A x^2 + B y^2)/2.
    #[arg(long, default_value = "quadratic:1,1")]
    field: String,
    /// Lattice spacing.
    #[arg(long, default_value_t = 1.0 / 16.0)]
    spacing: f64,
    /// Radius of the disc the field lives on.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(a) => cmd_run(&a),
        Cmd::CheckOperator(a) => cmd_check_operator(&a),
        Cmd::CheckDomain(a) => cmd_check_domain(&a),
        Cmd::LegendreVerify(a) => cmd_legendre(&a),
    };
    ExitCode::from(code)
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(args: &RunArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return 1;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return 1;
        }
    };
    if let Some(t) = args.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        cfg.threads = t;
    }
    match run_experiment(&cfg) {
        Ok(report) => {
            out!("outcome: {}", report.outcome.label());
            if let Some(c) = report.c_infinity {
                out!("c_infinity = {c}");
            }
            out!(
                "steps: {}  final_t: {}  violations: {}",
                report.steps,
                report
                    .final_t
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "-".into()),
                report.violations
            );
            out!("summary: {}", report.summary_path.display());
            if let Some(p) = &report.ledger_path {
                out!("ledger: {}", p.display());
            }
            if let Some(p) = &report.state_path {
                out!("state: {}", p.display());
            }
            report.outcome.exit_code() as u8
        }
        Err(e) => {
            eprintln!("error: {}{e}", error_tag(&e));
            e.exit_code() as u8
        }
    }
}

/// Stable machine-greppable tag for errors whose Display text alone does not
/// identify the failure class.
fn error_tag(e: &ExperimentError) -> &'static str {
    match e {
        ExperimentError::Operator(OperatorError::TauZeroUnsupported) => "TauZeroUnsupported: ",
        _ => "",
    }
}

// ---------------------------------------------------------------------------
// verification tables

struct Table {
    failures: usize,
}

impl Table {
    fn new() -> Self {
        Table { failures: 0 }
    }
    fn row(&mut self, pass: bool, name: &str, detail: String) {
        if !pass {
            self.failures += 1;
        }
        out!("{} {name:<26} {detail}", if pass { "PASS" } else { "FAIL" });
    }
    fn exit(self) -> u8 {
        if self.failures == 0 {
            0
        } else {
            2
        }
    }
}

fn cmd_check_operator(args: &CheckOperatorArgs) -> u8 {
    let op = match Tau::new(args.tau) {
        Ok(op) => op,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    out!(
        "check-operator tau={} branch={:?} samples={} seed={}",
        op.tau(),
        op.branch(),
        args.samples,
        args.seed
    );
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let spectra: Vec<[f64; 2]> = (0..args.samples)
        .map(|_| {
            [
                10f64.powf(rng.gen_range(-2.0..2.0)),
                10f64.powf(rng.gen_range(-2.0..2.0)),
            ]
        })
        .collect();

    let mut t = Table::new();
    let floor = op.spectral_floor();
    let fd_step = |l: f64| {
        if floor.is_finite() {
            1e-5 * (l - floor)
        } else {
            1e-5 * (1.0 + l)
        }
    };

    // Monotonicity: dF/dlambda_i > 0 on the cone.
    let mut min_grad = f64::INFINITY;
    for s in &spectra {
        for g in op.grad(s).unwrap() {
            min_grad = min_grad.min(g);
        }
    }
    t.row(
        min_grad > 0.0,
        "monotonicity",
        format!("min dF/dlambda = {min_grad:e} (> 0)"),
    );

    // Concavity: the eigenvalue Hessian is diagonal with entries <= 0.
    let mut max_hess = f64::NEG_INFINITY;
    for s in &spectra {
        for hh in op.hess(s).unwrap() {
            max_hess = max_hess.max(hh);
        }
    }
    t.row(
        max_hess <= 1e-10,
        "concavity",
        format!("max d2F/dlambda2 = {max_hess:e} (<= 1e-10)"),
    );

    // Gradient versus central differences of the value.
    let mut max_rel = 0.0f64;
    for s in &spectra {
        let g = op.grad(s).unwrap();
        for i in 0..2 {
            let h = fd_step(s[i]);
            let mut up = *s;
            let mut dn = *s;
            up[i] += h;
            dn[i] -= h;
            let fd = (op.eval(&up).unwrap() - op.eval(&dn).unwrap()) / (2.0 * h);
            max_rel = max_rel.max((fd - g[i]).abs() / g[i].abs().max(1e-300));
        }
    }
    t.row(
        max_rel < 1e-6,
        "gradient-fd",
        format!("max rel err = {max_rel:e} (< 1e-6)"),
    );

    // Dual gradient identity dG/dmu_i = lambda_i^2 dF/dlambda_i.
    let mut max_dual = 0.0f64;
    for s in &spectra {
        let mu = [1.0 / s[0], 1.0 / s[1]];
        let dg = op.dual_grad(&mu).unwrap();
        let g = op.grad(s).unwrap();
        for i in 0..2 {
            max_dual = max_dual.max((dg[i] - s[i] * s[i] * g[i]).abs());
        }
    }
    t.row(
        max_dual < 1e-10,
        "dual-identity",
        format!("max abs err = {max_dual:e} (< 1e-10)"),
    );

    // Dual concavity: finite-difference second derivatives of G stay <= 1e-6.
    let mut max_dual_hess = f64::NEG_INFINITY;
    for s in &spectra {
        let mu = [1.0 / s[0], 1.0 / s[1]];
        for i in 0..2 {
            let h = 1e-3 * mu[i];
            let mut up = mu;
            let mut dn = mu;
            up[i] += h;
            dn[i] -= h;
            let fd = (op.dual_eval(&up).unwrap() - 2.0 * op.dual_eval(&mu).unwrap()
                + op.dual_eval(&dn).unwrap())
                / (h * h);
            max_dual_hess = max_dual_hess.max(fd);
        }
    }
    t.row(
        max_dual_hess <= 1e-6,
        "dual-concavity",
        format!("max fd d2G/dmu2 = {max_dual_hess:e} (<= 1e-6)"),
    );

    // Bounded range: F stays strictly inside its endpoint values.
    let (lo, hi) = op.endpoints(2);
    let mut range_ok = true;
    let mut worst = f64::INFINITY;
    for s in &spectra {
        let v = op.eval(s).unwrap();
        worst = worst.min((v - lo).min(hi - v));
        range_ok &= v > lo && v < hi;
    }
    t.row(
        range_ok,
        "bounded-range",
        format!("range = ({lo}, {hi}), min margin = {worst:e}"),
    );

    t.exit()
}

fn parse_pair_arg(name: &str, v: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("--{name} expects 'a,b', got {v:?}"));
    }
    let a = parts[0]
        .parse()
        .map_err(|e| format!("--{name}: {:?}: {e}", parts[0]))?;
    let b = parts[1]
        .parse()
        .map_err(|e| format!("--{name}: {:?}: {e}", parts[1]))?;
    Ok([a, b])
}

fn cmd_check_domain(args: &CheckDomainArgs) -> u8 {
    let center = match parse_pair_arg("center", &args.center) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let dom = match (&args.disc, &args.ellipse) {
        (Some(r), None) => ConvexDomain::disc(center, *r),
        (None, Some(ax)) => match parse_pair_arg("ellipse", ax) {
            Ok(ax) => ConvexDomain::ellipse(center, ax),
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        },
        _ => {
            eprintln!("error: exactly one of --disc R or --ellipse A,B is required");
            return 1;
        }
    };
    let dom = match dom {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let theta = dom.theta();
    let (glo, ghi) = dom.boundary_grad_bounds();
    let diam = dom.diameter();
    out!(
        "check-domain center=({},{}) semi_axes=({},{})",
        dom.center()[0],
        dom.center()[1],
        dom.semi_axes()[0],
        dom.semi_axes()[1]
    );
    out!("theta (uniform convexity, D^2 h <= -theta I) = {theta}");
    out!("boundary |Dh| in [{glo}, {ghi}]");
    out!("diameter = {diam}");

    let mut t = Table::new();
    let m = args.samples.max(8);
    let pts = dom.sample_boundary(m);

    // Defining function: h = 0 on the boundary, > 0 at the center.
    let mut max_h = 0.0f64;
    for b in &pts {
        max_h = max_h.max(dom.h_eval(b.position).abs());
    }
    let hc = dom.h_eval(dom.center());
    t.row(
        max_h < 1e-9 * diam && hc > 0.0,
        "defining-function",
        format!("max |h| on boundary = {max_h:e}, h(center) = {hc}"),
    );

    // Normals: unit length, pointing inward.
    let mut max_len_err = 0.0f64;
    let mut inward_ok = true;
    for b in &pts {
        let n = b.inward_normal;
        max_len_err = max_len_err.max((n[0].hypot(n[1]) - 1.0).abs());
        let eps = 1e-6 * diam;
        let q = [b.position[0] + eps * n[0], b.position[1] + eps * n[1]];
        inward_ok &= dom.h_eval(q) > 0.0;
    }
    t.row(
        max_len_err < 1e-12 && inward_ok,
        "normals-unit-inward",
        format!("max |1 - |nu|| = {max_len_err:e}, inward probes positive: {inward_ok}"),
    );

    // Uniform concavity of the defining function (constant Hessian).
    let (hxx, hxy, hyy) = dom.h_hess();
    let mean = 0.5 * (hxx + hyy);
    let dd = (0.5 * (hxx - hyy)).hypot(hxy);
    let max_eig = mean + dd;
    t.row(
        max_eig <= -theta + 1e-12,
        "hessian-concavity",
        format!("max eig D^2 h = {max_eig} (<= -theta = {})", -theta),
    );

    // Boundary gradient magnitudes inside the reported bounds.
    let mut ok = true;
    let mut seen_lo = f64::INFINITY;
    let mut seen_hi = f64::NEG_INFINITY;
    for b in &pts {
        let g = dom.h_grad(b.position);
        let n = g[0].hypot(g[1]);
        seen_lo = seen_lo.min(n);
        seen_hi = seen_hi.max(n);
        ok &= n >= glo - 1e-12 && n <= ghi + 1e-12;
    }
    t.row(
        ok,
        "gradient-bounds",
        format!("sampled |Dh| in [{seen_lo}, {seen_hi}]"),
    );

    // Projection: lands on the boundary and is no farther than the best of
    // the dense boundary samples.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut proj_ok = true;
    let mut worst_gap = 0.0f64;
    let c = dom.center();
    let ax = dom.semi_axes();
    for _ in 0..args.samples {
        let p = [
            c[0] + rng.gen_range(-1.5..1.5) * ax[0],
            c[1] + rng.gen_range(-1.5..1.5) * ax[1],
        ];
        let Ok(b) = dom.project_to_boundary(p) else {
            proj_ok = false;
            continue;
        };
        proj_ok &= dom.h_eval(b.position).abs() < 1e-9 * diam;
        let dp = (p[0] - b.position[0]).hypot(p[1] - b.position[1]);
        let best = pts
            .iter()
            .map(|q| (p[0] - q.position[0]).hypot(p[1] - q.position[1]))
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(dp - best);
        // The dense sampling is within O(diam/m) of the true nearest point.
        proj_ok &= dp <= best + 1e-9 * diam;
    }
    t.row(
        proj_ok,
        "projection-nearest",
        format!("max distance excess over {m} boundary samples = {worst_gap:e}"),
    );

    t.exit()
}

fn cmd_legendre(args: &LegendreArgs) -> u8 {
    let Some(spec) = args.field.strip_prefix("quadratic:") else {
        eprintln!(
            "error: unsupported --field {:?}; expected quadratic:A,B",
            args.field
        );
        return 1;
    };
    let [a, b] = match parse_pair_arg("field", spec) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if !(a > 0.0) || !(b > 0.0) {
        eprintln!("error: quadratic coefficients must be positive, got {a},{b}");
        return 1;
    }
    let h = args.spacing;
    let r = args.radius;
    let src_dom = match ConvexDomain::disc([0.0, 0.0], r) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    // Gradient image of the disc under Du = (A x, B y).
    let dst_dom = match ConvexDomain::ellipse([0.0, 0.0], [a * r, b * r]) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let (src, dst) = match (build_grid(src_dom, h), build_grid(dst_dom, h)) {
        (Ok(s), Ok(d)) => (s, d),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    out!(
        "legendre-verify field=quadratic:{a},{b} spacing={h} radius={r} (dual = y1^2/(2 {a}) + y2^2/(2 {b}))"
    );
    let st = FlowState::from_fn(&src, |p| 0.5 * (a * p[0] * p[0] + b * p[1] * p[1]));
    let dual = legendre_transform(&src, &st.u, &dst, 0.0);

    let mut t = Table::new();

    // Closed-form conjugate: the lattice sup only undershoots, by at most
    // the quadratic's curvature over half a cell.
    let gap_bound = 0.125 * h * h * (a + b) + 1e-12;
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut valid = 0usize;
    for j in 0..dst.ny() {
        for i in 0..dst.nx() {
            let k = dst.flat(i, j);
            if !dual.valid[k] {
                continue;
            }
            valid += 1;
            let y = dst.node_pos(i, j);
            let exact = 0.5 * (y[0] * y[0] / a + y[1] * y[1] / b);
            let gap = exact - dual.values[k];
            worst = worst.max(gap.abs());
            ok &= gap >= -1e-12 && gap <= gap_bound;
        }
    }
    t.row(
        ok && valid > 0,
        "closed-form-conjugate",
        format!("{valid} nodes, max gap = {worst:e} (<= {gap_bound:e})"),
    );

    let (inv, n_inv) = involution_defect(&src, &st.u, &dst, &dual);
    t.row(
        n_inv > 0 && inv < 10.0 * h * h,
        "involution",
        format!("sup |L(Lu) - u| = {inv:e} over {n_inv} nodes (< {})", 10.0 * h * h),
    );

    let (rec, n_rec) = gradient_reciprocity(&src, &st.u, &dst, &dual);
    t.row(
        n_rec > 0 && rec < 10.0 * h,
        "gradient-reciprocity",
        format!("sup |Du~(Du x) - x| = {rec:e} over {n_rec} nodes (< {})", 10.0 * h),
    );

    t.exit()
}
