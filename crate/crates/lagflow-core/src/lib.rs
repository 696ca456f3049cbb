//! Numerical core for the oblique second-boundary-value flow
//! `u_t = F[D^2 u] - f(x)` with `Du(Omega) = OmegaTilde` on uniformly convex
//! planar domains.
//!
//! Modules:
//! - [`operators`]: the one-parameter concave operator family `F_tau` acting
//!   on Hessian spectra, its gradients, duals and structure windows;
//! - [`spectral`]: closed-form symmetric 2x2 eigensystems and spectral
//!   function application;
//! - [`domains`]: uniformly convex domains (discs, axis-aligned ellipses),
//!   defining functions and boundary projections;
//! - [`grid`], [`flow`]: Cartesian discretisation and the explicit flow with
//!   the transported oblique boundary condition;
//! - [`legendre`]: discrete Legendre transform and dual-equation checks;
//! - [`diagnostics`]: admissibility gate and the runtime estimate ledger;
//! - [`forcing`], [`config`], [`stateio`], [`experiment`]: the linear
//!   forcing terms, INI configuration, plain-text state files and the
//!   end-to-end runner.

pub mod config;
pub mod diagnostics;
pub mod domains;
pub mod experiment;
pub mod flow;
pub mod forcing;
pub mod grid;
pub mod legendre;
pub mod operators;
pub mod spectral;
pub mod stateio;

pub use config::{parse_config, ConfigError, ExperimentConfig, InitialData};
pub use diagnostics::{
    check_admissibility, eigenvalue_window, obliqueness, AdmissibilityReport, DiagnosticsError,
    EigenWindow, EstimateLedger,
};
pub use domains::{BoundaryPoint, ConvexDomain, DomainError};
pub use experiment::{
    config_from_summary, run_experiment, ExperimentError, ExperimentReport, Outcome,
};
pub use flow::{
    quadratic_initial, Flow, FlowError, FlowParams, FlowState, RunOptions, RunSummary, StepReport,
};
pub use forcing::ForcingFunction;
pub use grid::{build_grid, FlowGrid, GridError, NodeClass};
pub use legendre::{
    dual_flow_residual, gradient_reciprocity, involution_defect, legendre_transform, DualState,
};
pub use operators::{Branch, OperatorError, Spectrum, StructureWindow, Tau};
pub use spectral::{apply_operator, operator_derivative, EigenPair, SpectralError, SymMatrix2};
pub use stateio::{load_state, save_state, StateError};
