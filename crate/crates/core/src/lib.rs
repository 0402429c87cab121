//! Random-walk Metropolis chains in the plane and their fluid limits.
//!
//! The crate covers the target densities, proposal laws, the chain itself,
//! Monte Carlo and limiting drift fields, the fluid ODE, rescaled-chain
//! experiments, drift-condition diagnostics and polynomial rate sequences.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod chain;
pub mod density;
pub mod drift;
pub mod error;
pub mod export;
pub mod flow;
pub mod geom;
pub mod proposal;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod stopping;

pub use certify::{drift_check, kappa_diagnostics, DriftCheck, DriftReport, KappaCheck, KappaReport};
pub use chain::{simulate, srwm_step, Chain, ChainConfig, Step, Trajectory};
pub use density::{Cone, TailClass, Target, TargetDensity};
pub use drift::{
    delta_infinity, delta_mc, field_grid, h_field, Estimator, FieldEstimate, FieldKind, GridRow, GridSpec, VectorField,
};
pub use error::{Error, ErrorClass, Result};
pub use flow::{
    branch_flow, closed_form_flow, integrate_flow, stability_sweep, Branch, ClosedForm, FluidPath, SweepReport,
};
pub use geom::{vec2, Mat2, Vec2};
pub use proposal::{Base, Moments, Proposal, ProposalSpec};
pub use rates::{ergodic_exponents, Exponents, RateFunction, Regime};
pub use scaling::{ensemble_experiment, scaled_path, sup_distance, PathMode, ScalingExperiment, ScalingReport};
pub use stats::Estimate;
