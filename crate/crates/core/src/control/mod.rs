//! Deterministic control: steering paths `rho`, the inputs `h'` that force
//! `w` onto them, multi-phase attainability plans, their closed-loop
//! certification, and the Kronecker search behind grid-time visits.

mod certify;
mod kronecker;
mod ode;
mod path;
mod plan;

pub use certify::{certify_attainability, AttainabilityCertificate, GridSample};
pub use kronecker::{convergents, kronecker_search, near_rational, KroneckerHit, RATIONAL_MAX_DEN, RATIONAL_TOL};
pub use ode::{integrate, integrate_ode, integrate_until, step_count, OdeConfig, Rk4, Trajectory};
pub use path::{PathPiece, Segment, SmoothPath, STEP_SLOPE_MAX};
pub use plan::{
    check_zero_mean, h_dot_into, orbit_distance, plan_attain, solve_right_inverse, synthesize_rho, ControlInput,
    ControlPlan, HDotScratch, Phase, PlanMetadata, PlanMode, Relocation, RhoMode, SharpPhase, Stagnation, Target,
    DEFAULT_HORIZON,
};

use thiserror::Error;

use crate::field::FieldError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("T*/T = {ratio} is within 1e-12 of {p}/{q}; the periods are commensurable")]
    Incommensurability { ratio: f64, p: u64, q: u64 },
    #[error("no approximation found for n <= {bound}")]
    NotFound { bound: u64 },
    #[error("sigma is not right-invertible at t = {t}, z = {z:?}")]
    SingularSigma { t: f64, z: Vec<f64> },
    #[error("integration diverged after t = {t}: {message}")]
    Divergence { t: f64, message: String },
    #[error("horizon exceeded: {0}")]
    Horizon(String),
    #[error("planning failed: {0}")]
    Planning(String),
    #[error("missing or invalid metadata: {0}")]
    Metadata(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
