//! Toolkit for degenerate diffusions driven by a randomly perturbed periodic
//! input: symbolic bracket-rank certification, control-path synthesis,
//! Euler–Maruyama simulation and recurrence diagnostics.

pub mod control;
pub mod field;
pub mod hoermander;
pub mod linalg;
pub mod model;
pub mod recurrence;
pub mod sim;
