//! Symbolic scalar and vector fields over time-space coordinates `(t, x, y, z)`.
//!
//! Expressions are immutable `Arc` trees with exact differentiation,
//! conservative simplification, an s-expression text form and compiled tapes
//! for fast evaluation. Vector fields carry an explicit coordinate basis so
//! Jacobians and Lie brackets are taken over exactly the coordinates they
//! act on.

mod expr;
mod sexpr;
pub mod special;
mod tape;
mod vector;

pub use expr::{Coord, CoordSet, Env, Expr, Node};
pub use tape::{CompiledExprs, Tape};
pub use vector::{state_basis, time_space_basis, xy_basis, z_basis, Point, VectorFieldExpr};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite value at node {path}")]
    NonFinite { path: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("bracket carries a nonzero time component: {0}")]
    TimeSlot(String),
}

/// Differentiates `e` with respect to `c`, checking `c` against the ambient dimensions `(n, l)`.
pub fn differentiate(e: &Expr, c: Coord, n: usize, l: usize) -> Result<Expr, FieldError> {
    let ok = match c {
        Coord::T => true,
        Coord::X(i) | Coord::Z(i) => i < n,
        Coord::Y(j) => j < l,
    };
    if !ok {
        return Err(FieldError::Dimension(format!("coordinate {c} outside N={n}, L={l}")));
    }
    Ok(e.diff(c))
}

/// Checks that every coordinate referenced by `e` lies within `(n, l)`.
pub fn check_dims(e: &Expr, n: usize, l: usize) -> Result<(), FieldError> {
    let (ex, ey, ez) = e.coords().extents();
    if ex > n || ey > l || ez > n {
        return Err(FieldError::Dimension(format!("expression {e} references coordinates outside N={n}, L={l}")));
    }
    Ok(())
}

/// Serde adapter storing an [`Expr`] as its s-expression string.
pub mod serde_expr {
    use super::Expr;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(e)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}
