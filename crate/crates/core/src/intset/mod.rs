//! Exact finite integer sets and relations over affine constraints.
//!
//! Every set is a union of pieces. A piece is either a conjunction of affine
//! constraints (equalities, inequalities and congruences) or an explicit,
//! sorted list of points produced by an image computation. All operations are
//! exact. Counting and lexicographic extrema are computed by a depth-first
//! enumeration that prunes each dimension with bounds derived from the
//! constraints and the bounding box of the remaining dimensions.

mod basic;
mod constraint;
mod points;
mod rel;
mod set;
mod union;

use std::fmt;

use thiserror::Error;

pub use constraint::{AffineConstraint, ConstraintKind};
pub use rel::IntRel;
pub use set::IntSet;
pub use union::{UnionRel, UnionSet};


#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntSetError {
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },
    #[error("operation requires a nonempty set")]
    EmptySet,
    #[error("dimension `{0}` is not bounded")]
    Unbounded(String),
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
}

/// A named tuple space such as `S[i, j, k]` or `A[d0, d1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Space {
    name: String,
    dims: Vec<String>,
}

impl Space {
    pub fn new<N, I, D>(name: N, dims: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = D>,
        D: Into<String>,
    {
        Self { name: name.into(), dims: dims.into_iter().map(Into::into).collect() }
    }

    /// Space with anonymous dimensions `d0 .. d{n-1}`.
    pub fn anonymous(name: impl Into<String>, arity: usize) -> Self {
        Self::new(name, (0..arity).map(|d| format!("d{d}")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub(crate) fn check_same(&self, other: &Space) -> Result<(), IntSetError> {
        if self == other {
            Ok(())
        } else {
            Err(IntSetError::SpaceMismatch { left: self.to_string(), right: other.to_string() })
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dims.join(", "))
    }
}

/// An integer tuple. Ordering is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<i64>);

impl Point {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Point(coords.into())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for Point {
    fn from(v: Vec<i64>) -> Self {
        Point(v)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// Selects `<<` (strictly before) or `<<=` (before or equal) against a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexOrder {
    StrictlyBefore,
    BeforeOrEqual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Ascending,
    Descending,
}
