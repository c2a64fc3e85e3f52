//! Loop-nest IR, the nest-description document format, and microkernel
//! substitution.
//!
//! A nest is a perfect loop nest around one statement. When the document
//! names a microkernel, its band loops are the innermost loops, tagged
//! [`LoopTag::MicrokernelBand`]; [`LoopNest::restore_microkernel`] collapses
//! them back into a call for emission.

mod emit;
mod expr;
mod parse;

use thiserror::Error;

use crate::intset::{AffineConstraint, IntRel, IntSet, Space, UnionRel};

pub use expr::AffineExpr;
pub use parse::parse_nest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoopNestError {
    #[error("line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("line {line}: unbound parameter `{name}`")]
    UnboundParameter { line: usize, name: String },
    #[error("line {line}: non-affine expression `{text}`")]
    NonAffineExpression { line: usize, text: String },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("nest has no microkernel specification")]
    MissingMicrokernelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessMode {
    Read,
    Write,
}

impl AccessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::Read => "read",
            AccessMode::Write => "write",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayRef {
    pub array: String,
    /// Subscripts over loop variables, with lets and parameters folded in.
    pub index: Vec<AffineExpr>,
    /// Reference as written in the document, e.g. `A[i][k]`.
    pub text: String,
    pub mode: AccessMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub id: String,
    /// References in document order.
    pub refs: Vec<ArrayRef>,
    /// Statement text for emission; synthesized from the references if absent.
    pub body: Option<String>,
}

impl Statement {
    pub fn reads(&self) -> impl Iterator<Item = &ArrayRef> {
        self.refs.iter().filter(|r| r.mode == AccessMode::Read)
    }

    pub fn writes(&self) -> impl Iterator<Item = &ArrayRef> {
        self.refs.iter().filter(|r| r.mode == AccessMode::Write)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopTag {
    Normal,
    MicrokernelBand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopOrigin {
    /// Loop from the document; bound texts are kept for emission.
    Source { lower_text: String, upper_text: String },
    /// Tile-index loop produced by tiling `of`, whose trip count was `trip`.
    TileIndex { of: String, size: i64, trip: i64 },
    /// Intra-tile loop; `of = base + size * tile_var + var`.
    TilePoint { of: String, size: i64, base: i64, tile_var: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    pub var: String,
    /// Inclusive lower bound.
    pub lower: AffineExpr,
    /// Exclusive upper bound.
    pub upper: AffineExpr,
    /// Second exclusive upper bound (the loop runs to the smaller of the two).
    /// Only tiling produces it, for remainder tiles.
    pub extra_upper: Option<AffineExpr>,
    pub step: i64,
    pub tag: LoopTag,
    pub origin: LoopOrigin,
}

impl Loop {
    /// Trip count when both bounds are constant.
    pub fn trip_count(&self) -> Option<i64> {
        let lo = self.lower.as_constant()?;
        let mut hi = self.upper.as_constant()?;
        if let Some(e) = &self.extra_upper {
            hi = hi.min(e.as_constant()?);
        }
        Some(if hi <= lo { 0 } else { (hi - lo + self.step - 1) / self.step })
    }

    pub fn is_band(&self) -> bool {
        self.tag == LoopTag::MicrokernelBand
    }
}

/// A named affine helper such as `ij = oj * STRIDE_H`, folded into
/// subscripts during parsing and re-emitted for readability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Let {
    pub name: String,
    pub expr: AffineExpr,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicrokernelSpec {
    pub callee: String,
    pub band_loop_vars: Vec<String>,
    pub call_args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    /// Band loops (if any) are part of `LoopNest::loops`.
    Inline,
    /// Band loops collapsed into one microkernel call.
    Call { band: Vec<Loop> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopNest {
    pub params: Vec<(String, i64)>,
    pub annotations: Vec<String>,
    pub loops: Vec<Loop>,
    pub lets: Vec<Let>,
    pub stmt: Statement,
    pub microkernel: Option<MicrokernelSpec>,
    pub body: Body,
}

/// Access relations of a nest's statement.
#[derive(Debug, Clone)]
pub struct AccessRelations {
    /// One relation per reference, aligned with `Statement::refs`.
    pub per_ref: Vec<IntRel>,
    pub read: UnionRel,
    pub write: UnionRel,
}

impl AccessRelations {
    pub fn all(&self) -> UnionRel {
        self.read.union(&self.write).expect("same iteration space")
    }
}

impl LoopNest {
    /// All loops outermost first, band loops included even when restored.
    pub fn all_loops(&self) -> Vec<&Loop> {
        let band: &[Loop] = match &self.body {
            Body::Inline => &[],
            Body::Call { band } => band,
        };
        self.loops.iter().chain(band).collect()
    }

    pub fn loop_vars(&self) -> Vec<String> {
        self.all_loops().iter().map(|l| l.var.clone()).collect()
    }

    pub fn param(&self, name: &str) -> Option<i64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn space(&self) -> Space {
        Space::new(self.stmt.id.clone(), self.loop_vars())
    }

    /// Loop-bound constraints over the loop variables.
    pub fn domain_constraints(&self) -> Vec<AffineConstraint> {
        let dims = self.loop_vars();
        let n = dims.len();
        let lin = |e: &AffineExpr| e.to_coeffs(&dims).expect("bounds use enclosing loop variables");
        let mut cons = Vec::new();
        for (d, l) in self.all_loops().into_iter().enumerate() {
            // x - lower >= 0
            let (mut c, k) = lin(&l.lower);
            c.iter_mut().for_each(|a| *a = -*a);
            c[d] += 1;
            cons.push(AffineConstraint::ge(c.clone(), -k));
            if l.step > 1 {
                cons.push(AffineConstraint::congruent(c, -k, l.step));
            }
            for up in std::iter::once(&l.upper).chain(&l.extra_upper) {
                // upper - 1 - x >= 0
                let (mut c, k) = lin(up);
                c[d] -= 1;
                cons.push(AffineConstraint::ge(c, k - 1));
            }
        }
        debug_assert!(cons.iter().all(|c| c.arity() == n));
        cons
    }

    /// One point per dynamic execution of the statement.
    pub fn iteration_space(&self) -> IntSet {
        IntSet::from_constraints(self.space(), self.domain_constraints()).expect("loop bounds are finite")
    }

    pub fn ref_space(&self, r: &ArrayRef) -> Space {
        Space::anonymous(r.array.clone(), r.index.len())
    }

    /// `{ iteration -> element }` for one reference.
    pub fn access_relation(&self, r: &ArrayRef) -> IntRel {
        let dims = self.loop_vars();
        let rows: Vec<(Vec<i64>, i64)> =
            r.index.iter().map(|e| e.to_coeffs(&dims).expect("subscripts use loop variables")).collect();
        IntRel::from_affine_map(self.space(), self.ref_space(r), &rows).expect("affine map is well formed")
    }

    pub fn access_relations(&self) -> AccessRelations {
        let space = self.space();
        let mut read = UnionRel::new(space.clone());
        let mut write = UnionRel::new(space);
        let mut per_ref = Vec::with_capacity(self.stmt.refs.len());
        for r in &self.stmt.refs {
            let rel = self.access_relation(r);
            match r.mode {
                AccessMode::Read => read.insert(rel.clone()),
                AccessMode::Write => write.insert(rel.clone()),
            }
            .expect("same iteration space");
            per_ref.push(rel);
        }
        AccessRelations { per_ref, read, write }
    }

    /// Collapses the band loops into a microkernel call.
    pub fn restore_microkernel(&self) -> Result<LoopNest, LoopNestError> {
        let spec = self.microkernel.as_ref().ok_or(LoopNestError::MissingMicrokernelSpec)?;
        if matches!(self.body, Body::Call { .. }) {
            return Ok(self.clone());
        }
        let split = self.loops.len() - spec.band_loop_vars.len();
        let mut out = self.clone();
        let band = out.loops.split_off(split);
        debug_assert!(band.iter().zip(&spec.band_loop_vars).all(|(l, v)| &l.var == v && l.is_band()));
        out.body = Body::Call { band };
        Ok(out)
    }

    /// Inverse of [`LoopNest::restore_microkernel`].
    pub fn inline_microkernel(&self) -> Result<LoopNest, LoopNestError> {
        if self.microkernel.is_none() {
            return Err(LoopNestError::MissingMicrokernelSpec);
        }
        let mut out = self.clone();
        if let Body::Call { band } = std::mem::replace(&mut out.body, Body::Inline) {
            out.loops.extend(band);
        }
        Ok(out)
    }

    /// C-like source text.
    pub fn emit(&self) -> String {
        emit::emit(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEPPED: &str = "loop i lower 0 upper 8 step 2\nstatement S\n  write A[i]\nend\n";

    #[test]
    fn stepped_loop_counts_executed_iterations() {
        let n = parse_nest(STEPPED).unwrap();
        let s = n.iteration_space();
        assert_eq!(s.cardinality(), 4);
        assert_eq!(s.lexmax().unwrap().0, vec![6]);
        assert_eq!(n.loops[0].trip_count(), Some(4));
    }

    #[test]
    fn statement_without_reads_has_empty_read_relation() {
        let n = parse_nest(STEPPED).unwrap();
        let acc = n.access_relations();
        assert!(acc.read.is_empty());
        assert_eq!(acc.per_ref.len(), 1);
    }

    #[test]
    fn restore_requires_a_spec() {
        let n = parse_nest(STEPPED).unwrap();
        assert_eq!(n.restore_microkernel().unwrap_err(), LoopNestError::MissingMicrokernelSpec);
    }
}
