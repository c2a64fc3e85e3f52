use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use super::basic::BasicSet;
use super::points::PointSet;
use super::{AffineConstraint, Direction, IntSetError, LexOrder, Point, Space};

/// Symbolic differences that fan out beyond this many pieces are
/// materialized instead.
const MAX_SYMBOLIC_PIECES: usize = 1024;

/// Explicit pieces are rendered up to this many points.
const DISPLAY_POINTS: usize = 16;

#[derive(Debug, Clone)]
pub(crate) enum Piece {
    Basic(Arc<BasicSet>),
    Points(Arc<PointSet>),
}

impl Piece {
    fn contains(&self, p: &[i64]) -> bool {
        match self {
            Piece::Basic(b) => b.contains(p),
            Piece::Points(s) => s.contains(p),
        }
    }

    fn count(&self) -> u64 {
        match self {
            Piece::Basic(b) => b.count().expect("pieces are bounded"),
            Piece::Points(s) => s.len() as u64,
        }
    }

    fn first(&self, dir: Direction) -> Option<Vec<i64>> {
        match self {
            Piece::Basic(b) => b.first(dir).expect("pieces are bounded"),
            Piece::Points(s) => match dir {
                Direction::Ascending => s.first().map(<[i64]>::to_vec),
                Direction::Descending => s.last().map(<[i64]>::to_vec),
            },
        }
    }

    fn for_each<F: FnMut(&[i64])>(&self, f: &mut F) {
        match self {
            Piece::Basic(b) => b
                .for_each(Direction::Ascending, |p| {
                    f(p);
                    ControlFlow::Continue(())
                })
                .expect("pieces are bounded"),
            Piece::Points(s) => s.iter().for_each(f),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Piece::Basic(b) => b.is_empty().expect("pieces are bounded"),
            Piece::Points(s) => s.is_empty(),
        }
    }

    fn materialize(&self, arity: usize) -> PointSet {
        match self {
            Piece::Points(s) => (**s).clone(),
            Piece::Basic(b) => {
                let mut data = Vec::new();
                let mut rows = 0;
                b.for_each(Direction::Ascending, |p| {
                    data.extend_from_slice(p);
                    rows += 1;
                    ControlFlow::Continue(())
                })
                .expect("pieces are bounded");
                PointSet::from_flat(arity, rows, data)
            }
        }
    }
}

/// A finite set of integer tuples in a named space.
#[derive(Debug, Clone)]
pub struct IntSet {
    space: Space,
    pieces: Vec<Piece>,
    /// Pieces are known to be pairwise disjoint.
    disjoint: bool,
}

impl IntSet {
    pub fn empty(space: Space) -> Self {
        Self { space, pieces: Vec::new(), disjoint: true }
    }

    /// The set of points satisfying every constraint. Fails unless each
    /// dimension is bounded above and below.
    pub fn from_constraints(space: Space, constraints: Vec<AffineConstraint>) -> Result<Self, IntSetError> {
        let n = space.arity();
        if let Some(c) = constraints.iter().find(|c| c.arity() != n) {
            return Err(IntSetError::Arity { expected: n, got: c.arity() });
        }
        let basic = BasicSet::new(n, constraints);
        basic.check_bounded().map_err(|d| IntSetError::Unbounded(space.dims()[d.0].clone()))?;
        Ok(Self::from_basic(space, basic))
    }

    /// Rectangular set with inclusive `(lo, hi)` bounds per dimension.
    pub fn boxed(space: Space, bounds: &[(i64, i64)]) -> Result<Self, IntSetError> {
        let n = space.arity();
        if bounds.len() != n {
            return Err(IntSetError::Arity { expected: n, got: bounds.len() });
        }
        let cons = bounds
            .iter()
            .enumerate()
            .flat_map(|(d, &(lo, hi))| AffineConstraint::range(n, d, lo, hi))
            .collect();
        Self::from_constraints(space, cons)
    }

    pub fn from_points<I: IntoIterator<Item = Point>>(space: Space, points: I) -> Result<Self, IntSetError> {
        let n = space.arity();
        let mut rows = Vec::new();
        for p in points {
            if p.arity() != n {
                return Err(IntSetError::Arity { expected: n, got: p.arity() });
            }
            rows.push(p.0);
        }
        Ok(Self::from_point_set(space, PointSet::from_rows(n, rows)))
    }

    pub(crate) fn from_basic(space: Space, basic: BasicSet) -> Self {
        let pieces = if basic.trivially_empty() { Vec::new() } else { vec![Piece::Basic(Arc::new(basic))] };
        Self { space, pieces, disjoint: true }
    }

    pub(crate) fn from_point_set(space: Space, points: PointSet) -> Self {
        let pieces = if points.is_empty() { Vec::new() } else { vec![Piece::Points(Arc::new(points))] };
        Self { space, pieces, disjoint: true }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.iter().all(Piece::is_empty)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.arity() == self.space.arity() && self.pieces.iter().any(|pc| pc.contains(&p.0))
    }

    pub fn union(&self, other: &IntSet) -> Result<IntSet, IntSetError> {
        self.space.check_same(&other.space)?;
        if self.pieces.is_empty() {
            return Ok(other.clone());
        }
        if other.pieces.is_empty() {
            return Ok(self.clone());
        }
        let all_points = self.pieces.iter().chain(&other.pieces).all(|p| matches!(p, Piece::Points(_)));
        if all_points {
            let mut merged: Option<PointSet> = None;
            for p in self.pieces.iter().chain(&other.pieces) {
                let Piece::Points(s) = p else { unreachable!() };
                merged = Some(match merged {
                    None => (**s).clone(),
                    Some(m) => m.merge(s),
                });
            }
            return Ok(Self::from_point_set(self.space.clone(), merged.expect("nonempty")));
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Ok(IntSet { space: self.space.clone(), pieces, disjoint: false })
    }

    pub fn intersect(&self, other: &IntSet) -> Result<IntSet, IntSetError> {
        self.space.check_same(&other.space)?;
        let mut pieces = Vec::new();
        for a in &self.pieces {
            for b in &other.pieces {
                match (a, b) {
                    (Piece::Basic(x), Piece::Basic(y)) => {
                        let both = x.intersect(y);
                        if !both.trivially_empty() {
                            pieces.push(Piece::Basic(Arc::new(both)));
                        }
                    }
                    (Piece::Points(s), other) | (other, Piece::Points(s)) => {
                        let kept = s.filter(|p| other.contains(p));
                        if !kept.is_empty() {
                            pieces.push(Piece::Points(Arc::new(kept)));
                        }
                    }
                }
            }
        }
        Ok(IntSet { space: self.space.clone(), pieces, disjoint: self.disjoint && other.disjoint })
    }

    pub fn subtract(&self, other: &IntSet) -> Result<IntSet, IntSetError> {
        self.space.check_same(&other.space)?;
        let n = self.space.arity();
        let mut pieces = self.pieces.clone();
        for b in &other.pieces {
            let mut next = Vec::with_capacity(pieces.len());
            for a in &pieces {
                subtract_piece(a, b, n, &mut next);
            }
            pieces = next;
        }
        Ok(IntSet { space: self.space.clone(), pieces, disjoint: self.disjoint })
    }

    /// Points of `self` lexicographically before (or equal to) `p`.
    pub fn lex_order_set(&self, p: &Point, mode: LexOrder) -> Result<IntSet, IntSetError> {
        let n = self.space.arity();
        if p.arity() != n {
            return Err(IntSetError::Arity { expected: n, got: p.arity() });
        }
        let region = lex_region(&self.space, p, mode);
        self.intersect(&region)
    }

    pub fn lexmin(&self) -> Result<Point, IntSetError> {
        self.extremum(Direction::Ascending)
    }

    pub fn lexmax(&self) -> Result<Point, IntSetError> {
        self.extremum(Direction::Descending)
    }

    fn extremum(&self, dir: Direction) -> Result<Point, IntSetError> {
        let best = self.pieces.iter().filter_map(|p| p.first(dir)).reduce(|a, b| match dir {
            Direction::Ascending => a.min(b),
            Direction::Descending => a.max(b),
        });
        best.map(Point).ok_or(IntSetError::EmptySet)
    }

    /// Exact number of distinct points.
    pub fn cardinality(&self) -> u64 {
        if self.disjoint || self.pieces.len() <= 1 {
            return self.pieces.iter().map(Piece::count).sum();
        }
        let mut total = 0u64;
        for (i, piece) in self.pieces.iter().enumerate() {
            let earlier = &self.pieces[..i];
            piece.for_each(&mut |p: &[i64]| {
                if !earlier.iter().any(|e| e.contains(p)) {
                    total += 1;
                }
            });
        }
        total
    }

    /// Visits every point at least once (overlapping pieces may repeat).
    pub(crate) fn for_each_point<F: FnMut(&[i64])>(&self, mut f: F) {
        for piece in &self.pieces {
            piece.for_each(&mut f);
        }
    }

    /// All points in lexicographic order.
    pub fn points(&self) -> Vec<Point> {
        let n = self.space.arity();
        let mut data = Vec::new();
        let mut rows = 0;
        self.for_each_point(|p| {
            data.extend_from_slice(p);
            rows += 1;
        });
        PointSet::from_flat(n, rows, data).iter().map(|r| Point(r.to_vec())).collect()
    }

    pub fn is_subset(&self, other: &IntSet) -> Result<bool, IntSetError> {
        Ok(self.subtract(other)?.is_empty())
    }

    /// Extensional equality.
    pub fn set_eq(&self, other: &IntSet) -> Result<bool, IntSetError> {
        Ok(self.is_subset(other)? && other.is_subset(self)?)
    }
}

fn subtract_piece(a: &Piece, b: &Piece, n: usize, out: &mut Vec<Piece>) {
    match (a, b) {
        (Piece::Points(s), other) => {
            let kept = s.filter(|p| !other.contains(p));
            if !kept.is_empty() {
                out.push(Piece::Points(Arc::new(kept)));
            }
        }
        (Piece::Basic(x), Piece::Basic(y)) => {
            let pieces = x.subtract(y);
            if pieces.len() > MAX_SYMBOLIC_PIECES {
                let kept = a.materialize(n).filter(|p| !y.contains(p));
                if !kept.is_empty() {
                    out.push(Piece::Points(Arc::new(kept)));
                }
            } else {
                out.extend(pieces.into_iter().map(|p| Piece::Basic(Arc::new(p))));
            }
        }
        (Piece::Basic(_), Piece::Points(s)) => {
            if s.iter().any(|p| a.contains(p)) {
                let kept = a.materialize(n).filter(|p| !s.contains(p));
                if !kept.is_empty() {
                    out.push(Piece::Points(Arc::new(kept)));
                }
            } else {
                out.push(a.clone());
            }
        }
    }
}

/// `{ x : x << p }` or `{ x : x <<= p }` as disjoint basic pieces; unbounded
/// on its own, so only used as an intersection operand.
fn lex_region(space: &Space, p: &Point, mode: LexOrder) -> IntSet {
    let n = space.arity();
    let mut pieces = Vec::new();
    let prefix_eq = |upto: usize| -> Vec<AffineConstraint> {
        (0..upto)
            .map(|k| {
                let mut c = vec![0; n];
                c[k] = 1;
                AffineConstraint::eq(c, -p.0[k])
            })
            .collect()
    };
    for d in 0..n {
        let mut cons = prefix_eq(d);
        let mut c = vec![0; n];
        c[d] = -1;
        cons.push(AffineConstraint::ge(c, p.0[d] - 1));
        pieces.push(Piece::Basic(Arc::new(BasicSet::new(n, cons))));
    }
    if mode == LexOrder::BeforeOrEqual {
        pieces.push(Piece::Basic(Arc::new(BasicSet::new(n, prefix_eq(n)))));
    }
    IntSet { space: space.clone(), pieces, disjoint: true }
}

impl fmt::Display for IntSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = self.space.to_string();
        if self.pieces.is_empty() {
            return write!(f, "{{ {header} : false }}");
        }
        let mut parts = Vec::new();
        for piece in &self.pieces {
            match piece {
                Piece::Basic(b) => {
                    let cons: Vec<String> =
                        b.constraints().iter().map(|c| c.render(self.space.dims())).collect();
                    if cons.is_empty() {
                        parts.push(header.clone());
                    } else {
                        parts.push(format!("{header} : {}", cons.join(" and ")));
                    }
                }
                Piece::Points(s) => {
                    for p in s.iter().take(DISPLAY_POINTS) {
                        parts.push(format!("{}{}", self.space.name(), Point(p.to_vec())));
                    }
                    if s.len() > DISPLAY_POINTS {
                        parts.push(format!("... ({} points)", s.len()));
                    }
                }
            }
        }
        write!(f, "{{ {} }}", parts.join("; "))
    }
}
