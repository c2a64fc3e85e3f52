//! A single conjunction of affine constraints and its pruned enumeration.

use std::ops::ControlFlow;

use super::constraint::{AffineConstraint, ConstraintKind};
use super::Direction;

/// Propagation stops after this many sweeps; bounds found so far stay sound.
const MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Interval {
    pub lo: Option<i128>,
    pub hi: Option<i128>,
}

impl Interval {
    const FREE: Interval = Interval { lo: None, hi: None };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct UnboundedDim(pub usize);

#[derive(Debug, Clone)]
pub(crate) struct BasicSet {
    arity: usize,
    constraints: Vec<AffineConstraint>,
    /// Equivalent system with unit-coefficient equalities substituted out;
    /// used for propagation and search.
    reduced: Vec<AffineConstraint>,
    bounds: Vec<Interval>,
    infeasible: bool,
}

impl BasicSet {
    pub fn new(arity: usize, constraints: Vec<AffineConstraint>) -> Self {
        debug_assert!(constraints.iter().all(|c| c.arity() == arity));
        let mut bounds = vec![Interval::FREE; arity];
        let reduced = eliminate_equalities(&constraints);
        let feasible = propagate(&reduced, &mut bounds) && propagate(&constraints, &mut bounds);
        Self { arity, constraints, reduced, bounds, infeasible: !feasible }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn constraints(&self) -> &[AffineConstraint] {
        &self.constraints
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    /// True when propagation alone proves emptiness.
    pub fn trivially_empty(&self) -> bool {
        self.infeasible
    }

    pub fn check_bounded(&self) -> Result<(), UnboundedDim> {
        if self.infeasible {
            return Ok(());
        }
        match self.bounds.iter().position(|b| b.lo.is_none() || b.hi.is_none()) {
            Some(d) => Err(UnboundedDim(d)),
            None => Ok(()),
        }
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        !self.infeasible && self.constraints.iter().all(|c| c.holds(point))
    }

    pub fn intersect(&self, other: &BasicSet) -> BasicSet {
        let mut cons = self.constraints.clone();
        cons.extend(other.constraints.iter().cloned());
        BasicSet::new(self.arity, cons)
    }

    pub fn with_constraints(&self, extra: impl IntoIterator<Item = AffineConstraint>) -> BasicSet {
        let mut cons = self.constraints.clone();
        cons.extend(extra);
        BasicSet::new(self.arity, cons)
    }

    /// Disjoint pieces covering `self - other`.
    pub fn subtract(&self, other: &BasicSet) -> Vec<BasicSet> {
        if self.infeasible {
            return Vec::new();
        }
        if other.infeasible {
            return vec![self.clone()];
        }
        let mut pieces = Vec::new();
        let mut prefix = self.constraints.clone();
        for c in &other.constraints {
            for neg in c.negations() {
                let mut cons = prefix.clone();
                cons.push(neg);
                let piece = BasicSet::new(self.arity, cons);
                if !piece.infeasible {
                    pieces.push(piece);
                }
            }
            prefix.push(c.clone());
            if BasicSet::new(self.arity, prefix.clone()).infeasible {
                break;
            }
        }
        pieces
    }

    /// Visits points in lexicographic order until `f` breaks.
    pub fn for_each<F>(&self, dir: Direction, mut f: F) -> Result<(), UnboundedDim>
    where
        F: FnMut(&[i64]) -> ControlFlow<()>,
    {
        if self.infeasible {
            return Ok(());
        }
        self.check_bounded()?;
        if self.arity == 0 {
            let _ = f(&[]);
            return Ok(());
        }
        let plan = Plan::new(self);
        let mut state = plan.state();
        let _ = plan.walk(0, &mut state, dir, &mut f);
        Ok(())
    }

    pub fn first(&self, dir: Direction) -> Result<Option<Vec<i64>>, UnboundedDim> {
        let mut found = None;
        self.for_each(dir, |p| {
            found = Some(p.to_vec());
            ControlFlow::Break(())
        })?;
        Ok(found)
    }

    pub fn is_empty(&self) -> Result<bool, UnboundedDim> {
        Ok(self.first(Direction::Ascending)?.is_none())
    }

    pub fn count(&self) -> Result<u64, UnboundedDim> {
        if self.infeasible {
            return Ok(0);
        }
        self.check_bounded()?;
        if self.arity == 0 {
            return Ok(1);
        }
        let plan = Plan::new(self);
        let mut state = plan.state();
        Ok(plan.count(0, &mut state))
    }
}

/// Uses each equality with a unit coefficient to substitute its last such
/// variable out of every other constraint. Constraints that become
/// `0 >= c` with `c <= 0` are dropped; contradictions are kept so that
/// propagation reports them.
fn eliminate_equalities(constraints: &[AffineConstraint]) -> Vec<AffineConstraint> {
    let mut cons = constraints.to_vec();
    let mut i = 0;
    while i < cons.len() {
        let pivot = match cons[i].kind {
            ConstraintKind::Eq => cons[i].coeffs.iter().rposition(|&a| a == 1 || a == -1),
            _ => None,
        };
        if let Some(v) = pivot {
            let e = cons[i].clone();
            for (j, c) in cons.iter_mut().enumerate() {
                if j == i || c.coeffs[v] == 0 {
                    continue;
                }
                // c - (c_v / e_v) * e, with e_v = +-1
                let f = c.coeffs[v] as i128 * e.coeffs[v] as i128;
                let coeffs: Option<Vec<i64>> = c
                    .coeffs
                    .iter()
                    .zip(&e.coeffs)
                    .map(|(&a, &b)| i64::try_from(a as i128 - f * b as i128).ok())
                    .collect();
                let constant = i64::try_from(c.constant as i128 - f * e.constant as i128).ok();
                if let (Some(coeffs), Some(constant)) = (coeffs, constant) {
                    c.coeffs = coeffs;
                    c.constant = constant;
                }
            }
        }
        i += 1;
    }
    cons.retain(|c| !(c.coeffs.iter().all(|&a| a == 0) && c.holds(&vec![0; c.arity()])));
    cons
}

/// Runs bound propagation to a fixpoint (or the sweep limit). Returns false
/// when the constraints are proven infeasible.
fn propagate(constraints: &[AffineConstraint], bounds: &mut [Interval]) -> bool {
    for c in constraints {
        if c.coeffs.iter().all(|&a| a == 0) && !c.holds(&vec![0; c.arity()]) {
            return false;
        }
    }
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for c in constraints {
            let step = match c.kind {
                ConstraintKind::Ge => tighten(&c.coeffs, c.constant, 1, bounds),
                ConstraintKind::Eq => tighten(&c.coeffs, c.constant, 1, bounds)
                    .and_then(|a| tighten(&c.coeffs, c.constant, -1, bounds).map(|b| a | b)),
                ConstraintKind::Congruent(m) => tighten_congruence(c, m, bounds),
            };
            match step {
                Some(ch) => changed |= ch,
                None => return false,
            }
        }
        if !changed {
            break;
        }
    }
    true
}

/// Tightens bounds for `sign * (coeffs . x + constant) >= 0`. Returns `None`
/// when infeasible, otherwise whether anything changed.
fn tighten(coeffs: &[i64], constant: i64, sign: i128, bounds: &mut [Interval]) -> Option<bool> {
    let mut finite = sign * constant as i128;
    let mut open = 0usize;
    let mut open_dim = 0usize;
    let mut maxes = Vec::with_capacity(coeffs.len());
    for (d, &a) in coeffs.iter().enumerate() {
        let a = sign * a as i128;
        let m = if a == 0 {
            Some(0)
        } else if a > 0 {
            bounds[d].hi.map(|h| a * h)
        } else {
            bounds[d].lo.map(|l| a * l)
        };
        match m {
            Some(v) => finite += v,
            None => {
                open += 1;
                open_dim = d;
            }
        }
        maxes.push(m);
    }
    if open == 0 && finite < 0 {
        return None;
    }
    let mut changed = false;
    for (d, &a) in coeffs.iter().enumerate() {
        let a = sign * a as i128;
        if a == 0 {
            continue;
        }
        let rest = match (open, maxes[d]) {
            (0, Some(m)) => finite - m,
            (1, None) if open_dim == d => finite,
            _ => continue,
        };
        // a * x_d + rest >= 0
        let b = &mut bounds[d];
        if a > 0 {
            let lo = ceil_div(-rest, a);
            if b.lo.is_none_or(|l| l < lo) {
                b.lo = Some(lo);
                changed = true;
            }
        } else {
            let hi = floor_div(rest, -a);
            if b.hi.is_none_or(|h| h > hi) {
                b.hi = Some(hi);
                changed = true;
            }
        }
        if let (Some(l), Some(h)) = (b.lo, b.hi) {
            if l > h {
                return None;
            }
        }
    }
    Some(changed)
}

fn tighten_congruence(c: &AffineConstraint, m: i64, bounds: &mut [Interval]) -> Option<bool> {
    let mut it = c.coeffs.iter().enumerate().filter(|(_, &a)| a != 0);
    let (d, &a) = match (it.next(), it.next()) {
        (Some(first), None) => first,
        _ => return Some(false),
    };
    let (residue, step) = solve_congruence(a as i128, c.constant as i128, m as i128)?;
    let b = &mut bounds[d];
    let mut changed = false;
    if let Some(l) = b.lo {
        let nl = align_up(l, residue, step);
        if nl != l {
            b.lo = Some(nl);
            changed = true;
        }
    }
    if let Some(h) = b.hi {
        let nh = align_down(h, residue, step);
        if nh != h {
            b.hi = Some(nh);
            changed = true;
        }
    }
    if let (Some(l), Some(h)) = (b.lo, b.hi) {
        if l > h {
            return None;
        }
    }
    Some(changed)
}

/// Solutions of `a*x + c = 0 (mod m)` as `x = residue (mod step)`.
pub(crate) fn solve_congruence(a: i128, c: i128, m: i128) -> Option<(i128, i128)> {
    let a = a.rem_euclid(m);
    let target = (-c).rem_euclid(m);
    let g = gcd(a, m);
    if target % g != 0 {
        return None;
    }
    let step = m / g;
    if step == 1 {
        return Some((0, 1));
    }
    let inv = mod_inverse(a / g, step)?;
    Some((((target / g) * inv).rem_euclid(step), step))
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

fn align_up(x: i128, residue: i128, step: i128) -> i128 {
    x + (residue - x).rem_euclid(step)
}

fn align_down(x: i128, residue: i128, step: i128) -> i128 {
    x - (x - residue).rem_euclid(step)
}

pub(crate) fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }
}

pub(crate) fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

struct Congruence {
    coeffs: Vec<i128>,
    constant: i128,
    modulus: i128,
}

/// Precomputed per-level data for the depth-first walk.
struct Plan {
    n: usize,
    /// Halfspaces `coeffs . x + constant >= 0` (equalities contribute two).
    half_coeffs: Vec<Vec<i128>>,
    half_const: Vec<i128>,
    /// `later_max[h][d]`: max of `sum_{k>d} a_k x_k` over the bounding box.
    later_max: Vec<Vec<i128>>,
    level_halves: Vec<Vec<usize>>,
    congs: Vec<Congruence>,
    level_congs: Vec<Vec<usize>>,
    bounds: Vec<(i128, i128)>,
}

struct WalkState {
    x: Vec<i64>,
    /// Row `d` holds the partial sums of every halfspace over dims `< d`.
    partial: Vec<i128>,
    partial_cong: Vec<i128>,
}

#[derive(Clone, Copy)]
struct Range {
    lo: i128,
    hi: i128,
    step: i128,
}

impl Plan {
    fn new(set: &BasicSet) -> Self {
        let n = set.arity;
        let bounds: Vec<(i128, i128)> =
            set.bounds.iter().map(|b| (b.lo.expect("bounded"), b.hi.expect("bounded"))).collect();
        let mut half_coeffs = Vec::new();
        let mut half_const = Vec::new();
        let mut congs = Vec::new();
        for c in &set.reduced {
            let coeffs: Vec<i128> = c.coeffs.iter().map(|&a| a as i128).collect();
            match c.kind {
                ConstraintKind::Ge => {
                    half_coeffs.push(coeffs);
                    half_const.push(c.constant as i128);
                }
                ConstraintKind::Eq => {
                    half_coeffs.push(coeffs.iter().map(|a| -a).collect());
                    half_const.push(-(c.constant as i128));
                    half_coeffs.push(coeffs);
                    half_const.push(c.constant as i128);
                }
                ConstraintKind::Congruent(m) => {
                    congs.push(Congruence { coeffs, constant: c.constant as i128, modulus: m as i128 })
                }
            }
        }
        let mut later_max = Vec::with_capacity(half_coeffs.len());
        for coeffs in &half_coeffs {
            let mut row = vec![0i128; n];
            let mut acc = 0i128;
            for d in (0..n).rev() {
                row[d] = acc;
                let a = coeffs[d];
                let (lo, hi) = bounds[d];
                acc += if a > 0 { a * hi } else { a * lo };
            }
            later_max.push(row);
        }
        let mut level_halves = vec![Vec::new(); n];
        for (h, coeffs) in half_coeffs.iter().enumerate() {
            for (d, &a) in coeffs.iter().enumerate() {
                if a != 0 {
                    level_halves[d].push(h);
                }
            }
        }
        let mut level_congs = vec![Vec::new(); n];
        for (i, c) in congs.iter().enumerate() {
            if let Some(d) = c.coeffs.iter().rposition(|&a| a != 0) {
                level_congs[d].push(i);
            }
        }
        Plan { n, half_coeffs, half_const, later_max, level_halves, congs, level_congs, bounds }
    }

    fn state(&self) -> WalkState {
        let h = self.half_coeffs.len();
        let c = self.congs.len();
        let mut partial = vec![0i128; (self.n + 1) * h];
        partial[..h].copy_from_slice(&self.half_const);
        let mut partial_cong = vec![0i128; (self.n + 1) * c];
        for (i, cg) in self.congs.iter().enumerate() {
            partial_cong[i] = cg.constant;
        }
        WalkState { x: vec![0; self.n], partial, partial_cong }
    }

    /// Feasible values of dim `d` given fixed dims `< d`; `None` if empty.
    fn range(&self, d: usize, st: &WalkState) -> Option<Range> {
        let (mut lo, mut hi) = self.bounds[d];
        let h = self.half_coeffs.len();
        let row = &st.partial[d * h..(d + 1) * h];
        for &i in &self.level_halves[d] {
            let a = self.half_coeffs[i][d];
            let rest = row[i] + self.later_max[i][d];
            if a > 0 {
                lo = lo.max(ceil_div(-rest, a));
            } else {
                hi = hi.min(floor_div(rest, -a));
            }
        }
        if lo > hi {
            return None;
        }
        let mut step = 1;
        if let Some(&first) = self.level_congs[d].first() {
            let c = &self.congs[first];
            let r = st.partial_cong[d * self.congs.len() + first];
            let (residue, s) = solve_congruence(c.coeffs[d], r, c.modulus)?;
            lo = align_up(lo, residue, s);
            hi = align_down(hi, residue, s);
            step = s;
            if lo > hi {
                return None;
            }
        }
        Some(Range { lo, hi, step })
    }

    /// Checks the congruences (other than the first) that close at level `d`.
    fn extra_congruences_hold(&self, d: usize, st: &WalkState, x: i128) -> bool {
        let nc = self.congs.len();
        self.level_congs[d].iter().skip(1).all(|&i| {
            let c = &self.congs[i];
            (st.partial_cong[d * nc + i] + c.coeffs[d] * x).rem_euclid(c.modulus) == 0
        })
    }

    fn fix(&self, d: usize, st: &mut WalkState, x: i128) {
        st.x[d] = x as i64;
        let h = self.half_coeffs.len();
        for i in 0..h {
            st.partial[(d + 1) * h + i] = st.partial[d * h + i] + self.half_coeffs[i][d] * x;
        }
        let nc = self.congs.len();
        for i in 0..nc {
            st.partial_cong[(d + 1) * nc + i] = st.partial_cong[d * nc + i] + self.congs[i].coeffs[d] * x;
        }
    }

    fn walk<F>(&self, d: usize, st: &mut WalkState, dir: Direction, f: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[i64]) -> ControlFlow<()>,
    {
        let Some(r) = self.range(d, st) else {
            return ControlFlow::Continue(());
        };
        let count = (r.hi - r.lo) / r.step + 1;
        for k in 0..count {
            let x = match dir {
                Direction::Ascending => r.lo + k * r.step,
                Direction::Descending => r.hi - k * r.step,
            };
            if !self.extra_congruences_hold(d, st, x) {
                continue;
            }
            self.fix(d, st, x);
            if d + 1 == self.n {
                f(&st.x)?;
            } else {
                self.walk(d + 1, st, dir, f)?;
            }
        }
        ControlFlow::Continue(())
    }

    fn count(&self, d: usize, st: &mut WalkState) -> u64 {
        let Some(r) = self.range(d, st) else {
            return 0;
        };
        let values = (r.hi - r.lo) / r.step + 1;
        if d + 1 == self.n && self.level_congs[d].len() <= 1 {
            return values as u64;
        }
        let mut total = 0;
        for k in 0..values {
            let x = r.lo + k * r.step;
            if !self.extra_congruences_hold(d, st, x) {
                continue;
            }
            if d + 1 == self.n {
                total += 1;
            } else {
                self.fix(d, st, x);
                total += self.count(d + 1, st);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box2(n0: i64, n1: i64) -> Vec<AffineConstraint> {
        let mut v = Vec::new();
        v.extend(AffineConstraint::range(2, 0, 0, n0 - 1));
        v.extend(AffineConstraint::range(2, 1, 0, n1 - 1));
        v
    }

    fn collect(s: &BasicSet, dir: Direction) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        s.for_each(dir, |p| {
            out.push(p.to_vec());
            ControlFlow::Continue(())
        })
        .unwrap();
        out
    }

    #[test]
    fn floor_and_ceil_division() {
        assert_eq!(floor_div(7, 2), 3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(-7, 2), -3);
    }

    #[test]
    fn congruence_solutions() {
        // 3x + 1 = 0 mod 4  ->  x = 1 mod 4
        assert_eq!(solve_congruence(3, 1, 4), Some((1, 4)));
        // 2x = 1 mod 4 has no solution
        assert_eq!(solve_congruence(2, -1, 4), None);
        // 2x = 0 mod 4 -> x = 0 mod 2
        assert_eq!(solve_congruence(2, 0, 4), Some((0, 2)));
    }

    #[test]
    fn triangular_enumeration_is_lexicographic() {
        let mut cons = box2(4, 4);
        cons.push(AffineConstraint::ge(vec![1, -1], 0)); // j <= i
        let s = BasicSet::new(2, cons);
        let pts = collect(&s, Direction::Ascending);
        assert_eq!(pts.len(), 10);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.count().unwrap(), 10);
        let rev = collect(&s, Direction::Descending);
        assert_eq!(rev.first().unwrap(), &vec![3, 3]);
        assert!(rev.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn coupled_congruences_count() {
        let mut cons = box2(10, 10);
        cons.push(AffineConstraint::congruent(vec![1, 1], 0, 3));
        cons.push(AffineConstraint::congruent(vec![0, 1], 0, 2));
        let s = BasicSet::new(2, cons);
        let brute = (0..10)
            .flat_map(|i| (0..10).map(move |j| (i, j)))
            .filter(|(i, j)| (i + j) % 3 == 0 && j % 2 == 0)
            .count() as u64;
        assert_eq!(s.count().unwrap(), brute);
        assert_eq!(collect(&s, Direction::Ascending).len() as u64, brute);
    }

    #[test]
    fn unbounded_is_reported() {
        let s = BasicSet::new(1, vec![AffineConstraint::ge(vec![1], 0)]);
        assert_eq!(s.count(), Err(UnboundedDim(0)));
    }

    #[test]
    fn infeasible_by_propagation() {
        let mut cons = box2(4, 4);
        cons.push(AffineConstraint::ge(vec![1, 1], -10));
        assert!(BasicSet::new(2, cons).trivially_empty());
    }

    #[test]
    fn subtract_pieces_are_disjoint_and_exact() {
        let a = BasicSet::new(2, box2(5, 5));
        let mut bc = box2(5, 5);
        bc.push(AffineConstraint::eq(vec![1, -1], 0));
        bc.push(AffineConstraint::congruent(vec![1, 0], 0, 2));
        let b = BasicSet::new(2, bc);
        let pieces = a.subtract(&b);
        let total: u64 = pieces.iter().map(|p| p.count().unwrap()).sum();
        assert_eq!(total, 25 - 3);
        for i in 0..5 {
            for j in 0..5 {
                let inside = pieces.iter().filter(|p| p.contains(&[i, j])).count();
                let expect = usize::from(!(i == j && i % 2 == 0));
                assert_eq!(inside, expect, "({i},{j})");
            }
        }
    }
}
