use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use super::basic::{BasicSet, UnboundedDim};
use super::points::PointSet;
use super::{AffineConstraint, ConstraintKind, Direction, IntSet, IntSetError, Point, Space};

/// Probe box used to check that outputs are bounded once inputs are fixed.
const PROBE: i64 = 1 << 20;

/// `out[j] = coeffs . in + constant`, recognized from unit equalities.
#[derive(Debug, Clone)]
struct AffineMap {
    rows: Vec<(Vec<i64>, i64)>,
    /// Constraints not consumed as definitions, over `in ++ out`.
    residual: Vec<AffineConstraint>,
}

#[derive(Debug, Clone)]
struct Disjunct {
    basic: BasicSet,
    map: Option<AffineMap>,
}

impl Disjunct {
    fn new(basic: BasicSet, n_in: usize) -> Self {
        let map = recognize_map(&basic, n_in);
        Self { basic, map }
    }

    /// Calls `f` on every output point related to `input`.
    fn image<F: FnMut(&[i64])>(
        &self,
        input: &[i64],
        buf: &mut Vec<i64>,
        f: &mut F,
    ) -> Result<(), UnboundedDim> {
        let n_in = input.len();
        if let Some(map) = &self.map {
            buf.clear();
            buf.extend_from_slice(input);
            for (coeffs, c) in &map.rows {
                let v = coeffs.iter().zip(input).fold(*c as i128, |acc, (&a, &x)| acc + a as i128 * x as i128);
                buf.push(i64::try_from(v).expect("image coordinate overflow"));
            }
            if map.residual.iter().all(|c| c.holds(buf)) {
                f(&buf[n_in..]);
            }
            return Ok(());
        }
        let n_out = self.basic.arity() - n_in;
        let fixed: Vec<AffineConstraint> = self.basic.constraints().iter().map(|c| c.fix_prefix(input)).collect();
        let sub = BasicSet::new(n_out, fixed);
        sub.for_each(Direction::Ascending, |q| {
            f(q);
            ControlFlow::Continue(())
        })
        .map_err(|d| UnboundedDim(d.0 + n_in))?;
        Ok(())
    }
}

fn recognize_map(basic: &BasicSet, n_in: usize) -> Option<AffineMap> {
    let n = basic.arity();
    let n_out = n - n_in;
    let mut used = vec![false; basic.constraints().len()];
    let mut rows = Vec::with_capacity(n_out);
    for j in n_in..n {
        let (idx, c) = basic.constraints().iter().enumerate().find(|(i, c)| {
            !used[*i]
                && c.kind == ConstraintKind::Eq
                && c.coeffs[j].abs() == 1
                && (n_in..n).all(|k| k == j || c.coeffs[k] == 0)
        })?;
        used[idx] = true;
        // a*out + rest = 0  =>  out = -a * rest  for a = +-1
        let a = c.coeffs[j];
        let coeffs = c.coeffs[..n_in].iter().map(|&x| -a * x).collect();
        rows.push((coeffs, -a * c.constant));
    }
    let residual = basic
        .constraints()
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(c, _)| c.clone())
        .collect();
    Some(AffineMap { rows, residual })
}

/// A finite relation between two tuple spaces, as a union of constraint
/// conjunctions over the concatenated `in ++ out` coordinates.
#[derive(Debug, Clone)]
pub struct IntRel {
    in_space: Space,
    out_space: Space,
    disjuncts: Vec<Arc<Disjunct>>,
}

impl IntRel {
    pub fn empty(in_space: Space, out_space: Space) -> Self {
        Self { in_space, out_space, disjuncts: Vec::new() }
    }

    /// Single conjunction over `in ++ out`. Outputs must be bounded once the
    /// inputs are fixed.
    pub fn from_constraints(
        in_space: Space,
        out_space: Space,
        constraints: Vec<AffineConstraint>,
    ) -> Result<Self, IntSetError> {
        let mut r = Self::empty(in_space, out_space);
        r.push_disjunct(constraints)?;
        Ok(r)
    }

    /// `out[j] = rows[j].0 . in + rows[j].1`.
    pub fn from_affine_map(in_space: Space, out_space: Space, rows: &[(Vec<i64>, i64)]) -> Result<Self, IntSetError> {
        let n_in = in_space.arity();
        let n = n_in + out_space.arity();
        if rows.len() != out_space.arity() {
            return Err(IntSetError::Arity { expected: out_space.arity(), got: rows.len() });
        }
        let mut cons = Vec::with_capacity(rows.len());
        for (j, (coeffs, c)) in rows.iter().enumerate() {
            if coeffs.len() != n_in {
                return Err(IntSetError::Arity { expected: n_in, got: coeffs.len() });
            }
            let mut full = vec![0; n];
            for (k, &a) in coeffs.iter().enumerate() {
                full[k] = -a;
            }
            full[n_in + j] = 1;
            cons.push(AffineConstraint::eq(full, -c));
        }
        Self::from_constraints(in_space, out_space, cons)
    }

    /// Adds a conjunction to the union. Trivially infeasible ones are dropped.
    pub fn push_disjunct(&mut self, constraints: Vec<AffineConstraint>) -> Result<(), IntSetError> {
        let n_in = self.in_space.arity();
        let n = n_in + self.out_space.arity();
        if let Some(c) = constraints.iter().find(|c| c.arity() != n) {
            return Err(IntSetError::Arity { expected: n, got: c.arity() });
        }
        let basic = BasicSet::new(n, constraints);
        if basic.trivially_empty() {
            return Ok(());
        }
        let d = Disjunct::new(basic, n_in);
        if d.map.is_none() {
            let probe = d.basic.with_constraints((0..n_in).flat_map(|k| AffineConstraint::range(n, k, -PROBE, PROBE)));
            if let Some(j) = probe.bounds()[n_in..].iter().position(|b| b.lo.is_none() || b.hi.is_none()) {
                return Err(IntSetError::Unbounded(self.out_space.dims()[j].clone()));
            }
        }
        self.disjuncts.push(Arc::new(d));
        Ok(())
    }

    /// Conjoins `extra`, given over `in ++ out`, with every disjunct.
    pub fn restrict(&self, extra: &[AffineConstraint]) -> Result<IntRel, IntSetError> {
        let n_in = self.in_space.arity();
        let n = n_in + self.out_space.arity();
        if let Some(c) = extra.iter().find(|c| c.arity() != n) {
            return Err(IntSetError::Arity { expected: n, got: c.arity() });
        }
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| d.basic.with_constraints(extra.iter().cloned()))
            .filter(|b| !b.trivially_empty())
            .map(|b| Arc::new(Disjunct::new(b, n_in)))
            .collect();
        Ok(IntRel { in_space: self.in_space.clone(), out_space: self.out_space.clone(), disjuncts })
    }

    pub fn in_space(&self) -> &Space {
        &self.in_space
    }

    pub fn out_space(&self) -> &Space {
        &self.out_space
    }

    pub fn disjunct_count(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn union(&self, other: &IntRel) -> Result<IntRel, IntSetError> {
        self.in_space.check_same(&other.in_space)?;
        self.out_space.check_same(&other.out_space)?;
        let mut r = self.clone();
        r.disjuncts.extend(other.disjuncts.iter().cloned());
        Ok(r)
    }

    fn unbounded(&self, d: UnboundedDim) -> IntSetError {
        let n_in = self.in_space.arity();
        let name = if d.0 < n_in {
            self.in_space.dims()[d.0].clone()
        } else {
            self.out_space.dims()[d.0 - n_in].clone()
        };
        IntSetError::Unbounded(name)
    }

    /// Image of `set`: every `y` with some `x` in `set` and `x -> y` in the
    /// relation.
    pub fn apply(&self, set: &IntSet) -> Result<IntSet, IntSetError> {
        self.in_space.check_same(set.space())?;
        let n_out = self.out_space.arity();
        let mut data = Vec::new();
        let mut rows = 0usize;
        let mut failure = None;
        let mut buf = Vec::new();
        set.for_each_point(|p| {
            if failure.is_some() {
                return;
            }
            for d in &self.disjuncts {
                if let Err(e) = d.image(p, &mut buf, &mut |q| {
                    data.extend_from_slice(q);
                    rows += 1;
                }) {
                    failure = Some(e);
                    return;
                }
            }
        });
        if let Some(e) = failure {
            return Err(self.unbounded(e));
        }
        Ok(IntSet::from_point_set(self.out_space.clone(), PointSet::from_flat(n_out, rows, data)))
    }

    /// Image of a single point.
    pub fn image_of_point(&self, p: &Point) -> Result<IntSet, IntSetError> {
        if p.arity() != self.in_space.arity() {
            return Err(IntSetError::Arity { expected: self.in_space.arity(), got: p.arity() });
        }
        let single = IntSet::from_point_set(self.in_space.clone(), PointSet::from_rows(p.arity(), [p.0.clone()]));
        self.apply(&single)
    }

    fn domain_extremum(&self, dir: Direction) -> Result<Option<Point>, IntSetError> {
        let n_in = self.in_space.arity();
        let mut best: Option<Vec<i64>> = None;
        for d in &self.disjuncts {
            let first = d.basic.first(dir).map_err(|e| self.unbounded(e))?;
            if let Some(p) = first {
                let cand = p[..n_in].to_vec();
                best = Some(match (best, dir) {
                    (None, _) => cand,
                    (Some(b), Direction::Ascending) => b.min(cand),
                    (Some(b), Direction::Descending) => b.max(cand),
                });
            }
        }
        Ok(best.map(Point))
    }

    /// `lexmin dom r`. Relations whose inputs are unbounded are rejected.
    pub fn lexmin_domain(&self) -> Result<Option<Point>, IntSetError> {
        self.domain_extremum(Direction::Ascending)
    }

    pub fn lexmax_domain(&self) -> Result<Option<Point>, IntSetError> {
        self.domain_extremum(Direction::Descending)
    }

    pub fn is_empty(&self) -> Result<bool, IntSetError> {
        for d in &self.disjuncts {
            if !d.basic.is_empty().map_err(|e| self.unbounded(e))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Visits each `(in, out)` pair of a bounded relation. Overlapping
    /// disjuncts may repeat pairs.
    pub fn for_each_pair<F: FnMut(&[i64], &[i64])>(&self, mut f: F) -> Result<(), IntSetError> {
        let n_in = self.in_space.arity();
        for d in &self.disjuncts {
            d.basic
                .for_each(Direction::Ascending, |p| {
                    f(&p[..n_in], &p[n_in..]);
                    ControlFlow::Continue(())
                })
                .map_err(|e| self.unbounded(e))?;
        }
        Ok(())
    }

    /// Distinct pairs, sorted.
    pub fn pairs(&self) -> Result<Vec<(Point, Point)>, IntSetError> {
        let mut out = Vec::new();
        self.for_each_pair(|a, b| out.push((Point(a.to_vec()), Point(b.to_vec()))))?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Domain of a bounded relation, materialized.
    pub fn domain(&self) -> Result<IntSet, IntSetError> {
        let n_in = self.in_space.arity();
        let mut data = Vec::new();
        let mut rows = 0;
        self.for_each_pair(|a, _| {
            data.extend_from_slice(a);
            rows += 1;
        })?;
        Ok(IntSet::from_point_set(self.in_space.clone(), PointSet::from_flat(n_in, rows, data)))
    }
}

impl fmt::Display for IntRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ins = self.in_space.dims().to_vec();
        let outs: Vec<String> = self
            .out_space
            .dims()
            .iter()
            .map(|d| if ins.contains(d) { format!("{d}'") } else { d.clone() })
            .collect();
        let head = format!(
            "{}[{}] -> {}[{}]",
            self.in_space.name(),
            ins.join(", "),
            self.out_space.name(),
            outs.join(", ")
        );
        if self.disjuncts.is_empty() {
            return write!(f, "{{ {head} : false }}");
        }
        let names: Vec<String> = ins.iter().chain(&outs).cloned().collect();
        let parts: Vec<String> = self
            .disjuncts
            .iter()
            .map(|d| {
                let cons: Vec<String> = d.basic.constraints().iter().map(|c| c.render(&names)).collect();
                if cons.is_empty() {
                    head.clone()
                } else {
                    format!("{head} : {}", cons.join(" and "))
                }
            })
            .collect();
        write!(f, "{{ {} }}", parts.join("; "))
    }
}
