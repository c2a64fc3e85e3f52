//! Exact same-element dependences between iterations, one relation per ordered
//! pair of references to the same array.

use std::fmt;

use crate::intset::{AffineConstraint, IntRel, IntSet, Space};
use crate::loopnest::{AccessMode, ArrayRef, LoopNest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepKind {
    Rar,
    Raw,
    War,
    Waw,
}

impl DepKind {
    /// Kind of a dependence from a `src`-mode access to a `tgt`-mode access.
    pub fn of(src: AccessMode, tgt: AccessMode) -> Self {
        match (src, tgt) {
            (AccessMode::Read, AccessMode::Read) => DepKind::Rar,
            (AccessMode::Write, AccessMode::Read) => DepKind::Raw,
            (AccessMode::Read, AccessMode::Write) => DepKind::War,
            (AccessMode::Write, AccessMode::Write) => DepKind::Waw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DepKind::Rar => "RAR",
            DepKind::Raw => "RAW",
            DepKind::War => "WAR",
            DepKind::Waw => "WAW",
        }
    }
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Dependence {
    /// Position in the list returned by [`compute_dependences`].
    pub id: usize,
    pub kind: DepKind,
    pub array: String,
    /// Indices into the statement's references.
    pub src_ref: usize,
    pub tgt_ref: usize,
    /// `{ s -> t : src_ref(s) = tgt_ref(t), s strictly before t }`.
    pub rel: IntRel,
}

impl Dependence {
    /// `RAR A[i][k] -> A[i][k]` style label.
    pub fn label(&self, nest: &LoopNest) -> String {
        let refs = &nest.stmt.refs;
        format!("{} {} -> {}", self.kind, refs[self.src_ref].text, refs[self.tgt_ref].text)
    }
}

/// Equalities `a(s) = b(t)` over the concatenated `s ++ t` coordinates.
fn same_element(nest: &LoopNest, a: &ArrayRef, b: &ArrayRef) -> Vec<AffineConstraint> {
    let dims = nest.loop_vars();
    let n = dims.len();
    a.index
        .iter()
        .zip(&b.index)
        .map(|(ea, eb)| {
            let (ca, ka) = ea.to_coeffs(&dims).expect("subscripts use loop variables");
            let (cb, kb) = eb.to_coeffs(&dims).expect("subscripts use loop variables");
            let mut coeffs = ca;
            coeffs.extend(cb.iter().map(|x| -x));
            debug_assert_eq!(coeffs.len(), 2 * n);
            AffineConstraint::eq(coeffs, ka - kb)
        })
        .collect()
}

/// Builds `{ s -> t : a(s) = b(t), s << t }` restricted to the iteration
/// space, with one disjunct per leading loop where `s` and `t` first differ.
pub fn pair_relation(nest: &LoopNest, a: &ArrayRef, b: &ArrayRef) -> IntRel {
    let space = nest.space();
    let n = space.arity();
    let domain = nest.domain_constraints();
    let mut base: Vec<AffineConstraint> = domain.iter().map(|c| c.embed(0, 2 * n)).collect();
    base.extend(domain.iter().map(|c| c.embed(n, 2 * n)));
    base.extend(same_element(nest, a, b));
    let probe = Space::anonymous("P", 2 * n);
    let mut rel = IntRel::empty(space.clone(), space);
    for d in 0..n {
        let mut cons = base.clone();
        for k in 0..d {
            let mut c = vec![0; 2 * n];
            c[k] = 1;
            c[n + k] = -1;
            cons.push(AffineConstraint::eq(c, 0));
        }
        // t_d - s_d - 1 >= 0
        let mut c = vec![0; 2 * n];
        c[d] = -1;
        c[n + d] = 1;
        cons.push(AffineConstraint::ge(c, -1));
        let nonempty = IntSet::from_constraints(probe.clone(), cons.clone()).map(|s| !s.is_empty());
        if nonempty.expect("dependence domains are bounded") {
            rel.push_disjunct(cons).expect("dependence domains are bounded");
        }
    }
    rel
}

/// All nonempty dependences, ordered by (source reference, target reference).
pub fn compute_dependences(nest: &LoopNest) -> Vec<Dependence> {
    let refs = &nest.stmt.refs;
    let mut out = Vec::new();
    for (i, a) in refs.iter().enumerate() {
        for (j, b) in refs.iter().enumerate() {
            if a.array != b.array {
                continue;
            }
            let rel = pair_relation(nest, a, b);
            if rel.disjunct_count() == 0 {
                continue;
            }
            out.push(Dependence {
                id: out.len(),
                kind: DepKind::of(a.mode, b.mode),
                array: a.array.clone(),
                src_ref: i,
                tgt_ref: j,
                rel,
            });
        }
    }
    out
}

/// Union of every dependence relation.
pub fn union_all(nest: &LoopNest, deps: &[Dependence]) -> IntRel {
    let space = nest.space();
    deps.iter()
        .try_fold(IntRel::empty(space.clone(), space), |acc, d| acc.union(&d.rel))
        .expect("dependences share the iteration space")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intset::Point;
    use crate::loopnest::parse_nest;

    fn matmul(n: i64) -> LoopNest {
        parse_nest(&format!(
            "param M = {n}\nparam N = {n}\nparam K = {n}\n\
             loop i lower 0 upper M\nloop j lower 0 upper N\nloop k lower 0 upper K\n\
             statement S\n read C[i][j]\n read A[i][k]\n read B[k][j]\n write C[i][j]\nend\n"
        ))
        .unwrap()
    }

    #[test]
    fn matmul_reuse_relations() {
        let nest = matmul(4);
        let deps = compute_dependences(&nest);
        let kinds: Vec<(String, DepKind)> = deps.iter().map(|d| (d.array.clone(), d.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("C".into(), DepKind::Rar),
                ("C".into(), DepKind::War),
                ("A".into(), DepKind::Rar),
                ("B".into(), DepKind::Rar),
                ("C".into(), DepKind::Raw),
                ("C".into(), DepKind::Waw),
            ]
        );
        // A[i][k] with itself: i' = i, k' = k, j < j'
        let a = &deps[2];
        let targets = a.rel.image_of_point(&Point::new([0, 0, 0])).unwrap();
        assert_eq!(targets.points(), (1..4).map(|j| Point::new([0, j, 0])).collect::<Vec<_>>());
        // per (i, k): 4 choose 2
        assert_eq!(a.rel.pairs().unwrap().len(), 16 * 6);
        assert_eq!(a.label(&nest), "RAR A[i][k] -> A[i][k]");
    }

    #[test]
    fn distinct_writes_have_no_dependences() {
        let nest = parse_nest("loop i lower 0 upper 8\nstatement S\n write A[i]\nend\n").unwrap();
        assert!(compute_dependences(&nest).is_empty());
    }

    #[test]
    fn scalar_read_pairs() {
        let nest = parse_nest("loop i lower 0 upper 4\nstatement S\n read A[0]\nend\n").unwrap();
        let deps = compute_dependences(&nest);
        assert_eq!(deps.len(), 1);
        assert_eq!(deps[0].kind, DepKind::Rar);
        assert_eq!(deps[0].rel.pairs().unwrap().len(), 6);
        assert_eq!(union_all(&nest, &deps).pairs().unwrap().len(), 6);
    }
}
