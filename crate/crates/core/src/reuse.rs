//! Minimum and maximum working sets of each dependence: the distinct array
//! elements touched from its first source up to its first and last target.

use std::collections::HashMap;

use crate::deps::{DepKind, Dependence};
use crate::intset::{IntSet, IntSetError, LexOrder, Point, UnionRel};
use crate::loopnest::LoopNest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkingSetRecord {
    pub dep: usize,
    pub kind: DepKind,
    pub array: String,
    pub ws_min: u64,
    pub ws_max: u64,
    pub source: Point,
    pub first_target: Point,
    pub last_target: Point,
}

/// Iterations `p` with `source <= p <= target` in program order.
pub fn window(space: &IntSet, source: &Point, target: &Point) -> Result<IntSet, IntSetError> {
    let upto = space.lex_order_set(target, LexOrder::BeforeOrEqual)?;
    let before = space.lex_order_set(source, LexOrder::StrictlyBefore)?;
    upto.subtract(&before)
}

/// Distinct elements touched by `iters`, summed over arrays.
pub fn footprint(access: &UnionRel, iters: &IntSet) -> Result<u64, IntSetError> {
    Ok(access.apply(iters)?.cardinality())
}

pub fn working_set(
    nest: &LoopNest,
    space: &IntSet,
    access: &UnionRel,
    dep: &Dependence,
) -> Result<Option<WorkingSetRecord>, IntSetError> {
    working_set_memo(nest, space, access, dep, &mut HashMap::new())
}

/// Window footprints keyed by (source, target).
type Memo = HashMap<(Vec<i64>, Vec<i64>), u64>;

fn window_footprint(space: &IntSet, access: &UnionRel, s: &Point, t: &Point, memo: &mut Memo) -> Result<u64, IntSetError> {
    let key = (s.0.clone(), t.0.clone());
    if let Some(&v) = memo.get(&key) {
        return Ok(v);
    }
    let v = footprint(access, &window(space, s, t)?)?;
    memo.insert(key, v);
    Ok(v)
}

fn working_set_memo(
    nest: &LoopNest,
    space: &IntSet,
    access: &UnionRel,
    dep: &Dependence,
    memo: &mut Memo,
) -> Result<Option<WorkingSetRecord>, IntSetError> {
    let Some(source) = dep.rel.lexmin_domain()? else {
        return Ok(None);
    };
    let targets = dep.rel.image_of_point(&source)?;
    let first_target = targets.lexmin()?;
    let last_target = targets.lexmax()?;
    let ws_min = window_footprint(space, access, &source, &first_target, memo)?;
    let ws_max = window_footprint(space, access, &source, &last_target, memo)?;
    debug_assert_eq!(space.space(), &nest.space());
    Ok(Some(WorkingSetRecord {
        dep: dep.id,
        kind: dep.kind,
        array: dep.array.clone(),
        ws_min,
        ws_max,
        source,
        first_target,
        last_target,
    }))
}

/// One record per nonempty dependence, in dependence order.
pub fn working_sets(nest: &LoopNest, deps: &[Dependence]) -> Result<Vec<WorkingSetRecord>, IntSetError> {
    let space = nest.iteration_space();
    let access = nest.access_relations().all();
    let mut out = Vec::with_capacity(deps.len());
    let mut memo = Memo::new();
    for d in deps {
        if let Some(r) = working_set_memo(nest, &space, &access, d, &mut memo)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Every `ws_min` and `ws_max`, in record order.
pub fn all_sizes(records: &[WorkingSetRecord]) -> Vec<u64> {
    records.iter().flat_map(|r| [r.ws_min, r.ws_max]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::compute_dependences;
    use crate::loopnest::parse_nest;

    fn matmul(m: i64, n: i64, k: i64) -> LoopNest {
        parse_nest(&format!(
            "param M = {m}\nparam N = {n}\nparam K = {k}\n\
             loop i lower 0 upper M\nloop j lower 0 upper N\nloop k lower 0 upper K\n\
             statement S\n read C[i][j]\n read A[i][k]\n read B[k][j]\n write C[i][j]\nend\n"
        ))
        .unwrap()
    }

    #[test]
    fn matmul_records_at_four() {
        let nest = matmul(4, 4, 4);
        let deps = compute_dependences(&nest);
        let recs = working_sets(&nest, &deps).unwrap();
        let a = recs.iter().find(|r| r.array == "A").unwrap();
        assert_eq!((a.ws_min, a.ws_max), (11, 21));
        assert_eq!(a.first_target, Point::new([0, 1, 0]));
        assert_eq!(a.last_target, Point::new([0, 3, 0]));
        let c = recs.iter().find(|r| r.array == "C" && r.kind == DepKind::Rar).unwrap();
        assert_eq!((c.ws_min, c.ws_max), (5, 9));
        assert_eq!(all_sizes(&recs).len(), 2 * recs.len());
    }

    #[test]
    fn single_target_gives_equal_sizes() {
        let nest = parse_nest("loop i lower 0 upper 6\nstatement S\n read A[i]\n read A[i + 1]\nend\n").unwrap();
        let deps = compute_dependences(&nest);
        let recs = working_sets(&nest, &deps).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].ws_min, recs[0].ws_max);
        assert_eq!(recs[0].ws_min, 3);
    }
}
