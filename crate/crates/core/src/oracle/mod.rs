//! Brute-force validators that run the loop nest directly instead of going
//! through the set engine, plus an LRU cache simulator for diagnostics.

mod lru;

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::deps::Dependence;
use crate::loopnest::{AccessMode, ArrayRef, LoopNest};

pub use lru::{lru_simulate, LevelStats, LruStats};

/// Largest iteration space the oracles will execute.
pub const MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("iteration space exceeds {limit} points")]
    SpaceTooLarge { limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Min,
    Max,
}

/// Runs the loops in program order and returns every iteration vector,
/// flattened, or `SpaceTooLarge` once `limit` is exceeded.
pub fn execute(nest: &LoopNest, limit: usize) -> Result<Vec<Vec<i64>>, OracleError> {
    let loops = nest.all_loops();
    let vars: Vec<&str> = loops.iter().map(|l| l.var.as_str()).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; loops.len()];
    fn walk(
        d: usize,
        loops: &[&crate::loopnest::Loop],
        vars: &[&str],
        cur: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
        limit: usize,
    ) -> Result<(), OracleError> {
        if d == loops.len() {
            if out.len() == limit {
                return Err(OracleError::SpaceTooLarge { limit });
            }
            out.push(cur.clone());
            return Ok(());
        }
        let l = loops[d];
        let look = |v: &str| cur[vars.iter().position(|x| *x == v).expect("bound uses an outer loop")];
        let lo = l.lower.eval(look);
        let mut hi = l.upper.eval(look);
        if let Some(e) = &l.extra_upper {
            hi = hi.min(e.eval(look));
        }
        let mut x = lo;
        while x < hi {
            cur[d] = x;
            walk(d + 1, loops, vars, cur, out, limit)?;
            x += l.step;
        }
        Ok(())
    }
    walk(0, &loops, &vars, &mut cur, &mut out, limit)?;
    Ok(out)
}

/// Element touched by `r` at iteration `p`.
pub fn element(nest: &LoopNest, r: &ArrayRef, p: &[i64]) -> Vec<i64> {
    let vars = nest.loop_vars();
    r.index
        .iter()
        .map(|e| e.eval(|v| p[vars.iter().position(|x| x == v).expect("subscript uses a loop variable")]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub array: String,
    pub index: Vec<i64>,
    pub mode: AccessMode,
}

/// Accesses in execution order; references within an iteration follow the
/// statement's order.
pub fn trace(nest: &LoopNest, limit: usize) -> Result<Vec<Access>, OracleError> {
    let iters = execute(nest, limit)?;
    let mut out = Vec::with_capacity(iters.len() * nest.stmt.refs.len());
    for p in &iters {
        for r in &nest.stmt.refs {
            out.push(Access { array: r.array.clone(), index: element(nest, r, p), mode: r.mode });
        }
    }
    Ok(out)
}

/// Source and targets found by execution, with both window footprints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleWorkingSet {
    pub source: Vec<i64>,
    pub first_target: Vec<i64>,
    pub last_target: Vec<i64>,
    pub ws_min: u64,
    pub ws_max: u64,
}

/// Working sets for the reference pair `(src, tgt)`, or `None` when no
/// element touched by `src` is touched again later by `tgt`.
pub fn working_set_for_pair(
    nest: &LoopNest,
    src: &ArrayRef,
    tgt: &ArrayRef,
) -> Result<Option<OracleWorkingSet>, OracleError> {
    let iters = execute(nest, MAX_POINTS)?;
    // element -> ascending iteration positions where `tgt` touches it
    let mut touched_by_tgt: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (t, p) in iters.iter().enumerate() {
        touched_by_tgt.entry(element(nest, tgt, p)).or_default().push(t);
    }
    let found = iters.iter().enumerate().find_map(|(s, p)| {
        let ts = touched_by_tgt.get(&element(nest, src, p))?;
        let first = ts.iter().copied().find(|&t| t > s)?;
        Some((s, first, *ts.last().expect("nonempty")))
    });
    let Some((s, first, last)) = found else {
        return Ok(None);
    };
    let window = |end: usize| -> u64 {
        let mut seen: HashSet<(&str, Vec<i64>)> = HashSet::new();
        for p in &iters[s..=end] {
            for r in &nest.stmt.refs {
                seen.insert((r.array.as_str(), element(nest, r, p)));
            }
        }
        seen.len() as u64
    };
    Ok(Some(OracleWorkingSet {
        source: iters[s].clone(),
        first_target: iters[first].clone(),
        last_target: iters[last].clone(),
        ws_min: window(first),
        ws_max: window(last),
    }))
}

/// Distinct elements touched from the dependence's first source through its
/// first (`Min`) or last (`Max`) target, by direct execution.
pub fn enumerate_working_set(nest: &LoopNest, dep: &Dependence, which: Which) -> Result<u64, OracleError> {
    let refs = &nest.stmt.refs;
    let ws = working_set_for_pair(nest, &refs[dep.src_ref], &refs[dep.tgt_ref])?;
    Ok(ws.map_or(0, |w| match which {
        Which::Min => w.ws_min,
        Which::Max => w.ws_max,
    }))
}

/// Every `(s, t)` with `s` executed before `t` and both references touching
/// the same element.
pub fn brute_force_pairs(
    nest: &LoopNest,
    src: &ArrayRef,
    tgt: &ArrayRef,
) -> Result<BTreeSet<(Vec<i64>, Vec<i64>)>, OracleError> {
    let iters = execute(nest, MAX_POINTS)?;
    let mut touched_by_tgt: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (t, p) in iters.iter().enumerate() {
        touched_by_tgt.entry(element(nest, tgt, p)).or_default().push(t);
    }
    let mut out = BTreeSet::new();
    for (s, p) in iters.iter().enumerate() {
        if let Some(ts) = touched_by_tgt.get(&element(nest, src, p)) {
            for &t in ts.iter().filter(|&&t| t > s) {
                out.insert((p.clone(), iters[t].clone()));
            }
        }
    }
    Ok(out)
}
