//! Loop-nest variants by interchange and tiling of the loops outside the
//! microkernel band.

mod config;
mod recipe;

use std::cell::OnceCell;
use std::collections::HashSet;

use thiserror::Error;

use crate::deps::{compute_dependences, DepKind, Dependence};
use crate::intset::AffineConstraint;
use crate::loopnest::{AccessMode, AffineExpr, Body, Loop, LoopNest, LoopOrigin, LoopTag};

pub use config::VariantConfig;
pub use recipe::Recipe;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Malformed(String),
    InvalidPermutation(String),
    TileSizeNonPositive(String),
    IllegalDependence(String),
    BoundsDependency(String),
    NotRectangular(String),
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            RejectReason::Malformed(m) => ("malformed recipe", m),
            RejectReason::InvalidPermutation(m) => ("invalid permutation", m),
            RejectReason::TileSizeNonPositive(m) => ("non-positive tile size", m),
            RejectReason::IllegalDependence(m) => ("violates a dependence", m),
            RejectReason::BoundsDependency(m) => ("loop bounds depend on a moved loop", m),
            RejectReason::NotRectangular(m) => ("loop cannot be tiled", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VariantError {
    #[error("configuration rejected, {0}")]
    ConfigRejected(RejectReason),
}

fn reject(r: RejectReason) -> VariantError {
    VariantError::ConfigRejected(r)
}

/// Applies recipes to one nest, computing its dependences only if a
/// non-identity recipe needs a legality check.
pub struct Transformer<'a> {
    nest: LoopNest,
    deps: OnceCell<Vec<Dependence>>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a> Transformer<'a> {
    pub fn new(nest: &'a LoopNest) -> Self {
        let nest = nest.inline_microkernel().unwrap_or_else(|_| nest.clone());
        Self { nest, deps: OnceCell::new(), _marker: std::marker::PhantomData }
    }

    fn deps(&self) -> &[Dependence] {
        self.deps.get_or_init(|| compute_dependences(&self.nest))
    }

    fn outer_count(&self) -> usize {
        self.nest.loops.iter().take_while(|l| !l.is_band()).count()
    }

    /// The transformed nest; the result keeps the input's body form
    /// (inlined or restored).
    pub fn apply(&self, recipe: &Recipe, restored: bool) -> Result<LoopNest, VariantError> {
        let nest = &self.nest;
        let nb = self.outer_count();
        let outer: Vec<&str> = nest.loops[..nb].iter().map(|l| l.var.as_str()).collect();
        let known = |v: &str| outer.contains(&v);

        // new order of the outer loops, as indices into the original
        let mut order: Vec<usize> = (0..nb).collect();
        let mut region_start = nb;
        if let Some(perm) = &recipe.perm {
            if let Some(v) = perm.iter().find(|v| !known(v)) {
                let what = if nest.loops.iter().any(|l| &l.var == v) { "is in the microkernel band" } else { "is not a loop" };
                return Err(reject(RejectReason::InvalidPermutation(format!("`{v}` {what}"))));
            }
            let unique: HashSet<&String> = perm.iter().collect();
            if unique.len() != perm.len() {
                return Err(reject(RejectReason::InvalidPermutation(format!("repeated loop in `{}`", perm.join(",")))));
            }
            let start = nb - perm.len();
            let suffix: HashSet<&str> = outer[start..].iter().copied().collect();
            if perm.iter().any(|v| !suffix.contains(v.as_str())) {
                return Err(reject(RejectReason::InvalidPermutation(format!(
                    "`{}` must reorder the innermost {} loops outside the band ({})",
                    perm.join(","),
                    perm.len(),
                    outer[start..].join(",")
                ))));
            }
            for (slot, v) in perm.iter().enumerate() {
                order[start + slot] = outer.iter().position(|o| o == v).expect("checked above");
            }
            region_start = start;
        }
        let mut tiled: Vec<(usize, i64)> = Vec::new();
        for (v, size) in &recipe.tiles {
            let Some(pos) = outer.iter().position(|o| o == v) else {
                let what = if nest.loops.iter().any(|l| &l.var == v) { "is in the microkernel band" } else { "is not a loop" };
                return Err(reject(RejectReason::InvalidPermutation(format!("cannot tile `{v}`: it {what}"))));
            };
            if *size <= 0 {
                return Err(reject(RejectReason::TileSizeNonPositive(format!("`{v}:{size}`"))));
            }
            if tiled.iter().any(|(p, _)| *p == pos) {
                return Err(reject(RejectReason::Malformed(format!("`{v}` tiled twice"))));
            }
            tiled.push((pos, *size));
            region_start = region_start.min(pos);
        }

        let moved = order.iter().enumerate().any(|(i, &o)| i != o);
        if moved || !tiled.is_empty() {
            self.check_bounds(&order)?;
            self.check_legal(region_start, nb)?;
        }

        let mut loops: Vec<Loop> = Vec::with_capacity(nest.loops.len() + tiled.len());
        let mut points: Vec<Loop> = Vec::new();
        let mut stmt = nest.stmt.clone();
        let mut taken: HashSet<String> = nest.loops.iter().map(|l| l.var.clone()).collect();
        for &o in &order {
            let l = &nest.loops[o];
            let Some(&(_, size)) = tiled.iter().find(|(p, _)| *p == o) else {
                loops.push(l.clone());
                continue;
            };
            let (tile, point, subst) = self.tile(l, size, &mut taken)?;
            for r in &mut stmt.refs {
                r.index = r.index.iter().map(|e| e.substitute(&l.var, &subst)).collect();
            }
            loops.push(tile);
            points.push(point);
        }
        loops.extend(points);
        loops.extend(nest.loops[nb..].iter().cloned());
        let out = LoopNest { loops, stmt, body: Body::Inline, ..nest.clone() };
        if restored && out.microkernel.is_some() {
            Ok(out.restore_microkernel().expect("spec present"))
        } else {
            Ok(out)
        }
    }

    fn tile(&self, l: &Loop, size: i64, taken: &mut HashSet<String>) -> Result<(Loop, Loop, AffineExpr), VariantError> {
        let (Some(lo), Some(hi)) = (l.lower.as_constant(), l.upper.as_constant()) else {
            return Err(reject(RejectReason::NotRectangular(format!("`{}` has non-constant bounds", l.var))));
        };
        if l.step != 1 || l.extra_upper.is_some() {
            return Err(reject(RejectReason::NotRectangular(format!("`{}` is not a unit-step loop", l.var))));
        }
        if self.nest.loops.iter().any(|o| o.lower.mentions(&l.var) || o.upper.mentions(&l.var)) {
            return Err(reject(RejectReason::BoundsDependency(format!("other loop bounds use `{}`", l.var))));
        }
        let trip = (hi - lo).max(0);
        let size = size.min(trip.max(1));
        let fresh = |base: String, taken: &mut HashSet<String>| {
            let mut name = base;
            while taken.contains(&name) {
                name.push('_');
            }
            taken.insert(name.clone());
            name
        };
        let tv = fresh(format!("{}_t", l.var), taken);
        let pv = fresh(format!("{}_p", l.var), taken);
        let tile = Loop {
            var: tv.clone(),
            lower: AffineExpr::constant(0),
            upper: AffineExpr::constant((trip + size - 1) / size),
            extra_upper: None,
            step: 1,
            tag: LoopTag::Normal,
            origin: LoopOrigin::TileIndex { of: l.var.clone(), size, trip },
        };
        let extra = (trip % size != 0).then(|| AffineExpr::term(tv.clone(), -size).offset(trip));
        let point = Loop {
            var: pv.clone(),
            lower: AffineExpr::constant(0),
            upper: AffineExpr::constant(size),
            extra_upper: extra,
            step: 1,
            tag: LoopTag::Normal,
            origin: LoopOrigin::TilePoint { of: l.var.clone(), size, base: lo, tile_var: tv.clone() },
        };
        let subst = AffineExpr::term(tv, size).add(&AffineExpr::var(pv)).offset(lo);
        Ok((tile, point, subst))
    }

    /// Every loop's bounds must only use loops placed outside it.
    fn check_bounds(&self, order: &[usize]) -> Result<(), VariantError> {
        let loops = &self.nest.loops;
        for (i, &o) in order.iter().enumerate() {
            let outside: Vec<&str> = order[..i].iter().map(|&p| loops[p].var.as_str()).collect();
            let l = &loops[o];
            if let Some(v) = l.lower.vars().chain(l.upper.vars()).find(|v| !outside.contains(v)) {
                return Err(reject(RejectReason::BoundsDependency(format!(
                    "bounds of `{}` use `{v}`, which would move inside it",
                    l.var
                ))));
            }
        }
        Ok(())
    }

    /// Requires every dependence that is not carried by the fixed outer loops
    /// to have non-negative distance on each loop in `[start, end)`.
    /// Read-after-read pairs and accumulator updates (`x[e] op= ...` read and
    /// written at the same subscript) are exempt.
    fn check_legal(&self, start: usize, end: usize) -> Result<(), VariantError> {
        let nest = &self.nest;
        let n = nest.loop_vars().len();
        let refs = &nest.stmt.refs;
        let accumulator = |i: usize, j: usize| {
            let (a, b) = (&refs[i], &refs[j]);
            a.index == b.index && {
                let same = |m: AccessMode| refs.iter().any(|r| r.array == a.array && r.index == a.index && r.mode == m);
                same(AccessMode::Read) && same(AccessMode::Write)
            }
        };
        let mut fixed = Vec::new();
        for k in 0..start {
            let mut c = vec![0; 2 * n];
            c[k] = 1;
            c[n + k] = -1;
            fixed.push(AffineConstraint::eq(c, 0));
        }
        for d in self.deps() {
            if d.kind == DepKind::Rar || accumulator(d.src_ref, d.tgt_ref) {
                continue;
            }
            for q in start..end {
                // s_q - t_q - 1 >= 0, i.e. negative distance on loop q
                let mut c = vec![0; 2 * n];
                c[q] = 1;
                c[n + q] = -1;
                let mut cons = fixed.clone();
                cons.push(AffineConstraint::ge(c, -1));
                let bad = d.rel.restrict(&cons).and_then(|r| r.is_empty()).expect("dependences are bounded");
                if !bad {
                    return Err(reject(RejectReason::IllegalDependence(format!(
                        "{} has a negative distance on `{}`",
                        d.label(nest),
                        nest.loops[q].var
                    ))));
                }
            }
        }
        Ok(())
    }
}

/// Applies `recipe` to `nest`.
pub fn apply_recipe(nest: &LoopNest, recipe: &Recipe) -> Result<LoopNest, VariantError> {
    let restored = matches!(nest.body, Body::Call { .. });
    Transformer::new(nest).apply(recipe, restored)
}

/// `(recipe id, nest)` for each recipe of `cfg`, in enumeration order. The
/// first rejected recipe rejects the whole configuration.
pub fn generate_variants(nest: &LoopNest, cfg: &VariantConfig) -> Result<Vec<(String, LoopNest)>, VariantError> {
    let t = Transformer::new(nest);
    let restored = matches!(nest.body, Body::Call { .. });
    cfg.recipes().into_iter().map(|r| Ok((r.to_string(), t.apply(&r, restored)?))).collect()
}

/// The shipped variant space for the convolution preset: every order of the
/// five loops between `img` and the band, with `oj` untiled or tiled by 2 or 4.
pub fn default_conv_config() -> VariantConfig {
    VariantConfig {
        permutations: VariantConfig::all_orders(&["ofm_tile", "ifm_tile", "oj", "kj", "ki"]),
        tiling: vec![("oj".to_string(), vec![None, Some(2), Some(4)])],
        max_variants: None,
    }
}
