#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyrank::loopnest::{parse_nest, LoopNest};
use polyrank::oracle;

pub fn matmul(m: i64, n: i64, k: i64) -> LoopNest {
    parse_nest(&format!(
        "param M = {m}\nparam N = {n}\nparam K = {k}\n\
         loop i lower 0 upper M\nloop j lower 0 upper N\nloop k lower 0 upper K\n\
         statement S\n read C[i][j]\n read A[i][k]\n read B[k][j]\n write C[i][j]\nend\n"
    ))
    .unwrap()
}

/// A random nest document: up to 4 loops with bounds at most 8 (some
/// triangular, some stepped), up to 3 arrays and 1 to 4 references.
pub fn random_nest_text(rng: &mut ChaCha8Rng) -> String {
    let names = ["i", "j", "k", "l"];
    let depth = rng.gen_range(1..=4);
    let mut doc = String::new();
    for d in 0..depth {
        let lower = if d > 0 && rng.gen_bool(0.2) { names[rng.gen_range(0..d)].to_string() } else { rng.gen_range(0..3).to_string() };
        let upper = rng.gen_range(1..=8);
        let step = if rng.gen_bool(0.15) { " step 2" } else { "" };
        writeln!(doc, "loop {} lower {lower} upper {upper}{step}", names[d]).unwrap();
    }
    let arrays = ["A", "B", "C"];
    let n_arrays = rng.gen_range(1..=3);
    let arity: Vec<usize> = (0..n_arrays).map(|_| rng.gen_range(0..=2)).collect();
    let n_refs = rng.gen_range(1..=4);
    doc.push_str("statement S\n");
    for _ in 0..n_refs {
        let a = rng.gen_range(0..n_arrays);
        let mode = if rng.gen_bool(0.6) { "read" } else { "write" };
        let mut r = arrays[a].to_string();
        for _ in 0..arity[a] {
            let mut terms = Vec::new();
            for v in names.iter().take(depth) {
                match rng.gen_range(0..6) {
                    0 => terms.push(format!("-{v}")),
                    1 | 2 => terms.push(v.to_string()),
                    3 => terms.push(format!("2 * {v}")),
                    _ => {}
                }
            }
            let c: i64 = rng.gen_range(0..3);
            if c != 0 || terms.is_empty() {
                terms.push(c.to_string());
            }
            write!(r, "[{}]", terms.join(" + ")).unwrap();
        }
        writeln!(doc, "  {mode} {r}").unwrap();
    }
    doc.push_str("end\n");
    doc
}

pub fn random_nests(count: usize, seed: u64) -> Vec<(String, LoopNest)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let text = random_nest_text(&mut rng);
            let nest = parse_nest(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            (text, nest)
        })
        .collect()
}

/// Packs iteration vectors into integers that sort like the vectors, using
/// the coordinate ranges seen in an execution.
pub struct Packer {
    lo: Vec<i64>,
    widths: Vec<u32>,
    pub bits: u32,
}

impl Packer {
    pub fn new(iters: &[Vec<i64>], arity: usize) -> Self {
        let mut lo = vec![i64::MAX; arity];
        let mut hi = vec![i64::MIN; arity];
        for p in iters {
            for d in 0..arity {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let widths: Vec<u32> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| if h < l { 1 } else { 64 - ((h - l) as u64).leading_zeros() })
            .collect();
        let bits = widths.iter().sum();
        Self { lo, widths, bits }
    }

    pub fn pack(&self, p: &[i64]) -> Option<u64> {
        let mut v = 0u64;
        for d in 0..p.len() {
            let off = p[d].checked_sub(self.lo[d])?;
            if off < 0 || (self.widths[d] < 64 && off >= 1 << self.widths[d]) {
                return None;
            }
            v = (v << self.widths[d]) | off as u64;
        }
        Some(v)
    }
}

/// Outcome of comparing a dependence pair set with the pairs found by
/// execution.
pub fn pair_sets_equal(nest: &LoopNest, src: usize, tgt: usize, rel: Option<&polyrank::intset::IntRel>) -> Result<bool, String> {
    let iters = oracle::execute(nest, oracle::MAX_POINTS).map_err(|e| e.to_string())?;
    let refs = &nest.stmt.refs;
    let n = nest.loop_vars().len();
    let packer = Packer::new(&iters, n);
    if 2 * packer.bits > 64 {
        return Err(format!("{} bits per point do not pack", packer.bits));
    }
    let keys: Vec<u64> = iters.iter().map(|p| packer.pack(p).expect("executed points pack")).collect();
    let mut by_elem: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (t, p) in iters.iter().enumerate() {
        by_elem.entry(oracle::element(nest, &refs[tgt], p)).or_default().push(t);
    }
    let mut brute = Vec::new();
    for (s, p) in iters.iter().enumerate() {
        if let Some(ts) = by_elem.get(&oracle::element(nest, &refs[src], p)) {
            let from = ts.partition_point(|&t| t <= s);
            brute.extend(ts[from..].iter().map(|&t| (keys[s] << packer.bits) | keys[t]));
        }
    }
    drop(by_elem);
    brute.sort_unstable();
    let Some(rel) = rel else {
        return Ok(brute.is_empty());
    };
    let mut mine = Vec::with_capacity(brute.len());
    let mut stray = false;
    rel.for_each_pair(|a, b| match (packer.pack(a), packer.pack(b)) {
        (Some(x), Some(y)) => mine.push((x << packer.bits) | y),
        _ => stray = true,
    })
    .map_err(|e| e.to_string())?;
    if stray {
        return Ok(false);
    }
    mine.sort_unstable();
    mine.dedup();
    Ok(mine == brute)
}
