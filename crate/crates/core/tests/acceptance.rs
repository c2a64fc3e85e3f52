//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polyrank::cachefit::{assign_to_caches, format_rational, CacheLevel, MachineDescriptor};
use polyrank::cli::ConvPreset;
use polyrank::costrank::{rank_by_cost, score, VariantScore};
use polyrank::deps::{compute_dependences, DepKind};
use polyrank::dnnrank::{
    gradient_check, synthetic_dataset, train, tournament_rank, Contestant, Mlp, TrainConfig,
    VariantStats,
};
use polyrank::loopnest::{Body, LoopNest};
use polyrank::oracle::{enumerate_working_set, working_set_for_pair, Which};
use polyrank::reuse::{all_sizes, working_sets};
use polyrank::variants::{apply_recipe, default_conv_config, generate_variants, RejectReason, VariantError};

use common::{matmul, pair_sets_equal, random_nests};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    ensure(t.elapsed() < limit, || format!("took {:.1?}, limit {limit:?}", t.elapsed()))
}

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn corpus() -> Vec<(String, LoopNest)> {
    let mut nests = random_nests(220, 2024);
    nests.push(("matmul 4x4x4".into(), matmul(4, 4, 4)));
    nests.push(("conv preset".into(), ConvPreset::default().nest()));
    nests
}

fn matmul_formula() -> Check {
    let t = Instant::now();
    let mut checked = 0;
    for m in [4, 8, 16] {
        for n in [4, 8, 16] {
            for k in [4, 8, 16] {
                let nest = matmul(m, n, k);
                let deps = compute_dependences(&nest);
                let d2 = &deps[2];
                ensure(d2.kind == DepKind::Rar && d2.array == "A", || format!("d2 is {}", d2.label(&nest)))?;
                let recs = working_sets(&nest, &deps).map_err(|e| e.to_string())?;
                let r = recs.iter().find(|r| r.dep == 2).ok_or("no record for d2")?;
                let want = ((2 * k + 3) as u64, (n * k + n + 1) as u64);
                ensure((r.ws_min, r.ws_max) == want, || {
                    format!("M={m} N={n} K={k}: got ({}, {}), want {want:?}", r.ws_min, r.ws_max)
                })?;
                checked += 1;
            }
        }
    }
    within(t, Duration::from_secs(10))?;
    Ok(format!("{checked} sizes, {:.2?}", t.elapsed()))
}

fn oracle_equivalence(nests: &[(String, LoopNest)]) -> Check {
    let t = Instant::now();
    let mut values = 0;
    for (text, nest) in nests {
        let deps = compute_dependences(nest);
        let recs = working_sets(nest, &deps).map_err(|e| e.to_string())?;
        ensure(recs.len() == deps.len(), || format!("{} records for {} dependences\n{text}", recs.len(), deps.len()))?;
        for (d, r) in deps.iter().zip(&recs) {
            let min = enumerate_working_set(nest, d, Which::Min).map_err(|e| e.to_string())?;
            let max = enumerate_working_set(nest, d, Which::Max).map_err(|e| e.to_string())?;
            ensure((r.ws_min, r.ws_max) == (min, max), || {
                format!("{}: analysis ({}, {}) vs execution ({min}, {max})\n{text}", d.label(nest), r.ws_min, r.ws_max)
            })?;
            values += 2;
        }
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("{} nests, {values} values equal, {:.2?}", nests.len(), t.elapsed()))
}

fn dependence_exactness(nests: &[(String, LoopNest)]) -> Check {
    let t = Instant::now();
    let mut compared = 0;
    for (text, nest) in nests {
        let deps = compute_dependences(nest);
        let refs = &nest.stmt.refs;
        for i in 0..refs.len() {
            for j in 0..refs.len() {
                if refs[i].array != refs[j].array {
                    continue;
                }
                let dep = deps.iter().find(|d| d.src_ref == i && d.tgt_ref == j);
                let equal = pair_sets_equal(nest, i, j, dep.map(|d| &d.rel))?;
                ensure(equal, || format!("refs {i} -> {j} differ\n{text}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} reference pairs, {:.2?}", t.elapsed()))
}

fn random_machine(rng: &mut ChaCha8Rng, levels: usize) -> MachineDescriptor {
    let mut size = 0u64;
    let levels = (0..levels)
        .map(|i| {
            size += rng.gen_range(1..200u64) * 4;
            CacheLevel {
                name: format!("L{}", i + 1),
                size_bytes: size,
                latency: q(rng.gen_range(1..300)),
                bandwidth: q(rng.gen_range(1..256)),
            }
        })
        .collect();
    MachineDescriptor {
        levels,
        mem_latency: q(rng.gen_range(1..400)),
        mem_bandwidth: q(rng.gen_range(1..64)),
        element_bytes: 4,
    }
}

fn cachefit_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let lv = rng.gen_range(1..=4);
        let m = random_machine(&mut rng, lv);
        let mut sizes: Vec<u64> = (0..rng.gen_range(0..12)).map(|_| rng.gen_range(0..400)).collect();
        let fit = assign_to_caches(&sizes, &m).map_err(|e| e.to_string())?;
        ensure(fit.total() == sizes.iter().sum::<u64>(), || format!("case {case}: totals differ"))?;
        for (l, ws) in m.levels.iter().zip(&fit.per_level_ws) {
            ensure(ws * m.element_bytes <= l.size_bytes, || format!("case {case}: {} overfull", l.name))?;
        }
        sizes.shuffle(&mut rng);
        let again = assign_to_caches(&sizes, &m).map_err(|e| e.to_string())?;
        ensure(again.per_level_ws == fit.per_level_ws && again.mem_ws == fit.mem_ws, || {
            format!("case {case}: permuted input changes placement")
        })?;
    }
    let m = MachineDescriptor::default_machine();
    let fit = assign_to_caches(&[11_000_000, 300_000, 5000, 4000], &m).map_err(|e| e.to_string())?;
    ensure(fit.per_level_ws == vec![4000, 5000, 300_000] && fit.mem_ws == 11_000_000, || format!("example gave {fit:?}"))?;
    Ok("200 random cases; example placed L1:4000 L2:5000 L3:300000 mem:11000000".into())
}

fn random_scores(rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    (0..rng.gen_range(2..9)).map(|_| (0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..10_000)).collect()).collect()
}

fn rank_all(sets: &[Vec<u64>], m: &MachineDescriptor) -> Result<Vec<String>, String> {
    let scores: Vec<VariantScore> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| score(format!("v{i:02}"), s, m))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    rank_by_cost(&scores, sets.len()).map_err(|e| e.to_string())
}

fn cost_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let sets = random_scores(&mut rng);
        let big = "level L1 size 1000000000 latency 3 bandwidth 7\nmem latency 100 bandwidth 2\nelement_bytes 4\n";
        let m: MachineDescriptor = big.parse().map_err(|e: polyrank::cachefit::MachineError| e.to_string())?;
        let got = rank_all(&sets, &m)?;
        let mut want: Vec<(u64, String)> =
            sets.iter().enumerate().map(|(i, s)| (s.iter().sum(), format!("v{i:02}"))).collect();
        want.sort();
        let want: Vec<String> = want.into_iter().map(|(_, id)| id).collect();
        ensure(got == want, || format!("single-level case {case}: {got:?} vs {want:?}"))?;
    }
    for case in 0..50 {
        let lv = rng.gen_range(1..=3);
        let m = random_machine(&mut rng, lv);
        let sets = random_scores(&mut rng);
        let factor = BigRational::new(BigInt::from(rng.gen_range(1..50)), BigInt::from(rng.gen_range(1..50)));
        let mut scaled = m.clone();
        for l in &mut scaled.levels {
            l.latency = &l.latency * &factor;
        }
        scaled.mem_latency = &scaled.mem_latency * &factor;
        ensure(rank_all(&sets, &m)? == rank_all(&sets, &scaled)?, || format!("scaling case {case} reorders"))?;
    }
    Ok("50 single-level cases, 50 scaled machines".into())
}

fn variant_safety() -> Check {
    let t = Instant::now();
    let nest = ConvPreset::default().nest();
    let base_points = nest.iteration_space().cardinality();
    let footprints = |n: &LoopNest| -> BTreeMap<String, u64> {
        let space = n.iteration_space();
        n.access_relations().all().apply(&space).expect("apply").iter().map(|(a, s)| (a.to_string(), s.cardinality())).collect()
    };
    let base_fp = footprints(&nest);
    let base = nest.restore_microkernel().map_err(|e| e.to_string())?;
    let Body::Call { band: base_band } = &base.body else { return Err("preset has no band".into()) };
    let base_band_text = format!("{base_band:?}");
    let call = |src: &str| src.lines().find(|l| l.contains("gemm_microkernel(")).map(str::trim).map(String::from);
    let base_call = call(&base.emit());
    let variants = generate_variants(&nest, &default_conv_config()).map_err(|e| e.to_string())?;
    ensure(variants.len() == 360, || format!("{} variants", variants.len()))?;
    for (id, v) in &variants {
        let restored = v.restore_microkernel().map_err(|e| e.to_string())?;
        let Body::Call { band } = &restored.body else { return Err(format!("{id}: no band")) };
        ensure(format!("{band:?}") == base_band_text, || format!("{id}: band changed"))?;
        ensure(call(&restored.emit()) == base_call, || format!("{id}: microkernel call changed"))?;
        let inl = v.inline_microkernel().map_err(|e| e.to_string())?;
        ensure(inl.iteration_space().cardinality() == base_points, || format!("{id}: cardinality changed"))?;
        ensure(footprints(&inl) == base_fp, || format!("{id}: footprint changed"))?;
    }
    let injected: [(&LoopNest, &str); 6] = [
        (&nest, "perm=ofm_tile,ifm_tile,oj,kj,oi"),
        (&nest, "perm=ofm_tile,ifm_tile,oj,kj,kx"),
        (&nest, "perm=ofm_tile,ofm_tile,oj,kj,ki"),
        (&nest, "perm=ki,img"),
        (&nest, "tile=ofm:4"),
        (&nest, "tile=oj:0"),
    ];
    let stencil = polyrank::loopnest::parse_nest(
        "loop i lower 1 upper 6\nloop j lower 0 upper 5\nloop k lower 0 upper 3\n\
         statement S\n read A[i - 1][j + 1][k]\n write A[i][j][k]\nend\n",
    )
    .map_err(|e| e.to_string())?;
    let triangular = polyrank::loopnest::parse_nest(
        "loop i lower 0 upper 6\nloop j lower i upper 6\nstatement S\n read B[i][j]\nend\n",
    )
    .map_err(|e| e.to_string())?;
    let mut rejected = 0;
    let more: [(&LoopNest, &str); 5] = [
        (&stencil, "perm=j,i,k"),
        (&stencil, "perm=k,j,i"),
        (&stencil, "tile=i:2"),
        (&triangular, "perm=j,i"),
        (&triangular, "tile=j:2"),
    ];
    for (n, r) in injected.iter().chain(more.iter()) {
        let recipe = r.parse().map_err(|e: VariantError| e.to_string())?;
        match apply_recipe(n, &recipe) {
            Err(VariantError::ConfigRejected(reason)) => {
                if *r == "perm=j,i,k" {
                    ensure(matches!(reason, RejectReason::IllegalDependence(_)), || format!("{r}: {reason}"))?;
                }
                rejected += 1;
            }
            Ok(_) => return Err(format!("illegal recipe {r} accepted")),
        }
    }
    Ok(format!("360 variants preserved, {rejected} illegal recipes rejected, {:.1?}", t.elapsed()))
}

fn dnn_ranker() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for trial in 0..3 {
        let net = Mlp::init(&mut rng);
        let data = synthetic_dataset(8, 100 + trial);
        let enc: Vec<(Vec<f64>, usize)> = data
            .iter()
            .map(|e| {
                let x = polyrank::dnnrank::normalize_pair(&e.a, &e.b).unwrap();
                (x.to_vec(), if e.winner == polyrank::dnnrank::Winner::A { 0 } else { 1 })
            })
            .collect();
        let batch: Vec<(&[f64], usize)> = enc.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        worst = worst.max(gradient_check(&net, &batch, 1e-6));
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:e}"))?;
    let data = synthetic_dataset(2000, 7);
    let (ranker, rep) = train(&data, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let acc = rep.held_out_accuracy.ok_or("nothing held out")?;
    ensure(acc >= 0.90, || format!("held-out accuracy {acc:.4}"))?;
    let best = VariantStats::new(900, 300, 100, 10);
    let players: Vec<Contestant> = [(400, 2000), (200, 4000), (50, 5000), (10, 8000)]
        .iter()
        .enumerate()
        .map(|(i, &(l3, mem))| Contestant {
            id: format!("v{}", i + 1),
            stats: VariantStats::new(900, 300 + 100 * i as u64, l3 + 100, mem),
            cost: q(0),
        })
        .chain(std::iter::once(Contestant { id: "v0".into(), stats: best, cost: q(0) }))
        .collect();
    let order = tournament_rank(&ranker, &players, 5);
    ensure(order[0] == "v0", || format!("tournament order {order:?}"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("gradient error {worst:.1e}, held-out accuracy {acc:.3}, dominator first, {:.1?}", t.elapsed()))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_polyrank")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let variants = data("conv_four_orders.variants");
    let mut reports = Vec::new();
    for run_no in 0..2 {
        let out = dir.path().join(format!("run{run_no}"));
        run(&[
            "rank",
            "--preset",
            "conv:2,32,32,4,4,3,3,1,1,16",
            "--variants",
            variants.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])?;
        let report = std::fs::read(out.join("report.txt")).map_err(|e| e.to_string())?;
        let top = std::fs::read(out.join("rank1.c")).map_err(|e| e.to_string())?;
        reports.push((report, top));
    }
    ensure(reports[0] == reports[1], || "two rank runs differ".into())?;
    let emitted = run(&["emit", "--preset", "conv:2,32,32,4,4,3,3,1,1,16", "--recipe", "identity"])?;
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/conv_identity.c"))
        .map_err(|e| e.to_string())?;
    ensure(emitted == golden, || format!("identity emission differs from golden file:\n{emitted}"))?;
    Ok("report and rank1.c byte-identical; identity emission matches golden".into())
}

/// Greedy placement and cost, written out from the cost definition.
fn independent_cost(sizes: &[u64], m: &MachineDescriptor) -> BigRational {
    let mut sorted = sizes.to_vec();
    sorted.sort();
    let mut used = vec![0u64; m.levels.len()];
    let mut total = q(0);
    for ws in sorted {
        let slot = (0..m.levels.len()).find(|&i| (used[i] + ws) * m.element_bytes <= m.levels[i].size_bytes);
        let w = BigRational::from_integer(BigInt::from(ws));
        match slot {
            Some(i) => {
                used[i] += ws;
                total += w * &m.levels[i].latency / &m.levels[i].bandwidth;
            }
            None => total += w * &m.mem_latency / &m.mem_bandwidth,
        }
    }
    total
}

fn motivation_demo() -> Check {
    let t = Instant::now();
    let out = run(&[
        "rank",
        "--preset",
        "conv:2,32,32,4,4,3,3,1,1,16",
        "--variants",
        data("conv_four_orders.variants").to_str().unwrap(),
        "--format",
        "rows",
    ])?;
    let ranked: Vec<(String, String)> = out
        .lines()
        .filter_map(|l| l.strip_prefix("rank\t"))
        .filter(|l| !l.starts_with("position"))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[1].to_string(), f[2].to_string())
        })
        .collect();
    ensure(ranked.len() == 4, || format!("{} ranked variants", ranked.len()))?;
    let nest = ConvPreset::default().nest();
    let m = MachineDescriptor::default_machine();
    let mut costs = Vec::new();
    for (id, reported) in &ranked {
        let v = apply_recipe(&nest, &id.parse().map_err(|e: VariantError| e.to_string())?).map_err(|e| e.to_string())?;
        let refs = &v.stmt.refs;
        let mut sizes = Vec::new();
        for i in 0..refs.len() {
            for j in 0..refs.len() {
                if refs[i].array != refs[j].array {
                    continue;
                }
                if let Some(w) = working_set_for_pair(&v, &refs[i], &refs[j]).map_err(|e| e.to_string())? {
                    sizes.extend([w.ws_min, w.ws_max]);
                }
            }
        }
        let c = independent_cost(&sizes, &m);
        ensure(&format_rational(&c) == reported, || format!("{id}: reported {reported}, recomputed {}", format_rational(&c)))?;
        let analysis = working_sets(&v, &compute_dependences(&v)).map_err(|e| e.to_string())?;
        ensure(independent_cost(&all_sizes(&analysis), &m) == c, || format!("{id}: analysis sizes disagree"))?;
        costs.push(c);
    }
    let min = costs.iter().min().unwrap();
    ensure(&costs[0] == min, || format!("rank-1 cost {} is not the minimum {}", format_rational(&costs[0]), format_rational(min)))?;
    Ok(format!("4 loop orders ranked, rank-1 {} has minimal cost {}, {:.1?}", ranked[0].0, format_rational(min), t.elapsed()))
}

fn main() {
    let nests = corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("matmul working-set formula", Box::new(matmul_formula)),
        ("oracle equivalence of working sets", Box::new(|| oracle_equivalence(&nests))),
        ("dependence pair sets match brute force", Box::new(|| dependence_exactness(&nests))),
        ("cache placement properties", Box::new(cachefit_properties)),
        ("cost model sanity", Box::new(cost_sanity)),
        ("variant generation safety", Box::new(variant_safety)),
        ("pairwise ranker", Box::new(dnn_ranker)),
        ("end-to-end determinism", Box::new(determinism)),
        ("loop-order ranking demonstration", Box::new(motivation_demo)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
