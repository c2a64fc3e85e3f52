//! Pipeline behind the `polyrank` binary: load a nest, generate variants,
//! analyze and rank them, emit sources, train the pairwise ranker, and check
//! the analysis against direct execution.

mod preset;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::cachefit::{MachineDescriptor, MachineError};
use crate::costrank::{score, sort_by_cost, VariantScore};
use crate::deps::{compute_dependences, Dependence};
use crate::dnnrank::{tournament, Contestant, DnnError, PairwiseRanker, VariantStats};
use crate::intset::IntSetError;
use crate::loopnest::{parse_nest, Body, LoopNest, LoopNestError};
use crate::oracle::{self, OracleError};
use crate::reuse::{all_sizes, working_sets, WorkingSetRecord};
use crate::variants::{apply_recipe, default_conv_config, generate_variants, Recipe, VariantConfig, VariantError};

pub use preset::ConvPreset;
pub use report::{analysis_report, oracle_report, rank_report, train_report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Nest { path: String, source: LoopNestError },
    #[error("{path}: {source}")]
    Machine { path: String, source: MachineError },
    #[error("{0}")]
    Variant(#[from] VariantError),
    #[error("the dnn ranker needs a weights file (--weights)")]
    MissingWeights,
    #[error("{path}: {source}")]
    Dnn { path: String, source: DnnError },
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("{0} oracle mismatches")]
    OracleMismatch(usize),
}

impl CliError {
    /// 1 for failures while analyzing a nest, 2 for I/O, usage and
    /// configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Nest { .. } | CliError::Analysis(_) | CliError::OracleMismatch(_) => 1,
            _ => 2,
        }
    }
}

impl From<IntSetError> for CliError {
    fn from(e: IntSetError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Analysis(e.to_string())
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    /// Tab-separated rows, first field naming the record type.
    Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankerKind {
    #[default]
    Cost,
    Dnn,
}

/// A loaded nest and whether it came from the convolution preset.
#[derive(Debug, Clone)]
pub struct NestInput {
    pub nest: LoopNest,
    pub from_preset: bool,
}

/// Reads `--nest FILE` or builds `--preset conv:...` (exactly one).
pub fn load_nest(file: Option<&Path>, preset: Option<&str>) -> Result<NestInput, CliError> {
    match (file, preset) {
        (Some(p), None) => {
            let nest = parse_nest(&read_file(p)?)
                .map_err(|source| CliError::Nest { path: p.display().to_string(), source })?;
            Ok(NestInput { nest, from_preset: false })
        }
        (None, Some(s)) => {
            let preset: ConvPreset = s.parse().map_err(CliError::Usage)?;
            Ok(NestInput { nest: preset.nest(), from_preset: true })
        }
        (Some(_), Some(_)) => Err(CliError::Usage("give either --nest or --preset, not both".into())),
        (None, None) => Err(CliError::Usage("a nest is required (--nest FILE or --preset conv:...)".into())),
    }
}

pub fn load_machine(file: Option<&Path>) -> Result<MachineDescriptor, CliError> {
    match file {
        None => Ok(MachineDescriptor::default_machine()),
        Some(p) => {
            read_file(p)?.parse().map_err(|source| CliError::Machine { path: p.display().to_string(), source })
        }
    }
}

/// The variant space from `--variants`, else the shipped convolution space
/// for the preset, else the identity alone.
pub fn load_variants(file: Option<&Path>, input: &NestInput) -> Result<VariantConfig, CliError> {
    match file {
        Some(p) => Ok(read_file(p)?.parse()?),
        None if input.from_preset => Ok(default_conv_config()),
        None => Ok(VariantConfig::default()),
    }
}

pub fn load_weights(file: Option<&Path>) -> Result<PairwiseRanker, CliError> {
    let p = file.ok_or(CliError::MissingWeights)?;
    read_file(p)?.parse().map_err(|source| CliError::Dnn { path: p.display().to_string(), source })
}

/// Everything computed for one variant.
#[derive(Debug, Clone)]
pub struct VariantAnalysis {
    pub id: String,
    /// With any microkernel band inlined.
    pub nest: LoopNest,
    pub dependences: Vec<Dependence>,
    pub records: Vec<WorkingSetRecord>,
    pub score: VariantScore,
    pub stats: VariantStats,
}

impl VariantAnalysis {
    pub fn label(&self, dep: usize) -> String {
        self.dependences[dep].label(&self.nest)
    }
}

pub fn analyze_variant(id: &str, nest: &LoopNest, m: &MachineDescriptor) -> Result<VariantAnalysis, CliError> {
    let nest = match nest.body {
        Body::Call { .. } => nest.inline_microkernel().expect("restored nests carry their spec"),
        Body::Inline => nest.clone(),
    };
    let dependences = compute_dependences(&nest);
    let records = working_sets(&nest, &dependences)?;
    let score = score(id, &all_sizes(&records), m).map_err(|e| CliError::Analysis(e.to_string()))?;
    let stats = VariantStats::from_fit(&score.fit);
    Ok(VariantAnalysis { id: id.to_string(), nest, dependences, records, score, stats })
}

#[derive(Debug, Clone)]
pub struct Ranking {
    pub ranker: RankerKind,
    /// In generation order.
    pub analyses: Vec<VariantAnalysis>,
    /// Indices into `analyses`, best first.
    pub order: Vec<usize>,
    /// Tournament wins per analysis, for the dnn ranker.
    pub wins: Option<Vec<usize>>,
}

impl Ranking {
    pub fn ranked(&self) -> impl Iterator<Item = &VariantAnalysis> {
        self.order.iter().map(|&i| &self.analyses[i])
    }

    pub fn top(&self, k: usize) -> Vec<&VariantAnalysis> {
        self.ranked().take(k).collect()
    }
}

/// Generates the variants of `cfg`, analyzes them in parallel (results stay
/// in generation order) and ranks them.
pub fn rank_variants(
    nest: &LoopNest,
    cfg: &VariantConfig,
    m: &MachineDescriptor,
    dnn: Option<&PairwiseRanker>,
) -> Result<Ranking, CliError> {
    let variants = generate_variants(nest, cfg)?;
    let analyses: Vec<VariantAnalysis> = variants
        .par_iter()
        .map(|(id, v)| analyze_variant(id, v, m))
        .collect::<Result<_, _>>()?;
    if analyses.is_empty() {
        return Err(CliError::Usage("the variant configuration produced no variants".into()));
    }
    let index = |id: &str| analyses.iter().position(|a| a.id == id).expect("ranked ids come from the analyses");
    match dnn {
        None => {
            let scores: Vec<VariantScore> = analyses.iter().map(|a| a.score.clone()).collect();
            let order = sort_by_cost(&scores).iter().map(|s| index(&s.variant_id)).collect();
            Ok(Ranking { ranker: RankerKind::Cost, analyses, order, wins: None })
        }
        Some(r) => {
            let players: Vec<Contestant> = analyses
                .iter()
                .map(|a| Contestant { id: a.id.clone(), stats: a.stats, cost: a.score.cost.clone() })
                .collect();
            let t = tournament(r, &players);
            let order: Vec<usize> = t.standings.iter().map(|s| index(&s.id)).collect();
            let mut wins = vec![0; analyses.len()];
            for s in &t.standings {
                wins[index(&s.id)] = s.wins;
            }
            Ok(Ranking { ranker: RankerKind::Dnn, analyses, order, wins: Some(wins) })
        }
    }
}

/// Source text of `nest` under `recipe`, with the microkernel call restored
/// when the nest has one.
pub fn emit_variant(nest: &LoopNest, recipe: &Recipe) -> Result<String, CliError> {
    let v = apply_recipe(nest, recipe)?;
    Ok(restored(&v).emit())
}

fn restored(nest: &LoopNest) -> LoopNest {
    match nest.restore_microkernel() {
        Ok(r) => r,
        Err(_) => nest.clone(),
    }
}

/// `(file name, variant id, source)` for the `k` best variants.
pub fn top_sources(r: &Ranking, k: usize) -> Vec<(String, String, String)> {
    r.top(k).iter().enumerate().map(|(i, a)| (format!("rank{}.c", i + 1), a.id.clone(), restored(&a.nest).emit())).collect()
}

/// Iteration count up to which the oracle also compares full pair sets.
pub const PAIR_CHECK_LIMIT: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    pub label: String,
    pub analytic: (u64, u64),
    pub executed: (u64, u64),
    /// `None` when the nest is too large for a pair-set comparison.
    pub pairs_match: Option<bool>,
}

impl OracleRow {
    pub fn agrees(&self) -> bool {
        self.analytic == self.executed && self.pairs_match != Some(false)
    }
}

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub rows: Vec<OracleRow>,
    pub iterations: u64,
    /// Miss ratios per cache level from an LRU replay of the access trace.
    pub miss_ratios: Vec<(String, f64)>,
}

impl OracleCheck {
    pub fn mismatches(&self) -> usize {
        self.rows.iter().filter(|r| !r.agrees()).count()
    }
}

/// Compares each dependence's working sets (and, for small nests, its pair
/// set) with direct execution, and replays the trace through LRU caches.
pub fn oracle_check(nest: &LoopNest, m: &MachineDescriptor) -> Result<OracleCheck, CliError> {
    let a = analyze_variant("identity", nest, m)?;
    let iterations = a.nest.iteration_space().cardinality();
    let refs = &a.nest.stmt.refs;
    let mut rows = Vec::new();
    for d in &a.dependences {
        let rec = a.records.iter().find(|r| r.dep == d.id);
        let analytic = rec.map_or((0, 0), |r| (r.ws_min, r.ws_max));
        let ex = oracle::working_set_for_pair(&a.nest, &refs[d.src_ref], &refs[d.tgt_ref])?;
        let executed = ex.map_or((0, 0), |w| (w.ws_min, w.ws_max));
        let pairs_match = if iterations <= PAIR_CHECK_LIMIT {
            let brute = oracle::brute_force_pairs(&a.nest, &refs[d.src_ref], &refs[d.tgt_ref])?;
            let mine: std::collections::BTreeSet<(Vec<i64>, Vec<i64>)> =
                d.rel.pairs()?.into_iter().map(|(s, t)| (s.0, t.0)).collect();
            Some(brute == mine)
        } else {
            None
        };
        rows.push(OracleRow { label: a.label(d.id), analytic, executed, pairs_match });
    }
    let trace = oracle::trace(&a.nest, oracle::MAX_POINTS)?;
    let stats = oracle::lru_simulate(&trace, m);
    let miss_ratios = m.levels.iter().zip(&stats.levels).map(|(l, s)| (l.name.clone(), s.miss_ratio())).collect();
    Ok(OracleCheck { rows, iterations, miss_ratios })
}
