//! Pairwise neural comparator over per-level working-set statistics, a
//! round-robin tournament on top of it, and a small SGD trainer.

mod net;

use std::cmp::Ordering;
use std::str::FromStr;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cachefit::CacheFitResult;

pub use net::{Activation, Gradients, Layer, Mlp, ACTIVATIONS, LAYER_DIMS};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DnnError {
    #[error("both variants have all-zero statistics")]
    DegeneratePair,
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("line {line}: malformed dataset row: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("line {line}: malformed weights file: {message}")]
    MalformedWeights { line: usize, message: String },
}

/// Working-set element counts of one variant by placement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct VariantStats {
    pub ws_l1: u64,
    pub ws_l2: u64,
    /// Third level and anything beyond it.
    pub ws_l3: u64,
    pub ws_mem: u64,
}

impl VariantStats {
    pub fn new(ws_l1: u64, ws_l2: u64, ws_l3: u64, ws_mem: u64) -> Self {
        Self { ws_l1, ws_l2, ws_l3, ws_mem }
    }

    pub fn from_fit(fit: &CacheFitResult) -> Self {
        let at = |i: usize| fit.per_level_ws.get(i).copied().unwrap_or(0);
        Self {
            ws_l1: at(0),
            ws_l2: at(1),
            ws_l3: fit.per_level_ws.iter().skip(2).sum(),
            ws_mem: fit.mem_ws,
        }
    }

    fn array(&self) -> [u64; 4] {
        [self.ws_l1, self.ws_l2, self.ws_l3, self.ws_mem]
    }
}

/// The eight statistics of `(a, b)` divided by their joint sum.
pub fn normalize_pair(a: &VariantStats, b: &VariantStats) -> Result<[f64; 8], DnnError> {
    let mut raw = [0u64; 8];
    raw[..4].copy_from_slice(&a.array());
    raw[4..].copy_from_slice(&b.array());
    let total: u128 = raw.iter().map(|&v| v as u128).sum();
    if total == 0 {
        return Err(DnnError::DegeneratePair);
    }
    Ok(raw.map(|v| (v as f64) / (total as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    WinA,
    WinB,
    Draw,
}

/// Outcome of a network output pair under threshold `theta`.
pub fn decide(out: &[f64], theta: f64) -> Outcome {
    if out[0] > theta {
        Outcome::WinA
    } else if out[1] > theta {
        Outcome::WinB
    } else {
        Outcome::Draw
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRanker {
    pub net: Mlp,
    pub threshold: f64,
}

impl PairwiseRanker {
    /// Freshly initialized weights for `seed`.
    pub fn init(seed: u64) -> Self {
        Self { net: Mlp::init(&mut ChaCha8Rng::seed_from_u64(seed)), threshold: DEFAULT_THRESHOLD }
    }

    /// Softmax output for the ordered pair.
    pub fn predict(&self, a: &VariantStats, b: &VariantStats) -> Result<[f64; 2], DnnError> {
        let out = self.net.forward(&normalize_pair(a, b)?);
        Ok([out[0], out[1]])
    }

    pub fn compare(&self, a: &VariantStats, b: &VariantStats) -> Result<Outcome, DnnError> {
        Ok(decide(&self.predict(a, b)?, self.threshold))
    }

    pub fn to_text(&self) -> String {
        net::write_weights(&self.net, self.threshold)
    }
}

impl FromStr for PairwiseRanker {
    type Err = DnnError;

    fn from_str(text: &str) -> Result<Self, DnnError> {
        let (net, threshold) = net::read_weights(text)?;
        Ok(Self { net, threshold })
    }
}

#[derive(Debug, Clone)]
pub struct Contestant {
    pub id: String,
    pub stats: VariantStats,
    /// Tie-break between equal win counts.
    pub cost: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Standing {
    pub id: String,
    pub wins: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tournament {
    /// Every contestant, best first.
    pub standings: Vec<Standing>,
    pub decisive_games: usize,
    pub draws: usize,
}

impl Tournament {
    pub fn top(&self, k: usize) -> Vec<String> {
        self.standings.iter().take(k).map(|s| s.id.clone()).collect()
    }
}

/// Round robin: each unordered pair plays once, lower index as `a`. A pair
/// with no statistics at all counts as a draw.
pub fn tournament(r: &PairwiseRanker, players: &[Contestant]) -> Tournament {
    let mut wins = vec![0usize; players.len()];
    let (mut decisive_games, mut draws) = (0, 0);
    for i in 0..players.len() {
        for j in i + 1..players.len() {
            match r.compare(&players[i].stats, &players[j].stats).unwrap_or(Outcome::Draw) {
                Outcome::WinA => wins[i] += 1,
                Outcome::WinB => wins[j] += 1,
                Outcome::Draw => {
                    draws += 1;
                    continue;
                }
            }
            decisive_games += 1;
        }
    }
    let mut order: Vec<usize> = (0..players.len()).collect();
    order.sort_by(|&x, &y| {
        wins[y]
            .cmp(&wins[x])
            .then_with(|| players[x].cost.cmp(&players[y].cost))
            .then_with(|| players[x].id.cmp(&players[y].id))
    });
    Tournament {
        standings: order.into_iter().map(|i| Standing { id: players[i].id.clone(), wins: wins[i] }).collect(),
        decisive_games,
        draws,
    }
}

/// Ids of the `k` best contestants.
pub fn tournament_rank(r: &PairwiseRanker, players: &[Contestant], k: usize) -> Vec<String> {
    tournament(r, players).top(k)
}

/// Fraction of pairs whose outcome is the same (mirrored) when the operands
/// are swapped.
pub fn order_consistency(r: &PairwiseRanker, stats: &[VariantStats]) -> f64 {
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..stats.len() {
        for j in i + 1..stats.len() {
            let (Ok(ab), Ok(ba)) = (r.compare(&stats[i], &stats[j]), r.compare(&stats[j], &stats[i])) else {
                continue;
            };
            let mirrored = match ba {
                Outcome::WinA => Outcome::WinB,
                Outcome::WinB => Outcome::WinA,
                Outcome::Draw => Outcome::Draw,
            };
            total += 1;
            agree += usize::from(ab == mirrored);
        }
    }
    if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    }
}

/// Which variant of a pair performed better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Winner {
    A,
    B,
}

impl Winner {
    fn class(self) -> usize {
        match self {
            Winner::A => 0,
            Winner::B => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub a: VariantStats,
    pub b: VariantStats,
    pub winner: Winner,
}

/// Reads rows of `a_l1 a_l2 a_l3 a_mem b_l1 b_l2 b_l3 b_mem winner`, where
/// the winner is `A` or `B`. Commas or whitespace separate fields; `#` starts
/// a comment.
pub fn parse_dataset(text: &str) -> Result<Vec<Example>, DnnError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let code = raw.split('#').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let fields: Vec<&str> = code.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |m: String| DnnError::MalformedRow { line, message: m };
        if fields.len() != 9 {
            return Err(bad(format!("expected 9 fields, found {}", fields.len())));
        }
        let mut v = [0u64; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| bad(format!("`{f}` is not a non-negative integer")))?;
        }
        let winner = match fields[8] {
            "A" | "a" => Winner::A,
            "B" | "b" => Winner::B,
            other => return Err(bad(format!("winner `{other}` is not A or B"))),
        };
        rows.push(Example {
            a: VariantStats::new(v[0], v[1], v[2], v[3]),
            b: VariantStats::new(v[4], v[5], v[6], v[7]),
            winner,
        });
    }
    Ok(rows)
}

pub fn format_dataset(rows: &[Example]) -> String {
    let mut out = String::from("# a_l1 a_l2 a_l3 a_mem b_l1 b_l2 b_l3 b_mem winner\n");
    for r in rows {
        let s = |v: &VariantStats| v.array().map(|x| x.to_string()).join(" ");
        let w = match r.winner {
            Winner::A => "A",
            Winner::B => "B",
        };
        out.push_str(&format!("{} {} {w}\n", s(&r.a), s(&r.b)));
    }
    out
}

/// `n` random pairs whose winner is the variant with fewer elements spilled
/// to memory (pairs with equal memory counts are redrawn).
pub fn synthetic_dataset(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        VariantStats::new(rng.gen_range(0..1000), rng.gen_range(0..1000), rng.gen_range(0..1000), rng.gen_range(0..1000))
    };
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let winner = match a.ws_mem.cmp(&b.ws_mem) {
            Ordering::Less => Winner::A,
            Ordering::Greater => Winner::B,
            Ordering::Equal => continue,
        };
        out.push(Example { a, b, winner });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of rows used for training; the rest (rounded up) is held out.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, learning_rate: 0.1, batch_size: 16, split: 0.7, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_rows: usize,
    pub held_out_rows: usize,
    pub train_accuracy: f64,
    /// `None` when nothing is held out.
    pub held_out_accuracy: Option<f64>,
    pub final_loss: f64,
    /// Rows skipped because both variants had all-zero statistics.
    pub degenerate_rows: usize,
}

/// Rows held out of `n` for training fraction `split`.
pub fn held_out_count(n: usize, split: f64) -> usize {
    let held = ((n as f64) * (1.0 - split) + 1e-9).floor() as usize;
    held.min(n)
}

/// Fraction of examples where the larger output names the winner (ties
/// count for `A`).
pub fn accuracy(r: &PairwiseRanker, rows: &[(Vec<f64>, usize)]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let right = rows
        .iter()
        .filter(|(x, label)| {
            let out = r.net.forward(x);
            usize::from(out[1] > out[0]) == *label
        })
        .count();
    right as f64 / rows.len() as f64
}

fn encode(rows: &[Example]) -> (Vec<(Vec<f64>, usize)>, usize) {
    let mut degenerate = 0;
    let enc = rows
        .iter()
        .filter_map(|e| match normalize_pair(&e.a, &e.b) {
            Ok(x) => Some((x.to_vec(), e.winner.class())),
            Err(_) => {
                degenerate += 1;
                None
            }
        })
        .collect();
    (enc, degenerate)
}

/// Mini-batch gradient descent on softmax cross-entropy. Rows are shuffled
/// once by the seed, the trailing `held_out_count` rows are held out, and the
/// training rows are reshuffled each epoch.
pub fn train(data: &[Example], cfg: &TrainConfig) -> Result<(PairwiseRanker, TrainReport), DnnError> {
    if data.is_empty() {
        return Err(DnnError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ranker = PairwiseRanker { net: Mlp::init(&mut rng), threshold: DEFAULT_THRESHOLD };
    let mut rows = data.to_vec();
    rows.shuffle(&mut rng);
    let held = held_out_count(rows.len(), cfg.split);
    let split_at = rows.len() - held;
    let (train_enc, d1) = encode(&rows[..split_at]);
    let (test_enc, d2) = encode(&rows[split_at..]);
    let batch_size = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (train_enc[i].0.as_slice(), train_enc[i].1)).collect();
            let (_, g) = ranker.net.loss_and_gradient(&batch);
            ranker.net.step(&g, cfg.learning_rate);
        }
    }
    let all: Vec<(&[f64], usize)> = train_enc.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
    let report = TrainReport {
        train_rows: split_at,
        held_out_rows: held,
        train_accuracy: accuracy(&ranker, &train_enc),
        held_out_accuracy: (!test_enc.is_empty()).then(|| accuracy(&ranker, &test_enc)),
        final_loss: ranker.net.loss(&all),
        degenerate_rows: d1 + d2,
    };
    Ok((ranker, report))
}

/// Largest relative difference between the analytic gradient of the mean
/// loss over `batch` and central differences, over every parameter.
/// Differences are taken relative to `max(|analytic|, |numeric|, 1e-6)`.
pub fn gradient_check(net: &Mlp, batch: &[(&[f64], usize)], eps: f64) -> f64 {
    let (_, g) = net.loss_and_gradient(batch);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..net.parameter_count() {
        let orig = *probe.parameter_mut(i);
        *probe.parameter_mut(i) = orig + eps;
        let up = probe.loss(batch);
        *probe.parameter_mut(i) = orig - eps;
        let down = probe.loss(batch);
        *probe.parameter_mut(i) = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = Mlp::gradient_at(&g, i);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
