use std::fmt::Write as _;

use crate::cachefit::{format_rational, MachineDescriptor, Placement};
use crate::dnnrank::TrainReport;

use super::{Format, OracleCheck, Ranking, RankerKind, VariantAnalysis};

fn place_name(p: Placement, m: &MachineDescriptor) -> String {
    match p {
        Placement::Level(i) => m.levels[i].name.clone(),
        Placement::Memory => "mem".to_string(),
    }
}

fn point(p: &[i64]) -> String {
    let v: Vec<String> = p.iter().map(|x| x.to_string()).collect();
    format!("({})", v.join(","))
}

/// Dependences, working sets, placement and cost of one variant.
pub fn analysis_report(a: &VariantAnalysis, m: &MachineDescriptor, format: Format) -> String {
    let mut out = String::new();
    let placement = &a.score.fit.placement;
    match format {
        Format::Text => {
            writeln!(out, "variant {}", a.id).unwrap();
            writeln!(out, "iterations {}", a.nest.iteration_space().cardinality()).unwrap();
            writeln!(out, "dependences {}", a.dependences.len()).unwrap();
            let labels: Vec<String> = a.records.iter().map(|r| a.label(r.dep)).collect();
            let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(10);
            writeln!(out, "  {:<4} {:<width$} {:>10} {:>10}  {:<6} {:<6} source -> first/last target", "dep", "dependence", "ws_min", "ws_max", "min@", "max@").unwrap();
            for (i, (r, label)) in a.records.iter().zip(&labels).enumerate() {
                writeln!(
                    out,
                    "  d{:<3} {:<width$} {:>10} {:>10}  {:<6} {:<6} {} -> {} / {}",
                    r.dep,
                    label,
                    r.ws_min,
                    r.ws_max,
                    place_name(placement[2 * i], m),
                    place_name(placement[2 * i + 1], m),
                    point(&r.source.0),
                    point(&r.first_target.0),
                    point(&r.last_target.0)
                )
                .unwrap();
            }
            writeln!(out, "placement (elements)").unwrap();
            for (l, ws) in m.levels.iter().zip(&a.score.fit.per_level_ws) {
                writeln!(out, "  {:<6} {:>12} of {}", l.name, ws, l.size_bytes / m.element_bytes).unwrap();
            }
            writeln!(out, "  {:<6} {:>12}", "mem", a.score.fit.mem_ws).unwrap();
            writeln!(out, "cost {}", format_rational(&a.score.cost)).unwrap();
        }
        Format::Rows => {
            writeln!(out, "dep\tvariant\tid\tkind\tarray\tdependence\tws_min\tws_max\tmin_at\tmax_at").unwrap();
            for (i, r) in a.records.iter().enumerate() {
                writeln!(
                    out,
                    "dep\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    a.id,
                    r.dep,
                    r.kind,
                    r.array,
                    a.label(r.dep),
                    r.ws_min,
                    r.ws_max,
                    place_name(placement[2 * i], m),
                    place_name(placement[2 * i + 1], m)
                )
                .unwrap();
            }
            for (l, ws) in m.levels.iter().zip(&a.score.fit.per_level_ws) {
                writeln!(out, "level\t{}\t{}\t{}\t{}", a.id, l.name, ws, l.size_bytes / m.element_bytes).unwrap();
            }
            writeln!(out, "level\t{}\tmem\t{}\t-", a.id, a.score.fit.mem_ws).unwrap();
            writeln!(out, "cost\t{}\t{}", a.id, format_rational(&a.score.cost)).unwrap();
        }
    }
    out
}

/// Every variant in rank order, and which files hold the top `k`.
pub fn rank_report(r: &Ranking, k: usize, format: Format) -> String {
    let mut out = String::new();
    let ranker = match r.ranker {
        RankerKind::Cost => "cost",
        RankerKind::Dnn => "dnn",
    };
    let wins = |i: usize| r.wins.as_ref().map_or("-".to_string(), |w| w[i].to_string());
    let shown = k.min(r.order.len());
    match format {
        Format::Text => {
            writeln!(out, "ranker {ranker}").unwrap();
            writeln!(out, "variants {}", r.analyses.len()).unwrap();
            let width = r.analyses.iter().map(|a| a.id.len()).max().unwrap_or(0).max(7);
            writeln!(out, "{:>5}  {:<width$}  {:>20}  {:>5}  {:>8} {:>8} {:>8} {:>8}", "rank", "variant", "cost", "wins", "L1", "L2", "L3+", "mem").unwrap();
            for (pos, &i) in r.order.iter().enumerate() {
                let a = &r.analyses[i];
                writeln!(
                    out,
                    "{:>5}  {:<width$}  {:>20}  {:>5}  {:>8} {:>8} {:>8} {:>8}",
                    pos + 1,
                    a.id,
                    format_rational(&a.score.cost),
                    wins(i),
                    a.stats.ws_l1,
                    a.stats.ws_l2,
                    a.stats.ws_l3,
                    a.stats.ws_mem
                )
                .unwrap();
            }
            for pos in 0..shown {
                writeln!(out, "emitted rank{}.c {}", pos + 1, r.analyses[r.order[pos]].id).unwrap();
            }
        }
        Format::Rows => {
            writeln!(out, "rank\tposition\tvariant\tcost\twins\tl1\tl2\tl3\tmem").unwrap();
            for (pos, &i) in r.order.iter().enumerate() {
                let a = &r.analyses[i];
                writeln!(
                    out,
                    "rank\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    pos + 1,
                    a.id,
                    format_rational(&a.score.cost),
                    wins(i),
                    a.stats.ws_l1,
                    a.stats.ws_l2,
                    a.stats.ws_l3,
                    a.stats.ws_mem
                )
                .unwrap();
            }
            for pos in 0..shown {
                writeln!(out, "file\t{}\t{}\trank{}.c", pos + 1, r.analyses[r.order[pos]].id, pos + 1).unwrap();
            }
        }
    }
    out
}

pub fn train_report(rep: &TrainReport, format: Format) -> String {
    let held = rep.held_out_accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
    match format {
        Format::Text => format!(
            "train rows {}\nheld-out rows {}\ntrain accuracy {:.4}\nheld-out accuracy {held}\nfinal loss {:.6}\ndegenerate rows {}\n",
            rep.train_rows, rep.held_out_rows, rep.train_accuracy, rep.final_loss, rep.degenerate_rows
        ),
        Format::Rows => format!(
            "train\ttrain_rows\theld_out_rows\ttrain_accuracy\theld_out_accuracy\tfinal_loss\tdegenerate_rows\n\
             train\t{}\t{}\t{:.4}\t{held}\t{:.6}\t{}\n",
            rep.train_rows, rep.held_out_rows, rep.train_accuracy, rep.final_loss, rep.degenerate_rows
        ),
    }
}

pub fn oracle_report(c: &OracleCheck, format: Format) -> String {
    let mut out = String::new();
    let pairs = |p: Option<bool>| match p {
        Some(true) => "equal",
        Some(false) => "DIFFER",
        None => "skipped",
    };
    match format {
        Format::Text => {
            writeln!(out, "iterations {}", c.iterations).unwrap();
            let width = c.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(10);
            writeln!(out, "  {:<width$} {:>17} {:>17}  {:<7}  verdict", "dependence", "analytic min/max", "executed min/max", "pairs").unwrap();
            for r in &c.rows {
                writeln!(
                    out,
                    "  {:<width$} {:>17} {:>17}  {:<7}  {}",
                    r.label,
                    format!("{}/{}", r.analytic.0, r.analytic.1),
                    format!("{}/{}", r.executed.0, r.executed.1),
                    pairs(r.pairs_match),
                    if r.agrees() { "ok" } else { "MISMATCH" }
                )
                .unwrap();
            }
            writeln!(out, "mismatches {}", c.mismatches()).unwrap();
            writeln!(out, "lru miss ratios (diagnostic only, not used for ranking)").unwrap();
            for (name, ratio) in &c.miss_ratios {
                writeln!(out, "  {name:<6} {ratio:.4}").unwrap();
            }
        }
        Format::Rows => {
            writeln!(out, "oracle\tdependence\tanalytic_min\tanalytic_max\texecuted_min\texecuted_max\tpairs\tverdict").unwrap();
            for r in &c.rows {
                writeln!(
                    out,
                    "oracle\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.label,
                    r.analytic.0,
                    r.analytic.1,
                    r.executed.0,
                    r.executed.1,
                    pairs(r.pairs_match),
                    if r.agrees() { "ok" } else { "mismatch" }
                )
                .unwrap();
            }
            for (name, ratio) in &c.miss_ratios {
                writeln!(out, "lru\t{name}\t{ratio:.4}").unwrap();
            }
        }
    }
    out
}
