//! Latency/bandwidth-weighted cost of a cache placement and cost ranking.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::cachefit::{assign_to_caches, CacheFitResult, MachineDescriptor, MachineError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("nothing to rank")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantScore {
    pub variant_id: String,
    pub cost: BigRational,
    pub fit: CacheFitResult,
}

/// `sum_i WS_i * lat_i / bw_i + WS_mem * lat_mem / bw_mem`, in elements.
pub fn cost(fit: &CacheFitResult, m: &MachineDescriptor) -> BigRational {
    let term = |ws: u64, lat: &BigRational, bw: &BigRational| BigRational::from_integer(BigInt::from(ws)) * lat / bw;
    let levels = fit
        .per_level_ws
        .iter()
        .zip(&m.levels)
        .fold(BigRational::zero(), |acc, (&ws, l)| acc + term(ws, &l.latency, &l.bandwidth));
    levels + term(fit.mem_ws, &m.mem_latency, &m.mem_bandwidth)
}

/// Fits `sizes` to `m` and prices the result.
pub fn score(variant_id: impl Into<String>, sizes: &[u64], m: &MachineDescriptor) -> Result<VariantScore, MachineError> {
    let fit = assign_to_caches(sizes, m)?;
    Ok(VariantScore { variant_id: variant_id.into(), cost: cost(&fit, m), fit })
}

/// All scores, cheapest first; equal costs keep id order.
pub fn sort_by_cost(scores: &[VariantScore]) -> Vec<&VariantScore> {
    let mut sorted: Vec<&VariantScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.variant_id.cmp(&b.variant_id)));
    sorted
}

/// Ids of the `k` cheapest variants (all of them if `k` exceeds the count).
pub fn rank_by_cost(scores: &[VariantScore], k: usize) -> Result<Vec<String>, RankError> {
    if scores.is_empty() {
        return Err(RankError::EmptyInput);
    }
    Ok(sort_by_cost(scores).into_iter().take(k).map(|s| s.variant_id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cachefit::parse_decimal;

    fn q(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    fn fit(levels: Vec<u64>, mem: u64) -> CacheFitResult {
        CacheFitResult { placement: Vec::new(), per_level_ws: levels, mem_ws: mem }
    }

    #[test]
    fn substitution_examples() {
        let m = MachineDescriptor::default_machine();
        assert_eq!(cost(&fit(vec![0, 0, 0], 0), &m), BigRational::zero());
        assert_eq!(cost(&fit(vec![100, 0, 0], 0), &m), q("3.125"));
        assert_eq!(cost(&fit(vec![4000, 5000, 300_000], 11_000_000), &m), q("137969968.75"));
        let s = score("v", &[4000, 5000, 300_000, 11_000_000], &m).unwrap();
        assert_eq!(s.cost, q("137969968.75"));
    }

    fn scored(id: &str, c: &str) -> VariantScore {
        VariantScore { variant_id: id.into(), cost: q(c), fit: fit(vec![], 0) }
    }

    #[test]
    fn ranking_rules() {
        let s = vec![scored("v1", "5"), scored("v2", "3"), scored("v3", "9")];
        assert_eq!(rank_by_cost(&s, 2).unwrap(), vec!["v2", "v1"]);
        assert_eq!(rank_by_cost(&s, 10).unwrap().len(), 3);
        let tied = vec![scored("b", "1"), scored("a", "1")];
        assert_eq!(rank_by_cost(&tied, 2).unwrap(), vec!["a", "b"]);
        assert_eq!(rank_by_cost(&[], 1).unwrap_err(), RankError::EmptyInput);
    }
}
