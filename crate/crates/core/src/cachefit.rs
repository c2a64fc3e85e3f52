//! Machine descriptions and greedy assignment of working sets to cache levels.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("machine has no cache levels")]
    EmptyMachine,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheLevel {
    pub name: String,
    pub size_bytes: u64,
    pub latency: BigRational,
    pub bandwidth: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineDescriptor {
    pub levels: Vec<CacheLevel>,
    pub mem_latency: BigRational,
    pub mem_bandwidth: BigRational,
    pub element_bytes: u64,
}

/// Shipped default: 32 KiB L1, 1 MiB L2, 39 MiB L3, 4-byte elements.
/// Latencies and bandwidths are placeholders.
pub const DEFAULT_MACHINE: &str = include_str!("../data/cascadelake.machine");

/// Parses a decimal such as `4`, `0.25` or `-3.5` exactly.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let v = BigRational::new(digits, denom);
    Some(if neg { -v } else { v })
}

/// Decimal rendering, exact when the denominator divides a power of ten and
/// truncated to 6 places otherwise.
pub fn format_rational(v: &BigRational) -> String {
    let neg = v.is_negative();
    let a = v.abs();
    let int = a.to_integer();
    let mut frac = &a - BigRational::from_integer(int.clone());
    let mut digits = String::new();
    let ten = BigInt::from(10);
    let mut d = a.denom().clone();
    for p in [2, 5] {
        let p = BigInt::from(p);
        while (&d % &p).is_zero() {
            d /= &p;
        }
    }
    let cap = if d == BigInt::from(1) { usize::MAX } else { 6 };
    while !frac.is_zero() && digits.len() < cap {
        frac *= BigRational::from_integer(ten.clone());
        let d = frac.to_integer();
        digits.push_str(&d.to_string());
        frac -= BigRational::from_integer(d);
    }
    let sign = if neg { "-" } else { "" };
    if digits.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{digits}")
    }
}

impl MachineDescriptor {
    pub fn default_machine() -> Self {
        DEFAULT_MACHINE.parse().expect("shipped machine file is valid")
    }

    /// Checks the ordering and positivity invariants.
    pub fn validate(&self) -> Result<(), MachineError> {
        if self.levels.is_empty() {
            return Err(MachineError::EmptyMachine);
        }
        if self.element_bytes == 0 {
            return Err(MachineError::Invalid("element_bytes must be positive".into()));
        }
        for w in self.levels.windows(2) {
            if w[1].size_bytes <= w[0].size_bytes {
                return Err(MachineError::Invalid(format!(
                    "level {} must be larger than {}",
                    w[1].name, w[0].name
                )));
            }
        }
        let positive = |v: &BigRational| v.is_positive();
        for l in &self.levels {
            if !positive(&l.latency) || !positive(&l.bandwidth) {
                return Err(MachineError::Invalid(format!("level {} needs positive latency and bandwidth", l.name)));
            }
        }
        if !positive(&self.mem_latency) || !positive(&self.mem_bandwidth) {
            return Err(MachineError::Invalid("memory needs positive latency and bandwidth".into()));
        }
        Ok(())
    }
}

impl FromStr for MachineDescriptor {
    type Err = MachineError;

    /// ```text
    /// level L1 size 32768 latency 4 bandwidth 128
    /// mem latency 200 bandwidth 16
    /// element_bytes 4
    /// ```
    fn from_str(text: &str) -> Result<Self, MachineError> {
        let mut levels = Vec::new();
        let mut mem = None;
        let mut element_bytes = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let code = raw.split('#').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let words: Vec<&str> = code.split_whitespace().collect();
            let bad = |message: String| MachineError::Malformed { line, message };
            let field = |key: &str, at: usize| -> Result<&str, MachineError> {
                match (words.get(at), words.get(at + 1)) {
                    (Some(k), Some(v)) if *k == key => Ok(v),
                    _ => Err(bad(format!("expected `{key} <value>`"))),
                }
            };
            let rational = |key: &str, at: usize| -> Result<BigRational, MachineError> {
                let v = field(key, at)?;
                parse_decimal(v).ok_or_else(|| bad(format!("`{v}` is not a decimal number")))
            };
            let integer = |key: &str, at: usize| -> Result<u64, MachineError> {
                let v = field(key, at)?;
                v.parse().map_err(|_| bad(format!("`{v}` is not a non-negative integer")))
            };
            match words[0] {
                "level" if words.len() == 8 => levels.push(CacheLevel {
                    name: words[1].to_string(),
                    size_bytes: integer("size", 2)?,
                    latency: rational("latency", 4)?,
                    bandwidth: rational("bandwidth", 6)?,
                }),
                "mem" if words.len() == 5 => mem = Some((rational("latency", 1)?, rational("bandwidth", 3)?)),
                "element_bytes" if words.len() == 2 => element_bytes = Some(integer("element_bytes", 0)?),
                "level" | "mem" | "element_bytes" => return Err(bad(format!("wrong number of fields for `{}`", words[0]))),
                other => return Err(bad(format!("unknown entry `{other}`"))),
            }
        }
        let (mem_latency, mem_bandwidth) = mem.ok_or_else(|| MachineError::Invalid("missing `mem` line".into()))?;
        let element_bytes = element_bytes.ok_or_else(|| MachineError::Invalid("missing `element_bytes` line".into()))?;
        let m = MachineDescriptor { levels, mem_latency, mem_bandwidth, element_bytes };
        m.validate()?;
        Ok(m)
    }
}

impl fmt::Display for MachineDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.levels {
            writeln!(
                f,
                "level {} size {} latency {} bandwidth {}",
                l.name,
                l.size_bytes,
                format_rational(&l.latency),
                format_rational(&l.bandwidth)
            )?;
        }
        writeln!(f, "mem latency {} bandwidth {}", format_rational(&self.mem_latency), format_rational(&self.mem_bandwidth))?;
        writeln!(f, "element_bytes {}", self.element_bytes)
    }
}

/// Where a working set was placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Level(usize),
    Memory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheFitResult {
    /// Elements assigned to each cache level.
    pub per_level_ws: Vec<u64>,
    pub mem_ws: u64,
    /// Placement of each input size, by input position.
    pub placement: Vec<Placement>,
}

impl CacheFitResult {
    pub fn total(&self) -> u64 {
        self.per_level_ws.iter().sum::<u64>() + self.mem_ws
    }
}

/// Visits sizes smallest first (ties by input position) and puts each one in
/// the innermost level that still has room for it; the rest go to memory.
pub fn assign_to_caches(ws_all: &[u64], m: &MachineDescriptor) -> Result<CacheFitResult, MachineError> {
    if m.levels.is_empty() {
        return Err(MachineError::EmptyMachine);
    }
    let mut order: Vec<usize> = (0..ws_all.len()).collect();
    order.sort_by_key(|&i| (ws_all[i], i));
    let mut per_level_ws = vec![0u64; m.levels.len()];
    let mut mem_ws = 0u64;
    let mut placement = vec![Placement::Memory; ws_all.len()];
    for i in order {
        let ws = ws_all[i];
        let level = m.levels.iter().enumerate().position(|(li, l)| {
            let bytes = (ws as u128 + per_level_ws[li] as u128) * m.element_bytes as u128;
            bytes <= l.size_bytes as u128
        });
        match level {
            Some(li) => {
                per_level_ws[li] += ws;
                placement[i] = Placement::Level(li);
            }
            None => mem_ws += ws,
        }
    }
    Ok(CacheFitResult { per_level_ws, mem_ws, placement })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_machine_round_trips() {
        let m = MachineDescriptor::default_machine();
        assert_eq!(m.levels.iter().map(|l| l.size_bytes).collect::<Vec<_>>(), vec![32768, 1048576, 40894464]);
        assert_eq!(m.element_bytes, 4);
        let again: MachineDescriptor = m.to_string().parse().unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn hand_executed_greedy_example() {
        let m = MachineDescriptor::default_machine();
        let fit = assign_to_caches(&[11_000_000, 300_000, 5000, 4000], &m).unwrap();
        assert_eq!(fit.per_level_ws, vec![4000, 5000, 300_000]);
        assert_eq!(fit.mem_ws, 11_000_000);
        assert_eq!(
            fit.placement,
            vec![Placement::Memory, Placement::Level(2), Placement::Level(1), Placement::Level(0)]
        );
    }

    #[test]
    fn small_and_huge_sets() {
        let m = MachineDescriptor::default_machine();
        assert_eq!(assign_to_caches(&[1000], &m).unwrap().per_level_ws, vec![1000, 0, 0]);
        assert_eq!(assign_to_caches(&[20_000_000], &m).unwrap().mem_ws, 20_000_000);
        assert_eq!(assign_to_caches(&[], &m).unwrap().total(), 0);
    }

    #[test]
    fn malformed_machine_files() {
        let e = "level L1 size 10 latency x bandwidth 1\nmem latency 1 bandwidth 1\nelement_bytes 4\n"
            .parse::<MachineDescriptor>()
            .unwrap_err();
        assert!(matches!(e, MachineError::Malformed { line: 1, .. }));
        let e = "mem latency 1 bandwidth 1\nelement_bytes 4\n".parse::<MachineDescriptor>().unwrap_err();
        assert_eq!(e, MachineError::EmptyMachine);
        let e = "level L1 size 10 latency 1 bandwidth 1\nlevel L2 size 10 latency 1 bandwidth 1\nmem latency 1 bandwidth 1\nelement_bytes 4\n"
            .parse::<MachineDescriptor>()
            .unwrap_err();
        assert!(matches!(e, MachineError::Invalid(_)));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_decimal("0.25"), Some(BigRational::new(1.into(), 4.into())));
        assert_eq!(parse_decimal("-3"), Some(BigRational::from_integer((-3).into())));
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(format_rational(&BigRational::new(1093_75.into(), 100.into())), "1093.75");
        assert_eq!(format_rational(&BigRational::new(1.into(), 3.into())), "0.333333");
    }
}
