use std::str::FromStr;

use itertools::Itertools;

use super::{Recipe, RejectReason, VariantError};

/// The variant space: loop orderings crossed with tile-size choices.
///
/// Text form, one entry per line (`#` comments):
///
/// ```text
/// permute ofm_tile ifm_tile oj kj ki   # every ordering of these loops
/// perm kj ki oj                        # one explicit ordering
/// tile oj - 2 4                        # `-` means untiled
/// max_variants 100
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariantConfig {
    /// Orderings of an innermost run of non-band loops. Empty means the
    /// original order only.
    pub permutations: Vec<Vec<String>>,
    /// Per loop, candidate tile sizes; `None` is untiled.
    pub tiling: Vec<(String, Vec<Option<i64>>)>,
    pub max_variants: Option<usize>,
}

impl VariantConfig {
    /// All orderings of `loops`, starting with the given order.
    pub fn all_orders<S: AsRef<str>>(loops: &[S]) -> Vec<Vec<String>> {
        let names: Vec<String> = loops.iter().map(|s| s.as_ref().to_string()).collect();
        let k = names.len();
        names.into_iter().permutations(k).collect()
    }

    /// The recipes, in enumeration order, capped at `max_variants`.
    pub fn recipes(&self) -> Vec<Recipe> {
        let perms: Vec<Option<Vec<String>>> = if self.permutations.is_empty() {
            vec![None]
        } else {
            self.permutations.iter().cloned().map(Some).collect()
        };
        let tile_choices: Vec<Vec<(String, Option<i64>)>> = self
            .tiling
            .iter()
            .map(|(v, sizes)| sizes.iter().map(|s| (v.clone(), *s)).collect())
            .collect();
        let combos: Vec<Vec<(String, i64)>> = if tile_choices.is_empty() {
            vec![Vec::new()]
        } else {
            tile_choices
                .into_iter()
                .multi_cartesian_product()
                .map(|c| c.into_iter().filter_map(|(v, s)| s.map(|s| (v, s))).collect())
                .collect()
        };
        let all = perms
            .iter()
            .cartesian_product(combos.iter())
            .map(|(p, t)| Recipe { perm: p.clone(), tiles: t.clone() });
        match self.max_variants {
            Some(cap) => all.take(cap).collect(),
            None => all.collect(),
        }
    }
}

impl FromStr for VariantConfig {
    type Err = VariantError;

    fn from_str(text: &str) -> Result<Self, VariantError> {
        let mut cfg = VariantConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let malformed = |m: String| VariantError::ConfigRejected(RejectReason::Malformed(format!("line {line}: {m}")));
            let code = raw.split('#').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let words: Vec<&str> = code.split_whitespace().collect();
            match words[0] {
                "permute" if words.len() > 1 => cfg.permutations.extend(Self::all_orders(&words[1..])),
                "perm" if words.len() > 1 => cfg.permutations.push(words[1..].iter().map(|s| s.to_string()).collect()),
                "tile" if words.len() > 2 => {
                    let mut sizes = Vec::new();
                    for w in &words[2..] {
                        sizes.push(match *w {
                            "-" => None,
                            s => Some(s.parse().map_err(|_| malformed(format!("tile size `{s}` is not an integer")))?),
                        });
                    }
                    cfg.tiling.push((words[1].to_string(), sizes));
                }
                "max_variants" if words.len() == 2 => {
                    cfg.max_variants =
                        Some(words[1].parse().map_err(|_| malformed(format!("`{}` is not a count", words[1])))?);
                }
                other => return Err(malformed(format!("cannot read `{other}` entry"))),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_enumeration() {
        let cfg: VariantConfig = "permute a b\ntile a - 2\n".parse().unwrap();
        let ids: Vec<String> = cfg.recipes().iter().map(|r| r.to_string()).collect();
        assert_eq!(ids, vec!["perm=a,b", "perm=a,b;tile=a:2", "perm=b,a", "perm=b,a;tile=a:2"]);
        let capped = VariantConfig { max_variants: Some(3), ..cfg };
        assert_eq!(capped.recipes().len(), 3);
    }

    #[test]
    fn empty_config_is_identity() {
        assert_eq!(VariantConfig::default().recipes(), vec![Recipe::identity()]);
    }

    #[test]
    fn bad_lines() {
        assert!("tile a x\n".parse::<VariantConfig>().is_err());
        assert!("skew a\n".parse::<VariantConfig>().is_err());
    }
}
