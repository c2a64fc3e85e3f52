use std::fmt;
use std::str::FromStr;

use super::{RejectReason, VariantError};

/// A transformation recipe such as `perm=ofm_tile,oj,ifm_tile,kj,ki;tile=oj:2`.
///
/// `perm` orders an innermost run of the non-band loops (loops outside the
/// run keep their place). `tile` strip-mines a loop into a tile loop, which
/// takes the loop's place, and a point loop just outside the band.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Recipe {
    pub perm: Option<Vec<String>>,
    pub tiles: Vec<(String, i64)>,
}

impl Recipe {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.is_none() && self.tiles.is_empty()
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("identity");
        }
        let mut parts = Vec::new();
        if let Some(p) = &self.perm {
            parts.push(format!("perm={}", p.join(",")));
        }
        if !self.tiles.is_empty() {
            let t: Vec<String> = self.tiles.iter().map(|(v, s)| format!("{v}:{s}")).collect();
            parts.push(format!("tile={}", t.join(",")));
        }
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for Recipe {
    type Err = VariantError;

    fn from_str(s: &str) -> Result<Self, VariantError> {
        let malformed = |m: String| VariantError::ConfigRejected(RejectReason::Malformed(m));
        let s = s.trim();
        let mut recipe = Recipe::default();
        if s.is_empty() || s == "identity" {
            return Ok(recipe);
        }
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| malformed(format!("`{part}` is not key=value")))?;
            let items: Vec<&str> = value.split(',').map(str::trim).collect();
            if items.iter().any(|i| i.is_empty()) {
                return Err(malformed(format!("empty item in `{part}`")));
            }
            match key.trim() {
                "perm" if recipe.perm.is_none() => recipe.perm = Some(items.iter().map(|v| v.to_string()).collect()),
                "tile" if recipe.tiles.is_empty() => {
                    for item in items {
                        let (v, size) =
                            item.split_once(':').ok_or_else(|| malformed(format!("tile `{item}` is not loop:size")))?;
                        let size: i64 =
                            size.trim().parse().map_err(|_| malformed(format!("tile size `{size}` is not an integer")))?;
                        recipe.tiles.push((v.trim().to_string(), size));
                    }
                }
                "perm" | "tile" => return Err(malformed(format!("`{key}` given twice"))),
                other => return Err(malformed(format!("unknown recipe key `{other}`"))),
            }
        }
        Ok(recipe)
    }
}
