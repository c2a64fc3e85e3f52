use std::collections::BTreeMap;
use std::fmt;

/// `sum(coeff * var) + constant` over named loop variables. Parameters are
/// substituted away during parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AffineExpr {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

impl AffineExpr {
    pub fn constant(c: i64) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: impl Into<String>, coeff: i64) -> Self {
        let mut e = Self::constant(0);
        e.add_term(&name.into(), coeff);
        e
    }

    fn add_term(&mut self, name: &str, coeff: i64) {
        let c = self.terms.entry(name.to_string()).or_insert(0);
        *c += coeff;
        if *c == 0 {
            self.terms.remove(name);
        }
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn coeff(&self, var: &str) -> i64 {
        self.terms.get(var).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> {
        self.terms.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.terms.contains_key(var)
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.constant += other.constant;
        for (v, &c) in &other.terms {
            out.add_term(v, c);
        }
        out
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> AffineExpr {
        if k == 0 {
            return AffineExpr::constant(0);
        }
        AffineExpr {
            terms: self.terms.iter().map(|(v, &c)| (v.clone(), c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn offset(&self, k: i64) -> AffineExpr {
        let mut out = self.clone();
        out.constant += k;
        out
    }

    /// Replaces `var` by `with`.
    pub fn substitute(&self, var: &str, with: &AffineExpr) -> AffineExpr {
        match self.terms.get(var) {
            None => self.clone(),
            Some(&c) => {
                let mut rest = self.clone();
                rest.terms.remove(var);
                rest.add(&with.scale(c))
            }
        }
    }

    /// Value under `lookup`; panics on an unknown variable.
    pub fn eval(&self, lookup: impl Fn(&str) -> i64) -> i64 {
        self.terms.iter().fold(self.constant, |acc, (v, &c)| acc + c * lookup(v))
    }

    /// Coefficient vector against `dims`, plus the constant. Variables not in
    /// `dims` are reported as `Err(name)`.
    pub fn to_coeffs<'a>(&'a self, dims: &[String]) -> Result<(Vec<i64>, i64), &'a str> {
        let mut coeffs = vec![0; dims.len()];
        for (v, &c) in &self.terms {
            let d = dims.iter().position(|x| x == v).ok_or(v.as_str())?;
            coeffs[d] = c;
        }
        Ok((coeffs, self.constant))
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, &c) in &self.terms {
            let mag = c.abs();
            let sign = if c < 0 { "-" } else { "+" };
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag} * {v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_and_display() {
        // oj * 2 + kj, with oj = 2 * oj_t + oj_p
        let e = AffineExpr::term("oj", 2).add(&AffineExpr::var("kj"));
        let tiled = AffineExpr::term("oj_t", 2).add(&AffineExpr::var("oj_p"));
        let s = e.substitute("oj", &tiled);
        assert_eq!(s.to_string(), "kj + 2 * oj_p + 4 * oj_t");
        assert_eq!(AffineExpr::var("i").offset(-1).to_string(), "i - 1");
        assert_eq!(AffineExpr::var("i").sub(&AffineExpr::var("i")).to_string(), "0");
        assert_eq!(AffineExpr::term("i", -1).to_string(), "-i");
    }

    #[test]
    fn coefficient_vectors() {
        let dims = vec!["i".to_string(), "j".to_string()];
        let e = AffineExpr::var("j").scale(3).offset(1);
        assert_eq!(e.to_coeffs(&dims), Ok((vec![0, 3], 1)));
        assert_eq!(AffineExpr::var("q").to_coeffs(&dims), Err("q"));
    }
}
