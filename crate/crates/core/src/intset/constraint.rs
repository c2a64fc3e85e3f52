use std::fmt;

/// `Eq` means `expr = 0`, `Ge` means `expr >= 0`, `Congruent(m)` means
/// `expr = 0 (mod m)` with `m >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Eq,
    Ge,
    Congruent(i64),
}

/// `sum(coeffs[d] * x[d]) + constant (kind)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineConstraint {
    pub coeffs: Vec<i64>,
    pub constant: i64,
    pub kind: ConstraintKind,
}

impl AffineConstraint {
    pub fn new(coeffs: impl Into<Vec<i64>>, constant: i64, kind: ConstraintKind) -> Self {
        let kind = match kind {
            ConstraintKind::Congruent(m) => {
                assert!(m >= 1, "congruence modulus must be positive");
                ConstraintKind::Congruent(m)
            }
            k => k,
        };
        Self { coeffs: coeffs.into(), constant, kind }
    }

    pub fn eq(coeffs: impl Into<Vec<i64>>, constant: i64) -> Self {
        Self::new(coeffs, constant, ConstraintKind::Eq)
    }

    pub fn ge(coeffs: impl Into<Vec<i64>>, constant: i64) -> Self {
        Self::new(coeffs, constant, ConstraintKind::Ge)
    }

    pub fn congruent(coeffs: impl Into<Vec<i64>>, constant: i64, modulus: i64) -> Self {
        Self::new(coeffs, constant, ConstraintKind::Congruent(modulus))
    }

    /// `lo <= x[dim] <= hi` as two inequalities.
    pub fn range(arity: usize, dim: usize, lo: i64, hi: i64) -> [Self; 2] {
        let mut up = vec![0; arity];
        up[dim] = 1;
        let mut down = vec![0; arity];
        down[dim] = -1;
        [Self::ge(up, -lo), Self::ge(down, hi)]
    }

    pub fn arity(&self) -> usize {
        self.coeffs.len()
    }

    pub(crate) fn eval(&self, point: &[i64]) -> i128 {
        self.coeffs
            .iter()
            .zip(point)
            .fold(self.constant as i128, |acc, (&a, &x)| acc + a as i128 * x as i128)
    }

    pub fn holds(&self, point: &[i64]) -> bool {
        let v = self.eval(point);
        match self.kind {
            ConstraintKind::Eq => v == 0,
            ConstraintKind::Ge => v >= 0,
            ConstraintKind::Congruent(m) => v.rem_euclid(m as i128) == 0,
        }
    }

    /// Constraints whose disjunction is the complement of `self`.
    pub(crate) fn negations(&self) -> Vec<AffineConstraint> {
        let neg: Vec<i64> = self.coeffs.iter().map(|a| -a).collect();
        match self.kind {
            ConstraintKind::Ge => vec![Self::ge(neg, -self.constant - 1)],
            ConstraintKind::Eq => vec![
                Self::ge(self.coeffs.clone(), self.constant - 1),
                Self::ge(neg, -self.constant - 1),
            ],
            ConstraintKind::Congruent(m) => (1..m)
                .map(|r| Self::congruent(self.coeffs.clone(), self.constant - r, m))
                .collect(),
        }
    }

    /// Re-indexes into a wider space: dimension `d` becomes `offset + d`.
    pub(crate) fn embed(&self, offset: usize, arity: usize) -> AffineConstraint {
        let mut coeffs = vec![0; arity];
        coeffs[offset..offset + self.coeffs.len()].copy_from_slice(&self.coeffs);
        AffineConstraint { coeffs, constant: self.constant, kind: self.kind }
    }

    /// Fixes the leading `prefix.len()` dimensions and returns the constraint
    /// over the remaining ones.
    pub(crate) fn fix_prefix(&self, prefix: &[i64]) -> AffineConstraint {
        let k = prefix.len();
        let shift: i128 = self.coeffs[..k]
            .iter()
            .zip(prefix)
            .map(|(&a, &x)| a as i128 * x as i128)
            .sum();
        AffineConstraint {
            coeffs: self.coeffs[k..].to_vec(),
            constant: i64::try_from(self.constant as i128 + shift).expect("constant overflow"),
            kind: self.kind,
        }
    }

    pub(crate) fn render(&self, names: &[String]) -> String {
        let mut lhs = String::new();
        let mut nonzero = self.coeffs.iter().enumerate().filter(|(_, &a)| a != 0).peekable();
        let single = self.coeffs.iter().filter(|&&a| a != 0).count() == 1;
        if single && self.kind != ConstraintKind::Eq {
            if let Some((d, &a)) = nonzero.peek() {
                if let ConstraintKind::Ge = self.kind {
                    if a == 1 {
                        return format!("{} >= {}", names[*d], -self.constant);
                    }
                    if a == -1 {
                        return format!("{} <= {}", names[*d], self.constant);
                    }
                }
            }
        }
        for (i, (d, &a)) in nonzero.enumerate() {
            let name = &names[d];
            match (i, a) {
                (0, 1) => lhs.push_str(name),
                (0, -1) => lhs.push_str(&format!("-{name}")),
                (0, a) => lhs.push_str(&format!("{a}{name}")),
                (_, 1) => lhs.push_str(&format!(" + {name}")),
                (_, -1) => lhs.push_str(&format!(" - {name}")),
                (_, a) if a < 0 => lhs.push_str(&format!(" - {}{name}", -a)),
                (_, a) => lhs.push_str(&format!(" + {a}{name}")),
            }
        }
        if lhs.is_empty() {
            lhs.push('0');
        }
        let rhs = -(self.constant as i128);
        match self.kind {
            ConstraintKind::Eq => format!("{lhs} = {rhs}"),
            ConstraintKind::Ge => format!("{lhs} >= {rhs}"),
            ConstraintKind::Congruent(m) => format!("{lhs} = {} mod {m}", rhs.rem_euclid(m as i128)),
        }
    }
}

impl fmt::Display for AffineConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.arity()).map(|d| format!("x{d}")).collect();
        f.write_str(&self.render(&names))
    }
}
