use std::cmp::Ordering;

/// Sorted, deduplicated points stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PointSet {
    arity: usize,
    len: usize,
    data: Vec<i64>,
}

impl PointSet {
    /// `rows` counts the points in `data`; it only matters for arity 0,
    /// where every row is the empty tuple.
    pub fn from_flat(arity: usize, rows: usize, data: Vec<i64>) -> Self {
        if arity == 0 {
            return Self { arity, len: rows.min(1), data: Vec::new() };
        }
        debug_assert_eq!(data.len(), rows * arity);
        let mut sorted: Vec<&[i64]> = data.chunks_exact(arity).collect();
        sorted.sort_unstable();
        sorted.dedup();
        let len = sorted.len();
        let data = sorted.concat();
        Self { arity, len, data }
    }

    pub fn from_rows<I: IntoIterator<Item = Vec<i64>>>(arity: usize, rows: I) -> Self {
        let mut flat = Vec::new();
        let mut n = 0;
        for r in rows {
            assert_eq!(r.len(), arity);
            flat.extend(r);
            n += 1;
        }
        Self::from_flat(arity, n, flat)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &[i64]> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    pub fn first(&self) -> Option<&[i64]> {
        self.iter().next()
    }

    pub fn last(&self) -> Option<&[i64]> {
        self.iter().next_back()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.row(mid).cmp(p) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn filter(&self, mut keep: impl FnMut(&[i64]) -> bool) -> PointSet {
        let mut data = Vec::new();
        let mut len = 0;
        for r in self.iter() {
            if keep(r) {
                data.extend_from_slice(r);
                len += 1;
            }
        }
        PointSet { arity: self.arity, len, data }
    }

    pub fn merge(&self, other: &PointSet) -> PointSet {
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        PointSet::from_flat(self.arity, self.len + other.len, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_dedup_and_lookup() {
        let s = PointSet::from_rows(2, vec![vec![1, 2], vec![0, 5], vec![1, 2], vec![0, 1]]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.first(), Some(&[0, 1][..]));
        assert_eq!(s.last(), Some(&[1, 2][..]));
        assert!(s.contains(&[0, 5]));
        assert!(!s.contains(&[0, 4]));
    }
}
