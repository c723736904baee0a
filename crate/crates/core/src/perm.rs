//! Permutations of `{0, .., M-1}` as index arrays.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn identity(m: usize) -> Self {
        Perm((0..m).collect())
    }

    /// `None` unless `images` is a bijection of `0..len`.
    pub fn from_images(images: Vec<usize>) -> Option<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Perm(images))
    }

    /// `r -> r + shift mod len` applied within consecutive blocks of length `block`.
    pub fn block_shift(len: usize, block: usize, shift: usize) -> Self {
        assert!(block > 0 && len % block == 0);
        Perm((0..len).map(|i| i - i % block + (i % block + shift) % block).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.len(), other.len());
        Perm(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Perm(inv)
    }

    /// Cycle lengths in order of first appearance.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.0[i];
                len += 1;
            }
            out.push(len);
        }
        out
    }

    pub fn n_cycles(&self) -> usize {
        self.cycle_lengths().len()
    }

    pub fn cycle_type(&self) -> CycleType {
        CycleType::new(self.cycle_lengths())
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Partition of `M`, parts sorted descending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleType(Vec<usize>);

impl CycleType {
    pub fn new(mut parts: Vec<usize>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        CycleType(parts)
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn n_cycles(&self) -> usize {
        self.0.len()
    }

    /// A permutation of this type: consecutive blocks, each a forward cycle.
    pub fn representative(&self) -> Perm {
        let mut images = Vec::with_capacity(self.order());
        let mut base = 0;
        for &p in &self.0 {
            images.extend((0..p).map(|i| base + (i + 1) % p));
            base += p;
        }
        Perm(images)
    }
}

impl fmt::Display for CycleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All partitions of `m`, in reverse lexicographic order starting from `(m)`.
pub fn partitions(m: usize) -> Vec<CycleType> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<CycleType>) {
        if rest == 0 {
            out.push(CycleType(cur.clone()));
            return;
        }
        for p in (1..=rest.min(max)).rev() {
            cur.push(p);
            rec(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, &mut Vec::new(), &mut out);
    out
}

/// All `m!` permutations in lexicographic order of their image arrays.
pub fn all_perms(m: usize) -> Vec<Perm> {
    let mut cur: Vec<usize> = (0..m).collect();
    let mut out = vec![Perm(cur.clone())];
    // standard next-permutation
    loop {
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(Perm(cur.clone()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        assert_eq!(all_perms(0).len(), 1);
        assert_eq!(all_perms(5).len(), 120);
        let p: Vec<usize> = (0..=7).map(|m| partitions(m).len()).collect();
        assert_eq!(p, vec![1, 1, 2, 3, 5, 7, 11, 15]);
    }

    #[test]
    fn cycle_types() {
        let p = Perm::from_images(vec![1, 0, 3, 4, 2]).unwrap();
        assert_eq!(p.cycle_type().parts(), &[3, 2]);
        assert_eq!(CycleType::new(vec![1, 3, 2]).representative().cycle_type().parts(), &[3, 2, 1]);
        assert!(Perm::from_images(vec![0, 0]).is_none());
        assert_eq!(Perm::block_shift(6, 3, 1).images(), &[1, 2, 0, 4, 5, 3]);
    }

    fn perm(m: usize) -> impl Strategy<Value = Perm> {
        Just((0..m).collect::<Vec<_>>()).prop_shuffle().prop_map(Perm)
    }

    proptest! {
        #[test]
        fn group_laws(a in perm(6), b in perm(6), c in perm(6)) {
            prop_assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
            prop_assert_eq!(a.compose(&a.inverse()), Perm::identity(6));
            prop_assert_eq!(a.cycle_type(), b.compose(&a).compose(&b.inverse()).cycle_type());
            prop_assert_eq!(a.cycle_type().order(), 6);
        }
    }
}
