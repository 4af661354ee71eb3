//! Unordered node pairs (i,j) with 1-based ids and i < j.
//!
//! Pairs are ordered lexicographically: (1,2), (1,3), ..., (1,n), (2,3), ...
//! and that order defines the flat index used by every per-pair vector in
//! this crate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    i: usize,
    j: usize,
}

impl Pair {
    /// Build a pair from 1-based node ids; requires 1 <= i < j.
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i == 0 || i >= j {
            return Err(Error::InvalidPair { i, j, n: 0 });
        }
        Ok(Pair { i, j })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Number of unordered pairs over n nodes: n(n-1)/2.
    pub fn count(n: usize) -> usize {
        n * (n - 1) / 2
    }

    /// Check that the pair addresses nodes of an n-node network.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.j > n {
            return Err(Error::InvalidPair {
                i: self.i,
                j: self.j,
                n,
            });
        }
        Ok(())
    }

    /// Lexicographic rank of this pair among all pairs over n nodes.
    pub fn index(&self, n: usize) -> usize {
        debug_assert!(self.j <= n);
        let i = self.i;
        let j = self.j;
        (i - 1) * n - i * (i - 1) / 2 + (j - i - 1)
    }

    /// Inverse of [`Pair::index`].
    pub fn from_index(mut index: usize, n: usize) -> Pair {
        debug_assert!(index < Self::count(n));
        let mut i = 1;
        while index >= n - i {
            index -= n - i;
            i += 1;
        }
        Pair { i, j: i + 1 + index }
    }

    /// All pairs over n nodes in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Pair> {
        (1..n).flat_map(move |i| (i + 1..=n).map(move |j| Pair { i, j }))
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_pairs() {
        assert!(Pair::new(0, 1).is_err());
        assert!(Pair::new(2, 2).is_err());
        assert!(Pair::new(3, 2).is_err());
        assert!(Pair::new(1, 4).unwrap().validate(3).is_err());
    }

    #[test]
    fn index_round_trip() {
        for n in 2..=9 {
            for (k, p) in Pair::all(n).enumerate() {
                assert_eq!(p.index(n), k);
                assert_eq!(Pair::from_index(k, n), p);
            }
            assert_eq!(Pair::all(n).count(), Pair::count(n));
        }
    }

    #[test]
    fn lexicographic_order() {
        let pairs: Vec<Pair> = Pair::all(3).collect();
        assert_eq!(
            pairs,
            vec![
                Pair::new(1, 2).unwrap(),
                Pair::new(1, 3).unwrap(),
                Pair::new(2, 3).unwrap()
            ]
        );
    }
}
