use serde::{Deserialize, Serialize};

use super::{BiasMatrix, LocalizationVector, Permutation};
use crate::error::{Error, Result};

/// Particles pinned to the outer positions `[1, i] ∪ [n − j + 1, n]`.
///
/// The pinned region is the complement of the interval `A = [i + 1, n − j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryAssignment {
    n: usize,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl BoundaryAssignment {
    /// `left[x - 1]` is the particle at position `x` and `right[x - 1]` the
    /// particle at position `n − j + x`.
    pub fn new(n: usize, left: Vec<usize>, right: Vec<usize>) -> Result<Self> {
        if left.len() + right.len() > n {
            return Err(Error::Contract(format!(
                "boundary of {} positions exceeds n = {n}",
                left.len() + right.len()
            )));
        }
        let mut seen = vec![false; n + 1];
        for &label in left.iter().chain(&right) {
            if label == 0 || label > n {
                return Err(Error::OutOfRange {
                    index: label,
                    max: n,
                });
            }
            if std::mem::replace(&mut seen[label], true) {
                return Err(Error::Contract(format!(
                    "boundary assigns particle {label} twice"
                )));
            }
        }
        Ok(Self { n, left, right })
    }

    /// No pinned positions.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    /// The boundary that `sigma` induces on its first `i` and last `j` positions.
    pub fn from_permutation(sigma: &Permutation, i: usize, j: usize) -> Result<Self> {
        let n = sigma.n();
        if i + j > n {
            return Err(Error::Contract(format!("i + j = {} exceeds n = {n}", i + j)));
        }
        let line = sigma.one_line();
        Ok(Self {
            n,
            left: line[..i].to_vec(),
            right: line[n - j..].to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of pinned positions on the left.
    pub fn i(&self) -> usize {
        self.left.len()
    }

    /// Number of pinned positions on the right.
    pub fn j(&self) -> usize {
        self.right.len()
    }

    /// Size of the free interval `A`.
    pub fn free_len(&self) -> usize {
        self.n - self.i() - self.j()
    }

    /// The free interval `A` as `(first, last)` positions; empty when
    /// `first > last`.
    pub fn free_interval(&self) -> (usize, usize) {
        (self.i() + 1, self.n - self.j())
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    /// The particle pinned at `pos`, if any.
    pub fn value_at(&self, pos: usize) -> Option<usize> {
        if pos >= 1 && pos <= self.i() {
            Some(self.left[pos - 1])
        } else if pos > self.n - self.j() && pos <= self.n {
            Some(self.right[pos - (self.n - self.j()) - 1])
        } else {
            None
        }
    }

    /// Pinned `(position, particle)` pairs in position order.
    pub fn pins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let offset = self.n - self.j();
        self.left
            .iter()
            .enumerate()
            .map(|(x, &k)| (x + 1, k))
            .chain(self.right.iter().enumerate().map(move |(x, &k)| (offset + x + 1, k)))
    }

    /// Whether every pinned particle sits inside its window.
    pub fn is_localized(&self, ell: &LocalizationVector) -> bool {
        ell.n() == self.n && self.pins().all(|(pos, k)| ell.allows(k, pos))
    }

    /// Whether `sigma` agrees with the boundary on the pinned positions.
    pub fn agrees_with(&self, sigma: &Permutation) -> bool {
        sigma.n() == self.n && self.pins().all(|(pos, k)| sigma.at(pos) == k)
    }

    /// The increasing bijection `r_b : [n − i − j] → [n] ∖ b(A^c)`, returned as
    /// `map[k - 1] = r_b(k)`.
    pub fn relabel_map(&self) -> Vec<usize> {
        let mut pinned = vec![false; self.n + 1];
        for (_, k) in self.pins() {
            pinned[k] = true;
        }
        (1..=self.n).filter(|&k| !pinned[k]).collect()
    }

    /// The localization vector and bias matrix that the free interval inherits.
    pub fn restrict_instance(
        &self,
        p: &BiasMatrix,
        ell: &LocalizationVector,
    ) -> Result<(LocalizationVector, BiasMatrix, Vec<usize>)> {
        let map = self.relabel_map();
        let ell2 = self.restrict_localization(ell, &map)?;
        let p2 = p.relabeled(&map)?;
        Ok((ell2, p2, map))
    }

    fn restrict_localization(
        &self,
        ell: &LocalizationVector,
        map: &[usize],
    ) -> Result<LocalizationVector> {
        if ell.n() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: ell.n(),
            });
        }
        let m = map.len();
        let i = self.i() as isize;
        let mut lo = Vec::with_capacity(m);
        let mut hi = Vec::with_capacity(m);
        for (idx, &r) in map.iter().enumerate() {
            let k = idx as isize + 1;
            let r = r as isize;
            let raw_lo = ell.lo(r as usize) as isize + k + i - r;
            let raw_hi = ell.hi(r as usize) as isize + r - k - i;
            if raw_lo < 0 || raw_hi < 0 {
                return Err(Error::EmptySupport(format!(
                    "no localized completion: particle {r} cannot reach the free interval"
                )));
            }
            lo.push((raw_lo as usize).min(idx));
            hi.push((raw_hi as usize).min(m - 1 - idx));
        }
        Ok(LocalizationVector::from_truncated(lo, hi))
    }

    /// Reads off `R_b σ` together with the inherited localization vector and
    /// the relabeling map.
    pub fn restrict(&self, sigma: &Permutation, ell: &LocalizationVector) -> Result<Restriction> {
        if !self.agrees_with(sigma) {
            return Err(Error::Contract(
                "permutation disagrees with the boundary assignment".into(),
            ));
        }
        let map = self.relabel_map();
        let ell2 = self.restrict_localization(ell, &map)?;
        let mut inv = vec![0usize; self.n + 1];
        for (idx, &r) in map.iter().enumerate() {
            inv[r] = idx + 1;
        }
        let (start, end) = self.free_interval();
        let line = (start..=end).map(|pos| inv[sigma.at(pos)]).collect();
        Ok(Restriction {
            sigma: Permutation::from_one_line_unchecked(line),
            ell: ell2,
            map,
        })
    }

    /// Rebuilds the full permutation from a permutation of the free interval.
    pub fn embed(&self, inner: &Permutation) -> Result<Permutation> {
        let map = self.relabel_map();
        if inner.n() != map.len() {
            return Err(Error::SizeMismatch {
                expected: map.len(),
                got: inner.n(),
            });
        }
        let mut line = self.left.clone();
        line.extend(inner.one_line().iter().map(|&x| map[x - 1]));
        line.extend_from_slice(&self.right);
        Ok(Permutation::from_one_line_unchecked(line))
    }
}

/// Result of [`BoundaryAssignment::restrict`].
#[derive(Clone, Debug, PartialEq)]
pub struct Restriction {
    pub sigma: Permutation,
    pub ell: LocalizationVector,
    /// `map[k - 1] = r_b(k)`; the restricted bias is `q_kk' = p_{r_b(k), r_b(k')}`.
    pub map: Vec<usize>,
}
