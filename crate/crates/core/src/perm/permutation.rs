use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LocalizationVector;
use crate::error::{Error, Result};

/// A permutation of `n` particles stored together with its inverse.
///
/// `forward[i - 1]` is the particle at position `i` and `inverse[k - 1]` is the
/// position of particle `k`; both are 1-based values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    /// The ground state `(1, 2, ..., n)`.
    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (1..=n).collect();
        Self {
            inverse: forward.clone(),
            forward,
        }
    }

    /// The fully inverted state `(n, n - 1, ..., 1)`.
    pub fn reversal(n: usize) -> Self {
        Self::from_one_line_unchecked((1..=n).rev().collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut forward: Vec<usize> = (1..=n).collect();
        forward.shuffle(rng);
        Self::from_one_line_unchecked(forward)
    }

    /// Builds a permutation from one-line notation `(σ(1), ..., σ(n))`.
    pub fn from_one_line(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![0usize; n];
        for (idx, &label) in forward.iter().enumerate() {
            if label == 0 || label > n {
                return Err(Error::OutOfRange {
                    index: label,
                    max: n,
                });
            }
            if inverse[label - 1] != 0 {
                return Err(Error::Contract(format!("label {label} repeated")));
            }
            inverse[label - 1] = idx + 1;
        }
        Ok(Self { forward, inverse })
    }

    pub(crate) fn from_one_line_unchecked(forward: Vec<usize>) -> Self {
        let mut inverse = vec![0usize; forward.len()];
        for (idx, &label) in forward.iter().enumerate() {
            inverse[label - 1] = idx + 1;
        }
        Self { forward, inverse }
    }

    pub fn n(&self) -> usize {
        self.forward.len()
    }

    /// The particle at position `i`.
    #[inline]
    pub fn at(&self, i: usize) -> usize {
        self.forward[i - 1]
    }

    /// The position of particle `k`.
    #[inline]
    pub fn position_of(&self, k: usize) -> usize {
        self.inverse[k - 1]
    }

    /// One-line notation, `one_line()[i - 1] = σ(i)`.
    pub fn one_line(&self) -> &[usize] {
        &self.forward
    }

    /// Positions of the particles, `positions()[k - 1] = σ⁻¹(k)`.
    pub fn positions(&self) -> &[usize] {
        &self.inverse
    }

    /// Swaps the particles at positions `i` and `i + 1` in place.
    pub fn swap_adjacent(&mut self, i: usize) -> Result<()> {
        let n = self.n();
        if i == 0 || i >= n {
            return Err(Error::OutOfRange {
                index: i,
                max: n.saturating_sub(1),
            });
        }
        self.swap_adjacent_unchecked(i);
        Ok(())
    }

    #[inline]
    pub(crate) fn swap_adjacent_unchecked(&mut self, i: usize) {
        let a = self.forward[i - 1];
        let b = self.forward[i];
        self.forward[i - 1] = b;
        self.forward[i] = a;
        self.inverse[a - 1] = i + 1;
        self.inverse[b - 1] = i;
        debug_assert_eq!(self.inverse[self.forward[i - 1] - 1], i);
        debug_assert_eq!(self.inverse[self.forward[i] - 1], i + 1);
    }

    /// Returns `σ ∘ (i, i + 1)`.
    pub fn apply_adjacent_transposition(&self, i: usize) -> Result<Self> {
        let mut out = self.clone();
        out.swap_adjacent(i)?;
        Ok(out)
    }

    /// Overwrites the particles on positions `start..start + labels.len()`.
    ///
    /// The caller must supply a rearrangement of the particles already there.
    pub(crate) fn overwrite_positions(&mut self, start: usize, labels: &[usize]) {
        for (off, &label) in labels.iter().enumerate() {
            let pos = start + off;
            self.forward[pos - 1] = label;
            self.inverse[label - 1] = pos;
        }
        debug_assert!(self.is_consistent());
    }

    /// Whether `forward` and `inverse` are mutually inverse bijections.
    pub fn is_consistent(&self) -> bool {
        let n = self.n();
        self.inverse.len() == n
            && self
                .forward
                .iter()
                .enumerate()
                .all(|(i, &k)| k >= 1 && k <= n && self.inverse[k - 1] == i + 1)
    }

    /// `max_k |σ⁻¹(k) − k|`.
    pub fn max_displacement(&self) -> usize {
        self.inverse
            .iter()
            .enumerate()
            .map(|(k, &pos)| pos.abs_diff(k + 1))
            .max()
            .unwrap_or(0)
    }

    /// Whether every particle lies inside its localization window.
    pub fn is_localized(&self, ell: &LocalizationVector) -> bool {
        ell.n() == self.n()
            && self
                .inverse
                .iter()
                .enumerate()
                .all(|(k, &pos)| ell.allows(k + 1, pos))
    }

    /// Whether `{σ(1), ..., σ(k)} = {1, ..., k}`.
    pub fn is_disconnecting(&self, k: usize) -> bool {
        k >= 1 && k <= self.n() && self.forward[..k].iter().max() == Some(&k)
    }

    /// Flags for every position `k = 1..=n`, computed with one running maximum.
    pub fn disconnecting_positions(&self) -> Vec<bool> {
        let mut running = 0;
        self.forward
            .iter()
            .enumerate()
            .map(|(idx, &label)| {
                running = running.max(label);
                running == idx + 1
            })
            .collect()
    }

    /// Number of inverted pairs.
    pub fn inversions(&self) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                if self.forward[i] > self.forward[j] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Lexicographic rank in `0..n!` (Lehmer code).
    pub fn rank(&self) -> u64 {
        let n = self.n();
        let mut rank = 0u64;
        for i in 0..n {
            let smaller = self.forward[i + 1..]
                .iter()
                .filter(|&&x| x < self.forward[i])
                .count() as u64;
            rank = rank * (n - i) as u64 + smaller;
        }
        rank
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::from_one_line(value)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(value: Permutation) -> Self {
        value.forward
    }
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.forward.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All permutations of `[n]` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut current: Vec<usize> = (1..=n).collect();
    let mut out = Vec::new();
    loop {
        out.push(Permutation::from_one_line_unchecked(current.clone()));
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}
