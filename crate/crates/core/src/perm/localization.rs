use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-particle displacement bounds `(ℓ_k⁻, ℓ_k⁺)`.
///
/// Particle `k` may occupy positions `[k − ℓ_k⁻, k + ℓ_k⁺] ∩ [1, n]`. Bounds
/// are stored already truncated to that intersection (`ℓ_k⁻ <= k − 1`,
/// `ℓ_k⁺ <= n − k`), so an unbounded entry reads as its truncated value and
/// the unrestricted chain is the vector of full windows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LocalizationFile", into = "LocalizationFile")]
pub struct LocalizationVector {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl LocalizationVector {
    /// Builds a vector from optional bounds, `None` meaning unbounded.
    pub fn new(lo: &[Option<usize>], hi: &[Option<usize>]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::SizeMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let n = lo.len();
        let lo = lo
            .iter()
            .enumerate()
            .map(|(idx, b)| b.map_or(idx, |b| b.min(idx)))
            .collect();
        let hi = hi
            .iter()
            .enumerate()
            .map(|(idx, b)| b.map_or(n - 1 - idx, |b| b.min(n - 1 - idx)))
            .collect();
        Ok(Self { lo, hi })
    }

    /// `ℓ_k⁻ = ℓ_k⁺ = ell` for every particle.
    pub fn constant(n: usize, ell: usize) -> Self {
        Self::new(&vec![Some(ell); n], &vec![Some(ell); n]).expect("equal lengths")
    }

    /// No restriction at all.
    pub fn unbounded(n: usize) -> Self {
        Self::new(&vec![None; n], &vec![None; n]).expect("equal lengths")
    }

    /// A random admissible vector with every bound at most `max_bound`.
    ///
    /// Left window edges are drawn nondecreasing from the left and right edges
    /// nonincreasing from the right, which is exactly admissibility.
    pub fn random_admissible<R: Rng + ?Sized>(n: usize, max_bound: usize, rng: &mut R) -> Self {
        let mut left = vec![1usize; n + 1];
        for k in 1..=n {
            let cand = k.saturating_sub(rng.random_range(0..=max_bound)).max(1);
            left[k] = if k == 1 { 1 } else { cand.max(left[k - 1]) };
        }
        let mut right = vec![n; n + 2];
        for k in (1..=n).rev() {
            let cand = (k + rng.random_range(0..=max_bound)).min(n);
            right[k] = if k == n { n } else { cand.min(right[k + 1]) };
        }
        Self {
            lo: (1..=n).map(|k| k - left[k]).collect(),
            hi: (1..=n).map(|k| right[k] - k).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    /// Truncated `ℓ_k⁻`.
    #[inline]
    pub fn lo(&self, k: usize) -> usize {
        self.lo[k - 1]
    }

    /// Truncated `ℓ_k⁺`.
    #[inline]
    pub fn hi(&self, k: usize) -> usize {
        self.hi[k - 1]
    }

    /// Leftmost allowed position of particle `k`.
    #[inline]
    pub fn left(&self, k: usize) -> usize {
        k - self.lo[k - 1]
    }

    /// Rightmost allowed position of particle `k`.
    #[inline]
    pub fn right(&self, k: usize) -> usize {
        k + self.hi[k - 1]
    }

    /// Whether particle `k` may sit at position `pos`.
    #[inline]
    pub fn allows(&self, k: usize, pos: usize) -> bool {
        self.left(k) <= pos && pos <= self.right(k)
    }

    /// Whether the vector places no restriction on any particle.
    pub fn is_unbounded(&self) -> bool {
        let n = self.n();
        (1..=n).all(|k| self.left(k) == 1 && self.right(k) == n)
    }

    /// `j − ℓ_j⁻ <= k − ℓ_k⁻` and `j + ℓ_j⁺ <= k + ℓ_k⁺` for all `j < k`,
    /// evaluated on the truncated windows.
    pub fn is_admissible(&self) -> bool {
        let n = self.n();
        (1..n).all(|k| self.left(k) <= self.left(k + 1) && self.right(k) <= self.right(k + 1))
    }

    pub fn require_admissible(&self) -> Result<()> {
        let n = self.n();
        match (1..n).find(|&k| self.left(k) > self.left(k + 1) || self.right(k) > self.right(k + 1)) {
            Some(k) => Err(Error::Inadmissible(k)),
            None => Ok(()),
        }
    }

    pub fn lmax_minus(&self) -> usize {
        self.lo.iter().copied().max().unwrap_or(0)
    }

    pub fn lmax_plus(&self) -> usize {
        self.hi.iter().copied().max().unwrap_or(0)
    }

    pub fn lmax(&self) -> usize {
        self.lmax_minus().max(self.lmax_plus())
    }

    /// Width of the band used by the transfer-matrix engine.
    pub fn band_width(&self) -> usize {
        1 + self.lmax_minus() + self.lmax_plus()
    }

    pub(crate) fn from_truncated(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }
}

/// Serialized form: one `[ℓ⁻, ℓ⁺]` pair per particle, `null` for unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationFile {
    pub n: usize,
    pub windows: Vec<(Option<usize>, Option<usize>)>,
}

impl TryFrom<LocalizationFile> for LocalizationVector {
    type Error = Error;

    fn try_from(file: LocalizationFile) -> Result<Self> {
        if file.windows.len() != file.n {
            return Err(Error::SizeMismatch {
                expected: file.n,
                got: file.windows.len(),
            });
        }
        let (lo, hi): (Vec<_>, Vec<_>) = file.windows.into_iter().unzip();
        Self::new(&lo, &hi)
    }
}

impl From<LocalizationVector> for LocalizationFile {
    fn from(v: LocalizationVector) -> Self {
        let n = v.n();
        let windows = (1..=n)
            .map(|k| {
                let lo = (v.lo(k) < k - 1).then_some(v.lo(k));
                let hi = (v.hi(k) < n - k).then_some(v.hi(k));
                (lo, hi)
            })
            .collect();
        Self { n, windows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Permutation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn localized_examples() {
        let s = Permutation::from_one_line(vec![2, 1, 3, 4]).unwrap();
        assert!(Permutation::identity(4).is_localized(&LocalizationVector::constant(4, 0)));
        assert!(!s.is_localized(&LocalizationVector::constant(4, 0)));
        assert!(s.is_localized(&LocalizationVector::constant(4, 1)));
    }

    #[test]
    fn truncation_and_maxima() {
        let v = LocalizationVector::constant(5, 3);
        assert_eq!(v.lo(1), 0);
        assert_eq!(v.lo(5), 3);
        assert_eq!(v.hi(4), 1);
        assert_eq!(v.lmax(), 3);
        assert!(v.is_admissible());
        let u = LocalizationVector::unbounded(4);
        assert!(u.is_unbounded());
        assert_eq!(u.lmax_minus(), 3);
    }

    #[test]
    fn inadmissible_detected() {
        let v = LocalizationVector::new(
            &[Some(0), Some(1), Some(0)],
            &[Some(0), Some(0), Some(0)],
        )
        .unwrap();
        assert!(v.is_admissible());
        let w = LocalizationVector::new(
            &[Some(0), Some(0), Some(0)],
            &[Some(2), Some(0), Some(0)],
        )
        .unwrap();
        assert!(!w.is_admissible());
        assert!(matches!(w.require_admissible(), Err(Error::Inadmissible(1))));
    }

    #[test]
    fn random_vectors_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = LocalizationVector::random_admissible(7, 3, &mut rng);
            assert!(v.is_admissible());
            assert!(v.lmax() <= 3);
        }
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = LocalizationVector::random_admissible(6, 2, &mut rng);
        let text = serde_json::to_string(&v).unwrap();
        let back: LocalizationVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
        let u: LocalizationVector =
            serde_json::from_str(r#"{"n":2,"windows":[[null,null],[null,null]]}"#).unwrap();
        assert!(u.is_unbounded());
    }
}
