use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when certifying `p_ij / p_ji >= 1 + ε`.
///
/// Ratios such as `0.6 / 0.4` are not exact in binary floating point, so a
/// matrix built for ε = 0.5 would otherwise fail its own certificate.
const BIAS_TOLERANCE: f64 = 1e-12;

/// Pairwise ordering probabilities `p_ij` for `i < j`, with `p_ji = 1 − p_ij`.
///
/// Only the strict upper triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasMatrix {
    n: usize,
    upper: Vec<f64>,
    epsilon: f64,
}

impl BiasMatrix {
    /// Builds a matrix from the upper triangle, row by row:
    /// `(p_12, p_13, ..., p_1n, p_23, ...)`.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: upper.len(),
            });
        }
        if let Some(bad) = upper.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        let epsilon = upper
            .iter()
            .map(|&p| if p >= 1.0 { f64::INFINITY } else { p / (1.0 - p) - 1.0 })
            .fold(f64::INFINITY, f64::min);
        Ok(Self { n, upper, epsilon })
    }

    /// Builds a matrix from a function `(i, j) -> p_ij` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 1..=n {
            for j in i + 1..=n {
                upper.push(f(i, j));
            }
        }
        Self::from_upper(n, upper)
    }

    /// `p_ij = q` for every `i < j`.
    pub fn constant(n: usize, q: f64) -> Result<Self> {
        Self::from_fn(n, |_, _| q)
    }

    /// The constant instance whose bias ratio is exactly `1 + ε`.
    pub fn constant_eps(n: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} < 0")));
        }
        Self::constant(n, q_for_epsilon(epsilon))
    }

    /// `p_ij = 1` for every `i < j`; the chain sorts deterministically.
    pub fn totally_asymmetric(n: usize) -> Self {
        Self::constant(n, 1.0).expect("valid constant")
    }

    /// Each `p_ij` drawn independently and uniformly from `[(1+ε)/(2+ε), 1]`.
    pub fn random_eps<R: Rng + ?Sized>(n: usize, epsilon: f64, rng: &mut R) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} < 0")));
        }
        let lo = q_for_epsilon(epsilon);
        Self::from_fn(n, |_, _| lo + (1.0 - lo) * rng.random::<f64>())
    }

    /// A random ε-biased instance that is also monotone:
    /// `p_ij <= p_i,j+1` and `p_ij >= p_i+1,j`.
    pub fn monotone_eps<R: Rng + ?Sized>(n: usize, epsilon: f64, rng: &mut R) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} < 0")));
        }
        let lo = q_for_epsilon(epsilon);
        // dense[i][j] for 1-based i < j; filled bottom row first so that both
        // neighbours constraining p_ij are already known.
        let mut dense = vec![vec![0.0f64; n + 2]; n + 2];
        for i in (1..=n).rev() {
            for j in i + 1..=n {
                let draw = lo + (1.0 - lo) * rng.random::<f64>();
                let left = if j > i + 1 { dense[i][j - 1] } else { lo };
                let below = if i + 1 < j { dense[i + 1][j] } else { lo };
                dense[i][j] = draw.max(left).max(below);
            }
        }
        Self::from_fn(n, |i, j| dense[i][j])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(1 <= i && i < j && j <= self.n);
        // rows 1..i-1 hold (n-1) + (n-2) + ... entries
        (i - 1) * (2 * self.n - i) / 2 + (j - i - 1)
    }

    /// Probability that particle `i` ends ahead of particle `j` when they are
    /// ordered; `p(i, j) + p(j, i) = 1`. The diagonal reads as 0.5.
    #[inline]
    pub fn p(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.upper[self.index(i, j)]
        } else if i > j {
            1.0 - self.upper[self.index(j, i)]
        } else {
            0.5
        }
    }

    /// The upper triangle in row order.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Largest ε with `p_ij / p_ji >= 1 + ε` for all `i < j`; `+∞` when every
    /// pair is totally asymmetric (and for `n < 2`). Negative values mean the
    /// instance is not positively biased.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Whether the instance is ε-positively biased for the requested ε.
    pub fn satisfies_bias(&self, epsilon: f64) -> bool {
        self.epsilon.is_infinite() || self.epsilon >= epsilon - BIAS_TOLERANCE * (1.0 + epsilon.abs())
    }

    /// Whether `p_ij <= p_i,j+1` and `p_ij >= p_i+1,j` for all valid triples.
    pub fn is_monotone(&self) -> bool {
        for i in 1..=self.n {
            for j in i + 1..=self.n {
                if j < self.n && self.p(i, j) > self.p(i, j + 1) {
                    return false;
                }
                if i + 1 < j && self.p(i, j) < self.p(i + 1, j) {
                    return false;
                }
            }
        }
        true
    }

    /// Dense table of `ln p(i, j)` indexed by `(i - 1) * n + (j - 1)`; the
    /// diagonal is 0.
    pub fn log_table(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                if i != j {
                    out[(i - 1) * n + (j - 1)] = self.p(i, j).ln();
                }
            }
        }
        out
    }

    /// The matrix `q_kk' = p_{r(k), r(k')}` for an increasing map `r`
    /// given as `map[k - 1] = r(k)`.
    pub fn relabeled(&self, map: &[usize]) -> Result<Self> {
        if map.windows(2).any(|w| w[0] >= w[1]) || map.iter().any(|&x| x == 0 || x > self.n) {
            return Err(Error::Contract(
                "relabeling map must be increasing into [n]".into(),
            ));
        }
        Self::from_fn(map.len(), |a, b| self.p(map[a - 1], map[b - 1]))
    }

    /// The closest `q` with `q / (1 − q) <= 1 + ε` for every pair, i.e. the
    /// strongest constant ASEP bias this instance dominates.
    pub fn asep_q(&self) -> f64 {
        if self.epsilon.is_infinite() {
            1.0
        } else {
            q_for_epsilon(self.epsilon.max(0.0))
        }
    }

    pub fn to_file(&self) -> BiasFile {
        let mut entries = Vec::with_capacity(self.upper.len());
        for i in 1..=self.n {
            for j in i + 1..=self.n {
                entries.push((i, j, self.p(i, j)));
            }
        }
        BiasFile {
            schema: BIAS_SCHEMA,
            n: self.n,
            epsilon: self.epsilon.is_finite().then_some(self.epsilon),
            monotone: self.is_monotone(),
            entries,
        }
    }

    /// Parses and validates a file; the certified ε (if present) must match
    /// the recomputed value.
    pub fn from_file(file: &BiasFile) -> Result<Self> {
        if file.schema != BIAS_SCHEMA {
            return Err(Error::InvalidParameter(format!(
                "unsupported bias schema {}",
                file.schema
            )));
        }
        let n = file.n;
        let mut upper = vec![f64::NAN; n * n.saturating_sub(1) / 2];
        let probe = Self {
            n,
            upper: Vec::new(),
            epsilon: 0.0,
        };
        for &(i, j, p) in &file.entries {
            if i == 0 || j > n || i >= j {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) is not an upper-triangle pair of [{n}]"
                )));
            }
            let slot = &mut upper[probe.index(i, j)];
            if !slot.is_nan() {
                return Err(Error::InvalidParameter(format!("entry ({i}, {j}) repeated")));
            }
            *slot = p;
        }
        if upper.iter().any(|p| p.is_nan()) {
            return Err(Error::InvalidParameter("missing bias entries".into()));
        }
        let out = Self::from_upper(n, upper)?;
        let certified = file.epsilon.unwrap_or(f64::INFINITY);
        if certified != out.epsilon {
            return Err(Error::InvalidParameter(format!(
                "certified epsilon {certified} does not match computed {}",
                out.epsilon
            )));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

pub const BIAS_SCHEMA: u32 = 1;

/// Serialized form of a [`BiasMatrix`].
///
/// `epsilon` is `null` for `+∞`; entries are `(i, j, p_ij)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasFile {
    pub schema: u32,
    pub n: usize,
    pub epsilon: Option<f64>,
    pub monotone: bool,
    pub entries: Vec<(usize, usize, f64)>,
}

/// `q = (1 + ε) / (2 + ε)`, so that `q / (1 − q) = 1 + ε`.
pub fn q_for_epsilon(epsilon: f64) -> f64 {
    if epsilon.is_infinite() {
        1.0
    } else {
        (1.0 + epsilon) / (2.0 + epsilon)
    }
}

/// `ε = q / (1 − q) − 1`.
pub fn epsilon_for_q(q: f64) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q / (1.0 - q) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn antisymmetry_by_construction() {
        let m = BiasMatrix::constant(4, 0.7).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                if i != j {
                    assert_eq!(m.p(i, j) + m.p(j, i), 1.0);
                }
            }
        }
    }

    #[test]
    fn epsilon_of_constant_and_asymmetric() {
        let m = BiasMatrix::constant_eps(5, 0.5).unwrap();
        assert!((m.p(1, 2) - 0.6).abs() < 1e-15);
        assert!(m.satisfies_bias(0.5));
        assert!(!m.satisfies_bias(0.51));
        assert_eq!(BiasMatrix::totally_asymmetric(4).epsilon(), f64::INFINITY);
        assert!(BiasMatrix::constant(3, 0.4).unwrap().epsilon() < 0.0);
    }

    #[test]
    fn index_layout_matches_from_fn() {
        let m = BiasMatrix::from_fn(6, |i, j| 0.5 + (i * 10 + j) as f64 / 1000.0).unwrap();
        for i in 1..=6 {
            for j in i + 1..=6 {
                assert_eq!(m.p(i, j), 0.5 + (i * 10 + j) as f64 / 1000.0);
            }
        }
    }

    #[test]
    fn generators_certify_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &eps in &[0.2, 0.5, 1.0] {
            let r = BiasMatrix::random_eps(8, eps, &mut rng).unwrap();
            assert!(r.satisfies_bias(eps));
            let m = BiasMatrix::monotone_eps(8, eps, &mut rng).unwrap();
            assert!(m.satisfies_bias(eps));
            assert!(m.is_monotone());
        }
        assert!(BiasMatrix::random_eps(3, -0.1, &mut rng).is_err());
    }

    #[test]
    fn json_round_trip_preserves_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = BiasMatrix::random_eps(6, 0.5, &mut rng).unwrap();
        let back = BiasMatrix::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.epsilon(), m.epsilon());
        let t = BiasMatrix::totally_asymmetric(3);
        let text = t.to_json().unwrap();
        assert!(text.contains("\"epsilon\": null"));
        assert_eq!(BiasMatrix::from_json(&text).unwrap(), t);
    }

    #[test]
    fn tampered_certificate_rejected() {
        let m = BiasMatrix::constant(3, 0.6).unwrap();
        let mut file = m.to_file();
        file.epsilon = Some(0.9);
        assert!(BiasMatrix::from_file(&file).is_err());
        file.epsilon = m.to_file().epsilon;
        file.entries.pop();
        assert!(BiasMatrix::from_file(&file).is_err());
    }

    #[test]
    fn relabeled_reads_through_map() {
        let m = BiasMatrix::from_fn(5, |i, j| 0.5 + (i + j) as f64 / 100.0).unwrap();
        let r = m.relabeled(&[2, 4, 5]).unwrap();
        assert_eq!(r.p(1, 2), m.p(2, 4));
        assert_eq!(r.p(3, 1), m.p(5, 2));
        assert!(m.relabeled(&[3, 2]).is_err());
    }
}
