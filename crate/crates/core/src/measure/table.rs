use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use crate::error::{Error, Result};

/// A finite probability distribution with its log partition function.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTable<S> {
    pub support: Vec<S>,
    pub probs: Vec<f64>,
    /// Log of the normalizing constant the weights were divided by.
    pub log_z: f64,
}

impl<S: Clone + Eq + Hash> DistributionTable<S> {
    /// Normalizes log-weights; `−∞` entries stay in the support with mass 0.
    pub fn from_log_weights(support: Vec<S>, log_w: &[f64]) -> Result<Self> {
        if support.len() != log_w.len() {
            return Err(Error::SizeMismatch {
                expected: support.len(),
                got: log_w.len(),
            });
        }
        let log_z = log_sum_exp(log_w);
        if log_z == f64::NEG_INFINITY {
            return Err(Error::EmptySupport("every state has weight zero".into()));
        }
        let probs = log_w.iter().map(|&w| (w - log_z).exp()).collect();
        Ok(Self {
            support,
            probs,
            log_z,
        })
    }

    /// A point mass.
    pub fn point(state: S) -> Self {
        Self {
            support: vec![state],
            probs: vec![1.0],
            log_z: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob_of(&self, state: &S) -> f64 {
        self.support
            .iter()
            .position(|s| s == state)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn index(&self) -> HashMap<S, usize> {
        self.support
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    }

    /// Probability of an event.
    pub fn mass(&self, mut event: impl FnMut(&S) -> bool) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| event(s))
            .map(|(_, p)| p)
            .sum()
    }

    /// Law of `f(X)`.
    pub fn pushforward<T: Clone + Eq + Hash + Ord>(&self, mut f: impl FnMut(&S) -> T) -> DistributionTable<T> {
        let mut acc: HashMap<T, f64> = HashMap::new();
        for (s, &p) in self.support.iter().zip(&self.probs) {
            *acc.entry(f(s)).or_insert(0.0) += p;
        }
        let mut pairs: Vec<(T, f64)> = acc.into_iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (support, probs) = pairs.into_iter().unzip();
        DistributionTable {
            support,
            probs,
            log_z: self.log_z,
        }
    }

    /// Whether probabilities are nonnegative, sum to 1 within `1e−12` and the
    /// support has no repeats.
    pub fn is_valid(&self) -> bool {
        let sum: f64 = self.probs.iter().sum();
        self.probs.iter().all(|&p| p >= 0.0)
            && (sum - 1.0).abs() <= 1e-12
            && self.index().len() == self.support.len()
    }

    /// Writes `label,probability` rows.
    pub fn write_csv<W: Write>(&self, mut out: W, mut label: impl FnMut(&S) -> String) -> Result<()> {
        writeln!(out, "state,probability")?;
        for (s, p) in self.support.iter().zip(&self.probs) {
            writeln!(out, "{},{:.17e}", label(s), p)?;
        }
        Ok(())
    }
}

/// Half the L1 distance; states missing from one side read as mass 0.
pub fn tv_distance<S: Clone + Eq + Hash>(a: &DistributionTable<S>, b: &DistributionTable<S>) -> f64 {
    let mut diff: HashMap<&S, f64> = HashMap::with_capacity(a.len() + b.len());
    for (s, &p) in a.support.iter().zip(&a.probs) {
        *diff.entry(s).or_insert(0.0) += p;
    }
    for (s, &p) in b.support.iter().zip(&b.probs) {
        *diff.entry(s).or_insert(0.0) -= p;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

/// Half the L1 distance between two aligned probability vectors.
pub fn tv_aligned(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `ln Σ exp(x_i)`, returning `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let a = DistributionTable::from_log_weights(vec![1, 2], &[0.6f64.ln(), 0.4f64.ln()]).unwrap();
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert_eq!(tv_distance(&DistributionTable::point(1), &DistributionTable::point(2)), 1.0);
        assert!((tv_distance(&DistributionTable::point(2), &a) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn log_helpers() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_add(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_kept_with_zero_mass() {
        let t = DistributionTable::from_log_weights(vec!['a', 'b'], &[0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(t.probs, vec![1.0, 0.0]);
        assert!(t.is_valid());
        assert!(DistributionTable::from_log_weights(vec!['a'], &[f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn pushforward_merges() {
        let t = DistributionTable::from_log_weights(vec![1, 2, 3], &[0.0, 0.0, 0.0]).unwrap();
        let parity = t.pushforward(|x| x % 2);
        assert_eq!(parity.support, vec![0, 1]);
        assert!((parity.probs[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_export() {
        let t = DistributionTable::point(7u32);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, |s| s.to_string()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("state,probability\n7,1."));
    }
}
