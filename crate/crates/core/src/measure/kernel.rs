use std::collections::HashMap;
use std::hash::Hash;

use super::{enumerate_stationary, Caps, DistributionTable};
use crate::error::{Error, Result};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// Relative tolerance for detailed balance.
pub const REVERSIBILITY_TOLERANCE: f64 = 1e-10;

/// A finite Markov kernel with sparse rows.
#[derive(Clone, Debug)]
pub struct TransitionMatrix<S> {
    pub states: Vec<S>,
    /// `rows[x]` lists `(y, P(x, y))` with strictly increasing `y`.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Set once detailed balance has been verified against a stationary law.
    pub reversible: bool,
}

impl<S: Clone + Eq + Hash> TransitionMatrix<S> {
    /// Merges duplicate columns, sorts each row and checks row sums.
    pub fn from_rows(states: Vec<S>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if states.len() != rows.len() {
            return Err(Error::SizeMismatch {
                expected: states.len(),
                got: rows.len(),
            });
        }
        let m = states.len();
        let mut clean = Vec::with_capacity(m);
        for (x, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (y, p) in row {
                if y >= m {
                    return Err(Error::OutOfRange { index: y, max: m - 1 });
                }
                match merged.last_mut() {
                    Some(last) if last.0 == y => last.1 += p,
                    _ => merged.push((y, p)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            let sum: f64 = merged.iter().map(|e| e.1).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!("row {x} sums to {sum}")));
            }
            clean.push(merged);
        }
        Ok(Self {
            states,
            rows: clean,
            reversible: false,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x]
            .binary_search_by_key(&y, |e| e.0)
            .map_or(0.0, |i| self.rows[x][i].1)
    }

    pub fn index(&self) -> HashMap<S, usize> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    }

    /// Largest relative violation of `μ(x)P(x,y) = μ(y)P(y,x)` over all pairs.
    pub fn detailed_balance_error(&self, mu: &[f64]) -> Result<(f64, usize, usize)> {
        if mu.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: mu.len(),
            });
        }
        let mut worst = (0.0, 0, 0);
        for (x, row) in self.rows.iter().enumerate() {
            for &(y, pxy) in row {
                if y <= x {
                    continue;
                }
                let lhs = mu[x] * pxy;
                let rhs = mu[y] * self.prob(y, x);
                let scale = lhs.abs().max(rhs.abs());
                if scale == 0.0 {
                    continue;
                }
                let rel = (lhs - rhs).abs() / scale;
                if rel > worst.0 {
                    worst = (rel, x, y);
                }
            }
        }
        Ok(worst)
    }

    /// Verifies detailed balance and sets the reversible flag.
    pub fn verify_reversible(&mut self, mu: &[f64]) -> Result<f64> {
        let (rel_err, x, y) = self.detailed_balance_error(mu)?;
        if rel_err > REVERSIBILITY_TOLERANCE {
            self.reversible = false;
            return Err(Error::NotReversible { x, y, rel_err });
        }
        self.reversible = true;
        Ok(rel_err)
    }

    /// One step of `d ↦ dP`.
    pub fn push(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (x, row) in self.rows.iter().enumerate() {
            let dx = d[x];
            if dx == 0.0 {
                continue;
            }
            for &(y, p) in row {
                out[y] += dx * p;
            }
        }
        out
    }

    /// Whether `mu P = mu` within `tol` in every coordinate.
    pub fn is_stationary(&self, mu: &[f64], tol: f64) -> bool {
        self.push(mu).iter().zip(mu).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// The adjacent-transposition kernel on a state set, using only `edges`.
///
/// From `σ`, an edge `i` is chosen uniformly from `edges`; the particles
/// `a = σ(i)`, `b = σ(i + 1)` end in order `(a, b)` with probability `p_ab`
/// and `(b, a)` with probability `p_ba`. A swap leading outside `states` is
/// rejected and its mass stays on `σ`.
pub fn adjacent_kernel(
    states: Vec<Permutation>,
    edges: &[usize],
    p: &BiasMatrix,
) -> Result<TransitionMatrix<Permutation>> {
    let index: HashMap<&Permutation, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let rows: Vec<Vec<(usize, f64)>> = states
        .iter()
        .enumerate()
        .map(|(x, s)| {
            if edges.is_empty() {
                return vec![(x, 1.0)];
            }
            let share = 1.0 / edges.len() as f64;
            let mut row = Vec::with_capacity(edges.len() + 1);
            let mut stay = 0.0;
            for &i in edges {
                let a = s.at(i);
                let b = s.at(i + 1);
                let keep = p.p(a, b);
                stay += share * keep;
                let mut swapped = s.clone();
                swapped.swap_adjacent_unchecked(i);
                match index.get(&swapped) {
                    Some(&y) => row.push((y, share * (1.0 - keep))),
                    None => stay += share * (1.0 - keep),
                }
            }
            row.push((x, stay));
            row
        })
        .collect();
    drop(index);
    TransitionMatrix::from_rows(states, rows)
}

/// The exact one-step kernel of the (optionally restricted) chain, with its
/// stationary law. States are in the order of [`enumerate_stationary`] and
/// reversibility is verified before returning.
pub fn build_transition_matrix(
    p: &BiasMatrix,
    ell: Option<&LocalizationVector>,
    caps: &Caps,
) -> Result<(TransitionMatrix<Permutation>, DistributionTable<Permutation>)> {
    let mu = enumerate_stationary(p, ell, caps)?;
    let n = p.n();
    let edges: Vec<usize> = (1..n).collect();
    let mut kernel = adjacent_kernel(mu.support.clone(), &edges, p)?;
    kernel.verify_reversible(&mu.probs)?;
    Ok((kernel, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_line(v.to_vec()).unwrap()
    }

    #[test]
    fn two_particle_kernel() {
        let q = BiasMatrix::constant(2, 0.6).unwrap();
        let (k, _) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        let idx = k.index();
        let (a, b) = (idx[&p(&[1, 2])], idx[&p(&[2, 1])]);
        assert!((k.prob(a, b) - 0.4).abs() < 1e-15);
        assert!((k.prob(b, a) - 0.6).abs() < 1e-15);
        assert!(k.reversible);
    }

    #[test]
    fn restricted_move_is_rejected() {
        let q = BiasMatrix::constant(3, 0.6).unwrap();
        let ell = LocalizationVector::constant(3, 1);
        let (k, _) = build_transition_matrix(&q, Some(&ell), &Caps::default()).unwrap();
        let idx = k.index();
        let x = idx[&p(&[2, 1, 3])];
        assert!(!idx.contains_key(&p(&[2, 3, 1])));
        // stay = 0.4/2 (edge 1 keeps) + 0.6/2 (edge 2 keeps) + 0.4/2 (rejected)
        assert!((k.prob(x, idx[&p(&[1, 2, 3])]) - 0.3).abs() < 1e-15);
        assert!((k.prob(x, x) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn stationary_is_invariant() {
        let q = BiasMatrix::constant(4, 0.7).unwrap();
        let (k, mu) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        assert!(k.is_stationary(&mu.probs, 1e-14));
    }

    #[test]
    fn reversibility_violation_reported() {
        let states = vec![0u8, 1, 2];
        let rows = vec![
            vec![(1, 1.0)],
            vec![(2, 1.0)],
            vec![(0, 1.0)],
        ];
        let mut k = TransitionMatrix::from_rows(states, rows).unwrap();
        let mu = [1.0 / 3.0; 3];
        assert!(matches!(k.verify_reversible(&mu), Err(Error::NotReversible { .. })));
        assert!(TransitionMatrix::from_rows(vec![0u8], vec![vec![(0, 0.5)]]).is_err());
    }
}
