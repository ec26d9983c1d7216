//! The asymmetric simple exclusion process on `[n]` with `k` particles and
//! leftward bias `q`, its stationary law and the right-most particle tail.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::rng::UpdateDraw;
use crate::error::{contract, Error, Result};
use crate::measure::{log_add, DistributionTable, TransitionMatrix};
use crate::Permutation;

/// Largest number of configurations [`asep_stationary`] will enumerate.
pub const ASEP_ENUM_CAP: usize = 1_000_000;

/// Occupancy vector with a cached particle count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AsepState {
    occ: Vec<u8>,
    k: usize,
}

impl AsepState {
    pub fn new(occ: Vec<u8>) -> Result<Self> {
        if occ.iter().any(|&b| b > 1) {
            return contract("occupancies must be 0 or 1");
        }
        let k = occ.iter().filter(|&&b| b == 1).count();
        Ok(Self { occ, k })
    }

    /// Particles on sites `1..=k`.
    pub fn left_packed(n: usize, k: usize) -> Self {
        assert!(k <= n);
        let mut occ = vec![0; n];
        occ[..k].fill(1);
        Self { occ, k }
    }

    /// Particles on sites `n−k+1..=n`.
    pub fn right_packed(n: usize, k: usize) -> Self {
        assert!(k <= n);
        let mut occ = vec![0; n];
        occ[n - k..].fill(1);
        Self { occ, k }
    }

    pub fn n(&self) -> usize {
        self.occ.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Occupancy of site `i` (1-based).
    #[inline]
    pub fn at(&self, i: usize) -> u8 {
        self.occ[i - 1]
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occ
    }

    /// `counts[r]` = number of particles on `[r]`, for `r = 0..=n`.
    pub fn prefix_counts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n() + 1);
        out.push(0);
        let mut c = 0;
        for &b in &self.occ {
            c += b as usize;
            out.push(c);
        }
        out
    }

    /// Site of the right-most particle, 0 when empty.
    pub fn rightmost(&self) -> usize {
        self.occ.iter().rposition(|&b| b == 1).map_or(0, |i| i + 1)
    }

    /// Number of pairs `i < j` with a particle at `i` and a hole at `j`.
    pub fn ordered_pairs(&self) -> usize {
        let mut ones = 0;
        let mut pairs = 0;
        for &b in &self.occ {
            if b == 1 {
                ones += 1;
            } else {
                pairs += ones;
            }
        }
        pairs
    }
}

impl fmt::Display for AsepState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.occ {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// The occupancy vector `1{σ(i) <= k}`.
pub fn eta_projection(sigma: &Permutation, k: usize) -> AsepState {
    let occ = sigma.one_line().iter().map(|&x| u8::from(x <= k)).collect();
    AsepState { occ, k: k.min(sigma.n()) }
}

/// In-place update: a mixed edge becomes `(1,0)` iff `u < q`, else `(0,1)`.
/// Returns whether the state changed.
#[inline]
pub fn asep_step_in_place(y: &mut AsepState, q: f64, draw: &UpdateDraw) -> bool {
    let i = draw.edge - 1;
    let (a, b) = (y.occ[i], y.occ[i + 1]);
    if a == b {
        return false;
    }
    let left = u8::from(draw.u < q);
    y.occ[i] = left;
    y.occ[i + 1] = 1 - left;
    a != left
}

pub fn asep_step(y: &AsepState, q: f64, draw: &UpdateDraw) -> Result<AsepState> {
    if !draw.is_valid(y.n()) {
        return contract(format!("invalid draw {draw:?} for n = {}", y.n()));
    }
    let mut out = y.clone();
    asep_step_in_place(&mut out, q, draw);
    Ok(out)
}

/// Whether `y` is to the left of `yp`: every prefix of `y` holds at least as
/// many particles as the same prefix of `yp`.
pub fn left_order_leq(y: &AsepState, yp: &AsepState) -> Result<bool> {
    if y.n() != yp.n() || y.k != yp.k {
        return contract(format!(
            "comparing ASEP states with (n, k) = ({}, {}) and ({}, {})",
            y.n(),
            y.k,
            yp.n(),
            yp.k
        ));
    }
    Ok(left_order_leq_unchecked(y, yp))
}

#[inline]
pub(crate) fn left_order_leq_unchecked(y: &AsepState, yp: &AsepState) -> bool {
    let (mut a, mut b) = (0usize, 0usize);
    for (&x, &z) in y.occ.iter().zip(&yp.occ) {
        a += x as usize;
        b += z as usize;
        if a < b {
            return false;
        }
    }
    true
}

/// Advances both states with the same draw; the left order is preserved.
pub fn coupled_asep_step(
    y: &AsepState,
    yp: &AsepState,
    q: f64,
    draw: &UpdateDraw,
) -> Result<(AsepState, AsepState)> {
    if !left_order_leq(y, yp)? {
        return contract("coupled ASEP step requires Y <= Y'");
    }
    let a = asep_step(y, q, draw)?;
    let b = asep_step(yp, q, draw)?;
    if !left_order_leq_unchecked(&a, &b) {
        return Err(Error::OrderViolation(format!(
            "step {} edge {} u {}: {y} <= {yp} became {a} vs {b}",
            draw.t, draw.edge, draw.u
        )));
    }
    Ok((a, b))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All configurations with `k` particles on `[n]`, particles-first
/// lexicographic order (the left-packed state comes first).
pub fn asep_states(n: usize, k: usize, cap: usize) -> Result<Vec<AsepState>> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} > n = {n}")));
    }
    let count = binomial(n, k);
    if count > cap as f64 {
        return Err(Error::StateCap(format!(
            "C({n}, {k}) = {count} ASEP configurations exceed the cap {cap}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut occ = vec![0u8; n];
    fn rec(pos: usize, left: usize, occ: &mut Vec<u8>, out: &mut Vec<AsepState>, k: usize) {
        let n = occ.len();
        if pos == n {
            if left == 0 {
                out.push(AsepState { occ: occ.clone(), k });
            }
            return;
        }
        if left > 0 {
            occ[pos] = 1;
            rec(pos + 1, left - 1, occ, out, k);
            occ[pos] = 0;
        }
        if n - pos > left {
            rec(pos + 1, left, occ, out, k);
        }
    }
    rec(0, k, &mut occ, &mut out, k);
    Ok(out)
}

/// Exact one-step kernel of the ASEP.
pub fn asep_kernel(n: usize, k: usize, q: f64, cap: usize) -> Result<TransitionMatrix<AsepState>> {
    check_q(q)?;
    if n < 2 {
        return Err(Error::InvalidParameter("the ASEP needs n >= 2".into()));
    }
    let states = asep_states(n, k, cap)?;
    let index: std::collections::HashMap<&AsepState, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let share = 1.0 / (n - 1) as f64;
    let rows: Vec<Vec<(usize, f64)>> = states
        .iter()
        .enumerate()
        .map(|(x, s)| {
            let mut row = Vec::new();
            let mut stay = 0.0;
            for i in 0..n - 1 {
                match (s.occ[i], s.occ[i + 1]) {
                    (1, 0) => {
                        stay += share * q;
                        let mut t = s.clone();
                        t.occ.swap(i, i + 1);
                        row.push((index[&t], share * (1.0 - q)));
                    }
                    (0, 1) => {
                        stay += share * (1.0 - q);
                        let mut t = s.clone();
                        t.occ.swap(i, i + 1);
                        row.push((index[&t], share * q));
                    }
                    _ => stay += share,
                }
            }
            row.push((x, stay));
            row
        })
        .collect();
    drop(index);
    TransitionMatrix::from_rows(states, rows)
}

/// Stationary law `ν(Y) ∝ (q/(1−q))^{#{i<j : Y(i)=1, Y(j)=0}}`, verified by
/// detailed balance against [`asep_kernel`] before returning.
pub fn asep_stationary(n: usize, k: usize, q: f64, cap: usize) -> Result<DistributionTable<AsepState>> {
    check_q(q)?;
    let log_r = (q / (1.0 - q)).ln();
    let states = asep_states(n, k, cap)?;
    let log_w: Vec<f64> = states.iter().map(|s| s.ordered_pairs() as f64 * log_r).collect();
    let table = DistributionTable::from_log_weights(states, &log_w)?;
    if n >= 2 {
        let mut kernel = asep_kernel(n, k, q, cap)?;
        debug_assert_eq!(kernel.states, table.support);
        kernel.verify_reversible(&table.probs)?;
    }
    Ok(table)
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("ASEP bias q = {q} outside (0, 1)")));
    }
    Ok(())
}

/// `cdf[m] = ν(all particles on [m])` for `m = 0..=n`.
///
/// With `r = q/(1−q)` and `Z(m, j)` the weight sum of `j` particles on `[m]`,
/// `Z(m, j) = r^j Z(m−1, j) + Z(m−1, j−1)`, and the event has weight
/// `Z(m, k) r^{k(n−m)}`. Computed in log space, `O(nk)`.
pub fn asep_rightmost_cdf(n: usize, k: usize, q: f64) -> Result<Vec<f64>> {
    check_q(q)?;
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} > n = {n}")));
    }
    let log_r = (q / (1.0 - q)).ln();
    let neg = f64::NEG_INFINITY;
    // z[j] = log Z(m, j)
    let mut z = vec![neg; k + 1];
    z[0] = 0.0;
    let mut log_zk = vec![neg; n + 1];
    log_zk[0] = z[k];
    for m in 1..=n {
        for j in (0..=k.min(m)).rev() {
            let stay = if z[j] == neg { neg } else { z[j] + j as f64 * log_r };
            let add = if j > 0 { z[j - 1] } else { neg };
            z[j] = log_add(stay, add);
        }
        log_zk[m] = z[k];
    }
    let total = log_zk[n];
    Ok((0..=n)
        .map(|m| {
            if log_zk[m] == neg {
                0.0
            } else {
                (log_zk[m] + (k * (n - m)) as f64 * log_r - total).exp().min(1.0)
            }
        })
        .collect())
}

/// `ν(rightmost particle >= k + r)`.
pub fn asep_rightmost_tail(n: usize, k: usize, q: f64, r: usize) -> Result<f64> {
    let cdf = asep_rightmost_cdf(n, k, q)?;
    let m = k + r;
    if m > n {
        return Ok(0.0);
    }
    if m == 0 {
        return Ok(1.0);
    }
    Ok((1.0 - cdf[m - 1]).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: &[u8]) -> AsepState {
        AsepState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn step_rule() {
        let d = |u| UpdateDraw::new(1, u, 0);
        assert_eq!(asep_step(&st(&[0, 1]), 0.75, &d(0.3)).unwrap(), st(&[1, 0]));
        assert_eq!(asep_step(&st(&[1, 0]), 0.75, &d(0.8)).unwrap(), st(&[0, 1]));
        for u in [0.0, 0.5, 0.99] {
            assert_eq!(asep_step(&st(&[1, 1]), 0.75, &d(u)).unwrap(), st(&[1, 1]));
        }
    }

    #[test]
    fn left_order_examples() {
        assert!(left_order_leq(&st(&[1, 1, 0, 0]), &st(&[1, 0, 1, 0])).unwrap());
        assert!(left_order_leq(&st(&[1, 0, 1, 0]), &st(&[1, 0, 1, 0])).unwrap());
        assert!(!left_order_leq(&st(&[0, 1]), &st(&[1, 0])).unwrap());
        assert!(left_order_leq(&st(&[1, 1]), &st(&[1, 0])).is_err());
    }

    #[test]
    fn projection_examples() {
        let s = Permutation::from_one_line(vec![3, 1, 2]).unwrap();
        assert_eq!(eta_projection(&s, 2), st(&[0, 1, 1]));
        assert_eq!(eta_projection(&Permutation::identity(4), 2), st(&[1, 1, 0, 0]));
        assert_eq!(eta_projection(&Permutation::reversal(4), 1), st(&[0, 0, 0, 1]));
    }

    #[test]
    fn stationary_single_particle() {
        let nu = asep_stationary(3, 1, 0.75, ASEP_ENUM_CAP).unwrap();
        let expect = [9.0 / 13.0, 3.0 / 13.0, 1.0 / 13.0];
        for (site, e) in (1..=3).zip(expect) {
            let mut occ = vec![0; 3];
            occ[site - 1] = 1;
            assert!((nu.prob_of(&st(&occ)) - e).abs() < 1e-12);
        }
        let two = asep_stationary(2, 1, 0.6, ASEP_ENUM_CAP).unwrap();
        let ratio = two.prob_of(&st(&[1, 0])) / two.prob_of(&st(&[0, 1]));
        assert!((ratio - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cdf_matches_enumeration() {
        for (n, k, q) in [(6, 2, 0.7), (7, 3, 0.75), (5, 5, 0.6), (6, 0, 0.8), (8, 1, 0.55)] {
            let nu = asep_stationary(n, k, q, ASEP_ENUM_CAP).unwrap();
            let cdf = asep_rightmost_cdf(n, k, q).unwrap();
            for m in 0..=n {
                let exact = nu.mass(|y| y.rightmost() <= m);
                assert!((exact - cdf[m]).abs() < 1e-12, "n={n} k={k} m={m}");
            }
        }
        assert!((asep_rightmost_tail(3, 1, 0.75, 1).unwrap() - 4.0 / 13.0).abs() < 1e-12);
        assert_eq!(asep_rightmost_tail(10, 4, 0.75, 7).unwrap(), 0.0);
    }

    #[test]
    fn states_are_enumerated_once() {
        let s = asep_states(6, 3, 100).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s[0], AsepState::left_packed(6, 3));
        assert_eq!(*s.last().unwrap(), AsepState::right_packed(6, 3));
        assert!(asep_states(30, 15, 1000).is_err());
    }
}
