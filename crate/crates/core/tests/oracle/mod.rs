//! Brute-force reference computations, written directly from the definitions
//! and independent of the library's engines.
#![allow(dead_code)]

use atshuffle::{BiasMatrix, LocalizationVector};

/// All permutations of `[n]` in one-line notation, lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

pub fn localized(line: &[usize], ell: &LocalizationVector) -> bool {
    line.iter().enumerate().all(|(i, &k)| ell.allows(k, i + 1))
}

/// `Π_{i<j} p_{σ(i),σ(j)}`.
pub fn weight(line: &[usize], p: &BiasMatrix) -> f64 {
    let mut w = 1.0;
    for i in 0..line.len() {
        for j in i + 1..line.len() {
            w *= p.p(line[i], line[j]);
        }
    }
    w
}

pub struct Law {
    pub states: Vec<Vec<usize>>,
    pub probs: Vec<f64>,
    pub z: f64,
}

impl Law {
    pub fn mass(&self, mut event: impl FnMut(&[usize]) -> bool) -> f64 {
        self.states.iter().zip(&self.probs).filter(|(s, _)| event(s)).map(|(_, &p)| p).sum()
    }

    pub fn prob_of(&self, line: &[usize]) -> f64 {
        self.states.iter().position(|s| s == line).map_or(0.0, |i| self.probs[i])
    }

    /// The law conditioned on `keep`.
    pub fn condition(&self, mut keep: impl FnMut(&[usize]) -> bool) -> Law {
        let (states, w): (Vec<_>, Vec<_>) = self
            .states
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| keep(s))
            .map(|(s, &p)| (s.clone(), p))
            .unzip();
        let z: f64 = w.iter().sum();
        Law { states, probs: w.iter().map(|x| x / z).collect(), z: z * self.z }
    }
}

/// The stationary measure (optionally conditioned on `ell`) over its support;
/// zero-weight states are dropped.
pub fn stationary(p: &BiasMatrix, ell: Option<&LocalizationVector>) -> Law {
    let mut states = Vec::new();
    let mut w = Vec::new();
    for s in permutations(p.n()) {
        if ell.is_some_and(|e| !localized(&s, e)) {
            continue;
        }
        let x = weight(&s, p);
        if x > 0.0 {
            states.push(s);
            w.push(x);
        }
    }
    let z: f64 = w.iter().sum();
    Law { states, probs: w.iter().map(|x| x / z).collect(), z }
}

/// One-step transition probabilities out of `x`: choose an edge uniformly,
/// put the pair in order `(a, b)` with probability `p_{a,b}`, and reject
/// moves that leave the localized set.
pub fn kernel_row(x: &[usize], p: &BiasMatrix, ell: Option<&LocalizationVector>) -> Vec<(Vec<usize>, f64)> {
    let n = x.len();
    let share = 1.0 / (n - 1) as f64;
    let mut out: Vec<(Vec<usize>, f64)> = vec![(x.to_vec(), 0.0)];
    for i in 0..n - 1 {
        let (a, b) = (x[i], x[i + 1]);
        let mut y = x.to_vec();
        y.swap(i, i + 1);
        let swap = share * p.p(b, a);
        out[0].1 += share * p.p(a, b);
        if ell.is_some_and(|e| !localized(&y, e)) {
            out[0].1 += swap;
        } else {
            out.push((y, swap));
        }
    }
    out
}

/// Whether every prefix of `y` holds at least as many ones as the same
/// prefix of `yp`.
pub fn left_of(y: &[u8], yp: &[u8]) -> bool {
    let (mut a, mut b) = (0, 0);
    y.iter().zip(yp).all(|(&u, &v)| {
        a += u as usize;
        b += v as usize;
        a >= b
    })
}

/// All 0/1 vectors of length `n` with `k` ones.
pub fn occupancies(n: usize, k: usize) -> Vec<Vec<u8>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).map(|i| ((m >> i) & 1) as u8).collect())
        .collect()
}

/// Exact law of the position of particle 1 after `t` steps of the chain with
/// constant bias `q`, from position `start`. Particle 1 moves left with
/// probability `q/(n−1)` and right with probability `(1−q)/(n−1)`,
/// whatever the other particles are.
pub fn particle_one_law(n: usize, q: f64, start: usize, t: u64) -> Vec<f64> {
    let mut d = vec![0.0; n + 1];
    d[start] = 1.0;
    let e = 1.0 / (n - 1) as f64;
    for _ in 0..t {
        let mut nd = vec![0.0; n + 1];
        for x in 1..=n {
            let m = d[x];
            if m == 0.0 {
                continue;
            }
            let left = if x > 1 { q * e } else { 0.0 };
            let right = if x < n { (1.0 - q) * e } else { 0.0 };
            if x > 1 {
                nd[x - 1] += m * left;
            }
            if x < n {
                nd[x + 1] += m * right;
            }
            nd[x] += m * (1.0 - left - right);
        }
        d = nd;
    }
    d
}

/// `1 − λ₂` of a reversible kernel given densely, through the symmetrized
/// matrix `D^{1/2} P D^{-1/2}`.
pub fn dense_gap(kernel: &[Vec<f64>], mu: &[f64]) -> f64 {
    let m = mu.len();
    let s = nalgebra::DMatrix::from_fn(m, m, |i, j| {
        // average the two triangles to kill roundoff asymmetry
        let a = mu[i].sqrt() * kernel[i][j] / mu[j].sqrt();
        let b = mu[j].sqrt() * kernel[j][i] / mu[i].sqrt();
        0.5 * (a + b)
    });
    let mut ev: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if m == 1 {
        1.0
    } else {
        1.0 - ev[1]
    }
}
