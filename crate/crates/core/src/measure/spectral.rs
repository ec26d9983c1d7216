use std::hash::Hash;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{TransitionMatrix, REVERSIBILITY_TOLERANCE};
use crate::error::{Error, Result};

/// Above this many states the gap is found by Lanczos iteration instead of a
/// full eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 5000;

const LANCZOS_TOLERANCE: f64 = 1e-12;
const LANCZOS_MAX_STEPS: usize = 600;

/// `1 − λ₂` of a kernel reversible with respect to `mu`, where `λ₂` is the
/// second largest eigenvalue.
///
/// Computed on `D^{1/2} P D^{−1/2}` restricted to the states of positive mass.
/// A single-state support has gap 1 by convention.
pub fn spectral_gap<S: Clone + Eq + Hash>(p: &TransitionMatrix<S>, mu: &[f64]) -> Result<f64> {
    Ok(1.0 - second_eigenvalue(p, mu)?)
}

/// `λ₂` of a reversible kernel; 0 for a single-state support.
pub fn second_eigenvalue<S: Clone + Eq + Hash>(p: &TransitionMatrix<S>, mu: &[f64]) -> Result<f64> {
    let (rel_err, x, y) = p.detailed_balance_error(mu)?;
    if rel_err > REVERSIBILITY_TOLERANCE {
        return Err(Error::NotReversible { x, y, rel_err });
    }
    let support: Vec<usize> = (0..p.len()).filter(|&x| mu[x] > 0.0).collect();
    let m = support.len();
    if m == 0 {
        return Err(Error::EmptySupport("stationary law has no mass".into()));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let mut local = vec![usize::MAX; p.len()];
    for (i, &x) in support.iter().enumerate() {
        local[x] = i;
    }
    let sqrt_mu: Vec<f64> = support.iter().map(|&x| mu[x].sqrt()).collect();
    // symmetrized sparse rows on the support
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for (i, &x) in support.iter().enumerate() {
        let mut row = Vec::with_capacity(p.rows[x].len());
        for &(y, pxy) in &p.rows[x] {
            let j = local[y];
            if j == usize::MAX {
                continue;
            }
            let a = sqrt_mu[i] / sqrt_mu[j] * pxy;
            let b = sqrt_mu[j] / sqrt_mu[i] * p.prob(y, x);
            row.push((j, 0.5 * (a + b)));
        }
        rows.push(row);
    }
    if m <= DENSE_EIGEN_LIMIT {
        let mut dense = DMatrix::<f64>::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                dense[(i, j)] = v;
            }
        }
        let mut eig: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        Ok(eig[1])
    } else {
        let norm: f64 = sqrt_mu.iter().map(|v| v * v).sum::<f64>().sqrt();
        let top: Vec<f64> = sqrt_mu.iter().map(|v| v / norm).collect();
        Ok(lanczos_top(&rows, &top))
    }
}

/// Largest eigenvalue of a symmetric sparse operator on the orthogonal
/// complement of `deflate`, by Lanczos with full reorthogonalization.
fn lanczos_top(rows: &[Vec<(usize, f64)>], deflate: &[f64]) -> f64 {
    let m = rows.len();
    let apply = |v: &[f64]| -> Vec<f64> {
        rows.iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    };
    let project = |v: &mut [f64], u: &[f64]| {
        let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
    };
    // deterministic start vector, orthogonal to the top eigenvector
    let mut v: Vec<f64> = (0..m).map(|i| ((i * 7919 % 104729) as f64 / 104729.0) - 0.5).collect();
    project(&mut v, deflate);
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for step in 0..LANCZOS_MAX_STEPS.min(m - 1) {
        let mut w = apply(&basis[step]);
        let a: f64 = w.iter().zip(&basis[step]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        project(&mut w, deflate);
        for _ in 0..2 {
            for b in &basis {
                project(&mut w, b);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let ritz = SymmetricEigen::new(t)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if (ritz - last).abs() < LANCZOS_TOLERANCE || b < 1e-14 {
            return ritz;
        }
        last = ritz;
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    last
}

/// Worst-start total variation curve and the first time it drops to `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingCurve {
    pub t_mix: usize,
    /// `worst_tv[t] = max_x ‖P^t(x, ·) − μ‖_TV` for `t = 0..=t_mix`.
    pub worst_tv: Vec<f64>,
}

/// Default cap on the number of steps searched by [`exact_mixing_time`].
pub const MIXING_STEP_CAP: usize = 1_000_000;

/// Number of probability entries propagated at once.
const PROPAGATION_BUDGET: usize = 1 << 22;

/// Smallest `t` with worst-start TV distance at most `delta`, by propagating
/// every point mass through the kernel.
pub fn exact_mixing_time<S: Clone + Eq + Hash>(
    p: &TransitionMatrix<S>,
    mu: &[f64],
    delta: f64,
    cap: usize,
) -> Result<MixingCurve> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1/2]")));
    }
    let m = p.len();
    if mu.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: mu.len() });
    }
    if m <= 1 {
        return Ok(MixingCurve { t_mix: 0, worst_tv: vec![0.0] });
    }
    let chunk = (PROPAGATION_BUDGET / m).clamp(1, m);
    let starts: Vec<Vec<usize>> = (0..m).collect::<Vec<_>>().chunks(chunk).map(|c| c.to_vec()).collect();
    // First pass finds the horizon, second pass records every chunk up to it.
    let mut horizon = 0;
    for group in &starts {
        let curve = propagate(p, mu, group, |_, worst| worst <= delta, cap)?;
        horizon = horizon.max(curve.len() - 1);
    }
    let mut worst_tv = vec![0.0f64; horizon + 1];
    for group in &starts {
        let curve = propagate(p, mu, group, |t, _| t >= horizon, cap)?;
        for (t, v) in curve.into_iter().enumerate() {
            worst_tv[t] = worst_tv[t].max(v);
        }
    }
    Ok(MixingCurve { t_mix: horizon, worst_tv })
}

fn propagate<S: Clone + Eq + Hash>(
    p: &TransitionMatrix<S>,
    mu: &[f64],
    group: &[usize],
    mut done: impl FnMut(usize, f64) -> bool,
    cap: usize,
) -> Result<Vec<f64>> {
    let m = p.len();
    let mut dists: Vec<Vec<f64>> = group
        .iter()
        .map(|&x| {
            let mut d = vec![0.0; m];
            d[x] = 1.0;
            d
        })
        .collect();
    let worst = |dists: &[Vec<f64>]| {
        dists
            .iter()
            .map(|d| super::tv_aligned(d, mu))
            .fold(0.0f64, f64::max)
    };
    let mut curve = vec![worst(&dists)];
    let mut t = 0;
    while !done(t, curve[t]) {
        if t >= cap {
            return Err(Error::MixingCap { cap, last_tv: curve[t] });
        }
        for d in dists.iter_mut() {
            *d = p.push(d);
        }
        t += 1;
        curve.push(worst(&dists));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_transition_matrix, Caps};
    use crate::{BiasMatrix, LocalizationVector};

    #[test]
    fn two_state_gap_is_one() {
        let q = BiasMatrix::constant(2, 0.6).unwrap();
        let (k, mu) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        assert!((spectral_gap(&k, &mu.probs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_gap_convention() {
        let q = BiasMatrix::constant(4, 0.6).unwrap();
        let ell = LocalizationVector::constant(4, 0);
        let (k, mu) = build_transition_matrix(&q, Some(&ell), &Caps::default()).unwrap();
        assert_eq!(spectral_gap(&k, &mu.probs).unwrap(), 1.0);
        let curve = exact_mixing_time(&k, &mu.probs, 0.25, MIXING_STEP_CAP).unwrap();
        assert_eq!(curve.t_mix, 0);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let q = BiasMatrix::constant(5, 0.7).unwrap();
        let (k, mu) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        let dense = second_eigenvalue(&k, &mu.probs).unwrap();
        let sqrt_mu: Vec<f64> = mu.probs.iter().map(|v| v.sqrt()).collect();
        let rows: Vec<Vec<(usize, f64)>> = (0..k.len())
            .map(|x| {
                k.rows[x]
                    .iter()
                    .map(|&(y, pxy)| (y, sqrt_mu[x] / sqrt_mu[y] * pxy))
                    .collect()
            })
            .collect();
        let lanczos = lanczos_top(&rows, &sqrt_mu);
        assert!((dense - lanczos).abs() < 1e-9, "{dense} vs {lanczos}");
    }

    #[test]
    fn two_state_mixes_in_one_step() {
        let q = BiasMatrix::constant(2, 0.6).unwrap();
        let (k, mu) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        let curve = exact_mixing_time(&k, &mu.probs, 0.25, 10).unwrap();
        assert_eq!(curve.t_mix, 1);
        assert!((curve.worst_tv[0] - 0.6).abs() < 1e-15);
        let half = exact_mixing_time(&k, &mu.probs, 0.5, 10).unwrap();
        assert_eq!(half.t_mix, 1);
        assert!(exact_mixing_time(&k, &mu.probs, 0.0, 10).is_err());
    }

    #[test]
    fn step_cap_reports_last_tv() {
        let q = BiasMatrix::constant(4, 0.6).unwrap();
        let (k, mu) = build_transition_matrix(&q, None, &Caps::default()).unwrap();
        match exact_mixing_time(&k, &mu.probs, 0.01, 2) {
            Err(Error::MixingCap { cap: 2, last_tv }) => assert!(last_tv > 0.01),
            other => panic!("unexpected {other:?}"),
        }
    }
}
