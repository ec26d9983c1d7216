use rand::Rng;

use super::result::{fingerprint, proportion, ExperimentResult, Series, SeriesPoint, Verdict};
use super::tails::{CutLaws, MeasureMode};
use crate::error::{Error, Result};
use crate::measure::{enumerate_stationary, BandDp, BandSampler, Caps};
use crate::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};

/// `Π_{m=1}^{depth} (1 − (1+ε)^{−m})`.
pub fn disconnect_product_bound(epsilon: f64, depth: usize) -> f64 {
    if epsilon.is_infinite() {
        return 1.0;
    }
    let base = 1.0 + epsilon;
    (1..=depth).map(|m| 1.0 - base.powi(-(m as i32))).product()
}

/// Positions `k` for which the lower bound is claimed: `[i + ℓ_max⁻, n − j − ℓ_max⁺]`
/// under a boundary, every `k ∈ [n]` otherwise.
pub fn valid_disconnect_range(
    n: usize,
    ell: Option<&LocalizationVector>,
    boundary: Option<&BoundaryAssignment>,
) -> (usize, usize) {
    match boundary {
        None => (1, n),
        Some(b) => {
            let (lm, lp) = ell.map_or((n, n), |e| (e.lmax_minus(), e.lmax_plus()));
            ((b.i() + lm).max(1), (n - b.j()).saturating_sub(lp))
        }
    }
}

/// Probability that `k` is disconnecting, conditioned on localization and
/// on the boundary, for every `k` in `ks` (all valid `k` when empty).
pub fn disconnect_probability<R: Rng + ?Sized>(
    p: &BiasMatrix,
    ell: Option<&LocalizationVector>,
    boundary: Option<&BoundaryAssignment>,
    ks: &[usize],
    mode: MeasureMode,
    caps: &Caps,
    rng: &mut R,
) -> Result<ExperimentResult> {
    let n = p.n();
    if let Some(b) = boundary {
        if b.n() != n {
            return Err(Error::SizeMismatch { expected: n, got: b.n() });
        }
    }
    let (lo, hi) = valid_disconnect_range(n, ell, boundary);
    let ks: Vec<usize> = if ks.is_empty() { (lo..=hi).collect() } else { ks.to_vec() };
    if let Some(&bad) = ks.iter().find(|&&k| k < lo || k > hi) {
        return Err(Error::InvalidParameter(format!("k = {bad} outside the valid range [{lo}, {hi}]")));
    }
    let i = boundary.map_or(0, |b| b.i());

    let (values, replicas): (Vec<f64>, usize) = match mode {
        MeasureMode::Exact => {
            let mu = enumerate_stationary(p, ell, caps)?;
            let agrees = |s: &Permutation| boundary.is_none_or(|b| b.agrees_with(s));
            let mass = mu.mass(agrees);
            if mass <= 0.0 {
                return Err(Error::EmptySupport("boundary has no localized completion".into()));
            }
            let v = ks
                .iter()
                .map(|&k| mu.mass(|s| agrees(s) && s.is_disconnecting(k)) / mass)
                .collect();
            (v, 0)
        }
        MeasureMode::Band { prune } => {
            let dp = pinned_dp(p, ell, boundary, caps)?.with_pruning(prune);
            let laws = CutLaws::from_dp(dp)?;
            let v = ks
                .iter()
                .map(|&k| {
                    let target = laws.dp.initial_segment_mask(k);
                    laws.law(k).into_iter().filter(|e| e.0 == target).map(|e| e.1).sum()
                })
                .collect();
            (v, 0)
        }
        MeasureMode::Sampled { samples } => {
            let sampler = BandSampler::from_dp(pinned_dp(p, ell, boundary, caps)?)?;
            let mut hits = vec![0usize; ks.len()];
            for _ in 0..samples {
                let s = sampler.sample(rng)?;
                for (h, &k) in hits.iter_mut().zip(&ks) {
                    *h += s.is_disconnecting(k) as usize;
                }
            }
            (hits.iter().map(|&h| h as f64 / samples as f64).collect(), samples)
        }
    };

    let eps = p.epsilon();
    let mut res = ExperimentResult::new("disconnect", fingerprint(p, ell));
    res.param("n", n)
        .param("epsilon", eps)
        .param("mode", mode)
        .param("boundary_left", boundary.map(|b| b.left().to_vec()))
        .param("boundary_right", boundary.map(|b| b.right().to_vec()));
    let mut series = Series::new("disconnect-probability", "k");
    let mut bounds = Series::new("product-bound", "k");
    let mut bad = Vec::new();
    for (&k, &v) in ks.iter().zip(&values) {
        let se = if replicas == 0 { 0.0 } else { proportion((v * replicas as f64).round() as usize, replicas).1 };
        let bound = disconnect_product_bound(eps, k - i);
        series.points.push(SeriesPoint { x: k as f64, estimate: v, stderr: se, replicas });
        bounds.points.push(SeriesPoint::exact(k as f64, bound));
        if v + 3.0 * se < bound * (1.0 - 1e-12) {
            bad.push(format!("k={k}: {v:.6e} < {bound:.6e}"));
        }
    }
    res.series.push(series);
    res.series.push(bounds);
    res.verdicts.push(Verdict::new(
        "disconnect-lower-bound",
        "P(k disconnecting | loc, boundary) >= Π_{m=1}^{k-i} (1 − (1+ε)^-m)",
        bad.is_empty(),
        if bad.is_empty() { format!("{} positions checked", ks.len()) } else { bad.join("; ") },
    ));
    Ok(res)
}

fn pinned_dp(
    p: &BiasMatrix,
    ell: Option<&LocalizationVector>,
    boundary: Option<&BoundaryAssignment>,
    caps: &Caps,
) -> Result<BandDp> {
    let ell = ell.ok_or_else(|| Error::InvalidParameter("band modes need a localization window".into()))?;
    let dp = BandDp::new(p, ell, caps)?;
    match boundary {
        Some(b) => dp.with_pins(b.pins()),
        None => Ok(dp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_particles() {
        let p = BiasMatrix::constant(2, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = disconnect_probability(&p, None, None, &[1], MeasureMode::Exact, &Caps::default(), &mut rng).unwrap();
        assert!((r.series[0].points[0].estimate - 0.7).abs() < 1e-12);
    }

    #[test]
    fn identity_forcing_window() {
        let p = BiasMatrix::constant(5, 0.6).unwrap();
        let ell = LocalizationVector::constant(5, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [MeasureMode::Exact, MeasureMode::Band { prune: None }] {
            let r = disconnect_probability(&p, Some(&ell), None, &[], mode, &Caps::default(), &mut rng).unwrap();
            assert!(r.series[0].points.iter().all(|x| (x.estimate - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn band_matches_enumeration_with_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = BiasMatrix::random_eps(7, 0.5, &mut rng).unwrap();
        let ell = LocalizationVector::constant(7, 1);
        let b = BoundaryAssignment::new(7, vec![2], vec![]).unwrap();
        let caps = Caps::default();
        let a = disconnect_probability(&p, Some(&ell), Some(&b), &[], MeasureMode::Exact, &caps, &mut rng).unwrap();
        let c = disconnect_probability(&p, Some(&ell), Some(&b), &[], MeasureMode::Band { prune: None }, &caps, &mut rng)
            .unwrap();
        assert!(!a.series[0].points.is_empty());
        for (x, y) in a.series[0].points.iter().zip(&c.series[0].points) {
            assert!((x.estimate - y.estimate).abs() < 1e-12);
        }
        assert!(a.passed());
    }

    #[test]
    fn rejects_k_outside_range() {
        let p = BiasMatrix::constant(6, 0.6).unwrap();
        let ell = LocalizationVector::constant(6, 2);
        let b = BoundaryAssignment::new(6, vec![1], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = disconnect_probability(&p, Some(&ell), Some(&b), &[2], MeasureMode::Exact, &Caps::default(), &mut rng);
        assert!(matches!(e, Err(Error::InvalidParameter(_))));
    }
}
