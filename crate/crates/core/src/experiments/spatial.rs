use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::result::{fingerprint, linear_fit, proportion, ExperimentResult, Series, SeriesPoint, Verdict};
use super::tails::CutLaws;
use crate::error::{Error, Result};
use crate::measure::{BandDp, BandSampler, Caps};
use crate::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};

/// How the boundary influence is measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SpatialMode {
    /// Exact conditional laws from the band DP.
    Exact,
    /// Independent conditional draws, coupled from the first cut at which
    /// their placed sets agree. Gives an upper bound on the distance.
    Coupling { pairs: usize },
}

/// Thresholds of the decay verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialTargets {
    /// The distance must drop below `tv_below` by `r = by_r`.
    pub tv_below: f64,
    pub by_r: usize,
    pub min_r_squared: f64,
    /// Values below this are treated as numerically zero: excluded from the
    /// fit and from the strict monotonicity test.
    pub noise_floor: f64,
}

impl SpatialTargets {
    pub fn for_window(ell: usize) -> Self {
        Self {
            tv_below: 0.05,
            by_r: 12 * ell,
            min_r_squared: 0.9,
            noise_floor: 1e-10,
        }
    }
}

/// Boundaries on the first `i` positions at the two extremes of a constant
/// window `ell`: the identity, and the identity with its last `ell` entries
/// replaced by the `ell` particles that follow.
pub fn extreme_left_boundaries(n: usize, ell: usize, i: usize) -> Result<(BoundaryAssignment, BoundaryAssignment)> {
    if i < ell || i + ell > n {
        return Err(Error::InvalidParameter(format!("need ell <= i <= n − ell (i = {i}, ell = {ell})")));
    }
    let a: Vec<usize> = (1..=i).collect();
    let b: Vec<usize> = (1..=i - ell).chain(i + 1..=i + ell).collect();
    Ok((BoundaryAssignment::new(n, a, vec![])?, BoundaryAssignment::new(n, b, vec![])?))
}

fn tv_by_key<K: std::hash::Hash + Eq>(a: impl IntoIterator<Item = (K, f64)>, b: impl IntoIterator<Item = (K, f64)>) -> f64 {
    let mut m: HashMap<K, f64> = HashMap::new();
    for (k, v) in a {
        *m.entry(k).or_default() += v;
    }
    for (k, v) in b {
        *m.entry(k).or_default() -= v;
    }
    0.5 * m.values().map(|v| v.abs()).sum::<f64>()
}

/// Distance between the laws of `σ(A_r)`, `A_r = [i+1+r, n−j−r]`, under two
/// boundary conditions, for every `r` in `rs`.
#[allow(clippy::too_many_arguments)]
pub fn spatial_decay_curve<R: Rng + ?Sized>(
    p: &BiasMatrix,
    ell: &LocalizationVector,
    eta: &BoundaryAssignment,
    eta_bar: &BoundaryAssignment,
    rs: &[usize],
    mode: SpatialMode,
    targets: &SpatialTargets,
    caps: &Caps,
    rng: &mut R,
) -> Result<ExperimentResult> {
    let n = p.n();
    if eta.i() != eta_bar.i() || eta.j() != eta_bar.j() {
        return Err(Error::InvalidParameter("boundaries must pin the same positions".into()));
    }
    let (i, j) = (eta.i(), eta.j());
    if let Some(&r) = rs.iter().find(|&&r| if j == 0 { i + r >= n } else { i + 1 + 2 * r + j > n }) {
        return Err(Error::InvalidParameter(format!("A_r is empty for r = {r}")));
    }
    let base = BandDp::new(p, ell, caps)?;
    let dp_a = base.clone().with_pins(eta.pins())?;
    let dp_b = base.with_pins(eta_bar.pins())?;

    let mut series = Series::new("tv", "r");
    match mode {
        SpatialMode::Exact => {
            let la = CutLaws::from_dp(dp_a)?;
            let lb = CutLaws::from_dp(dp_b)?;
            for &r in rs {
                let tv = if j == 0 {
                    // σ(A_r) determines and is conditionally determined in law by the placed set at i + r
                    tv_by_key(la.law(i + r), lb.law(i + r))
                } else {
                    let ra = la.dp.region_law(&la.alpha, &la.beta, i + 1 + r, n - j - r, caps.region_states)?;
                    let rb = lb.dp.region_law(&lb.alpha, &lb.beta, i + 1 + r, n - j - r, caps.region_states)?;
                    tv_by_key(ra.into_iter().map(|(k, v)| (k, v.exp())), rb.into_iter().map(|(k, v)| (k, v.exp())))
                };
                series.points.push(SeriesPoint::exact(r as f64, tv.min(1.0)));
            }
        }
        SpatialMode::Coupling { pairs } => {
            if j > 0 {
                return Err(Error::InvalidParameter("the coupling estimate supports left boundaries only".into()));
            }
            let sa = BandSampler::from_dp(dp_a)?;
            let sb = BandSampler::from_dp(dp_b)?;
            let mut meet = Vec::with_capacity(pairs);
            for _ in 0..pairs {
                let x = sa.sample(rng)?;
                let y = sb.sample(rng)?;
                meet.push(first_common_cut(sa.dp(), &x, &y, i)?);
            }
            for &r in rs {
                let miss = meet.iter().filter(|&&t| t > i + r).count();
                let (est, se) = proportion(miss, pairs);
                series.points.push(SeriesPoint {
                    x: r as f64,
                    estimate: est,
                    stderr: se,
                    replicas: pairs,
                });
            }
        }
    }

    let mut res = ExperimentResult::new("spatial", fingerprint(p, Some(ell)));
    res.param("n", n)
        .param("epsilon", p.epsilon())
        .param("mode", mode)
        .param("targets", targets)
        .param("eta_left", eta.left())
        .param("eta_right", eta.right())
        .param("eta_bar_left", eta_bar.left())
        .param("eta_bar_right", eta_bar.right());
    decay_verdicts(&mut res, &series, targets);
    res.series.push(series);
    Ok(res)
}

/// First cut `t >= i` at which the placed sets of `x` and `y` coincide
/// (`n` if they never do before the end).
fn first_common_cut(dp: &BandDp, x: &Permutation, y: &Permutation, i: usize) -> Result<usize> {
    for t in i..dp.n() {
        if dp.prefix_mask(t, x)? == dp.prefix_mask(t, y)? {
            return Ok(t);
        }
    }
    Ok(dp.n())
}

fn decay_verdicts(res: &mut ExperimentResult, s: &Series, targets: &SpatialTargets) {
    let pts = &s.points;
    let mut rises = Vec::new();
    for w in pts.windows(2) {
        let slack = 3.0 * (w[0].stderr + w[1].stderr) + 1e-12;
        if w[1].estimate > w[0].estimate + slack {
            rises.push(format!("r={}: {:.3e} -> {:.3e}", w[1].x, w[0].estimate, w[1].estimate));
        }
    }
    res.verdicts.push(Verdict::new(
        "tv-nonincreasing",
        "TV(r + 1) <= TV(r) (numerical tolerance 1e-12, plus 3 stderr when sampled)",
        rises.is_empty(),
        if rises.is_empty() { "monotone".into() } else { rises.join("; ") },
    ));

    if let Some(pt) = pts.iter().find(|q| q.x as usize >= targets.by_r) {
        res.verdicts.push(Verdict::new(
            "tv-small-at-target",
            format!("TV({}) < {}", targets.by_r, targets.tv_below),
            pt.estimate - 3.0 * pt.stderr < targets.tv_below,
            format!("TV({}) = {:.4e}", pt.x, pt.estimate),
        ));
    }

    let fit_pts: Vec<&SeriesPoint> = pts.iter().filter(|q| q.estimate > targets.noise_floor).collect();
    let xs: Vec<f64> = fit_pts.iter().map(|q| q.x).collect();
    let ys: Vec<f64> = fit_pts.iter().map(|q| q.estimate.ln()).collect();
    match linear_fit(&xs, &ys) {
        Some(fit) => {
            res.param("log_tv_slope", fit.slope);
            res.param("log_tv_intercept", fit.intercept);
            res.param("log_tv_r_squared", fit.r_squared);
            res.param("fit_points", xs.len());
            res.verdicts.push(Verdict::new(
                "log-tv-decay",
                format!("slope of log TV against r < 0 with R² >= {}", targets.min_r_squared),
                fit.slope < 0.0 && fit.r_squared >= targets.min_r_squared,
                format!("slope {:.4}, R² {:.4}, {} points", fit.slope, fit.r_squared, xs.len()),
            ));
        }
        None => res.notes.push(format!(
            "fewer than two points above the noise floor {:e}; no decay fit",
            targets.noise_floor
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::enumerate_stationary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_boundaries_give_zero() {
        let p = BiasMatrix::constant(10, 0.7).unwrap();
        let ell = LocalizationVector::constant(10, 2);
        let (a, _) = extreme_left_boundaries(10, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = SpatialTargets::for_window(2);
        let r = spatial_decay_curve(&p, &ell, &a, &a, &[0, 1, 2, 5], SpatialMode::Exact, &t, &Caps::default(), &mut rng)
            .unwrap();
        assert!(r.series[0].points.iter().all(|x| x.estimate == 0.0));
    }

    fn brute_tv(p: &BiasMatrix, ell: &LocalizationVector, a: &BoundaryAssignment, b: &BoundaryAssignment, r1: usize, r2: usize) -> f64 {
        let mu = enumerate_stationary(p, Some(ell), &Caps::default()).unwrap();
        let law = |bd: &BoundaryAssignment| {
            let z = mu.mass(|s| bd.agrees_with(s));
            let mut m: HashMap<Vec<usize>, f64> = HashMap::new();
            for (s, &w) in mu.support.iter().zip(&mu.probs) {
                if bd.agrees_with(s) {
                    *m.entry(s.one_line()[r1 - 1..r2].to_vec()).or_default() += w / z;
                }
            }
            m
        };
        tv_by_key(law(a), law(b))
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = BiasMatrix::random_eps(8, 0.5, &mut rng).unwrap();
        let ell = LocalizationVector::constant(8, 2);
        let (a, b) = extreme_left_boundaries(8, 2, 2).unwrap();
        let t = SpatialTargets::for_window(2);
        let rs = [0, 1, 2, 3, 4];
        let r = spatial_decay_curve(&p, &ell, &a, &b, &rs, SpatialMode::Exact, &t, &Caps::default(), &mut rng).unwrap();
        for (pt, &rr) in r.series[0].points.iter().zip(&rs) {
            let want = brute_tv(&p, &ell, &a, &b, 3 + rr, 8);
            assert!((pt.estimate - want).abs() < 1e-10, "r={rr}: {} vs {want}", pt.estimate);
        }
        // two-sided boundary through the region law
        let a2 = BoundaryAssignment::new(8, vec![1, 2], vec![8]).unwrap();
        let b2 = BoundaryAssignment::new(8, vec![3, 1], vec![7]).unwrap();
        let r = spatial_decay_curve(&p, &ell, &a2, &b2, &[0, 1], SpatialMode::Exact, &t, &Caps::default(), &mut rng).unwrap();
        for (pt, rr) in r.series[0].points.iter().zip([0, 1]) {
            let want = brute_tv(&p, &ell, &a2, &b2, 3 + rr, 7 - rr);
            assert!((pt.estimate - want).abs() < 1e-10);
        }
    }

    #[test]
    fn coupling_bounds_exact_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BiasMatrix::constant(8, 0.7).unwrap();
        let ell = LocalizationVector::constant(8, 2);
        let (a, b) = extreme_left_boundaries(8, 2, 2).unwrap();
        let t = SpatialTargets::for_window(2);
        let rs = [0, 1, 2, 3];
        let caps = Caps::default();
        let ex = spatial_decay_curve(&p, &ell, &a, &b, &rs, SpatialMode::Exact, &t, &caps, &mut rng).unwrap();
        let co = spatial_decay_curve(&p, &ell, &a, &b, &rs, SpatialMode::Coupling { pairs: 4000 }, &t, &caps, &mut rng)
            .unwrap();
        for (e, c) in ex.series[0].points.iter().zip(&co.series[0].points) {
            assert!(c.estimate + 3.0 * c.stderr >= e.estimate, "{} vs {}", c.estimate, e.estimate);
        }
    }
}
