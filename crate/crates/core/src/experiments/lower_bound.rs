use super::pool::par_map;
use super::result::{fingerprint, proportion, ExperimentResult, Series, SeriesPoint, Verdict};
use super::tails::CutLaws;
use crate::chains::{at_step_in_place, stream_rng, DrawStream};
use crate::error::{Error, Result};
use crate::measure::Caps;
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// Verdict thresholds and the optional band-DP reference window.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundSettings {
    /// Largest allowed probability of the event at the tested time.
    pub max_probability: f64,
    /// Smallest allowed stationary probability of the same event.
    pub min_stationary: f64,
    /// Window for an exact restricted-measure cross-check.
    pub reference_window: Option<LocalizationVector>,
    pub prune: Option<f64>,
}

impl Default for LowerBoundSettings {
    fn default() -> Self {
        Self {
            max_probability: 0.05,
            min_stationary: 0.99,
            reference_window: None,
            prune: None,
        }
    }
}

/// `P(Bin(t, 1/(n−1)) >= m)`: particle 1 moves left only when its left edge
/// is chosen, so this bounds the chance of making `m` left moves in `t` steps.
pub fn left_move_tail(n: usize, t: u64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > t || n < 2 {
        return 0.0;
    }
    let p = 1.0 / (n - 1) as f64;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    // ln C(t, m), then successive ratios
    let mut lc = 0.0;
    for i in 1..=m {
        lc += ((t - m + i) as f64).ln() - (i as f64).ln();
    }
    let mut term = lc + m as f64 * lp + (t - m) as f64 * lq;
    let mut acc = f64::NEG_INFINITY;
    for k in m..=t {
        acc = crate::measure::log_add(acc, term);
        if k < t {
            term += ((t - k) as f64).ln() - ((k + 1) as f64).ln() + lp - lq;
            if term < acc - 40.0 {
                break;
            }
        }
    }
    acc.exp().min(1.0)
}

/// From the reversal, the probability that particle 1 sits in `[⌊√n⌋]`
/// after `⌊(1 − eta) n²⌋` steps, against the stationary probability of the
/// same event.
pub fn lower_bound_experiment(
    p: &BiasMatrix,
    eta: f64,
    replicas: usize,
    settings: &LowerBoundSettings,
    caps: &Caps,
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
    }
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let t = ((1.0 - eta) * (n * n) as f64).floor() as u64;
    let s = (n as f64).sqrt().floor() as usize;
    let tag = format!("lowerbound/n{n}");
    let hits: Vec<bool> = par_map(replicas, jobs, |r| {
        let mut sigma = Permutation::reversal(n);
        let mut draws = DrawStream::from_rng(n, stream_rng(seed, &tag, r as u64));
        for _ in 0..t {
            let d = draws.next().expect("draw streams are infinite");
            at_step_in_place(&mut sigma, p, &d);
        }
        sigma.position_of(1) <= s
    });
    let (est, se) = proportion(hits.iter().filter(|&&h| h).count(), replicas);
    let drift = left_move_tail(n, t, (n - s) as u64);
    let eps = p.epsilon();
    // P(particle 1 beyond position s) <= (1+ε)^{-s} at stationarity
    let stationary_lower = if eps.is_infinite() { 1.0 } else { 1.0 - (1.0 + eps).powi(-(s as i32)) };

    let mut res = ExperimentResult::new("lowerbound", fingerprint(p, None));
    res.param("n", n)
        .param("epsilon", eps)
        .param("eta", eta)
        .param("steps", t)
        .param("sqrt_n", s)
        .param("replicas", replicas)
        .param("seed", seed)
        .param("start", "reversal")
        .param("drift_bound", drift)
        .param("stationary_lower_bound", stationary_lower);
    let mut series = Series::new("particle-one-near-front", "t");
    series.points.push(SeriesPoint { x: t as f64, estimate: est, stderr: se, replicas });
    res.series.push(series);
    res.verdicts.push(Verdict::new(
        "chain-far-from-front",
        format!("P(σ_t⁻¹(1) <= {s}) <= {}", settings.max_probability),
        est - 3.0 * se <= settings.max_probability,
        format!("{est:.4} ± {se:.4} (left-move bound {drift:.3e})"),
    ));
    res.verdicts.push(Verdict::new(
        "stationary-near-front",
        format!("μ(σ⁻¹(1) <= {s}) >= {}", settings.min_stationary),
        stationary_lower >= settings.min_stationary,
        format!("geometric lower bound {stationary_lower:.6}"),
    ));
    if let Some(ell) = &settings.reference_window {
        let laws = CutLaws::new(p, ell, caps, settings.prune)?;
        let v = 1.0 - laws.avoids_initial(s, 1);
        res.param("stationary_restricted", v);
        res.verdicts.push(Verdict::new(
            "restricted-stationary-near-front",
            format!("μ(σ⁻¹(1) <= {s} | localized) >= {}", settings.min_stationary),
            v >= settings.min_stationary,
            format!("{v:.6}"),
        ));
    }
    Ok(res)
}
