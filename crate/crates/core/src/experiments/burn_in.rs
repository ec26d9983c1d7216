use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pool::par_map;
use super::result::{fingerprint, linear_fit, mean_stderr, quantile, ExperimentResult, Series, SeriesPoint, Verdict};
use crate::chains::{at_step_in_place, stream_rng, DrawStream};
use crate::error::{Error, Result};
use crate::{BiasMatrix, Permutation};

/// Named initial configurations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartState {
    Identity,
    Reversal,
    /// Uniformly random, drawn per replica.
    Random,
    /// One-line notation.
    Custom(Vec<usize>),
}

impl StartState {
    pub fn build<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Permutation> {
        match self {
            StartState::Identity => Ok(Permutation::identity(n)),
            StartState::Reversal => Ok(Permutation::reversal(n)),
            StartState::Random => Ok(Permutation::random(n, rng)),
            StartState::Custom(v) => {
                if v.len() != n {
                    return Err(Error::SizeMismatch { expected: n, got: v.len() });
                }
                Permutation::from_one_line(v.clone())
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StartState::Identity => "identity",
            StartState::Reversal => "reversal",
            StartState::Random => "random",
            StartState::Custom(_) => "custom",
        }
    }
}

/// Thresholds for the post-burn-in displacement, fixed by a calibration run
/// at `q = 0.75`, `n ∈ {128, 256, 512}`, 200 replicas from the reversal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurnInThresholds {
    /// Burn-in length in units of `n²` steps.
    pub steps_per_n2: f64,
    /// Quantile of the max displacement that is tested.
    pub quantile: f64,
    /// The quantile must stay below `c0 · ln n`.
    pub c0: f64,
    /// Largest allowed growth of the quantile when `n` doubles.
    pub per_doubling: f64,
}

impl BurnInThresholds {
    pub const CALIBRATED: BurnInThresholds = BurnInThresholds {
        steps_per_n2: 8.0,
        quantile: 0.99,
        c0: 4.0,
        per_doubling: 3.0,
    };
}

impl Default for BurnInThresholds {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

/// Max displacement of every replica at every checkpoint:
/// `out[c][r]` for checkpoint `c` and replica `r`.
pub fn displacement_samples(
    p: &BiasMatrix,
    start: &StartState,
    checkpoints: &[u64],
    replicas: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<Vec<usize>>> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidParameter("burn-in needs n >= 2".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("checkpoints must be sorted".into()));
    }
    let tag = format!("burnin/n{n}/{}", start.label());
    let runs: Vec<Result<Vec<usize>>> = par_map(replicas, jobs, |r| {
        let mut rng = stream_rng(seed, &tag, r as u64);
        let mut sigma = start.build(n, &mut rng)?;
        let mut draws = DrawStream::from_rng(n, rng);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut t = 0u64;
        for &c in checkpoints {
            while t < c {
                let d = draws.next().expect("draw streams are infinite");
                at_step_in_place(&mut sigma, p, &d);
                t += 1;
            }
            out.push(sigma.max_displacement());
        }
        Ok(out)
    });
    let runs: Vec<Vec<usize>> = runs.into_iter().collect::<Result<_>>()?;
    Ok((0..checkpoints.len()).map(|c| runs.iter().map(|r| r[c]).collect()).collect())
}

/// Distribution of the max displacement across replicas at each checkpoint.
pub fn burn_in_profile(
    p: &BiasMatrix,
    start: &StartState,
    checkpoints: &[u64],
    replicas: usize,
    thresholds: &BurnInThresholds,
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    let n = p.n();
    let samples = displacement_samples(p, start, checkpoints, replicas, seed, jobs)?;
    let mut res = ExperimentResult::new("burnin", fingerprint(p, None));
    res.param("n", n)
        .param("epsilon", p.epsilon())
        .param("start", start)
        .param("replicas", replicas)
        .param("seed", seed)
        .param("thresholds", thresholds);
    let mut mean_s = Series::new("max-displacement-mean", "t");
    let mut q_s = Series::new("max-displacement-quantile", "t");
    for (&c, xs) in checkpoints.iter().zip(&samples) {
        let v: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let (m, se) = mean_stderr(&v);
        mean_s.points.push(SeriesPoint { x: c as f64, estimate: m, stderr: se, replicas });
        q_s.points.push(SeriesPoint { x: c as f64, estimate: quantile(&v, thresholds.quantile), stderr: 0.0, replicas });
    }
    let target = (thresholds.steps_per_n2 * (n * n) as f64).round() as u64;
    if let Some(c) = checkpoints.iter().position(|&c| c == target) {
        let limit = thresholds.c0 * (n as f64).ln();
        res.verdicts.push(quantile_verdict(&samples[c], limit, thresholds.quantile, n));
    }
    res.series.push(mean_s);
    res.series.push(q_s);
    Ok(res)
}

fn quantile_verdict(xs: &[usize], limit: f64, level: f64, n: usize) -> Verdict {
    let below = xs.iter().filter(|&&x| (x as f64) <= limit).count();
    let frac = below as f64 / xs.len() as f64;
    let se = (level * (1.0 - level) / xs.len() as f64).sqrt();
    Verdict::new(
        format!("burn-in-n{n}"),
        format!("max displacement <= {limit:.2} in a fraction >= {level} of replicas"),
        frac + 3.0 * se >= level,
        format!("{below}/{} replicas below", xs.len()),
    )
}

/// Post-burn-in displacement quantile across sizes, with per-size and
/// per-doubling verdicts. `ns` should be successive doublings.
pub fn burn_in_scaling(
    ns: &[usize],
    q: f64,
    start: &StartState,
    replicas: usize,
    thresholds: &BurnInThresholds,
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("burnin-scaling", format!("constant-q{q}"));
    res.param("ns", ns)
        .param("q", q)
        .param("start", start)
        .param("replicas", replicas)
        .param("seed", seed)
        .param("thresholds", thresholds);
    let mut s = Series::new("max-displacement-quantile", "n");
    let mut qs = Vec::new();
    for &n in ns {
        let p = BiasMatrix::constant(n, q)?;
        let t = (thresholds.steps_per_n2 * (n * n) as f64).round() as u64;
        let xs = displacement_samples(&p, start, &[t], replicas, seed, jobs)?.remove(0);
        let v: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let qv = quantile(&v, thresholds.quantile);
        s.points.push(SeriesPoint { x: n as f64, estimate: qv, stderr: 0.0, replicas });
        res.verdicts.push(quantile_verdict(&xs, thresholds.c0 * (n as f64).ln(), thresholds.quantile, n));
        qs.push((n, qv));
    }
    for w in qs.windows(2) {
        let ((n0, a), (n1, b)) = (w[0], w[1]);
        let doublings = (n1 as f64 / n0 as f64).log2();
        res.verdicts.push(Verdict::new(
            format!("growth-n{n0}-to-n{n1}"),
            format!("quantile grows by at most {} per doubling", thresholds.per_doubling),
            b - a <= thresholds.per_doubling * doublings,
            format!("{a} -> {b}"),
        ));
    }
    if qs.len() >= 2 {
        let xs: Vec<f64> = qs.iter().map(|e| (e.0 as f64).log2()).collect();
        let ys: Vec<f64> = qs.iter().map(|e| e.1).collect();
        if let Some(fit) = linear_fit(&xs, &ys) {
            res.param("growth_per_doubling_fit", fit.slope);
        }
    }
    res.series.push(s);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_start_stays_localized() {
        let p = BiasMatrix::constant(40, 0.75).unwrap();
        let r = burn_in_profile(&p, &StartState::Identity, &[0, 400, 1600], 20, &BurnInThresholds::default(), 1, 1)
            .unwrap();
        let q = &r.series_named("max-displacement-quantile").unwrap().points;
        assert_eq!(q[0].estimate, 0.0);
        assert!(q.iter().all(|p| p.estimate <= 4.0 * 40f64.ln()));
    }

    #[test]
    fn reproducible_and_job_independent() {
        let p = BiasMatrix::constant(12, 0.7).unwrap();
        let a = displacement_samples(&p, &StartState::Random, &[5, 50], 6, 9, 1).unwrap();
        let b = displacement_samples(&p, &StartState::Random, &[5, 50], 6, 9, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn custom_start_is_validated() {
        let p = BiasMatrix::constant(3, 0.7).unwrap();
        assert!(displacement_samples(&p, &StartState::Custom(vec![1, 1, 2]), &[1], 1, 0, 1).is_err());
        assert!(displacement_samples(&p, &StartState::Custom(vec![1, 2]), &[1], 1, 0, 1).is_err());
    }
}
