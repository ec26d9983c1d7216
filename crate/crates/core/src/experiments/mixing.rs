use serde::{Deserialize, Serialize};

use super::pool::par_map;
use super::result::{log_log_fit, mean_stderr, proportion, ExperimentResult, Series, SeriesPoint, Verdict};
use crate::chains::{asep_coalescence_run, at_step_in_place, stream_rng, twin_chain_coupling_run, AtChain, DrawStream};
use crate::error::{Error, Result};
use crate::measure::{build_transition_matrix, exact_mixing_time, Caps, MIXING_STEP_CAP};
use crate::{BiasMatrix, Permutation};

/// Named bias families used by the scaling experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum BiasFamily {
    ConstantQ { q: f64 },
    TotallyAsymmetric,
}

impl BiasFamily {
    pub fn instance(&self, n: usize) -> Result<BiasMatrix> {
        match *self {
            BiasFamily::ConstantQ { q } => BiasMatrix::constant(n, q),
            BiasFamily::TotallyAsymmetric => Ok(BiasMatrix::totally_asymmetric(n)),
        }
    }
}

/// Exact worst-start mixing times for each `n` (full enumeration).
pub fn mixing_exact(ns: &[usize], family: BiasFamily, delta: f64, caps: &Caps) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("mix-exact", format!("{family:?}"));
    res.param("ns", ns).param("family", family).param("delta", delta).param("method", "exact");
    let mut s = Series::new("t-mix", "n");
    for &n in ns {
        let p = family.instance(n)?;
        let (k, mu) = build_transition_matrix(&p, None, caps)?;
        let curve = exact_mixing_time(&k, &mu.probs, delta, MIXING_STEP_CAP)?;
        s.points.push(SeriesPoint::exact(n as f64, curve.t_mix as f64));
    }
    fit_param(&mut res, &s);
    res.series.push(s);
    Ok(res)
}

fn fit_param(res: &mut ExperimentResult, s: &Series) -> Option<f64> {
    let pts: Vec<&SeriesPoint> = s.points.iter().filter(|p| p.estimate > 0.0).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.estimate).collect();
    let fit = log_log_fit(&xs, &ys)?;
    res.param("log_log_slope", fit.slope);
    res.param("log_log_r_squared", fit.r_squared);
    Some(fit.slope)
}

/// Coalescence times of the monotone ASEP coupling with `k = n/2` between
/// the left- and right-packed states, and the log-log slope against `n`.
/// Runs that exceed `max_steps_per_n2 · n²` are reported, and fail the
/// verdict.
#[allow(clippy::too_many_arguments)]
pub fn asep_coupling_scaling(
    ns: &[usize],
    q: f64,
    replicas: usize,
    max_steps_per_n2: f64,
    slope_target: (f64, f64),
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("mix-asep-coupling", format!("asep-q{q}"));
    res.param("ns", ns)
        .param("q", q)
        .param("replicas", replicas)
        .param("seed", seed)
        .param("method", "coupling")
        .param("max_steps_per_n2", max_steps_per_n2)
        .param("start_pair", "left-packed / right-packed");
    let mut s = Series::new("coalescence-time", "n");
    let mut timeouts = 0usize;
    for &n in ns {
        let cap = (max_steps_per_n2 * (n * n) as f64).ceil() as u64;
        let tag = format!("asep-coupling/n{n}");
        let runs: Vec<Result<Option<u64>>> = par_map(replicas, jobs, |r| {
            let mut rng = stream_rng(seed, &tag, r as u64);
            Ok(asep_coalescence_run(n, n / 2, q, cap, &mut rng)?.time())
        });
        let runs: Vec<Option<u64>> = runs.into_iter().collect::<Result<_>>()?;
        let done: Vec<f64> = runs.iter().flatten().map(|&t| t as f64).collect();
        let missed = runs.len() - done.len();
        if missed > 0 {
            res.notes.push(format!("n = {n}: {missed} of {replicas} runs exceeded {cap} steps"));
        }
        timeouts += missed;
        let (m, se) = mean_stderr(&done);
        s.points.push(SeriesPoint { x: n as f64, estimate: m, stderr: se, replicas: done.len() });
    }
    let slope = fit_param(&mut res, &s);
    res.series.push(s);
    let (want, tol) = slope_target;
    res.verdicts.push(Verdict::new(
        "coalescence-scaling",
        format!("log-log slope in {want} ± {tol}, every run coalesced"),
        timeouts == 0 && slope.is_some_and(|b| (b - want).abs() <= tol),
        format!("slope {:?}, {timeouts} timeouts", slope),
    ));
    Ok(res)
}

/// Mixing-time bracket from the position of particle 1: a lower bound from
/// `TV(P_t, μ) >= μ(E) − P_t(E)` with `E = {σ⁻¹(1) <= ⌊√n⌋}` and the
/// geometric stationary bound on `μ(E)`, and an upper bracket from twin
/// chains started at the identity and the reversal.
#[allow(clippy::too_many_arguments)]
pub fn statistic_scaling(
    ns: &[usize],
    family: BiasFamily,
    delta: f64,
    replicas: usize,
    grid: usize,
    horizon_per_n2: f64,
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be positive".into()));
    }
    let mut res = ExperimentResult::new("mix-statistic", format!("{family:?}"));
    res.param("ns", ns)
        .param("family", family)
        .param("delta", delta)
        .param("replicas", replicas)
        .param("seed", seed)
        .param("method", "statistic")
        .param("statistic", "position of particle 1")
        .param("start_pair", "identity / reversal");
    let mut lower = Series::new("t-mix-lower", "n");
    let mut upper = Series::new("coupling-time", "n");
    for &n in ns {
        let p = family.instance(n)?;
        let horizon = (horizon_per_n2 * (n * n) as f64).ceil() as u64;
        let times: Vec<u64> = (0..=grid as u64).map(|g| g * horizon / grid as u64).collect();
        let s = (n as f64).sqrt().floor() as usize;
        let eps = p.epsilon();
        let mu_e = if eps.is_infinite() { 1.0 } else { 1.0 - (1.0 + eps).powi(-(s as i32)) };
        let tag = format!("statistic/n{n}");
        let hits: Vec<Vec<bool>> = par_map(replicas, jobs, |r| {
            let mut sigma = Permutation::reversal(n);
            let mut draws = DrawStream::from_rng(n, stream_rng(seed, &tag, r as u64));
            let mut t = 0u64;
            times
                .iter()
                .map(|&c| {
                    while t < c {
                        at_step_in_place(&mut sigma, &p, &draws.next().expect("infinite"));
                        t += 1;
                    }
                    sigma.position_of(1) <= s
                })
                .collect()
        });
        let mut t_lo = 0u64;
        for (g, &c) in times.iter().enumerate() {
            let (pe, se) = proportion(hits.iter().filter(|h| h[g]).count(), replicas);
            if mu_e - (pe + 3.0 * se) > delta {
                t_lo = c;
            }
        }
        lower.points.push(SeriesPoint { x: n as f64, estimate: t_lo as f64, stderr: 0.0, replicas });
        if t_lo == horizon {
            res.notes.push(format!("n = {n}: lower bound reached the horizon {horizon}"));
        }

        let chain = AtChain { p: &p };
        let tag = format!("statistic-coupling/n{n}");
        let runs: Vec<Result<Option<u64>>> = par_map(replicas, jobs, |r| {
            let mut rng = stream_rng(seed, &tag, r as u64);
            Ok(twin_chain_coupling_run(&Permutation::identity(n), &Permutation::reversal(n), &chain, horizon, &mut rng)?
                .time())
        });
        let runs: Vec<Option<u64>> = runs.into_iter().collect::<Result<_>>()?;
        let done: Vec<f64> = runs.iter().flatten().map(|&t| t as f64).collect();
        if done.len() < runs.len() {
            res.notes.push(format!("n = {n}: {} coupled runs exceeded {horizon} steps", runs.len() - done.len()));
        }
        let (m, se) = mean_stderr(&done);
        upper.points.push(SeriesPoint { x: n as f64, estimate: m, stderr: se, replicas: done.len() });
    }
    fit_param(&mut res, &lower);
    res.series.push(lower);
    res.series.push(upper);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_particles_mix_in_one_step() {
        let r = mixing_exact(&[2], BiasFamily::ConstantQ { q: 0.6 }, 0.25, &Caps::default()).unwrap();
        assert_eq!(r.series[0].points[0].estimate, 1.0);
    }

    #[test]
    fn totally_asymmetric_lower_bound_grows() {
        let r = statistic_scaling(&[9, 16, 25], BiasFamily::TotallyAsymmetric, 0.25, 40, 20, 2.0, 3, 1).unwrap();
        let lo = &r.series_named("t-mix-lower").unwrap().points;
        assert!(lo[0].estimate < lo[1].estimate && lo[1].estimate < lo[2].estimate);
        let up = &r.series_named("coupling-time").unwrap().points;
        for (a, b) in lo.iter().zip(up) {
            assert!(a.estimate <= b.estimate + 3.0 * b.stderr);
        }
    }

    #[test]
    fn asep_scaling_reports_timeouts() {
        let r = asep_coupling_scaling(&[16, 32], 0.75, 5, 0.01, (2.0, 0.3), 0, 1).unwrap();
        assert!(!r.passed());
        assert!(!r.notes.is_empty());
    }
}
