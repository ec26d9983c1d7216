use super::block_check::block_kernel;
use super::pool::par_map;
use super::result::{fingerprint, mean_stderr, proportion, quantile, ExperimentResult, Series, SeriesPoint, Verdict};
use crate::chains::{stream_rng, twin_chain_coupling_run, BlockDynamics, BlockSchedule, SelectionRule};
use crate::error::{Error, Result};
use crate::measure::{enumerate_stationary, spectral_gap, Caps, HeatBathOptions};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// Reverses consecutive runs of `ell + 1` positions; every particle moves by
/// at most `ell`.
pub fn block_reversal(n: usize, ell: usize) -> Permutation {
    let mut v: Vec<usize> = (1..=n).collect();
    for chunk in v.chunks_mut(ell + 1) {
        chunk.reverse();
    }
    Permutation::from_one_line(v).expect("a rearrangement of the identity")
}

/// What counts as fast coalescence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoalescenceTarget {
    pub within_steps: u64,
    pub min_fraction: f64,
}

impl Default for CoalescenceTarget {
    fn default() -> Self {
        Self {
            within_steps: 50,
            min_fraction: 0.95,
        }
    }
}

/// Coupling times of twin block chains from `start_a` and `start_b`, all
/// updates shared.
#[allow(clippy::too_many_arguments)]
pub fn block_chain_mixing(
    p: &BiasMatrix,
    ell: &LocalizationVector,
    schedule: BlockSchedule,
    rule: SelectionRule,
    opts: HeatBathOptions,
    caps: &Caps,
    starts: (&Permutation, &Permutation),
    runs: usize,
    max_steps: u64,
    target: &CoalescenceTarget,
    seed: u64,
    jobs: usize,
) -> Result<ExperimentResult> {
    let n = p.n();
    let kind = schedule.kind;
    let dynamics = BlockDynamics::new(schedule, rule, p, ell, caps, opts)?;
    let tag = format!("blockmix/n{n}");
    let times: Vec<Result<Option<u64>>> = par_map(runs, jobs, |r| {
        let mut rng = stream_rng(seed, &tag, r as u64);
        Ok(twin_chain_coupling_run(starts.0, starts.1, &dynamics, max_steps, &mut rng)?.time())
    });
    let times: Vec<Option<u64>> = times.into_iter().collect::<Result<_>>()?;
    let done: Vec<f64> = times.iter().flatten().map(|&t| t as f64).collect();
    let within = times.iter().filter(|t| t.is_some_and(|t| t <= target.within_steps)).count();
    let (frac, _) = proportion(within, runs);
    let se = (target.min_fraction * (1.0 - target.min_fraction) / runs as f64).sqrt();

    let mut res = ExperimentResult::new("blockmix", fingerprint(p, Some(ell)));
    res.param("n", n)
        .param("epsilon", p.epsilon())
        .param("schedule", kind)
        .param("selection", rule)
        .param("prune", opts.prune)
        .param("guard", opts.guard)
        .param("runs", runs)
        .param("max_steps", max_steps)
        .param("seed", seed)
        .param("start_a", starts.0.one_line())
        .param("start_b", starts.1.one_line());
    let (m, s) = mean_stderr(&done);
    res.param("mean_coupling_time", m).param("mean_coupling_stderr", s);
    if !done.is_empty() {
        res.param("median_coupling_time", quantile(&done, 0.5))
            .param("q95_coupling_time", quantile(&done, 0.95))
            .param("max_coupling_time", done.iter().cloned().fold(0.0, f64::max));
    }
    if done.len() < runs {
        res.notes.push(format!("{} of {runs} runs did not coalesce within {max_steps} steps", runs - done.len()));
    }
    let mut cdf = Series::new("coalesced-by", "steps");
    let top = times.iter().flatten().copied().max().unwrap_or(0);
    for t in 0..=top {
        let c = times.iter().filter(|x| x.is_some_and(|x| x <= t)).count();
        let (f, fse) = proportion(c, runs);
        cdf.points.push(SeriesPoint { x: t as f64, estimate: f, stderr: fse, replicas: runs });
    }
    res.series.push(cdf);
    res.verdicts.push(Verdict::new(
        "block-coalescence",
        format!(
            "coalesced within {} block steps in a fraction >= {} of runs",
            target.within_steps, target.min_fraction
        ),
        frac + 3.0 * se >= target.min_fraction,
        format!("{within}/{runs}"),
    ));
    Ok(res)
}

/// Exact inverse gap of the block dynamics on a small instance.
pub fn block_inverse_gap(
    p: &BiasMatrix,
    ell: Option<&LocalizationVector>,
    schedule: &BlockSchedule,
    rule: SelectionRule,
    bound: Option<f64>,
    caps: &Caps,
) -> Result<ExperimentResult> {
    if schedule.n != p.n() {
        return Err(Error::SizeMismatch { expected: p.n(), got: schedule.n });
    }
    let mu = enumerate_stationary(p, ell, caps)?;
    let k = block_kernel(&mu, schedule, rule)?;
    let gap = spectral_gap(&k, &mu.probs)?;
    let mut res = ExperimentResult::new("blockgap", fingerprint(p, ell));
    res.param("n", p.n())
        .param("schedule", schedule)
        .param("selection", rule)
        .param("gap", gap)
        .param("inverse_gap", 1.0 / gap);
    if let Some(b) = bound {
        res.verdicts.push(Verdict::new(
            "block-inverse-gap",
            format!("1 / gap(blocks) <= {b}"),
            1.0 / gap <= b,
            format!("{:.6}", 1.0 / gap),
        ));
    }
    Ok(res)
}
