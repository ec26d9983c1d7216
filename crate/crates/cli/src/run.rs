//! Dispatch of a resolved configuration to the library.

use anyhow::{Context, Result};
use atshuffle::chains::{
    at_step_in_place, projected_family, restricted_at_step_in_place, stream_rng, write_record, BlockSchedule,
    CheckpointRecord, DominationCoupling, DrawStream,
};
use atshuffle::experiments::{
    asep_coupling_scaling, asep_tail_check, block_chain_mixing, block_decomposition_check, block_reversal,
    burn_in_profile, burn_in_scaling, disconnect_probability, extreme_left_boundaries, fingerprint,
    lower_bound_experiment, mixing_exact, par_map, spatial_decay_curve, statistic_scaling, BiasFamily,
    CoalescenceTarget, ExperimentResult, LowerBoundSettings, MeasureMode, Series, SeriesPoint, SpatialMode,
    SpatialTargets, StartState, Verdict,
};
use atshuffle::measure::{build_transition_matrix, enumerate_stationary, spectral_gap, BandDp, BandSampler, HeatBathOptions};
use atshuffle::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};
use log::info;

use crate::config::{self, Command, Family, MixMethod, ModeSpec, RunConfig, ScheduleSpec, StartSpec};

/// A finished run: the result record, extra artifacts and console lines.
pub struct Outcome {
    pub result: ExperimentResult,
    /// `(file name, contents)` written next to the result.
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(result: ExperimentResult) -> Self {
        Self {
            result,
            files: Vec::new(),
            summary: Vec::new(),
        }
    }
}

fn one_line(s: &Permutation) -> String {
    s.one_line().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn start_state(spec: StartSpec) -> StartState {
    match spec {
        StartSpec::Identity => StartState::Identity,
        StartSpec::Reversal => StartState::Reversal,
        StartSpec::Random => StartState::Random,
    }
}

fn schedule(spec: ScheduleSpec, m: Option<usize>, n: usize) -> Result<BlockSchedule> {
    Ok(match spec {
        ScheduleSpec::WestEast => BlockSchedule::west_east(n)?,
        ScheduleSpec::Interleaved => BlockSchedule::interleaved(n, m.expect("resolved"))?,
        ScheduleSpec::Single => BlockSchedule::single(n),
    })
}

fn family(cfg: &RunConfig) -> BiasFamily {
    match cfg.instance.family {
        Family::TotallyAsymmetric => BiasFamily::TotallyAsymmetric,
        _ => BiasFamily::ConstantQ {
            q: cfg.instance.q.expect("resolved"),
        },
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let command = cfg.command.expect("resolved");
    let p = config::bias_matrix(&cfg.instance)?;
    let ell = config::window(&cfg.instance)?;
    info!("{} on n = {} (epsilon = {})", command.name(), p.n(), p.epsilon());
    let mut out = match command {
        Command::Exact => exact(cfg, &p, ell.as_ref())?,
        Command::Sample => sample(cfg, &p, ell.as_ref().expect("resolved"))?,
        Command::Chain => chain(cfg, &p, ell.as_ref())?,
        Command::Asep => {
            let a = cfg.asep.as_ref().expect("resolved");
            let res = asep_tail_check(
                p.n(),
                a.k.expect("resolved"),
                cfg.instance.q.expect("resolved"),
                a.rs.as_deref().expect("resolved"),
                a.enumerate,
            )?;
            Outcome::new(res)
        }
        Command::Burnin => burnin(cfg, &p)?,
        Command::Spatial => spatial(cfg, &p)?,
        Command::Disconnect => disconnect(cfg, &p, ell.as_ref())?,
        Command::Blockcheck => {
            let b = cfg.blockcheck.as_ref().expect("resolved");
            let sched = schedule(b.schedule, b.m, p.n())?;
            Outcome::new(block_decomposition_check(&p, ell.as_ref(), &sched, b.rule, &cfg.caps.caps())?)
        }
        Command::Mix => mix(cfg, &p)?,
        Command::Lowerbound => {
            let l = cfg.lowerbound.as_ref().expect("resolved");
            let settings = LowerBoundSettings {
                max_probability: l.max_probability.expect("resolved"),
                min_stationary: l.min_stationary.expect("resolved"),
                reference_window: l.reference_ell.map(|e| LocalizationVector::constant(p.n(), e)),
                prune: l.prune,
            };
            let res = lower_bound_experiment(
                &p,
                l.eta.expect("resolved"),
                cfg.budget.replicas.expect("resolved"),
                &settings,
                &cfg.caps.caps(),
                cfg.seed,
                cfg.jobs,
            )?;
            Outcome::new(res)
        }
    };
    out.result.param("master_seed", cfg.seed);
    for v in &out.result.verdicts {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        out.summary.push(format!("{tag} {}: {} ({})", v.name, v.detail, v.bound));
    }
    Ok(out)
}

fn exact(cfg: &RunConfig, p: &BiasMatrix, ell: Option<&LocalizationVector>) -> Result<Outcome> {
    let caps = cfg.caps.caps();
    let mu = enumerate_stationary(p, ell, &caps)?;
    let z = mu.log_z.exp();
    let mut res = ExperimentResult::new("exact", fingerprint(p, ell));
    res.param("n", p.n())
        .param("epsilon", p.epsilon())
        .param("states", mu.len())
        .param("log_z", mu.log_z)
        .param("z", z);
    let mut out = Outcome::new(res);
    out.summary.push(format!("Z = {z} (log Z = {}), {} states", mu.log_z, mu.len()));
    if cfg.exact.as_ref().expect("resolved").gap {
        let (k, chain_mu) = build_transition_matrix(p, ell, &caps)?;
        let gap = spectral_gap(&k, &chain_mu.probs)?;
        out.result.param("spectral_gap", gap);
        out.summary.push(format!("spectral gap = {gap}"));
    }
    let mut csv = Vec::new();
    mu.write_csv(&mut csv, one_line)?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    out.summary.extend(csv.lines().map(str::to_string));
    out.files.push(("distribution.csv".into(), csv));
    Ok(out)
}

fn sample(cfg: &RunConfig, p: &BiasMatrix, ell: &LocalizationVector) -> Result<Outcome> {
    let params = cfg.sample.as_ref().expect("resolved");
    let count = cfg.budget.replicas.expect("resolved");
    let dp = BandDp::new(p, ell, &cfg.caps.caps())?.with_pruning(params.prune);
    let log_z = dp.log_partition()?;
    let sampler = BandSampler::from_dp(dp)?;
    let draws: Vec<atshuffle::Result<Permutation>> =
        par_map(count, cfg.jobs, |r| sampler.sample(&mut stream_rng(cfg.seed, "sample", r as u64)));
    let draws: Vec<Permutation> = draws.into_iter().collect::<atshuffle::Result<_>>()?;

    let mut res = ExperimentResult::new("sample", fingerprint(p, Some(ell)));
    res.param("n", p.n())
        .param("epsilon", p.epsilon())
        .param("samples", count)
        .param("prune", params.prune)
        .param("log_z", log_z);
    let dmax = draws.iter().map(Permutation::max_displacement).max().unwrap_or(0);
    let mut s = Series::new("max-displacement-frequency", "d");
    for d in 0..=dmax {
        let hits = draws.iter().filter(|x| x.max_displacement() == d).count();
        s.points.push(SeriesPoint {
            x: d as f64,
            estimate: hits as f64 / count as f64,
            stderr: 0.0,
            replicas: count,
        });
    }
    res.series.push(s);
    let mut csv = String::from("sample,permutation\n");
    for (i, x) in draws.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", one_line(x)));
    }
    let mut out = Outcome::new(res);
    out.summary.push(format!("{count} draws, log Z = {log_z}, largest displacement {dmax}"));
    out.files.push(("samples.csv".into(), csv));
    Ok(out)
}

fn chain(cfg: &RunConfig, p: &BiasMatrix, ell: Option<&LocalizationVector>) -> Result<Outcome> {
    let c = cfg.chain.as_ref().expect("resolved");
    let n = p.n();
    let steps = cfg.budget.steps.expect("resolved");
    let every = c.every.expect("resolved");
    let ell = if c.restricted { ell } else { None };
    let start = match c.start {
        StartSpec::Identity => Permutation::identity(n),
        StartSpec::Reversal => Permutation::reversal(n),
        StartSpec::Random => Permutation::random(n, &mut stream_rng(cfg.seed, "chain-start", 0)),
    };
    let ks = c.tracked.clone().unwrap_or_default();
    let mut draws = DrawStream::from_rng(n, stream_rng(cfg.seed, "chain", 0));
    let mut coupling = match c.audit_q {
        Some(q) => Some(DominationCoupling::new(p, ell, q, start.clone(), projected_family(&start, &ks))?),
        None => None,
    };
    let mut sigma = start;
    let mut log = Vec::new();
    let mut s = Series::new("max-displacement", "t");
    let mut violation: Option<String> = None;
    let mut record = |t: u64, sigma: &Permutation, log: &mut Vec<u8>| -> Result<()> {
        write_record(log, &CheckpointRecord::capture(t, sigma, &ks))?;
        s.points.push(SeriesPoint::exact(t as f64, sigma.max_displacement() as f64));
        Ok(())
    };
    record(0, &sigma, &mut log)?;
    for t in 1..=steps {
        let d = draws.next().expect("draw streams are infinite");
        match coupling.as_mut() {
            Some(cp) => {
                if let Err(e) = cp.step(&d) {
                    violation = Some(e.to_string());
                    sigma = cp.sigma.clone();
                    record(t, &sigma, &mut log)?;
                    break;
                }
            }
            None => {
                match ell {
                    Some(e) => {
                        restricted_at_step_in_place(&mut sigma, p, e, &d);
                    }
                    None => {
                        at_step_in_place(&mut sigma, p, &d);
                    }
                };
            }
        }
        if t % every == 0 || t == steps {
            if let Some(cp) = coupling.as_ref() {
                if let Err(e) = cp.audit() {
                    violation = Some(format!("step {t}: {e}"));
                }
                sigma = cp.sigma.clone();
            }
            record(t, &sigma, &mut log)?;
            if violation.is_some() {
                break;
            }
        }
    }
    let mut res = ExperimentResult::new("chain", fingerprint(p, ell));
    res.param("n", n)
        .param("epsilon", p.epsilon())
        .param("steps", steps)
        .param("every", every)
        .param("start", c.start)
        .param("restricted", c.restricted);
    if let (Some(q), Some(cp)) = (c.audit_q, coupling.as_ref()) {
        res.param("audit_q", q).param("tracked", &ks).param("rejections", cp.rejections);
        res.verdicts.push(Verdict::new(
            "domination",
            format!("projections stay left of the exclusion processes at q = {q}"),
            violation.is_none(),
            violation.clone().unwrap_or_else(|| "no violations".into()),
        ));
    }
    res.series.push(s);
    let mut out = Outcome::new(res);
    out.summary.push(format!("final state max displacement {}", sigma.max_displacement()));
    out.files.push(("trajectory.jsonl".into(), String::from_utf8(log).expect("json is utf-8")));
    Ok(out)
}

fn burnin(cfg: &RunConfig, p: &BiasMatrix) -> Result<Outcome> {
    let b = cfg.burnin.as_ref().expect("resolved");
    let thresholds = b.thresholds.expect("resolved");
    let replicas = cfg.budget.replicas.expect("resolved");
    let start = start_state(b.start);
    let res = match &b.ns {
        Some(ns) => burn_in_scaling(ns, cfg.instance.q.expect("resolved"), &start, replicas, &thresholds, cfg.seed, cfg.jobs)?,
        None => {
            let n2 = (p.n() * p.n()) as f64;
            let cps: Vec<u64> = b
                .checkpoints_per_n2
                .as_deref()
                .expect("resolved")
                .iter()
                .map(|c| (c * n2).round() as u64)
                .collect();
            burn_in_profile(p, &start, &cps, replicas, &thresholds, cfg.seed, cfg.jobs)?
        }
    };
    Ok(Outcome::new(res))
}

fn spatial(cfg: &RunConfig, p: &BiasMatrix) -> Result<Outcome> {
    let s = cfg.spatial.as_ref().expect("resolved");
    let (n, ell) = (p.n(), cfg.instance.ell.expect("resolved"));
    let window = LocalizationVector::constant(n, ell);
    let (eta, eta_bar) = extreme_left_boundaries(n, ell, s.i.expect("resolved"))?;
    let targets = SpatialTargets {
        tv_below: s.tv_below.expect("resolved"),
        by_r: s.by_r.expect("resolved"),
        min_r_squared: s.min_r_squared.expect("resolved"),
        noise_floor: 1e-10,
    };
    let mode = match s.mode {
        ModeSpec::Coupling => SpatialMode::Coupling {
            pairs: cfg.budget.replicas.expect("resolved"),
        },
        _ => SpatialMode::Exact,
    };
    let mut rng = stream_rng(cfg.seed, "spatial", 0);
    let res = spatial_decay_curve(
        p,
        &window,
        &eta,
        &eta_bar,
        s.rs.as_deref().expect("resolved"),
        mode,
        &targets,
        &cfg.caps.caps(),
        &mut rng,
    )?;
    Ok(Outcome::new(res))
}

fn disconnect(cfg: &RunConfig, p: &BiasMatrix, ell: Option<&LocalizationVector>) -> Result<Outcome> {
    let d = cfg.disconnect.as_ref().expect("resolved");
    let boundary = if d.left.is_empty() && d.right.is_empty() {
        None
    } else {
        Some(BoundaryAssignment::new(p.n(), d.left.clone(), d.right.clone()).context("disconnect boundary")?)
    };
    let mode = match d.mode {
        ModeSpec::Band => MeasureMode::Band { prune: None },
        ModeSpec::Sampled => MeasureMode::Sampled {
            samples: cfg.budget.replicas.expect("resolved"),
        },
        _ => MeasureMode::Exact,
    };
    let mut rng = stream_rng(cfg.seed, "disconnect", 0);
    let res = disconnect_probability(p, ell, boundary.as_ref(), &d.ks, mode, &cfg.caps.caps(), &mut rng)?;
    Ok(Outcome::new(res))
}

fn mix(cfg: &RunConfig, p: &BiasMatrix) -> Result<Outcome> {
    let m = cfg.mix.as_ref().expect("resolved");
    let delta = m.delta.expect("resolved");
    let replicas = cfg.budget.replicas;
    let res = match m.method {
        MixMethod::Exact => mixing_exact(m.ns.as_deref().expect("resolved"), family(cfg), delta, &cfg.caps.caps())?,
        MixMethod::Coupling => asep_coupling_scaling(
            m.ns.as_deref().expect("resolved"),
            cfg.instance.q.expect("resolved"),
            replicas.expect("resolved"),
            m.horizon_per_n2.expect("resolved"),
            (m.slope.expect("resolved"), m.slope_tolerance.expect("resolved")),
            cfg.seed,
            cfg.jobs,
        )?,
        MixMethod::Statistic => statistic_scaling(
            m.ns.as_deref().expect("resolved"),
            family(cfg),
            delta,
            replicas.expect("resolved"),
            m.grid.expect("resolved"),
            m.horizon_per_n2.expect("resolved"),
            cfg.seed,
            cfg.jobs,
        )?,
        MixMethod::Block => {
            let (n, ell) = (p.n(), cfg.instance.ell.expect("resolved"));
            let window = LocalizationVector::constant(n, ell);
            let (a, b) = (Permutation::identity(n), block_reversal(n, ell));
            block_chain_mixing(
                p,
                &window,
                schedule(m.schedule, m.m, n)?,
                m.rule,
                HeatBathOptions {
                    prune: m.prune,
                    guard: m.guard.expect("resolved"),
                },
                &cfg.caps.caps(),
                (&a, &b),
                replicas.expect("resolved"),
                cfg.budget.steps.expect("resolved"),
                &CoalescenceTarget {
                    within_steps: m.within_steps.expect("resolved"),
                    min_fraction: m.min_fraction.expect("resolved"),
                },
                cfg.seed,
                cfg.jobs,
            )?
        }
    };
    let mut out = Outcome::new(res);
    if m.method == MixMethod::Exact {
        if let Some(s) = out.result.series_named("t-mix") {
            let lines: Vec<String> = s.points.iter().map(|pt| format!("n = {}: T_mix = {}", pt.x, pt.estimate)).collect();
            out.summary.extend(lines);
        }
    }
    Ok(out)
}
