//! Run configuration: a TOML file, overridden by command-line flags, then
//! validated and expanded so that every default is explicit.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use atshuffle::chains::SelectionRule;
use atshuffle::experiments::BurnInThresholds;
use atshuffle::measure::{Caps, DEFAULT_ENUM_CAP, DEFAULT_REGION_CAP, DEFAULT_WINDOW_CAP};
use atshuffle::perm::{epsilon_for_q, q_for_epsilon, LocalizationFile};
use atshuffle::{BiasMatrix, LocalizationVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seeds are echoed into TOML, whose integers are signed 64-bit.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exact,
    Sample,
    Chain,
    Asep,
    Burnin,
    Spatial,
    Disconnect,
    Blockcheck,
    Mix,
    Lowerbound,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Sample => "sample",
            Command::Chain => "chain",
            Command::Asep => "asep",
            Command::Burnin => "burnin",
            Command::Spatial => "spatial",
            Command::Disconnect => "disconnect",
            Command::Blockcheck => "blockcheck",
            Command::Mix => "mix",
            Command::Lowerbound => "lowerbound",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    ConstantQ,
    TotallyAsymmetric,
    RandomEps,
    MonotoneEps,
    File,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSpec {
    pub n: Option<usize>,
    pub family: Family,
    /// Constant bias; give either this or `epsilon`.
    pub q: Option<f64>,
    pub epsilon: Option<f64>,
    /// Bias matrix file, for `family = "file"`.
    pub file: Option<PathBuf>,
    /// Seed of the random families.
    pub instance_seed: Option<u64>,
    /// Constant localization window.
    pub ell: Option<usize>,
    /// Per-particle windows, as written by the library's localization file format.
    pub ell_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub steps: Option<u64>,
    pub replicas: Option<usize>,
    /// Recorded in the manifest; a run that takes longer is flagged.
    pub wall_clock_secs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsConfig {
    pub enumeration: usize,
    pub window: usize,
    pub region_states: usize,
}

impl Default for CapsConfig {
    fn default() -> Self {
        Self {
            enumeration: DEFAULT_ENUM_CAP,
            window: DEFAULT_WINDOW_CAP,
            region_states: DEFAULT_REGION_CAP,
        }
    }
}

impl CapsConfig {
    pub fn caps(&self) -> Caps {
        Caps {
            enumeration: self.enumeration,
            window: self.window,
            region_states: self.region_states,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartSpec {
    Identity,
    #[default]
    Reversal,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Exact,
    Band,
    Sampled,
    Coupling,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleSpec {
    #[default]
    WestEast,
    Interleaved,
    Single,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixMethod {
    #[default]
    Exact,
    Coupling,
    Statistic,
    Block,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactParams {
    /// Also compute the spectral gap of the (restricted) chain.
    pub gap: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleParams {
    /// Log-weight pruning threshold of the band DP, in nats.
    pub prune: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    pub start: StartSpec,
    /// Checkpoint interval in steps.
    pub every: Option<u64>,
    /// Run the chain restricted to the instance window.
    pub restricted: bool,
    /// Couple with a dominating exclusion-process family at this bias and
    /// audit the order at every checkpoint.
    pub audit_q: Option<f64>,
    /// Particle counts of the tracked exclusion processes.
    pub tracked: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsepParams {
    pub k: Option<usize>,
    pub rs: Option<Vec<usize>>,
    /// Enumerate the configurations instead of the sequential recursion.
    pub enumerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurninParams {
    /// Several sizes run the scaling comparison at constant `q`.
    pub ns: Option<Vec<usize>>,
    pub start: StartSpec,
    /// Checkpoints in units of `n²` steps, single-size runs only.
    pub checkpoints_per_n2: Option<Vec<f64>>,
    pub thresholds: Option<BurnInThresholds>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialParams {
    /// Number of pinned leading positions.
    pub i: Option<usize>,
    pub rs: Option<Vec<usize>>,
    pub mode: ModeSpec,
    pub tv_below: Option<f64>,
    pub by_r: Option<usize>,
    pub min_r_squared: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisconnectParams {
    /// Positions to test; all valid positions when empty.
    pub ks: Vec<usize>,
    pub mode: ModeSpec,
    /// Particles pinned to the leading and trailing positions.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockcheckParams {
    pub schedule: ScheduleSpec,
    /// Stretch length of the interleaved schedule.
    pub m: Option<usize>,
    pub rule: SelectionRule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixParams {
    pub method: MixMethod,
    pub ns: Option<Vec<usize>>,
    pub delta: Option<f64>,
    /// Coupling and statistic runs stop at this many `n²` steps.
    pub horizon_per_n2: Option<f64>,
    pub slope: Option<f64>,
    pub slope_tolerance: Option<f64>,
    /// Number of time points of the statistic method.
    pub grid: Option<usize>,
    pub schedule: ScheduleSpec,
    pub m: Option<usize>,
    pub rule: SelectionRule,
    pub prune: Option<f64>,
    pub guard: Option<f64>,
    pub within_steps: Option<u64>,
    pub min_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowerboundParams {
    /// The event is tested at `(1 − eta) n²` steps.
    pub eta: Option<f64>,
    pub max_probability: Option<f64>,
    pub min_stationary: Option<f64>,
    /// Window of the exact stationary cross-check.
    pub reference_ell: Option<usize>,
    pub prune: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub out: PathBuf,
    pub caps: CapsConfig,
    pub instance: InstanceSpec,
    pub budget: Budget,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asep: Option<AsepParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burnin: Option<BurninParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disconnect: Option<DisconnectParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blockcheck: Option<BlockcheckParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowerbound: Option<LowerboundParams>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            jobs: 0,
            out: PathBuf::from("atlab-out"),
            caps: CapsConfig::default(),
            instance: InstanceSpec::default(),
            budget: Budget::default(),
            exact: None,
            sample: None,
            chain: None,
            asep: None,
            burnin: None,
            spatial: None,
            disconnect: None,
            blockcheck: None,
            mix: None,
            lowerbound: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub cap_enum: Option<usize>,
    pub cap_window: Option<usize>,
}

/// A configuration problem, reported as a usage error.
#[derive(Debug, thiserror::Error)]
#[error("invalid config: {key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn invalid<T>(key: &str, message: impl Into<String>) -> Result<T> {
    Err(ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
    .into())
}

pub fn parse(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        ConfigError {
            key: "(file)".into(),
            message: e.message().to_string(),
        }
        .into()
    })
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text)
}

/// Applies the overrides, fixes the command and fills every default.
pub fn resolve(mut cfg: RunConfig, command: Option<Command>, ov: &Overrides) -> Result<RunConfig> {
    let command = match (command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return invalid("command", format!("file says `{}` but `{}` was requested", b.name(), a.name()))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return invalid("command", "no command given on the command line or in the file"),
    };
    cfg.command = Some(command);
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(j) = ov.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
    }
    if let Some(c) = ov.cap_enum {
        cfg.caps.enumeration = c;
    }
    if let Some(c) = ov.cap_window {
        cfg.caps.window = c;
    }
    if cfg.seed > MAX_SEED {
        return invalid("seed", format!("must be at most {MAX_SEED}"));
    }
    if cfg.caps.enumeration == 0 || cfg.caps.window == 0 || cfg.caps.region_states == 0 {
        return invalid("caps", "every cap must be positive");
    }
    if let Some(w) = cfg.budget.wall_clock_secs {
        if !(w > 0.0) {
            return invalid("budget.wall_clock_secs", "must be positive");
        }
    }
    resolve_instance(&mut cfg.instance, cfg.seed)?;

    // only the active command's section survives, with its defaults expanded
    macro_rules! keep_only {
        ($($field:ident => $cmd:ident),* $(,)?) => {
            $(
                if command == Command::$cmd {
                    cfg.$field.get_or_insert_with(Default::default);
                } else if cfg.$field.is_some() {
                    return invalid(stringify!($field), format!("section does not apply to `{}`", command.name()));
                }
            )*
        };
    }
    keep_only!(
        exact => Exact, sample => Sample, chain => Chain, asep => Asep, burnin => Burnin,
        spatial => Spatial, disconnect => Disconnect, blockcheck => Blockcheck, mix => Mix,
        lowerbound => Lowerbound,
    );
    resolve_command(&mut cfg, command)?;
    Ok(cfg)
}

fn resolve_instance(inst: &mut InstanceSpec, seed: u64) -> Result<()> {
    match inst.family {
        Family::ConstantQ => {
            let q = match (inst.q, inst.epsilon) {
                (Some(_), Some(_)) => return invalid("instance.q", "give either q or epsilon, not both"),
                (Some(q), None) => q,
                (None, Some(e)) => {
                    if !(e >= 0.0) {
                        return invalid("instance.epsilon", "must be nonnegative");
                    }
                    q_for_epsilon(e)
                }
                (None, None) => 0.75,
            };
            if !(0.5..=1.0).contains(&q) {
                return invalid("instance.q", format!("{q} is not in [0.5, 1]"));
            }
            inst.q = Some(q);
            inst.epsilon = Some(epsilon_for_q(q)).filter(|e| e.is_finite());
        }
        Family::TotallyAsymmetric => {
            if inst.q.is_some() || inst.epsilon.is_some() {
                return invalid("instance.family", "totally-asymmetric takes neither q nor epsilon");
            }
        }
        Family::RandomEps | Family::MonotoneEps => {
            if inst.q.is_some() {
                return invalid("instance.q", "random families are specified by epsilon");
            }
            let e = *inst.epsilon.get_or_insert(0.5);
            if !(e >= 0.0 && e.is_finite()) {
                return invalid("instance.epsilon", "must be finite and nonnegative");
            }
            let s = *inst.instance_seed.get_or_insert(seed);
            if s > MAX_SEED {
                return invalid("instance.instance_seed", format!("must be at most {MAX_SEED}"));
            }
        }
        Family::File => {
            let Some(path) = &inst.file else {
                return invalid("instance.file", "required when family = \"file\"");
            };
            let p = read_bias(path)?;
            match inst.n {
                Some(n) if n != p.n() => {
                    return invalid("instance.n", format!("{n} differs from the file's n = {}", p.n()))
                }
                _ => inst.n = Some(p.n()),
            }
        }
    }
    if inst.family != Family::File && inst.file.is_some() {
        return invalid("instance.file", "only used with family = \"file\"");
    }
    let n = *inst.n.get_or_insert(6);
    if n == 0 {
        return invalid("instance.n", "must be positive");
    }
    if inst.ell.is_some() && inst.ell_file.is_some() {
        return invalid("instance.ell", "give either ell or ell_file, not both");
    }
    if let Some(path) = &inst.ell_file {
        let ell = read_ell(path)?;
        if ell.n() != n {
            return invalid("instance.ell_file", format!("windows for n = {}, instance has n = {n}", ell.n()));
        }
    }
    Ok(())
}

fn read_bias(path: &Path) -> Result<BiasMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    BiasMatrix::from_json(&text).with_context(|| format!("loading bias matrix {}", path.display()))
}

fn read_ell(path: &Path) -> Result<LocalizationVector> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: LocalizationFile =
        serde_json::from_str(&text).with_context(|| format!("parsing windows {}", path.display()))?;
    Ok(LocalizationVector::try_from(file)?)
}

fn check_unit(key: &str, v: f64, open_low: bool) -> Result<()> {
    let ok = if open_low { v > 0.0 && v < 1.0 } else { (0.0..1.0).contains(&v) };
    if ok {
        Ok(())
    } else {
        invalid(key, format!("{v} is outside the unit interval"))
    }
}

fn check_ns(key: &str, ns: &[usize], min: usize) -> Result<()> {
    if ns.is_empty() {
        return invalid(key, "must not be empty");
    }
    if let Some(&n) = ns.iter().find(|&&n| n < min) {
        return invalid(key, format!("size {n} is below {min}"));
    }
    Ok(())
}

fn resolve_command(cfg: &mut RunConfig, command: Command) -> Result<()> {
    let inst = &cfg.instance;
    let n = inst.n.expect("resolved");
    let ell = inst.ell;
    let has_window = inst.ell.is_some() || inst.ell_file.is_some();
    let budget = &mut cfg.budget;
    match command {
        Command::Exact => {}
        Command::Sample => {
            if !has_window {
                return invalid("instance.ell", "sampling needs a localization window");
            }
            budget.replicas.get_or_insert(1000);
        }
        Command::Chain => {
            let c = cfg.chain.as_mut().expect("kept");
            if n < 2 {
                return invalid("instance.n", "the chain needs n >= 2");
            }
            let steps = *budget.steps.get_or_insert(10 * (n * n) as u64);
            let every = *c.every.get_or_insert((steps / 100).max(1));
            if every == 0 {
                return invalid("chain.every", "must be positive");
            }
            if c.restricted && !has_window {
                return invalid("chain.restricted", "needs instance.ell or instance.ell_file");
            }
            if c.restricted && c.start != StartSpec::Identity {
                return invalid("chain.start", "a restricted chain starts at the identity");
            }
            if c.audit_q.is_some() {
                let ks = c.tracked.get_or_insert_with(|| atshuffle::chains::default_tracked_ks(n));
                if let Some(&k) = ks.iter().find(|&&k| k == 0 || k >= n) {
                    return invalid("chain.tracked", format!("particle count {k} is not in 1..{n}"));
                }
            } else if c.tracked.is_some() {
                return invalid("chain.tracked", "only used together with audit_q");
            }
        }
        Command::Asep => {
            let a = cfg.asep.as_mut().expect("kept");
            if inst.family != Family::ConstantQ {
                return invalid("instance.family", "the exclusion process runs at a constant q");
            }
            let k = *a.k.get_or_insert(n / 2);
            if k > n {
                return invalid("asep.k", format!("{k} particles do not fit on {n} sites"));
            }
            a.rs.get_or_insert_with(|| (1..=n - k).collect());
        }
        Command::Burnin => {
            let b = cfg.burnin.as_mut().expect("kept");
            b.thresholds.get_or_insert(BurnInThresholds::CALIBRATED);
            budget.replicas.get_or_insert(200);
            match &b.ns {
                Some(ns) => {
                    check_ns("burnin.ns", ns, 2)?;
                    if inst.family != Family::ConstantQ {
                        return invalid("instance.family", "the scaling run uses constant q");
                    }
                    if b.checkpoints_per_n2.is_some() {
                        return invalid("burnin.checkpoints_per_n2", "only used for a single size");
                    }
                }
                None => {
                    let cps = b.checkpoints_per_n2.get_or_insert_with(|| vec![0.0, 1.0, 2.0, 4.0, 8.0]);
                    if cps.iter().any(|c| !(*c >= 0.0)) {
                        return invalid("burnin.checkpoints_per_n2", "checkpoints must be nonnegative");
                    }
                }
            }
        }
        Command::Spatial => {
            let s = cfg.spatial.as_mut().expect("kept");
            let Some(ell) = ell else {
                return invalid("instance.ell", "spatial decay needs a constant window ell");
            };
            let i = *s.i.get_or_insert(2 * ell.max(1));
            if i < ell || i >= n {
                return invalid("spatial.i", format!("{i} must lie in [ell, n) = [{ell}, {n})"));
            }
            let rs = s.rs.get_or_insert_with(|| (ell.max(1)..=(12 * ell).max(1)).filter(|r| i + r < n).collect());
            if rs.is_empty() || rs.iter().any(|r| i + r >= n) {
                return invalid("spatial.rs", format!("need nonempty r with i + r < n = {n}"));
            }
            s.tv_below.get_or_insert(0.05);
            s.by_r.get_or_insert(12 * ell);
            s.min_r_squared.get_or_insert(0.9);
            if !matches!(s.mode, ModeSpec::Exact | ModeSpec::Coupling) {
                return invalid("spatial.mode", "must be exact or coupling");
            }
            if s.mode == ModeSpec::Coupling {
                budget.replicas.get_or_insert(2000);
            }
        }
        Command::Disconnect => {
            let d = cfg.disconnect.as_mut().expect("kept");
            if d.mode == ModeSpec::Coupling {
                return invalid("disconnect.mode", "must be exact, band or sampled");
            }
            if d.mode == ModeSpec::Sampled {
                budget.replicas.get_or_insert(10_000);
            }
            if matches!(d.mode, ModeSpec::Band | ModeSpec::Sampled) && !has_window {
                return invalid("disconnect.mode", "band and sampled modes need a localization window");
            }
            if d.left.len() + d.right.len() > n {
                return invalid("disconnect.left", "boundary longer than the instance");
            }
        }
        Command::Blockcheck => {
            let b = cfg.blockcheck.as_mut().expect("kept");
            resolve_schedule("blockcheck", b.schedule, &mut b.m)?;
        }
        Command::Mix => {
            let m = cfg.mix.as_mut().expect("kept");
            let delta = *m.delta.get_or_insert(0.25);
            check_unit("mix.delta", delta, true)?;
            match m.method {
                MixMethod::Exact | MixMethod::Statistic => {
                    if !matches!(inst.family, Family::ConstantQ | Family::TotallyAsymmetric) {
                        return invalid("instance.family", "mixing scans use constant-q or totally-asymmetric");
                    }
                    let ns = m.ns.get_or_insert_with(|| vec![n]);
                    check_ns("mix.ns", ns, 2)?;
                    if m.method == MixMethod::Statistic {
                        budget.replicas.get_or_insert(200);
                        m.grid.get_or_insert(20);
                        m.horizon_per_n2.get_or_insert(4.0);
                    }
                }
                MixMethod::Coupling => {
                    if inst.family != Family::ConstantQ {
                        return invalid("instance.family", "the exclusion coupling uses constant q");
                    }
                    let ns = m.ns.get_or_insert_with(|| vec![64, 128, 256, 512]);
                    check_ns("mix.ns", ns, 2)?;
                    budget.replicas.get_or_insert(100);
                    m.horizon_per_n2.get_or_insert(50.0);
                    m.slope.get_or_insert(2.0);
                    m.slope_tolerance.get_or_insert(0.3);
                }
                MixMethod::Block => {
                    if ell.is_none() {
                        return invalid("instance.ell", "block mixing needs a constant window ell");
                    }
                    if m.ns.is_some() {
                        return invalid("mix.ns", "block mixing runs on the instance size");
                    }
                    resolve_schedule("mix", m.schedule, &mut m.m)?;
                    budget.replicas.get_or_insert(200);
                    budget.steps.get_or_insert(200);
                    m.guard.get_or_insert(15.0);
                    m.within_steps.get_or_insert(50);
                    let f = *m.min_fraction.get_or_insert(0.95);
                    check_unit("mix.min_fraction", f, true)?;
                }
            }
        }
        Command::Lowerbound => {
            let l = cfg.lowerbound.as_mut().expect("kept");
            let eta = *l.eta.get_or_insert(0.5);
            check_unit("lowerbound.eta", eta, true)?;
            l.max_probability.get_or_insert(0.05);
            l.min_stationary.get_or_insert(0.99);
            budget.replicas.get_or_insert(500);
            if n < 2 {
                return invalid("instance.n", "needs n >= 2");
            }
        }
    }
    // defaults were only filled where a budget is consumed
    let method = cfg.mix.as_ref().map(|m| m.method);
    let uses_steps = command == Command::Chain || method == Some(MixMethod::Block);
    let uses_replicas = match command {
        Command::Sample | Command::Burnin | Command::Lowerbound => true,
        Command::Spatial => cfg.spatial.as_ref().is_some_and(|s| s.mode == ModeSpec::Coupling),
        Command::Disconnect => cfg.disconnect.as_ref().is_some_and(|d| d.mode == ModeSpec::Sampled),
        Command::Mix => method != Some(MixMethod::Exact),
        _ => false,
    };
    if !uses_steps && cfg.budget.steps.is_some() {
        return invalid("budget.steps", format!("not used by `{}`", command.name()));
    }
    if !uses_replicas && cfg.budget.replicas.is_some() {
        return invalid("budget.replicas", format!("not used by `{}` in this mode", command.name()));
    }
    if cfg.budget.replicas == Some(0) || cfg.budget.steps == Some(0) {
        return invalid("budget", "steps and replicas must be positive");
    }
    Ok(())
}

fn resolve_schedule(section: &str, schedule: ScheduleSpec, m: &mut Option<usize>) -> Result<()> {
    match schedule {
        ScheduleSpec::Interleaved => {
            if *m.get_or_insert(1) == 0 {
                return invalid(&format!("{section}.m"), "must be positive");
            }
        }
        _ if m.is_some() => return invalid(&format!("{section}.m"), "only used by the interleaved schedule"),
        _ => {}
    }
    Ok(())
}

/// Builds the bias matrix of a resolved instance.
pub fn bias_matrix(inst: &InstanceSpec) -> Result<BiasMatrix> {
    let n = inst.n.expect("resolved");
    let p = match inst.family {
        Family::ConstantQ => BiasMatrix::constant(n, inst.q.expect("resolved"))?,
        Family::TotallyAsymmetric => BiasMatrix::totally_asymmetric(n),
        Family::RandomEps => {
            let mut rng = ChaCha8Rng::seed_from_u64(inst.instance_seed.expect("resolved"));
            BiasMatrix::random_eps(n, inst.epsilon.expect("resolved"), &mut rng)?
        }
        Family::MonotoneEps => {
            let mut rng = ChaCha8Rng::seed_from_u64(inst.instance_seed.expect("resolved"));
            BiasMatrix::monotone_eps(n, inst.epsilon.expect("resolved"), &mut rng)?
        }
        Family::File => read_bias(inst.file.as_deref().expect("resolved"))?,
    };
    Ok(p)
}

/// The localization window of a resolved instance, if any.
pub fn window(inst: &InstanceSpec) -> Result<Option<LocalizationVector>> {
    let n = inst.n.expect("resolved");
    if let Some(ell) = inst.ell {
        return Ok(Some(LocalizationVector::constant(n, ell)));
    }
    inst.ell_file.as_deref().map(read_ell).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolved(text: &str, cmd: Command) -> Result<RunConfig> {
        resolve(parse(text)?, Some(cmd), &Overrides::default())
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse("seed = 1\n[instance]\nn = 3\nbias = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
        let err = parse("frobnicate = true\n").unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
    }

    #[test]
    fn defaults_are_expanded() {
        let cfg = resolved("", Command::Exact).unwrap();
        assert_eq!(cfg.command, Some(Command::Exact));
        assert_eq!(cfg.instance.n, Some(6));
        assert_eq!(cfg.instance.q, Some(0.75));
        assert!(cfg.exact.is_some() && cfg.mix.is_none());
        let echo = toml::to_string(&cfg).unwrap();
        assert_eq!(parse(&echo).unwrap(), cfg);
    }

    #[test]
    fn epsilon_resolves_to_q() {
        let cfg = resolved("[instance]\nepsilon = 0.5\n", Command::Exact).unwrap();
        assert!((cfg.instance.q.unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mismatched_sections_and_commands_are_rejected() {
        let err = resolved("[mix]\ndelta = 0.1\n", Command::Exact).unwrap_err();
        assert!(err.to_string().contains("mix"), "{err}");
        let err = resolved("command = \"mix\"\n", Command::Exact).unwrap_err();
        assert!(err.to_string().contains("command"), "{err}");
        assert!(resolve(RunConfig::default(), None, &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            seed: Some(9),
            cap_enum: Some(5),
            ..Overrides::default()
        };
        let cfg = resolve(parse("seed = 1\n").unwrap(), Some(Command::Exact), &ov).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.caps.enumeration, 5);
        let ov = Overrides {
            seed: Some(u64::MAX),
            ..Overrides::default()
        };
        assert!(resolve(RunConfig::default(), Some(Command::Exact), &ov).is_err());
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = resolved("[instance]\nq = 0.3\n", Command::Exact).unwrap_err();
        assert!(err.to_string().contains("instance.q"), "{err}");
        let err = resolved("", Command::Spatial).unwrap_err();
        assert!(err.to_string().contains("instance.ell"), "{err}");
        let err = resolved("[mix]\ndelta = 1.5\n", Command::Mix).unwrap_err();
        assert!(err.to_string().contains("mix.delta"), "{err}");
    }
}
