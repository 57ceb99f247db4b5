//! Config-driven experiment commands.
//!
//! Every command reads one TOML config file; relative paths inside it are
//! resolved against the config file's directory. All randomness comes from
//! seeds in the config, so the same config always produces byte-identical
//! output. Every output starts with a header carrying the SHA-256 of the
//! config file and the seeds it used.
//!
//! ```toml
//! [market]
//! file = "market.json"            # or a [market.generate] table
//!
//! [equilibrium]
//! tol = 1e-12
//!
//! [dynamics]
//! mode = "async"                  # "sync" | "async"
//! steps = 200                     # or: epochs = 40
//! p0 = "midpoint"                 # or [1.0, 2.0, ...] or { seed = 3 }
//! schedule = { kind = "random", window = 4, include_prob = 0.4, seed = 1 }
//!
//! [beliefs]
//! kind = "random"                 # "level" | "levels" | "file" | "random"
//! max_depth = 3
//! seed = 5
//!
//! [contraction]
//! pairs = 500
//! seed = 7
//! beliefs = [{ kind = "level", k = 2 }]
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    decay_ratios, estimate_contraction, fit_decay, hex, market_hash, solve_equilibrium,
    tatonnement_oracle, thompson, AnalysisReport, DecayUnit, EquilibriumResult, LabeledContraction,
    LabeledDecay,
};
use crate::beliefs::{brl_update, BeliefProfile, ProfileSpec, DEFAULT_MAX_DEPTH};
use crate::best_response::best_response_all;
use crate::dynamics::{
    format_float, run, FixedProfile, Horizon, ProfileSource, RandomProfiles, Schedule, Trajectory,
};
use crate::error::Error;
use crate::generate::MarketGenerator;
use crate::market::{Market, PriceVector};

pub const TOOL: &str = "fisher-brl";

/// Command failures, each with its own process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or invalid config / input files.
    Parse(String),
    /// Inputs outside a mathematical domain (bad ρ, p0 outside the box, ...).
    Domain(String),
    /// A solver or oracle failed to converge.
    Solver(String),
    /// A checked property did not hold (oracle disagreement, ratio ≥ 1, ...).
    Property(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Property(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "config error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Property(m) => write!(f, "property violation: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) => CliError::Parse(msg),
            Error::Solver(_) | Error::Oracle(_) => CliError::Solver(msg),
            Error::InsufficientData(_) => CliError::Property(msg),
            Error::Domain(_)
            | Error::Index { .. }
            | Error::Argument(_)
            | Error::InvalidMarket(_)
            | Error::OutOfBox { .. } => CliError::Domain(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSource {
    pub file: Option<PathBuf>,
    pub generate: Option<MarketGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    pub tol: f64,
    pub tatonnement_step: f64,
    pub tatonnement_tol: f64,
    /// Largest accepted Thompson distance between the two oracles.
    pub agreement_tol: f64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            tatonnement_step: 0.1,
            tatonnement_tol: 1e-11,
            agreement_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sync,
    Async,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Full,
    RoundRobin,
    Random {
        window: usize,
        #[serde(default = "half")]
        include_prob: f64,
        seed: u64,
    },
    Explicit {
        sets: Vec<Vec<usize>>,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPrices {
    Named(String),
    Explicit(Vec<f64>),
    Random { seed: u64 },
}

impl Default for InitialPrices {
    fn default() -> Self {
        InitialPrices::Named("midpoint".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub mode: Mode,
    pub steps: Option<usize>,
    pub epochs: Option<usize>,
    #[serde(default)]
    pub p0: InitialPrices,
    pub schedule: Option<ScheduleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BeliefSpec {
    /// Every seller reasons at level `k`.
    Level { k: usize },
    /// Seller `j` reasons at level `levels[j]`.
    Levels { levels: Vec<usize> },
    /// A JSON profile file.
    File { path: PathBuf },
    /// Fresh random trees every step (a single draw where one profile is
    /// needed).
    Random {
        max_depth: usize,
        seed: u64,
        #[serde(default = "half")]
        respond_prob: f64,
    },
}

impl BeliefSpec {
    fn label(&self) -> String {
        match self {
            BeliefSpec::Level { k } => format!("level-{k}"),
            BeliefSpec::Levels { levels } => format!(
                "levels-{}",
                levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-")
            ),
            BeliefSpec::File { path } => format!("file:{}", path.display()),
            BeliefSpec::Random { max_depth, seed, .. } => format!("random-depth{max_depth}-seed{seed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    pub pairs: usize,
    pub seed: u64,
    pub identity_control: bool,
    /// Allowed excess of a belief-based ratio over the best-response ratio.
    pub slack: f64,
    pub beliefs: Vec<BeliefSpec>,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            pairs: 500,
            seed: 0,
            identity_control: true,
            slack: 0.02,
            beliefs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketSource,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    pub dynamics: Option<DynamicsConfig>,
    pub beliefs: Option<BeliefSpec>,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub contraction: ContractionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_max_depth() -> usize {
    DEFAULT_MAX_DEPTH
}

/// A parsed config together with its provenance.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub sha256: String,
}

fn wgs_check(rho: f64, field: &str) -> CliResult<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(CliError::Parse(format!(
            "{field} = {rho} is outside (0, 1): only weak-gross-substitutes CES markets \
             (0 < rho < 1) are supported; complementary goods (rho < 0) are out of scope"
        )))
    }
}

impl LoadedConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> CliResult<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        match (&config.market.file, &config.market.generate) {
            (Some(_), None) => {}
            (None, Some(g)) => wgs_check(g.rho, "market.generate.rho")?,
            _ => {
                return Err(CliError::Parse(
                    "[market] needs exactly one of `file` or `generate`".into(),
                ))
            }
        }
        if let Some(d) = &config.dynamics {
            if d.steps.is_some() == d.epochs.is_some() {
                return Err(CliError::Parse(
                    "[dynamics] needs exactly one of `steps` or `epochs`".into(),
                ));
            }
            if let InitialPrices::Named(name) = &d.p0 {
                if name != "midpoint" {
                    return Err(CliError::Parse(format!(
                        "dynamics.p0 = {name:?}: expected \"midpoint\", a price list or {{ seed = .. }}"
                    )));
                }
            }
        }
        let e = &config.equilibrium;
        for (name, v) in [
            ("equilibrium.tol", e.tol),
            ("equilibrium.tatonnement_tol", e.tatonnement_tol),
            ("equilibrium.agreement_tol", e.agreement_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Parse(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            config,
            base_dir: base_dir.to_path_buf(),
            sha256: hex(&Sha256::digest(text.as_bytes())),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
            .map_err(|e| match e {
                CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Every seed the config uses, keyed by where it appears.
    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let c = &self.config;
        let mut seeds = BTreeMap::new();
        if let Some(g) = &c.market.generate {
            seeds.insert("market.generate".into(), g.seed);
        }
        if let Some(d) = &c.dynamics {
            if let InitialPrices::Random { seed } = d.p0 {
                seeds.insert("dynamics.p0".into(), seed);
            }
            if let Some(ScheduleSpec::Random { seed, .. }) = d.schedule {
                seeds.insert("dynamics.schedule".into(), seed);
            }
        }
        if let Some(BeliefSpec::Random { seed, .. }) = c.beliefs {
            seeds.insert("beliefs".into(), seed);
        }
        seeds.insert("contraction".into(), c.contraction.seed);
        for (i, b) in c.contraction.beliefs.iter().enumerate() {
            if let BeliefSpec::Random { seed, .. } = b {
                seeds.insert(format!("contraction.beliefs[{i}]"), *seed);
            }
        }
        seeds
    }

    pub fn header(&self, command: &str) -> OutputHeader {
        OutputHeader {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: self.sha256.clone(),
            seeds: self.seeds(),
        }
    }

    pub fn market(&self) -> CliResult<Market> {
        let source = &self.config.market;
        if let Some(g) = &source.generate {
            return Ok(g.generate()?);
        }
        let path = self.resolve(source.file.as_ref().expect("validated at parse time"));
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Parse(format!("cannot read market {}: {e}", path.display())))?;
        let spec: crate::market::MarketSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("market {}: {e}", path.display())))?;
        wgs_check(spec.rho, "market rho")?;
        Ok(Market::try_from(spec)?)
    }

    fn profile_source(&self, spec: &BeliefSpec, n: usize) -> CliResult<Box<dyn ProfileSource>> {
        Ok(match spec {
            BeliefSpec::Random {
                max_depth,
                seed,
                respond_prob,
            } => {
                self.check_depth(*max_depth)?;
                Box::new(RandomProfiles::new(n, *max_depth, *respond_prob, *seed)?)
            }
            other => Box::new(FixedProfile::new(self.fixed_profile(other, n)?)),
        })
    }

    fn check_depth(&self, depth: usize) -> CliResult<()> {
        if depth > self.config.max_depth {
            return Err(CliError::Parse(format!(
                "belief depth {depth} exceeds max_depth = {}",
                self.config.max_depth
            )));
        }
        Ok(())
    }

    fn fixed_profile(&self, spec: &BeliefSpec, n: usize) -> CliResult<BeliefProfile> {
        let profile = match spec {
            BeliefSpec::Level { k } => {
                self.check_depth(*k)?;
                BeliefProfile::uniform_level(*k, n)?
            }
            BeliefSpec::Levels { levels } => {
                if levels.len() != n {
                    return Err(CliError::Parse(format!(
                        "beliefs.levels has {} entries for {n} sellers",
                        levels.len()
                    )));
                }
                self.check_depth(levels.iter().copied().max().unwrap_or(0))?;
                BeliefProfile::levels(levels)?
            }
            BeliefSpec::File { path } => {
                let path = self.resolve(path);
                let text = fs::read_to_string(&path).map_err(|e| {
                    CliError::Parse(format!("cannot read belief file {}: {e}", path.display()))
                })?;
                let spec: ProfileSpec = serde_json::from_str(&text)
                    .map_err(|e| CliError::Parse(format!("belief file {}: {e}", path.display())))?;
                if spec.sellers.len() != n {
                    return Err(CliError::Parse(format!(
                        "belief file {} describes {} sellers, market has {n}",
                        path.display(),
                        spec.sellers.len()
                    )));
                }
                spec.build(self.config.max_depth)?
            }
            BeliefSpec::Random { .. } => {
                let mut src = self.profile_source(spec, n)?;
                let p = PriceVector::uniform(n, 1.0)?;
                return Ok((*src.profile(1, &p)?).clone());
            }
        };
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
}

impl OutputHeader {
    fn comment_lines(&self) -> Vec<String> {
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        vec![
            format!("{} {} {}", self.tool, self.version, self.command),
            format!("config_sha256={}", self.config_sha256),
            format!("seeds: {}", seeds.join(" ")),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub prices: PriceVector,
    pub clearing_residual: f64,
    pub iterations: usize,
    /// Thompson distance to the fixed-point equilibrium.
    pub thompson_gap: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub header: OutputHeader,
    pub report: AnalysisReport,
    pub iterations: usize,
    pub tatonnement: OracleCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub header: OutputHeader,
    pub market_hash: String,
    pub pairs: usize,
    pub slack: f64,
    pub best_response: LabeledContraction,
    pub identity: Option<LabeledContraction>,
    pub beliefs: Vec<LabeledContraction>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub header: OutputHeader,
    pub report: AnalysisReport,
    pub steps: usize,
    pub epochs: usize,
    pub final_distance: f64,
    pub max_ratio: Option<f64>,
}

/// Output of one command: the bytes to write and, for failed checks, the
/// error to exit with after writing.
#[derive(Debug)]
pub struct CommandOutput {
    pub bytes: Vec<u8>,
    pub failure: Option<CliError>,
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports always serialise");
    bytes.push(b'\n');
    bytes
}

fn equilibrium_for(cfg: &LoadedConfig, market: &Market) -> CliResult<EquilibriumResult> {
    Ok(solve_equilibrium(market, cfg.config.equilibrium.tol)?)
}

/// `equilibrium`: fixed-point equilibrium plus the tâtonnement cross-check.
pub fn cmd_equilibrium(cfg: &LoadedConfig) -> CliResult<CommandOutput> {
    let market = cfg.market()?;
    let eq_cfg = &cfg.config.equilibrium;
    let eq = equilibrium_for(cfg, &market)?;
    let tat = tatonnement_oracle(&market, eq_cfg.tatonnement_step, eq_cfg.tatonnement_tol)?;
    let gap = thompson(&tat.prices, &eq.prices)?;
    let agree = gap <= eq_cfg.agreement_tol;
    let report = EquilibriumReport {
        header: cfg.header("equilibrium"),
        report: AnalysisReport::new(&market, &eq),
        iterations: eq.iterations,
        tatonnement: OracleCheck {
            prices: tat.prices,
            clearing_residual: tat.clearing_residual,
            iterations: tat.iterations,
            thompson_gap: gap,
            agree,
        },
    };
    let failure = (!agree).then(|| {
        CliError::Property(format!(
            "fixed-point and tatonnement equilibria differ by {gap:e} > {:e}",
            eq_cfg.agreement_tol
        ))
    });
    Ok(CommandOutput {
        bytes: to_json(&report),
        failure,
    })
}

fn initial_prices(spec: &InitialPrices, market: &Market) -> CliResult<PriceVector> {
    let n = market.num_goods();
    let bounds = market.price_bounds();
    Ok(match spec {
        InitialPrices::Named(_) => PriceVector::uniform(n, bounds.log_midpoint())?,
        InitialPrices::Explicit(p) => PriceVector::new(p.clone())?,
        InitialPrices::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (lo, hi) = (bounds.p_min.ln(), bounds.p_max.ln());
            PriceVector::new(
                (0..n)
                    .map(|_| bounds.clamp((lo + rng.gen::<f64>() * (hi - lo)).exp()))
                    .collect(),
            )?
        }
    })
}

fn schedule_for(spec: Option<&ScheduleSpec>, mode: Mode, n: usize) -> CliResult<Schedule> {
    Ok(match (mode, spec) {
        (Mode::Sync, None | Some(ScheduleSpec::Full)) => Schedule::full(n),
        (Mode::Sync, Some(_)) => {
            return Err(CliError::Parse(
                "dynamics.mode = \"sync\" updates every seller; drop `schedule` or use mode = \"async\"".into(),
            ))
        }
        (Mode::Async, None | Some(ScheduleSpec::RoundRobin)) => Schedule::round_robin(n),
        (Mode::Async, Some(ScheduleSpec::Full)) => Schedule::full(n),
        (
            Mode::Async,
            Some(ScheduleSpec::Random {
                window,
                include_prob,
                seed,
            }),
        ) => Schedule::random_fair(n, *window, *include_prob, *seed)?,
        (Mode::Async, Some(ScheduleSpec::Explicit { sets })) => {
            let mut masks = Vec::with_capacity(sets.len());
            for set in sets {
                let mut mask = vec![false; n];
                for &j in set {
                    if j >= n {
                        return Err(CliError::Parse(format!(
                            "schedule names seller {j}, market has {n}"
                        )));
                    }
                    mask[j] = true;
                }
                masks.push(mask);
            }
            Schedule::explicit(n, masks)?
        }
    })
}

struct Simulation {
    market: Market,
    equilibrium: EquilibriumResult,
    trajectory: Trajectory,
    mode: Mode,
    beliefs: BeliefSpec,
}

fn simulate(cfg: &LoadedConfig) -> CliResult<Simulation> {
    let market = cfg.market()?;
    let n = market.num_goods();
    let dyn_cfg = cfg
        .config
        .dynamics
        .as_ref()
        .ok_or_else(|| CliError::Parse("simulate needs a [dynamics] table".into()))?;
    let beliefs = cfg.config.beliefs.clone().unwrap_or(BeliefSpec::Level { k: 1 });
    let mut source = cfg.profile_source(&beliefs, n)?;
    let mut schedule = schedule_for(dyn_cfg.schedule.as_ref(), dyn_cfg.mode, n)?;
    let p0 = initial_prices(&dyn_cfg.p0, &market)?;
    let horizon = match (dyn_cfg.steps, dyn_cfg.epochs) {
        (Some(t), _) => Horizon::Steps(t),
        (None, Some(e)) => Horizon::Epochs(e),
        (None, None) => unreachable!("validated at parse time"),
    };
    let equilibrium = equilibrium_for(cfg, &market)?;
    let trajectory = run(&market, &mut schedule, source.as_mut(), &p0, horizon)?;
    Ok(Simulation {
        market,
        equilibrium,
        trajectory,
        mode: dyn_cfg.mode,
        beliefs,
    })
}

impl Simulation {
    fn unit(&self) -> DecayUnit {
        match self.mode {
            Mode::Sync => DecayUnit::Steps,
            Mode::Async => DecayUnit::Epochs,
        }
    }
}

/// `simulate`: runs the dynamics and exports the trajectory as CSV with a
/// fitted decay rate in the preamble.
pub fn cmd_simulate(cfg: &LoadedConfig) -> CliResult<CommandOutput> {
    let sim = simulate(cfg)?;
    let p_star = &sim.equilibrium.prices;
    let unit = sim.unit();
    let mut preamble = cfg.header("simulate").comment_lines();
    preamble.push(format!("market_sha256={}", market_hash(&sim.market)));
    preamble.push(format!(
        "p_star={}",
        p_star.iter().map(|p| format_float(*p)).collect::<Vec<_>>().join(" ")
    ));
    match fit_decay(&sim.trajectory, p_star, unit) {
        Ok(fit) => preamble.push(format!(
            "decay_rate={} fit_residual={} unit={} points={}",
            format_float(fit.rate),
            format_float(fit.residual),
            unit_name(unit),
            fit.points
        )),
        Err(Error::InsufficientData(msg)) => preamble.push(format!("decay_rate=none ({msg})")),
        Err(e) => return Err(e.into()),
    }
    let mut bytes = Vec::new();
    sim.trajectory
        .write_csv(&mut bytes, &sim.market, Some(p_star), &preamble)?;
    Ok(CommandOutput {
        bytes,
        failure: None,
    })
}

fn unit_name(unit: DecayUnit) -> &'static str {
    match unit {
        DecayUnit::Steps => "steps",
        DecayUnit::Epochs => "epochs",
    }
}

/// The numbers behind `simulate`, for programmatic use.
pub fn simulate_summary(cfg: &LoadedConfig) -> CliResult<SimulationSummary> {
    let sim = simulate(cfg)?;
    let p_star = &sim.equilibrium.prices;
    let distances = match sim.mode {
        Mode::Sync => sim.trajectory.distances(p_star)?,
        Mode::Async => sim.trajectory.epoch_distances(p_star)?,
    };
    let mut report = AnalysisReport::new(&sim.market, &sim.equilibrium);
    match fit_decay(&sim.trajectory, p_star, sim.unit()) {
        Ok(fit) => report.decay.push(LabeledDecay {
            label: sim.beliefs.label(),
            unit: sim.unit(),
            fit,
        }),
        Err(Error::InsufficientData(_)) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(SimulationSummary {
        header: cfg.header("simulate"),
        report,
        steps: sim.trajectory.len() - 1,
        epochs: sim.trajectory.epoch_ends.len(),
        final_distance: thompson(sim.trajectory.last(), p_star)?,
        max_ratio: decay_ratios(&distances).into_iter().reduce(f64::max),
    })
}

/// `contraction`: sampled contraction ratios of best response, the identity
/// control and each configured belief profile, all on the same pairs.
pub fn cmd_contraction(cfg: &LoadedConfig) -> CliResult<CommandOutput> {
    let market = cfg.market()?;
    let n = market.num_goods();
    let c = &cfg.config.contraction;
    let estimate = |label: String,
                    update: &dyn Fn(&PriceVector) -> crate::error::Result<PriceVector>|
     -> CliResult<LabeledContraction> {
        Ok(LabeledContraction {
            label,
            estimate: estimate_contraction(&market, update, c.pairs, c.seed)?,
        })
    };
    let best = estimate("best-response".into(), &|p| best_response_all(&market, p))?;
    let identity = if c.identity_control {
        Some(estimate("identity".into(), &|p| Ok(p.clone()))?)
    } else {
        None
    };
    let mut violations = Vec::new();
    if best.estimate.ratio_max >= 1.0 {
        violations.push(format!(
            "best-response ratio {} is not below 1",
            best.estimate.ratio_max
        ));
    }
    let mut beliefs = Vec::new();
    for spec in &c.beliefs {
        let profile = cfg.fixed_profile(spec, n)?;
        let est = estimate(spec.label(), &|p| brl_update(&market, &profile, p))?;
        if est.estimate.ratio_max > best.estimate.ratio_max + c.slack {
            violations.push(format!(
                "{} ratio {} exceeds best-response ratio {} + {}",
                est.label, est.estimate.ratio_max, best.estimate.ratio_max, c.slack
            ));
        }
        beliefs.push(est);
    }
    let report = ContractionReport {
        header: cfg.header("contraction"),
        market_hash: market_hash(&market),
        pairs: c.pairs,
        slack: c.slack,
        best_response: best,
        identity,
        beliefs,
        violations: violations.clone(),
    };
    let failure = (!violations.is_empty()).then(|| CliError::Property(violations.join("; ")));
    Ok(CommandOutput {
        bytes: to_json(&report),
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GeneratedMarketFile {
    header: OutputHeader,
    #[serde(flatten)]
    market: Market,
}

/// `generate`: writes the market described by `[market.generate]`. The
/// file loads back as a market (the header is ignored on input).
pub fn cmd_generate(cfg: &LoadedConfig) -> CliResult<CommandOutput> {
    let generator = cfg.config.market.generate.as_ref().ok_or_else(|| {
        CliError::Parse("generate needs a [market.generate] table".into())
    })?;
    let market = generator.generate()?;
    Ok(CommandOutput {
        bytes: to_json(&GeneratedMarketFile {
            header: cfg.header("generate"),
            market,
        }),
        failure: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Equilibrium,
    Simulate,
    Contraction,
    Generate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Simulate => "simulate",
            Command::Contraction => "contraction",
            Command::Generate => "generate",
        }
    }
}

pub fn execute(command: Command, cfg: &LoadedConfig) -> CliResult<CommandOutput> {
    match command {
        Command::Equilibrium => cmd_equilibrium(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Contraction => cmd_contraction(cfg),
        Command::Generate => cmd_generate(cfg),
    }
}

/// Loads the config, runs the command and writes its output to `output`,
/// else the config's `[output] path`, else stdout.
pub fn run_command(command: Command, config_path: &Path, output: Option<&Path>) -> CliResult<()> {
    let cfg = LoadedConfig::load(config_path)?;
    let out = execute(command, &cfg)?;
    let target = output
        .map(Path::to_path_buf)
        .or_else(|| cfg.config.output.path.as_ref().map(|p| cfg.resolve(p)));
    match target {
        Some(path) => fs::write(&path, &out.bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&out.bytes)?,
    }
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> CliResult<LoadedConfig> {
        LoadedConfig::from_str(text, Path::new("."))
    }

    const SYMMETRIC: &str = r#"
[market.generate]
num_goods = 3
num_buyers = 2
rho = 0.5
budget_range = [1.5, 1.5]
coefficient_range = [2.0, 2.0]
seed = 1
"#;

    #[test]
    fn rejects_rho_outside_wgs() {
        for rho in ["1.2", "-0.5", "0.0", "1.0"] {
            let text = SYMMETRIC.replace("rho = 0.5", &format!("rho = {rho}"));
            match load(&text) {
                Err(CliError::Parse(msg)) => assert!(msg.contains("weak-gross-substitutes"), "{msg}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = load("[market]\nfile = \n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line"), "{err}");
        let err = load("[market]\nfile = \"a\"\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn symmetric_equilibrium_report() {
        let cfg = load(SYMMETRIC).unwrap();
        let out = cmd_equilibrium(&cfg).unwrap();
        assert!(out.failure.is_none());
        let report: EquilibriumReport = serde_json::from_slice(&out.bytes).unwrap();
        // total money 2 * 1.5 split over 3 goods
        for &p in report.report.p_star.iter() {
            assert!((p - 1.0).abs() < 1e-9);
        }
        assert!(report.tatonnement.agree);
        assert_eq!(report.header.config_sha256.len(), 64);
    }

    #[test]
    fn generated_market_file_loads_back() {
        let cfg = load(SYMMETRIC).unwrap();
        let out = cmd_generate(&cfg).unwrap();
        let market: Market = serde_json::from_slice(&out.bytes).unwrap();
        assert_eq!(market, cfg.market().unwrap());
    }

    #[test]
    fn simulate_requires_dynamics_and_single_horizon() {
        let cfg = load(SYMMETRIC).unwrap();
        assert!(matches!(cmd_simulate(&cfg), Err(CliError::Parse(_))));
        let text = format!("{SYMMETRIC}\n[dynamics]\nmode = \"sync\"\nsteps = 3\nepochs = 2\n");
        assert!(matches!(load(&text), Err(CliError::Parse(_))));
    }

    #[test]
    fn out_of_box_p0_is_a_domain_error() {
        let text = format!("{SYMMETRIC}\n[dynamics]\nmode = \"sync\"\nsteps = 3\np0 = [100.0, 1.0, 1.0]\n");
        let err = cmd_simulate(&load(&text).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("box"), "{err}");
    }

    #[test]
    fn zero_steps_gives_single_row() {
        let text = format!("{SYMMETRIC}\n[dynamics]\nmode = \"sync\"\nsteps = 0\n");
        let out = cmd_simulate(&load(&text).unwrap()).unwrap();
        let text = String::from_utf8(out.bytes).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("step,epoch,active"));
    }

    #[test]
    fn contraction_report_with_controls() {
        let text = format!(
            "{SYMMETRIC}\n[contraction]\npairs = 100\nseed = 4\nbeliefs = [{{ kind = \"level\", k = 2 }}]\n"
        );
        let out = cmd_contraction(&load(&text).unwrap()).unwrap();
        assert!(out.failure.is_none());
        let report: ContractionReport = serde_json::from_slice(&out.bytes).unwrap();
        assert_eq!(report.identity.unwrap().estimate.ratio_max, 1.0);
        assert!(report.best_response.estimate.ratio_max < 1.0);
        assert!(report.beliefs[0].estimate.ratio_max <= report.best_response.estimate.ratio_max + 0.02);
    }

    #[test]
    fn depth_cap_is_enforced() {
        let text = format!("max_depth = 2\n{SYMMETRIC}\n[beliefs]\nkind = \"level\"\nk = 3\n[dynamics]\nmode = \"sync\"\nsteps = 2\n");
        assert!(matches!(cmd_simulate(&load(&text).unwrap()), Err(CliError::Parse(_))));
    }
}
