//! Synchronous and asynchronous BRL price dynamics.
//!
//! A run repeatedly applies BRL updates to the sellers a [`Schedule`]
//! activates, drawing each step's beliefs from a [`ProfileSource`]. Inactive
//! sellers keep their price. Time is partitioned into epochs: an epoch ends
//! at the first step by which every seller has updated at least once since
//! the previous epoch ended.

use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::thompson;
use crate::beliefs::{brl_update_subset, random_profile, BeliefProfile};
use crate::error::{Error, Result};
use crate::market::{Market, PriceVector};

/// Supplies the belief profile used at each step. Implementations may look
/// at the current prices; beliefs need not be consistent across steps.
pub trait ProfileSource {
    fn profile(&mut self, step: usize, p: &PriceVector) -> Result<Arc<BeliefProfile>>;
}

/// The same profile every step.
#[derive(Debug, Clone)]
pub struct FixedProfile(pub Arc<BeliefProfile>);

impl FixedProfile {
    pub fn new(profile: BeliefProfile) -> Self {
        Self(Arc::new(profile))
    }
}

impl ProfileSource for FixedProfile {
    fn profile(&mut self, _step: usize, _p: &PriceVector) -> Result<Arc<BeliefProfile>> {
        Ok(Arc::clone(&self.0))
    }
}

/// Step `t` uses `profiles[(t - 1) % len]`.
#[derive(Debug, Clone)]
pub struct CyclingProfiles(Vec<Arc<BeliefProfile>>);

impl CyclingProfiles {
    pub fn new(profiles: Vec<BeliefProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Argument("profile list must be non-empty".into()));
        }
        Ok(Self(profiles.into_iter().map(Arc::new).collect()))
    }
}

impl ProfileSource for CyclingProfiles {
    fn profile(&mut self, step: usize, _p: &PriceVector) -> Result<Arc<BeliefProfile>> {
        let idx = step.saturating_sub(1) % self.0.len();
        Ok(Arc::clone(&self.0[idx]))
    }
}

/// A fresh random profile every step from a seeded generator.
#[derive(Debug, Clone)]
pub struct RandomProfiles {
    rng: ChaCha8Rng,
    num_sellers: usize,
    max_depth: usize,
    respond_prob: f64,
}

impl RandomProfiles {
    pub fn new(num_sellers: usize, max_depth: usize, respond_prob: f64, seed: u64) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::Argument("random profiles need max_depth >= 1".into()));
        }
        if !(0.0..=1.0).contains(&respond_prob) {
            return Err(Error::Argument(format!(
                "respond probability must lie in [0, 1], got {respond_prob}"
            )));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            num_sellers,
            max_depth,
            respond_prob,
        })
    }
}

impl ProfileSource for RandomProfiles {
    fn profile(&mut self, _step: usize, _p: &PriceVector) -> Result<Arc<BeliefProfile>> {
        random_profile(&mut self.rng, self.num_sellers, self.max_depth, self.respond_prob).map(Arc::new)
    }
}

#[derive(Debug, Clone)]
enum ScheduleKind {
    Full,
    RoundRobin { next: usize },
    RandomFair {
        rng: ChaCha8Rng,
        include_prob: f64,
        absent_for: Vec<usize>,
    },
    Explicit { sets: Vec<Vec<bool>>, next: usize },
}

/// Generates the active seller set of each step.
///
/// Every schedule is fair with window `W`: each seller is active at least
/// once in every `W` consecutive steps.
#[derive(Debug, Clone)]
pub struct Schedule {
    num_sellers: usize,
    window: usize,
    kind: ScheduleKind,
}

impl Schedule {
    /// All sellers every step (synchronous dynamics).
    pub fn full(num_sellers: usize) -> Self {
        Self {
            num_sellers,
            window: 1,
            kind: ScheduleKind::Full,
        }
    }

    /// One seller per step, in index order.
    pub fn round_robin(num_sellers: usize) -> Self {
        Self {
            num_sellers,
            window: num_sellers,
            kind: ScheduleKind::RoundRobin { next: 0 },
        }
    }

    /// Each seller joins independently with probability `include_prob`;
    /// empty draws are redrawn and any seller that has been idle for
    /// `window - 1` steps is forced in.
    pub fn random_fair(num_sellers: usize, window: usize, include_prob: f64, seed: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::Argument("fairness window must be at least 1".into()));
        }
        if !(include_prob > 0.0 && include_prob <= 1.0) {
            return Err(Error::Argument(format!(
                "inclusion probability must lie in (0, 1], got {include_prob}"
            )));
        }
        Ok(Self {
            num_sellers,
            window,
            kind: ScheduleKind::RandomFair {
                rng: ChaCha8Rng::seed_from_u64(seed),
                include_prob,
                absent_for: vec![0; num_sellers],
            },
        })
    }

    /// Cycles through the given active sets.
    pub fn explicit(num_sellers: usize, sets: Vec<Vec<bool>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Argument("schedule needs at least one active set".into()));
        }
        for set in &sets {
            if set.len() != num_sellers {
                return Err(Error::Argument(format!(
                    "active set has {} entries for {num_sellers} sellers",
                    set.len()
                )));
            }
            if !set.iter().any(|&a| a) {
                return Err(Error::Argument("active sets must be non-empty".into()));
            }
        }
        let window = fairness_window(&sets).ok_or_else(|| {
            Error::Argument("some seller is never active in the schedule".into())
        })?;
        Ok(Self {
            num_sellers,
            window,
            kind: ScheduleKind::Explicit { sets, next: 0 },
        })
    }

    pub fn num_sellers(&self) -> usize {
        self.num_sellers
    }

    /// Longest possible gap, in steps, between a seller's consecutive
    /// updates.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn next_active(&mut self) -> Vec<bool> {
        let n = self.num_sellers;
        match &mut self.kind {
            ScheduleKind::Full => vec![true; n],
            ScheduleKind::RoundRobin { next } => {
                let mut set = vec![false; n];
                set[*next] = true;
                *next = (*next + 1) % n;
                set
            }
            ScheduleKind::RandomFair {
                rng,
                include_prob,
                absent_for,
            } => {
                let window = self.window;
                let mut set: Vec<bool>;
                loop {
                    set = (0..n).map(|_| rng.gen_bool(*include_prob)).collect();
                    for (j, active) in set.iter_mut().enumerate() {
                        if absent_for[j] + 1 >= window {
                            *active = true;
                        }
                    }
                    if set.iter().any(|&a| a) {
                        break;
                    }
                }
                for (j, &active) in set.iter().enumerate() {
                    absent_for[j] = if active { 0 } else { absent_for[j] + 1 };
                }
                set
            }
            ScheduleKind::Explicit { sets, next } => {
                let set = sets[*next].clone();
                *next = (*next + 1) % sets.len();
                set
            }
        }
    }
}

/// Longest cyclic run of steps needed to see every seller at least once.
fn fairness_window(sets: &[Vec<bool>]) -> Option<usize> {
    let n = sets[0].len();
    let len = sets.len();
    let mut worst = 0;
    for j in 0..n {
        let hits: Vec<usize> = (0..len).filter(|&t| sets[t][j]).collect();
        if hits.is_empty() {
            return None;
        }
        for (idx, &t) in hits.iter().enumerate() {
            let next = hits.get(idx + 1).copied().unwrap_or(hits[0] + len);
            worst = worst.max(next - t);
        }
    }
    Some(worst)
}

/// One synchronous step: every seller applies its BRL update to `p`.
pub fn step_sync(
    market: &Market,
    source: &mut dyn ProfileSource,
    p: &PriceVector,
    step: usize,
) -> Result<PriceVector> {
    step_async(market, source, p, &vec![true; market.num_goods()], step)
}

/// One asynchronous step: sellers in `active` apply their BRL update to
/// `p`, all other coordinates are copied unchanged.
pub fn step_async(
    market: &Market,
    source: &mut dyn ProfileSource,
    p: &PriceVector,
    active: &[bool],
    step: usize,
) -> Result<PriceVector> {
    if !active.iter().any(|&a| a) {
        return Err(Error::Argument("active seller set must be non-empty".into()));
    }
    let profile = source.profile(step, p)?;
    brl_update_subset(market, &profile, p, active)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Steps(usize),
    /// Run until this many epochs have completed.
    Epochs(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Index of the epoch this step belongs to.
    pub epoch: usize,
    /// Sellers that updated at this step (none for the initial row).
    pub active: Vec<bool>,
    pub prices: PriceVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    /// Steps at which an epoch completed.
    pub epoch_ends: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn initial(&self) -> &PriceVector {
        &self.records[0].prices
    }

    pub fn last(&self) -> &PriceVector {
        &self.records[self.records.len() - 1].prices
    }

    /// `d(p^t, p*)` for every recorded step.
    pub fn distances(&self, p_star: &PriceVector) -> Result<Vec<f64>> {
        self.records.iter().map(|r| thompson(&r.prices, p_star)).collect()
    }

    /// `d(p, p*)` at the start and at the end of every completed epoch.
    pub fn epoch_distances(&self, p_star: &PriceVector) -> Result<Vec<f64>> {
        std::iter::once(0)
            .chain(self.epoch_ends.iter().copied())
            .map(|t| thompson(&self.records[t].prices, p_star))
            .collect()
    }

    /// Delimited export: one row per step with the active set as a 0/1
    /// string (character `j` is seller `j`), then prices, Thompson distance
    /// to `p_star` (empty without a reference) and clearing residual.
    /// Floats use Rust's shortest round-trip rendering. `preamble` lines are
    /// written first, each prefixed with `# `.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        market: &Market,
        p_star: Option<&PriceVector>,
        preamble: &[String],
    ) -> io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let n = market.num_goods();
        let mut header = vec!["step".to_string(), "epoch".into(), "active".into()];
        header.extend((1..=n).map(|j| format!("p_{j}")));
        header.push("thompson_to_eq".into());
        header.push("clearing_residual".into());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let active: String = r.active.iter().map(|&a| if a { '1' } else { '0' }).collect();
            let mut row = vec![r.step.to_string(), r.epoch.to_string(), active];
            row.extend(r.prices.iter().map(|p| format_float(*p)));
            row.push(match p_star {
                Some(star) => format_float(thompson(&r.prices, star).map_err(io::Error::other)?),
                None => String::new(),
            });
            row.push(format_float(market.clearing_residual(&r.prices).map_err(io::Error::other)?));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

/// Runs the dynamics from `p0`, which must lie in the market's price box.
pub fn run(
    market: &Market,
    schedule: &mut Schedule,
    source: &mut dyn ProfileSource,
    p0: &PriceVector,
    horizon: Horizon,
) -> Result<Trajectory> {
    let n = market.num_goods();
    if p0.len() != n {
        return Err(Error::Argument(format!(
            "initial price vector has {} entries for {n} goods",
            p0.len()
        )));
    }
    if schedule.num_sellers() != n {
        return Err(Error::Argument(format!(
            "schedule covers {} sellers, market has {n} goods",
            schedule.num_sellers()
        )));
    }
    let bounds = market.price_bounds();
    if !bounds.contains(p0) {
        return Err(Error::OutOfBox {
            p_min: bounds.p_min,
            p_max: bounds.p_max,
            detail: format!("initial prices {p0}"),
        });
    }
    if let Horizon::Epochs(e) = horizon {
        e.checked_mul(schedule.window())
            .ok_or_else(|| Error::Argument(format!("epoch horizon {e} is too large")))?;
    }

    let mut records = vec![StepRecord {
        step: 0,
        epoch: 0,
        active: vec![false; n],
        prices: p0.clone(),
    }];
    let mut epoch_ends = Vec::new();
    let mut covered = vec![false; n];
    let mut p = p0.clone();
    let mut step = 0;
    loop {
        let done = match horizon {
            Horizon::Steps(t) => step >= t,
            Horizon::Epochs(e) => epoch_ends.len() >= e,
        };
        if done {
            break;
        }
        step += 1;
        let active = schedule.next_active();
        p = step_async(market, source, &p, &active, step)?;
        let epoch = epoch_ends.len();
        for (c, &a) in covered.iter_mut().zip(&active) {
            *c |= a;
        }
        if covered.iter().all(|&c| c) {
            epoch_ends.push(step);
            covered.iter_mut().for_each(|c| *c = false);
        }
        records.push(StepRecord {
            step,
            epoch,
            active,
            prices: p.clone(),
        });
    }
    Ok(Trajectory { records, epoch_ends })
}
