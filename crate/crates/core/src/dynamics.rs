//! Update schedules for the evolving voter model.
//!
//! Every schedule acts only on discordant edges. A sampled discordant edge
//! `{a, b}` is oriented by a fair coin into `(x, y)`; then `x` imitates `y`
//! with probability `nu / L` (a vote), and otherwise `x` drops `y` and links
//! to a new vertex `z` (a rewire). The clocks differ only in how time and the
//! update count advance:
//!
//! - [`Clock::Ctmc`]: each oriented discordant edge fires at rate 1, so the
//!   holding time is exponential with rate `2 N10`.
//! - [`Clock::DiscreteEfficient`]: one update per discordant edge drawn.
//! - [`Clock::DiscreteUniformEdge`]: oriented edges are drawn uniformly from
//!   all edges; concordant draws are no-ops that still count as updates and
//!   are skipped in one geometric draw.
//! - [`Clock::Silk`]: [`Clock::Ctmc`] with `legacy_rates` ignored.
//!
//! In the discrete clocks `time` equals the update count.
//!
//! Random draws are consumed in a fixed order per update: holding time or
//! skip length, edge index, orientation coin, event uniform, target.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{OpinionGraph, OpinionInit, PairCounts, Vertex, DEFAULT_REGULAR_ATTEMPTS};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::stats::{Row, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewireMode {
    /// New neighbor drawn from the whole vertex set.
    #[default]
    ToRandom,
    /// New neighbor drawn from the vertices sharing `x`'s opinion.
    ToSame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// One uniform draw from the pool minus `x`. If it is already a neighbor
    /// of `x` (including `y`) the rewire is skipped.
    UniformAll,
    /// Uniform over the pool minus `x` and its current neighbors.
    #[default]
    ExcludeNeighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Ctmc,
    DiscreteEfficient,
    DiscreteUniformEdge,
    Silk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    /// Random `L`-regular graph.
    #[default]
    Regular,
    /// Erdős–Rényi graph with mean degree `L`.
    ErdosRenyi,
}

/// Everything needed to reproduce a run from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub n: usize,
    #[serde(alias = "L")]
    pub l: usize,
    pub nu: f64,
    pub p: f64,
    pub graph: GraphModel,
    pub init: OpinionInit,
    pub rewire_mode: RewireMode,
    pub target_rule: TargetRule,
    pub clock: Clock,
    /// Vote with probability `(nu/L) / (1 + nu/L)` and scale the ctmc rate by
    /// `1 + nu/L`, as if votes and rewires were separate exponential clocks.
    pub legacy_rates: bool,
    pub max_updates: Option<u64>,
    pub max_time: Option<f64>,
    /// Record a row every this many updates. Defaults to `n`.
    pub record_every: Option<u64>,
    /// Record on a time grid with this spacing instead of by updates.
    pub record_dt: Option<f64>,
    pub record_triples: bool,
    pub regular_attempts: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n: 1000,
            l: 20,
            nu: 1.0,
            p: 0.5,
            graph: GraphModel::Regular,
            init: OpinionInit::Product,
            rewire_mode: RewireMode::ToRandom,
            target_rule: TargetRule::ExcludeNeighbors,
            clock: Clock::Ctmc,
            legacy_rates: false,
            max_updates: None,
            max_time: None,
            record_every: None,
            record_dt: None,
            record_triples: false,
            regular_attempts: DEFAULT_REGULAR_ATTEMPTS,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        if self.l == 0 || self.l >= self.n {
            return Err(invalid(format!("L = {} must lie in [1, n)", self.l)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("nu = {} must be finite and >= 0", self.nu)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!("p = {} outside [0, 1]", self.p)));
        }
        if !self.uses_legacy() && self.nu > self.l as f64 {
            return Err(invalid(format!(
                "nu/L = {} exceeds 1 and is not a probability",
                self.nu / self.l as f64
            )));
        }
        if self.record_every == Some(0) {
            return Err(invalid("record_every must be positive"));
        }
        if let Some(dt) = self.record_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("record_dt must be positive"));
            }
        }
        if let Some(t) = self.max_time {
            if !(t >= 0.0) {
                return Err(invalid("max_time must be >= 0"));
            }
        }
        Ok(())
    }

    fn uses_legacy(&self) -> bool {
        self.legacy_rates && self.clock != Clock::Silk
    }

    /// Probability that an update is a vote.
    pub fn vote_probability(&self) -> f64 {
        let r = self.nu / self.l as f64;
        if self.uses_legacy() {
            r / (1.0 + r)
        } else {
            r
        }
    }
}

/// What a single update did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Vote {
        voter: Vertex,
        source: Vertex,
    },
    Rewire {
        x: Vertex,
        dropped: Vertex,
        target: Vertex,
    },
    /// A rewire with no admissible target. Nothing changes.
    SkippedRewire {
        x: Vertex,
        y: Vertex,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub event: Event,
    /// Updates consumed, including skipped concordant draws.
    pub updates: u64,
    pub dt: f64,
}

/// Per-run constants of the update kernel.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    vote_prob: f64,
    rate_factor: f64,
    clock: Clock,
    rewire_mode: RewireMode,
    target_rule: TargetRule,
}

impl Stepper {
    pub fn new(params: &ModelParams) -> Stepper {
        let rate_factor = if params.uses_legacy() {
            1.0 + params.nu / params.l as f64
        } else {
            1.0
        };
        Stepper {
            vote_prob: params.vote_probability(),
            rate_factor,
            clock: params.clock,
            rewire_mode: params.rewire_mode,
            target_rule: params.target_rule,
        }
    }

    /// Draws how far the next event is, as `(updates, dt)`.
    /// Requires at least one discordant edge.
    pub fn advance<R: Rng + ?Sized>(&self, g: &OpinionGraph, rng: &mut R) -> (u64, f64) {
        let n10 = g.discordant_count() as f64;
        debug_assert!(n10 > 0.0);
        match self.clock {
            Clock::Ctmc | Clock::Silk => {
                let rate = 2.0 * n10 * self.rate_factor;
                (1, Exp::new(rate).expect("positive rate").sample(rng))
            }
            Clock::DiscreteEfficient => (1, 1.0),
            Clock::DiscreteUniformEdge => {
                let q = 2.0 * n10 / g.degree_sum() as f64;
                let skipped = if q >= 1.0 {
                    0
                } else {
                    Geometric::new(q).expect("valid probability").sample(rng)
                };
                let u = skipped + 1;
                (u, u as f64)
            }
        }
    }

    /// Applies one event on a uniform discordant edge.
    pub fn apply<R: Rng + ?Sized>(&self, g: &mut OpinionGraph, rng: &mut R) -> Event {
        let (a, b) = g.sample_discordant(rng).expect("no discordant edge");
        let (x, y) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let u: f64 = rng.random();
        if u < self.vote_prob {
            g.flip(x);
            return Event::Vote {
                voter: x,
                source: y,
            };
        }
        match pick_target(g, x, self.rewire_mode, self.target_rule, rng) {
            Some(z) => {
                g.rewire(x, y, z)
                    .expect("target admissible by construction");
                Event::Rewire {
                    x,
                    dropped: y,
                    target: z,
                }
            }
            None => Event::SkippedRewire { x, y },
        }
    }

    /// One full update, or `None` when the graph has no discordant edge.
    pub fn step<R: Rng + ?Sized>(&self, g: &mut OpinionGraph, rng: &mut R) -> Option<StepRecord> {
        if g.discordant_count() == 0 {
            return None;
        }
        let (updates, dt) = self.advance(g, rng);
        let event = self.apply(g, rng);
        Some(StepRecord { event, updates, dt })
    }
}

/// One update under `params`. See [`Stepper`] for repeated use.
pub fn step<R: Rng + ?Sized>(
    g: &mut OpinionGraph,
    params: &ModelParams,
    rng: &mut R,
) -> Option<StepRecord> {
    Stepper::new(params).step(g, rng)
}

/// A rewiring target for `x`, or `None` when no admissible one was drawn.
pub fn pick_target<R: Rng + ?Sized>(
    g: &OpinionGraph,
    x: Vertex,
    mode: RewireMode,
    rule: TargetRule,
    rng: &mut R,
) -> Option<Vertex> {
    let s = g.opinion(x);
    let pool: Option<&[Vertex]> = match mode {
        RewireMode::ToRandom => None,
        RewireMode::ToSame => Some(g.members(s)),
    };
    let pool_len = pool.map_or(g.n(), |m| m.len());
    if pool_len < 2 {
        return None;
    }
    // Uniform over pool \ {x}. For the opinion class, x's slot is replaced
    // by the last member.
    let draw = |rng: &mut R| -> Vertex {
        let i = rng.random_range(0..pool_len - 1);
        match pool {
            None => {
                let z = i as Vertex;
                if z >= x {
                    z + 1
                } else {
                    z
                }
            }
            Some(m) => {
                if m[i] == x {
                    m[pool_len - 1]
                } else {
                    m[i]
                }
            }
        }
    };
    match rule {
        TargetRule::UniformAll => {
            let z = draw(rng);
            (!g.has_edge(x, z)).then_some(z)
        }
        TargetRule::ExcludeNeighbors => {
            let in_pool_nbrs = match mode {
                RewireMode::ToRandom => g.degree(x),
                RewireMode::ToSame if s == 1 => g.ones_neighbors(x),
                RewireMode::ToSame => g.degree(x) - g.ones_neighbors(x),
            };
            let eligible = pool_len - 1 - in_pool_nbrs;
            if eligible == 0 {
                return None;
            }
            if eligible * 8 >= pool_len {
                loop {
                    let z = draw(rng);
                    if !g.has_edge(x, z) {
                        return Some(z);
                    }
                }
            }
            // Sparse complement: enumerate it.
            let cands: Vec<Vertex> = match pool {
                None => (0..g.n() as Vertex)
                    .filter(|&z| z != x && !g.has_edge(x, z))
                    .collect(),
                Some(m) => m
                    .iter()
                    .copied()
                    .filter(|&z| z != x && !g.has_edge(x, z))
                    .collect(),
            };
            Some(cands[rng.random_range(0..cands.len())])
        }
    }
}

/// Counter construction settings. Thresholds are multiples of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterConfig {
    /// A counter value above `stubborn_factor * L` is stubborn.
    pub stubborn_factor: f64,
    /// Vertices of initial degree at most `s_degree_factor * L` form `S`.
    pub s_degree_factor: f64,
    /// Read the target stream until an admissible vertex appears. When off,
    /// an inadmissible draw skips the rewire.
    pub skip_rule: bool,
}

impl Default for CounterConfig {
    fn default() -> Self {
        CounterConfig {
            stubborn_factor: 20.0,
            s_degree_factor: 11.0,
            skip_rule: true,
        }
    }
}

/// Counter usage of one counter-construction run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterStats {
    /// Draws from the pool used after votes by `S` vertices in state 0.
    pub x_draws: u64,
    pub x_stubborn: u64,
    /// Draws from the other pool, including the `n` initial counters.
    pub x_prime_draws: u64,
    pub x_prime_stubborn: u64,
    /// Entries of the uniform target stream consumed.
    pub w_draws: u64,
}

impl CounterStats {
    pub fn stubborn_fraction(&self) -> f64 {
        self.x_stubborn as f64 / self.x_draws as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub l: usize,
    pub absorbed: bool,
    pub updates: u64,
    pub time: f64,
    pub final_counts: PairCounts,
    pub votes: u64,
    pub rewires: u64,
    pub skipped_rewires: u64,
    pub counters: Option<CounterStats>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl RunResult {
    pub fn final_n1(&self) -> u64 {
        self.final_counts.n1
    }

    pub fn final_density(&self) -> f64 {
        self.final_counts.n1 as f64 / self.n as f64
    }

    pub fn minority_fraction(&self) -> f64 {
        let d = self.final_density();
        d.min(1.0 - d)
    }
}

/// Samples rows either every `stride` updates or on a time grid.
struct Recorder {
    stride: Option<u64>,
    next_update: u64,
    dt: Option<f64>,
    next_time: f64,
    time_cap: f64,
    triples: bool,
    traj: Trajectory,
}

impl Recorder {
    fn new(params: &ModelParams) -> Recorder {
        let stride = match params.record_dt {
            Some(_) => None,
            None => Some(params.record_every.unwrap_or(params.n as u64)),
        };
        Recorder {
            stride,
            next_update: 0,
            dt: params.record_dt,
            next_time: 0.0,
            time_cap: params.max_time.unwrap_or(f64::INFINITY),
            triples: params.record_triples,
            traj: Trajectory::default(),
        }
    }

    /// Grid rows strictly before `t_new`, holding the current state.
    fn before_event(&mut self, g: &OpinionGraph, updates: u64, t_new: f64) {
        let Some(dt) = self.dt else { return };
        while self.next_time < t_new && self.next_time <= self.time_cap {
            self.traj
                .rows
                .push(Row::capture(g, updates, self.next_time, self.triples));
            self.next_time += dt;
        }
    }

    fn after_event(&mut self, g: &OpinionGraph, updates: u64, time: f64) {
        let Some(stride) = self.stride else { return };
        if updates >= self.next_update {
            self.traj
                .rows
                .push(Row::capture(g, updates, time, self.triples));
            self.next_update = (updates / stride + 1) * stride;
        }
    }

    fn finish(mut self, g: &OpinionGraph, updates: u64, time: f64) -> Trajectory {
        if self.dt.is_some() {
            let end = if self.time_cap.is_finite() {
                self.time_cap
            } else {
                time
            };
            self.before_event(g, updates, end + f64::EPSILON * end.max(1.0));
        } else if self.traj.last().is_none_or(|r| r.updates != updates) {
            self.traj
                .rows
                .push(Row::capture(g, updates, time, self.triples));
        }
        self.traj
    }
}

/// Builds the initial graph and opinions of replica `replica`.
pub fn build_graph(params: &ModelParams, seed: u64, replica: u64) -> Result<OpinionGraph> {
    params.validate()?;
    let mut grng = stream_rng(seed, replica, Stream::Graph);
    let mut g = match params.graph {
        GraphModel::Regular => {
            OpinionGraph::regular(params.n, params.l, &mut grng, params.regular_attempts)?
        }
        GraphModel::ErdosRenyi => OpinionGraph::erdos_renyi(params.n, params.l as f64, &mut grng)?,
    };
    let mut orng = stream_rng(seed, replica, Stream::Opinions);
    g.assign_opinions(params.p, params.init, &mut orng)?;
    Ok(g)
}

/// Runs replica 0 of `params` under `seed`.
pub fn run(params: &ModelParams, seed: u64) -> Result<RunResult> {
    run_replica(params, seed, 0)
}

pub fn run_replica(params: &ModelParams, seed: u64, replica: u64) -> Result<RunResult> {
    let mut g = build_graph(params, seed, replica)?;
    let mut rng = stream_rng(seed, replica, Stream::Dynamics);
    run_on(&mut g, params, &mut rng)
}

/// Runs the dynamics on an existing graph until absorption or a cap.
pub fn run_on(g: &mut OpinionGraph, params: &ModelParams, rng: &mut SimRng) -> Result<RunResult> {
    params.validate()?;
    if g.n() != params.n {
        return Err(invalid(format!(
            "graph has {} vertices, params say {}",
            g.n(),
            params.n
        )));
    }
    let stepper = Stepper::new(params);
    let mut rec = Recorder::new(params);
    let cap = params.max_updates.unwrap_or(u64::MAX);
    let time_cap = params.max_time.unwrap_or(f64::INFINITY);
    let (mut updates, mut time) = (0u64, 0.0f64);
    let (mut votes, mut rewires, mut skipped) = (0u64, 0u64, 0u64);
    rec.after_event(g, 0, 0.0);
    let absorbed = loop {
        if g.discordant_count() == 0 {
            break true;
        }
        if updates >= cap {
            break false;
        }
        let (du, dt) = stepper.advance(g, rng);
        if updates.saturating_add(du) > cap {
            // The next event falls beyond the cap.
            time += (cap - updates) as f64;
            updates = cap;
            break false;
        }
        let t_new = time + dt;
        if t_new > time_cap {
            time = time_cap;
            break false;
        }
        rec.before_event(g, updates, t_new);
        match stepper.apply(g, rng) {
            Event::Vote { .. } => votes += 1,
            Event::Rewire { .. } => rewires += 1,
            Event::SkippedRewire { .. } => skipped += 1,
        }
        updates += du;
        time = t_new;
        rec.after_event(g, updates, time);
    };
    let trajectory = rec.finish(g, updates, time);
    Ok(RunResult {
        n: params.n,
        l: params.l,
        absorbed,
        updates,
        time,
        final_counts: g.pair_counts(),
        votes,
        rewires,
        skipped_rewires: skipped,
        counters: None,
        trajectory,
    })
}

/// Runs replicas `0..replicas` on up to `jobs` threads, in replica order.
pub fn run_replicas(
    params: &ModelParams,
    seed: u64,
    replicas: u64,
    jobs: usize,
) -> Result<Vec<RunResult>> {
    par_map(replicas, jobs, |r| run_replica(params, seed, r))
}

/// `f(0..count)` on a pool of `jobs` threads, results in index order.
pub fn par_map<T, F>(count: u64, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

/// The counter-based construction of the discrete efficient chain.
///
/// Each vertex holds a geometric(`nu/L`) counter on `{0, 1, ...}`. When the
/// vertex acts, it votes if its counter is 0 and otherwise rewires and
/// decrements. After a vote the counter is redrawn: from pool `X` when the
/// voter lies in `S` and was in state 0, from pool `X'` otherwise. Initial
/// counters come from `X'`. Rewiring targets are read from a stream of
/// uniform vertices, skipping `v` itself and its neighbors.
pub fn run_counter_construction(
    params: &ModelParams,
    cfg: &CounterConfig,
    seed: u64,
    replica: u64,
) -> Result<RunResult> {
    let mut g = build_graph(params, seed, replica)?;
    run_counter_construction_on(&mut g, params, cfg, seed, replica)
}

pub fn run_counter_construction_on(
    g: &mut OpinionGraph,
    params: &ModelParams,
    cfg: &CounterConfig,
    seed: u64,
    replica: u64,
) -> Result<RunResult> {
    params.validate()?;
    if params.clock != Clock::DiscreteEfficient {
        return Err(invalid(
            "the counter construction runs on the discrete efficient clock",
        ));
    }
    if params.rewire_mode != RewireMode::ToRandom {
        return Err(invalid(
            "the counter construction rewires to random vertices",
        ));
    }
    if !(cfg.stubborn_factor > 0.0 && cfg.s_degree_factor > 0.0) {
        return Err(invalid("counter thresholds must be positive"));
    }
    let n = g.n();
    let l = params.l as f64;
    let q = params.vote_probability();
    let geo = (q < 1.0)
        .then(|| Geometric::new(q).map_err(|e| invalid(e.to_string())))
        .transpose()?;
    let mut edge_rng = stream_rng(seed, replica, Stream::Dynamics);
    let mut x_rng = stream_rng(seed, replica, Stream::Counters);
    let mut xp_rng = stream_rng(seed, replica, Stream::CountersPrime);
    let mut w_rng = stream_rng(seed, replica, Stream::Targets);
    let stubborn = cfg.stubborn_factor * l;
    let mut stats = CounterStats::default();
    let draw = |rng: &mut SimRng| -> u64 { geo.as_ref().map_or(0, |d| d.sample(rng)) };

    let in_s: Vec<bool> = (0..n as Vertex)
        .map(|v| g.degree(v) as f64 <= cfg.s_degree_factor * l)
        .collect();
    let mut counter: Vec<u64> = (0..n)
        .map(|_| {
            let k = draw(&mut xp_rng);
            stats.x_prime_draws += 1;
            stats.x_prime_stubborn += (k as f64 > stubborn) as u64;
            k
        })
        .collect();

    let mut rec = Recorder::new(params);
    let cap = params.max_updates.unwrap_or(u64::MAX);
    let (mut updates, mut votes, mut rewires, mut skipped) = (0u64, 0u64, 0u64, 0u64);
    rec.after_event(g, 0, 0.0);
    let absorbed = loop {
        if g.discordant_count() == 0 {
            break true;
        }
        if updates >= cap {
            break false;
        }
        let (a, b) = g.sample_discordant(&mut edge_rng).expect("nonempty");
        let (v, u) = if edge_rng.random_bool(0.5) {
            (a, b)
        } else {
            (b, a)
        };
        let vi = v as usize;
        if counter[vi] > 0 {
            counter[vi] -= 1;
            let admissible = n - 1 - g.degree(v);
            let target = if admissible == 0 {
                None
            } else if cfg.skip_rule {
                loop {
                    let w = w_rng.random_range(0..n as Vertex);
                    stats.w_draws += 1;
                    if w != v && !g.has_edge(v, w) {
                        break Some(w);
                    }
                }
            } else {
                let w = w_rng.random_range(0..n as Vertex);
                stats.w_draws += 1;
                (w != v && !g.has_edge(v, w)).then_some(w)
            };
            match target {
                Some(w) => {
                    g.rewire(v, u, w)?;
                    rewires += 1;
                }
                None => skipped += 1,
            }
        } else {
            let from_x = in_s[vi] && g.opinion(v) == 0;
            g.flip(v);
            votes += 1;
            let k = if from_x {
                let k = draw(&mut x_rng);
                stats.x_draws += 1;
                stats.x_stubborn += (k as f64 > stubborn) as u64;
                k
            } else {
                let k = draw(&mut xp_rng);
                stats.x_prime_draws += 1;
                stats.x_prime_stubborn += (k as f64 > stubborn) as u64;
                k
            };
            counter[vi] = k;
        }
        updates += 1;
        rec.after_event(g, updates, updates as f64);
    };
    let trajectory = rec.finish(g, updates, updates as f64);
    Ok(RunResult {
        n,
        l: params.l,
        absorbed,
        updates,
        time: updates as f64,
        final_counts: g.pair_counts(),
        votes,
        rewires,
        skipped_rewires: skipped,
        counters: Some(stats),
        trajectory,
    })
}

/// Whether the maximum degree after `floor(t n L)` updates is at most
/// `(1 + eps + t) L`, read from the last recorded row at or before that
/// update.
pub fn d_max_check(result: &RunResult, t: f64, eps: f64) -> Result<bool> {
    if !(t >= 0.0) {
        return Err(invalid("t must be >= 0"));
    }
    let l = result.l as f64;
    let m = (t * result.n as f64 * l).floor() as u64;
    if !result.absorbed && result.updates < m {
        return Err(Error::InsufficientHistory(format!(
            "run stopped at update {} before {m}",
            result.updates
        )));
    }
    let row = result
        .trajectory
        .rows
        .iter()
        .rev()
        .find(|r| r.updates <= m)
        .ok_or_else(|| Error::InsufficientHistory(format!("no row at or before update {m}")))?;
    Ok(row.dmax as f64 <= (1.0 + eps + t) * l)
}

/// `(nu / 60) e^{-21 nu}`, the density below which rapid disconnection is
/// guaranteed for large graphs.
pub fn p_threshold(nu: f64) -> f64 {
    nu / 60.0 * (-21.0 * nu).exp()
}
