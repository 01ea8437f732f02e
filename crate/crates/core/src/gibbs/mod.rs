//! Decentralized Gibbs-sampling search over caching matrices.
//!
//! Each iteration picks a BS uniformly at random, draws a candidate cache
//! row, re-solves offloading only in that BS's neighbourhood and accepts the
//! candidate with probability `1 / (1 + exp((f_new - f_old) / tau))`. With
//! `parallel` set, a random maximal set of BSs with pairwise disjoint closed
//! neighbourhoods moves in the same iteration.
//!
//! Started from the empty cache, the chain's stationary distribution over
//! feasible joint caching matrices is `exp(-f/tau) / Z`.

mod eval;

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{row_fits, BsParams, Decision, NetworkModel, ServiceCatalog, ServiceSet};
use crate::scenario::ProposalMode;

pub use eval::{Evaluation, SlotProblem};

/// Exponent clamp for the acceptance probability.
const MAX_EXPONENT: f64 = 700.0;
/// Rejection draws before enumerating the feasible subsets.
const REJECTION_TRIES: usize = 64;
const MAX_ENUMERATED_SERVICES: usize = 20;

/// Per-BS neighbour lists; symmetric and irreflexive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    neighbors: Vec<Vec<usize>>,
}

impl NeighborGraph {
    /// BSs sharing at least one covered region.
    pub fn from_coverage(net: &NetworkModel) -> Self {
        let mut neighbors = vec![Vec::new(); net.n_bs()];
        for m in 0..net.n_regions() {
            let cov = net.coverage(m);
            for &a in cov {
                for &b in cov {
                    if a != b {
                        neighbors[a].push(b);
                    }
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        NeighborGraph { neighbors }
    }

    /// BSs within `range` metres of each other.
    pub fn communication_range(net: &NetworkModel, range: f64) -> Result<Self> {
        let pos = net.positions().ok_or_else(|| Error::Config("communication range needs BS positions".into()))?;
        let neighbors = pos
            .iter()
            .enumerate()
            .map(|(a, &(xa, ya))| {
                pos.iter()
                    .enumerate()
                    .filter(|&(b, &(xb, yb))| a != b && (xa - xb).hypot(ya - yb) <= range)
                    .map(|(b, _)| b)
                    .collect()
            })
            .collect();
        Ok(NeighborGraph { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.neighbors[n]
    }

    /// `n` together with its neighbours, sorted.
    pub fn closed(&self, n: usize) -> Vec<usize> {
        let mut v = self.neighbors[n].clone();
        let pos = v.partition_point(|&x| x < n);
        v.insert(pos, n);
        v
    }

    /// Random maximal set of BSs whose closed neighbourhoods are pairwise
    /// disjoint.
    pub fn independent_movers<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let mut blocked = vec![false; self.len()];
        let mut chosen = Vec::new();
        for n in order {
            let hood = self.closed(n);
            if hood.iter().all(|&m| !blocked[m]) {
                hood.iter().for_each(|&m| blocked[m] = true);
                chosen.push(n);
            }
        }
        chosen
    }

    pub fn closed_disjoint(&self, a: usize, b: usize) -> bool {
        let hb = self.closed(b);
        self.closed(a).iter().all(|x| hb.binary_search(x).is_err())
    }
}

/// Storage-feasible cache rows of one BS, ordered lexicographically by the
/// bit vector `(a_1, ..., a_K)` with `0 < 1`.
pub fn feasible_rows(cat: &ServiceCatalog, params: &BsParams) -> Vec<ServiceSet> {
    let k = cat.n_services();
    assert!(k <= MAX_ENUMERATED_SERVICES, "refusing to enumerate 2^{k} subsets");
    let mut rows: Vec<ServiceSet> = (0..1u64 << k).map(ServiceSet).filter(|&s| row_fits(cat, params, s)).collect();
    rows.sort_by_key(|s| lex_key(*s, k));
    rows
}

/// Key whose integer order is the lexicographic order of the bit vector
/// with service 0 most significant.
pub fn lex_key(s: ServiceSet, n_services: usize) -> u64 {
    (0..n_services).fold(0, |acc, k| acc << 1 | s.contains(k) as u64)
}

/// Lazily enumerated proposal sets, one per BS.
#[derive(Debug, Default)]
pub struct Proposer {
    enumerated: HashMap<usize, Vec<ServiceSet>>,
}

impl Proposer {
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        net: &NetworkModel,
        cat: &ServiceCatalog,
        n: usize,
        current: ServiceSet,
        mode: ProposalMode,
    ) -> ServiceSet {
        match mode {
            ProposalMode::Flip => {
                let mut row = current;
                row.toggle(rng.random_range(0..cat.n_services()));
                row
            }
            ProposalMode::Uniform => self.uniform(rng, net.bs(n), cat, n),
        }
    }

    fn uniform<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        params: &BsParams,
        cat: &ServiceCatalog,
        n: usize,
    ) -> ServiceSet {
        if let Some(rows) = self.enumerated.get(&n) {
            return rows[rng.random_range(0..rows.len())];
        }
        let mask = cat.all().0;
        for _ in 0..REJECTION_TRIES {
            let s = ServiceSet(rng.random::<u64>() & mask);
            if row_fits(cat, params, s) {
                return s;
            }
        }
        if cat.n_services() <= MAX_ENUMERATED_SERVICES {
            let rows = self.enumerated.entry(n).or_insert_with(|| feasible_rows(cat, params));
            return rows[rng.random_range(0..rows.len())];
        }
        for _ in 0..100_000 {
            let s = ServiceSet(rng.random::<u64>() & mask);
            if row_fits(cat, params, s) {
                return s;
            }
        }
        ServiceSet::EMPTY
    }
}

/// `1 / (1 + exp((f_new - f_old) / tau))` with the exponent clamped to
/// `[-700, 700]`.
pub fn accept_probability(f_new: f64, f_old: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    let x = ((f_new - f_old) / tau).clamp(-MAX_EXPONENT, MAX_EXPONENT);
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub tau: f64,
    pub max_iterations: usize,
    /// Stop after this many consecutive iterations without a new best.
    /// `None` runs to `max_iterations`.
    pub patience: Option<usize>,
    pub proposal: ProposalMode,
    pub parallel: bool,
    pub seed: u64,
    /// Keep per-iteration trace rows.
    pub record_trace: bool,
    /// Graph used to count neighbour broadcasts; defaults to coverage.
    pub broadcast_graph: Option<NeighborGraph>,
}

impl SamplerConfig {
    /// Defaults scaled to the instance: `60 N K` iterations, patience `10 N`.
    pub fn for_instance(n_bs: usize, n_services: usize, tau: f64, seed: u64) -> Self {
        SamplerConfig {
            tau,
            max_iterations: 60 * n_bs * n_services,
            patience: Some(10 * n_bs),
            proposal: ProposalMode::Uniform,
            parallel: false,
            seed,
            record_trace: false,
            broadcast_graph: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config("tau must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub bs: usize,
    pub current: f64,
    pub best: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplerTrace {
    pub rows: Vec<TraceRow>,
    pub iterations: usize,
    pub accepted: usize,
    /// Cache-row broadcasts sent to neighbours.
    pub messages: u64,
}

impl SamplerTrace {
    pub const CSV_HEADER: &'static str = "iteration,current_f,best_f,accepted,bs";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.iteration, r.current, r.best, r.accepted as u8, r.bs)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOutcome {
    pub evaluation: Evaluation,
    pub trace: SamplerTrace,
}

impl SamplerOutcome {
    pub fn decision(&self) -> Decision {
        self.evaluation.decision()
    }

    pub fn objective(&self) -> f64 {
        self.evaluation.objective
    }
}

/// Runs the chain. `observe` sees the current state after every iteration.
/// With `track_best` the best visited state is returned, otherwise the final
/// one.
fn run_chain(
    p: &SlotProblem<'_>,
    cfg: &SamplerConfig,
    track_best: bool,
    mut observe: impl FnMut(&Evaluation),
) -> Result<SamplerOutcome> {
    cfg.validate()?;
    let n_bs = p.net.n_bs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut proposer = Proposer::default();
    let broadcast = cfg.broadcast_graph.as_ref().unwrap_or(p.graph());

    let mut current = Evaluation::full(p, &vec![ServiceSet::EMPTY; n_bs])?;
    // The chain starts with an unset objective so the first feasible
    // candidate is always taken.
    let mut current_f = f64::INFINITY;
    let mut best = current.clone();
    let mut trace = SamplerTrace::default();
    let mut stale = 0usize;
    // Candidate objectives (None = infeasible) seen since the state last
    // changed. Evaluation is deterministic, so a hit equals a recompute.
    let mut seen: HashMap<(usize, u64), Option<f64>> = HashMap::new();

    for it in 0..cfg.max_iterations {
        let movers =
            if cfg.parallel { p.graph().independent_movers(&mut rng) } else { vec![rng.random_range(0..n_bs)] };
        debug_assert!(movers
            .iter()
            .enumerate()
            .all(|(i, &a)| movers[i + 1..].iter().all(|&b| p.graph().closed_disjoint(a, b))));

        let mut accepted = false;
        for &n in &movers {
            let row = proposer.propose(&mut rng, p.net, p.cat, n, current.cache[n], cfg.proposal);
            if !row_fits(p.cat, p.net.bs(n), row) {
                continue;
            }
            let mut fresh = None;
            let f_new = match seen.get(&(n, row.0)) {
                Some(&f) => f,
                None => {
                    let f = match current.with_row(p, n, row) {
                        Ok(c) => {
                            let f = c.objective;
                            fresh = Some(c);
                            Some(f)
                        }
                        Err(Error::SlotInfeasible { .. }) | Err(Error::OverBudget { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    seen.insert((n, row.0), f);
                    f
                }
            };
            let Some(f_new) = f_new else { continue };
            trace.messages += broadcast.neighbors(n).len() as u64;
            let eta = accept_probability(f_new, current_f, cfg.tau);
            if rng.random::<f64>() < eta {
                accepted = true;
                if row != current.cache[n] {
                    current = match fresh {
                        Some(c) => c,
                        None => current.with_row(p, n, row)?,
                    };
                    seen.clear();
                }
                current_f = current.objective;
            }
        }

        trace.iterations = it + 1;
        if accepted {
            trace.accepted += 1;
        }
        if current.objective < best.objective {
            best = current.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        if cfg.record_trace {
            trace.rows.push(TraceRow {
                iteration: it,
                bs: movers[0],
                current: current_f,
                best: best.objective,
                accepted,
            });
        }
        observe(&current);
        if track_best && cfg.patience.is_some_and(|w| stale >= w) {
            break;
        }
    }

    let evaluation = if track_best { best } else { current };
    Ok(SamplerOutcome { evaluation, trace })
}

/// Searches the caching matrices of one slot and returns the best feasible
/// state visited.
pub fn run_sampler(p: &SlotProblem<'_>, cfg: &SamplerConfig) -> Result<SamplerOutcome> {
    run_chain(p, cfg, true, |_| {})
}

/// Runs the chain without best tracking or early stopping and returns its
/// final state.
pub fn run_raw_chain(p: &SlotProblem<'_>, cfg: &SamplerConfig) -> Result<SamplerOutcome> {
    run_chain(p, cfg, false, |_| {})
}

pub const STATE_LIMIT: u128 = 100_000;

/// Every per-slot feasible joint caching matrix and its evaluation, in
/// lexicographic order of the flattened matrix.
pub fn enumerate_states(p: &SlotProblem<'_>) -> Result<Vec<Evaluation>> {
    let per_bs: Vec<Vec<ServiceSet>> = if p.cat.n_services() <= MAX_ENUMERATED_SERVICES {
        (0..p.net.n_bs()).map(|n| feasible_rows(p.cat, p.net.bs(n))).collect()
    } else {
        return Err(Error::StateSpaceTooLarge { states: 1u128 << p.cat.n_services(), limit: STATE_LIMIT });
    };
    let states = per_bs.iter().try_fold(1u128, |acc, r| acc.checked_mul(r.len() as u128)).unwrap_or(u128::MAX);
    if states > STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge { states, limit: STATE_LIMIT });
    }
    let mut out = Vec::with_capacity(states as usize);
    let mut idx = vec![0usize; per_bs.len()];
    loop {
        let cache: Vec<ServiceSet> = idx.iter().zip(&per_bs).map(|(&i, rows)| rows[i]).collect();
        match Evaluation::full(p, &cache) {
            Ok(e) => out.push(e),
            Err(Error::SlotInfeasible { .. }) | Err(Error::OverBudget { .. }) => {}
            Err(e) => return Err(e),
        }
        // Odometer with the last BS varying fastest.
        let mut pos = per_bs.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_bs[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub total_variation: f64,
    pub empirical: Vec<f64>,
    pub boltzmann: Vec<f64>,
    pub objectives: Vec<f64>,
    pub steps: usize,
}

impl StationaryReport {
    /// Empirical mass on the minimum-objective state(s).
    pub fn empirical_mass_on_argmin(&self) -> f64 {
        let fmin = self.objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        self.objectives.iter().zip(&self.empirical).filter(|(f, _)| **f == fmin).map(|(_, p)| p).sum()
    }
}

/// Runs the raw chain for `burn_in + samples` iterations and compares the
/// occupancy of the last `samples` iterations with `exp(-f/tau) / Z` over
/// all feasible joint states.
pub fn stationary_distribution_check(
    p: &SlotProblem<'_>,
    tau: f64,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<StationaryReport> {
    let states = enumerate_states(p)?;
    if states.is_empty() {
        return Err(Error::SlotInfeasible { bs: 0, reason: "no feasible joint state".into() });
    }
    let index: HashMap<Vec<ServiceSet>, usize> = states.iter().enumerate().map(|(i, e)| (e.cache.clone(), i)).collect();
    let objectives: Vec<f64> = states.iter().map(|e| e.objective).collect();
    let fmin = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = objectives.iter().map(|f| (-(f - fmin) / tau).exp()).collect();
    let z: f64 = weights.iter().sum();
    let boltzmann: Vec<f64> = weights.iter().map(|w| w / z).collect();

    let cfg = SamplerConfig {
        tau,
        max_iterations: burn_in + samples,
        patience: None,
        proposal: ProposalMode::Uniform,
        parallel: false,
        seed,
        record_trace: false,
        broadcast_graph: None,
    };
    let mut counts = vec![0u64; states.len()];
    let mut step = 0usize;
    run_chain(p, &cfg, false, |e| {
        if step >= burn_in {
            counts[index[&e.cache]] += 1;
        }
        step += 1;
    })?;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let total_variation = 0.5 * empirical.iter().zip(&boltzmann).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(StationaryReport { total_variation, empirical, boltzmann, objectives, steps: samples })
}
