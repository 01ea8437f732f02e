//! Comparison schemes and the exhaustive oracle.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gibbs::{enumerate_states, feasible_rows, lex_key, run_sampler, SamplerConfig, SlotProblem};
use crate::model::{row_fits, Decision, NetworkModel, ServiceCatalog, ServiceSet, SlotState};
use crate::offload::{solve_offload_with, OffloadOptions, Weights};

/// Joint state count up to which the centralized scheme enumerates.
pub const EXHAUSTIVE_THRESHOLD: u128 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Oreo,
    NonCooperative,
    CentralizedDelayOptimal,
    Myopic,
    ExhaustiveOracle,
}

impl SchemeId {
    /// The four schemes compared in the experiments.
    pub const COMPARED: [SchemeId; 4] =
        [SchemeId::Oreo, SchemeId::CentralizedDelayOptimal, SchemeId::Myopic, SchemeId::NonCooperative];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Oreo => "oreo",
            SchemeId::NonCooperative => "noncooperative",
            SchemeId::CentralizedDelayOptimal => "centralized",
            SchemeId::Myopic => "myopic",
            SchemeId::ExhaustiveOracle => "exhaustive",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "oreo" => SchemeId::Oreo,
            "noncooperative" | "non-cooperative" | "noncoop" => SchemeId::NonCooperative,
            "centralized" | "centralized-delay-optimal" => SchemeId::CentralizedDelayOptimal,
            "myopic" => SchemeId::Myopic,
            "exhaustive" | "oracle" => SchemeId::ExhaustiveOracle,
            other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
        })
    }
}

/// Each BS ranks services by the demand summed over its own covered regions
/// and caches them in that order, skipping any that no longer fit. Ties go
/// to the lower service index. Offloading then minimises delay alone.
pub fn non_cooperative(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    opts: &OffloadOptions,
) -> Result<Decision> {
    let cache: Vec<ServiceSet> = (0..net.n_bs())
        .map(|n| {
            let mut order: Vec<(usize, f64)> =
                (0..cat.n_services()).map(|k| (k, slot.covered_demand(net, n, k))).collect();
            order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut row = ServiceSet::EMPTY;
            for (k, _) in order {
                let mut grown = row;
                grown.insert(k);
                if row_fits(cat, net.bs(n), grown) {
                    row = grown;
                }
            }
            row
        })
        .collect();
    let sol = solve_offload_with(net, cat, slot, &cache, Weights::delay(), opts)?;
    Ok(sol.decision(&cache))
}

/// Number of storage-feasible joint caching matrices, if countable.
pub fn joint_state_count(net: &NetworkModel, cat: &ServiceCatalog) -> Option<u128> {
    if cat.n_services() > 20 {
        return None;
    }
    (0..net.n_bs()).try_fold(1u128, |acc, n| acc.checked_mul(feasible_rows(cat, net.bs(n)).len() as u128))
}

/// Enumerates every storage- and per-slot-feasible caching matrix and returns
/// the minimiser of `V D^ + q E^`. Ties go to the lexicographically smallest
/// flattened matrix.
pub fn exhaustive_oracle(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    v: f64,
    q: f64,
    opts: &OffloadOptions,
) -> Result<(Decision, f64)> {
    let p = SlotProblem::new(net, cat, slot, Weights::new(v, q))?.with_offload(*opts);
    exhaustive_for(&p)
}

fn exhaustive_for(p: &SlotProblem<'_>) -> Result<(Decision, f64)> {
    let k = p.cat.n_services();
    let key = |c: &[ServiceSet]| c.iter().map(|r| lex_key(*r, k)).collect::<Vec<_>>();
    let best = enumerate_states(p)?
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then_with(|| key(&a.cache).cmp(&key(&b.cache))))
        .ok_or_else(|| Error::SlotInfeasible { bs: 0, reason: "no feasible caching matrix".into() })?;
    Ok((best.decision(), best.objective))
}

/// Minimises `D^` ignoring energy: exhaustive search on small instances,
/// the sampler otherwise.
pub fn centralized_delay_optimal(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cfg: &SamplerConfig,
    opts: &OffloadOptions,
) -> Result<Decision> {
    let p = SlotProblem::new(net, cat, slot, Weights::delay())?.with_offload(*opts);
    if joint_state_count(net, cat).is_some_and(|s| s <= EXHAUSTIVE_THRESHOLD) {
        return Ok(exhaustive_for(&p)?.0);
    }
    Ok(run_sampler(&p, cfg)?.decision())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MyopicOutcome {
    pub decision: Decision,
    /// Even the empty cache exceeds the budget in this slot.
    pub over_budget: bool,
}

/// Minimises `D^` subject to the hard per-slot budget `E^ <= budget`.
pub fn myopic(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    budget: f64,
    cfg: &SamplerConfig,
    opts: &OffloadOptions,
) -> Result<MyopicOutcome> {
    let p = SlotProblem::new(net, cat, slot, Weights::delay())?.with_offload(*opts).with_budget(budget);
    match run_sampler(&p, cfg) {
        Ok(out) => Ok(MyopicOutcome { decision: out.decision(), over_budget: false }),
        Err(Error::OverBudget { .. }) => Ok(MyopicOutcome { decision: Decision::empty(net.n_bs()), over_budget: true }),
        Err(e) => Err(e),
    }
}
