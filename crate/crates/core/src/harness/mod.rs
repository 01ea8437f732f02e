//! Scenario-driven experiments, metrics output and the M/G/1 simulator.

pub mod experiments;
pub mod metrics;
pub mod mg1;
pub mod plotdata;

use crate::baselines::{centralized_delay_optimal, exhaustive_oracle, myopic, non_cooperative, SchemeId};
use crate::error::Result;
use crate::gibbs::{NeighborGraph, SamplerConfig};
use crate::model::{build_grid_scenario, sample_slot, NetworkModel, ServiceCatalog, ServiceSet, SlotState};
use crate::offload::OffloadOptions;
use crate::oreo::{realize, step, ControllerState};
use crate::scenario::{NeighborMode, ScenarioConfig};
use crate::seed::{rng_for, substream, CATALOG, DEMAND, SAMPLER};

pub use experiments::{run_experiment, ExperimentId, ExperimentSpec};
pub use metrics::MetricsRow;
pub use mg1::{mg1_event_sim, Mg1Estimate, Mg1SimConfig};

/// A scenario realised for one replication: topology, service catalog and
/// the slot stream. Catalog and demand depend only on `(seed, rep)`, so every
/// scheme sees the same inputs.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cfg: ScenarioConfig,
    pub rep: u64,
    pub net: NetworkModel,
    pub cat: ServiceCatalog,
}

impl Instance {
    pub fn build(cfg: &ScenarioConfig, rep: u64) -> Result<Self> {
        cfg.validate()?;
        let net = build_grid_scenario(&cfg.grid, &cfg.bs)?;
        let cat = ServiceCatalog::sample(&mut rng_for(cfg.seed, &[CATALOG, rep]), &cfg.services)?;
        Ok(Instance { cfg: cfg.clone(), rep, net, cat })
    }

    /// Endless stream of i.i.d. slots.
    pub fn slots(&self) -> impl Iterator<Item = SlotState> + '_ {
        let mut rng = rng_for(self.cfg.seed, &[DEMAND, self.rep]);
        let (r, k, n) = (self.net.n_regions(), self.cat.n_services(), self.net.n_bs());
        std::iter::repeat_with(move || sample_slot(&mut rng, r, k, n, &self.cfg.demand))
    }

    pub fn offload_options(&self) -> OffloadOptions {
        OffloadOptions { method: self.cfg.control.inner_solver, stability_margin: self.cfg.control.stability_margin }
    }

    /// Sampler settings for one `(scheme, sweep point)` cell; the per-slot
    /// seed is derived from this one.
    pub fn sampler_config(&self, scheme: SchemeId, sweep_idx: u64) -> Result<SamplerConfig> {
        let c = &self.cfg.control;
        let seed = substream(self.cfg.seed, &[SAMPLER, self.rep, scheme.index(), sweep_idx]);
        let mut s = SamplerConfig::for_instance(self.net.n_bs(), self.cat.n_services(), c.tau, seed);
        if let Some(m) = c.max_iterations {
            s.max_iterations = m;
        }
        if c.patience.is_some() {
            s.patience = c.patience;
        }
        s.proposal = c.proposal;
        s.parallel = c.parallel_bs;
        if c.neighbor_mode == NeighborMode::Communication {
            s.broadcast_graph = Some(NeighborGraph::communication_range(&self.net, self.cfg.grid.comm_distance_m)?);
        }
        Ok(s)
    }
}

/// What one scheme did in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub t: usize,
    pub delay: f64,
    pub energy: f64,
    /// Energy-deficit backlog after the slot. Schemes other than OREO ignore
    /// it; it is tracked for comparison only.
    pub q: f64,
    pub avg_delay: f64,
    pub avg_energy: f64,
    pub cache: Vec<ServiceSet>,
    pub offload: Vec<f64>,
    pub local_cycles: Vec<f64>,
    pub demand: f64,
    pub iterations: usize,
    pub messages: u64,
    /// Fallback (OREO) or over-budget (Myopic) slot.
    pub flagged: bool,
}

/// Runs `scheme` for `horizon` slots of `inst` with delay weight `v` and
/// budget `q_budget`.
pub fn run_scheme(
    inst: &Instance,
    scheme: SchemeId,
    horizon: usize,
    sweep_idx: u64,
    v: f64,
    q_budget: f64,
) -> Result<Vec<SlotOutcome>> {
    let (net, cat) = (&inst.net, &inst.cat);
    let opts = inst.offload_options();
    let cfg = inst.sampler_config(scheme, sweep_idx)?;
    let mut state = ControllerState::new(v, q_budget)?;
    let mut out: Vec<SlotOutcome> = Vec::with_capacity(horizon);
    let (mut sum_d, mut sum_e) = (0.0, 0.0);

    for (t, slot) in inst.slots().take(horizon).enumerate() {
        let mut slot_cfg = cfg.clone();
        slot_cfg.seed = substream(cfg.seed, &[t as u64]);
        let (decision, delay, energy, local_cycles, iterations, messages, flagged);
        if scheme == SchemeId::Oreo {
            let (_, rec, _) = step(&state, net, cat, &slot, &cfg, &opts)?;
            decision = rec.decision;
            (delay, energy, local_cycles) = (rec.delay, rec.energy, rec.local_cycles);
            (iterations, messages, flagged) = (rec.iterations, rec.messages, rec.fallback);
        } else {
            let (d, f) = match scheme {
                SchemeId::NonCooperative => (non_cooperative(net, cat, &slot, &opts)?, false),
                SchemeId::CentralizedDelayOptimal => {
                    (centralized_delay_optimal(net, cat, &slot, &slot_cfg, &opts)?, false)
                }
                SchemeId::Myopic => {
                    let m = myopic(net, cat, &slot, q_budget, &slot_cfg, &opts)?;
                    (m.decision, m.over_budget)
                }
                SchemeId::ExhaustiveOracle => (exhaustive_oracle(net, cat, &slot, state.v, state.q, &opts)?.0, false),
                SchemeId::Oreo => unreachable!(),
            };
            let r = realize(net, cat, &slot, Some(d))?;
            decision = r.0;
            (delay, energy, local_cycles) = (r.1, r.2, r.3);
            (iterations, messages, flagged) = (0, 0, f);
        }
        state = ControllerState { q: state.next_backlog(energy), t: t + 1, ..state };
        sum_d += delay;
        sum_e += energy;
        out.push(SlotOutcome {
            t,
            delay,
            energy,
            q: state.q,
            avg_delay: sum_d / (t + 1) as f64,
            avg_energy: sum_e / (t + 1) as f64,
            cache: decision.cache,
            offload: decision.offload,
            local_cycles,
            demand: slot.total_demand(),
            iterations,
            messages,
            flagged,
        });
    }
    Ok(out)
}
