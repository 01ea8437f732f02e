//! Online controller.
//!
//! Each slot the controller solves `min V D^ + q(t) E^` with the Gibbs
//! sampler and then updates the virtual energy-deficit queue
//!
//! ```text
//! q(t+1) = max(q(t) + E^(t) - Q, 0)
//! ```
//!
//! where `E^(t)` includes the load-independent energy observed in the slot.

use std::time::{Duration, Instant};

use crate::cost::{per_slot_constraints_ok, system_cost, CapViolation};
use crate::error::{Error, Result};
use crate::gibbs::{run_sampler, SamplerConfig, SlotProblem};
use crate::model::{Decision, NetworkModel, ServiceCatalog, SlotState};
use crate::offload::{OffloadOptions, Weights};
use crate::seed::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    /// Energy-deficit backlog `q(t)`.
    pub q: f64,
    /// Delay weight `V`.
    pub v: f64,
    /// Long-term energy budget `Q` per slot.
    pub budget: f64,
    pub t: usize,
}

impl ControllerState {
    pub fn new(v: f64, budget: f64) -> Result<Self> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("V must be finite and >= 0, got {v}")));
        }
        if !(budget > 0.0) {
            return Err(Error::Config(format!("Q must be > 0, got {budget}")));
        }
        Ok(ControllerState { q: 0.0, v, budget, t: 0 })
    }

    /// `[q + energy - Q]^+`.
    pub fn next_backlog(&self, energy: f64) -> f64 {
        (self.q + energy - self.budget).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: usize,
    pub decision: Decision,
    pub delay: f64,
    pub energy: f64,
    pub q_before: f64,
    pub q_after: f64,
    pub iterations: usize,
    pub messages: u64,
    /// Gcycles/s processed locally at each BS.
    pub local_cycles: Vec<f64>,
    /// The sampler found no feasible state and the empty cache was used.
    pub fallback: bool,
    pub avg_delay: f64,
    pub avg_energy: f64,
    pub wall_time: Duration,
}

/// Realized costs of a decision, with the empty-cache fallback applied when
/// `decision` is `None`. Fails if the decision breaks the per-slot energy cap.
pub(crate) fn realize(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    decision: Option<Decision>,
) -> Result<(Decision, f64, f64, Vec<f64>)> {
    let decision = decision.unwrap_or_else(|| Decision::empty(net.n_bs()));
    let cost = system_cost(net, cat, slot, &decision)?;
    if let Err(v) = per_slot_constraints_ok(net, &cost.per_bs) {
        if let Some(CapViolation::Energy { bs }) = v.iter().find(|c| matches!(c, CapViolation::Energy { .. })) {
            return Err(Error::SlotInfeasible {
                bs: *bs,
                reason: "per-slot energy cap violated even by the empty cache".into(),
            });
        }
    }
    let cycles = cost.per_bs.iter().map(|b| b.local_cycles()).collect();
    Ok((decision, cost.delay, cost.energy, cycles))
}

/// One slot of the controller. The sampler seed for slot `t` is derived from
/// `cfg.seed` and `t`.
pub fn step(
    state: &ControllerState,
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cfg: &SamplerConfig,
    opts: &OffloadOptions,
) -> Result<(Decision, SlotRecord, ControllerState)> {
    let started = Instant::now();
    let problem = SlotProblem::new(net, cat, slot, Weights::new(state.v, state.q))?.with_offload(*opts);
    let mut slot_cfg = cfg.clone();
    slot_cfg.seed = substream(cfg.seed, &[state.t as u64]);

    let (chosen, iterations, messages) = match run_sampler(&problem, &slot_cfg) {
        Ok(out) => (Some(out.decision()), out.trace.iterations, out.trace.messages),
        Err(Error::SlotInfeasible { .. }) => (None, 0, 0),
        Err(e) => return Err(e),
    };
    let fallback = chosen.is_none();
    let (decision, delay, energy, local_cycles) = realize(net, cat, slot, chosen)?;

    let next = ControllerState { q: state.next_backlog(energy), t: state.t + 1, ..*state };
    let record = SlotRecord {
        t: state.t,
        decision: decision.clone(),
        delay,
        energy,
        q_before: state.q,
        q_after: next.q,
        iterations,
        messages,
        local_cycles,
        fallback,
        avg_delay: delay,
        avg_energy: energy,
        wall_time: started.elapsed(),
    };
    Ok((decision, record, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRun {
    pub records: Vec<SlotRecord>,
    pub final_state: ControllerState,
}

impl HorizonRun {
    pub fn avg_delay(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.avg_delay)
    }

    pub fn avg_energy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.avg_energy)
    }
}

/// Runs `horizon` consecutive slots, filling in running averages of `D^`
/// and `E^`.
pub fn run_horizon(
    state0: ControllerState,
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slots: impl IntoIterator<Item = SlotState>,
    horizon: usize,
    cfg: &SamplerConfig,
    opts: &OffloadOptions,
) -> Result<HorizonRun> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let mut state = state0;
    let mut records = Vec::with_capacity(horizon);
    let (mut sum_d, mut sum_e) = (0.0, 0.0);
    for slot in slots.into_iter().take(horizon) {
        let (_, mut rec, next) = step(&state, net, cat, &slot, cfg, opts)?;
        sum_d += rec.delay;
        sum_e += rec.energy;
        rec.avg_delay = sum_d / (records.len() + 1) as f64;
        rec.avg_energy = sum_e / (records.len() + 1) as f64;
        records.push(rec);
        state = next;
    }
    if records.len() < horizon {
        return Err(Error::Config(format!("slot stream ended after {} of {horizon} slots", records.len())));
    }
    Ok(HorizonRun { records, final_state: state })
}

/// `B = (sum_n E^max_n - Q)^2 / 2`.
pub fn drift_bound_constant(net: &NetworkModel, budget: f64) -> f64 {
    0.5 * (net.total_e_max() - budget).powi(2)
}
