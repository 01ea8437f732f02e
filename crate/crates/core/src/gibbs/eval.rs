use crate::cost::BsLoad;
use crate::error::{Error, Result};
use crate::model::{
    bs_rates, check_dimensions, row_fits, uncovered_demand, Decision, NetworkModel, ServiceCatalog, ServiceSet,
    SlotState,
};
use crate::offload::{assemble_objective, solve_budgeted_problems, BsProblem, BsSolution, OffloadOptions, Weights};

use super::NeighborGraph;

/// One slot's caching problem: inputs, objective weights and, for the
/// myopic scheme, a hard per-slot energy budget.
#[derive(Debug, Clone)]
pub struct SlotProblem<'a> {
    pub net: &'a NetworkModel,
    pub cat: &'a ServiceCatalog,
    pub slot: &'a SlotState,
    pub weights: Weights,
    /// When set, the objective is `D^` subject to `E^ <= budget`.
    pub energy_budget: Option<f64>,
    pub offload: OffloadOptions,
    graph: NeighborGraph,
}

impl<'a> SlotProblem<'a> {
    pub fn new(net: &'a NetworkModel, cat: &'a ServiceCatalog, slot: &'a SlotState, weights: Weights) -> Result<Self> {
        slot.validate(net, cat)?;
        Ok(SlotProblem {
            net,
            cat,
            slot,
            weights,
            energy_budget: None,
            offload: OffloadOptions::default(),
            graph: NeighborGraph::from_coverage(net),
        })
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.energy_budget = Some(budget);
        self.weights = Weights::delay();
        self
    }

    pub fn with_offload(mut self, opts: OffloadOptions) -> Self {
        self.offload = opts;
        self
    }

    /// Interference graph: BSs sharing a covered region.
    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    fn bs_problem(&self, n: usize, load: BsLoad) -> BsProblem<'a> {
        BsProblem {
            params: self.net.bs(n),
            load,
            aux_energy: self.slot.aux_energy[n],
            cloud_delay: self.slot.cloud_delay,
        }
    }
}

/// A caching matrix together with its optimal offloading and objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cache: Vec<ServiceSet>,
    rates: Vec<f64>,
    loads: Vec<BsLoad>,
    pub solutions: Vec<BsSolution>,
    terms: Vec<f64>,
    pub uncovered: f64,
    pub objective: f64,
}

impl Evaluation {
    /// Evaluates a caching matrix from scratch.
    pub fn full(p: &SlotProblem<'_>, cache: &[ServiceSet]) -> Result<Self> {
        check_dimensions(p.net, p.cat, cache)?;
        if let Some(n) = (0..p.net.n_bs()).find(|&n| !row_fits(p.cat, p.net.bs(n), cache[n])) {
            return Err(Error::SlotInfeasible { bs: n, reason: "storage capacity exceeded".into() });
        }
        let k = p.cat.n_services();
        let n_bs = p.net.n_bs();
        let mut e = Evaluation {
            cache: cache.to_vec(),
            rates: vec![0.0; n_bs * k],
            loads: vec![BsLoad::default(); n_bs],
            solutions: vec![BsSolution { b: 0.0, delay: 0.0, energy: 0.0 }; n_bs],
            terms: vec![0.0; n_bs],
            uncovered: 0.0,
            objective: 0.0,
        };
        for n in 0..n_bs {
            e.refresh_rates(p, n);
        }
        e.finish(p, 0..n_bs)?;
        Ok(e)
    }

    /// Replaces BS `n`'s cache row. Only the closed neighbourhood of `n` sees
    /// different arrival rates, so only those BSs are re-solved; the total is
    /// re-assembled exactly as [`Evaluation::full`] would.
    pub fn with_row(&self, p: &SlotProblem<'_>, n: usize, row: ServiceSet) -> Result<Self> {
        if !row_fits(p.cat, p.net.bs(n), row) {
            return Err(Error::SlotInfeasible { bs: n, reason: "storage capacity exceeded".into() });
        }
        let mut e = self.clone();
        e.cache[n] = row;
        if p.energy_budget.is_some() {
            for m in 0..p.net.n_bs() {
                e.refresh_rates(p, m);
            }
            e.finish(p, 0..p.net.n_bs())?;
        } else {
            // A neighbour whose aggregate load did not change keeps its
            // solution; solving is a pure function of the load.
            let mut changed = Vec::with_capacity(p.graph.neighbors(n).len() + 1);
            for m in p.graph.closed(n) {
                let before = e.loads[m];
                e.refresh_rates(p, m);
                if e.loads[m] != before || m == n {
                    changed.push(m);
                }
            }
            e.finish(p, changed)?;
        }
        Ok(e)
    }

    fn refresh_rates(&mut self, p: &SlotProblem<'_>, n: usize) {
        let k = p.cat.n_services();
        let row = &mut self.rates[n * k..(n + 1) * k];
        bs_rates(p.net, p.slot, &self.cache, n, row);
        self.loads[n] = BsLoad::from_rates(row, p.cat);
    }

    fn finish(&mut self, p: &SlotProblem<'_>, changed: impl IntoIterator<Item = usize>) -> Result<()> {
        self.uncovered = uncovered_demand(p.net, p.slot, &self.cache);
        match p.energy_budget {
            None => {
                for n in changed {
                    let sol = p
                        .bs_problem(n, self.loads[n])
                        .solve(p.weights, &p.offload)
                        .map_err(|reason| Error::SlotInfeasible { bs: n, reason })?;
                    self.terms[n] = sol.objective(p.weights);
                    self.solutions[n] = sol;
                }
                self.objective = assemble_objective(
                    &self.terms,
                    p.weights,
                    p.slot.cloud_delay,
                    self.uncovered,
                    p.slot.total_aux_energy(),
                );
            }
            Some(budget) => {
                let problems: Vec<_> = (0..p.net.n_bs()).map(|n| p.bs_problem(n, self.loads[n])).collect();
                let sol = solve_budgeted_problems(&problems, self.uncovered, p.slot, budget, &p.offload)?;
                for (n, s) in sol.per_bs.iter().enumerate() {
                    self.terms[n] = s.objective(Weights::delay());
                    self.solutions[n] = *s;
                }
                self.objective = sol.objective;
            }
        }
        Ok(())
    }

    pub fn decision(&self) -> Decision {
        Decision { cache: self.cache.clone(), offload: self.solutions.iter().map(|s| s.b).collect() }
    }

    /// `lambda_{n,k}` for BS `n`.
    pub fn rates(&self, n: usize) -> &[f64] {
        let k = self.rates.len() / self.cache.len();
        &self.rates[n * k..(n + 1) * k]
    }

    pub fn delay(&self, slot: &SlotState) -> f64 {
        self.solutions.iter().map(|s| s.delay).sum::<f64>() + slot.cloud_delay * self.uncovered
    }

    pub fn energy(&self, slot: &SlotState) -> f64 {
        self.solutions.iter().map(|s| s.energy).sum::<f64>() + slot.total_aux_energy()
    }
}
