//! Experiment definitions.
//!
//! | id | schemes | sweep | output |
//! |---|---|---|---|
//! | `fig2_3` | all four | none | delay and energy time series |
//! | `fig4_convergence` | sampler only | `tau` | `convergence.csv` |
//! | `fig5_6_storage_sweep` | all four | storage `C` | time series per `C` |
//! | `fig7_Q_sweep` | all four | budget `Q` | time series per `Q` |
//! | `fig8_9_traces` | all four, one seed | none | per-slot cache and CPU traces |
//! | `v_sweep` | OREO | `V` | time series per `V` |

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::SchemeId;
use crate::error::{Error, Result};
use crate::gibbs::{run_sampler, SlotProblem};
use crate::offload::Weights;
use crate::oreo::drift_bound_constant;
use crate::scenario::ScenarioConfig;

use super::metrics::{format_summary, summarize, write_rows, write_summary_csv, MetricsRow, SummaryRow};
use super::{run_scheme, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    Fig2_3,
    Fig4Convergence,
    Fig5_6StorageSweep,
    Fig7QSweep,
    Fig8_9Traces,
    VSweep,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Fig2_3,
        ExperimentId::Fig4Convergence,
        ExperimentId::Fig5_6StorageSweep,
        ExperimentId::Fig7QSweep,
        ExperimentId::Fig8_9Traces,
        ExperimentId::VSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig2_3 => "fig2_3",
            ExperimentId::Fig4Convergence => "fig4_convergence",
            ExperimentId::Fig5_6StorageSweep => "fig5_6_storage_sweep",
            ExperimentId::Fig7QSweep => "fig7_Q_sweep",
            ExperimentId::Fig8_9Traces => "fig8_9_traces",
            ExperimentId::VSweep => "v_sweep",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    /// BS storage capacity `C` (GB).
    Storage(Vec<f64>),
    /// Long-term budget `Q`.
    Budget(Vec<f64>),
    /// Sampler temperature.
    Tau(Vec<f64>),
    /// Delay weight `V`.
    V(Vec<f64>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::Storage(_) => "C",
            Sweep::Budget(_) => "Q",
            Sweep::Tau(_) => "tau",
            Sweep::V(_) => "V",
        }
    }

    /// Same parameter, different grid.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Sweep> {
        Ok(match self {
            Sweep::None => return Err(Error::Config("this experiment has no sweep".into())),
            Sweep::Storage(_) => Sweep::Storage(values),
            Sweep::Budget(_) => Sweep::Budget(values),
            Sweep::Tau(_) => Sweep::Tau(values),
            Sweep::V(_) => Sweep::V(values),
        })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::None => vec![0.0],
            Sweep::Storage(v) | Sweep::Budget(v) | Sweep::Tau(v) | Sweep::V(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub scenario: ScenarioConfig,
    pub schemes: Vec<SchemeId>,
    pub horizon: usize,
    /// Replication indices.
    pub seeds: Vec<u64>,
    pub sweep: Sweep,
}

impl ExperimentSpec {
    /// Default grid for `id` on `scenario`.
    pub fn new(id: ExperimentId, scenario: ScenarioConfig) -> Self {
        let reps: Vec<u64> = (0..scenario.replications as u64).collect();
        let all = SchemeId::COMPARED.to_vec();
        let (schemes, seeds, sweep) = match id {
            ExperimentId::Fig2_3 => (all, reps, Sweep::None),
            ExperimentId::Fig4Convergence => (vec![SchemeId::Oreo], reps, Sweep::Tau(vec![1e-3, 1e-2, 1e-1, 1.0])),
            ExperimentId::Fig5_6StorageSweep => (all, reps, Sweep::Storage(vec![25.0, 50.0, 75.0, 100.0, 150.0])),
            ExperimentId::Fig7QSweep => (all, reps, Sweep::Budget(vec![30.0, 45.0, 60.0, 75.0, 90.0])),
            ExperimentId::Fig8_9Traces => (all, vec![0], Sweep::None),
            ExperimentId::VSweep => (vec![SchemeId::Oreo], reps, Sweep::V(vec![1e2, 1e3, 1e4, 1e5])),
        };
        let horizon = scenario.horizon;
        ExperimentSpec { id, scenario, schemes, horizon, seeds, sweep }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("scheme list is empty".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.sweep != Sweep::None {
            let values = self.sweep.values();
            if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config("sweep values must be non-empty and positive".into()));
            }
        }
        Ok(())
    }

    /// Scenario, `V` and `Q` at one sweep point.
    fn point(&self, value: f64) -> (ScenarioConfig, f64, f64) {
        let mut s = self.scenario.clone();
        match self.sweep {
            Sweep::Storage(_) => s.bs.storage_gb = value,
            Sweep::Budget(_) => s.control.q_budget = value,
            Sweep::Tau(_) => s.control.tau = value,
            Sweep::V(_) => s.control.v = value,
            Sweep::None => {}
        }
        let (v, q) = (s.control.v, s.control.q_budget);
        (s, v, q)
    }
}

/// Sampler trace row of the convergence experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceRow {
    pub seed: u64,
    pub tau: f64,
    pub iteration: usize,
    pub current_f: f64,
    pub best_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub id: ExperimentId,
    pub rows: Vec<MetricsRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub summary: Vec<SummaryRow>,
    /// `B` of the drift bound, for the unswept scenario.
    pub drift_bound: f64,
    pub v: f64,
    pub q_budget: f64,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let id = spec.id.name();
    let mut rows = Vec::new();
    let mut convergence = Vec::new();

    for (sweep_idx, value) in spec.sweep.values().into_iter().enumerate() {
        let (scenario, v, q_budget) = spec.point(value);
        for &rep in &spec.seeds {
            let inst = Instance::build(&scenario, rep)?;
            if spec.id == ExperimentId::Fig4Convergence {
                convergence.extend(convergence_run(&inst, sweep_idx as u64, value)?);
                continue;
            }
            for &scheme in &spec.schemes {
                let outcomes = run_scheme(&inst, scheme, spec.horizon, sweep_idx as u64, v, q_budget)?;
                let k = inst.cat.n_services();
                rows.extend(
                    outcomes
                        .iter()
                        .map(|o| MetricsRow::from_outcome(id, scheme.name(), rep, (spec.sweep.name(), value), o, k)),
                );
            }
        }
    }

    let net = crate::model::build_grid_scenario(&spec.scenario.grid, &spec.scenario.bs)?;
    Ok(ExperimentOutput {
        id: spec.id,
        summary: summarize(&rows),
        rows,
        convergence,
        drift_bound: drift_bound_constant(&net, spec.scenario.control.q_budget),
        v: spec.scenario.control.v,
        q_budget: spec.scenario.control.q_budget,
    })
}

/// Runs the sampler on the first slot with the full iteration budget and
/// `q = 0`, keeping every trace row.
fn convergence_run(inst: &Instance, sweep_idx: u64, tau: f64) -> Result<Vec<ConvergenceRow>> {
    let slot = inst.slots().next().expect("slot stream is endless");
    let p = SlotProblem::new(&inst.net, &inst.cat, &slot, Weights::new(inst.cfg.control.v, 0.0))?
        .with_offload(inst.offload_options());
    let mut cfg = inst.sampler_config(SchemeId::Oreo, sweep_idx)?;
    cfg.tau = tau;
    cfg.patience = None;
    cfg.record_trace = true;
    let out = run_sampler(&p, &cfg)?;
    Ok(out
        .trace
        .rows
        .iter()
        .map(|r| ConvergenceRow { seed: inst.rep, tau, iteration: r.iteration, current_f: r.current, best_f: r.best })
        .collect())
}

impl ExperimentOutput {
    /// Human-readable summary.
    pub fn report(&self) -> String {
        let mut s = format!(
            "experiment {}  V = {}  Q = {}  B = {:.3}  (delay bound gap B/V = {:.3})\n",
            self.id,
            self.v,
            self.q_budget,
            self.drift_bound,
            if self.v > 0.0 { self.drift_bound / self.v } else { f64::INFINITY }
        );
        if self.id == ExperimentId::Fig4Convergence {
            let mut taus: Vec<f64> = self.convergence.iter().map(|r| r.tau).collect();
            taus.dedup();
            for tau in taus {
                let finals: Vec<f64> = last_per_seed(self.convergence.iter().filter(|r| r.tau == tau));
                let m = super::metrics::MeanSd::of(&finals);
                s += &format!("tau = {tau:<8} final best objective {:.4} ± {:.4}\n", m.mean, m.sd);
            }
        } else {
            s += &format_summary(&self.summary);
        }
        s
    }

    /// Writes `metrics.csv`, `summary.csv` and, for the convergence
    /// experiment, `convergence.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if self.id == ExperimentId::Fig4Convergence {
            let path = dir.join("convergence.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for r in &self.convergence {
                w.serialize(r)?;
            }
            w.flush()?;
            written.push(path);
        } else {
            let path = dir.join("metrics.csv");
            write_rows(&path, &self.rows)?;
            written.push(path);
            let path = dir.join("summary.csv");
            let mut f = fs::File::create(&path)?;
            write_summary_csv(&mut f, &self.summary)?;
            f.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

fn last_per_seed<'a>(rows: impl Iterator<Item = &'a ConvergenceRow>) -> Vec<f64> {
    let mut last: std::collections::BTreeMap<u64, &ConvergenceRow> = Default::default();
    for r in rows {
        last.insert(r.seed, r);
    }
    last.values().map(|r| r.best_f).collect()
}
