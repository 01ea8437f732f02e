//! Scenario files.
//!
//! A scenario is a TOML document; every key is optional and defaults to the
//! reference setup (500 m x 500 m area, 3x3 BS grid, 5x5 regions, 10
//! services). Example with all defaults spelled out:
//!
//! ```toml
//! seed = 1
//! replications = 20
//! horizon = 150
//!
//! [grid]
//! side_m = 500.0
//! bs_rows = 3
//! bs_cols = 3
//! region_rows = 5
//! region_cols = 5
//! radius_m = 150.0
//! comm_distance_m = 130.0
//!
//! [bs]
//! storage_gb = 200.0
//! cpu_gcycles = 10.0
//! static_power = 0.5
//! unit_energy = 1.0
//! e_max = 15.0
//! d_max = 5000.0
//!
//! [services]
//! count = 10
//! workload_gcycles = [0.1, 0.5]
//! storage_gb = [20.0, 100.0]
//!
//! [demand]
//! rate = [0.0, 12.0]
//! cloud_delay_s = [2.0, 4.0]
//! aux_energy = [0.0, 3.0]
//!
//! [control]
//! v = 20.0
//! q_budget = 60.0
//! tau = 0.01
//! parallel_bs = false
//! proposal = "uniform"          # or "flip"
//! inner_solver = "golden"       # or "analytic"
//! neighbor_mode = "coverage"    # or "communication"
//! stability_margin = 1e-6
//! # max_iterations = 5400       # default 60 * N * K
//! # patience = 90               # default 10 * N
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`, written as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Config(format!("invalid range [{lo}, {hi}]")));
        }
        Ok(Range { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Range { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Uniform draw; a degenerate range returns `lo` exactly.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lo + (self.hi - self.lo) * u
    }
}

impl TryFrom<[f64; 2]> for Range {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Range::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub side_m: f64,
    pub bs_rows: usize,
    pub bs_cols: usize,
    pub region_rows: usize,
    pub region_cols: usize,
    pub radius_m: f64,
    pub comm_distance_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            side_m: 500.0,
            bs_rows: 3,
            bs_cols: 3,
            region_rows: 5,
            region_cols: 5,
            radius_m: 150.0,
            comm_distance_m: 130.0,
        }
    }
}

/// Parameters shared by every BS of a generated grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsConfig {
    pub storage_gb: f64,
    /// Maximum CPU frequency in Gcycles/s.
    pub cpu_gcycles: f64,
    /// Static power per slot.
    pub static_power: f64,
    /// Energy per Gcycle processed at maximum speed.
    pub unit_energy: f64,
    pub e_max: f64,
    pub d_max: f64,
}

impl Default for BsConfig {
    fn default() -> Self {
        BsConfig {
            storage_gb: 200.0,
            cpu_gcycles: 10.0,
            static_power: 0.5,
            unit_energy: 1.0,
            e_max: 15.0,
            d_max: 5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub count: usize,
    /// Mean task workload range, Gcycles/task.
    pub workload_gcycles: Range,
    pub storage_gb: Range,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            count: 10,
            workload_gcycles: Range { lo: 0.1, hi: 0.5 },
            storage_gb: Range { lo: 20.0, hi: 100.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Per region and service Poisson rate, tasks/s.
    pub rate: Range,
    pub cloud_delay_s: Range,
    pub aux_energy: Range,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            rate: Range { lo: 0.0, hi: 12.0 },
            cloud_delay_s: Range { lo: 2.0, hi: 4.0 },
            aux_energy: Range { lo: 0.0, hi: 3.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProposalMode {
    /// Uniform over the storage-feasible subsets of the catalog.
    #[default]
    Uniform,
    /// Toggle one uniformly chosen service.
    Flip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InnerMethod {
    /// 64-point scan followed by golden-section refinement.
    #[default]
    Golden,
    /// Closed-form stationary point of the per-BS objective.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NeighborMode {
    /// BSs sharing at least one covered region.
    #[default]
    Coverage,
    /// BSs within the configured communication distance.
    Communication,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub v: f64,
    pub q_budget: f64,
    pub tau: f64,
    pub parallel_bs: bool,
    pub proposal: ProposalMode,
    pub inner_solver: InnerMethod,
    pub neighbor_mode: NeighborMode,
    pub stability_margin: f64,
    pub max_iterations: Option<usize>,
    pub patience: Option<usize>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            v: 20.0,
            q_budget: 60.0,
            tau: 1e-2,
            parallel_bs: false,
            proposal: ProposalMode::Uniform,
            inner_solver: InnerMethod::Golden,
            neighbor_mode: NeighborMode::Coverage,
            stability_margin: 1e-6,
            max_iterations: None,
            patience: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub replications: usize,
    pub horizon: usize,
    pub grid: GridConfig,
    pub bs: BsConfig,
    pub services: ServiceConfig,
    pub demand: DemandConfig,
    pub control: ControlConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            replications: 20,
            horizon: 150,
            grid: GridConfig::default(),
            bs: BsConfig::default(),
            services: ServiceConfig::default(),
            demand: DemandConfig::default(),
            control: ControlConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.control;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.replications == 0 {
            return bad("replications must be >= 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.services.count == 0 || self.services.count > 64 {
            return bad("services.count must be in 1..=64");
        }
        if self.services.workload_gcycles.lo <= 0.0 || self.services.storage_gb.lo <= 0.0 {
            return bad("service workloads and storage must be positive");
        }
        if self.demand.rate.lo < 0.0 || self.demand.aux_energy.lo < 0.0 {
            return bad("demand rates and auxiliary energy must be non-negative");
        }
        if self.demand.cloud_delay_s.lo <= 0.0 {
            return bad("cloud delay must be positive");
        }
        if !(c.v >= 0.0 && c.v.is_finite()) {
            return bad("control.v must be finite and >= 0");
        }
        if !(c.q_budget > 0.0) {
            return bad("control.q_budget must be > 0");
        }
        if !(c.tau > 0.0) {
            return bad("control.tau must be > 0");
        }
        if !(c.stability_margin > 0.0 && c.stability_margin < 1.0) {
            return bad("control.stability_margin must be in (0, 1)");
        }
        if c.max_iterations == Some(0) {
            return bad("control.max_iterations must be >= 1");
        }
        Ok(())
    }
}
