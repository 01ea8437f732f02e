use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Array shapes disagree between network, catalog, slot or decision.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A static model violates one of its construction invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The M/G/1 queue at a BS would be saturated.
    #[error("queue at BS {bs} is unstable (utilization {utilization:.6} >= 1)")]
    Unstable { bs: usize, utilization: f64 },

    /// No offloading fraction satisfies the per-slot caps at some BS.
    #[error("slot infeasible at BS {bs}: {reason}")]
    SlotInfeasible { bs: usize, reason: String },

    /// Even the minimum-energy offloading exceeds a hard per-slot budget.
    #[error("energy {energy} exceeds the per-slot budget {budget}")]
    OverBudget { energy: f64, budget: f64 },

    #[error("state space of {states} joint cache states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
