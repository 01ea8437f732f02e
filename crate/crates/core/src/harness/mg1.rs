//! Single-server FIFO queue simulator used to check the sojourn-time formula.
//!
//! Tasks arrive as a Poisson process; each picks a service type with the
//! configured probability and draws an exponential size (Gcycles) with that
//! type's mean. The server runs at `cpu_freq` Gcycles/s. Successive waiting
//! times follow the Lindley recursion `W' = max(0, W + S - A)`.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cost::{service_moments, sojourn_with_freq, ServiceMoments};
use crate::error::{Error, Result};
use crate::model::ServiceCatalog;

pub const MIN_TASKS: usize = 100_000;
const BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mg1SimConfig {
    /// Tasks per second.
    pub arrival_rate: f64,
    /// Mixture probabilities (normalised internally).
    pub weights: Vec<f64>,
    /// Mean task size per service type, Gcycles.
    pub means: Vec<f64>,
    pub cpu_freq: f64,
    pub tasks: usize,
    pub seed: u64,
    /// Initial tasks discarded; defaults to 1% of `tasks`.
    #[serde(default)]
    pub warmup: Option<usize>,
}

impl Mg1SimConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Mg1SimConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn moments(&self) -> Result<ServiceMoments> {
        let total: f64 = self.weights.iter().sum();
        let cat = ServiceCatalog::new(vec![1.0; self.means.len()], self.means.clone())?;
        let rates: Vec<f64> = self.weights.iter().map(|w| self.arrival_rate * w / total).collect();
        Ok(service_moments(&rates, &cat))
    }

    pub fn utilization(&self) -> Result<f64> {
        let m = self.moments()?;
        Ok(m.rate * m.mean / self.cpu_freq)
    }

    /// Pollaczek-Khinchine prediction.
    pub fn analytic(&self) -> Result<f64> {
        let m = self.moments()?;
        sojourn_with_freq(self.cpu_freq, &m).map_err(|u| Error::Unstable { bs: 0, utilization: u })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return bad(format!("arrival_rate must be > 0, got {}", self.arrival_rate));
        }
        if self.weights.is_empty() || self.weights.len() != self.means.len() {
            return bad("weights and means must be non-empty and of equal length".into());
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return bad("weights must be non-negative with a positive sum".into());
        }
        if self.means.iter().any(|&m| !(m > 0.0)) || !(self.cpu_freq > 0.0) {
            return bad("means and cpu_freq must be positive".into());
        }
        if self.tasks < MIN_TASKS {
            return bad(format!("tasks must be >= {MIN_TASKS}"));
        }
        if self.warmup.is_some_and(|w| w >= self.tasks) {
            return bad("warmup must be smaller than tasks".into());
        }
        let rho = self.utilization()?;
        if rho >= 1.0 {
            return Err(Error::Unstable { bs: 0, utilization: rho });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mg1Estimate {
    /// Mean sojourn time, seconds.
    pub mean: f64,
    /// 95% confidence half-width from batch means.
    pub half_width: f64,
    pub tasks: usize,
}

impl Mg1Estimate {
    pub fn relative_error(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / reference
    }
}

pub fn mg1_event_sim(cfg: &Mg1SimConfig) -> Result<Mg1Estimate> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inter = Exp::new(cfg.arrival_rate).map_err(|e| Error::Config(e.to_string()))?;
    let sizes = cfg
        .means
        .iter()
        .map(|m| Exp::new(1.0 / m).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = cfg.weights.iter().sum();
    let mut cdf: Vec<f64> = cfg
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();
    *cdf.last_mut().unwrap() = 1.0;

    let warmup = cfg.warmup.unwrap_or(cfg.tasks / 100);
    let kept = cfg.tasks - warmup;
    let batch_len = (kept / BATCHES).max(1);
    let mut batch_sums = Vec::with_capacity(BATCHES + 1);
    let (mut batch_acc, mut in_batch) = (0.0, 0usize);
    let mut wait = 0.0f64;
    let mut sum = 0.0;

    for i in 0..cfg.tasks {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let service = sizes[k].sample(&mut rng) / cfg.cpu_freq;
        let sojourn = wait + service;
        if i >= warmup {
            sum += sojourn;
            batch_acc += sojourn;
            in_batch += 1;
            if in_batch == batch_len {
                batch_sums.push(batch_acc / batch_len as f64);
                batch_acc = 0.0;
                in_batch = 0;
            }
        }
        let gap = inter.sample(&mut rng);
        wait = (sojourn - gap).max(0.0);
    }

    let mean = sum / kept as f64;
    let b = batch_sums.len() as f64;
    let var = batch_sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0).max(1.0);
    Ok(Mg1Estimate { mean, half_width: 1.96 * (var / b).sqrt(), tasks: kept })
}
