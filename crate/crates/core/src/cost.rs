//! Energy, M/G/1 sojourn time and delay cost per BS, and the system totals.
//!
//! Task sizes are in Gcycles and CPU frequencies in Gcycles/s, so a task of
//! size `s` occupies the server for `s / f` seconds. The Pollaczek-Khinchine
//! mean sojourn time with that service time is
//!
//! ```text
//! T = E[s]/f + lambda E[s^2] / (2 f (f - lambda E[s]))
//! ```
//!
//! and an idle BS (zero retained rate) has `T = 0` by convention.

use crate::error::{Error, Result};
use crate::model::{split_demand, ArrivalProfile, BsParams, Decision, NetworkModel, ServiceCatalog, SlotState};

/// First two moments of the mixed-exponential task size at one BS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMoments {
    /// `E[s]`, Gcycles.
    pub mean: f64,
    /// `E[s^2]`, Gcycles^2.
    pub second: f64,
    /// Total retained rate `lambda~_n`, tasks/s.
    pub rate: f64,
}

/// Moments of the task-size mixture given the retained per-service rates.
pub fn service_moments(retained: &[f64], cat: &ServiceCatalog) -> ServiceMoments {
    let rate: f64 = retained.iter().sum();
    if rate <= 0.0 {
        return ServiceMoments { mean: 0.0, second: 0.0, rate: 0.0 };
    }
    let mut mean = 0.0;
    let mut second = 0.0;
    for (k, &r) in retained.iter().enumerate() {
        let mu = cat.workload(k);
        mean += mu * r;
        second += 2.0 * mu * mu * r;
    }
    ServiceMoments { mean: mean / rate, second: second / rate, rate }
}

/// Expected sojourn time (seconds) of the M/G/1 queue at BS `n`.
pub fn sojourn_time(net: &NetworkModel, n: usize, m: &ServiceMoments) -> Result<f64> {
    sojourn_with_freq(net.bs(n).cpu_freq, m).map_err(|utilization| Error::Unstable { bs: n, utilization })
}

/// Sojourn time for a server of frequency `f`; `Err` carries the utilization
/// when the queue is unstable.
pub fn sojourn_with_freq(f: f64, m: &ServiceMoments) -> Result<f64, f64> {
    if m.rate <= 0.0 {
        return Ok(0.0);
    }
    let load = m.rate * m.mean;
    if load >= f {
        return Err(load / f);
    }
    Ok(m.mean / f + m.rate * m.second / (2.0 * f * (f - load)))
}

/// Retained per-service rates `b_n * lambda_{n,k}`.
pub fn retained_rates(dec: &Decision, arrivals: &ArrivalProfile, n: usize) -> Vec<f64> {
    arrivals.rates[n].iter().map(|&l| dec.offload[n] * l).collect()
}

/// `E_n = gamma_n + kappa_n b_n sum_k mu_k a_{n,k} lambda_{n,k}`.
pub fn bs_energy(net: &NetworkModel, cat: &ServiceCatalog, n: usize, dec: &Decision, arrivals: &ArrivalProfile) -> f64 {
    let p = net.bs(n);
    let cycles: f64 = dec.cache[n].iter().map(|k| cat.workload(k) * arrivals.rates[n][k]).sum();
    p.static_power + p.unit_energy * dec.offload[n] * cycles
}

/// `D_n = lambda~_n T_n + (lambda_n - lambda~_n) h`.
pub fn bs_delay_cost(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    n: usize,
    dec: &Decision,
    arrivals: &ArrivalProfile,
    cloud_delay: f64,
) -> Result<f64> {
    let moments = service_moments(&retained_rates(dec, arrivals, n), cat);
    let t = sojourn_time(net, n, &moments)?;
    Ok(moments.rate * t + (arrivals.totals[n] - moments.rate) * cloud_delay)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsCostBreakdown {
    pub arrival_rate: f64,
    pub local_rate: f64,
    pub retained: Vec<f64>,
    pub utilization: f64,
    pub energy: f64,
    pub aux_energy: f64,
    pub sojourn: f64,
    pub delay_cost: f64,
    pub moments: ServiceMoments,
}

impl BsCostBreakdown {
    /// Gcycles/s processed locally.
    pub fn local_cycles(&self) -> f64 {
        self.moments.rate * self.moments.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemCost {
    /// `D^ = sum_n D_n + h u`.
    pub delay: f64,
    /// `E^ = sum_n (E_n + E~_n)`.
    pub energy: f64,
    pub uncovered: f64,
    pub per_bs: Vec<BsCostBreakdown>,
}

pub fn system_cost(net: &NetworkModel, cat: &ServiceCatalog, slot: &SlotState, dec: &Decision) -> Result<SystemCost> {
    let arrivals = split_demand(net, slot, &dec.cache);
    let mut per_bs = Vec::with_capacity(net.n_bs());
    for n in 0..net.n_bs() {
        let retained = retained_rates(dec, &arrivals, n);
        let moments = service_moments(&retained, cat);
        let sojourn = sojourn_time(net, n, &moments)?;
        let delay_cost = moments.rate * sojourn + (arrivals.totals[n] - moments.rate) * slot.cloud_delay;
        per_bs.push(BsCostBreakdown {
            arrival_rate: arrivals.totals[n],
            local_rate: moments.rate,
            utilization: moments.rate * moments.mean / net.bs(n).cpu_freq,
            energy: bs_energy(net, cat, n, dec, &arrivals),
            aux_energy: slot.aux_energy[n],
            sojourn,
            delay_cost,
            moments,
            retained,
        });
    }
    let delay = per_bs.iter().map(|b| b.delay_cost).sum::<f64>() + slot.cloud_delay * arrivals.uncovered;
    let energy = per_bs.iter().map(|b| b.energy + b.aux_energy).sum();
    Ok(SystemCost { delay, energy, uncovered: arrivals.uncovered, per_bs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapViolation {
    Energy { bs: usize },
    Delay { bs: usize },
}

/// Checks `E_n + E~_n <= E^max_n` and `D_n <= D^max_n` for every BS.
pub fn per_slot_constraints_ok(net: &NetworkModel, breakdowns: &[BsCostBreakdown]) -> Result<(), Vec<CapViolation>> {
    let mut violations = Vec::new();
    for (n, b) in breakdowns.iter().enumerate() {
        let p = net.bs(n);
        if b.energy + b.aux_energy > p.e_max {
            violations.push(CapViolation::Energy { bs: n });
        }
        if b.delay_cost > p.d_max {
            violations.push(CapViolation::Delay { bs: n });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Aggregate load of one BS: the three sums the per-BS cost depends on once
/// the caching matrix is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BsLoad {
    /// `sum_k lambda_{n,k}`.
    pub rate: f64,
    /// `sum_k mu_k lambda_{n,k}`, Gcycles/s at `b = 1`.
    pub cycles: f64,
    /// `sum_k mu_k^2 lambda_{n,k}`.
    pub cycles_sq: f64,
}

impl BsLoad {
    pub fn from_rates(rates: &[f64], cat: &ServiceCatalog) -> Self {
        let mut load = BsLoad::default();
        for (k, &r) in rates.iter().enumerate() {
            let mu = cat.workload(k);
            load.rate += r;
            load.cycles += mu * r;
            load.cycles_sq += mu * mu * r;
        }
        load
    }

    /// `D_n(b)`; equal to `lambda~ T + (lambda - lambda~) h` with the moments
    /// substituted. Infinite at or beyond saturation.
    #[inline]
    pub fn delay(&self, f: f64, h: f64, b: f64) -> f64 {
        let busy = b * self.cycles;
        if busy >= f {
            return f64::INFINITY;
        }
        busy / f + b * b * self.rate * self.cycles_sq / (f * (f - busy)) + (1.0 - b) * self.rate * h
    }

    #[inline]
    pub fn energy(&self, p: &BsParams, b: f64) -> f64 {
        p.static_power + p.unit_energy * b * self.cycles
    }
}
