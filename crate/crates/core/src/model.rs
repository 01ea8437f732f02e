//! Static network description, per-slot inputs and caching decisions.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{BsConfig, DemandConfig, GridConfig, ServiceConfig};

/// Set of cached services at one BS, one bit per service index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ServiceSet(pub u64);

impl ServiceSet {
    pub const EMPTY: ServiceSet = ServiceSet(0);

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = ServiceSet::EMPTY;
        for k in indices {
            s.insert(k);
        }
        s
    }

    #[inline]
    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, k: usize) {
        self.0 |= 1 << k;
    }

    #[inline]
    pub fn toggle(&mut self, k: usize) {
        self.0 ^= 1 << k;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let k = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(k)
        })
    }

    /// Bits as a `0`/`1` string, service 0 first.
    pub fn to_bit_string(self, n_services: usize) -> String {
        (0..n_services).map(|k| if self.contains(k) { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for ServiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsParams {
    /// Storage capacity `C_n`.
    pub storage: f64,
    /// Maximum CPU frequency `f_n`, Gcycles/s.
    pub cpu_freq: f64,
    /// Static power `gamma_n`.
    pub static_power: f64,
    /// Energy per Gcycle at maximum speed, `kappa_n`.
    pub unit_energy: f64,
    pub e_max: f64,
    pub d_max: f64,
}

impl From<&BsConfig> for BsParams {
    fn from(c: &BsConfig) -> Self {
        BsParams {
            storage: c.storage_gb,
            cpu_freq: c.cpu_gcycles,
            static_power: c.static_power,
            unit_energy: c.unit_energy,
            e_max: c.e_max,
            d_max: c.d_max,
        }
    }
}

/// Static topology: BSs, regions and which BSs cover which region.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    bs: Vec<BsParams>,
    coverage: Vec<Vec<usize>>,
    regions_of: Vec<Vec<usize>>,
    positions: Option<Vec<(f64, f64)>>,
}

impl NetworkModel {
    /// `coverage[m]` lists the BSs in radio range of region `m`.
    pub fn new(bs: Vec<BsParams>, coverage: Vec<Vec<usize>>) -> Result<Self> {
        let n_bs = bs.len();
        if n_bs == 0 {
            return Err(Error::InvalidModel("network has no base stations".into()));
        }
        if coverage.is_empty() {
            return Err(Error::InvalidModel("network has no regions".into()));
        }
        for (n, p) in bs.iter().enumerate() {
            let ok = p.storage > 0.0
                && p.cpu_freq > 0.0
                && p.unit_energy >= 0.0
                && p.static_power >= 0.0
                && p.e_max > p.static_power
                && p.d_max > 0.0;
            if !ok {
                return Err(Error::InvalidModel(format!("BS {n} has invalid parameters {p:?}")));
            }
        }
        let mut coverage = coverage;
        let mut regions_of = vec![Vec::new(); n_bs];
        for (m, set) in coverage.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidModel(format!("region {m} is not covered by any BS")));
            }
            for &n in set.iter() {
                if n >= n_bs {
                    return Err(Error::InvalidModel(format!("region {m} references BS {n}")));
                }
                regions_of[n].push(m);
            }
        }
        Ok(NetworkModel { bs, coverage, regions_of, positions: None })
    }

    pub fn with_positions(mut self, positions: Vec<(f64, f64)>) -> Result<Self> {
        if positions.len() != self.n_bs() {
            return Err(Error::Dimension(format!("{} positions for {} BSs", positions.len(), self.n_bs())));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn n_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn n_regions(&self) -> usize {
        self.coverage.len()
    }

    pub fn bs(&self, n: usize) -> &BsParams {
        &self.bs[n]
    }

    pub fn bs_params(&self) -> &[BsParams] {
        &self.bs
    }

    pub fn bs_params_mut(&mut self) -> &mut [BsParams] {
        &mut self.bs
    }

    /// BSs covering region `m`, sorted.
    pub fn coverage(&self, m: usize) -> &[usize] {
        &self.coverage[m]
    }

    /// Regions covered by BS `n`, sorted.
    pub fn regions_of(&self, n: usize) -> &[usize] {
        &self.regions_of[n]
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    pub fn total_e_max(&self) -> f64 {
        self.bs.iter().map(|b| b.e_max).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceCatalog {
    storage: Vec<f64>,
    workload: Vec<f64>,
}

impl ServiceCatalog {
    /// `storage[k]` is `c_k`; `workload[k]` is the mean task size `mu_k` in Gcycles.
    pub fn new(storage: Vec<f64>, workload: Vec<f64>) -> Result<Self> {
        if storage.len() != workload.len() {
            return Err(Error::Dimension(format!("{} storage sizes vs {} workloads", storage.len(), workload.len())));
        }
        if storage.is_empty() || storage.len() > 64 {
            return Err(Error::InvalidModel("catalog must hold 1..=64 services".into()));
        }
        if storage.iter().chain(&workload).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidModel("service storage and workload must be positive".into()));
        }
        Ok(ServiceCatalog { storage, workload })
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, cfg: &ServiceConfig) -> Result<Self> {
        let workload = (0..cfg.count).map(|_| cfg.workload_gcycles.sample(rng)).collect();
        let storage = (0..cfg.count).map(|_| cfg.storage_gb.sample(rng)).collect();
        ServiceCatalog::new(storage, workload)
    }

    pub fn n_services(&self) -> usize {
        self.storage.len()
    }

    pub fn storage(&self, k: usize) -> f64 {
        self.storage[k]
    }

    pub fn workload(&self, k: usize) -> f64 {
        self.workload[k]
    }

    pub fn workloads(&self) -> &[f64] {
        &self.workload
    }

    pub fn set_storage(&self, set: ServiceSet) -> f64 {
        set.iter().map(|k| self.storage[k]).sum()
    }

    pub fn all(&self) -> ServiceSet {
        ServiceSet(u64::MAX >> (64 - self.n_services()))
    }

    /// Checks that at least one service fits in every BS.
    pub fn check_fits(&self, net: &NetworkModel) -> Result<()> {
        let smallest = self.storage.iter().cloned().fold(f64::INFINITY, f64::min);
        let tightest = net.bs_params().iter().map(|b| b.storage).fold(f64::INFINITY, f64::min);
        if smallest > tightest {
            return Err(Error::InvalidModel(format!(
                "smallest service ({smallest}) does not fit the smallest BS storage ({tightest})"
            )));
        }
        Ok(())
    }
}

/// Stochastic inputs of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    /// `demand[m][k]`: Poisson rate of service `k` tasks in region `m`.
    pub demand: Vec<Vec<f64>>,
    /// Delay per cloud-processed task `h`, seconds.
    pub cloud_delay: f64,
    /// Load-independent energy per BS.
    pub aux_energy: Vec<f64>,
}

impl SlotState {
    pub fn validate(&self, net: &NetworkModel, cat: &ServiceCatalog) -> Result<()> {
        if self.demand.len() != net.n_regions() {
            return Err(Error::Dimension(format!(
                "demand has {} regions, network has {}",
                self.demand.len(),
                net.n_regions()
            )));
        }
        if self.demand.iter().any(|row| row.len() != cat.n_services()) {
            return Err(Error::Dimension("demand row length differs from service count".into()));
        }
        if self.aux_energy.len() != net.n_bs() {
            return Err(Error::Dimension("aux_energy length differs from BS count".into()));
        }
        let finite_nonneg = |x: &f64| x.is_finite() && *x >= 0.0;
        if !self.demand.iter().flatten().all(finite_nonneg) || !self.aux_energy.iter().all(finite_nonneg) {
            return Err(Error::InvalidModel("slot entries must be finite and non-negative".into()));
        }
        if !(self.cloud_delay > 0.0 && self.cloud_delay.is_finite()) {
            return Err(Error::InvalidModel("cloud delay must be positive".into()));
        }
        Ok(())
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().flatten().sum()
    }

    pub fn total_aux_energy(&self) -> f64 {
        self.aux_energy.iter().sum()
    }

    /// Demand of service `k` summed over the regions covered by BS `n`.
    pub fn covered_demand(&self, net: &NetworkModel, n: usize, k: usize) -> f64 {
        net.regions_of(n).iter().map(|&m| self.demand[m][k]).sum()
    }
}

/// Draws one slot: every demand entry, the cloud delay and each BS's
/// auxiliary energy independently and uniformly from the configured ranges.
pub fn sample_slot<R: Rng + ?Sized>(
    rng: &mut R,
    n_regions: usize,
    n_services: usize,
    n_bs: usize,
    cfg: &DemandConfig,
) -> SlotState {
    let demand = (0..n_regions).map(|_| (0..n_services).map(|_| cfg.rate.sample(rng)).collect()).collect();
    let cloud_delay = cfg.cloud_delay_s.sample(rng);
    let aux_energy = (0..n_bs).map(|_| cfg.aux_energy.sample(rng)).collect();
    SlotState { demand, cloud_delay, aux_energy }
}

/// Caching matrix and offloading fractions for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub cache: Vec<ServiceSet>,
    pub offload: Vec<f64>,
}

impl Decision {
    pub fn empty(n_bs: usize) -> Self {
        Decision { cache: vec![ServiceSet::EMPTY; n_bs], offload: vec![0.0; n_bs] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Storage,
    OffloadRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible,
    Violated { bs: usize, constraint: Constraint },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

pub fn check_dimensions(net: &NetworkModel, cat: &ServiceCatalog, cache: &[ServiceSet]) -> Result<()> {
    if cache.len() != net.n_bs() {
        return Err(Error::Dimension(format!("{} cache rows for {} BSs", cache.len(), net.n_bs())));
    }
    let all = cat.all();
    if let Some(n) = cache.iter().position(|row| row.0 & !all.0 != 0) {
        return Err(Error::Dimension(format!("cache row {n} names a service beyond K")));
    }
    Ok(())
}

#[inline]
pub fn row_fits(cat: &ServiceCatalog, params: &BsParams, row: ServiceSet) -> bool {
    cat.set_storage(row) <= params.storage
}

pub fn validate_decision(net: &NetworkModel, cat: &ServiceCatalog, dec: &Decision) -> Result<Feasibility> {
    check_dimensions(net, cat, &dec.cache)?;
    if dec.offload.len() != net.n_bs() {
        return Err(Error::Dimension(format!("{} offload entries for {} BSs", dec.offload.len(), net.n_bs())));
    }
    for n in 0..net.n_bs() {
        if !row_fits(cat, net.bs(n), dec.cache[n]) {
            return Ok(Feasibility::Violated { bs: n, constraint: Constraint::Storage });
        }
        if !(0.0..=1.0).contains(&dec.offload[n]) {
            return Ok(Feasibility::Violated { bs: n, constraint: Constraint::OffloadRange });
        }
    }
    Ok(Feasibility::Feasible)
}

/// Per-BS arrival rates induced by a caching matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProfile {
    /// `rates[n][k]` = `lambda_{n,k}`.
    pub rates: Vec<Vec<f64>>,
    /// `totals[n]` = `sum_k lambda_{n,k}`.
    pub totals: Vec<f64>,
    /// Demand no covering BS can serve; goes to the cloud.
    pub uncovered: f64,
}

/// Fills `out[k]` with `lambda_{n,k}` for one BS. Regional demand for `k` is
/// split evenly among the covering BSs that cache `k`.
pub fn bs_rates(net: &NetworkModel, slot: &SlotState, cache: &[ServiceSet], n: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let row = cache[n];
    if row.is_empty() {
        return;
    }
    for &m in net.regions_of(n) {
        let covering = net.coverage(m);
        for k in row.iter() {
            let holders = covering.iter().filter(|&&b| cache[b].contains(k)).count();
            out[k] += slot.demand[m][k] / holders as f64;
        }
    }
}

/// Demand in regions where no covering BS caches the requested service.
pub fn uncovered_demand(net: &NetworkModel, slot: &SlotState, cache: &[ServiceSet]) -> f64 {
    let mut total = 0.0;
    for (m, row) in slot.demand.iter().enumerate() {
        let union = net.coverage(m).iter().fold(0u64, |acc, &b| acc | cache[b].0);
        for (k, &d) in row.iter().enumerate() {
            if union >> k & 1 == 0 {
                total += d;
            }
        }
    }
    total
}

pub fn split_demand(net: &NetworkModel, slot: &SlotState, cache: &[ServiceSet]) -> ArrivalProfile {
    let n_services = slot.demand.first().map_or(0, Vec::len);
    let mut rates = vec![vec![0.0; n_services]; net.n_bs()];
    for (n, row) in rates.iter_mut().enumerate() {
        bs_rates(net, slot, cache, n, row);
    }
    let totals = rates.iter().map(|r| r.iter().sum()).collect();
    let uncovered = uncovered_demand(net, slot, cache);
    ArrivalProfile { rates, totals, uncovered }
}

/// Regular grid deployment. BSs sit at the centres of a `bs_rows x bs_cols`
/// partition of the square, regions are the cells of a
/// `region_rows x region_cols` partition, and region `m` is covered by BS `n`
/// iff the distance between the region centroid and the BS is at most the
/// serving radius. Indices are row-major.
pub fn build_grid_scenario(grid: &GridConfig, bs: &BsConfig) -> Result<NetworkModel> {
    if !(grid.radius_m > 0.0) || !(grid.side_m > 0.0) {
        return Err(Error::Config("grid side and radius must be positive".into()));
    }
    if grid.bs_rows == 0 || grid.bs_cols == 0 || grid.region_rows == 0 || grid.region_cols == 0 {
        return Err(Error::Config("grid dimensions must be >= 1".into()));
    }
    let centres = |rows: usize, cols: usize| -> Vec<(f64, f64)> {
        let (dx, dy) = (grid.side_m / cols as f64, grid.side_m / rows as f64);
        (0..rows).flat_map(|r| (0..cols).map(move |c| ((c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy))).collect()
    };
    let bs_pos = centres(grid.bs_rows, grid.bs_cols);
    let region_pos = centres(grid.region_rows, grid.region_cols);
    let coverage: Vec<Vec<usize>> = region_pos
        .iter()
        .map(|&(rx, ry)| {
            bs_pos
                .iter()
                .enumerate()
                .filter(|(_, &(bx, by))| (rx - bx).hypot(ry - by) <= grid.radius_m)
                .map(|(n, _)| n)
                .collect()
        })
        .collect();
    if let Some(m) = coverage.iter().position(Vec::is_empty) {
        return Err(Error::Config(format!(
            "region {m} at {:?} is outside every BS radius of {} m",
            region_pos[m], grid.radius_m
        )));
    }
    let params = vec![BsParams::from(bs); bs_pos.len()];
    NetworkModel::new(params, coverage)?.with_positions(bs_pos)
}
