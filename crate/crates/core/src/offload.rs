//! Offloading fractions for a fixed caching matrix.
//!
//! Once the caching matrix is fixed the arrival rates are fixed too, and the
//! delay and energy of BS `n` depend on `b_n` alone. The slot objective
//! `V D^ + q E^` therefore splits into one bounded scalar problem per BS:
//!
//! ```text
//! g_n(b) = V D_n(b) + q E_n(b),   b in [lo_n, hi_n]
//! ```
//!
//! where `[lo_n, hi_n]` is `[0, 1]` shrunk by the stability margin, the
//! per-slot energy cap and the per-slot delay-cost cap, in that order.

use crate::cost::{system_cost, BsLoad};
use crate::error::{Error, Result};
use crate::model::{
    check_dimensions, split_demand, BsParams, Decision, NetworkModel, ServiceCatalog, ServiceSet, SlotState,
};
use crate::scenario::InnerMethod;

pub const SCAN_POINTS: usize = 64;
pub const B_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadOptions {
    pub method: InnerMethod,
    /// Retained utilization is kept at or below `1 - stability_margin`.
    pub stability_margin: f64,
}

impl Default for OffloadOptions {
    fn default() -> Self {
        OffloadOptions { method: InnerMethod::Golden, stability_margin: 1e-6 }
    }
}

/// Weights of the drift-plus-penalty objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub v: f64,
    pub q: f64,
}

impl Weights {
    pub fn new(v: f64, q: f64) -> Self {
        debug_assert!(v >= 0.0 && q >= 0.0);
        Weights { v, q }
    }

    /// Delay only.
    pub fn delay() -> Self {
        Weights { v: 1.0, q: 0.0 }
    }
}

/// One BS's scalar subproblem.
#[derive(Debug, Clone, Copy)]
pub struct BsProblem<'a> {
    pub params: &'a BsParams,
    pub load: BsLoad,
    pub aux_energy: f64,
    pub cloud_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSolution {
    pub b: f64,
    pub delay: f64,
    pub energy: f64,
}

impl BsSolution {
    pub fn objective(&self, w: Weights) -> f64 {
        w.v * self.delay + w.q * self.energy
    }
}

impl<'a> BsProblem<'a> {
    pub fn delay(&self, b: f64) -> f64 {
        self.load.delay(self.params.cpu_freq, self.cloud_delay, b)
    }

    pub fn energy(&self, b: f64) -> f64 {
        self.load.energy(self.params, b)
    }

    pub fn objective(&self, w: Weights, b: f64) -> f64 {
        w.v * self.delay(b) + w.q * self.energy(b)
    }

    fn solution(&self, b: f64) -> BsSolution {
        BsSolution { b, delay: self.delay(b), energy: self.energy(b) }
    }

    /// Largest `b` with utilization at most `1 - margin`.
    pub fn stability_cap(&self, margin: f64) -> f64 {
        if self.load.cycles > 0.0 {
            (1.0f64).min((1.0 - margin) * self.params.cpu_freq / self.load.cycles)
        } else {
            1.0
        }
    }

    /// Feasible range of `b`, or the reason there is none.
    pub fn feasible_interval(&self, margin: f64) -> Result<(f64, f64), String> {
        let p = self.params;
        let mut hi = self.stability_cap(margin);

        let headroom = p.e_max - p.static_power - self.aux_energy;
        if headroom < 0.0 {
            return Err(format!(
                "static plus auxiliary energy {} exceeds E_max {}",
                p.static_power + self.aux_energy,
                p.e_max
            ));
        }
        let slope = p.unit_energy * self.load.cycles;
        if slope > 0.0 {
            hi = hi.min(headroom / slope);
        }

        let mut lo = 0.0;
        let d_max = p.d_max;
        if self.delay(lo) > d_max || self.delay(hi) > d_max {
            // D_n is convex in b: the sublevel set is an interval around its minimiser.
            let b_min = self.analytic_argmin(Weights::delay(), lo, hi);
            if self.delay(b_min) > d_max {
                return Err(format!("delay cost cannot be brought below D_max {d_max}"));
            }
            if self.delay(lo) > d_max {
                lo = bisect_boundary(|b| self.delay(b) <= d_max, lo, b_min);
            }
            if self.delay(hi) > d_max {
                hi = bisect_boundary(|b| self.delay(b) <= d_max, hi, b_min);
            }
        }
        Ok((lo, hi))
    }

    /// Stationary point of `g_n` clipped to `[lo, hi]`. `g_n` is convex on
    /// the stable range, so this is its minimiser there.
    pub fn analytic_argmin(&self, w: Weights, lo: f64, hi: f64) -> f64 {
        let BsLoad { rate, cycles, cycles_sq } = self.load;
        if rate <= 0.0 || cycles <= 0.0 || w.v <= 0.0 {
            // Objective is non-decreasing in b.
            return lo;
        }
        let f = self.params.cpu_freq;
        let marginal = rate * self.cloud_delay - cycles / f - w.q * self.params.unit_energy * cycles / w.v;
        if marginal <= 0.0 {
            return lo;
        }
        let a = rate * cycles_sq / (cycles * f);
        let busy = f * (1.0 - 1.0 / (1.0 + marginal / a).sqrt());
        (busy / cycles).clamp(lo, hi)
    }

    /// Minimises `g_n` over the feasible interval.
    pub fn solve(&self, w: Weights, opts: &OffloadOptions) -> Result<BsSolution, String> {
        if self.load.rate <= 0.0 {
            self.feasible_interval(opts.stability_margin)?;
            return Ok(self.solution(0.0));
        }
        let (lo, hi) = self.feasible_interval(opts.stability_margin)?;
        let b = match opts.method {
            InnerMethod::Analytic => self.analytic_argmin(w, lo, hi),
            InnerMethod::Golden => golden_section(|b| self.objective(w, b), lo, hi, B_TOLERANCE).0,
        };
        Ok(self.solution(b))
    }
}

/// Bisects between an infeasible point and a feasible one and returns the
/// feasible end of the final bracket.
fn bisect_boundary(feasible: impl Fn(f64) -> bool, mut bad: f64, mut good: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (bad + good);
        if mid == bad || mid == good {
            break;
        }
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Scans `SCAN_POINTS` equispaced points, refines the best bracket by
/// golden-section search to width `tol`, and returns the best of the
/// refined point, the best scan point and the interval ends. Ties go to the
/// smaller `x`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid = |i: usize| if i == SCAN_POINTS - 1 { hi } else { lo + step * i as f64 };
    let (mut best_i, mut best_f) = (0, f(lo));
    for i in 1..SCAN_POINTS {
        let v = f(grid(i));
        if v < best_f {
            best_i = i;
            best_f = v;
        }
    }
    let mut a = grid(best_i.saturating_sub(1));
    let mut d = grid((best_i + 1).min(SCAN_POINTS - 1));

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut b = d - INV_PHI * (d - a);
    let mut c = a + INV_PHI * (d - a);
    let (mut fb, mut fc) = (f(b), f(c));
    while d - a > tol {
        if fb <= fc {
            d = c;
            c = b;
            fc = fb;
            b = d - INV_PHI * (d - a);
            fb = f(b);
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + INV_PHI * (d - a);
            fc = f(c);
        }
    }
    let (xr, fr) = if fb <= fc { (b, fb) } else { (c, fc) };

    let mut best = (lo, f(lo));
    for cand in [(grid(best_i), best_f), (xr, fr), (hi, f(hi))] {
        if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
            best = cand;
        }
    }
    best
}

/// Assembles `V (sum_n D_n + h u) + q (sum_n E_n + sum_n E~_n)` from the
/// per-BS terms `V D_n + q E_n`. Every full and incremental evaluation goes
/// through here so that equal inputs give bit-identical totals.
pub fn assemble_objective(bs_terms: &[f64], w: Weights, cloud_delay: f64, uncovered: f64, aux_total: f64) -> f64 {
    let mut total = 0.0;
    for &g in bs_terms {
        total += g;
    }
    total + w.v * cloud_delay * uncovered + w.q * aux_total
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadSolution {
    pub offload: Vec<f64>,
    pub objective: f64,
    pub per_bs: Vec<BsSolution>,
}

impl OffloadSolution {
    pub fn decision(&self, cache: &[ServiceSet]) -> Decision {
        Decision { cache: cache.to_vec(), offload: self.offload.clone() }
    }

    pub fn energy(&self, slot: &SlotState) -> f64 {
        self.per_bs.iter().map(|s| s.energy).sum::<f64>() + slot.total_aux_energy()
    }
}

fn bs_problems<'a>(
    net: &'a NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
) -> Result<(Vec<BsProblem<'a>>, f64)> {
    check_dimensions(net, cat, cache)?;
    slot.validate(net, cat)?;
    let arrivals = split_demand(net, slot, cache);
    let problems = (0..net.n_bs())
        .map(|n| BsProblem {
            params: net.bs(n),
            load: BsLoad::from_rates(&arrivals.rates[n], cat),
            aux_energy: slot.aux_energy[n],
            cloud_delay: slot.cloud_delay,
        })
        .collect();
    Ok((problems, arrivals.uncovered))
}

pub fn solve_offload(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
    v: f64,
    q: f64,
) -> Result<OffloadSolution> {
    solve_offload_with(net, cat, slot, cache, Weights::new(v, q), &OffloadOptions::default())
}

pub fn solve_offload_with(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
    w: Weights,
    opts: &OffloadOptions,
) -> Result<OffloadSolution> {
    let (problems, uncovered) = bs_problems(net, cat, slot, cache)?;
    let per_bs = problems
        .iter()
        .enumerate()
        .map(|(n, p)| p.solve(w, opts).map_err(|reason| Error::SlotInfeasible { bs: n, reason }))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<f64> = per_bs.iter().map(|s| s.objective(w)).collect();
    let objective = assemble_objective(&terms, w, slot.cloud_delay, uncovered, slot.total_aux_energy());
    Ok(OffloadSolution { offload: per_bs.iter().map(|s| s.b).collect(), objective, per_bs })
}

/// Minimises `D^` subject to `E^ <= budget` for a fixed caching matrix.
///
/// The budget couples the BSs, so it is priced with a multiplier `p >= 0`:
/// each BS solves `D_n + p E_n` independently and `p` is bisected until the
/// total energy meets the budget. The returned solution is always on the
/// feasible side. The objective reported is `D^`.
pub fn solve_offload_budgeted(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
    budget: f64,
    opts: &OffloadOptions,
) -> Result<OffloadSolution> {
    let (problems, uncovered) = bs_problems(net, cat, slot, cache)?;
    solve_budgeted_problems(&problems, uncovered, slot, budget, opts)
}

pub(crate) fn solve_budgeted_problems(
    problems: &[BsProblem<'_>],
    uncovered: f64,
    slot: &SlotState,
    budget: f64,
    opts: &OffloadOptions,
) -> Result<OffloadSolution> {
    let intervals = problems
        .iter()
        .enumerate()
        .map(|(n, p)| {
            p.feasible_interval(opts.stability_margin).map_err(|reason| Error::SlotInfeasible { bs: n, reason })
        })
        .collect::<Result<Vec<_>>>()?;
    let aux_total = slot.total_aux_energy();

    let solve_at = |price: f64| -> Vec<BsSolution> {
        let w = Weights::new(1.0, price);
        problems
            .iter()
            .zip(&intervals)
            .map(|(p, &(lo, hi))| {
                // The price search needs many exact inner solves; the closed
                // form is used regardless of `opts.method`.
                let b = if p.load.rate <= 0.0 { 0.0 } else { p.analytic_argmin(w, lo, hi) };
                p.solution(b)
            })
            .collect()
    };
    let energy_of = |sols: &[BsSolution]| sols.iter().map(|s| s.energy).sum::<f64>() + aux_total;

    let floor: f64 = problems.iter().zip(&intervals).map(|(p, &(lo, _))| p.energy(lo)).sum::<f64>() + aux_total;
    if floor > budget {
        return Err(Error::OverBudget { energy: floor, budget });
    }

    let mut best = solve_at(0.0);
    if energy_of(&best) > budget {
        let mut lo_price = 0.0;
        let mut hi_price = 1.0;
        let mut hi_sol = solve_at(hi_price);
        let mut doublings = 0;
        while energy_of(&hi_sol) > budget {
            lo_price = hi_price;
            hi_price *= 2.0;
            hi_sol = solve_at(hi_price);
            doublings += 1;
            if doublings > 200 {
                // Every b is at its lower end; floor <= budget guarantees feasibility.
                hi_sol = problems.iter().zip(&intervals).map(|(p, &(lo, _))| p.solution(lo)).collect();
                break;
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo_price + hi_price);
            if hi_price - lo_price <= 1e-9 * hi_price {
                break;
            }
            let sol = solve_at(mid);
            if energy_of(&sol) > budget {
                lo_price = mid;
            } else {
                hi_price = mid;
                hi_sol = sol;
            }
        }
        best = hi_sol;
    }

    let w = Weights::delay();
    let terms: Vec<f64> = best.iter().map(|s| s.objective(w)).collect();
    let objective = assemble_objective(&terms, w, slot.cloud_delay, uncovered, aux_total);
    Ok(OffloadSolution { offload: best.iter().map(|s| s.b).collect(), objective, per_bs: best })
}

/// `V D^ + q E^` of a complete decision, evaluated through the cost module.
pub fn objective_value(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    dec: &Decision,
    v: f64,
    q: f64,
) -> Result<f64> {
    let c = system_cost(net, cat, slot, dec)?;
    Ok(v * c.delay + q * c.energy)
}
