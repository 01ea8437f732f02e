#![allow(dead_code)]

use mec_cache::baselines::SchemeId;
use mec_cache::cost::{per_slot_constraints_ok, system_cost};
use mec_cache::gibbs::{feasible_rows, Evaluation, SlotProblem};
use mec_cache::harness::{run_scheme, Instance, SlotOutcome};
use mec_cache::model::{split_demand, BsParams, Decision, NetworkModel, ServiceCatalog, ServiceSet, SlotState};
use mec_cache::offload::{solve_offload, OffloadOptions, Weights};
use mec_cache::scenario::{Range, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random instance: 2-3 BSs, 2-4 services, one private region per BS
/// and one shared region per BS pair. Parameter ranges follow the default
/// scenario.
pub fn small_instance(seed: u64) -> (NetworkModel, ServiceCatalog, SlotState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=3usize);
    let k = rng.random_range(2..=4usize);
    small_instance_sized(&mut rng, n, k)
}

pub fn small_instance_sized(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (NetworkModel, ServiceCatalog, SlotState) {
    let bs: Vec<BsParams> = (0..n)
        .map(|_| BsParams {
            storage: rng.random_range(60.0..200.0),
            cpu_freq: rng.random_range(5.0..15.0),
            static_power: 0.5,
            unit_energy: 1.0,
            e_max: 1e3,
            d_max: 1e6,
        })
        .collect();
    let mut cov: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for i in 0..n {
        for j in i + 1..n {
            cov.push(vec![i, j]);
        }
    }
    let net = NetworkModel::new(bs, cov.clone()).unwrap();
    let cat = ServiceCatalog::new(
        (0..k).map(|_| rng.random_range(20.0..100.0)).collect(),
        (0..k).map(|_| rng.random_range(0.1..0.5)).collect(),
    )
    .unwrap();
    let slot = SlotState {
        demand: cov.iter().map(|_| (0..k).map(|_| rng.random_range(0.0..12.0)).collect()).collect(),
        cloud_delay: rng.random_range(2.0..4.0),
        aux_energy: (0..n).map(|_| rng.random_range(0.0..3.0)).collect(),
    };
    (net, cat, slot)
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Uniformly chosen storage-feasible row for every BS.
pub fn random_cache(rng: &mut ChaCha8Rng, net: &NetworkModel, cat: &ServiceCatalog) -> Vec<ServiceSet> {
    (0..net.n_bs())
        .map(|n| {
            let rows = feasible_rows(cat, net.bs(n));
            rows[rng.random_range(0..rows.len())]
        })
        .collect()
}

/// 2x2 BSs over a 3x3 region grid, 4 services. Cheap enough for repeated
/// end-to-end runs.
pub fn tiny_scenario(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig { seed, replications: 1, horizon: 10, ..ScenarioConfig::default() };
    cfg.grid.bs_rows = 2;
    cfg.grid.bs_cols = 2;
    cfg.grid.region_rows = 3;
    cfg.grid.region_cols = 3;
    cfg.grid.radius_m = 200.0;
    cfg.services.count = 4;
    cfg.demand.rate = Range { lo: 0.0, hi: 4.0 };
    cfg.control.q_budget = 8.0;
    cfg
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Rates routed to BSs plus uncovered demand equal the offered demand.
pub fn check_mass_conservation(net: &NetworkModel, slot: &SlotState, cache: &[ServiceSet]) -> Result<(), String> {
    let a = split_demand(net, slot, cache);
    let routed: f64 = a.rates.iter().flatten().sum::<f64>() + a.uncovered;
    let offered = slot.total_demand();
    if rel(routed, offered) > 1e-12 {
        return Err(format!("routed {routed} != offered {offered}"));
    }
    for (n, row) in a.rates.iter().enumerate() {
        for (k, &r) in row.iter().enumerate() {
            if r != 0.0 && !cache[n].contains(k) {
                return Err(format!("BS {n} receives service {k} it does not cache"));
            }
        }
    }
    Ok(())
}

/// Every slot of an OREO run obeys `q' = max(q + E - Q, 0)` starting from 0.
pub fn check_queue_recursion(cfg: &ScenarioConfig, horizon: usize) -> Result<(), String> {
    let inst = Instance::build(cfg, 0).map_err(|e| e.to_string())?;
    let budget = cfg.control.q_budget;
    let out = run_scheme(&inst, SchemeId::Oreo, horizon, 0, cfg.control.v, budget).map_err(|e| e.to_string())?;
    let mut q = 0.0;
    for o in &out {
        let expect = (q + o.energy - budget).max(0.0);
        if rel(o.q, expect) > 1e-12 {
            return Err(format!("slot {}: q = {}, recursion gives {expect}", o.t, o.q));
        }
        q = o.q;
    }
    Ok(())
}

/// Objective of `solve_offload` against a grid search over the offloading
/// vector, evaluated independently through `system_cost`. Returns the
/// relative gap `(solver - grid) / grid`.
pub fn decomposition_gap(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
    v: f64,
    q: f64,
) -> Result<f64, String> {
    let margin = OffloadOptions::default().stability_margin;
    let sol = solve_offload(net, cat, slot, cache, v, q).map_err(|e| e.to_string())?;
    let eval = |b: &[f64]| -> Option<f64> {
        let dec = Decision { cache: cache.to_vec(), offload: b.to_vec() };
        let c = system_cost(net, cat, slot, &dec).ok()?;
        if c.per_bs.iter().any(|x| x.utilization > 1.0 - margin) || per_slot_constraints_ok(net, &c.per_bs).is_err() {
            return None;
        }
        Some(v * c.delay + q * c.energy)
    };
    let n = net.n_bs();

    // Coarse joint grid.
    let coarse = 20usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; n];
    loop {
        let b: Vec<f64> = idx.iter().map(|&i| i as f64 / coarse as f64).collect();
        if let Some(f) = eval(&b) {
            if best.as_ref().is_none_or(|(g, _)| f < *g) {
                best = Some((f, b));
            }
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] <= coarse {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    let (mut fbest, mut b) = best.ok_or("no feasible grid point")?;

    // Coordinate refinement; the objective is separable in b.
    for (half, steps) in [(0.05, 2000usize), (1e-4, 400)] {
        for i in 0..n {
            let centre = b[i];
            for s in 0..=steps {
                let mut trial = b.clone();
                trial[i] = (centre - half + 2.0 * half * s as f64 / steps as f64).clamp(0.0, 1.0);
                if let Some(f) = eval(&trial) {
                    if f < fbest {
                        fbest = f;
                        b = trial;
                    }
                }
            }
        }
    }
    Ok((sol.objective - fbest) / fbest.abs().max(1.0))
}

/// Incremental row replacement against evaluation from scratch; returns the
/// relative objective difference.
pub fn delta_vs_full(
    net: &NetworkModel,
    cat: &ServiceCatalog,
    slot: &SlotState,
    cache: &[ServiceSet],
    n: usize,
    row: ServiceSet,
    w: Weights,
) -> Result<f64, String> {
    let p = SlotProblem::new(net, cat, slot, w).map_err(|e| e.to_string())?;
    let base = Evaluation::full(&p, cache).map_err(|e| e.to_string())?;
    let inc = base.with_row(&p, n, row).map_err(|e| e.to_string())?;
    let mut next = cache.to_vec();
    next[n] = row;
    let full = Evaluation::full(&p, &next).map_err(|e| e.to_string())?;
    if inc.cache != full.cache {
        return Err("cache rows differ".into());
    }
    let mut worst = rel(inc.objective, full.objective);
    for (a, b) in inc.solutions.iter().zip(&full.solutions) {
        worst = worst.max(rel(a.b, b.b)).max(rel(a.delay, b.delay)).max(rel(a.energy, b.energy));
    }
    Ok(worst)
}

/// Two runs of every compared scheme from the same config agree exactly.
pub fn check_determinism(cfg: &ScenarioConfig, horizon: usize) -> Result<(), String> {
    for scheme in SchemeId::COMPARED {
        let run = || -> Result<Vec<SlotOutcome>, String> {
            let inst = Instance::build(cfg, 0).map_err(|e| e.to_string())?;
            run_scheme(&inst, scheme, horizon, 0, cfg.control.v, cfg.control.q_budget).map_err(|e| e.to_string())
        };
        if run()? != run()? {
            return Err(format!("{scheme} differs between identical runs"));
        }
    }
    Ok(())
}
