//! One test per acceptance criterion. Each prints a single
//! `[PASS]`/`[FAIL]` line before asserting; run with `--nocapture` to see
//! them.

mod common;

use std::time::{Duration, Instant};

use mec_cache::baselines::{exhaustive_oracle, SchemeId};
use mec_cache::cost::{sojourn_with_freq, ServiceMoments};
use mec_cache::gibbs::{enumerate_states, run_sampler, stationary_distribution_check, SamplerConfig, SlotProblem};
use mec_cache::harness::experiments::{run_experiment, ExperimentId, ExperimentSpec, Sweep};
use mec_cache::harness::metrics::{summarize, MetricsRow};
use mec_cache::harness::mg1::{mg1_event_sim, Mg1SimConfig};
use mec_cache::harness::{run_scheme, Instance};
use mec_cache::model::{BsParams, NetworkModel, ServiceCatalog, SlotState};
use mec_cache::offload::{OffloadOptions, Weights};
use mec_cache::scenario::ScenarioConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    check_determinism, check_mass_conservation, check_queue_recursion, decomposition_gap, delta_vs_full, random_cache,
    small_instance, tiny_scenario, verdict,
};

fn report(n: u32, ok: bool, msg: &str, elapsed: Duration) {
    println!("[{}] criterion {n}: {msg} ({:.1}s)", verdict(ok), elapsed.as_secs_f64());
}

#[test]
fn criterion_1_queueing_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let f = 10.0;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for mix in 0..10 {
        let k = rng.random_range(1..=4usize) + 1;
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..0.5)).collect();
        let total: f64 = weights.iter().sum();
        let mean_size: f64 = weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>() / total;
        for (j, rho) in [0.3, 0.5, 0.8].into_iter().enumerate() {
            let cfg = Mg1SimConfig {
                arrival_rate: rho * f / mean_size,
                weights: weights.clone(),
                means: means.clone(),
                cpu_freq: f,
                tasks: if rho > 0.7 { 4_000_000 } else { 1_000_000 },
                seed: 100 * mix + j as u64,
                warmup: None,
            };
            let exact = cfg.analytic().unwrap();
            let est = mg1_event_sim(&cfg).unwrap();
            worst = worst.max(est.relative_error(exact));
            cases += 1;
        }
    }

    // M/M/1: T = 1 / (f/mu - lambda).
    let mut identity_err: f64 = 0.0;
    for (mu, lambda) in [(0.5, 3.0), (0.2, 40.0), (0.35, 1e-3), (0.1, 99.0)] {
        let m = ServiceMoments { mean: mu, second: 2.0 * mu * mu, rate: lambda };
        let t = sojourn_with_freq(f, &m).unwrap();
        let exact = 1.0 / (f / mu - lambda);
        identity_err = identity_err.max((t - exact).abs() / exact);
    }

    let elapsed = start.elapsed();
    let ok = worst < 0.03 && identity_err <= 1e-12 && elapsed < Duration::from_secs(120);
    report(
        1,
        ok,
        &format!(
            "worst simulator error {:.2}% over {cases} cases, M/M/1 identity error {identity_err:.1e}",
            100.0 * worst
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_2_gibbs_optimality() {
    let start = Instant::now();
    let opts = OffloadOptions::default();
    let instances: Vec<_> = (0..50u64)
        .map(|i| {
            let (net, cat, slot) = small_instance(i);
            let (_, fstar) = exhaustive_oracle(&net, &cat, &slot, 1.0, 0.0, &opts).unwrap();
            let states = {
                let p = SlotProblem::new(&net, &cat, &slot, Weights::delay()).unwrap();
                enumerate_states(&p).unwrap().len()
            };
            assert!(states <= 4096);
            (net, cat, slot, fstar, states)
        })
        .collect();

    let success = |tau: f64| -> usize {
        instances
            .iter()
            .enumerate()
            .filter(|(i, (net, cat, slot, fstar, states))| {
                let p = SlotProblem::new(net, cat, slot, Weights::delay()).unwrap();
                let mut cfg = SamplerConfig::for_instance(net.n_bs(), cat.n_services(), tau, 7000 + *i as u64);
                cfg.patience = None;
                cfg.max_iterations = 200 * states;
                run_sampler(&p, &cfg).unwrap().objective() <= fstar * (1.0 + 1e-9)
            })
            .count()
    };
    let taus = [1e-3, 1e-2, 1e-1, 1.0];
    let rates: Vec<usize> = taus.iter().map(|&t| success(t)).collect();
    let optimal = rates[0] as f64 / instances.len() as f64;
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    let ok = optimal >= 0.95 && monotone && elapsed < Duration::from_secs(300);
    report(
        2,
        ok,
        &format!(
            "optimum reached in {}/50 runs at tau=1e-3 (need >= 95%); successes per tau {:?} = {rates:?} (need non-increasing)",
            rates[0], taus
        ),
        elapsed,
    );
    assert!(ok);
}

fn two_by_two() -> (NetworkModel, ServiceCatalog, SlotState) {
    let bs = BsParams { storage: 100.0, cpu_freq: 10.0, static_power: 0.5, unit_energy: 1.0, e_max: 100.0, d_max: 1e6 };
    let net = NetworkModel::new(vec![bs; 2], vec![vec![0], vec![0, 1], vec![1]]).unwrap();
    let cat = ServiceCatalog::new(vec![40.0, 50.0], vec![0.2, 0.4]).unwrap();
    let slot = SlotState {
        demand: vec![vec![0.6, 0.3], vec![0.5, 0.4], vec![0.2, 0.7]],
        cloud_delay: 2.5,
        aux_energy: vec![0.3, 0.8],
    };
    (net, cat, slot)
}

#[test]
fn criterion_3_stationary_distribution() {
    let start = Instant::now();
    let (net, cat, slot) = two_by_two();
    let p = SlotProblem::new(&net, &cat, &slot, Weights::new(1.0, 0.5)).unwrap();
    let r = stationary_distribution_check(&p, 0.5, 10_000, 1_000_000, 0xC3).unwrap();
    let elapsed = start.elapsed();
    let ok = r.total_variation < 0.05 && r.objectives.len() == 16 && elapsed < Duration::from_secs(120);
    report(
        3,
        ok,
        &format!(
            "TV distance {:.4} over {} states after {} steps (objective spread {:.3})",
            r.total_variation,
            r.objectives.len(),
            r.steps,
            r.objectives.iter().cloned().fold(f64::MIN, f64::max)
                - r.objectives.iter().cloned().fold(f64::MAX, f64::min)
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_4_long_term_constraint() {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let q_budget = cfg.control.q_budget;
    let inst = Instance::build(&cfg, 0).unwrap();
    let horizon = 2000;
    let run = |s: SchemeId| run_scheme(&inst, s, horizon, 0, cfg.control.v, q_budget).unwrap();
    let oreo = run(SchemeId::Oreo);
    let last = oreo.last().unwrap();
    let energy_ok = (last.avg_energy - q_budget).abs() <= 0.05 * q_budget;
    let queue_ok = last.q / horizon as f64 <= 0.05 * q_budget;
    let cent = run(SchemeId::CentralizedDelayOptimal).last().unwrap().avg_energy;
    let nonc = run(SchemeId::NonCooperative).last().unwrap().avg_energy;
    let myop = run(SchemeId::Myopic).last().unwrap().avg_energy;
    let baselines_ok = cent > q_budget && nonc > q_budget && myop <= q_budget + 1e-9;
    let elapsed = start.elapsed();
    let ok = energy_ok && queue_ok && baselines_ok;
    report(
        4,
        ok,
        &format!(
            "OREO avg energy {:.3} vs Q={q_budget}, q(T)/T={:.3} (limit {:.1}); centralized {cent:.2}, noncooperative {nonc:.2}, myopic {myop:.2}",
            last.avg_energy,
            last.q / horizon as f64,
            0.05 * q_budget
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_5_delay_energy_tradeoff() {
    let start = Instant::now();
    let mut spec = ExperimentSpec::new(ExperimentId::VSweep, ScenarioConfig::default());
    spec.seeds = vec![0];
    let out = run_experiment(&spec).unwrap();
    let mut s = out.summary.clone();
    s.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
    let d: Vec<f64> = s.iter().map(|r| r.delay.mean).collect();
    let e: Vec<f64> = s.iter().map(|r| r.energy.mean).collect();
    let ok = d.len() == 4 && d.windows(2).all(|w| w[1] <= w[0] * 1.01) && e.windows(2).all(|w| w[1] >= w[0] * 0.99);
    let elapsed = start.elapsed();
    report(
        5,
        ok,
        &format!(
            "V {:?}: avg delay {:?}, avg energy {:?}",
            s.iter().map(|r| r.sweep_value).collect::<Vec<_>>(),
            d.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>(),
            e.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
        elapsed,
    );
    assert!(ok);
}

fn mean_delay(rows: &[MetricsRow], scheme: &str, point: f64) -> f64 {
    summarize(rows).into_iter().find(|r| r.scheme == scheme && r.sweep_value == point).map(|r| r.delay.mean).unwrap()
}

#[test]
fn criterion_6_figure_trends() {
    let start = Instant::now();
    let base = ScenarioConfig::default();
    assert_eq!(base.replications, 20);

    // Fig. 2: delay ordering.
    let fig2 = run_experiment(&ExperimentSpec::new(ExperimentId::Fig2_3, base.clone())).unwrap();
    let d = |s: &str| mean_delay(&fig2.rows, s, 0.0);
    let (cent, oreo, myop, nonc) = (d("centralized"), d("oreo"), d("myopic"), d("noncooperative"));
    let fig2_ok = cent <= oreo && oreo <= myop && oreo <= nonc;

    // Fig. 5: delay non-increasing in C; OREO equals centralized when its
    // queue never leaves zero.
    let spec5 = ExperimentSpec::new(ExperimentId::Fig5_6StorageSweep, base.clone());
    let grid = spec5.sweep.values();
    let fig5 = run_experiment(&spec5).unwrap();
    let mut fig5_ok = true;
    for scheme in ["oreo", "centralized", "myopic", "noncooperative"] {
        let series: Vec<f64> = grid.iter().map(|&c| mean_delay(&fig5.rows, scheme, c)).collect();
        fig5_ok &= series.windows(2).all(|w| w[1] <= w[0]);
    }
    let small = grid[0];
    let (mut idle_seeds, mut coincide) = (0, 0);
    for seed in &spec5.seeds {
        let pick = |scheme: &str| -> Vec<&MetricsRow> {
            fig5.rows.iter().filter(|r| r.scheme == scheme && r.seed == *seed && r.sweep_value == small).collect()
        };
        let (o, c) = (pick("oreo"), pick("centralized"));
        if o.iter().all(|r| r.q == 0.0) {
            idle_seeds += 1;
            let (od, cd) = (o.last().unwrap().avg_delay, c.last().unwrap().avg_delay);
            if (od - cd).abs() <= 1e-3 * cd {
                coincide += 1;
            }
        }
    }
    fig5_ok &= idle_seeds > 0 && coincide == idle_seeds;

    // Fig. 7: OREO delay decreasing in Q with shrinking decrements.
    let mut spec7 = ExperimentSpec::new(ExperimentId::Fig7QSweep, base.clone());
    spec7.schemes = vec![SchemeId::Oreo];
    let qs = match &spec7.sweep {
        Sweep::Budget(v) => v.clone(),
        _ => unreachable!(),
    };
    let fig7 = run_experiment(&spec7).unwrap();
    let series: Vec<f64> = qs.iter().map(|&q| mean_delay(&fig7.rows, "oreo", q)).collect();
    let drops: Vec<f64> = series.windows(2).map(|w| w[0] - w[1]).collect();
    let fig7_ok = drops.iter().all(|&x| x > 0.0) && drops.windows(2).all(|w| w[1] <= w[0]);

    let elapsed = start.elapsed();
    let ok = fig2_ok && fig5_ok && fig7_ok;
    report(
        6,
        ok,
        &format!(
            "fig2 delay centralized {cent:.1} <= oreo {oreo:.1} <= myopic {myop:.1} / noncooperative {nonc:.1}: {}; \
             fig5 monotone in C, oreo = centralized on {coincide}/{idle_seeds} seeds with idle queue at C={small}: {}; \
             fig7 decrements {:?}: {}",
            verdict(fig2_ok),
            verdict(fig5_ok),
            drops.iter().map(|x| x.round()).collect::<Vec<_>>(),
            verdict(fig7_ok)
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_7_property_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut failures = Vec::new();

    let mut mass = Ok(());
    for i in 0..200 {
        let (net, cat, slot) = small_instance(10_000 + i);
        let cache = random_cache(&mut rng, &net, &cat);
        mass = mass.and(check_mass_conservation(&net, &slot, &cache));
    }
    if let Err(e) = &mass {
        failures.push(format!("mass conservation: {e}"));
    }

    let queue = check_queue_recursion(&tiny_scenario(3), 40);
    if let Err(e) = &queue {
        failures.push(format!("queue recursion: {e}"));
    }

    let mut worst_gap: f64 = 0.0;
    for i in 0..100 {
        let (net, cat, slot) = small_instance(20_000 + i);
        let cache = random_cache(&mut rng, &net, &cat);
        let v = rng.random_range(1.0..100.0);
        let q = rng.random_range(0.0..100.0);
        match decomposition_gap(&net, &cat, &slot, &cache, v, q) {
            Ok(g) => worst_gap = worst_gap.max(g),
            Err(e) => failures.push(format!("decomposition instance {i}: {e}")),
        }
    }
    if worst_gap > 1e-4 {
        failures.push(format!("decomposition gap {worst_gap:.2e}"));
    }

    let mut worst_delta: f64 = 0.0;
    for i in 0..300 {
        let (net, cat, slot) = small_instance(30_000 + i);
        let cache = random_cache(&mut rng, &net, &cat);
        let n = rng.random_range(0..net.n_bs());
        let row = random_cache(&mut rng, &net, &cat)[n];
        let w = Weights::new(rng.random_range(0.1..100.0), rng.random_range(0.0..100.0));
        match delta_vs_full(&net, &cat, &slot, &cache, n, row, w) {
            Ok(d) => worst_delta = worst_delta.max(d),
            Err(e) => failures.push(format!("delta instance {i}: {e}")),
        }
    }
    if worst_delta > 1e-9 {
        failures.push(format!("neighbourhood delta error {worst_delta:.2e}"));
    }

    let det = check_determinism(&tiny_scenario(4), 15);
    if let Err(e) = &det {
        failures.push(format!("determinism: {e}"));
    }

    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(600);
    report(
        7,
        ok,
        &format!(
            "mass conservation {}, queue recursion {}, decomposition worst gap {worst_gap:.1e}, delta worst error {worst_delta:.1e}, determinism {}{}",
            verdict(mass.is_ok()),
            verdict(queue.is_ok()),
            verdict(det.is_ok()),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
        elapsed,
    );
    assert!(ok);
}
