//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use mlcca::domain::{Bundle, Capacities, DemandObservation, PriceVector};
use mlcca::harness::experiment::{
    run_experiment, ExperimentConfig, MechanismSpec, MetricsRow, Seeds,
};
use mlcca::harness::plot::{
    export_prediction_plot_data, set_r_squared_centered, write_plot_csv, PlotSampleSpec,
};
use mlcca::harness::reproduce::{one_good_example, query_reports, two_goods_example};
use mlcca::instances;
use mlcca::mechanisms::{run_ml_cca, CcaConfig, MlCcaConfig, MlMode};
use mlcca::mmvnn::{construct_exact, Mmvnn, NetConfig};
use mlcca::oracles::{
    argmax_utility, brute_force_clearing_search, wdp_bids, wdp_true, Bid, Valuation,
};
use mlcca::price::w_value;
use mlcca::training::{dq_loss, train_with_restarts, TrainConfig};
use mlcca::value_models::{DomainSpec, ValueModel};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn refs(v: &[ValueModel]) -> Vec<&dyn Valuation> {
    v.iter().map(|m| m as &dyn Valuation).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = two_goods_example().map_err(|e| e.to_string())?;
    ensure(r.failures.is_empty(), || format!("{:?}", r.failures))?;
    let p = &r.constrained.price;
    let dist = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
    ensure(dist <= 0.05, || format!("price {p:?} off by {dist}"))?;
    ensure(
        r.full_welfare == 18.0 && r.restricted_welfare == 10.0,
        || format!("welfare {} / {}", r.full_welfare, r.restricted_welfare),
    )?;

    // Independent check: every bidder's whole demand set at the returned price is {(4,4)}.
    let (c, bidders) = instances::two_goods();
    let models = refs(&bidders);
    for v in &models {
        let set = demand_set(*v, p);
        ensure(set == vec![vec![4, 4]], || {
            format!("demand set at {p:?} is {set:?}")
        })?;
    }
    // Grid-only reports, winner determination by enumeration.
    let grid: Vec<PriceVector> = (0..10).map(|k| price(vec![k as f64 * 0.05; 2])).collect();
    let reports = query_reports(&models, &grid).map_err(|e| e.to_string())?;
    let (alloc, _) = naive_wdp(&reports.to_bids(), c.counts());
    let scw: f64 = alloc
        .iter()
        .zip(&models)
        .map(|(x, v)| v.value(&Bundle(x.clone())))
        .sum();
    ensure(scw == 10.0, || format!("enumerated grid welfare {scw}"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "price ({:.4}, {:.4}), SCW 18 with the constrained query, 10 from the grid, {:.2?}",
        p[0],
        p[1],
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = one_good_example().map_err(|e| e.to_string())?;
    ensure(r.failures.is_empty(), || format!("{:?}", r.failures))?;
    ensure(r.constrained.price[0] > 0.5, || {
        format!("price {:?}", r.constrained.price)
    })?;
    let counts: Vec<u32> = r.full_allocation.bundles().iter().map(|x| x.0[0]).collect();
    ensure(counts == [6, 1], || format!("allocation {counts:?}"))?;
    ensure(r.full_welfare == 9.0 && r.restricted_welfare == 6.0, || {
        format!("welfare {} / {}", r.full_welfare, r.restricted_welfare)
    })?;
    // The demands at the returned price are (6) and (1) without ties.
    let (_, bidders) = instances::one_good();
    let models = refs(&bidders);
    let d0 = demand_set(models[0], &r.constrained.price);
    let d1 = demand_set(models[1], &r.constrained.price);
    ensure(d0 == vec![vec![6]] && d1 == vec![vec![1]], || {
        format!("demand sets {d0:?} {d1:?}")
    })?;
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "price {:.6} > 0.5, allocation ((6),(1)), SCW 9 vs 6 from the grid, {:.2?}",
        r.constrained.price[0],
        start.elapsed()
    ))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut largest = 0;
    for seed in 0..50u64 {
        let mut r = rng(3_000 + seed);
        let c = random_capacities(&mut r, 4, 5, 256);
        largest = largest.max(c.domain_size() as usize);
        let step = if seed % 2 == 0 { 0.25 } else { 0.37 };
        let table = random_monotone_table(&mut r, &c, step);
        let net = construct_exact(&table).map_err(|e| e.to_string())?;
        for (x, want) in all_bundles(c.counts()).iter().zip(table.values()) {
            worst = worst.max((net.predict(&Bundle(x.clone())) - want).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "50 tables (largest |X| = {largest}), max error {worst:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn random_instance(seed: u64, nets: bool) -> (Capacities, Vec<Box<dyn Valuation>>, f64) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=4usize);
    let (c, models): (Capacities, Vec<Box<dyn Valuation>>) = if nets {
        let c = random_capacities(&mut r, 4, 6, 1_000);
        let cfg = NetConfig {
            hidden: vec![8, 8],
            ..NetConfig::default()
        };
        let models = (0..n)
            .map(|i| {
                let net =
                    Mmvnn::new_random(c.clone(), cfg.clone(), 10.0, seed * 10 + i as u64).unwrap();
                Box::new(net) as Box<dyn Valuation>
            })
            .collect();
        (c, models)
    } else {
        let c = random_capacities(&mut r, 5, 9, 10_000);
        let models = (0..n)
            .map(|_| {
                let step = r.gen_range(0.1..1.0);
                Box::new(random_monotone_table(&mut r, &c, step)) as Box<dyn Valuation>
            })
            .collect();
        (c, models)
    };
    let top = models
        .iter()
        .map(|v| v.value(&c.full()))
        .fold(0.0, f64::max);
    let copies: u32 = c.counts().iter().sum();
    (c, models, 2.0 * top / copies as f64 + 0.1)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut violations = Vec::new();
    let mut max_conv = f64::NEG_INFINITY;
    let mut max_sub = f64::NEG_INFINITY;
    let mut max_lip = f64::NEG_INFINITY;
    for trial in 0..1000u64 {
        let nets = trial % 2 == 0;
        let (c, boxed, hi) = random_instance(4_000 + trial, nets);
        let models: Vec<&dyn Valuation> = boxed.iter().map(|b| b.as_ref()).collect();
        let mut r = rng(40_000 + trial);
        let p = continuous_prices(&mut r, c.num_items(), hi);
        let q = continuous_prices(&mut r, c.num_items(), hi);
        let a: f64 = r.gen_range(0.0..1.0);
        let mix: Vec<f64> = p
            .iter()
            .zip(&q)
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect();
        let w = |x: &[f64]| w_value(&models, &c, &price(x.to_vec())).unwrap();
        let (wp, wq, wm) = (w(&p), w(&q), w(&mix));
        let conv = wm.value - (a * wp.value + (1.0 - a) * wq.value);
        let lin: f64 = wp
            .subgradient
            .iter()
            .zip(q.iter().zip(&p))
            .map(|(g, (y, x))| g * (y - x))
            .sum();
        let sub = wp.value + lin - wq.value;
        let dist = p
            .iter()
            .zip(&q)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let lip =
            (wp.value - wq.value).abs() - (models.len() + 1) as f64 * c.euclidean_norm() * dist;
        max_conv = max_conv.max(conv);
        max_sub = max_sub.max(sub);
        max_lip = max_lip.max(lip);
        if conv > 1e-7 || sub > 1e-7 || lip > 1e-9 {
            violations.push(trial);
        }
        // The library value agrees with the enumeration oracle.
        if trial % 10 == 0 {
            let nw = naive_w(&models, &c, &p);
            if (nw - wp.value).abs() > 1e-9 {
                violations.push(trial);
            }
        }
    }
    ensure(violations.is_empty(), || {
        format!("violations in trials {violations:?}")
    })?;
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "500 net + 500 table trials, max slack: convexity {max_conv:.1e}, subgradient {max_sub:.1e}, Lipschitz {max_lip:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut stable = 0;
    let mut tried = 0;
    let mut worst = 0.0f64;
    while stable < 120 {
        tried += 1;
        if tried > 5_000 {
            return Err(format!("only {stable} stable points in {tried} draws"));
        }
        let (c, boxed, hi) = random_instance(5_000 + tried, tried % 2 == 0);
        let models: Vec<&dyn Valuation> = boxed.iter().map(|b| b.as_ref()).collect();
        let mut r = rng(50_000 + tried);
        let p = continuous_prices(&mut r, c.num_items(), hi);
        let base: Vec<Vec<u32>> = models.iter().map(|v| naive_argmax(*v, &p).0).collect();
        let mut is_stable = true;
        'outer: for j in 0..c.num_items() {
            for s in [-h, h] {
                let mut q = p.clone();
                q[j] += s;
                for (v, x) in models.iter().zip(&base) {
                    if argmax_utility(*v, &price(q.clone())).unwrap().bundle.0 != *x {
                        is_stable = false;
                        break 'outer;
                    }
                }
            }
        }
        if !is_stable || p.iter().any(|&x| x <= h) {
            continue;
        }
        stable += 1;
        for j in 0..c.num_items() {
            let (mut lo, mut up) = (p.clone(), p.clone());
            lo[j] -= h;
            up[j] += h;
            let fd = (w_value(&models, &c, &price(up)).unwrap().value
                - w_value(&models, &c, &price(lo)).unwrap().value)
                / (2.0 * h);
            let demand: u32 = base.iter().map(|x| x[j]).sum();
            let g = c.counts()[j] as f64 - demand as f64;
            worst = worst.max((fd - g).abs());
        }
    }
    ensure(worst <= 1e-5, || format!("max deviation {worst:e}"))?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "{stable} stable points ({tried} draws), max |FD - (c - sum x*)| = {worst:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let levels = lcp_levels();
    let mut instances = Vec::new();
    let mut seed = 0u64;
    let mut rejected = 0;
    while instances.len() < 30 {
        seed += 1;
        let (c, models) = lcp_candidate(6_000 + seed);
        let r = refs(&models);
        match brute_force_clearing_search(&r, &c, &levels).map_err(|e| e.to_string())? {
            Some(_) => instances.push((seed, c, models)),
            None => rejected += 1,
        }
    }
    let mut cleared = 0;
    let mut rounds = Vec::new();
    for (seed, c, models) in &instances {
        let r = refs(models);
        let cfg = MlCcaConfig {
            q_init: 5,
            q_max: 50,
            mode: MlMode::PerfectMl,
            seed: *seed,
            ..MlCcaConfig::default()
        };
        let out = run_ml_cca(&r, c, &cfg).map_err(|e| e.to_string())?;
        if out.cleared {
            cleared += 1;
            rounds.push(out.rounds);
            let (_, opt) = naive_wdp(&table_bids(&r), c.counts());
            let got = true_welfare(out.allocation(), &r);
            ensure((got / opt - 1.0).abs() <= 1e-9, || {
                format!("instance {seed}: cleared with welfare {got}, optimum {opt}")
            })?;
        }
    }
    let rate = cleared as f64 / instances.len() as f64;
    ensure(rate >= 0.9, || format!("cleared {cleared}/30"))?;
    within(start, Duration::from_secs(300))?;
    Ok(format!(
        "{cleared}/30 cleared (max {} rounds), all efficient; {rejected} candidates without clearing prices skipped, {:.2?}",
        rounds.iter().max().unwrap_or(&0),
        start.elapsed()
    ))
}

/// Truthful answers of `v` on a 12-level grid per item over
/// `[0, 3 * mean_j v(e_j)]`.
fn exhaustive_queries(v: &dyn Valuation) -> Vec<DemandObservation> {
    let c = v.capacities();
    let m = c.num_items();
    let singles: f64 = (0..m)
        .map(|j| {
            let mut e = vec![0; m];
            e[j] = 1;
            v.value(&Bundle(e))
        })
        .sum::<f64>()
        / m as f64;
    let levels: Vec<f64> = (0..12).map(|k| 3.0 * singles * k as f64 / 11.0).collect();
    let mut obs = Vec::new();
    for idx in all_bundles(&vec![11; m]) {
        let p = price(idx.iter().map(|&k| levels[k as usize]).collect());
        let (x, _, _) = naive_argmax(v, p.as_slice());
        obs.push(DemandObservation::new(Bundle(x), p, obs.len()).unwrap());
    }
    obs
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let c = Capacities::new(vec![2, 2, 2]).unwrap();
    let arch = NetConfig {
        hidden: vec![8, 8],
        ..NetConfig::default()
    };
    let train = TrainConfig {
        epochs: 1000,
        learning_rate: 0.003,
        cosine: true,
        ..TrainConfig::default()
    };
    let mut min_r2 = f64::INFINITY;
    for seed in 0..20u64 {
        let truth = Mmvnn::new_random(c.clone(), arch.clone(), 10.0, 7_000 + seed).unwrap();
        let obs = exhaustive_queries(&truth);
        let (net, report) = train_with_restarts(&c, &arch, &obs, &train, 70_000 + seed, 5)
            .map_err(|e| e.to_string())?;
        ensure(report.final_mismatches == 0, || {
            format!(
                "bidder {seed}: {} of {} answers not reproduced",
                report.final_mismatches,
                obs.len()
            )
        })?;
        let mut loss = 0.0;
        for o in &obs {
            loss += dq_loss(&net, o).map_err(|e| e.to_string())?;
            let (x, _, _) = naive_argmax(&net, o.price.as_slice());
            ensure(x == o.bundle.0, || {
                format!("bidder {seed}: net demand differs at {:?}", o.price)
            })?;
        }
        ensure(loss == 0.0, || format!("bidder {seed}: loss {loss}"))?;
        let spec = PlotSampleSpec {
            seed,
            ..PlotSampleSpec::default()
        };
        let rows =
            export_prediction_plot_data(&net, &truth, &obs, &spec).map_err(|e| e.to_string())?;
        let r2 = set_r_squared_centered(&rows, "val2").map_err(|e| e.to_string())?;
        min_r2 = min_r2.min(r2);
    }
    ensure(min_r2 >= 0.99, || format!("min val2 centered R² {min_r2}"))?;
    within(start, Duration::from_secs(180))?;
    Ok(format!(
        "20 bidders, 1728 answers each reproduced with loss 0, min val2 centered R² {min_r2:.4}, {:.2?}",
        start.elapsed()
    ))
}

fn directional_config(dir: &Path, workers: Option<usize>) -> ExperimentConfig {
    ExperimentConfig {
        domain: DomainSpec::small_synergy(),
        seeds: Seeds::Text("101..130".into()),
        mechanisms: vec![
            MechanismSpec::Cca(CcaConfig {
                q_max: 30,
                ..CcaConfig::default()
            }),
            MechanismSpec::MlCca(MlCcaConfig {
                q_init: 10,
                q_max: 30,
                ..MlCcaConfig::default()
            }),
        ],
        output_dir: dir.to_path_buf(),
        workers,
        ..ExperimentConfig::default()
    }
}

fn read_rows(path: &Path) -> Vec<MetricsRow> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<Vec<MetricsRow>, _>>()
        .unwrap()
}

fn criterion_8(dir: &Path) -> Outcome {
    let start = Instant::now();
    let summary = run_experiment(&directional_config(dir, None)).map_err(|e| e.to_string())?;
    let rows = read_rows(&dir.join("results.csv"));
    ensure(rows.len() == 60, || format!("{} rows", rows.len()))?;
    for r in &rows {
        for e in [r.e_clock, r.e_raise, r.e_profit] {
            ensure((0.0..=1.0 + 1e-12).contains(&e), || {
                format!("efficiency {e} out of range")
            })?;
        }
        if r.cleared == 1 {
            ensure((r.e_clock - 1.0).abs() <= 1e-9, || {
                format!("seed {} cleared below 1", r.seed)
            })?;
        }
    }
    let stats = |mech: &str| {
        let g: Vec<&MetricsRow> = rows.iter().filter(|r| r.mechanism == mech).collect();
        let n = g.len() as f64;
        (
            g.iter().map(|r| r.e_clock).sum::<f64>() / n,
            g.iter().map(|r| r.cleared as f64).sum::<f64>() / n,
        )
    };
    let (cca_e, cca_clear) = stats("cca");
    let (ml_e, ml_clear) = stats("ml_cca");
    // The written summary recomputes from the rows.
    ensure(
        summary.groups[0].mean_e_clock == cca_e && summary.groups[1].mean_e_clock == ml_e,
        || "summary means differ from rows".into(),
    )?;
    ensure(ml_e >= cca_e - 0.01, || {
        format!("mean E_clock ML {ml_e:.4} vs CCA {cca_e:.4}")
    })?;
    ensure(ml_clear >= cca_clear, || {
        format!("clearing ML {ml_clear} vs CCA {cca_clear}")
    })?;
    within(start, Duration::from_secs(1800))?;
    Ok(format!(
        "30 seeds: mean E_clock ML-CCA {ml_e:.4} vs CCA {cca_e:.4}, clearing {ml_clear:.2} vs {cca_clear:.2}, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut argmax_checks = 0;
    let mut wdp_checks = 0;
    for inst in 0..500u64 {
        let mut r = rng(9_000 + inst);
        let c = random_capacities(&mut r, 4, 4, 200);
        let n = r.gen_range(1..=3usize);
        let models: Vec<Box<dyn Valuation>> = (0..n)
            .map(|i| match (inst + i as u64) % 3 {
                0 | 1 => Box::new(random_monotone_table(&mut r, &c, 0.25)) as Box<dyn Valuation>,
                _ => Box::new(
                    Mmvnn::new_random(c.clone(), NetConfig::default(), 5.0, inst * 7 + i as u64)
                        .unwrap(),
                ),
            })
            .collect();
        let refs: Vec<&dyn Valuation> = models.iter().map(|b| b.as_ref()).collect();
        for _ in 0..4 {
            let p = grid_prices(&mut r, c.num_items(), 0.25, 3.0);
            for v in &refs {
                let fast = argmax_utility(*v, &price(p.clone())).map_err(|e| e.to_string())?;
                let (x, val, u) = naive_argmax(*v, &p);
                ensure(
                    fast.bundle.0 == x && fast.value == val && fast.utility == u,
                    || {
                        format!(
                            "instance {inst}: argmax at {p:?} gave {:?}, enumeration {x:?}",
                            fast.bundle.0
                        )
                    },
                )?;
                argmax_checks += 1;
            }
        }
        // Random XOR bids on coarse amounts, plus the full tables.
        let bids: Vec<Vec<Bid>> = (0..n)
            .map(|_| {
                let k = r.gen_range(0..=12usize);
                (0..k)
                    .map(|_| Bid {
                        bundle: c.unrank(r.gen_range(0..c.domain_size() as usize)),
                        amount: 0.5 * r.gen_range(0..=12) as f64,
                    })
                    .collect()
            })
            .collect();
        let fast = wdp_bids(&bids, &c, None).map_err(|e| e.to_string())?;
        let (alloc, w) = naive_wdp(&bids, c.counts());
        let got: Vec<Vec<u32>> = fast
            .allocation
            .bundles()
            .iter()
            .map(|x| x.0.clone())
            .collect();
        ensure(got == alloc && fast.welfare == w, || {
            format!(
                "instance {inst}: bids WDP {got:?} ({}) vs {alloc:?} ({w})",
                fast.welfare
            )
        })?;
        for i in 0..n {
            let mut mask = vec![true; n];
            mask[i] = false;
            let fast = wdp_bids(&bids, &c, Some(&mask)).map_err(|e| e.to_string())?;
            let mut reduced = bids.clone();
            reduced[i].clear();
            let (alloc, w) = naive_wdp(&reduced, c.counts());
            let got: Vec<Vec<u32>> = fast
                .allocation
                .bundles()
                .iter()
                .map(|x| x.0.clone())
                .collect();
            ensure(got == alloc && fast.welfare == w, || {
                format!("instance {inst}: WDP without {i} differs")
            })?;
        }
        let size: usize = (c.domain_size() as usize).pow(n as u32);
        if size <= 300_000 {
            let fast = wdp_true(&refs, &c).map_err(|e| e.to_string())?;
            let (alloc, w) = naive_wdp(&table_bids(&refs), c.counts());
            let got: Vec<Vec<u32>> = fast
                .allocation
                .bundles()
                .iter()
                .map(|x| x.0.clone())
                .collect();
            ensure(got == alloc && fast.welfare == w, || {
                format!("instance {inst}: true WDP {got:?} vs {alloc:?}")
            })?;
        }
        wdp_checks += 1;
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "{argmax_checks} argmax and {wdp_checks} winner-determination instances identical to enumeration, {:.2?}",
        start.elapsed()
    ))
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10(reference: &Path) -> Outcome {
    let start = Instant::now();
    let base = dir_files(reference);
    ensure(!base.is_empty(), || "reference run wrote nothing".into())?;
    for workers in [1usize, 8] {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_experiment(&directional_config(tmp.path(), Some(workers)))
            .map_err(|e| e.to_string())?;
        let again = dir_files(tmp.path());
        ensure(again.len() == base.len(), || {
            format!("{workers} workers: file count differs")
        })?;
        for ((na, a), (nb, b)) in base.iter().zip(&again) {
            ensure(na == nb && a == b, || {
                format!("{workers} workers: {na} differs")
            })?;
        }
    }
    // Plot data written twice from separate pools.
    let c = Capacities::new(vec![2, 2]).unwrap();
    let truth = Mmvnn::new_random(c.clone(), NetConfig::default(), 10.0, 1).unwrap();
    let obs = exhaustive_queries(&truth);
    let mut bytes = Vec::new();
    for workers in [1usize, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap();
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = tmp.path().join("plot.csv");
        pool.install(|| -> Result<(), String> {
            let (net, _) = train_with_restarts(
                &c,
                &NetConfig::default(),
                &obs,
                &TrainConfig::default(),
                3,
                2,
            )
            .map_err(|e| e.to_string())?;
            let rows = export_prediction_plot_data(&net, &truth, &obs, &PlotSampleSpec::default())
                .map_err(|e| e.to_string())?;
            write_plot_csv(&path, &rows).map_err(|e| e.to_string())
        })?;
        bytes.push(fs::read(&path).unwrap());
    }
    ensure(bytes[0] == bytes[1], || {
        "plot CSV differs between pools".into()
    })?;
    Ok(format!(
        "{} experiment files identical with 1 and 8 workers, plot CSV identical, {:.2?}",
        base.len(),
        start.elapsed()
    ))
}

fn main() {
    let reference = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 two-goods example", Box::new(criterion_1)),
        ("2 one-good example", Box::new(criterion_2)),
        ("3 exact construction", Box::new(criterion_3)),
        ("4 convexity, Lipschitz, subgradient", Box::new(criterion_4)),
        ("5 gradient at stable points", Box::new(criterion_5)),
        ("6 clearing implies efficiency", Box::new(criterion_6)),
        ("7 training fixed point", Box::new(criterion_7)),
        (
            "8 ML-CCA vs CCA",
            Box::new(|| criterion_8(reference.path())),
        ),
        ("9 oracle equivalence", Box::new(criterion_9)),
        (
            "10 determinism",
            Box::new(|| criterion_10(reference.path())),
        ),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
