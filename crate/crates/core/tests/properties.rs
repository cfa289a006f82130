//! Randomized invariants, each checked against enumeration where possible.

mod common;

use common::*;
use mlcca::domain::{is_feasible, social_welfare, Bundle, Capacities, DemandObservation};
use mlcca::harness::metrics::efficiency;
use mlcca::mechanisms::payments::{
    core_constraints, min_core_revenue, vcg_nearest_payments, vcg_payments,
};
use mlcca::mechanisms::supplementary::{profit_max_bids, raised_bids, wdp_with_bids};
use mlcca::mechanisms::{run_cca, run_ml_cca, CcaConfig, MlCcaConfig, MlMode};
use mlcca::mmvnn::{Mmvnn, NetConfig};
use mlcca::oracles::{argmax_utility, wdp_bids, wdp_true, Bid, ReportSet, Valuation};
use mlcca::price::{next_price, w_value, NextPriceConfig};
use mlcca::training::dq_loss;
use mlcca::value_models::{ValueModel, ValueTable};
use proptest::prelude::*;
use rand::Rng;

fn tables(seed: u64, n: usize, max_size: usize, step: f64) -> (Capacities, Vec<ValueModel>) {
    let mut r = rng(seed);
    let c = random_capacities(&mut r, 3, 4, max_size);
    let models = (0..n)
        .map(|_| ValueModel::tabular(random_monotone_table(&mut r, &c, step)).unwrap())
        .collect();
    (c, models)
}

fn refs(v: &[ValueModel]) -> Vec<&dyn Valuation> {
    v.iter().map(|m| m as &dyn Valuation).collect()
}

fn random_bids(r: &mut impl Rng, c: &Capacities, n: usize, per: usize) -> Vec<Vec<Bid>> {
    (0..n)
        .map(|_| {
            (0..r.gen_range(0..=per))
                .map(|_| Bid {
                    bundle: c.unrank(r.gen_range(0..c.domain_size() as usize)),
                    amount: 0.5 * r.gen_range(0..=16) as f64,
                })
                .collect()
        })
        .collect()
}

fn truthful_reports(
    models: &[&dyn Valuation],
    c: &Capacities,
    r: &mut rand_chacha::ChaCha8Rng,
    rounds: usize,
) -> ReportSet {
    let mut rep = ReportSet::new(models.len());
    for k in 0..rounds {
        let p = price(grid_prices(r, c.num_items(), 0.5, 6.0));
        for (i, v) in models.iter().enumerate() {
            let x = argmax_utility(*v, &p).unwrap().bundle;
            rep.push(i, DemandObservation::new(x, p.clone(), k).unwrap());
        }
    }
    rep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_roundtrip(seed in any::<u64>()) {
        let c = random_capacities(&mut rng(seed), 4, 5, 2_000);
        for (r, x) in all_bundles(c.counts()).into_iter().enumerate() {
            let x = Bundle(x);
            prop_assert_eq!(c.rank(&x), r);
            prop_assert_eq!(c.unrank(r), x);
        }
    }

    #[test]
    fn argmax_matches_enumeration(seed in any::<u64>()) {
        let (c, models) = tables(seed, 2, 300, 0.25);
        let mut r = rng(seed ^ 1);
        for _ in 0..8 {
            let p = grid_prices(&mut r, c.num_items(), 0.25, 3.0);
            for v in &models {
                let d = argmax_utility(v, &price(p.clone())).unwrap();
                let (x, val, u) = naive_argmax(v, &p);
                prop_assert_eq!(d.bundle.0, x);
                prop_assert_eq!(d.value, val);
                prop_assert_eq!(d.utility, u);
            }
        }
    }

    #[test]
    fn wdp_matches_enumeration(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let c = random_capacities(&mut r, 3, 3, 64);
        let bids = random_bids(&mut r, &c, n, 8);
        let s = wdp_bids(&bids, &c, None).unwrap();
        let (a, w) = naive_wdp(&bids, c.counts());
        prop_assert!(is_feasible(&s.allocation, &c).unwrap());
        prop_assert_eq!(s.allocation.bundles().iter().map(|x| x.0.clone()).collect::<Vec<_>>(), a);
        prop_assert_eq!(s.welfare, w);
    }

    #[test]
    fn true_wdp_matches_enumeration(seed in any::<u64>(), n in 1usize..=3) {
        let (c, models) = tables(seed, n, 40, 0.5);
        let m = refs(&models);
        let s = wdp_true(&m, &c).unwrap();
        let (a, w) = naive_wdp(&table_bids(&m), c.counts());
        prop_assert_eq!(s.allocation.bundles().iter().map(|x| x.0.clone()).collect::<Vec<_>>(), a);
        prop_assert_eq!(s.welfare, w);
    }

    #[test]
    fn nets_are_monotone_and_projection_is_idempotent(seed in any::<u64>(), skip in any::<bool>()) {
        let c = random_capacities(&mut rng(seed), 3, 3, 64);
        let cfg = NetConfig { skip, ..NetConfig::default() };
        let mut net = Mmvnn::new_random(c.clone(), cfg, 3.0, seed).unwrap();
        let mut r = rng(seed ^ 2);
        let theta: Vec<f64> = net.params().iter().map(|_| r.gen_range(-1.0..1.0)).collect();
        net.set_params(&theta).unwrap();
        let projected = net.params().to_vec();
        net.project();
        prop_assert_eq!(net.params(), projected.as_slice());
        let xs: Vec<Bundle> = c.bundles().collect();
        prop_assert_eq!(net.predict(&xs[0]), 0.0);
        for x in &xs {
            for j in 0..c.num_items() {
                if x.0[j] < c.counts()[j] {
                    let mut y = x.clone();
                    y.0[j] += 1;
                    prop_assert!(net.predict(x) <= net.predict(&y));
                }
            }
        }
    }

    #[test]
    fn w_is_convex(seed in any::<u64>()) {
        let (c, models) = tables(seed, 3, 200, 0.3);
        let m = refs(&models);
        let mut r = rng(seed ^ 3);
        let p = continuous_prices(&mut r, c.num_items(), 3.0);
        let q = continuous_prices(&mut r, c.num_items(), 3.0);
        let a: f64 = r.gen_range(0.0..1.0);
        let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        let w = |x: &[f64]| w_value(&m, &c, &price(x.to_vec())).unwrap().value;
        prop_assert!(w(&mix) <= a * w(&p) + (1.0 - a) * w(&q) + 1e-9);
    }

    #[test]
    fn dq_loss_is_nonnegative(seed in any::<u64>()) {
        let c = random_capacities(&mut rng(seed), 3, 3, 64);
        let net = Mmvnn::new_random(c.clone(), NetConfig::default(), 2.0, seed).unwrap();
        let mut r = rng(seed ^ 4);
        for k in 0..10 {
            let x = c.unrank(r.gen_range(0..c.domain_size() as usize));
            let p = price(continuous_prices(&mut r, c.num_items(), 2.0));
            let o = DemandObservation::new(x, p, k).unwrap();
            prop_assert!(dq_loss(&net, &o).unwrap() >= 0.0);
        }
    }

    #[test]
    fn vcg_within_bids(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let c = random_capacities(&mut r, 3, 3, 64);
        let bids = random_bids(&mut r, &c, n, 6);
        let s = wdp_bids(&bids, &c, None).unwrap();
        let pay = vcg_payments(&bids, &c, &s).unwrap();
        for i in 0..n {
            prop_assert!(pay[i] >= 0.0 && pay[i] <= s.amounts[i] + 1e-9);
            if s.allocation.0[i].is_null() {
                prop_assert_eq!(pay[i], 0.0);
            }
        }
    }

    #[test]
    fn vcg_nearest_is_in_the_minimum_revenue_core(seed in any::<u64>(), n in 2usize..=4) {
        let mut r = rng(seed);
        let c = random_capacities(&mut r, 3, 3, 64);
        let bids = random_bids(&mut r, &c, n, 6);
        let s = wdp_bids(&bids, &c, None).unwrap();
        let pay = vcg_nearest_payments(&bids, &c, &s).unwrap();
        let cons = core_constraints(&bids, &c, &s).unwrap();
        for k in &cons {
            let total: f64 = k.payers.iter().map(|&i| pay[i]).sum();
            prop_assert!(total >= k.rhs - 1e-7);
        }
        let r_min = min_core_revenue(&cons, &s).unwrap();
        prop_assert!((pay.iter().sum::<f64>() - r_min).abs() <= 1e-7);
        for i in 0..n {
            prop_assert!(pay[i] >= -1e-9 && pay[i] <= s.amounts[i] + 1e-7);
        }
    }

    #[test]
    fn clock_prices_never_fall(seed in any::<u64>()) {
        let (c, models) = tables(seed, 3, 100, 0.5);
        let out = run_cca(&refs(&models), &c, &CcaConfig { q_max: 40, ..CcaConfig::default() }).unwrap();
        for w in out.trace.windows(2) {
            for (a, b) in w[0].price.as_slice().iter().zip(w[1].price.as_slice()) {
                prop_assert!(b >= a);
            }
        }
    }

    #[test]
    fn truthful_answers_maximize_utility(seed in any::<u64>()) {
        let (c, models) = tables(seed, 2, 100, 0.5);
        let m = refs(&models);
        let out = run_cca(&m, &c, &CcaConfig { q_max: 20, ..CcaConfig::default() }).unwrap();
        for (i, v) in m.iter().enumerate() {
            for o in out.reports.bidder(i) {
                let (_, _, u) = naive_argmax(*v, o.price.as_slice());
                let got = v.value(&o.bundle) - o.price.cost(&o.bundle);
                prop_assert!(got >= u - 1e-9);
            }
        }
    }

    #[test]
    fn push_bids_never_lower_reported_welfare(seed in any::<u64>()) {
        let (c, models) = tables(seed, 3, 100, 0.5);
        let m = refs(&models);
        let mut r = rng(seed ^ 5);
        let rep = truthful_reports(&m, &c, &mut r, 5);
        let none = vec![Vec::new(); m.len()];
        let base = wdp_with_bids(&rep, &none, &c).unwrap().welfare;
        let raised = wdp_with_bids(&rep, &raised_bids(&rep, &m), &c).unwrap().welfare;
        let p = price(grid_prices(&mut r, c.num_items(), 0.5, 6.0));
        let profit = wdp_with_bids(&rep, &profit_max_bids(&rep, &m, &p, 5).unwrap(), &c).unwrap().welfare;
        prop_assert!(raised >= base - 1e-9);
        prop_assert!(profit >= raised - 1e-9);
    }

    #[test]
    fn efficiency_is_a_fraction(seed in any::<u64>()) {
        let (c, models) = tables(seed, 3, 100, 0.5);
        let m = refs(&models);
        let out = run_cca(&m, &c, &CcaConfig { q_max: 15, ..CcaConfig::default() }).unwrap();
        for a in [&out.finalization.by_heuristic.clock, &out.finalization.by_heuristic.raised] {
            let e = efficiency(a, &m, &c).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
        }
    }

    #[test]
    fn constrained_search_keeps_feasible_points(seed in any::<u64>()) {
        let (c, models) = tables(seed, 3, 100, 0.5);
        let m = refs(&models);
        let anchor = price(continuous_prices(&mut rng(seed ^ 6), c.num_items(), 2.0));
        let cfg = NextPriceConfig { iterations: 60, seed, ..NextPriceConfig::default() };
        let res = next_price(&m, &c, &anchor, &cfg).unwrap();
        if res.trace.best_feasible.is_some() {
            prop_assert!(res.feasible);
            prop_assert!(is_feasible(&res.demands, &c).unwrap());
        }
        // The reported W is the enumerated one.
        prop_assert!((naive_w(&m, &c, res.price.as_slice()) - res.w).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn clearing_means_efficient(seed in 0u64..10_000) {
        let (c, models) = lcp_candidate(seed);
        let m = refs(&models);
        let cfg = MlCcaConfig { q_init: 3, q_max: 25, mode: MlMode::PerfectMl, seed, ..MlCcaConfig::default() };
        let out = run_ml_cca(&m, &c, &cfg).unwrap();
        if out.cleared {
            let opt = wdp_true(&m, &c).unwrap().welfare;
            let got = social_welfare(out.allocation(), &m).unwrap();
            prop_assert!((got - opt).abs() <= 1e-9 * opt.max(1.0));
        }
    }

    #[test]
    fn tables_roundtrip_through_models(seed in any::<u64>()) {
        let (c, models) = tables(seed, 1, 200, 0.5);
        let t = models[0].to_table(1_000).unwrap();
        let again = ValueTable::new(c.clone(), t.values().to_vec()).unwrap();
        prop_assert_eq!(again, t);
    }
}
