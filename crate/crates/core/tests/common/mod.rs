//! Reference oracles and instance generators shared by the integration tests.
//!
//! The oracles here enumerate everything and share nothing with the library
//! besides the price summation order (`dot_counts`) and the tie rule: scan in
//! rank order and replace the incumbent only on a gain above `MONEY_TOL`.

#![allow(dead_code)]

use mlcca::domain::{dot_counts, Allocation, Bundle, Capacities, PriceVector, MONEY_TOL};
use mlcca::oracles::{Bid, Valuation};
use mlcca::value_models::{ValueModel, ValueTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All bundles in rank order (item 0 most significant), built independently
/// of `Capacities::bundles`.
pub fn all_bundles(c: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &cap in c {
        let mut next = Vec::with_capacity(out.len() * (cap as usize + 1));
        for prefix in &out {
            for k in 0..=cap {
                let mut x = prefix.clone();
                x.push(k);
                next.push(x);
            }
        }
        out = next;
    }
    out
}

/// Utility-maximizing bundle by full enumeration: `(bundle, value, utility)`.
pub fn naive_argmax(v: &dyn Valuation, p: &[f64]) -> (Vec<u32>, f64, f64) {
    let mut best: Option<(Vec<u32>, f64, f64)> = None;
    for x in all_bundles(v.capacities().counts()) {
        let val = v.value(&Bundle(x.clone()));
        let u = val - dot_counts(p, &x);
        if best.as_ref().is_none_or(|b| u > b.2 + MONEY_TOL) {
            best = Some((x, val, u));
        }
    }
    best.unwrap()
}

/// Every bundle whose utility is within `MONEY_TOL` of the maximum.
pub fn demand_set(v: &dyn Valuation, p: &[f64]) -> Vec<Vec<u32>> {
    let xs = all_bundles(v.capacities().counts());
    let us: Vec<f64> = xs
        .iter()
        .map(|x| v.value(&Bundle(x.clone())) - dot_counts(p, x))
        .collect();
    let max = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    xs.into_iter()
        .zip(us)
        .filter(|(_, u)| *u >= max - MONEY_TOL)
        .map(|(x, _)| x)
        .collect()
}

/// `<c, p> + sum_i max_x (v_i(x) - <p, x>)` by enumeration.
pub fn naive_w(models: &[&dyn Valuation], c: &Capacities, p: &[f64]) -> f64 {
    let mut w = dot_counts(p, c.counts());
    for v in models {
        w += naive_argmax(*v, p).2;
    }
    w
}

fn rank_of(x: &[u32], c: &[u32]) -> usize {
    x.iter()
        .zip(c)
        .fold(0, |acc, (&xi, &ci)| acc * (ci as usize + 1) + xi as usize)
}

/// Per-bidder candidates: the empty bundle plus every bid bundle at its
/// largest amount, sorted by rank.
pub fn candidates(bids: &[Bid], c: &[u32]) -> Vec<(Vec<u32>, f64)> {
    let mut out: Vec<(usize, Vec<u32>, f64)> = vec![(0, vec![0; c.len()], 0.0)];
    for b in bids {
        let r = rank_of(&b.bundle.0, c);
        match out.iter_mut().find(|e| e.0 == r) {
            Some(e) => {
                if b.amount > e.2 {
                    e.2 = b.amount;
                }
            }
            None => out.push((r, b.bundle.0.clone(), b.amount)),
        }
    }
    out.sort_by_key(|e| e.0);
    out.into_iter().map(|(_, x, a)| (x, a)).collect()
}

/// Winner determination by enumerating every combination of candidates in
/// lexicographic order (bidder 0 outermost).
pub fn naive_wdp(bids: &[Vec<Bid>], c: &[u32]) -> (Vec<Vec<u32>>, f64) {
    let cands: Vec<Vec<(Vec<u32>, f64)>> = bids.iter().map(|b| candidates(b, c)).collect();
    let n = cands.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut used = vec![0u32; c.len()];
        let mut total = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            let (x, a) = &cands[i][k];
            for (u, xi) in used.iter_mut().zip(x) {
                *u += xi;
            }
            total += a;
        }
        let feasible = used.iter().zip(c).all(|(u, ci)| u <= ci);
        if feasible && best.as_ref().is_none_or(|b| total > b.1 + MONEY_TOL) {
            best = Some((idx.clone(), total));
        }
        let mut i = n;
        loop {
            if i == 0 {
                let (choice, w) = best.unwrap();
                let alloc = choice
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| cands[i][k].0.clone())
                    .collect();
                return (alloc, w);
            }
            i -= 1;
            if idx[i] + 1 < cands[i].len() {
                idx[i] += 1;
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Full value tables as bids.
pub fn table_bids(models: &[&dyn Valuation]) -> Vec<Vec<Bid>> {
    models
        .iter()
        .map(|v| {
            all_bundles(v.capacities().counts())
                .into_iter()
                .map(|x| {
                    let amount = v.value(&Bundle(x.clone()));
                    Bid {
                        bundle: Bundle(x),
                        amount,
                    }
                })
                .collect()
        })
        .collect()
}

pub fn true_welfare(a: &Allocation, models: &[&dyn Valuation]) -> f64 {
    a.bundles()
        .iter()
        .zip(models)
        .map(|(x, v)| v.value(x))
        .sum()
}

/// Random capacities with at most `max_items` items and `max_size` bundles.
pub fn random_capacities(
    r: &mut ChaCha8Rng,
    max_items: usize,
    max_cap: u32,
    max_size: usize,
) -> Capacities {
    loop {
        let m = r.gen_range(1..=max_items);
        let c: Vec<u32> = (0..m).map(|_| r.gen_range(1..=max_cap)).collect();
        let size: usize = c.iter().map(|&x| x as usize + 1).product();
        if size <= max_size {
            return Capacities::new(c).unwrap();
        }
    }
}

/// Random monotone normalized table. Increments are multiples of `step`
/// (and zero with some probability), so many utilities tie exactly when
/// prices are also on a coarse grid.
pub fn random_monotone_table(r: &mut ChaCha8Rng, c: &Capacities, step: f64) -> ValueTable {
    let caps = c.counts().to_vec();
    let xs = all_bundles(&caps);
    let mut vals = vec![0.0f64; xs.len()];
    for (k, x) in xs.iter().enumerate().skip(1) {
        let mut base = 0.0f64;
        for j in 0..caps.len() {
            if x[j] > 0 {
                let mut y = x.clone();
                y[j] -= 1;
                base = base.max(vals[rank_of(&y, &caps)]);
            }
        }
        let inc = if r.gen_bool(0.3) {
            0.0
        } else {
            step * r.gen_range(0..=8) as f64
        };
        vals[k] = base + inc;
    }
    ValueTable::new(c.clone(), vals).unwrap()
}

/// Random prices on the grid `{0, step, 2 step, ...}` up to `hi`.
pub fn grid_prices(r: &mut ChaCha8Rng, m: usize, step: f64, hi: f64) -> Vec<f64> {
    let k = (hi / step).floor() as u32;
    (0..m).map(|_| step * r.gen_range(0..=k) as f64).collect()
}

pub fn continuous_prices(r: &mut ChaCha8Rng, m: usize, hi: f64) -> Vec<f64> {
    (0..m).map(|_| r.gen_range(0.0..hi)).collect()
}

pub fn price(p: Vec<f64>) -> PriceVector {
    PriceVector::new(p).unwrap()
}

/// Separable concave instance with integer marginal values, distinct across
/// bidders per item, optionally with a small complementarity bonus. The
/// bonus may destroy linear clearing prices; callers verify by grid search.
pub fn lcp_candidate(seed: u64) -> (Capacities, Vec<ValueModel>) {
    let mut r = rng(seed);
    let c = loop {
        let m = r.gen_range(1..=3usize);
        let caps: Vec<u32> = (0..m).map(|_| r.gen_range(1..=4)).collect();
        if caps.iter().map(|&x| x as usize + 1).product::<usize>() <= 125 {
            break Capacities::new(caps).unwrap();
        }
    };
    let n = r.gen_range(2..=3usize);
    let m = c.num_items();
    // Distinct marginals per item: draw without replacement from 1..=40.
    let mut pool: Vec<Vec<u32>> = (0..m).map(|_| (1..=40).collect()).collect();
    let mut models = Vec::with_capacity(n);
    for _ in 0..n {
        let mut marg: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (j, items) in pool.iter_mut().enumerate() {
            let mut ms: Vec<u32> = (0..c.counts()[j])
                .map(|_| items.swap_remove(r.gen_range(0..items.len())))
                .collect();
            ms.sort_unstable_by(|a, b| b.cmp(a));
            marg.push(ms.into_iter().map(f64::from).collect());
        }
        let bonus = if r.gen_bool(0.3) {
            Some(r.gen_range(1..=6) as f64)
        } else {
            None
        };
        let table = ValueTable::from_fn(c.clone(), |x| {
            let mut v = 0.0;
            for (j, &k) in x.0.iter().enumerate() {
                v += marg[j][..k as usize].iter().sum::<f64>();
            }
            if let Some(b) = bonus {
                if x.0.iter().all(|&k| k > 0) {
                    v += b;
                }
            }
            v
        })
        .unwrap();
        models.push(ValueModel::tabular(table).unwrap());
    }
    (c, models)
}

/// Price levels `0.5, 1.5, ..., 40.5` for clearing searches on
/// [`lcp_candidate`] instances. Values are integers, so no utility ties at
/// these prices and a clearing point found here clears on a neighborhood.
pub fn lcp_levels() -> Vec<f64> {
    (0..=40).map(|k| k as f64 + 0.5).collect()
}
