//! Exact, solver-free optimization over the bundle space.
//!
//! Every search visits candidates in increasing rank order and replaces the
//! incumbent only when the new objective beats it by more than [`MONEY_TOL`],
//! so ties resolve to the lexicographically smallest bundle (or allocation).
//! Pruning never discards a candidate that could still replace the incumbent,
//! which makes the pruned searches return exactly what plain enumeration
//! returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{
    dot_counts, Allocation, Bundle, Capacities, DemandObservation, PriceVector, MONEY_TOL,
};
use crate::error::{Error, Result};
use crate::value_models::{to_table, ValueTable, DEFAULT_TABLE_CAP};

/// A value function over bundles within fixed capacities.
///
/// Implementations are expected to be monotone and normalized; `value` may
/// assume the bundle lies inside [`Valuation::capacities`].
pub trait Valuation: Sync {
    fn capacities(&self) -> &Capacities;
    fn value(&self, x: &Bundle) -> f64;
}

impl<V: Valuation + ?Sized> Valuation for &V {
    fn capacities(&self) -> &Capacities {
        (**self).capacities()
    }

    fn value(&self, x: &Bundle) -> f64 {
        (**self).value(x)
    }
}

impl<V: Valuation + ?Sized> Valuation for Box<V> {
    fn capacities(&self) -> &Capacities {
        (**self).capacities()
    }

    fn value(&self, x: &Bundle) -> f64 {
        (**self).value(x)
    }
}

/// Answer to a demand query: the chosen bundle with its value and utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub bundle: Bundle,
    pub value: f64,
    pub utility: f64,
}

fn check_price(c: &Capacities, p: &PriceVector) -> Result<()> {
    if p.len() != c.num_items() {
        return Err(Error::DimensionMismatch {
            expected: c.num_items(),
            found: p.len(),
        });
    }
    Ok(())
}

/// `argmax_x v(x) - <p, x>` by depth-first search with monotonicity pruning.
///
/// At each node the completion of the prefix with full capacities bounds the
/// value of every descendant, and the prefix cost bounds their cost, so a
/// subtree is skipped once `v(completion) - cost(prefix)` cannot beat the
/// incumbent. Requires a monotone valuation.
pub fn argmax_utility<V: Valuation + ?Sized>(model: &V, p: &PriceVector) -> Result<Demand> {
    let c = model.capacities();
    check_price(c, p)?;
    let mut search = PrunedArgmax {
        model,
        caps: c.counts(),
        prices: p.as_slice(),
        x: c.counts().to_vec(),
        best: None,
    };
    search.descend(0, 0.0);
    let (bundle, value, utility) = search.best.expect("the empty bundle is always visited");
    Ok(Demand {
        bundle: Bundle(bundle),
        value,
        utility,
    })
}

struct PrunedArgmax<'a, V: ?Sized> {
    model: &'a V,
    caps: &'a [u32],
    prices: &'a [f64],
    /// Current prefix, completed with full capacities beyond the cursor.
    x: Vec<u32>,
    best: Option<(Vec<u32>, f64, f64)>,
}

impl<V: Valuation + ?Sized> PrunedArgmax<'_, V> {
    fn threshold(&self) -> f64 {
        match &self.best {
            Some((_, _, u)) => u + MONEY_TOL,
            None => f64::NEG_INFINITY,
        }
    }

    fn eval(&self) -> f64 {
        // Bundle construction is the dominant cost for cheap valuations; reuse is not
        // possible through the trait, so clone.
        self.model.value(&Bundle(self.x.clone()))
    }

    fn descend(&mut self, j: usize, acc: f64) {
        let m = self.caps.len();
        let last = j + 1 == m;
        for k in 0..=self.caps[j] {
            self.x[j] = k;
            let acc_k = acc + self.prices[j] * k as f64;
            let v = self.eval();
            let bound = v - acc_k;
            if last {
                if bound > self.threshold() {
                    self.best = Some((self.x.clone(), v, bound));
                }
            } else if bound + slack(bound) > self.threshold() {
                self.descend(j + 1, acc_k);
            }
        }
        self.x[j] = self.caps[j];
    }
}

#[inline]
fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

impl ValueTable {
    /// Demand query by plain enumeration of the table.
    pub fn argmax(&self, p: &PriceVector) -> Result<Demand> {
        check_price(self.capacities(), p)?;
        let m = p.len();
        let mut x = vec![0u32; m];
        let caps = self.capacities().counts();
        let mut best = (0usize, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut best_x = x.clone();
        for (r, &v) in self.values().iter().enumerate() {
            let u = v - dot_counts(p.as_slice(), &x);
            if u > best.2 + MONEY_TOL {
                best = (r, v, u);
                best_x.copy_from_slice(&x);
            }
            advance(&mut x, caps);
        }
        Ok(Demand {
            bundle: Bundle(best_x),
            value: best.1,
            utility: best.2,
        })
    }
}

/// Odometer increment, last item fastest. Returns false after the full bundle.
pub(crate) fn advance(x: &mut [u32], caps: &[u32]) -> bool {
    for j in (0..x.len()).rev() {
        if x[j] < caps[j] {
            x[j] += 1;
            return true;
        }
        x[j] = 0;
    }
    false
}

/// `U(p; v) = max_x v(x) - <p, x>`.
pub fn indirect_utility<V: Valuation + ?Sized>(model: &V, p: &PriceVector) -> Result<f64> {
    Ok(argmax_utility(model, p)?.utility)
}

/// `R(p) = max_{x <= c} <p, x> = <c, p>` for nonnegative prices.
pub fn indirect_revenue(p: &PriceVector, c: &Capacities) -> Result<f64> {
    check_price(c, p)?;
    Ok(dot_counts(p.as_slice(), c.counts()))
}

/// Demand oracle that answers from a cached table when the domain is small
/// and falls back to the pruned search otherwise.
pub enum DemandSolver<'a> {
    Table(ValueTable),
    Direct(&'a (dyn Valuation + 'a)),
}

impl<'a> DemandSolver<'a> {
    /// Tabulates `model` when `|X| <= table_cap`.
    pub fn new(model: &'a (dyn Valuation + 'a), table_cap: usize) -> Self {
        match to_table(model, table_cap) {
            Ok(t) => DemandSolver::Table(t),
            Err(_) => DemandSolver::Direct(model),
        }
    }

    pub fn demand(&self, p: &PriceVector) -> Result<Demand> {
        match self {
            DemandSolver::Table(t) => t.argmax(p),
            DemandSolver::Direct(v) => argmax_utility(*v, p),
        }
    }
}

/// An XOR bid: the bidder is willing to pay `amount` for `bundle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bundle: Bundle,
    pub amount: f64,
}

/// Demand observations collected from every bidder during an auction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    per_bidder: Vec<Vec<DemandObservation>>,
}

impl ReportSet {
    pub fn new(n: usize) -> Self {
        ReportSet {
            per_bidder: vec![Vec::new(); n],
        }
    }

    pub fn num_bidders(&self) -> usize {
        self.per_bidder.len()
    }

    pub fn push(&mut self, bidder: usize, obs: DemandObservation) {
        self.per_bidder[bidder].push(obs);
    }

    pub fn bidder(&self, i: usize) -> &[DemandObservation] {
        &self.per_bidder[i]
    }

    pub fn num_rounds(&self) -> usize {
        self.per_bidder.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Every observed bundle priced at the highest price at which it was demanded.
    pub fn to_bids(&self) -> Vec<Vec<Bid>> {
        self.per_bidder
            .iter()
            .map(|obs| {
                let mut best: BTreeMap<Bundle, f64> = BTreeMap::new();
                for o in obs {
                    let v = o.inferred_value();
                    let e = best.entry(o.bundle.clone()).or_insert(v);
                    if v > *e {
                        *e = v;
                    }
                }
                best.into_iter()
                    .map(|(bundle, amount)| Bid { bundle, amount })
                    .collect()
            })
            .collect()
    }
}

/// Result of a winner-determination problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdpSolution {
    pub allocation: Allocation,
    /// Sum of the winning bid amounts.
    pub welfare: f64,
    /// Amount of the winning bid per bidder (0 for the empty bundle).
    pub amounts: Vec<f64>,
}

/// Per-bidder candidate list in rank order with the empty bundle first.
#[derive(Debug, Clone)]
struct Candidates {
    counts: Vec<Vec<u32>>,
    ranks: Vec<usize>,
    amounts: Vec<f64>,
}

fn canonical_candidates(bids: &[Bid], c: &Capacities) -> Result<Candidates> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    best.insert(0, 0.0);
    for b in bids {
        c.check_bundle(&b.bundle)?;
        if !b.amount.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bid amount {} for {:?} is not finite",
                b.amount, b.bundle.0
            )));
        }
        let e = best.entry(c.rank(&b.bundle)).or_insert(b.amount);
        if b.amount > *e {
            *e = b.amount;
        }
    }
    let mut out = Candidates {
        counts: Vec::with_capacity(best.len()),
        ranks: Vec::with_capacity(best.len()),
        amounts: Vec::with_capacity(best.len()),
    };
    for (r, a) in best {
        out.counts.push(c.unrank(r).0);
        out.ranks.push(r);
        out.amounts.push(a);
    }
    Ok(out)
}

/// Budget on `sum_k |candidates_k| * |X|` below which the exact
/// capacity-state bound is precomputed.
const DP_BOUND_BUDGET: u128 = 40_000_000;

/// Winner determination over XOR bids by branch and bound.
///
/// Each bidder receives one of their bid bundles or nothing. Bidders with
/// `included[i] == false` are forced to the empty bundle. Among optimal
/// allocations the lexicographically smallest (by bundle rank, bidder 0
/// first) is returned.
pub fn wdp_bids(
    bids: &[Vec<Bid>],
    c: &Capacities,
    included: Option<&[bool]>,
) -> Result<WdpSolution> {
    let n = bids.len();
    if let Some(inc) = included {
        if inc.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: inc.len(),
            });
        }
    }
    let cands = bids
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if included.is_none_or(|inc| inc[i]) {
                canonical_candidates(b, c)
            } else {
                canonical_candidates(&[], c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(branch_and_bound(&cands, c))
}

/// Winner determination with every bidder's full true value table as bids.
pub fn wdp_true<V: Valuation + ?Sized>(models: &[&V], c: &Capacities) -> Result<WdpSolution> {
    wdp_true_with_cap(models, c, DEFAULT_TABLE_CAP)
}

pub fn wdp_true_with_cap<V: Valuation + ?Sized>(
    models: &[&V],
    c: &Capacities,
    cap: usize,
) -> Result<WdpSolution> {
    let size = c.enumerable(cap)?;
    let bundles: Vec<Vec<u32>> = c.bundles().map(|b| b.0).collect();
    let mut cands = Vec::with_capacity(models.len());
    for v in models {
        if v.capacities() != c {
            return Err(Error::InvalidModel(
                "valuation capacities differ from the auction's".into(),
            ));
        }
        let amounts: Vec<f64> = bundles
            .iter()
            .map(|x| v.value(&Bundle(x.clone())))
            .collect();
        if amounts[0] != 0.0 {
            return Err(Error::InvalidModel("valuation is not normalized".into()));
        }
        cands.push(Candidates {
            counts: bundles.clone(),
            ranks: (0..size).collect(),
            amounts,
        });
    }
    Ok(branch_and_bound(&cands, c))
}

/// Winner determination over the bundles observed in a report set, each at
/// its highest inferred value.
pub fn wdp_reports(reports: &ReportSet, c: &Capacities) -> Result<WdpSolution> {
    wdp_bids(&reports.to_bids(), c, None)
}

fn branch_and_bound(cands: &[Candidates], c: &Capacities) -> WdpSolution {
    let n = cands.len();
    let m = c.num_items();
    let total: u128 = cands.iter().map(|k| k.ranks.len() as u128).sum();
    let bound = if total.saturating_mul(c.domain_size()) <= DP_BOUND_BUDGET {
        Bound::Exact(capacity_dp(cands, c))
    } else {
        let mut suffix = vec![0.0; n + 1];
        for k in (0..n).rev() {
            let best = cands[k].amounts.iter().copied().fold(0.0, f64::max);
            suffix[k] = suffix[k + 1] + best;
        }
        Bound::Sum(suffix)
    };
    let mut s = Search {
        cands,
        bound,
        choice: vec![0; n],
        best: None,
    };
    let mut remaining = c.counts().to_vec();
    s.descend(0, 0.0, &mut remaining, c.rank(&c.full()));
    let (choice, welfare) = s.best.expect("the empty allocation is always visited");
    let allocation = Allocation(
        choice
            .iter()
            .enumerate()
            .map(|(i, &k)| Bundle(cands[i].counts[k].clone()))
            .collect(),
    );
    let amounts = choice
        .iter()
        .enumerate()
        .map(|(i, &k)| cands[i].amounts[k])
        .collect();
    debug_assert!(m == 0 || allocation.num_bidders() == n);
    WdpSolution {
        allocation,
        welfare,
        amounts,
    }
}

enum Bound {
    /// `f[k][r]`: best total from bidders `k..n` within remaining capacity of rank `r`.
    Exact(Vec<Vec<f64>>),
    /// Sum of per-bidder maxima from `k` on.
    Sum(Vec<f64>),
}

impl Bound {
    fn get(&self, k: usize, rank: usize) -> f64 {
        match self {
            Bound::Exact(f) => f[k][rank],
            Bound::Sum(s) => s[k],
        }
    }
}

fn capacity_dp(cands: &[Candidates], c: &Capacities) -> Vec<Vec<f64>> {
    let n = cands.len();
    let size = c.domain_size() as usize;
    let states: Vec<Vec<u32>> = c.bundles().map(|b| b.0).collect();
    let mut f = vec![vec![0.0; size]; n + 1];
    for k in (0..n).rev() {
        let (head, tail) = f.split_at_mut(k + 1);
        let next = &tail[0];
        let cur = &mut head[k];
        for (r, state) in states.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for (idx, x) in cands[k].counts.iter().enumerate() {
                if x.iter().zip(state).all(|(a, b)| a <= b) {
                    let v = cands[k].amounts[idx] + next[r - cands[k].ranks[idx]];
                    if v > best {
                        best = v;
                    }
                }
            }
            cur[r] = best;
        }
    }
    f
}

struct Search<'a> {
    cands: &'a [Candidates],
    bound: Bound,
    choice: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        match &self.best {
            Some((_, w)) => w + MONEY_TOL,
            None => f64::NEG_INFINITY,
        }
    }

    fn descend(&mut self, k: usize, partial: f64, remaining: &mut [u32], rem_rank: usize) {
        if k == self.cands.len() {
            if partial > self.threshold() {
                self.best = Some((self.choice.clone(), partial));
            }
            return;
        }
        let cands = &self.cands[k];
        for idx in 0..cands.ranks.len() {
            let x = &cands.counts[idx];
            if !x.iter().zip(remaining.iter()).all(|(a, b)| a <= b) {
                continue;
            }
            let next_partial = partial + cands.amounts[idx];
            let next_rank = rem_rank - cands.ranks[idx];
            let ub = next_partial + self.bound.get(k + 1, next_rank);
            if ub + slack(ub) <= self.threshold() {
                continue;
            }
            for (r, a) in remaining.iter_mut().zip(x) {
                *r -= a;
            }
            self.choice[k] = idx;
            self.descend(k + 1, next_partial, remaining, next_rank);
            for (r, a) in remaining.iter_mut().zip(&self.cands[k].counts[idx]) {
                *r += a;
            }
        }
    }
}

/// Searches a price grid for linear clearing prices.
///
/// Every item ranges over `levels`; grid points are visited in lexicographic
/// order. A point clears when some tuple of per-bidder utility maximizers
/// (within [`MONEY_TOL`] of the maximum) sums exactly to the capacities.
/// Returns the first clearing point found.
pub fn brute_force_clearing_search<V: Valuation + ?Sized>(
    models: &[&V],
    c: &Capacities,
    levels: &[f64],
) -> Result<Option<PriceVector>> {
    if levels.is_empty() {
        return Ok(None);
    }
    let tables = models
        .iter()
        .map(|v| to_table(*v, DEFAULT_TABLE_CAP))
        .collect::<Result<Vec<_>>>()?;
    let m = c.num_items();
    let bundles: Vec<Vec<u32>> = c.bundles().map(|b| b.0).collect();
    let mut idx = vec![0usize; m];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        let price = PriceVector::new(p)?;
        if clears_at(&tables, &bundles, &price, c) {
            return Ok(Some(price));
        }
        let mut j = m;
        loop {
            if j == 0 {
                return Ok(None);
            }
            j -= 1;
            if idx[j] + 1 < levels.len() {
                idx[j] += 1;
                break;
            }
            idx[j] = 0;
        }
    }
}

fn clears_at(tables: &[ValueTable], bundles: &[Vec<u32>], p: &PriceVector, c: &Capacities) -> bool {
    let sets: Vec<Vec<usize>> = tables
        .iter()
        .map(|t| {
            let utils: Vec<f64> = t
                .values()
                .iter()
                .zip(bundles)
                .map(|(v, x)| v - dot_counts(p.as_slice(), x))
                .collect();
            let max = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..utils.len())
                .filter(|&r| utils[r] >= max - MONEY_TOL)
                .collect()
        })
        .collect();
    fn rec(k: usize, sets: &[Vec<usize>], bundles: &[Vec<u32>], rem: &mut [u32]) -> bool {
        if k == sets.len() {
            return rem.iter().all(|&r| r == 0);
        }
        for &r in &sets[k] {
            let x = &bundles[r];
            if x.iter().zip(rem.iter()).all(|(a, b)| a <= b) {
                for (q, a) in rem.iter_mut().zip(x) {
                    *q -= a;
                }
                let ok = rec(k + 1, sets, bundles, rem);
                for (q, a) in rem.iter_mut().zip(x) {
                    *q += a;
                }
                if ok {
                    return true;
                }
            }
        }
        false
    }
    let mut rem = c.counts().to_vec();
    rec(0, &sets, bundles, &mut rem)
}
