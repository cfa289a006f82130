//! Supplementary bids and the final allocation.
//!
//! After the query rounds each bidder submits XOR bids derived from a
//! heuristic, winners are determined over those bids and payments computed.
//! When a round clears, the clearing demands are final and every winner pays
//! the linear price of their bundle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{
    dot_counts, Allocation, Bundle, Capacities, DemandObservation, PriceVector, MONEY_TOL,
};
use crate::error::{Error, Result};
use crate::mechanisms::payments::{vcg_nearest_payments, vcg_payments};
use crate::oracles::{wdp_bids, Bid, ReportSet, Valuation, WdpSolution};
use crate::value_models::{to_table, DEFAULT_TABLE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    /// Every demanded bundle at the highest price it was demanded at.
    Clock,
    /// Every demanded bundle at its true value.
    Raised,
    /// Raised bids plus the bundles of highest utility at the final price, at true value.
    ProfitMax,
}

impl Heuristic {
    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Clock => "clock",
            Heuristic::Raised => "raised",
            Heuristic::ProfitMax => "profit_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentRule {
    Vcg,
    VcgNearest,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinalizeConfig {
    pub heuristic: Heuristic,
    /// Number of extra bundles per bidder in the profit-max heuristic.
    pub profit_bundles: usize,
    pub payment: PaymentRule,
}

impl Default for FinalizeConfig {
    fn default() -> Self {
        FinalizeConfig {
            heuristic: Heuristic::Raised,
            profit_bundles: 100,
            payment: PaymentRule::Vcg,
        }
    }
}

/// Final allocation under each heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicAllocations {
    pub clock: Allocation,
    pub raised: Allocation,
    pub profit_max: Allocation,
}

impl HeuristicAllocations {
    pub fn get(&self, h: Heuristic) -> &Allocation {
        match h {
            Heuristic::Clock => &self.clock,
            Heuristic::Raised => &self.raised,
            Heuristic::ProfitMax => &self.profit_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalization {
    pub heuristic: Heuristic,
    pub allocation: Allocation,
    pub payments: Vec<f64>,
    /// Total of the winning bids (or clearing prices).
    pub reported_welfare: f64,
    pub by_heuristic: HeuristicAllocations,
}

pub fn clock_bids(reports: &ReportSet) -> Vec<Vec<Bid>> {
    reports.to_bids()
}

/// One bid per distinct non-empty observed bundle, at true value.
pub fn raised_bids(reports: &ReportSet, models: &[&dyn Valuation]) -> Vec<Vec<Bid>> {
    reports
        .to_bids()
        .into_iter()
        .zip(models)
        .map(|(bids, v)| {
            bids.into_iter()
                .filter(|b| !b.bundle.is_null())
                .map(|b| Bid {
                    amount: v.value(&b.bundle),
                    bundle: b.bundle,
                })
                .collect()
        })
        .collect()
}

/// The `q` bundles of highest true utility at `p` (ties by rank), at true value.
pub fn top_utility_bids<V: Valuation + ?Sized>(
    model: &V,
    p: &PriceVector,
    q: usize,
) -> Result<Vec<Bid>> {
    let c = model.capacities();
    if p.len() != c.num_items() {
        return Err(Error::DimensionMismatch {
            expected: c.num_items(),
            found: p.len(),
        });
    }
    let table = to_table(model, DEFAULT_TABLE_CAP)?;
    let bundles: Vec<Bundle> = c.bundles().collect();
    let mut ranked: Vec<(f64, usize)> = table
        .values()
        .iter()
        .zip(&bundles)
        .enumerate()
        .map(|(r, (val, x))| (val - dot_counts(p.as_slice(), &x.0), r))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ranked
        .into_iter()
        .take(q)
        .map(|(_, r)| Bid {
            bundle: bundles[r].clone(),
            amount: table.get(r),
        })
        .collect())
}

/// Raised bids plus, per bidder, the `q` bundles of highest true utility at `p`.
pub fn profit_max_bids(
    reports: &ReportSet,
    models: &[&dyn Valuation],
    p: &PriceVector,
    q: usize,
) -> Result<Vec<Vec<Bid>>> {
    let raised = raised_bids(reports, models);
    let mut out = Vec::with_capacity(models.len());
    for (bids, v) in raised.into_iter().zip(models) {
        let mut merged: BTreeMap<Bundle, f64> =
            bids.into_iter().map(|b| (b.bundle, b.amount)).collect();
        for b in top_utility_bids(*v, p, q)? {
            merged.insert(b.bundle, b.amount);
        }
        out.push(
            merged
                .into_iter()
                .map(|(bundle, amount)| Bid { bundle, amount })
                .collect(),
        );
    }
    Ok(out)
}

/// Inferred clock bids merged with extra bids, keeping the larger amount per bundle.
pub fn merge_bids(reports: &ReportSet, extra: &[Vec<Bid>]) -> Result<Vec<Vec<Bid>>> {
    if extra.len() != reports.num_bidders() {
        return Err(Error::DimensionMismatch {
            expected: reports.num_bidders(),
            found: extra.len(),
        });
    }
    Ok(reports
        .to_bids()
        .into_iter()
        .zip(extra)
        .map(|(clock, more)| {
            let mut best: BTreeMap<Bundle, f64> =
                clock.into_iter().map(|b| (b.bundle, b.amount)).collect();
            for b in more {
                let e = best.entry(b.bundle.clone()).or_insert(b.amount);
                if b.amount > *e {
                    *e = b.amount;
                }
            }
            best.into_iter()
                .map(|(bundle, amount)| Bid { bundle, amount })
                .collect()
        })
        .collect())
}

/// Winner determination over the inferred clock bids plus extra (push) bids.
pub fn wdp_with_bids(
    reports: &ReportSet,
    extra: &[Vec<Bid>],
    c: &Capacities,
) -> Result<WdpSolution> {
    wdp_bids(&merge_bids(reports, extra)?, c, None)
}

/// Whether `bid` respects the revealed-preference bound set by a clock
/// observation: `amount <= inferred_final_bid + <p^r, bid.bundle - x^r>`.
pub fn revealed_preference_ok(
    bid: &Bid,
    against: &DemandObservation,
    inferred_final_bid: f64,
) -> Result<bool> {
    if bid.bundle.len() != against.bundle.len() {
        return Err(Error::DimensionMismatch {
            expected: against.bundle.len(),
            found: bid.bundle.len(),
        });
    }
    let p = against.price.as_slice();
    let bound =
        inferred_final_bid + (dot_counts(p, &bid.bundle.0) - dot_counts(p, &against.bundle.0));
    Ok(bid.amount <= bound + MONEY_TOL)
}

/// Bids of the chosen heuristic.
pub fn heuristic_bids(
    h: Heuristic,
    reports: &ReportSet,
    models: &[&dyn Valuation],
    final_price: &PriceVector,
    profit_bundles: usize,
) -> Result<Vec<Vec<Bid>>> {
    let extra = match h {
        Heuristic::Clock => return Ok(clock_bids(reports)),
        Heuristic::Raised => raised_bids(reports, models),
        Heuristic::ProfitMax => profit_max_bids(reports, models, final_price, profit_bundles)?,
    };
    merge_bids(reports, &extra)
}

/// Determines the final allocation and payments.
///
/// `clearing` holds the demands of a clearing round, if one occurred.
pub fn finalize(
    models: &[&dyn Valuation],
    c: &Capacities,
    reports: &ReportSet,
    final_price: &PriceVector,
    clearing: Option<&Allocation>,
    cfg: &FinalizeConfig,
) -> Result<Finalization> {
    if reports.num_bidders() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            found: reports.num_bidders(),
        });
    }
    if let Some(a) = clearing {
        let payments: Vec<f64> = match cfg.payment {
            PaymentRule::None => vec![0.0; a.num_bidders()],
            _ => a.bundles().iter().map(|x| final_price.cost(x)).collect(),
        };
        let reported_welfare = a.bundles().iter().map(|x| final_price.cost(x)).sum();
        return Ok(Finalization {
            heuristic: cfg.heuristic,
            allocation: a.clone(),
            payments,
            reported_welfare,
            by_heuristic: HeuristicAllocations {
                clock: a.clone(),
                raised: a.clone(),
                profit_max: a.clone(),
            },
        });
    }
    let mut sols = Vec::with_capacity(3);
    let mut chosen = None;
    for h in [Heuristic::Clock, Heuristic::Raised, Heuristic::ProfitMax] {
        let bids = heuristic_bids(h, reports, models, final_price, cfg.profit_bundles)?;
        let sol = wdp_bids(&bids, c, None)?;
        if h == cfg.heuristic {
            chosen = Some((bids, sol.clone()));
        }
        sols.push(sol.allocation);
    }
    let (bids, sol) = chosen.expect("every heuristic is evaluated");
    let payments = match cfg.payment {
        PaymentRule::Vcg => vcg_payments(&bids, c, &sol)?,
        PaymentRule::VcgNearest => vcg_nearest_payments(&bids, c, &sol)?,
        PaymentRule::None => vec![0.0; models.len()],
    };
    let mut it = sols.into_iter();
    Ok(Finalization {
        heuristic: cfg.heuristic,
        allocation: sol.allocation,
        payments,
        reported_welfare: sol.welfare,
        by_heuristic: HeuristicAllocations {
            clock: it.next().expect("clock"),
            raised: it.next().expect("raised"),
            profit_max: it.next().expect("profit_max"),
        },
    })
}
