//! The combinatorial clock auction baseline.
//!
//! Prices start at reserve prices and every over-demanded item's price rises
//! by a fixed percentage per round. The clock phase ends when supply clears,
//! when no item is over-demanded (optional), or after `q_max` rounds.

use serde::{Deserialize, Serialize};

use crate::domain::{Capacities, PriceVector};
use crate::error::{Error, Result};
use crate::mechanisms::supplementary::{finalize, FinalizeConfig};
use crate::mechanisms::{AuctionOutcome, Bidders, Phase, RoundRecord, OUTCOME_SCHEMA_VERSION};
use crate::oracles::{ReportSet, Valuation};
use crate::value_models::{to_table, DEFAULT_TABLE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcaConfig {
    pub q_max: usize,
    /// Relative price increase of over-demanded items per round.
    pub increment: f64,
    /// Reserve price of item `j` is this fraction of the bidders' mean
    /// largest single-copy marginal value for `j`.
    pub reserve_fraction: f64,
    /// Explicit start prices, overriding the reserve prices.
    pub start_price: Option<PriceVector>,
    /// End the clock phase as soon as no item is over-demanded.
    pub stop_without_overdemand: bool,
    pub finalize: FinalizeConfig,
    pub table_cap: usize,
}

impl Default for CcaConfig {
    fn default() -> Self {
        CcaConfig {
            q_max: 100,
            increment: 0.05,
            reserve_fraction: 0.1,
            start_price: None,
            stop_without_overdemand: true,
            finalize: FinalizeConfig::default(),
            table_cap: 20_000,
        }
    }
}

/// Reserve prices `rho * mean_i max_x (v_i(x + e_j) - v_i(x))`.
///
/// Falls back to the single-copy value `v_i(e_j)` when the domain is too
/// large to enumerate.
pub fn reserve_prices(models: &[&dyn Valuation], c: &Capacities, rho: f64) -> Result<PriceVector> {
    if models.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one bidder is required".into(),
        ));
    }
    let m = c.num_items();
    let mut sums = vec![0.0; m];
    for v in models {
        match to_table(*v, DEFAULT_TABLE_CAP) {
            Ok(t) => {
                let mut best = vec![0.0f64; m];
                for (r, x) in c.bundles().enumerate() {
                    for j in 0..m {
                        if x.0[j] < c.counts()[j] {
                            best[j] = best[j].max(t.get(r + c.strides()[j]) - t.get(r));
                        }
                    }
                }
                for j in 0..m {
                    sums[j] += best[j];
                }
            }
            Err(_) => {
                for j in 0..m {
                    let mut e = crate::domain::Bundle::empty(m);
                    e.0[j] = 1;
                    sums[j] += v.value(&e);
                }
            }
        }
    }
    PriceVector::new(
        sums.into_iter()
            .map(|s| rho * s / models.len() as f64)
            .collect(),
    )
}

/// Multiplies the price of every over-demanded item by `1 + increment`.
pub fn clock_update(p: &PriceVector, total: &[u64], c: &Capacities, increment: f64) -> PriceVector {
    PriceVector::clamped(
        p.as_slice()
            .iter()
            .zip(total)
            .zip(c.counts())
            .map(|((&pj, &dj), &cj)| {
                if dj > cj as u64 {
                    pj * (1.0 + increment)
                } else {
                    pj
                }
            })
            .collect(),
    )
}

/// Runs clock rounds starting at `start` and round index `first_round`.
///
/// Returns the last queried price and, if supply cleared, that round.
#[allow(clippy::too_many_arguments)]
pub(crate) fn clock_rounds(
    bidders: &Bidders<'_>,
    c: &Capacities,
    start: PriceVector,
    first_round: usize,
    rounds: usize,
    increment: f64,
    stop_without_overdemand: bool,
    reports: &mut ReportSet,
    trace: &mut Vec<RoundRecord>,
) -> Result<(PriceVector, Option<RoundRecord>)> {
    let mut p = start;
    for k in 0..rounds {
        let rec = bidders.query(&p, first_round + k, Phase::Clock, c, reports, trace)?;
        if rec.cleared {
            return Ok((p, Some(rec)));
        }
        let total = rec.demands.total_demand(c.num_items());
        let over = total.iter().zip(c.counts()).any(|(&d, &cj)| d > cj as u64);
        if !over && stop_without_overdemand {
            return Ok((p, None));
        }
        if k + 1 < rounds {
            p = clock_update(&p, &total, c, increment);
        }
    }
    Ok((p, None))
}

pub fn run_cca(
    models: &[&dyn Valuation],
    c: &Capacities,
    cfg: &CcaConfig,
) -> Result<AuctionOutcome> {
    if cfg.q_max == 0 {
        return Err(Error::InvalidConfig("q_max must be at least 1".into()));
    }
    if !(cfg.increment.is_finite() && cfg.increment > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "increment {} must be > 0",
            cfg.increment
        )));
    }
    let start = match &cfg.start_price {
        Some(p) => p.clone(),
        None => reserve_prices(models, c, cfg.reserve_fraction)?,
    };
    if start.len() != c.num_items() {
        return Err(Error::DimensionMismatch {
            expected: c.num_items(),
            found: start.len(),
        });
    }
    let bidders = Bidders::new(models, cfg.table_cap);
    let mut reports = ReportSet::new(models.len());
    let mut trace = Vec::new();
    let (last, clearing) = clock_rounds(
        &bidders,
        c,
        start,
        0,
        cfg.q_max,
        cfg.increment,
        cfg.stop_without_overdemand,
        &mut reports,
        &mut trace,
    )?;
    let finalization = finalize(
        models,
        c,
        &reports,
        &last,
        clearing.as_ref().map(|r| &r.demands),
        &cfg.finalize,
    )?;
    Ok(AuctionOutcome {
        schema_version: OUTCOME_SCHEMA_VERSION,
        mechanism: "cca".into(),
        rounds: trace.len(),
        cleared: clearing.is_some(),
        final_price: last,
        reports,
        trace,
        finalization,
    })
}
