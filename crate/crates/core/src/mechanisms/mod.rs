//! Auction mechanisms: the classical clock auction and its ML-powered
//! variant, followed by a supplementary bid round, winner determination and
//! payments.

pub mod cca;
pub mod ml_cca;
pub mod payments;
pub mod supplementary;

use serde::{Deserialize, Serialize};

use crate::domain::{Allocation, Capacities, DemandObservation, PriceVector};
use crate::error::Result;
use crate::oracles::{DemandSolver, ReportSet, Valuation};

pub use cca::{reserve_prices, run_cca, CcaConfig};
pub use ml_cca::{run_ml_cca, AnchorRule, MlCcaConfig, MlMode};
pub use supplementary::{
    finalize, revealed_preference_ok, wdp_with_bids, Finalization, FinalizeConfig, Heuristic,
    PaymentRule,
};

pub const OUTCOME_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Clock rounds with the multiplicative over-demand rule.
    Clock,
    /// Rounds whose price came from the ML price search.
    Ml,
}

/// One query round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub phase: Phase,
    pub price: PriceVector,
    pub demands: Allocation,
    pub cleared: bool,
}

/// Everything a mechanism run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub schema_version: u32,
    pub mechanism: String,
    pub rounds: usize,
    pub cleared: bool,
    pub final_price: PriceVector,
    pub reports: ReportSet,
    pub trace: Vec<RoundRecord>,
    pub finalization: Finalization,
}

impl AuctionOutcome {
    pub fn allocation(&self) -> &Allocation {
        &self.finalization.allocation
    }

    pub fn payments(&self) -> &[f64] {
        &self.finalization.payments
    }
}

/// Truthful demand answers of every bidder at one price.
pub(crate) struct Bidders<'a> {
    solvers: Vec<DemandSolver<'a>>,
}

impl<'a> Bidders<'a> {
    pub(crate) fn new(models: &'a [&'a dyn Valuation], table_cap: usize) -> Self {
        Bidders {
            solvers: models
                .iter()
                .map(|v| DemandSolver::new(*v, table_cap))
                .collect(),
        }
    }

    /// Queries everyone at `p`, records the answers and reports whether supply clears.
    pub(crate) fn query(
        &self,
        p: &PriceVector,
        round: usize,
        phase: Phase,
        c: &Capacities,
        reports: &mut ReportSet,
        trace: &mut Vec<RoundRecord>,
    ) -> Result<RoundRecord> {
        let mut bundles = Vec::with_capacity(self.solvers.len());
        for (i, s) in self.solvers.iter().enumerate() {
            let d = s.demand(p)?;
            reports.push(
                i,
                DemandObservation::new(d.bundle.clone(), p.clone(), round)?,
            );
            bundles.push(d.bundle);
        }
        let demands = Allocation(bundles);
        let total = demands.total_demand(c.num_items());
        let cleared = total.iter().zip(c.counts()).all(|(&d, &cj)| d == cj as u64);
        let rec = RoundRecord {
            round,
            phase,
            price: p.clone(),
            demands,
            cleared,
        };
        trace.push(rec.clone());
        Ok(rec)
    }
}
