//! The ML-powered clock auction.
//!
//! A short clock phase collects initial demand answers. Each later round fits
//! one monotone network per bidder to that bidder's answers, searches for the
//! price minimizing `W` over the networks subject to predicted demand fitting
//! within supply, and queries the true bidders there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Capacities;
use crate::error::{Error, Result};
use crate::mechanisms::cca::{clock_rounds, reserve_prices};
use crate::mechanisms::supplementary::{finalize, FinalizeConfig};
use crate::mechanisms::{AuctionOutcome, Bidders, Phase, RoundRecord, OUTCOME_SCHEMA_VERSION};
use crate::mmvnn::{Mmvnn, NetConfig};
use crate::oracles::{ReportSet, Valuation};
use crate::price::{next_price, NextPriceConfig};
use crate::training::{fresh_net, train_on_dqs, TrainConfig};
use crate::value_models::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlMode {
    /// Networks trained on the observed demand answers.
    Trained,
    /// The true valuations stand in for the networks.
    PerfectMl,
}

/// Which price the price search is started around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRule {
    /// The price queried in the previous round.
    Previous,
    /// The last price of the initial clock phase, in every round.
    InitPhaseEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlCcaConfig {
    pub q_init: usize,
    pub q_max: usize,
    /// Price increment of the initial clock phase; `None` means
    /// `1.05^(q_max / q_init) - 1`, so the short phase covers the price range of a full clock phase.
    pub init_increment: Option<f64>,
    pub reserve_fraction: f64,
    pub mode: MlMode,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub next_price: NextPriceConfig,
    pub anchor: AnchorRule,
    /// Continue training from the previous round's networks instead of fresh ones.
    pub warm_start: bool,
    pub finalize: FinalizeConfig,
    pub seed: u64,
    pub table_cap: usize,
}

impl Default for MlCcaConfig {
    fn default() -> Self {
        MlCcaConfig {
            q_init: 20,
            q_max: 100,
            init_increment: None,
            reserve_fraction: 0.1,
            mode: MlMode::Trained,
            net: NetConfig::default(),
            train: TrainConfig::default(),
            next_price: NextPriceConfig::default(),
            anchor: AnchorRule::Previous,
            warm_start: false,
            finalize: FinalizeConfig::default(),
            seed: 0,
            table_cap: 20_000,
        }
    }
}

impl MlCcaConfig {
    pub fn init_increment(&self) -> f64 {
        self.init_increment
            .unwrap_or_else(|| 1.05f64.powf(self.q_max as f64 / self.q_init as f64) - 1.0)
    }
}

/// Fits one network per bidder to their answers, in parallel.
///
/// Training starts from `init[i]` when given, otherwise from a fresh network.
pub fn train_bidder_nets(
    c: &Capacities,
    reports: &ReportSet,
    net: &NetConfig,
    train: &TrainConfig,
    seed: u64,
    init: Option<&[Mmvnn]>,
) -> Result<Vec<Mmvnn>> {
    if let Some(init) = init {
        if init.len() != reports.num_bidders() {
            return Err(Error::DimensionMismatch {
                expected: reports.num_bidders(),
                found: init.len(),
            });
        }
    }
    (0..reports.num_bidders())
        .into_par_iter()
        .map(|i| {
            let obs = reports.bidder(i);
            let s = derive_seed(seed, i as u64);
            let mut model = match init {
                Some(nets) => nets[i].clone(),
                None => fresh_net(c, net, obs, s)?,
            };
            let cfg = TrainConfig {
                seed: derive_seed(s, 1),
                ..train.clone()
            };
            train_on_dqs(&mut model, obs, &cfg)?;
            Ok(model)
        })
        .collect()
}

pub fn run_ml_cca(
    models: &[&dyn Valuation],
    c: &Capacities,
    cfg: &MlCcaConfig,
) -> Result<AuctionOutcome> {
    if cfg.q_init == 0 || cfg.q_init > cfg.q_max {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= q_init <= q_max, got q_init = {}, q_max = {}",
            cfg.q_init, cfg.q_max
        )));
    }
    let bidders = Bidders::new(models, cfg.table_cap);
    let mut reports = ReportSet::new(models.len());
    let mut trace: Vec<RoundRecord> = Vec::new();
    let start = reserve_prices(models, c, cfg.reserve_fraction)?;
    let (init_end, mut clearing) = clock_rounds(
        &bidders,
        c,
        start,
        0,
        cfg.q_init,
        cfg.init_increment(),
        false,
        &mut reports,
        &mut trace,
    )?;
    let mut last = init_end.clone();

    let mut round = trace.len();
    let mut prev: Option<Vec<Mmvnn>> = None;
    while clearing.is_none() && round < cfg.q_max {
        let round_seed = derive_seed(cfg.seed, round as u64);
        let estimates: Vec<&dyn Valuation> = match cfg.mode {
            MlMode::PerfectMl => models.to_vec(),
            MlMode::Trained => {
                let init = if cfg.warm_start {
                    prev.as_deref()
                } else {
                    None
                };
                let nets = train_bidder_nets(c, &reports, &cfg.net, &cfg.train, round_seed, init)?;
                prev.insert(nets)
                    .iter()
                    .map(|n| n as &dyn Valuation)
                    .collect()
            }
        };
        let anchor = match cfg.anchor {
            AnchorRule::Previous => &last,
            AnchorRule::InitPhaseEnd => &init_end,
        };
        let np_cfg = NextPriceConfig {
            seed: derive_seed(round_seed, 2),
            ..cfg.next_price.clone()
        };
        let next = next_price(&estimates, c, anchor, &np_cfg)?;
        let rec = bidders.query(&next.price, round, Phase::Ml, c, &mut reports, &mut trace)?;
        last = next.price;
        if rec.cleared {
            clearing = Some(rec);
        }
        round += 1;
    }

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
        mechanism: "ml_cca".into(),
        rounds: trace.len(),
        cleared: clearing.is_some(),
        final_price: last,
        reports,
        trace,
        finalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value_models::ValueTable;

    #[test]
    fn default_init_increment() {
        let cfg = MlCcaConfig {
            q_init: 10,
            q_max: 30,
            ..MlCcaConfig::default()
        };
        assert!((cfg.init_increment() - (1.05f64.powi(3) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_ml_clears_additive_market() {
        let c = Capacities::new(vec![2, 1]).unwrap();
        let a =
            ValueTable::from_fn(c.clone(), |x| 3.0 * x.0[0] as f64 + 1.0 * x.0[1] as f64).unwrap();
        let b =
            ValueTable::from_fn(c.clone(), |x| 2.0 * x.0[0] as f64 + 4.0 * x.0[1] as f64).unwrap();
        let models: Vec<&dyn Valuation> = vec![&a, &b];
        let cfg = MlCcaConfig {
            q_init: 2,
            q_max: 40,
            mode: MlMode::PerfectMl,
            ..MlCcaConfig::default()
        };
        let out = run_ml_cca(&models, &c, &cfg).unwrap();
        assert!(
            out.cleared,
            "trace: {:?}",
            out.trace
                .iter()
                .map(|r| r.price.clone())
                .collect::<Vec<_>>()
        );
        assert_eq!(out.allocation().0[0].0, vec![2, 0]);
        assert_eq!(out.allocation().0[1].0, vec![0, 1]);
    }

    #[test]
    fn rejects_bad_round_budget() {
        let c = Capacities::new(vec![1]).unwrap();
        let a = ValueTable::new(c.clone(), vec![0.0, 1.0]).unwrap();
        let models: Vec<&dyn Valuation> = vec![&a];
        let cfg = MlCcaConfig {
            q_init: 5,
            q_max: 3,
            ..MlCcaConfig::default()
        };
        assert!(run_ml_cca(&models, &c, &cfg).is_err());
    }
}
