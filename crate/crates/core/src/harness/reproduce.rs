//! The two small markets without clearing prices, run end to end.
//!
//! In both, the unconstrained minimizer of `W` lies in a region of
//! over-demand, and demand answers collected only there lead to a poor final
//! allocation. The constrained price search instead returns a price with
//! feasible demand, whose answers let winner determination find the
//! efficient allocation.

use serde::{Deserialize, Serialize};

use crate::domain::{social_welfare, Allocation, Capacities, DemandObservation, PriceVector};
use crate::error::Result;
use crate::instances;
use crate::oracles::{argmax_utility, wdp_reports, wdp_true, ReportSet, Valuation};
use crate::price::{next_price, NextPriceConfig, NextPriceResult};
use crate::value_models::ValueModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub price: Vec<f64>,
    pub demands: Allocation,
    pub feasible: bool,
    pub w: f64,
}

impl From<NextPriceResult> for SearchSummary {
    fn from(r: NextPriceResult) -> Self {
        SearchSummary {
            price: r.price.as_slice().to_vec(),
            demands: r.demands,
            feasible: r.feasible,
            w: r.w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub name: String,
    pub optimal_welfare: f64,
    pub constrained: SearchSummary,
    pub unconstrained: SearchSummary,
    /// Allocation and true welfare from the over-demanded query grid alone.
    pub restricted_allocation: Allocation,
    pub restricted_welfare: f64,
    /// Same, with the constrained search's price added to the queries.
    pub full_allocation: Allocation,
    pub full_welfare: f64,
    pub expected_full_welfare: f64,
    pub expected_restricted_welfare: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplesReport {
    pub examples: Vec<ExampleReport>,
}

impl ExamplesReport {
    pub fn passed(&self) -> bool {
        self.examples.iter().all(|e| e.failures.is_empty())
    }

    pub fn failures(&self) -> Vec<String> {
        self.examples
            .iter()
            .flat_map(|e| e.failures.iter().map(move |f| format!("{}: {f}", e.name)))
            .collect()
    }
}

/// Truthful answers of every bidder at every price in `grid`.
pub fn query_reports(models: &[&dyn Valuation], grid: &[PriceVector]) -> Result<ReportSet> {
    let mut r = ReportSet::new(models.len());
    for (k, p) in grid.iter().enumerate() {
        for (i, v) in models.iter().enumerate() {
            let d = argmax_utility(*v, p)?;
            r.push(i, DemandObservation::new(d.bundle, p.clone(), k)?);
        }
    }
    Ok(r)
}

/// Uniform prices `p_j = t` for `t` in `0, 0.05, ..., 0.45`.
pub fn two_goods_grid() -> Vec<PriceVector> {
    (0..10)
        .map(|k| PriceVector::uniform(2, k as f64 * 0.05).expect("valid price"))
        .collect()
}

/// Prices `0.05, ..., 0.45`.
pub fn one_good_grid() -> Vec<PriceVector> {
    (1..10)
        .map(|k| PriceVector::new(vec![k as f64 * 0.05]).expect("valid price"))
        .collect()
}

fn run_example(
    name: &str,
    c: &Capacities,
    bidders: &[ValueModel],
    grid: &[PriceVector],
    anchor: &PriceVector,
    expected: (f64, f64),
) -> Result<ExampleReport> {
    let models: Vec<&dyn Valuation> = bidders.iter().map(|m| m as &dyn Valuation).collect();
    let optimal_welfare = wdp_true(&models, c)?.welfare;
    let cfg = NextPriceConfig::default();
    let constrained = next_price(&models, c, anchor, &cfg)?;
    let unconstrained = next_price(
        &models,
        c,
        anchor,
        &NextPriceConfig {
            mu: 0.0,
            nu: 0.0,
            ..cfg
        },
    )?;

    let restricted = query_reports(&models, grid)?;
    let restricted_allocation = wdp_reports(&restricted, c)?.allocation;
    let restricted_welfare = social_welfare(&restricted_allocation, &models)?;

    let mut full_grid = grid.to_vec();
    full_grid.push(constrained.price.clone());
    let full = query_reports(&models, &full_grid)?;
    let full_allocation = wdp_reports(&full, c)?.allocation;
    let full_welfare = social_welfare(&full_allocation, &models)?;

    let mut failures = Vec::new();
    if full_welfare != expected.0 {
        failures.push(format!(
            "welfare with the constrained query is {full_welfare}, expected {}",
            expected.0
        ));
    }
    if restricted_welfare != expected.1 {
        failures.push(format!(
            "welfare from the query grid is {restricted_welfare}, expected {}",
            expected.1
        ));
    }
    if !constrained.feasible {
        failures.push("constrained search returned an over-demanded price".into());
    }
    Ok(ExampleReport {
        name: name.into(),
        optimal_welfare,
        constrained: constrained.into(),
        unconstrained: unconstrained.into(),
        restricted_allocation,
        restricted_welfare,
        full_allocation,
        full_welfare,
        expected_full_welfare: expected.0,
        expected_restricted_welfare: expected.1,
        failures,
    })
}

/// Two goods with 10 copies each; see [`instances::two_goods`].
pub fn two_goods_example() -> Result<ExampleReport> {
    let (c, bidders) = instances::two_goods();
    let anchor = PriceVector::uniform(2, 1.0)?;
    let mut r = run_example(
        "two_goods",
        &c,
        &bidders,
        &two_goods_grid(),
        &anchor,
        (18.0, 10.0),
    )?;
    let dist = r
        .constrained
        .price
        .iter()
        .map(|p| (p - 0.5) * (p - 0.5))
        .sum::<f64>()
        .sqrt();
    if dist > 0.05 {
        r.failures.push(format!(
            "constrained price {:?} is {dist:.4} away from (0.5, 0.5)",
            r.constrained.price
        ));
    }
    Ok(r)
}

/// One good with 10 copies; see [`instances::one_good`].
pub fn one_good_example() -> Result<ExampleReport> {
    let (c, bidders) = instances::one_good();
    let anchor = PriceVector::new(vec![1.0])?;
    let mut r = run_example(
        "one_good",
        &c,
        &bidders,
        &one_good_grid(),
        &anchor,
        (9.0, 6.0),
    )?;
    if r.constrained.price[0] <= 0.5 {
        r.failures.push(format!(
            "constrained price {} is not above 0.5",
            r.constrained.price[0]
        ));
    }
    if r.full_allocation
        .bundles()
        .iter()
        .map(|x| x.0[0])
        .collect::<Vec<_>>()
        != [6, 1]
    {
        r.failures.push(format!(
            "final allocation {:?} is not ((6), (1))",
            r.full_allocation.0
        ));
    }
    Ok(r)
}

pub fn reproduce_examples() -> Result<ExamplesReport> {
    Ok(ExamplesReport {
        examples: vec![two_goods_example()?, one_good_example()?],
    })
}
