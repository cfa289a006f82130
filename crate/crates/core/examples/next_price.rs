//! Constrained versus unconstrained price search on one item.

use mlcca::domain::PriceVector;
use mlcca::instances::one_good;
use mlcca::oracles::Valuation;
use mlcca::price::{next_price, NextPriceConfig};

fn main() -> mlcca::error::Result<()> {
    let (c, bidders) = one_good();
    let models: Vec<&dyn Valuation> = bidders.iter().map(|m| m as &dyn Valuation).collect();
    let anchor = PriceVector::new(vec![1.0])?;

    let constrained = next_price(&models, &c, &anchor, &NextPriceConfig::default())?;
    let unconstrained = next_price(
        &models,
        &c,
        &anchor,
        &NextPriceConfig {
            mu: 0.0,
            nu: 0.0,
            ..NextPriceConfig::default()
        },
    )?;
    for (name, r) in [
        ("constrained", &constrained),
        ("unconstrained", &unconstrained),
    ] {
        let d: Vec<u32> = r.demands.bundles().iter().map(|x| x.0[0]).collect();
        println!(
            "{name:>13}: p = {:.5}, W = {:.5}, demands {d:?}, feasible {}, {} iterations",
            r.price.as_slice()[0],
            r.w,
            r.feasible,
            r.iterations
        );
    }
    Ok(())
}
