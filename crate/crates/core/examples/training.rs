//! Fits a network to one bidder's demand answers and reports how well it
//! predicts values it never saw.

use mlcca::domain::DemandObservation;
use mlcca::harness::plot::{
    export_prediction_plot_data, set_r_squared_centered, validation_prices, PlotSampleSpec,
};
use mlcca::mmvnn::NetConfig;
use mlcca::oracles::argmax_utility;
use mlcca::training::{train_with_restarts, TrainConfig};
use mlcca::value_models::{generate_domain, DomainSpec};

fn main() -> mlcca::error::Result<()> {
    let domain = generate_domain(3, &DomainSpec::small_synergy())?;
    let bidder = &domain.bidders[0];
    let obs = validation_prices(bidder, 60, 3.0, 1)?
        .into_iter()
        .enumerate()
        .map(|(k, p)| DemandObservation::new(argmax_utility(bidder, &p)?.bundle, p, k))
        .collect::<mlcca::error::Result<Vec<_>>>()?;

    let (net, report) = train_with_restarts(
        &domain.capacities,
        &NetConfig::default(),
        &obs,
        &TrainConfig::default(),
        7,
        3,
    )?;
    println!(
        "{} answers, {} epochs, {} still mispredicted",
        obs.len(),
        report.epoch_loss.len(),
        report.final_mismatches
    );
    let rows = export_prediction_plot_data(&net, bidder, &obs, &PlotSampleSpec::default())?;
    for set in ["train", "val1", "val2"] {
        println!(
            "centered R² on {set}: {:.4}",
            set_r_squared_centered(&rows, set)?
        );
    }
    Ok(())
}
