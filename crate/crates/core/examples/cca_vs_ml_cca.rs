//! Runs the clock auction and the ML-guided auction on a few generated
//! instances and compares efficiency.

use mlcca::harness::metrics::efficiency_against;
use mlcca::mechanisms::{run_cca, run_ml_cca, CcaConfig, MlCcaConfig};
use mlcca::oracles::{wdp_true, Valuation};
use mlcca::value_models::{generate_domain, DomainSpec};

fn main() -> mlcca::error::Result<()> {
    let spec = DomainSpec::small_synergy();
    println!("seed  mechanism  rounds  cleared  efficiency");
    for seed in 101..106 {
        let d = generate_domain(seed, &spec)?;
        let models: Vec<&dyn Valuation> = d.bidders.iter().map(|m| m as &dyn Valuation).collect();
        let opt = wdp_true(&models, &d.capacities)?.welfare;
        let cca = run_cca(
            &models,
            &d.capacities,
            &CcaConfig {
                q_max: 30,
                ..CcaConfig::default()
            },
        )?;
        let ml = run_ml_cca(
            &models,
            &d.capacities,
            &MlCcaConfig {
                q_init: 10,
                q_max: 30,
                seed,
                ..MlCcaConfig::default()
            },
        )?;
        for out in [&cca, &ml] {
            println!(
                "{seed:>4}  {:<9}  {:>6}  {:>7}  {:.4}",
                out.mechanism,
                out.rounds,
                out.cleared,
                efficiency_against(&out.finalization.by_heuristic.clock, &models, opt)?
            );
        }
    }
    Ok(())
}
