//! Generates a synthetic domain, writes it to JSON and reads it back.

use mlcca::harness::io::{read_json, write_json};
use mlcca::oracles::{wdp_true, Valuation};
use mlcca::value_models::{generate_domain, Domain, DomainFile, DomainSpec};

fn main() -> mlcca::error::Result<()> {
    let d = generate_domain(42, &DomainSpec::small_synergy())?;
    let path = std::env::temp_dir().join("mlcca_domain_42.json");
    write_json(&path, &d.to_file())?;
    let back = Domain::from_file(read_json::<DomainFile>(&path)?)?;
    let models: Vec<&dyn Valuation> = back.bidders.iter().map(|m| m as &dyn Valuation).collect();
    println!("wrote {}", path.display());
    println!(
        "capacities {:?}, {} bidders ({})",
        back.capacities.counts(),
        back.num_bidders(),
        back.bidders
            .iter()
            .map(|b| b.kind())
            .collect::<Vec<_>>()
            .join(", ")
    );
    let opt = wdp_true(&models, &back.capacities)?;
    println!("efficient welfare {:.4}", opt.welfare);
    for (i, x) in opt.allocation.bundles().iter().enumerate() {
        println!("  bidder {i}: {:?}", x.0);
    }
    Ok(())
}
