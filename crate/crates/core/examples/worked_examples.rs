//! The two small markets without linear clearing prices.
//!
//! Run with `cargo run --example worked_examples`.

use mlcca::harness::reproduce_examples;

fn main() -> mlcca::error::Result<()> {
    let report = reproduce_examples()?;
    for e in &report.examples {
        println!("{}", e.name);
        println!("  optimal welfare            {}", e.optimal_welfare);
        println!(
            "  constrained price          {:?} (feasible: {}, W = {:.4})",
            e.constrained.price, e.constrained.feasible, e.constrained.w
        );
        println!(
            "  unconstrained price        {:?} (feasible: {}, W = {:.4})",
            e.unconstrained.price, e.unconstrained.feasible, e.unconstrained.w
        );
        println!("  welfare from the grid      {}", e.restricted_welfare);
        println!("  welfare with the new query {}", e.full_welfare);
    }
    if !report.passed() {
        for f in report.failures() {
            eprintln!("{f}");
        }
        std::process::exit(1);
    }
    Ok(())
}
