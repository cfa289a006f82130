use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlcca::domain::{DemandObservation, PriceVector};
use mlcca::error::{Error, Result};
use mlcca::harness::experiment::{evaluate_outcome, parse_seeds, OutcomeRecord, Seeds};
use mlcca::harness::io::{read_json, write_json};
use mlcca::harness::plot::{
    export_prediction_plot_data, set_r_squared_centered, validation_prices, write_plot_csv,
    PlotSampleSpec,
};
use mlcca::harness::{reproduce_examples, run_experiment, ExperimentConfig};
use mlcca::mechanisms::{run_cca, AuctionOutcome, CcaConfig};
use mlcca::mmvnn::{Mmvnn, NetConfig, NetFile};
use mlcca::oracles::{argmax_utility, wdp_true, Valuation};
use mlcca::price::{next_price, NextPriceConfig};
use mlcca::training::{train_with_restarts, TrainConfig};
use mlcca::value_models::{generate_domain, Domain, DomainFile, DomainSpec};

#[derive(Parser)]
#[command(
    name = "mlcca",
    version,
    about = "Clock auctions with ML-guided prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds, e.g. "101..200".
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        record_wallclock: bool,
    },
    /// Run the clock auction on a value-model file.
    Cca {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the next query price from serialized networks.
    NextPrice {
        #[arg(long, num_args = 1.., required = true)]
        nets: Vec<PathBuf>,
        /// Comma-separated anchor prices.
        #[arg(long)]
        anchor: String,
        #[arg(long)]
        unconstrained: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one bidder's network on demand answers at random prices.
    Train {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        bidder: usize,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write prediction-versus-truth rows here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Efficiencies of a saved outcome against its value-model file.
    Eval {
        #[arg(long)]
        outcome: PathBuf,
        #[arg(long)]
        domain: PathBuf,
    },
    /// Run the two small markets without clearing prices.
    ReproduceExamples,
    /// Generate a value-model file.
    GenDomain {
        #[arg(long)]
        seed: u64,
        /// Domain spec JSON; the small synergy domain by default.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Settings file of the `train` command.
#[derive(Default, serde::Deserialize)]
#[serde(default)]
struct TrainSettings {
    net: NetConfig,
    train: TrainConfig,
}

fn load_domain(path: &Path) -> Result<Domain> {
    Domain::from_file(read_json::<DomainFile>(path)?)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn parse_prices(s: &str) -> Result<PriceVector> {
    let p = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse prices {s:?}")))?;
    PriceVector::new(p)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            output,
            workers,
            record_wallclock,
        } => {
            let mut cfg = match config {
                Some(p) => read_json::<ExperimentConfig>(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seeds {
                parse_seeds(&s)?;
                cfg.seeds = Seeds::Text(s);
            }
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            cfg.record_wallclock |= record_wallclock;
            print_json(&run_experiment(&cfg)?)?;
        }
        Command::Cca {
            domain,
            config,
            out,
        } => {
            let d = load_domain(&domain)?;
            let cfg = match config {
                Some(p) => read_json::<CcaConfig>(&p)?,
                None => CcaConfig::default(),
            };
            let models: Vec<&dyn Valuation> =
                d.bidders.iter().map(|m| m as &dyn Valuation).collect();
            let outcome = run_cca(&models, &d.capacities, &cfg)?;
            match out {
                Some(p) => write_json(&p, &outcome)?,
                None => print_json(&outcome)?,
            }
        }
        Command::NextPrice {
            nets,
            anchor,
            unconstrained,
            seed,
        } => {
            let nets = nets
                .iter()
                .map(|p| Mmvnn::from_file(read_json::<NetFile>(p)?))
                .collect::<Result<Vec<_>>>()?;
            let c = nets[0].capacities().clone();
            let models: Vec<&dyn Valuation> = nets.iter().map(|n| n as &dyn Valuation).collect();
            let mut cfg = NextPriceConfig {
                seed,
                ..NextPriceConfig::default()
            };
            if unconstrained {
                cfg.mu = 0.0;
                cfg.nu = 0.0;
            }
            let r = next_price(&models, &c, &parse_prices(&anchor)?, &cfg)?;
            print_json(&serde_json::json!({
                "price": r.price,
                "w": r.w,
                "demands": r.demands,
                "feasible": r.feasible,
                "cleared": r.cleared,
                "iterations": r.iterations,
            }))?;
        }
        Command::Train {
            domain,
            bidder,
            queries,
            seed,
            config,
            out,
            plot,
        } => {
            let d = load_domain(&domain)?;
            let v = d.bidders.get(bidder).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "bidder {bidder} out of range (n = {})",
                    d.num_bidders()
                ))
            })?;
            let settings = match config {
                Some(p) => read_json::<TrainSettings>(&p)?,
                None => TrainSettings::default(),
            };
            let obs = validation_prices(v, queries, 3.0, seed)?
                .into_iter()
                .enumerate()
                .map(|(k, p)| DemandObservation::new(argmax_utility(v, &p)?.bundle, p, k))
                .collect::<Result<Vec<_>>>()?;
            let (net, report) =
                train_with_restarts(&d.capacities, &settings.net, &obs, &settings.train, seed, 3)?;
            write_json(&out, &net.to_file())?;
            let mut summary = serde_json::json!({
                "final_mismatches": report.final_mismatches,
                "epochs": report.epoch_loss.len(),
                "snapshot_id": report.snapshot_id,
            });
            if let Some(p) = plot {
                let spec = PlotSampleSpec {
                    seed,
                    ..PlotSampleSpec::default()
                };
                let rows = export_prediction_plot_data(&net, v, &obs, &spec)?;
                write_plot_csv(&p, &rows)?;
                summary["val2_r2_centered"] = set_r_squared_centered(&rows, "val2").ok().into();
            }
            print_json(&summary)?;
        }
        Command::Eval { outcome, domain } => {
            let d = load_domain(&domain)?;
            let value: serde_json::Value = read_json(&outcome)?;
            let outcome: AuctionOutcome = if value.get("outcome").is_some() {
                serde_json::from_value::<OutcomeRecord>(value)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?
                    .outcome
            } else {
                serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?
            };
            let models: Vec<&dyn Valuation> =
                d.bidders.iter().map(|m| m as &dyn Valuation).collect();
            let opt = wdp_true(&d.valuations(), &d.capacities)?.welfare;
            let (e_clock, e_raise, e_profit) = evaluate_outcome(&outcome, &models, opt)?;
            print_json(&serde_json::json!({
                "mechanism": outcome.mechanism,
                "rounds": outcome.rounds,
                "cleared": outcome.cleared,
                "optimal_welfare": opt,
                "e_clock": e_clock,
                "e_raise": e_raise,
                "e_profit": e_profit,
            }))?;
        }
        Command::ReproduceExamples => {
            let report = reproduce_examples()?;
            for e in &report.examples {
                let status = if e.failures.is_empty() {
                    "PASS"
                } else {
                    "FAIL"
                };
                println!(
                    "{status} {}: welfare {} with the constrained query, {} from the over-demanded grid (optimum {}); constrained price {:?}",
                    e.name, e.full_welfare, e.restricted_welfare, e.optimal_welfare, e.constrained.price
                );
                for f in &e.failures {
                    println!("  {f}");
                }
            }
            return Ok(report.passed());
        }
        Command::GenDomain { seed, spec, out } => {
            let spec = match spec {
                Some(p) => read_json::<DomainSpec>(&p)?,
                None => DomainSpec::small_synergy(),
            };
            write_json(&out, &generate_domain(seed, &spec)?.to_file())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
