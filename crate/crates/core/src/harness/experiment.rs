//! Seeded comparison runs of the clock auction and ML-CCA.
//!
//! Output layout under `output_dir`:
//!
//! - `results.csv`: one [`MetricsRow`] per seed and mechanism, ordered by
//!   seed, then by position in the mechanism list.
//! - `outcomes/seed{seed}_{mechanism}_{mode}.json`: full [`OutcomeRecord`].
//! - `traces/seed{seed}_{mechanism}_{mode}.csv`: per-round prices, total
//!   demand and clearing error.
//! - `summary.json`: per-mechanism means and clearing rates.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Capacities;
use crate::error::{Error, Result};
use crate::harness::io::{write_csv, write_json};
use crate::harness::metrics::{clearing_error, efficiency_against};
use crate::mechanisms::{
    run_cca, run_ml_cca, AuctionOutcome, CcaConfig, Heuristic, MlCcaConfig, MlMode,
};
use crate::oracles::{wdp_true, Valuation};
use crate::value_models::{generate_domain, Domain, DomainSpec};

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MLCCA_WORKERS";

/// Seeds as an explicit list or as text such as `"101..200"` or `"1,4,7..9"`
/// (ranges are inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Text(String),
}

impl Seeds {
    pub fn expand(&self) -> Result<Vec<u64>> {
        let out = match self {
            Seeds::List(v) => v.clone(),
            Seeds::Text(s) => parse_seeds(s)?,
        };
        if out.is_empty() {
            return Err(Error::InvalidConfig("no seeds given".into()));
        }
        Ok(out)
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = |part: &str| Error::InvalidConfig(format!("cannot parse seeds {part:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let lo: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let hi: u64 = b.trim().parse().map_err(|_| bad(part))?;
                if lo > hi {
                    return Err(bad(part));
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    Cca(CcaConfig),
    MlCca(MlCcaConfig),
}

impl MechanismSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::Cca(_) => "cca",
            MechanismSpec::MlCca(_) => "ml_cca",
        }
    }

    /// `clock` for the CCA; for ML-CCA the price-search mode, prefixed with
    /// `perfect_` when true values replace the networks.
    pub fn mode(&self) -> String {
        match self {
            MechanismSpec::Cca(_) => "clock".into(),
            MechanismSpec::MlCca(cfg) => {
                let search = if cfg.next_price.unconstrained() {
                    "unconstrained"
                } else {
                    "constrained"
                };
                match cfg.mode {
                    MlMode::Trained => search.into(),
                    MlMode::PerfectMl => format!("perfect_{search}"),
                }
            }
        }
    }

    /// Runs the mechanism; the ML-CCA seed is replaced by `seed`.
    pub fn run(
        &self,
        models: &[&dyn Valuation],
        c: &Capacities,
        seed: u64,
    ) -> Result<AuctionOutcome> {
        match self {
            MechanismSpec::Cca(cfg) => run_cca(models, c, cfg),
            MechanismSpec::MlCca(cfg) => {
                let cfg = MlCcaConfig {
                    seed,
                    ..cfg.clone()
                };
                run_ml_cca(models, c, &cfg)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub seeds: Seeds,
    pub mechanisms: Vec<MechanismSpec>,
    pub output_dir: PathBuf,
    /// Fill the `wallclock_ms` column; off by default so reruns are byte-identical.
    pub record_wallclock: bool,
    /// Worker threads; `None` defers to `MLCCA_WORKERS`, then to the core count.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    /// Desk-scale comparison: 10 seeds of the small synergy domain, 30 rounds,
    /// ML-CCA with 10 initial clock rounds in both price-search modes.
    fn default() -> Self {
        let ml = MlCcaConfig {
            q_init: 10,
            q_max: 30,
            ..MlCcaConfig::default()
        };
        let mut unconstrained = ml.clone();
        unconstrained.next_price.mu = 0.0;
        unconstrained.next_price.nu = 0.0;
        ExperimentConfig {
            schema_version: EXPERIMENT_SCHEMA_VERSION,
            domain: DomainSpec::small_synergy(),
            seeds: Seeds::Text("101..110".into()),
            mechanisms: vec![
                MechanismSpec::Cca(CcaConfig {
                    q_max: 30,
                    ..CcaConfig::default()
                }),
                MechanismSpec::MlCca(ml),
                MechanismSpec::MlCca(unconstrained),
            ],
            output_dir: PathBuf::from("results"),
            record_wallclock: false,
            workers: None,
        }
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub mechanism: String,
    pub mode: String,
    pub rounds: usize,
    /// 1 if some round cleared the market, else 0.
    pub cleared: u8,
    pub e_clock: f64,
    pub e_raise: f64,
    pub e_profit: f64,
    pub wallclock_ms: u64,
}

/// Everything stored per seed and mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub mechanism: String,
    pub mode: String,
    pub optimal_welfare: f64,
    /// Squared clearing error of every round.
    pub clearing_errors: Vec<f64>,
    pub metrics: MetricsRow,
    pub outcome: AuctionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryGroup {
    pub mechanism: String,
    pub mode: String,
    pub runs: usize,
    pub mean_e_clock: f64,
    pub mean_e_raise: f64,
    pub mean_e_profit: f64,
    pub clearing_rate: f64,
    pub mean_rounds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub groups: Vec<SummaryGroup>,
}

/// Efficiencies of an outcome under each bidding heuristic.
pub fn evaluate_outcome(
    outcome: &AuctionOutcome,
    models: &[&dyn Valuation],
    optimal_welfare: f64,
) -> Result<(f64, f64, f64)> {
    let by = &outcome.finalization.by_heuristic;
    let e = |h| efficiency_against(by.get(h), models, optimal_welfare);
    Ok((
        e(Heuristic::Clock)?,
        e(Heuristic::Raised)?,
        e(Heuristic::ProfitMax)?,
    ))
}

/// Runs one mechanism on one domain and assembles its record.
pub fn run_one(
    domain: &Domain,
    mech: &MechanismSpec,
    seed: u64,
    record_wallclock: bool,
) -> Result<OutcomeRecord> {
    let models: Vec<&dyn Valuation> = domain.bidders.iter().map(|m| m as &dyn Valuation).collect();
    let c = &domain.capacities;
    let optimal_welfare = wdp_true(&domain.valuations(), c)?.welfare;
    let start = Instant::now();
    let outcome = mech.run(&models, c, seed)?;
    let wallclock_ms = if record_wallclock {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let (e_clock, e_raise, e_profit) = evaluate_outcome(&outcome, &models, optimal_welfare)?;
    let clearing_errors = outcome
        .trace
        .iter()
        .map(|r| clearing_error(&r.demands, c))
        .collect();
    let metrics = MetricsRow {
        seed,
        mechanism: mech.name().into(),
        mode: mech.mode(),
        rounds: outcome.rounds,
        cleared: outcome.cleared as u8,
        e_clock,
        e_raise,
        e_profit,
        wallclock_ms,
    };
    Ok(OutcomeRecord {
        schema_version: EXPERIMENT_SCHEMA_VERSION,
        seed,
        mechanism: metrics.mechanism.clone(),
        mode: metrics.mode.clone(),
        optimal_welfare,
        clearing_errors,
        metrics,
        outcome,
    })
}

/// Per-round trace as CSV: round, phase, cleared, clearing error, prices, total demand.
pub fn write_trace_csv(path: &Path, record: &OutcomeRecord, c: &Capacities) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let m = c.num_items();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["round", "phase", "cleared", "clearing_error"]
        .map(String::from)
        .to_vec();
    header.extend((0..m).map(|j| format!("p{j}")));
    header.extend((0..m).map(|j| format!("d{j}")));
    w.write_record(&header)?;
    for (r, ce) in record.outcome.trace.iter().zip(&record.clearing_errors) {
        let phase = match r.phase {
            crate::mechanisms::Phase::Clock => "clock",
            crate::mechanisms::Phase::Ml => "ml",
        };
        let mut row = vec![
            r.round.to_string(),
            phase.to_string(),
            (r.cleared as u8).to_string(),
            ce.to_string(),
        ];
        row.extend(r.price.as_slice().iter().map(f64::to_string));
        row.extend(r.demands.total_demand(m).iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Means per mechanism and mode, in order of first appearance.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryGroup> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.mechanism.clone(), r.mode.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(mechanism, mode)| {
            let g: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.mechanism == mechanism && r.mode == mode)
                .collect();
            let n = g.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryGroup {
                runs: g.len(),
                mean_e_clock: mean(|r| r.e_clock),
                mean_e_raise: mean(|r| r.e_raise),
                mean_e_profit: mean(|r| r.e_profit),
                clearing_rate: mean(|r| r.cleared as f64),
                mean_rounds: mean(|r| r.rounds as f64),
                mechanism,
                mode,
            }
        })
        .collect()
}

/// Worker count: explicit setting, then `MLCCA_WORKERS`, then rayon's default.
pub fn worker_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(w) = explicit {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{WORKERS_ENV}={s:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    if cfg.schema_version != EXPERIMENT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            what: "experiment config".into(),
            expected: EXPERIMENT_SCHEMA_VERSION,
            found: cfg.schema_version,
        });
    }
    let seeds = cfg.seeds.expand()?;
    if cfg.mechanisms.is_empty() {
        return Err(Error::InvalidConfig("no mechanisms given".into()));
    }
    let mut names = BTreeSet::new();
    for m in &cfg.mechanisms {
        if !names.insert((m.name(), m.mode())) {
            return Err(Error::InvalidConfig(format!(
                "mechanism {} with mode {} is listed twice",
                m.name(),
                m.mode()
            )));
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = worker_count(cfg.workers)? {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    let out = &cfg.output_dir;
    let jobs: Vec<(u64, &MechanismSpec)> = seeds
        .iter()
        .flat_map(|&s| cfg.mechanisms.iter().map(move |m| (s, m)))
        .collect();
    let rows: Vec<MetricsRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, mech)| -> Result<MetricsRow> {
                let domain = generate_domain(seed, &cfg.domain)?;
                let rec = run_one(&domain, mech, seed, cfg.record_wallclock)?;
                let stem = format!("seed{seed}_{}_{}", rec.mechanism, rec.mode);
                write_json(&out.join("outcomes").join(format!("{stem}.json")), &rec)?;
                write_trace_csv(
                    &out.join("traces").join(format!("{stem}.csv")),
                    &rec,
                    &domain.capacities,
                )?;
                Ok(rec.metrics)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_csv(&out.join("results.csv"), &rows)?;
    let summary = ExperimentSummary {
        schema_version: EXPERIMENT_SCHEMA_VERSION,
        seeds,
        groups: summarize(&rows),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
