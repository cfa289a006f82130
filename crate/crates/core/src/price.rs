//! Price selection by minimizing the dual objective
//! `W(p) = <c, p> + sum_i U_i(p)` over nonnegative linear prices.
//!
//! `W` is convex (a sum of maxima of affine functions) and has subgradient
//! `c - sum_i x_i*(p)` at `p`, where `x_i*` are the demanded bundles. Its
//! minimizers over the region where demand fits within supply are the prices
//! worth querying next: at a linear clearing price, `W` attains its minimum and
//! demand equals supply.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{dot_counts, Allocation, Capacities, PriceVector};
use crate::error::{Error, Result};
use crate::oracles::{DemandSolver, Valuation};

/// `W(p)` together with the demands and subgradient it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WEval {
    pub value: f64,
    pub demands: Allocation,
    /// `c - sum_i x_i*(p)`.
    pub subgradient: Vec<f64>,
}

impl WEval {
    pub fn total_demand(&self, c: &Capacities) -> Vec<u64> {
        self.demands.total_demand(c.num_items())
    }

    pub fn is_feasible(&self, c: &Capacities) -> bool {
        self.total_demand(c)
            .iter()
            .zip(c.counts())
            .all(|(&d, &cj)| d <= cj as u64)
    }

    pub fn clears(&self, c: &Capacities) -> bool {
        self.total_demand(c)
            .iter()
            .zip(c.counts())
            .all(|(&d, &cj)| d == cj as u64)
    }
}

fn evaluate(solvers: &[DemandSolver<'_>], c: &Capacities, p: &PriceVector) -> Result<WEval> {
    let mut value = dot_counts(p.as_slice(), c.counts());
    let mut bundles = Vec::with_capacity(solvers.len());
    for s in solvers {
        let d = s.demand(p)?;
        value += d.utility;
        bundles.push(d.bundle);
    }
    let demands = Allocation(bundles);
    let total = demands.total_demand(c.num_items());
    let subgradient = c
        .counts()
        .iter()
        .zip(&total)
        .map(|(&cj, &dj)| cj as f64 - dj as f64)
        .collect();
    Ok(WEval {
        value,
        demands,
        subgradient,
    })
}

fn check_models(models: &[&dyn Valuation], c: &Capacities) -> Result<()> {
    if models.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one bidder is required".into(),
        ));
    }
    for v in models {
        if v.capacities() != c {
            return Err(Error::InvalidModel(
                "valuation capacities differ from the auction's".into(),
            ));
        }
    }
    Ok(())
}

/// Evaluates `W(p)` for the given value models.
pub fn w_value(models: &[&dyn Valuation], c: &Capacities, p: &PriceVector) -> Result<WEval> {
    check_models(models, c)?;
    if p.len() != c.num_items() {
        return Err(Error::DimensionMismatch {
            expected: c.num_items(),
            found: p.len(),
        });
    }
    let solvers: Vec<_> = models.iter().map(|v| DemandSolver::Direct(*v)).collect();
    evaluate(&solvers, c, p)
}

/// How over-demanded items are weighted in the price update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverdemandFactor {
    /// Scale the step on over-demanded items by `mu`.
    Mu,
    /// Scale it by `1 + mu`.
    OnePlusMu,
}

/// When the step size decays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecay {
    /// Once per iteration.
    PerIteration,
    /// After every single-item update, so later items see a slightly smaller step.
    PerItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NextPriceConfig {
    pub iterations: usize,
    /// Initial relative step `lambda`: item `j` moves by `lambda * p_j` per unit of excess.
    pub lambda: f64,
    /// Multiplicative step decay `eta`.
    pub eta: f64,
    /// Initial weight `mu` of over-demand in the update.
    pub mu: f64,
    /// Growth factor `nu` applied to `mu` while no feasible price has been seen.
    pub nu: f64,
    pub overdemand: OverdemandFactor,
    pub decay: StepDecay,
    /// The start point is `anchor_j * U[jitter.0, jitter.1]`.
    pub jitter: (f64, f64),
    /// Lower bound on start prices, so multiplicative steps can move off zero.
    pub min_start_price: f64,
    pub seed: u64,
    pub table_cap: usize,
}

impl Default for NextPriceConfig {
    fn default() -> Self {
        NextPriceConfig {
            iterations: 300,
            lambda: 0.01,
            eta: 0.005,
            mu: 2.0,
            nu: 1.01,
            overdemand: OverdemandFactor::Mu,
            decay: StepDecay::PerIteration,
            jitter: (0.75, 1.25),
            min_start_price: 1e-3,
            seed: 0,
            table_cap: 20_000,
        }
    }
}

impl NextPriceConfig {
    /// With `mu = nu = 0` the search ignores feasibility and returns the
    /// best `W` seen, i.e. it approximates the unconstrained minimizer.
    pub fn unconstrained(&self) -> bool {
        self.mu == 0.0 && self.nu == 0.0
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lambda.is_finite()
            && self.lambda > 0.0
            && (0.0..1.0).contains(&self.eta)
            && self.mu.is_finite()
            && self.mu >= 0.0
            && self.nu.is_finite()
            && self.nu >= 0.0
            && self.jitter.0 > 0.0
            && self.jitter.0 <= self.jitter.1
            && self.min_start_price >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid next-price settings: {self:?}"
            )))
        }
    }
}

/// One iterate of the price search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub price: PriceVector,
    pub w: f64,
    pub total_demand: Vec<u64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceTrace {
    pub steps: Vec<TraceStep>,
    pub best_feasible: Option<usize>,
    pub best_overall: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPriceResult {
    pub price: PriceVector,
    /// `W` at the returned price.
    pub w: f64,
    /// Demands of the models at the returned price.
    pub demands: Allocation,
    /// Whether the models' demand fits within supply at the returned price.
    pub feasible: bool,
    /// Whether the models' demand equals supply at the returned price.
    pub cleared: bool,
    pub iterations: usize,
    pub trace: PriceTrace,
}

/// Demands of the true models at `p` and whether they sum exactly to `c`.
pub fn check_clearing(
    models: &[&dyn Valuation],
    c: &Capacities,
    p: &PriceVector,
) -> Result<(bool, Allocation)> {
    let e = w_value(models, c, p)?;
    Ok((e.clears(c), e.demands))
}

/// One price update: `p_j - lambda p_j (c_j - d_j)`, with the step on
/// over-demanded items scaled by `overdemand_weight`, floored at 0.
pub fn asym_update(
    p: &[f64],
    total: &[u64],
    c: &Capacities,
    lambda: f64,
    overdemand_weight: f64,
) -> Vec<f64> {
    p.iter()
        .zip(total)
        .zip(c.counts())
        .map(|((&pj, &dj), &cj)| {
            let excess = cj as f64 - dj as f64;
            let weight = if excess < 0.0 { overdemand_weight } else { 1.0 };
            (pj - lambda * pj * weight * excess).max(0.0)
        })
        .collect()
}

/// Searches for the next query price from the bidders' (estimated) value models.
pub fn next_price(
    models: &[&dyn Valuation],
    c: &Capacities,
    anchor: &PriceVector,
    cfg: &NextPriceConfig,
) -> Result<NextPriceResult> {
    check_models(models, c)?;
    cfg.validate()?;
    let m = c.num_items();
    if anchor.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: anchor.len(),
        });
    }
    let solvers: Vec<DemandSolver<'_>> = models
        .iter()
        .map(|v| DemandSolver::new(*v, cfg.table_cap))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p: Vec<f64> = anchor
        .as_slice()
        .iter()
        .map(|&a| {
            let f = if cfg.jitter.1 > cfg.jitter.0 {
                rng.gen_range(cfg.jitter.0..cfg.jitter.1)
            } else {
                cfg.jitter.0
            };
            (a * f).max(cfg.min_start_price)
        })
        .collect();
    let constrained = !cfg.unconstrained();
    let factor = |mu: f64| match (constrained, cfg.overdemand) {
        (false, _) => 1.0,
        (true, OverdemandFactor::Mu) => mu,
        (true, OverdemandFactor::OnePlusMu) => 1.0 + mu,
    };

    let mut lambda = cfg.lambda;
    let mut mu = cfg.mu;
    let mut best_any: Option<(PriceVector, WEval)> = None;
    let mut best_feasible: Option<(PriceVector, WEval)> = None;
    let mut trace = PriceTrace::default();
    let mut iterations = 0;
    for _ in 0..cfg.iterations {
        iterations += 1;
        let price = PriceVector::clamped(p.clone());
        let eval = evaluate(&solvers, c, &price)?;
        let total = eval.total_demand(c);
        let feasible = eval.is_feasible(c);
        trace.steps.push(TraceStep {
            price: price.clone(),
            w: eval.value,
            total_demand: total.clone(),
            feasible,
        });
        let idx = trace.steps.len() - 1;
        if eval.clears(c) {
            trace.best_feasible = Some(idx);
            trace.best_overall = Some(idx);
            return Ok(NextPriceResult {
                price,
                w: eval.value,
                demands: eval.demands,
                feasible: true,
                cleared: true,
                iterations,
                trace,
            });
        }
        if best_any.as_ref().is_none_or(|(_, b)| eval.value < b.value) {
            best_any = Some((price.clone(), eval.clone()));
            trace.best_overall = Some(idx);
        }
        if feasible
            && best_feasible
                .as_ref()
                .is_none_or(|(_, b)| eval.value < b.value)
        {
            best_feasible = Some((price.clone(), eval.clone()));
            trace.best_feasible = Some(idx);
        }
        match cfg.decay {
            StepDecay::PerIteration => {
                p = asym_update(&p, &total, c, lambda, factor(mu));
                lambda *= 1.0 - cfg.eta;
            }
            StepDecay::PerItem => {
                for j in 0..m {
                    let excess = eval.subgradient[j];
                    let weight = if excess < 0.0 { factor(mu) } else { 1.0 };
                    p[j] = (p[j] - lambda * p[j] * weight * excess).max(0.0);
                    lambda *= 1.0 - cfg.eta;
                }
            }
        }
        if best_feasible.is_none() {
            mu *= cfg.nu;
        }
    }
    let chosen = if constrained {
        best_feasible.or(best_any)
    } else {
        best_any
    };
    let (price, eval) = match chosen {
        Some(b) => b,
        None => {
            // Zero iterations: report the start point.
            let price = PriceVector::clamped(p);
            let eval = evaluate(&solvers, c, &price)?;
            (price, eval)
        }
    };
    Ok(NextPriceResult {
        feasible: eval.is_feasible(c),
        cleared: eval.clears(c),
        w: eval.value,
        demands: eval.demands,
        price,
        iterations,
        trace,
    })
}
