//! Outcome metrics: efficiency, clearing error and goodness of fit.

use crate::domain::{social_welfare, Allocation, Capacities};
use crate::error::{Error, Result};
use crate::oracles::{wdp_true, Valuation};

/// `V(a) / V(a*)`, with the convention `1.0` when the optimal welfare is 0.
pub fn efficiency<V: Valuation + ?Sized>(
    a: &Allocation,
    models: &[&V],
    c: &Capacities,
) -> Result<f64> {
    let opt = wdp_true(models, c)?.welfare;
    efficiency_against(a, models, opt)
}

/// Efficiency against a precomputed optimal welfare.
pub fn efficiency_against<V: Valuation + ?Sized>(
    a: &Allocation,
    models: &[&V],
    optimal: f64,
) -> Result<f64> {
    if optimal <= 0.0 {
        return Ok(1.0);
    }
    Ok(social_welfare(a, models)? / optimal)
}

/// Squared clearing error `sum_j (sum_i x_ij - c_j)^2`.
pub fn clearing_error(demands: &Allocation, c: &Capacities) -> f64 {
    demands
        .total_demand(c.num_items())
        .iter()
        .zip(c.counts())
        .map(|(&d, &cj)| {
            let e = d as f64 - cj as f64;
            e * e
        })
        .sum()
}

fn check_fit_inputs(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("R² of an empty sample".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² with constant truth".into()));
    }
    Ok(ss_tot)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let ss_tot = check_fit_inputs(pred, truth)?;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Shift-invariant R²: both samples are centered before comparing, so a
/// prediction that is off by a constant scores 1.
pub fn r_squared_centered(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let ss_tot = check_fit_inputs(pred, truth)?;
    let n = truth.len() as f64;
    let tm = truth.iter().sum::<f64>() / n;
    let pm = pred.iter().sum::<f64>() / n;
    let ss_res: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let d = (t - tm) - (p - pm);
            d * d
        })
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
