//! Prediction-versus-truth data for scatter plots of a trained network.
//!
//! Three sets are emitted: the training observations, uniformly random
//! bundles (`val1`) and demand responses at random prices (`val2`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DemandObservation, PriceVector};
use crate::error::{Error, Result};
use crate::harness::io::write_csv;
use crate::harness::metrics::r_squared_centered;
use crate::oracles::{argmax_utility, Valuation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotSampleSpec {
    pub val1_count: usize,
    pub val2_count: usize,
    /// `val2` prices are drawn from `[0, price_scale * v(c) / sum_j c_j]`.
    pub price_scale: f64,
    pub seed: u64,
}

impl Default for PlotSampleSpec {
    fn default() -> Self {
        PlotSampleSpec {
            val1_count: 200,
            val2_count: 200,
            price_scale: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub rank: usize,
    pub true_value: f64,
    pub predicted: f64,
    /// `<p, x>` for rows that come from a demand answer.
    pub inferred_lower_bound: Option<f64>,
    pub set: String,
}

/// Random query prices for `val2`, drawn per item from
/// `[0, scale * v(c) / sum_j c_j]`.
pub fn validation_prices<V: Valuation + ?Sized>(
    model: &V,
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<PriceVector>> {
    let c = model.capacities();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "price scale {scale} must be > 0"
        )));
    }
    let copies: u64 = c.counts().iter().map(|&x| x as u64).sum();
    let hi = scale * model.value(&c.full()) / copies as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = (0..c.num_items())
                .map(|_| {
                    if hi > 0.0 {
                        rng.gen_range(0.0..hi)
                    } else {
                        0.0
                    }
                })
                .collect();
            PriceVector::new(p)
        })
        .collect()
}

pub fn export_prediction_plot_data<N, V>(
    net: &N,
    model: &V,
    train: &[DemandObservation],
    spec: &PlotSampleSpec,
) -> Result<Vec<PlotRow>>
where
    N: Valuation + ?Sized,
    V: Valuation + ?Sized,
{
    let c = model.capacities();
    if net.capacities() != c {
        return Err(Error::InvalidModel(
            "network and model capacities differ".into(),
        ));
    }
    let size = c.enumerable(usize::MAX)?;
    let row = |x: &crate::domain::Bundle, lb: Option<f64>, set: &str| PlotRow {
        rank: c.rank(x),
        true_value: model.value(x),
        predicted: net.value(x),
        inferred_lower_bound: lb,
        set: set.into(),
    };
    let mut rows = Vec::with_capacity(train.len() + spec.val1_count + spec.val2_count);
    for o in train {
        c.check_bundle(&o.bundle)?;
        rows.push(row(&o.bundle, Some(o.inferred_value()), "train"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.val1_count {
        let x = c.unrank(rng.gen_range(0..size));
        rows.push(row(&x, None, "val1"));
    }
    let prices = validation_prices(model, spec.val2_count, spec.price_scale, spec.seed ^ 0x5eed)?;
    for p in &prices {
        let d = argmax_utility(model, p)?;
        rows.push(row(&d.bundle, Some(p.cost(&d.bundle)), "val2"));
    }
    Ok(rows)
}

/// Shift-invariant R² of the rows tagged `set`.
pub fn set_r_squared_centered(rows: &[PlotRow], set: &str) -> Result<f64> {
    let (pred, truth): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.set == set)
        .map(|r| (r.predicted, r.true_value))
        .unzip();
    r_squared_centered(&pred, &truth)
}

pub fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<()> {
    write_csv(path, rows)
}
