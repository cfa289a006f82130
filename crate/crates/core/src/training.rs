//! Fitting a network to a bidder's demand-query answers.
//!
//! A network is consistent with an observation `(p, x)` when `x` is its own
//! utility maximizer at `p`. For every inconsistent observation the loss is
//! the utility gap `(M(x_hat) - <p, x_hat>) - (M(x) - <p, x>) >= 0`, where
//! `x_hat` is the network's demand, and the step moves along the gradient of
//! `M(x_hat) - M(x)`. After each step weights are clamped back to their sign
//! constraints.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{dot_counts, Bundle, Capacities, DemandObservation};
use crate::error::{Error, Result};
use crate::mmvnn::{Mmvnn, NetConfig};
use crate::oracles::{advance, argmax_utility, Valuation};
use crate::value_models::{ValueTable, DEFAULT_TABLE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on weights (biases are not penalized).
    pub l2: f64,
    pub optimizer: Optimizer,
    /// Cosine-anneal the learning rate to zero over the epochs.
    pub cosine: bool,
    /// Visit observations in a seeded random order each epoch instead of round order.
    pub shuffle: bool,
    /// Accumulate all inconsistent observations of an epoch into one step.
    pub batch_per_epoch: bool,
    /// Stop as soon as an epoch sees no inconsistent observation.
    pub early_stop: bool,
    pub seed: u64,
    /// Required utility advantage of each observed bundle over every other
    /// bundle, relative to the output scale. Zero trains on demand mismatches only.
    pub margin: f64,
    /// Return the parameters of the epoch with the fewest mismatches.
    pub keep_best: bool,
    /// Domains up to this size are tabulated so demand queries are lookups.
    pub table_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.01,
            l2: 1e-6,
            optimizer: Optimizer::Adam,
            cosine: false,
            shuffle: false,
            batch_per_epoch: false,
            early_stop: true,
            seed: 0,
            margin: 0.0,
            keep_best: true,
            table_cap: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Summed utility gap over inconsistent observations, per epoch.
    pub epoch_loss: Vec<f64>,
    /// Number of inconsistent observations, per epoch.
    pub epoch_mismatches: Vec<usize>,
    /// Inconsistent observations of the returned network.
    pub final_mismatches: usize,
    pub snapshot_id: u64,
}

/// Scale that maps unit network outputs to the price level of the observations.
pub fn output_scale(obs: &[DemandObservation], c: &Capacities) -> f64 {
    let s = obs
        .iter()
        .map(|o| o.price.cost(&c.full()))
        .fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Fresh randomly initialized network scaled to the observations.
pub fn fresh_net(
    c: &Capacities,
    cfg: &NetConfig,
    obs: &[DemandObservation],
    seed: u64,
) -> Result<Mmvnn> {
    Mmvnn::new_random(c.clone(), cfg.clone(), output_scale(obs, c), seed)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..theta.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * g[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * g[k] * g[k];
            theta[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Demand answers of the current network, cached as a table when possible.
enum NetDemand {
    Table(ValueTable),
    Direct,
}

impl NetDemand {
    fn build(net: &Mmvnn, cap: usize) -> Result<Self> {
        if net.capacities().domain_size() <= cap as u128 {
            Ok(NetDemand::Table(net.value_table()?))
        } else {
            Ok(NetDemand::Direct)
        }
    }

    fn demand(&self, net: &Mmvnn, o: &DemandObservation) -> Result<crate::oracles::Demand> {
        match self {
            NetDemand::Table(t) => t.argmax(&o.price),
            NetDemand::Direct => argmax_utility(net, &o.price),
        }
    }

    /// Bundle other than the observed one whose utility plus `margin` is
    /// largest, if that exceeds the observed bundle's utility. Only meaningful
    /// with a table.
    fn violator(&self, o: &DemandObservation, margin: f64) -> Option<Bundle> {
        let NetDemand::Table(t) = self else {
            return None;
        };
        let c = t.capacities();
        let obs_rank = c.rank(&o.bundle);
        let p = o.price.as_slice();
        let u_obs = t.get(obs_rank) - dot_counts(p, &o.bundle.0);
        let mut best: Option<(f64, usize)> = None;
        let mut x = vec![0u32; c.num_items()];
        for (r, &v) in t.values().iter().enumerate() {
            if r != obs_rank {
                let u = v - dot_counts(p, &x);
                if best.is_none_or(|(b, _)| u > b) {
                    best = Some((u, r));
                }
            }
            advance(&mut x, c.counts());
        }
        match best {
            Some((u, r)) if u + margin > u_obs => Some(c.unrank(r)),
            _ => None,
        }
    }
}

/// Number of observations the network does not reproduce.
pub fn count_mismatches(net: &Mmvnn, obs: &[DemandObservation]) -> Result<usize> {
    count_with(&NetDemand::build(net, DEFAULT_TABLE_CAP)?, net, obs)
}

fn count_with(cache: &NetDemand, net: &Mmvnn, obs: &[DemandObservation]) -> Result<usize> {
    let mut n = 0;
    for o in obs {
        if cache.demand(net, o)?.bundle != o.bundle {
            n += 1;
        }
    }
    Ok(n)
}

/// Utility shortfall of the observed bundle under the network:
/// `(M(x^) - <p, x^>) - (M(x) - <p, x>)` for the network's demand `x^`,
/// and 0 when the network demands the observed bundle.
pub fn dq_loss(net: &Mmvnn, obs: &DemandObservation) -> Result<f64> {
    net.capacities().check_bundle(&obs.bundle)?;
    let hat = argmax_utility(net, &obs.price)?;
    if hat.bundle == obs.bundle {
        return Ok(0.0);
    }
    let u_obs = net.predict(&obs.bundle) - obs.price.cost(&obs.bundle);
    Ok((hat.utility - u_obs).max(0.0))
}

/// Trains `net` in place on the observations of a single bidder.
pub fn train_on_dqs(
    net: &mut Mmvnn,
    obs: &[DemandObservation],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if cfg.epochs == 0 {
        return Err(Error::InvalidConfig(
            "training needs at least one epoch".into(),
        ));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate {} must be > 0",
            cfg.learning_rate
        )));
    }
    let c = net.capacities().clone();
    for o in obs {
        c.check_bundle(&o.bundle)?;
        if o.price.len() != c.num_items() {
            return Err(Error::DimensionMismatch {
                expected: c.num_items(),
                found: o.price.len(),
            });
        }
    }
    let weights = net.weight_mask();
    let mut adam = Adam::new(net.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..obs.len()).collect();
    let mut report = TrainReport {
        epoch_loss: Vec::new(),
        epoch_mismatches: Vec::new(),
        final_mismatches: 0,
        snapshot_id: 0,
    };
    let mut cache = NetDemand::build(net, cfg.table_cap)?;
    let margin = cfg.margin * net.scale();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        let lr = if cfg.cosine {
            0.5 * cfg.learning_rate
                * (1.0 + (std::f64::consts::PI * epoch as f64 / cfg.epochs as f64).cos())
        } else {
            cfg.learning_rate
        };
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss = 0.0;
        let mut mismatches = 0;
        let mut violations = 0;
        let mut batch = vec![0.0; net.num_params()];
        for &k in &order {
            let o = &obs[k];
            let hat = cache.demand(net, o)?;
            let mismatch = hat.bundle != o.bundle;
            if mismatch {
                mismatches += 1;
            }
            let target = if margin > 0.0 && matches!(cache, NetDemand::Table(_)) {
                match cache.violator(o, margin) {
                    Some(x) => x,
                    None => continue,
                }
            } else if mismatch {
                hat.bundle
            } else {
                continue;
            };
            violations += 1;
            let (m_hat, g_hat) = net.predict_with_grad(&target);
            let (m_obs, g_obs) = net.predict_with_grad(&o.bundle);
            loss += ((m_hat - o.price.cost(&target)) - (m_obs - o.price.cost(&o.bundle))).max(0.0);
            let mut g: Vec<f64> = g_hat.iter().zip(&g_obs).map(|(a, b)| a - b).collect();
            for (gk, (&th, &is_w)) in g.iter_mut().zip(net.params().iter().zip(&weights)) {
                if is_w {
                    *gk += cfg.l2 * th;
                }
            }
            if cfg.batch_per_epoch {
                for (b, gk) in batch.iter_mut().zip(&g) {
                    *b += gk;
                }
            } else {
                apply(net, &mut adam, &g, lr, cfg.optimizer);
                cache = NetDemand::build(net, cfg.table_cap)?;
            }
        }
        report.epoch_loss.push(loss);
        report.epoch_mismatches.push(mismatches);
        if cfg.batch_per_epoch && violations > 0 {
            apply(net, &mut adam, &batch, lr, cfg.optimizer);
            cache = NetDemand::build(net, cfg.table_cap)?;
        }
        if cfg.keep_best {
            let now = count_with(&cache, net, obs)?;
            if best.as_ref().is_none_or(|(b, _, _)| now < *b) {
                best = Some((now, loss, net.params().to_vec()));
            }
        }
        if cfg.early_stop && violations == 0 {
            break;
        }
    }
    if let Some((_, _, theta)) = best {
        net.set_params(&theta)?;
    }
    report.final_mismatches = count_mismatches(net, obs)?;
    report.snapshot_id = net.snapshot_id();
    Ok(report)
}

/// Trains fresh networks from successive seeds until one reproduces every
/// observation, up to `attempts` tries. Returns the first consistent network,
/// or the one with the fewest mismatches.
pub fn train_with_restarts(
    c: &Capacities,
    net_cfg: &NetConfig,
    obs: &[DemandObservation],
    cfg: &TrainConfig,
    seed: u64,
    attempts: usize,
) -> Result<(Mmvnn, TrainReport)> {
    let mut best: Option<(Mmvnn, TrainReport)> = None;
    for k in 0..attempts.max(1) as u64 {
        let s = crate::value_models::derive_seed(seed, k);
        let mut net = fresh_net(c, net_cfg, obs, s)?;
        let run = TrainConfig {
            seed: crate::value_models::derive_seed(s, 1),
            ..cfg.clone()
        };
        let rep = train_on_dqs(&mut net, obs, &run)?;
        let done = rep.final_mismatches == 0;
        if best
            .as_ref()
            .is_none_or(|(_, b)| rep.final_mismatches < b.final_mismatches)
        {
            best = Some((net, rep));
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt"))
}

fn apply(net: &mut Mmvnn, adam: &mut Adam, g: &[f64], lr: f64, opt: Optimizer) {
    match opt {
        Optimizer::Sgd => {
            for (th, gk) in net.params_mut().iter_mut().zip(g) {
                *th -= lr * gk;
            }
        }
        Optimizer::Adam => adam.step(net.params_mut(), g, lr),
    }
    net.project();
}
