//! Multiset monotone value neural networks.
//!
//! The input bundle is scaled to `[0, 1]^m` by the inverse capacities. Every
//! hidden layer applies nonnegative weights, a nonpositive bias and the
//! bounded ReLU `min(t, max(0, z))`. The output layer is a nonnegative linear
//! map without bias; an optional nonnegative linear skip from the scaled input
//! adds a directly linear component. These sign constraints make the network
//! monotone, and a zero input always maps to zero.
//!
//! All trainable parameters live in one flat vector so that gradients,
//! optimizers and snapshots can treat them uniformly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Bundle, Capacities};
use crate::error::{Error, Result};
use crate::oracles::Valuation;
use crate::value_models::{ValueTable, DEFAULT_TABLE_CAP};

pub const NET_SCHEMA_VERSION: u32 = 1;

/// Architecture and non-trainable settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    /// Cutoff `t` of the bounded ReLU.
    pub cutoff: f64,
    /// Adds the nonnegative linear skip from the scaled input to the output.
    pub skip: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: vec![16, 16],
            cutoff: 1.0,
            skip: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerShape {
    inp: usize,
    out: usize,
    /// Offset of the row-major weight block; biases follow it.
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mmvnn {
    capacities: Capacities,
    config: NetConfig,
    layers: Vec<LayerShape>,
    out_w: usize,
    skip_w: Option<usize>,
    theta: Vec<f64>,
    /// Fixed multiplier on the output, so that weights stay O(1) whatever the value scale.
    scale: f64,
}

/// Activations and pre-activations of one forward pass.
struct Trace {
    /// `acts[0]` is the scaled input, `acts[l + 1]` the output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mmvnn {
    fn with_shape(capacities: Capacities, config: NetConfig, scale: f64) -> Result<Self> {
        if config.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layers must be nonempty".into(),
            ));
        }
        if !(config.cutoff.is_finite() && config.cutoff > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cutoff {} must be > 0",
                config.cutoff
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "output scale {scale} must be > 0"
            )));
        }
        let m = capacities.num_items();
        let mut layers = Vec::with_capacity(config.hidden.len());
        let mut offset = 0;
        let mut inp = m;
        for &out in &config.hidden {
            layers.push(LayerShape {
                inp,
                out,
                w: offset,
                b: offset + inp * out,
            });
            offset += inp * out + out;
            inp = out;
        }
        let out_w = offset;
        offset += inp;
        let skip_w = if config.skip {
            let s = offset;
            offset += m;
            Some(s)
        } else {
            None
        };
        Ok(Mmvnn {
            capacities,
            config,
            layers,
            out_w,
            skip_w,
            theta: vec![0.0; offset],
            scale,
        })
    }

    /// Random initialization: weights uniform in `[0, 2 / fan_in)`, biases
    /// uniform in `(-0.1 t, 0]`.
    pub fn new_random(
        capacities: Capacities,
        config: NetConfig,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Mmvnn::with_shape(capacities, config, scale)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = net.config.cutoff;
        for l in net.layers.clone() {
            let hi = 2.0 / l.inp as f64;
            for k in 0..l.inp * l.out {
                net.theta[l.w + k] = rng.gen_range(0.0..hi);
            }
            for k in 0..l.out {
                net.theta[l.b + k] = -rng.gen_range(0.0..0.1 * t);
            }
        }
        let last = net
            .layers
            .last()
            .map_or(net.capacities.num_items(), |l| l.out);
        for k in 0..last {
            net.theta[net.out_w + k] = rng.gen_range(0.0..2.0 / last as f64);
        }
        if let Some(s) = net.skip_w {
            let m = net.capacities.num_items();
            for k in 0..m {
                net.theta[s + k] = rng.gen_range(0.0..1.0 / m as f64);
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Replaces the parameters and projects them onto the feasible set.
    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                found: theta.len(),
            });
        }
        self.theta.copy_from_slice(theta);
        self.project();
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Mask of parameters that are weights (as opposed to biases).
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.theta.len()];
        for l in &self.layers {
            for k in 0..l.out {
                mask[l.b + k] = false;
            }
        }
        mask
    }

    /// Clamps weights to `>= 0` and biases to `<= 0`.
    pub fn project(&mut self) {
        let mask = self.weight_mask();
        for (v, is_w) in self.theta.iter_mut().zip(mask) {
            if is_w {
                if *v < 0.0 {
                    *v = 0.0;
                }
            } else if *v > 0.0 {
                *v = 0.0;
            }
        }
    }

    fn scaled_input(&self, x: &[u32]) -> Vec<f64> {
        x.iter()
            .zip(self.capacities.counts())
            .map(|(&xj, &cj)| xj as f64 / cj as f64)
            .collect()
    }

    fn trace(&self, x: &[u32]) -> Trace {
        let t = self.config.cutoff;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(self.scaled_input(x));
        for l in &self.layers {
            let u = acts.last().expect("input is present");
            let mut z = self.theta[l.b..l.b + l.out].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &self.theta[l.w + r * l.inp..l.w + (r + 1) * l.inp];
                let mut acc = 0.0;
                for (w, a) in row.iter().zip(u) {
                    acc += w * a;
                }
                *zr += acc;
            }
            let a = z.iter().map(|&zr| zr.max(0.0).min(t)).collect();
            pre.push(z);
            acts.push(a);
        }
        Trace { acts, pre }
    }

    fn output(&self, tr: &Trace) -> f64 {
        let last = tr.acts.last().expect("input is present");
        let mut out = 0.0;
        for (w, a) in self.theta[self.out_w..self.out_w + last.len()]
            .iter()
            .zip(last)
        {
            out += w * a;
        }
        if let Some(s) = self.skip_w {
            for (w, a) in self.theta[s..s + tr.acts[0].len()].iter().zip(&tr.acts[0]) {
                out += w * a;
            }
        }
        self.scale * out
    }

    /// Network output for a bundle.
    pub fn predict(&self, x: &Bundle) -> f64 {
        self.output(&self.trace(&x.0))
    }

    /// Output and its gradient with respect to the flat parameter vector.
    ///
    /// At the kinks of the bounded ReLU the derivative is taken as 1 on the
    /// closed interval `[0, t]` and 0 outside.
    pub fn predict_with_grad(&self, x: &Bundle) -> (f64, Vec<f64>) {
        let tr = self.trace(&x.0);
        let out = self.output(&tr);
        let mut g = vec![0.0; self.theta.len()];
        let t = self.config.cutoff;
        let depth = self.layers.len();
        let last = &tr.acts[depth];
        for (k, a) in last.iter().enumerate() {
            g[self.out_w + k] = self.scale * a;
        }
        if let Some(s) = self.skip_w {
            for (k, a) in tr.acts[0].iter().enumerate() {
                g[s + k] = self.scale * a;
            }
        }
        // delta = d out / d pre-activation of the current layer.
        let mut delta: Vec<f64> = (0..last.len())
            .map(|k| self.scale * self.theta[self.out_w + k])
            .collect();
        for li in (0..depth).rev() {
            let l = self.layers[li];
            for (k, d) in delta.iter_mut().enumerate() {
                let z = tr.pre[li][k];
                if !(0.0..=t).contains(&z) {
                    *d = 0.0;
                }
            }
            let u = &tr.acts[li];
            for r in 0..l.out {
                if delta[r] == 0.0 {
                    continue;
                }
                g[l.b + r] = delta[r];
                for c in 0..l.inp {
                    g[l.w + r * l.inp + c] = delta[r] * u[c];
                }
            }
            if li > 0 {
                let mut next = vec![0.0; l.inp];
                for r in 0..l.out {
                    if delta[r] == 0.0 {
                        continue;
                    }
                    for (c, nc) in next.iter_mut().enumerate() {
                        *nc += self.theta[l.w + r * l.inp + c] * delta[r];
                    }
                }
                delta = next;
            }
        }
        (out, g)
    }

    /// Predicted values for all of `X` in rank order.
    pub fn value_table(&self) -> Result<ValueTable> {
        let c = self.capacities.clone();
        c.enumerable(DEFAULT_TABLE_CAP)?;
        let values = c.bundles().map(|x| self.predict(&x)).collect();
        ValueTable::new(c, values)
    }

    /// Deterministic 64-bit fingerprint of architecture and parameters (FNV-1a).
    pub fn snapshot_id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for &c in self.capacities.counts() {
            eat(&c.to_le_bytes());
        }
        for &hdim in &self.config.hidden {
            eat(&(hdim as u64).to_le_bytes());
        }
        eat(&self.config.cutoff.to_bits().to_le_bytes());
        eat(&[self.config.skip as u8]);
        eat(&self.scale.to_bits().to_le_bytes());
        for v in &self.theta {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }

    pub fn to_file(&self) -> NetFile {
        NetFile {
            schema_version: NET_SCHEMA_VERSION,
            capacities: self.capacities.clone(),
            config: self.config.clone(),
            scale: self.scale,
            params: self.theta.clone(),
        }
    }

    pub fn from_file(f: NetFile) -> Result<Self> {
        if f.schema_version != NET_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "network file".into(),
                expected: NET_SCHEMA_VERSION,
                found: f.schema_version,
            });
        }
        let mut net = Mmvnn::with_shape(f.capacities, f.config, f.scale)?;
        net.set_params(&f.params)?;
        Ok(net)
    }
}

impl Valuation for Mmvnn {
    fn capacities(&self) -> &Capacities {
        &self.capacities
    }

    fn value(&self, x: &Bundle) -> f64 {
        self.predict(x)
    }
}

/// Serialized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub schema_version: u32,
    pub capacities: Capacities,
    pub config: NetConfig,
    pub scale: f64,
    pub params: Vec<f64>,
}

/// Builds a network that reproduces a monotone, normalized value table exactly.
///
/// Bundles are sorted by value (ties by rank, the full bundle last) into
/// `x_1 = 0, ..., x_N = c` with values `w_1 <= ... <= w_N`, and the network
/// computes `sum_l (w_{l+1} - w_l) * 1{for all j <= l: xi not <= x_j}` with
/// three hidden layers of widths `m (N - 1)`, `N - 1`, `N - 1` and cutoff 1:
/// the first compares every coordinate against every `x_j`, the second tests
/// `xi not <= x_j` and the third takes the running conjunction.
pub fn construct_exact(table: &ValueTable) -> Result<Mmvnn> {
    table.validate_monotone_normalized()?;
    let c = table.capacities().clone();
    let m = c.num_items();
    let n_x = table.values().len();
    let full_rank = n_x - 1;
    let mut order: Vec<usize> = (0..n_x).collect();
    order.sort_by(|&a, &b| {
        let va = table.get(a);
        let vb = table.get(b);
        va.total_cmp(&vb)
            .then((a == full_rank).cmp(&(b == full_rank)))
            .then(a.cmp(&b))
    });
    debug_assert_eq!(order[0], 0);
    debug_assert_eq!(order[n_x - 1], full_rank);

    if n_x == 1 {
        // Degenerate only if every capacity were zero, which Capacities rejects.
        unreachable!("capacities are positive");
    }
    let k = n_x - 1;
    let config = NetConfig {
        hidden: vec![m * k, k, k],
        cutoff: 1.0,
        skip: false,
    };
    let mut net = Mmvnn::with_shape(c.clone(), config, 1.0)?;
    let points: Vec<Bundle> = order[..k].iter().map(|&r| c.unrank(r)).collect();
    let (l1, l2, l3) = (net.layers[0], net.layers[1], net.layers[2]);
    let th = &mut net.theta;
    // Layer 1: unit (j, i) = xi_i - x_{j,i}.
    for (j, x) in points.iter().enumerate() {
        for i in 0..m {
            let unit = j * m + i;
            th[l1.w + unit * l1.inp + i] = c.counts()[i] as f64;
            th[l1.b + unit] = -(x.0[i] as f64);
        }
    }
    // Layer 2: unit j sums its block of m comparisons.
    for j in 0..k {
        for i in 0..m {
            th[l2.w + j * l2.inp + j * m + i] = 1.0;
        }
    }
    // Layer 3: unit l is 1 iff units 1..=l of layer 2 are all 1.
    for l in 0..k {
        for j in 0..=l {
            th[l3.w + l * l3.inp + j] = 1.0;
        }
        th[l3.b + l] = -(l as f64);
    }
    for l in 0..k {
        th[net.out_w + l] = table.get(order[l + 1]) - table.get(order[l]);
    }
    Ok(net)
}
