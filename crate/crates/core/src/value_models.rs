//! True valuations of the simulated bidders.
//!
//! Three families are provided, all monotone (more copies never lower the
//! value) and normalized (the empty bundle is worth zero):
//!
//! * [`ValueTable`]: an explicit value for every bundle, indexed by rank.
//! * [`ThresholdValuation`]: bonuses unlocked once a bundle dominates a
//!   threshold bundle, combined by sum or max.
//! * [`SynergyModel`]: per-copy base values over an interest set, scaled by a
//!   percentage synergy for every additional copy of interest, plus optional
//!   threshold bonuses. This is the seeded generator family used for
//!   experiments.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Bundle, Capacities};
use crate::error::{Error, Result};
use crate::oracles::Valuation;

/// Default cap on `|X|` for anything that materializes a full table.
pub const DEFAULT_TABLE_CAP: usize = 1_000_000;

/// Full value table over `X` in mixed-radix rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    capacities: Capacities,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(capacities: Capacities, values: Vec<f64>) -> Result<Self> {
        let size = capacities.enumerable(DEFAULT_TABLE_CAP)?;
        if values.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: values.len(),
            });
        }
        if let Some(r) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite value at rank {r}")));
        }
        Ok(ValueTable { capacities, values })
    }

    /// Table built from a closure over bundles.
    pub fn from_fn(capacities: Capacities, f: impl Fn(&Bundle) -> f64) -> Result<Self> {
        capacities.enumerable(DEFAULT_TABLE_CAP)?;
        let values = capacities.bundles().map(|x| f(&x)).collect();
        ValueTable::new(capacities, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, rank: usize) -> f64 {
        self.values[rank]
    }

    /// Checks (N) and (M): `v(0) = 0`, all values nonnegative, and
    /// `v(x) <= v(x + e_j)` for every bundle and item with room left.
    pub fn validate_monotone_normalized(&self) -> Result<()> {
        if self.values[0] != 0.0 {
            return Err(Error::InvalidModel(format!(
                "value of the empty bundle is {}, expected 0",
                self.values[0]
            )));
        }
        if let Some(r) = self.values.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidModel(format!("negative value at rank {r}")));
        }
        let c = &self.capacities;
        for (r, x) in c.bundles().enumerate() {
            for j in 0..c.num_items() {
                if x.0[j] < c.counts()[j] {
                    let up = r + c.strides()[j];
                    if self.values[up] < self.values[r] {
                        return Err(Error::InvalidModel(format!(
                            "not monotone: v({:?}) = {} > v({:?}) = {}",
                            x.0,
                            self.values[r],
                            c.unrank(up).0,
                            self.values[up]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Valuation for ValueTable {
    fn capacities(&self) -> &Capacities {
        &self.capacities
    }

    fn value(&self, x: &Bundle) -> f64 {
        self.values[self.capacities.rank(x)]
    }
}

/// How threshold bonuses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTerm {
    pub threshold: Bundle,
    pub bonus: f64,
}

/// `v(x) = combine_k bonus_k * 1{x >= t_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValuation {
    capacities: Capacities,
    combine: Combine,
    terms: Vec<ThresholdTerm>,
}

impl ThresholdValuation {
    pub fn new(
        capacities: Capacities,
        combine: Combine,
        terms: Vec<ThresholdTerm>,
    ) -> Result<Self> {
        for t in &terms {
            capacities.check_bundle(&t.threshold)?;
            if !(t.bonus.is_finite() && t.bonus >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "bonus {} must be >= 0",
                    t.bonus
                )));
            }
            if t.threshold.is_null() && t.bonus > 0.0 {
                return Err(Error::InvalidModel(
                    "a positive bonus on the empty threshold breaks normalization".into(),
                ));
            }
        }
        Ok(ThresholdValuation {
            capacities,
            combine,
            terms,
        })
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn terms(&self) -> &[ThresholdTerm] {
        &self.terms
    }
}

impl Valuation for ThresholdValuation {
    fn capacities(&self) -> &Capacities {
        &self.capacities
    }

    fn value(&self, x: &Bundle) -> f64 {
        let hits = self
            .terms
            .iter()
            .filter(|t| t.threshold.dominated_by(x))
            .map(|t| t.bonus);
        match self.combine {
            Combine::Sum => hits.sum(),
            Combine::Max => hits.fold(0.0, f64::max),
        }
    }
}

/// Percentage-synergy valuation over an interest set.
///
/// With `k` held copies of interest items and `s = sum_j base_j * x_j` over
/// those items, the value is `s * (1 + synergy)^(k - 1)` plus every threshold
/// bonus whose threshold is dominated by the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyModel {
    capacities: Capacities,
    interest: Vec<usize>,
    base: Vec<f64>,
    synergy: f64,
    bonuses: Vec<ThresholdTerm>,
}

impl SynergyModel {
    pub fn new(
        capacities: Capacities,
        interest: Vec<usize>,
        base: Vec<f64>,
        synergy: f64,
        bonuses: Vec<ThresholdTerm>,
    ) -> Result<Self> {
        let m = capacities.num_items();
        if base.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: base.len(),
            });
        }
        if let Some(&j) = interest.iter().find(|&&j| j >= m) {
            return Err(Error::InvalidModel(format!(
                "interest item {j} out of range"
            )));
        }
        if base.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidModel(
                "base values must be finite and >= 0".into(),
            ));
        }
        if !(synergy.is_finite() && synergy >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "synergy {synergy} must be >= 0"
            )));
        }
        // Reuse the threshold checks.
        ThresholdValuation::new(capacities.clone(), Combine::Sum, bonuses.clone())?;
        let mut interest = interest;
        interest.sort_unstable();
        interest.dedup();
        Ok(SynergyModel {
            capacities,
            interest,
            base,
            synergy,
            bonuses,
        })
    }

    pub fn interest(&self) -> &[usize] {
        &self.interest
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn synergy(&self) -> f64 {
        self.synergy
    }

    pub fn bonuses(&self) -> &[ThresholdTerm] {
        &self.bonuses
    }
}

impl Valuation for SynergyModel {
    fn capacities(&self) -> &Capacities {
        &self.capacities
    }

    fn value(&self, x: &Bundle) -> f64 {
        let mut held = 0u32;
        let mut sum = 0.0;
        for &j in &self.interest {
            held += x.0[j];
            sum += self.base[j] * x.0[j] as f64;
        }
        let mut v = 0.0;
        if held > 0 {
            // Repeated multiplication keeps the factor monotone in `held` under rounding.
            let mut factor = 1.0;
            for _ in 1..held {
                factor *= 1.0 + self.synergy;
            }
            v = sum * factor;
        }
        for t in &self.bonuses {
            if t.threshold.dominated_by(x) {
                v += t.bonus;
            }
        }
        v
    }
}

/// A bidder's true valuation.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueModel {
    Tabular(ValueTable),
    Threshold(ThresholdValuation),
    Synergy(SynergyModel),
}

impl ValueModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ValueModel::Tabular(_) => "tabular",
            ValueModel::Threshold(_) => "threshold",
            ValueModel::Synergy(_) => "synergy",
        }
    }

    pub fn tabular(table: ValueTable) -> Result<Self> {
        table.validate_monotone_normalized()?;
        Ok(ValueModel::Tabular(table))
    }

    /// Value of `x`, rejecting bundles outside the capacities.
    pub fn value_checked(&self, x: &Bundle) -> Result<f64> {
        self.capacities().check_bundle(x)?;
        Ok(self.value(x))
    }

    /// Materializes the full value table; fails when `|X|` exceeds `cap`.
    pub fn to_table(&self, cap: usize) -> Result<ValueTable> {
        to_table(self, cap)
    }

    pub fn to_spec(&self) -> BidderSpec {
        match self {
            ValueModel::Tabular(t) => BidderSpec::Tabular {
                values: t.values.clone(),
            },
            ValueModel::Threshold(t) => BidderSpec::Threshold {
                combine: t.combine,
                terms: t.terms.clone(),
            },
            ValueModel::Synergy(s) => BidderSpec::Synergy {
                interest: s.interest.clone(),
                base: s.base.clone(),
                synergy: s.synergy,
                bonuses: s.bonuses.clone(),
            },
        }
    }

    pub fn from_spec(capacities: &Capacities, spec: BidderSpec) -> Result<Self> {
        match spec {
            BidderSpec::Tabular { values } => {
                ValueModel::tabular(ValueTable::new(capacities.clone(), values)?)
            }
            BidderSpec::Threshold { combine, terms } => Ok(ValueModel::Threshold(
                ThresholdValuation::new(capacities.clone(), combine, terms)?,
            )),
            BidderSpec::Synergy {
                interest,
                base,
                synergy,
                bonuses,
            } => Ok(ValueModel::Synergy(SynergyModel::new(
                capacities.clone(),
                interest,
                base,
                synergy,
                bonuses,
            )?)),
        }
    }
}

impl Valuation for ValueModel {
    fn capacities(&self) -> &Capacities {
        match self {
            ValueModel::Tabular(t) => t.capacities(),
            ValueModel::Threshold(t) => t.capacities(),
            ValueModel::Synergy(s) => s.capacities(),
        }
    }

    fn value(&self, x: &Bundle) -> f64 {
        match self {
            ValueModel::Tabular(t) => t.value(x),
            ValueModel::Threshold(t) => t.value(x),
            ValueModel::Synergy(s) => s.value(x),
        }
    }
}

/// Any valuation as a full table, `table[rank(x)] = v(x)`.
pub fn to_table<V: Valuation + ?Sized>(model: &V, cap: usize) -> Result<ValueTable> {
    let c = model.capacities().clone();
    c.enumerable(cap)?;
    let values = c.bundles().map(|x| model.value(&x)).collect();
    ValueTable::new(c, values)
}

/// Serialized form of one bidder (capacities live in the enclosing file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BidderSpec {
    Tabular {
        values: Vec<f64>,
    },
    Threshold {
        combine: Combine,
        terms: Vec<ThresholdTerm>,
    },
    Synergy {
        interest: Vec<usize>,
        base: Vec<f64>,
        synergy: f64,
        #[serde(default)]
        bonuses: Vec<ThresholdTerm>,
    },
}

/// Parameters of the seeded synergy generator for a single bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergySpec {
    /// Inclusive range for the number of items of interest.
    pub interest_size: (usize, usize),
    /// Per-copy base values are drawn uniformly from this range.
    pub base_range: (f64, f64),
    /// Percentage synergy per additional copy of interest (0.2 = 20%).
    pub synergy: f64,
    /// Number of threshold bonuses to draw.
    #[serde(default)]
    pub bonus_count: usize,
    #[serde(default)]
    pub bonus_range: (f64, f64),
}

impl SynergySpec {
    fn validate(&self, m: usize) -> Result<()> {
        let (lo, hi) = self.interest_size;
        if lo == 0 || lo > hi || hi > m {
            return Err(Error::InvalidConfig(format!(
                "interest size range ({lo}, {hi}) invalid for {m} items"
            )));
        }
        let (blo, bhi) = self.base_range;
        if !(blo >= 0.0 && blo <= bhi && bhi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "base range ({blo}, {bhi}) invalid"
            )));
        }
        if !(self.synergy.is_finite() && self.synergy >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "synergy {} must be >= 0",
                self.synergy
            )));
        }
        if self.bonus_count > 0 {
            let (wlo, whi) = self.bonus_range;
            if !(wlo >= 0.0 && wlo <= whi && whi.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "bonus range ({wlo}, {whi}) invalid"
                )));
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws one synergy valuation. Identical `(seed, spec)` give identical models.
pub fn generate_synergy_model(
    seed: u64,
    capacities: &Capacities,
    spec: &SynergySpec,
) -> Result<ValueModel> {
    let m = capacities.num_items();
    spec.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.interest_size;
    let size = rng.gen_range(lo..=hi);
    let mut interest = index::sample(&mut rng, m, size).into_vec();
    interest.sort_unstable();
    let mut base = vec![0.0; m];
    for &j in &interest {
        base[j] = uniform(&mut rng, spec.base_range);
    }
    let mut bonuses = Vec::with_capacity(spec.bonus_count);
    for _ in 0..spec.bonus_count {
        let mut t = vec![0u32; m];
        while t.iter().all(|&v| v == 0) {
            for &j in &interest {
                t[j] = rng.gen_range(0..=capacities.counts()[j]);
            }
        }
        bonuses.push(ThresholdTerm {
            threshold: Bundle(t),
            bonus: uniform(&mut rng, spec.bonus_range),
        });
    }
    Ok(ValueModel::Synergy(SynergyModel::new(
        capacities.clone(),
        interest,
        base,
        spec.synergy,
        bonuses,
    )?))
}

/// A group of identically parametrized bidders, e.g. "regional" or "national".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderGroup {
    pub label: String,
    pub count: usize,
    #[serde(flatten)]
    pub spec: SynergySpec,
}

/// Recipe for a whole synthetic auction instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub capacities: Capacities,
    pub groups: Vec<BidderGroup>,
}

impl DomainSpec {
    pub fn num_bidders(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// The small multi-unit synergy domain used by the experiment harness:
    /// 4 items with capacities (3, 2, 3, 2), three regional bidders with
    /// narrow interests and one national bidder interested in everything.
    pub fn small_synergy() -> Self {
        DomainSpec {
            capacities: Capacities::new(vec![3, 2, 3, 2]).expect("valid capacities"),
            groups: vec![
                BidderGroup {
                    label: "regional".into(),
                    count: 3,
                    spec: SynergySpec {
                        interest_size: (2, 3),
                        base_range: (1.0, 3.0),
                        synergy: 0.2,
                        bonus_count: 0,
                        bonus_range: (0.0, 0.0),
                    },
                },
                BidderGroup {
                    label: "national".into(),
                    count: 1,
                    spec: SynergySpec {
                        interest_size: (4, 4),
                        base_range: (0.5, 2.0),
                        synergy: 0.1,
                        bonus_count: 1,
                        bonus_range: (1.0, 3.0),
                    },
                },
            ],
        }
    }
}

/// Seeded auction instance: capacities plus one true valuation per bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub capacities: Capacities,
    pub bidders: Vec<ValueModel>,
    pub labels: Vec<String>,
}

impl Domain {
    pub fn num_bidders(&self) -> usize {
        self.bidders.len()
    }

    pub fn valuations(&self) -> Vec<&ValueModel> {
        self.bidders.iter().collect()
    }

    pub fn to_file(&self) -> DomainFile {
        DomainFile {
            schema_version: DOMAIN_SCHEMA_VERSION,
            capacities: self.capacities.clone(),
            bidders: self.bidders.iter().map(ValueModel::to_spec).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_file(file: DomainFile) -> Result<Self> {
        if file.schema_version != DOMAIN_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "value-model file".into(),
                expected: DOMAIN_SCHEMA_VERSION,
                found: file.schema_version,
            });
        }
        let bidders = file
            .bidders
            .into_iter()
            .map(|b| ValueModel::from_spec(&file.capacities, b))
            .collect::<Result<Vec<_>>>()?;
        let labels = if file.labels.is_empty() {
            vec!["bidder".to_string(); bidders.len()]
        } else if file.labels.len() == bidders.len() {
            file.labels
        } else {
            return Err(Error::DimensionMismatch {
                expected: bidders.len(),
                found: file.labels.len(),
            });
        };
        Ok(Domain {
            capacities: file.capacities,
            bidders,
            labels,
        })
    }
}

pub const DOMAIN_SCHEMA_VERSION: u32 = 1;

/// JSON value-model file: `{schema_version, capacities, bidders: [{kind, ...}], labels}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub schema_version: u32,
    pub capacities: Capacities,
    pub bidders: Vec<BidderSpec>,
    #[serde(default)]
    pub labels: Vec<String>,
}

/// SplitMix64 step, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_domain(seed: u64, spec: &DomainSpec) -> Result<Domain> {
    let mut bidders = Vec::new();
    let mut labels = Vec::new();
    for group in &spec.groups {
        for _ in 0..group.count {
            let idx = bidders.len() as u64;
            bidders.push(generate_synergy_model(
                derive_seed(seed, idx),
                &spec.capacities,
                &group.spec,
            )?);
            labels.push(group.label.clone());
        }
    }
    if bidders.is_empty() {
        return Err(Error::InvalidConfig("domain has no bidders".into()));
    }
    Ok(Domain {
        capacities: spec.capacities.clone(),
        bidders,
        labels,
    })
}
