//! Value types shared by every part of the engine: capacities, bundles,
//! linear prices, allocations and demand observations.
//!
//! Bundles are dense integer vectors. The bundle space `X = {0..c_1} x ... x {0..c_m}`
//! is indexed by a fixed mixed-radix rank, `rank(x) = sum_j x_j * prod_{k>j} (c_k + 1)`,
//! so item 0 is the most significant digit. Tables, oracles, tie-breaks and
//! serialized artifacts all share this rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::Valuation;

/// Absolute tolerance for comparisons of monetary quantities.
pub const MONEY_TOL: f64 = 1e-9;

/// Number of available copies of every item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Capacities {
    counts: Vec<u32>,
    strides: Vec<usize>,
}

impl TryFrom<Vec<u32>> for Capacities {
    type Error = Error;

    fn try_from(counts: Vec<u32>) -> Result<Self> {
        Capacities::new(counts)
    }
}

impl From<Capacities> for Vec<u32> {
    fn from(c: Capacities) -> Self {
        c.counts
    }
}

impl Capacities {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidCapacities(
                "at least one item is required".into(),
            ));
        }
        if let Some(j) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidCapacities(format!(
                "item {j} has zero copies"
            )));
        }
        let mut strides = vec![1usize; counts.len()];
        for j in (0..counts.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1].saturating_mul(counts[j + 1] as usize + 1);
        }
        Ok(Capacities { counts, strides })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of distinct items `m`.
    pub fn num_items(&self) -> usize {
        self.counts.len()
    }

    /// `|X| = prod_j (c_j + 1)`.
    pub fn domain_size(&self) -> u128 {
        self.counts
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(c as u128 + 1))
    }

    /// Domain size as `usize`, or a resource error when it exceeds `cap`.
    pub fn enumerable(&self, cap: usize) -> Result<usize> {
        let size = self.domain_size();
        if size > cap as u128 {
            return Err(Error::DomainTooLarge {
                size,
                cap: cap as u128,
            });
        }
        Ok(size as usize)
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn rank(&self, x: &Bundle) -> usize {
        debug_assert_eq!(x.len(), self.num_items());
        x.0.iter()
            .zip(&self.strides)
            .map(|(&xj, &s)| xj as usize * s)
            .sum()
    }

    pub fn unrank(&self, mut rank: usize) -> Bundle {
        let mut counts = vec![0u32; self.num_items()];
        for (j, &s) in self.strides.iter().enumerate() {
            counts[j] = (rank / s) as u32;
            rank %= s;
        }
        Bundle(counts)
    }

    pub fn contains(&self, x: &Bundle) -> bool {
        x.len() == self.num_items() && x.0.iter().zip(&self.counts).all(|(a, c)| a <= c)
    }

    pub fn check_bundle(&self, x: &Bundle) -> Result<()> {
        if x.len() != self.num_items() {
            return Err(Error::DimensionMismatch {
                expected: self.num_items(),
                found: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutOfCapacity {
                bundle: x.0.clone(),
                capacities: self.counts.clone(),
            });
        }
        Ok(())
    }

    /// The bundle containing every copy of every item.
    pub fn full(&self) -> Bundle {
        Bundle(self.counts.clone())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// All bundles of `X` in increasing rank order.
    pub fn bundles(&self) -> BundleIter<'_> {
        BundleIter {
            caps: &self.counts,
            next: Some(vec![0; self.num_items()]),
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.counts
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// Odometer over `X`, last item fastest.
#[derive(Debug, Clone)]
pub struct BundleIter<'a> {
    caps: &'a [u32],
    next: Option<Vec<u32>>,
}

impl Iterator for BundleIter<'_> {
    type Item = Bundle;

    fn next(&mut self) -> Option<Bundle> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut j = succ.len();
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            if succ[j] < self.caps[j] {
                succ[j] += 1;
                self.next = Some(succ);
                break;
            }
            succ[j] = 0;
        }
        Some(Bundle(current))
    }
}

/// A multiset of items: `x_j` copies of item `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(pub Vec<u32>);

impl Bundle {
    pub fn empty(m: usize) -> Self {
        Bundle(vec![0; m])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the bundle contains no copies at all.
    pub fn is_null(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn total_copies(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Bundle) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl From<Vec<u32>> for Bundle {
    fn from(v: Vec<u32>) -> Self {
        Bundle(v)
    }
}

/// Linear item prices, one nonnegative price per copy of each item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceVector(Vec<f64>);

impl TryFrom<Vec<f64>> for PriceVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PriceVector::new(v)
    }
}

impl From<PriceVector> for Vec<f64> {
    fn from(p: PriceVector) -> Self {
        p.0
    }
}

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if let Some(j) = prices.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "price of item {j} must be finite and nonnegative, got {}",
                prices[j]
            )));
        }
        Ok(PriceVector(prices))
    }

    /// Builds a price vector, clamping negative entries to zero.
    pub(crate) fn clamped(prices: Vec<f64>) -> Self {
        PriceVector(prices.into_iter().map(|p| p.max(0.0)).collect())
    }

    pub fn zeros(m: usize) -> Self {
        PriceVector(vec![0.0; m])
    }

    pub fn uniform(m: usize, price: f64) -> Result<Self> {
        PriceVector::new(vec![price; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `<p, x>` accumulated item by item in index order.
    ///
    /// Every oracle prices bundles through this function so that the pruned and
    /// naive searches see bit-identical utilities.
    #[inline]
    pub fn cost(&self, x: &Bundle) -> f64 {
        debug_assert_eq!(self.0.len(), x.len());
        dot_counts(&self.0, &x.0)
    }
}

/// One bundle per bidder. Feasibility is checked, not enforced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(pub Vec<Bundle>);

impl Allocation {
    pub fn empty(n: usize, m: usize) -> Self {
        Allocation(vec![Bundle::empty(m); n])
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.0
    }

    pub fn num_bidders(&self) -> usize {
        self.0.len()
    }

    /// Total copies demanded per item.
    pub fn total_demand(&self, m: usize) -> Vec<u64> {
        let mut d = vec![0u64; m];
        for x in &self.0 {
            for (dj, &xj) in d.iter_mut().zip(&x.0) {
                *dj += xj as u64;
            }
        }
        d
    }
}

/// A bidder's answer to one demand query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandObservation {
    pub bundle: Bundle,
    pub price: PriceVector,
    pub round: usize,
}

impl DemandObservation {
    pub fn new(bundle: Bundle, price: PriceVector, round: usize) -> Result<Self> {
        if bundle.len() != price.len() {
            return Err(Error::DimensionMismatch {
                expected: price.len(),
                found: bundle.len(),
            });
        }
        Ok(DemandObservation {
            bundle,
            price,
            round,
        })
    }

    /// The lower bound `<p, x>` on the bidder's value for the reported bundle.
    pub fn inferred_value(&self) -> f64 {
        self.price.cost(&self.bundle)
    }
}

/// `sum_j p_j * x_j`, accumulated left to right starting from `0.0`.
#[inline]
pub fn dot_counts(p: &[f64], x: &[u32]) -> f64 {
    let mut acc = 0.0;
    for (pj, &xj) in p.iter().zip(x) {
        acc += pj * xj as f64;
    }
    acc
}

pub fn is_feasible(a: &Allocation, c: &Capacities) -> Result<bool> {
    let m = c.num_items();
    for x in a.bundles() {
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: x.len(),
            });
        }
    }
    Ok(a.total_demand(m)
        .iter()
        .zip(c.counts())
        .all(|(&d, &cj)| d <= cj as u64))
}

pub fn inner_product(p: &PriceVector, x: &Bundle) -> Result<f64> {
    if p.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: x.len(),
        });
    }
    Ok(p.cost(x))
}

pub fn quasilinear_utility(value: f64, p: &PriceVector, x: &Bundle) -> f64 {
    value - p.cost(x)
}

/// `V(a) = sum_i v_i(a_i)`.
pub fn social_welfare<V: Valuation + ?Sized>(a: &Allocation, models: &[&V]) -> Result<f64> {
    if a.num_bidders() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            found: a.num_bidders(),
        });
    }
    let mut total = 0.0;
    for (x, v) in a.bundles().iter().zip(models) {
        v.capacities().check_bundle(x)?;
        total += v.value(x);
    }
    Ok(total)
}
