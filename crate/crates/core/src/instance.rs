//! Problem instances: item types with a deterministic cost and a finitely
//! supported integer weight distribution, plus a knapsack capacity `W`.
//!
//! Distributions are validated on construction and clamped to the capacity
//! once they are attached to an [`Instance`]: any realized weight `>= W`
//! finishes the knapsack, so all such outcomes are merged into `W`.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SumkError};

/// Absolute tolerance on the total probability mass of a distribution.
pub const PROB_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Weight distributions
// ---------------------------------------------------------------------------

/// Discrete distribution over non-negative integer weights.
///
/// The support is kept sorted with distinct values. Prefix and suffix sums
/// are cached so CDF and tail queries are a single binary search.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightDistribution {
    support: Vec<(u64, f64)>,
    cdf: Vec<f64>,
    tail: Vec<f64>,
}

impl WeightDistribution {
    /// Validates `points` and builds the distribution.
    ///
    /// Every probability must lie in `(0, 1]`, values must be distinct and
    /// the total mass must be within [`PROB_TOLERANCE`] of one; in that case
    /// the masses are renormalized to sum to one.
    pub fn new(mut points: Vec<(u64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(SumkError::InvalidInstance("empty weight distribution".into()));
        }
        for &(value, prob) in &points {
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(SumkError::InvalidInstance(format!(
                    "probability {prob} of weight {value} outside (0, 1]"
                )));
            }
        }
        points.sort_by_key(|&(value, _)| value);
        if let Some(pair) = points.windows(2).find(|pair| pair[0].0 == pair[1].0) {
            return Err(SumkError::InvalidInstance(format!(
                "duplicate support value {}",
                pair[0].0
            )));
        }
        let total: f64 = points.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(SumkError::InvalidInstance(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        if total != 1.0 {
            for point in &mut points {
                point.1 /= total;
            }
        }
        Ok(Self::from_sorted(points))
    }

    /// Point mass at `value`.
    pub fn point(value: u64) -> Self {
        Self::from_sorted(vec![(value, 1.0)])
    }

    fn from_sorted(support: Vec<(u64, f64)>) -> Self {
        let mut cdf = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for &(_, p) in &support {
            acc += p;
            cdf.push(acc);
        }
        let mut tail = vec![0.0; support.len()];
        let mut acc = 0.0;
        for (k, &(_, p)) in support.iter().enumerate().rev() {
            acc += p;
            tail[k] = acc;
        }
        Self { support, cdf, tail }
    }

    /// Merges every value `>= cap` into `cap`.
    pub fn clamped(&self, cap: u64) -> Self {
        if self.max_value() <= cap {
            return self.clone();
        }
        let mut support: Vec<(u64, f64)> = Vec::with_capacity(self.support.len());
        let mut over = 0.0;
        for &(value, prob) in &self.support {
            if value >= cap {
                over += prob;
            } else {
                support.push((value, prob));
            }
        }
        support.push((cap, over));
        Self::from_sorted(support)
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    pub fn min_value(&self) -> u64 {
        self.support[0].0
    }

    pub fn max_value(&self) -> u64 {
        self.support[self.support.len() - 1].0
    }

    /// `Pr{X = 0}`.
    pub fn mass_at_zero(&self) -> f64 {
        match self.support[0] {
            (0, p) => p,
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    /// `Pr{X <= j}`; defined for every integer `j`.
    pub fn cdf(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        let below = self.support.partition_point(|&(v, _)| v <= j as u64);
        if below == 0 {
            0.0
        } else if below == self.support.len() {
            1.0
        } else {
            self.cdf[below - 1]
        }
    }

    /// `Pr{X >= w}`, summed from the top so small tails stay accurate.
    pub fn tail(&self, w: i64) -> f64 {
        if w <= 0 {
            return 1.0;
        }
        let first = self.support.partition_point(|&(v, _)| v < w as u64);
        if first == 0 {
            1.0
        } else if first == self.support.len() {
            0.0
        } else {
            self.tail[first]
        }
    }

    /// Inverse-CDF draw for `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> u64 {
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.support[idx.min(self.support.len() - 1)].0
    }
}

// ---------------------------------------------------------------------------
// Item types and instances
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ItemType {
    pub cost: f64,
    pub dist: WeightDistribution,
}

impl ItemType {
    pub fn new(cost: f64, dist: WeightDistribution) -> Result<Self> {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(SumkError::InvalidInstance(format!(
                "cost must be a finite non-negative number, got {cost}"
            )));
        }
        Ok(Self { cost, dist })
    }

    /// `D_i(j) = Pr{X_i <= j}`.
    pub fn cdf(&self, j: i64) -> f64 {
        self.dist.cdf(j)
    }
}

/// A validated instance. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    capacity: u64,
    types: Vec<ItemType>,
}

impl Instance {
    /// Builds an instance, clamping every support value above `capacity`.
    pub fn new(capacity: u64, types: Vec<ItemType>) -> Result<Self> {
        if capacity < 1 {
            return Err(SumkError::InvalidInstance("capacity must be at least 1".into()));
        }
        if types.is_empty() {
            return Err(SumkError::InvalidInstance("instance has no item types".into()));
        }
        let types = types
            .into_iter()
            .map(|t| ItemType {
                cost: t.cost,
                dist: t.dist.clamped(capacity),
            })
            .collect();
        Ok(Self { capacity, types })
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn types(&self) -> &[ItemType] {
        &self.types
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// True when no type has mass at weight 0.
    pub fn has_positive_support(&self) -> bool {
        self.types.iter().all(|t| t.dist.min_value() >= 1)
    }

    pub(crate) fn check_positive_support(&self) -> Result<()> {
        match self.types.iter().position(|t| t.dist.min_value() == 0) {
            Some(type_index) => Err(SumkError::NotNormalized { type_index }),
            None => Ok(()),
        }
    }

    /// True when some free type always adds positive weight, making the
    /// optimal expected cost zero. Only meaningful on normalized instances.
    pub fn has_free_type(&self) -> bool {
        self.types.iter().any(|t| t.cost == 0.0)
    }

    /// Replaces every type with mass at weight 0 by the equivalent type that
    /// keeps inserting until a positive weight is realized:
    /// `c' = c / (1 - d(0))`, `d'(t) = d(t) / (1 - d(0))`.
    ///
    /// Types whose whole mass sits at 0 can never help and are dropped.
    pub fn normalize_positive_support(&self) -> Result<Instance> {
        let mut types = Vec::with_capacity(self.types.len());
        for (index, t) in self.types.iter().enumerate() {
            if t.dist.min_value() >= 1 {
                types.push(t.clone());
                continue;
            }
            let positive: Vec<(u64, f64)> = t.dist.support()[1..].to_vec();
            if positive.is_empty() {
                log::warn!("dropping type {index}: all weight mass at 0");
                continue;
            }
            let keep: f64 = positive.iter().map(|&(_, p)| p).sum();
            let support = positive.into_iter().map(|(v, p)| (v, p / keep)).collect();
            types.push(ItemType {
                cost: t.cost / keep,
                dist: WeightDistribution::from_sorted(support),
            });
        }
        if types.is_empty() {
            return Err(SumkError::Infeasible);
        }
        Ok(Instance {
            capacity: self.capacity,
            types,
        })
    }

    /// Original indices of the types kept by
    /// [`normalize_positive_support`](Self::normalize_positive_support).
    pub fn surviving_types(&self) -> Vec<usize> {
        (0..self.types.len())
            .filter(|&i| self.types[i].dist.max_value() >= 1)
            .collect()
    }

    /// Returns a copy with every cost multiplied by `factor`.
    pub fn scale_costs(&self, factor: f64) -> Instance {
        Instance {
            capacity: self.capacity,
            types: self
                .types
                .iter()
                .map(|t| ItemType {
                    cost: t.cost * factor,
                    dist: t.dist.clone(),
                })
                .collect(),
        }
    }

    /// Canonical JSON: dists sorted by value ascending.
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            capacity: self.capacity,
            types: self
                .types
                .iter()
                .map(|t| TypeFile {
                    cost: t.cost,
                    dist: t.dist.support().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serialization cannot fail")
    }
}

// ---------------------------------------------------------------------------
// Instance file format
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct InstanceFile {
    capacity: u64,
    types: Vec<TypeFile>,
}

#[derive(Serialize)]
struct TypeFile {
    cost: f64,
    dist: Vec<(u64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    capacity: serde_json::Number,
    types: Vec<RawType>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawType {
    cost: f64,
    dist: Vec<(serde_json::Number, f64)>,
}

/// Parses the JSON instance format
/// `{"capacity": W, "types": [{"cost": c, "dist": [[value, prob], ...]}, ...]}`.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance =
        serde_json::from_str(text).map_err(|e| SumkError::Malformed(e.to_string()))?;
    let capacity = match raw.capacity.as_u64() {
        Some(w) if w >= 1 => w,
        _ => {
            return Err(SumkError::InvalidInstance(format!(
                "capacity must be an integer >= 1, got {}",
                raw.capacity
            )))
        }
    };
    if raw.types.is_empty() {
        return Err(SumkError::InvalidInstance("instance has no item types".into()));
    }
    let mut types = Vec::with_capacity(raw.types.len());
    for (index, t) in raw.types.into_iter().enumerate() {
        if t.cost < 0.0 {
            return Err(SumkError::InvalidInstance(format!(
                "type {index}: negative cost {}",
                t.cost
            )));
        }
        let mut points = Vec::with_capacity(t.dist.len());
        for (value, prob) in t.dist {
            let value = value.as_u64().ok_or_else(|| {
                SumkError::InvalidInstance(format!(
                    "type {index}: weight {value} is not a non-negative integer"
                ))
            })?;
            points.push((value, prob));
        }
        let dist = WeightDistribution::new(points)
            .map_err(|e| SumkError::InvalidInstance(format!("type {index}: {e}")))?;
        types.push(ItemType::new(t.cost, dist)?);
    }
    Instance::new(capacity, types)
}

// ---------------------------------------------------------------------------
// Oracle access
// ---------------------------------------------------------------------------

/// Thread-safe counter of probability queries.
#[derive(Debug, Default)]
pub struct QueryCounter(AtomicU64);

impl QueryCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// CDF oracle over an instance that counts every query it answers.
pub struct CdfOracle<'a> {
    instance: &'a Instance,
    counter: &'a QueryCounter,
}

impl<'a> CdfOracle<'a> {
    pub fn new(instance: &'a Instance, counter: &'a QueryCounter) -> Self {
        Self { instance, counter }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn cdf(&self, type_index: usize, j: i64) -> f64 {
        self.counter.add(1);
        self.instance.types[type_index].cdf(j)
    }
}
