//! Seeded random instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SumkError};
use crate::instance::{Instance, ItemType, WeightDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GenSpec {
    pub n: usize,
    pub capacity: u64,
    /// Support points per type are drawn from `1..=max_support` (and at
    /// most `capacity`).
    pub max_support: usize,
    pub cost_min: f64,
    pub cost_max: f64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SumkError::InvalidGenSpec(m.into()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.capacity == 0 {
            return bad("capacity must be at least 1");
        }
        if self.max_support == 0 {
            return bad("max support must be at least 1");
        }
        if !(self.cost_min.is_finite() && self.cost_max.is_finite()) {
            return bad("costs must be finite");
        }
        if self.cost_min < 0.0 || self.cost_min > self.cost_max {
            return bad("need 0 <= cost_min <= cost_max");
        }
        Ok(())
    }
}

/// Random instance with distinct support values in `[1, W]` and
/// probabilities summing to one. Deterministic per `(spec, seed)`.
pub fn generate_instance(spec: &GenSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k = (spec.max_support as u64).min(spec.capacity) as usize;
    let mut types = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let cost = if spec.cost_min == spec.cost_max {
            spec.cost_min
        } else {
            rng.random_range(spec.cost_min..=spec.cost_max)
        };
        let k = rng.random_range(1..=max_k);
        let mut values: Vec<u64> = sample(&mut rng, spec.capacity as usize, k)
            .into_iter()
            .map(|v| v as u64 + 1)
            .collect();
        values.sort_unstable();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let points = values.into_iter().zip(raw.iter().map(|r| r / total)).collect();
        types.push(ItemType::new(cost, WeightDistribution::new(points)?)?);
    }
    Instance::new(spec.capacity, types)
}
