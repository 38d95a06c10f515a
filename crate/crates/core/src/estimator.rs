//! Constant-factor estimate `T` of the optimal expected cost.
//!
//! Each realized weight `x` is rounded down to `2^floor(log2 x)`, which loses
//! at most a factor two, and the rounded mean only needs the CDF at `2^k - 1`
//! for `k = 0..=floor(log2 W) + 1`. With `m' = argmin c_i / E'[X_i]`,
//! `T = (W / 2) * c_m' / E'[X_m']` satisfies `OPT_W / 4 <= T <= OPT_W`.

use serde::Serialize;

use crate::instance::{CdfOracle, Instance, ItemType};

#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    /// The estimate `T`.
    pub t: f64,
    /// Rounded mean weight of every type.
    pub rounded_means: Vec<f64>,
    /// `c_i / rounded_means[i]` for every type.
    pub ratios: Vec<f64>,
    /// Lowest index attaining the minimum ratio.
    pub best_ratio_type: usize,
}

/// `floor(log2 w)` for `w >= 1`.
pub(crate) fn floor_log2(w: u64) -> u32 {
    63 - w.max(1).leading_zeros()
}

fn rounded_mean_with(cap: u64, mut cdf: impl FnMut(i64) -> f64) -> f64 {
    // X in [2^j, 2^(j+1) - 1] rounds to 2^j; D(0) = 0 under positive support.
    let mut total = 0.0;
    let mut below = 0.0;
    for j in 0..=floor_log2(cap) {
        let upper = cdf((1i64 << (j + 1)) - 1);
        total += (1u64 << j) as f64 * (upper - below);
        below = upper;
    }
    total
}

/// Mean of the weight after rounding each value down to a power of two.
///
/// Satisfies `E[X] / 2 <= result <= E[X]` and issues `floor(log2 W) + 1`
/// CDF queries.
pub fn rounded_mean(item: &ItemType, capacity: u64) -> f64 {
    rounded_mean_with(capacity, |j| item.cdf(j))
}

/// Computes `T` through the counting oracle.
pub fn estimate_t(oracle: &CdfOracle<'_>) -> Estimate {
    let inst: &Instance = oracle.instance();
    let cap = inst.capacity();
    let rounded_means: Vec<f64> = (0..inst.num_types())
        .map(|i| rounded_mean_with(cap, |j| oracle.cdf(i, j)))
        .collect();
    let ratios: Vec<f64> = inst
        .types()
        .iter()
        .zip(&rounded_means)
        .map(|(t, &m)| t.cost / m)
        .collect();
    let mut best_ratio_type = 0;
    for (i, &r) in ratios.iter().enumerate() {
        if r < ratios[best_ratio_type] {
            best_ratio_type = i;
        }
    }
    let t = cap as f64 / 2.0 * ratios[best_ratio_type];
    Estimate {
        t,
        rounded_means,
        ratios,
        best_ratio_type,
    }
}
