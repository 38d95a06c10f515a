//! The full approximation scheme: estimate `T`, bundle cheap types into
//! blocks of `e_p = 2^k` items, approximate each block's weight sum, and run
//! the frontier DP over the blocks.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{approx_iid_sum, ApproxParams, TailArray};
use crate::error::{Result, SumkError};
use crate::estimator::estimate_t;
use crate::frontier::{build_frontier, extract_policy_with, DpConfig, DpItem, FrontierPolicy};
use crate::instance::{CdfOracle, Instance, QueryCounter};
use crate::policy::Action;

/// A bundle of `multiplicity` items of one type, inserted together.
#[derive(Clone, Debug)]
pub struct BlockType {
    /// Index into the normalized instance.
    pub source_type: usize,
    pub multiplicity: u64,
    pub cost: f64,
    pub tail: TailArray,
}

/// Smallest power of two `e` with `e * cost >= threshold`.
pub fn block_multiplicity(cost: f64, threshold: f64) -> u64 {
    if cost >= threshold {
        return 1;
    }
    let mut e = 1u64 << ((threshold / cost).log2().ceil().clamp(0.0, 63.0) as u32);
    while e < 1 << 63 && (e as f64) * cost < threshold {
        e <<= 1;
    }
    while e > 1 && (e / 2) as f64 * cost >= threshold {
        e >>= 1;
    }
    e
}

/// One block per type of a normalized instance. Expensive types keep their
/// exact tail; cheap ones get the approximate tail of the `e_p`-fold sum.
pub fn bundle_types(inst: &Instance, cfg: &DpConfig, params: &ApproxParams) -> Result<Vec<BlockType>> {
    inst.check_positive_support()?;
    let cap = inst.capacity();
    let threshold = cfg.threshold();
    inst.types()
        .par_iter()
        .enumerate()
        .map(|(p, t)| {
            let exact = TailArray::from_distribution(&t.dist, cap);
            let e = block_multiplicity(t.cost, threshold);
            let tail = if e == 1 {
                exact
            } else {
                approx_iid_sum(&exact, e, params)?
            };
            Ok(BlockType {
                source_type: p,
                multiplicity: e,
                cost: e as f64 * t.cost,
                tail,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveParams {
    pub epsilon: f64,
    pub t: f64,
    pub delta: f64,
    pub theta: f64,
    pub eta: f64,
    pub zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSummary {
    /// Index into the input instance.
    pub source_type: usize,
    pub multiplicity: u64,
    pub cost: f64,
    pub breakpoints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub value: f64,
    pub params: SolveParams,
    pub blocks: Vec<BlockSummary>,
    pub min_block_cost: f64,
    /// Smallest `i` with `f_i >= W`.
    pub frontier_len: u64,
    /// Number of distinct frontier values.
    pub frontier_runs: usize,
    pub query_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// A solve together with the block policy it induces.
#[derive(Clone, Debug)]
pub struct Solution {
    pub report: SolveReport,
    /// The normalized instance the policy acts on.
    pub instance: Instance,
    /// Actions index the types of `instance`.
    pub policy: FrontierPolicy,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(SumkError::InvalidEpsilon(epsilon))
    }
}

/// Runs the scheme and returns the report and the block policy.
pub fn solve_full(inst: &Instance, epsilon: f64) -> Result<Solution> {
    check_epsilon(epsilon)?;
    let started = Instant::now();
    let original_index = inst.surviving_types();
    let norm = inst.normalize_positive_support()?;
    let cap = norm.capacity();
    let params = ApproxParams::from_epsilon(epsilon, cap);

    if let Some(free) = norm.types().iter().position(|t| t.cost == 0.0) {
        let report = SolveReport {
            value: 0.0,
            params: SolveParams {
                epsilon,
                t: 0.0,
                delta: 0.0,
                theta: 0.0,
                eta: params.eta,
                zeta: params.zeta,
            },
            blocks: Vec::new(),
            min_block_cost: 0.0,
            frontier_len: 0,
            frontier_runs: 0,
            query_count: 0,
            wall_time_ms: Some(started.elapsed().as_secs_f64() * 1e3),
        };
        let policy = FrontierPolicy::constant(Action {
            type_index: free,
            count: 1,
        });
        return Ok(Solution {
            report,
            instance: norm,
            policy,
        });
    }

    let counter = QueryCounter::new();
    let estimate = estimate_t(&CdfOracle::new(&norm, &counter));
    let cfg = DpConfig::new(epsilon, norm.num_types(), estimate.t)?;
    let blocks = bundle_types(&norm, &cfg, &params)?;
    // Building an exact tail reads the CDF once per support point.
    counter.add(norm.types().iter().map(|t| t.dist.support().len() as u64).sum());
    let items: Vec<DpItem> = blocks
        .iter()
        .map(|b| DpItem {
            cost: b.cost,
            tail: b.tail.clone(),
        })
        .collect();
    let outcome = build_frontier(&items, cap, &cfg, &counter)?;
    log::debug!(
        "T = {}, min block cost = {}, threshold = {}",
        cfg.t,
        items.iter().map(|i| i.cost).fold(f64::INFINITY, f64::min),
        cfg.threshold()
    );
    let policy = extract_policy_with(&outcome.table, &items, |j| Action {
        type_index: blocks[j].source_type,
        count: blocks[j].multiplicity,
    });
    let report = SolveReport {
        value: outcome.value,
        params: SolveParams {
            epsilon,
            t: cfg.t,
            delta: cfg.delta,
            theta: cfg.theta,
            eta: params.eta,
            zeta: params.zeta,
        },
        blocks: blocks
            .iter()
            .map(|b| BlockSummary {
                source_type: original_index[b.source_type],
                multiplicity: b.multiplicity,
                cost: b.cost,
                breakpoints: b.tail.len(),
            })
            .collect(),
        min_block_cost: blocks.iter().map(|b| b.cost).fold(f64::INFINITY, f64::min),
        frontier_len: outcome.index,
        frontier_runs: outcome.table.runs().len(),
        query_count: counter.get(),
        wall_time_ms: Some(started.elapsed().as_secs_f64() * 1e3),
    };
    Ok(Solution {
        report,
        instance: norm,
        policy,
    })
}

/// `V-hat` with `(1 - eps) OPT <= V-hat <= (1 + eps) OPT`.
pub fn solve(inst: &Instance, epsilon: f64) -> Result<SolveReport> {
    solve_full(inst, epsilon).map(|s| s.report)
}

/// The block policy over the normalized instance.
pub fn solve_policy(inst: &Instance, epsilon: f64) -> Result<(Instance, FrontierPolicy)> {
    solve_full(inst, epsilon).map(|s| (s.instance, s.policy))
}
