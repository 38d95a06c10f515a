//! Monte Carlo evaluation of a policy.
//!
//! Trial `k` draws from its own ChaCha stream `(seed, k)`, so results do
//! not depend on how trials are spread over threads. Trials are grouped in
//! fixed chunks whose running statistics are merged in chunk order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SumkError};
use crate::instance::Instance;
use crate::policy::Policy;

const CHUNK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub mean_cost: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub stderr: f64,
    pub mean_items: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    n: u64,
    mean: f64,
    m2: f64,
    items: f64,
}

impl Stats {
    fn push(&mut self, cost: f64, items: u64) {
        self.n += 1;
        let d = cost - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (cost - self.mean);
        self.items += items as f64;
    }

    fn merge(self, o: Stats) -> Stats {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Stats {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
            items: self.items + o.items,
        }
    }
}

fn run_trial(inst: &Instance, policy: &dyn Policy, rng: &mut ChaCha8Rng) -> Result<(f64, u64)> {
    let types = inst.types();
    let mut w = inst.capacity() as i64;
    let mut cost = 0.0;
    let mut items = 0u64;
    while w > 0 {
        let a = policy.action(w as u64);
        if a.type_index >= types.len() || a.count == 0 {
            return Err(SumkError::InvalidAction {
                w: w as u64,
                type_index: a.type_index,
                count: a.count,
            });
        }
        let t = &types[a.type_index];
        cost += a.count as f64 * t.cost;
        items += a.count;
        for _ in 0..a.count {
            w -= t.dist.sample(rng.random::<f64>()) as i64;
        }
    }
    Ok((cost, items))
}

/// Runs `trials` independent trials of `policy` on `inst`.
pub fn simulate(inst: &Instance, policy: &dyn Policy, trials: u64, seed: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(SumkError::InvalidInstance("trials must be at least 1".into()));
    }
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Stats> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = Stats::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k);
                let (cost, items) = run_trial(inst, policy, &mut rng)?;
                s.push(cost, items);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let s = partial.into_iter().fold(Stats::default(), Stats::merge);
    let var = if s.n > 1 { s.m2 / (s.n - 1) as f64 } else { 0.0 };
    Ok(SimResult {
        trials,
        mean_cost: s.mean,
        stderr: (var / s.n as f64).sqrt(),
        mean_items: s.items / s.n as f64,
        seed,
    })
}
