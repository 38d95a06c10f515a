//! Discretized frontier DP for instances where every item is expensive.
//!
//! `f_i` is the largest residual capacity whose discretized cost is at most
//! `i * delta * T`. Item `j` certifies `f_i >= w` when
//!
//! ```text
//! c_j + delta*T * sum_{k < i} Pr{X_j < w - f_k}  <=  i * delta*T
//! ```
//!
//! which is the interval form `c_j + sum_m P_m (m + 1) delta*T` summed by
//! parts. Everything below works in units of `delta * T`.
//!
//! The frontier is stored as runs of equal values. Since indices between
//! two distinct frontier values add nothing, each step jumps straight to the
//! first index at which `f_{i-1} + 1` becomes reachable, then gallops and
//! bisects for the new value.

use serde::Serialize;

use crate::dist::TailArray;
use crate::error::{Result, SumkError};
use crate::instance::QueryCounter;
use crate::policy::{Action, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DpConfig {
    pub epsilon: f64,
    pub n: usize,
    /// `epsilon^2 / (100 n)`.
    pub delta: f64,
    /// `epsilon / (10 n)`.
    pub theta: f64,
    pub t: f64,
}

impl DpConfig {
    pub fn new(epsilon: f64, n: usize, t: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SumkError::InvalidEpsilon(epsilon));
        }
        let n_f = n as f64;
        Ok(Self {
            epsilon,
            n,
            delta: epsilon * epsilon / (100.0 * n_f),
            theta: epsilon / (10.0 * n_f),
            t,
        })
    }

    /// Cost grid step `delta * T`.
    pub fn step(&self) -> f64 {
        self.delta * self.t
    }

    /// Expensive threshold `theta * T`.
    pub fn threshold(&self) -> f64 {
        self.theta * self.t
    }

    /// Upper bound on the frontier index, `ceil(8 / delta)`.
    pub fn iteration_cap(&self) -> u64 {
        (8.0 / self.delta).ceil() as u64
    }
}

#[derive(Clone, Debug)]
pub struct DpItem {
    pub cost: f64,
    pub tail: TailArray,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FrontierRun {
    /// First index `i` with `f_i = value`.
    pub first_index: u64,
    pub value: u64,
    /// Item certifying `f_{first_index} >= value`; `None` only for `f_0`.
    pub witness: Option<usize>,
}

/// `f_0, f_1, ...` as runs of equal values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierTable {
    runs: Vec<FrontierRun>,
    len: u64,
}

impl Default for FrontierTable {
    fn default() -> Self {
        Self::new()
    }
}

impl FrontierTable {
    /// The table holding only `f_0 = 0`.
    pub fn new() -> Self {
        Self {
            runs: vec![FrontierRun {
                first_index: 0,
                value: 0,
                witness: None,
            }],
            len: 1,
        }
    }

    /// Number of indices stored.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn runs(&self) -> &[FrontierRun] {
        &self.runs
    }

    pub fn last_value(&self) -> u64 {
        self.runs[self.runs.len() - 1].value
    }

    fn run_of(&self, i: u64) -> &FrontierRun {
        assert!(i < self.len, "index {i} beyond the frontier");
        let r = self.runs.partition_point(|r| r.first_index <= i);
        &self.runs[r - 1]
    }

    /// `f_i`.
    pub fn value(&self, i: u64) -> u64 {
        self.run_of(i).value
    }

    /// Item that certified the run containing `i`.
    pub fn witness(&self, i: u64) -> Option<usize> {
        self.run_of(i).witness
    }

    /// All values `f_0 .. f_{len-1}`.
    pub fn values(&self) -> Vec<u64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// Appends `f_i` for `i = len`, repeating the last value up to `i - 1`.
    pub fn push(&mut self, i: u64, value: u64, witness: usize) {
        assert!(i >= self.len && value >= self.last_value());
        if value > self.last_value() {
            self.runs.push(FrontierRun {
                first_index: i,
                value,
                witness: Some(witness),
            });
        }
        self.len = i + 1;
    }

    /// `#{k < i : f_k <= x}` for a prefix length `i >= len`, treating
    /// indices past the table as copies of the last value.
    fn count_le(&self, x: i64, i: u64) -> u64 {
        if x < 0 {
            return 0;
        }
        let r = self.runs.partition_point(|r| r.value as i64 <= x);
        if r == self.runs.len() {
            i
        } else {
            self.runs[r].first_index
        }
    }
}

/// `sum_{k < i} Pr{X < w - f_k}` over the prefix `f_0 .. f_{i-1}`.
///
/// Either walks the tail segments, counting frontier indices that land in
/// each, or walks the frontier runs close enough to `w` to have a partial
/// tail; whichever is shorter.
fn lower_mass(tail: &TailArray, table: &FrontierTable, i: u64, w: u64, counter: &QueryCounter) -> f64 {
    let w = w as i64;
    let max = tail.max() as i64;
    // Past max the tail is 0, so every such index contributes exactly 1.
    let far = table.count_le(w - max - 1, i);
    let runs = table.runs();
    let lo = runs.partition_point(|r| (r.value as i64) < w - max);
    let hi = runs.partition_point(|r| (r.value as i64) <= w - 2);
    let window = hi.saturating_sub(lo);
    let bp = tail.breakpoints();
    let mut sum = far as f64;
    if bp.len() - 1 <= window {
        counter.add(bp.len() as u64 - 1);
        // Segment [b_m, e_m] has tail t_m; the first segment has tail 1.
        for m in 1..bp.len() {
            let (start, t) = bp[m];
            let end = bp.get(m + 1).map_or(max, |&(b, _)| b as i64 - 1);
            let start = start as i64;
            if w - start < 0 {
                break;
            }
            let count = table.count_le(w - start, i) - table.count_le(w - end - 1, i);
            sum += (1.0 - t) * count as f64;
        }
    } else {
        counter.add(window as u64);
        for (r, run) in runs.iter().enumerate().take(hi).skip(lo) {
            let next = runs.get(r + 1).map_or(i, |n| n.first_index.min(i));
            let count = next - run.first_index;
            sum += (1.0 - tail.tail(w - run.value as i64)) * count as f64;
        }
    }
    sum
}

/// Discretized cost of item `j` at residual `w` with prefix length `i`,
/// in units of `delta * T`.
pub fn discretized_cost(item: &DpItem, table: &FrontierTable, i: u64, w: u64, cfg: &DpConfig) -> f64 {
    item.cost / cfg.step() + lower_mass(&item.tail, table, i, w, &QueryCounter::new())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub witness: Option<usize>,
}

struct Evaluator<'a> {
    items: &'a [DpItem],
    cost_units: Vec<f64>,
    counter: &'a QueryCounter,
}

impl<'a> Evaluator<'a> {
    fn new(items: &'a [DpItem], cfg: &DpConfig, counter: &'a QueryCounter) -> Self {
        let step = cfg.step();
        Self {
            items,
            cost_units: items.iter().map(|it| it.cost / step).collect(),
            counter,
        }
    }

    fn cost(&self, table: &FrontierTable, i: u64, j: usize, w: u64) -> f64 {
        self.cost_units[j] + lower_mass(&self.items[j].tail, table, i, w, self.counter)
    }

    /// Lowest item whose discretized cost is at most `i`.
    fn witness(&self, table: &FrontierTable, i: u64, w: u64) -> Option<usize> {
        (0..self.items.len()).find(|&j| self.cost(table, i, j, w) <= i as f64)
    }
}

/// Decides `f_i >= w` given the prefix stored in `table` (`table.len() <= i`;
/// missing indices repeat the last stored value).
pub fn frontier_feasible(
    items: &[DpItem],
    table: &FrontierTable,
    i: u64,
    w: u64,
    cfg: &DpConfig,
) -> Feasibility {
    let counter = QueryCounter::new();
    let witness = Evaluator::new(items, cfg, &counter).witness(table, i, w);
    Feasibility {
        feasible: witness.is_some(),
        witness,
    }
}

#[derive(Clone, Debug)]
pub struct FrontierOutcome {
    pub table: FrontierTable,
    /// Smallest `i` with `f_i >= W`.
    pub index: u64,
    /// `index * delta * T`.
    pub value: f64,
}

/// Builds the frontier until it reaches `capacity`. Every item must cost at
/// least `theta * T`.
pub fn build_frontier(
    items: &[DpItem],
    capacity: u64,
    cfg: &DpConfig,
    counter: &QueryCounter,
) -> Result<FrontierOutcome> {
    let threshold = cfg.threshold();
    for (index, it) in items.iter().enumerate() {
        if it.cost < threshold {
            return Err(SumkError::CheapItem {
                index,
                cost: it.cost,
                threshold,
            });
        }
    }
    build_unchecked(items, capacity, cfg, counter)
}

fn build_unchecked(
    items: &[DpItem],
    capacity: u64,
    cfg: &DpConfig,
    counter: &QueryCounter,
) -> Result<FrontierOutcome> {
    assert!(!items.is_empty());
    for it in items {
        assert_eq!(it.tail.cap(), capacity, "item tail built for another capacity");
    }
    let eval = Evaluator::new(items, cfg, counter);
    let iter_cap = cfg.iteration_cap();
    let mut table = FrontierTable::new();
    while table.last_value() < capacity {
        let start = table.last_value() + 1;
        // Indices with the same last value add nothing; find the first index
        // at which `start` becomes reachable.
        let len = table.len();
        let need = (0..items.len())
            .map(|j| eval.cost(&table, len, j, start))
            .fold(f64::INFINITY, f64::min);
        let i = if need <= len as f64 { len } else { need.ceil() as u64 };
        if i > iter_cap {
            return Err(SumkError::IterationCap {
                capacity,
                cap: iter_cap,
            });
        }
        let mut lo = start;
        let mut lo_witness = eval.witness(&table, i, lo).expect("start is reachable at i");
        let mut hi = capacity + 1;
        let mut step = 1u64;
        while lo < capacity {
            let probe = lo.saturating_add(step).min(capacity);
            match eval.witness(&table, i, probe) {
                Some(j) => {
                    lo = probe;
                    lo_witness = j;
                    step = step.saturating_mul(2);
                }
                None => {
                    hi = probe;
                    break;
                }
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            match eval.witness(&table, i, mid) {
                Some(j) => {
                    lo = mid;
                    lo_witness = j;
                }
                None => hi = mid,
            }
        }
        table.push(i, lo, lo_witness);
    }
    let index = table.len() - 1;
    Ok(FrontierOutcome {
        value: index as f64 * cfg.step(),
        index,
        table,
    })
}

/// Frontier-derived policy: at residual `w`, act on the witness of the
/// smallest index whose frontier value is at least `w`.
#[derive(Clone, Debug, Serialize)]
pub struct FrontierPolicy {
    thresholds: Vec<u64>,
    actions: Vec<Action>,
}

impl FrontierPolicy {
    /// Policy taking `action` at every residual.
    pub fn constant(action: Action) -> Self {
        Self {
            thresholds: vec![u64::MAX],
            actions: vec![action],
        }
    }

    /// Item chosen at residual `w`, as an index into the runs.
    fn run_for(&self, w: u64) -> usize {
        self.thresholds
            .partition_point(|&v| v < w)
            .min(self.thresholds.len() - 1)
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }
}

impl Policy for FrontierPolicy {
    fn action(&self, w: u64) -> Action {
        self.actions[self.run_for(w)]
    }
}

/// Policy inserting single items, indexed as in `items`.
pub fn extract_policy(table: &FrontierTable, items: &[DpItem]) -> FrontierPolicy {
    extract_policy_with(table, items, |j| Action {
        type_index: j,
        count: 1,
    })
}

/// Policy whose action for item `j` is `to_action(j)`.
pub fn extract_policy_with(
    table: &FrontierTable,
    items: &[DpItem],
    to_action: impl Fn(usize) -> Action,
) -> FrontierPolicy {
    let runs = &table.runs()[1..];
    assert!(!runs.is_empty(), "frontier never left zero");
    FrontierPolicy {
        thresholds: runs.iter().map(|r| r.value).collect(),
        actions: runs
            .iter()
            .map(|r| {
                let j = r.witness.expect("only f_0 lacks a witness");
                assert!(j < items.len());
                to_action(j)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_solve;
    use crate::instance::{Instance, ItemType, WeightDistribution};
    use proptest::prelude::*;

    fn dp_item(cost: f64, d: &[(u64, f64)], cap: u64) -> DpItem {
        let dist = WeightDistribution::new(d.to_vec()).unwrap();
        DpItem {
            cost,
            tail: TailArray::from_distribution(&dist, cap),
        }
    }

    fn cfg(eps: f64, n: usize, t: f64) -> DpConfig {
        DpConfig::new(eps, n, t).unwrap()
    }

    /// Straight evaluation of the interval form with explicit `P_m`.
    fn reference_cost(
        cost: f64,
        d: &WeightDistribution,
        f: &[u64],
        w: u64,
        step: f64,
    ) -> f64 {
        let w = w as i64;
        let i = f.len();
        let pr = |lo: i64, hi: i64| -> f64 {
            let lo = lo.max(1);
            if lo >= hi {
                0.0
            } else {
                d.cdf(hi - 1) - d.cdf(lo - 1)
            }
        };
        let mut g = cost;
        for m in 0..i {
            let upper = w - f[m] as i64;
            let lower = if m + 1 < i { w - f[m + 1] as i64 } else { 1 };
            g += pr(lower, upper) * (m + 1) as f64 * step;
        }
        g
    }

    /// Index-by-index frontier with full scans over `w`.
    fn reference_frontier(
        items: &[(f64, WeightDistribution)],
        cap: u64,
        step: f64,
        max_index: usize,
    ) -> Vec<u64> {
        let mut f = vec![0u64];
        while *f.last().unwrap() < cap && f.len() <= max_index {
            let i = f.len();
            let mut best = *f.last().unwrap();
            for w in (best + 1)..=cap {
                let ok = items
                    .iter()
                    .any(|(c, d)| reference_cost(*c, d, &f, w, step) <= i as f64 * step);
                if ok {
                    best = w;
                }
            }
            f.push(best);
        }
        f
    }

    #[test]
    fn config_formulas() {
        let c = cfg(0.2, 4, 3.0);
        assert!((c.delta - 0.04 / 400.0).abs() < 1e-18);
        assert!((c.theta - 0.2 / 40.0).abs() < 1e-18);
        assert_eq!(c.iteration_cap(), (8.0 / c.delta).ceil() as u64);
        assert!(DpConfig::new(1.0, 1, 1.0).is_err());
        assert!(DpConfig::new(0.0, 1, 1.0).is_err());
    }

    #[test]
    fn first_index_at_unit_residual() {
        // Every weight finishes w = 1, so only the cost counts.
        let c = cfg(0.5, 1, 4.0);
        let step = c.step();
        let items = vec![dp_item(step, &[(1, 0.3), (4, 0.7)], 10)];
        let t = FrontierTable::new();
        assert!(frontier_feasible(&items, &t, 1, 1, &c).feasible);
        let items = vec![dp_item(1.5 * step, &[(1, 1.0)], 10)];
        let r = frontier_feasible(&items, &t, 1, 1, &c);
        assert_eq!(r, Feasibility { feasible: false, witness: None });
    }

    #[test]
    fn unit_steps_grow_by_one() {
        let c = cfg(0.5, 1, 4.0);
        let items = vec![dp_item(c.step(), &[(1, 1.0)], 12)];
        let out = build_unchecked(&items, 12, &c, &QueryCounter::new()).unwrap();
        assert_eq!(out.table.values(), (0..=12).collect::<Vec<_>>());
        assert_eq!(out.index, 12);
    }

    #[test]
    fn single_insertion_finishes() {
        let c = cfg(0.1, 1, 2.0);
        let items = vec![dp_item(2.0, &[(10, 1.0)], 10)];
        let out = build_frontier(&items, 10, &c, &QueryCounter::new()).unwrap();
        assert_eq!(out.index, (2.0 / c.step()).ceil() as u64);
        assert!(out.value >= 2.0 && out.value < 2.0 + c.step());
        assert_eq!(out.table.runs().len(), 2);
    }

    #[test]
    fn capacity_one_uses_cheapest() {
        let c = cfg(0.3, 2, 1.0);
        let items = vec![dp_item(0.9, &[(1, 1.0)], 1), dp_item(0.45, &[(1, 1.0)], 1)];
        let out = build_frontier(&items, 1, &c, &QueryCounter::new()).unwrap();
        assert_eq!(out.index, (0.45 / c.step()).ceil() as u64);
        assert_eq!(out.table.witness(out.index), Some(1));
    }

    #[test]
    fn rejects_cheap_items() {
        let c = cfg(0.3, 1, 10.0);
        let items = vec![dp_item(0.01, &[(1, 1.0)], 4)];
        assert!(matches!(
            build_frontier(&items, 4, &c, &QueryCounter::new()),
            Err(SumkError::CheapItem { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_enforced() {
        // T far below OPT makes the frontier need more than 8 / delta steps.
        let c = cfg(0.5, 1, 0.01);
        let items = vec![dp_item(1.0, &[(1, 1.0)], 3)];
        assert!(matches!(
            build_frontier(&items, 3, &c, &QueryCounter::new()),
            Err(SumkError::IterationCap { .. })
        ));
    }

    #[test]
    fn doubling_capacity_never_lowers_value() {
        let c = cfg(0.3, 2, 20.0);
        let mk = |cap| {
            vec![
                dp_item(2.0, &[(1, 0.5), (3, 0.5)], cap),
                dp_item(3.5, &[(2, 0.2), (7, 0.8)], cap),
            ]
        };
        let mut prev = 0.0;
        for cap in [5, 10, 20, 40, 80] {
            let v = build_frontier(&mk(cap), cap, &c, &QueryCounter::new()).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn policy_follows_witnesses() {
        let c = cfg(0.3, 1, 5.0);
        let items = vec![dp_item(2.0, &[(2, 0.5), (3, 0.5)], 9)];
        let out = build_frontier(&items, 9, &c, &QueryCounter::new()).unwrap();
        let p = extract_policy(&out.table, &items);
        for w in 1..=9 {
            assert_eq!(p.action(w), Action { type_index: 0, count: 1 });
        }
        let first = out.table.runs()[1];
        assert_eq!(p.action(1).type_index, first.witness.unwrap());
    }

    #[test]
    fn counter_sees_tail_reads() {
        let c = cfg(0.3, 1, 5.0);
        let items = vec![dp_item(2.0, &[(1, 0.5), (3, 0.5)], 20)];
        let counter = QueryCounter::new();
        build_frontier(&items, 20, &c, &counter).unwrap();
        assert!(counter.get() > 0);
    }

    type TypeSpec = (f64, Vec<(u64, f64)>);

    fn small_items() -> impl Strategy<Value = (u64, Vec<TypeSpec>)> {
        (1u64..=40).prop_flat_map(|cap| {
            let ty = (
                0.5f64..5.0,
                prop::collection::btree_map(1u64..=cap + 3, 0.05f64..1.0, 1..5),
            )
                .prop_map(|(c, m)| {
                    let s: f64 = m.values().sum();
                    (c, m.into_iter().map(|(v, p)| (v, p / s)).collect::<Vec<_>>())
                });
            (Just(cap), prop::collection::vec(ty, 1..4))
        })
    }

    fn to_instance(cap: u64, spec: &[TypeSpec]) -> Instance {
        let types = spec
            .iter()
            .map(|(c, d)| ItemType::new(*c, WeightDistribution::new(d.clone()).unwrap()).unwrap())
            .collect();
        Instance::new(cap, types).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_reference_frontier((cap, spec) in small_items(), eps in 0.3f64..0.9) {
            let inst = to_instance(cap, &spec);
            // A grid step near OPT / 40 keeps the reference scan short.
            let opt = exact_solve(&inst).unwrap().value();
            let n = inst.num_types();
            let delta = eps * eps / (100.0 * n as f64);
            let c = cfg(eps, n, opt / (40.123457 * delta));
            let items: Vec<DpItem> = inst
                .types()
                .iter()
                .map(|t| DpItem { cost: t.cost, tail: TailArray::from_distribution(&t.dist, cap) })
                .collect();
            let out = build_unchecked(&items, cap, &c, &QueryCounter::new()).unwrap();
            let pairs: Vec<(f64, WeightDistribution)> =
                inst.types().iter().map(|t| (t.cost, t.dist.clone())).collect();
            let reference = reference_frontier(&pairs, cap, c.step(), out.index as usize);
            prop_assert_eq!(out.table.values(), reference);
        }

        #[test]
        fn sound_and_tight_against_exact((cap, spec) in small_items(), eps in 0.2f64..0.9) {
            let inst = to_instance(cap, &spec);
            let exact = exact_solve(&inst).unwrap();
            let n = inst.num_types();
            let min_cost = inst.types().iter().map(|t| t.cost).fold(f64::INFINITY, f64::min);
            // Choose T so every item is expensive and T <= OPT holds.
            let theta = eps / (10.0 * n as f64);
            let t = (min_cost / theta).min(exact.value());
            let c = cfg(eps, n, t);
            let items: Vec<DpItem> = inst
                .types()
                .iter()
                .map(|t| DpItem { cost: t.cost, tail: TailArray::from_distribution(&t.dist, cap) })
                .collect();
            let out = build_frontier(&items, cap, &c, &QueryCounter::new()).unwrap();
            let step = c.step();
            for run in out.table.runs() {
                let i = run.first_index as f64;
                prop_assert!(exact.opt(run.value as i64) <= i * step + 1e-9);
            }
            // Tightness at the last index of each run.
            let runs = out.table.runs();
            for (r, run) in runs.iter().enumerate() {
                if run.value >= cap {
                    continue;
                }
                let last = runs.get(r + 1).map_or(out.index, |n| n.first_index - 1) as f64;
                let slack = last * c.delta * c.delta / c.theta * t;
                prop_assert!(exact.opt(run.value as i64 + 1) > last * step - slack - 1e-9);
            }
            let v = out.value;
            let opt = exact.value();
            prop_assert!(opt <= v + 1e-9);
            prop_assert!((1.0 - c.delta) * (1.0 - eps / 10.0) * v <= opt + 1e-9);
        }
    }
}
