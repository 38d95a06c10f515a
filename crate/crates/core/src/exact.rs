//! Pseudo-polynomial exact solver.
//!
//! `OPT_w = min_j (c_j + sum_k d_j(k) * OPT_{w-k})` with `OPT_w = 0` for
//! `w <= 0`, evaluated for `w = 1..=W` over the sparse supports. The full
//! table is kept: it backs the exact policy and the oracle comparisons.

use crate::error::{Result, SumkError};
use crate::instance::Instance;
use crate::policy::{Action, Policy};

/// Default upper bound on `W` accepted by [`exact_solve`].
pub const DEFAULT_EXACT_CAP: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct ExactSolution {
    /// `opt[w]` for `w = 0..=W`; `opt[0] = 0`.
    opt: Vec<f64>,
    /// `best_type[w]` for `w = 1..=W`; index 0 is unused.
    best_type: Vec<usize>,
}

impl ExactSolution {
    pub fn capacity(&self) -> u64 {
        (self.opt.len() - 1) as u64
    }

    /// `OPT_W`.
    pub fn value(&self) -> f64 {
        self.opt[self.opt.len() - 1]
    }

    /// `OPT_w` for any integer `w <= W`; zero when `w <= 0`.
    pub fn opt(&self, w: i64) -> f64 {
        if w <= 0 {
            0.0
        } else {
            self.opt[w as usize]
        }
    }

    /// The table `OPT_0 ..= OPT_W`.
    pub fn table(&self) -> &[f64] {
        &self.opt
    }

    /// Optimal type to insert at remaining capacity `w`.
    pub fn policy(&self, w: u64) -> Result<usize> {
        if w < 1 || w > self.capacity() {
            return Err(SumkError::CapacityOutOfRange {
                w,
                capacity: self.capacity(),
            });
        }
        Ok(self.best_type[w as usize])
    }
}

impl Policy for ExactSolution {
    fn action(&self, w: u64) -> Action {
        Action {
            type_index: self.best_type[w.min(self.capacity()) as usize],
            count: 1,
        }
    }
}

/// Solves `inst` exactly; `inst` must already have positive support.
pub fn exact_solve(inst: &Instance) -> Result<ExactSolution> {
    exact_solve_with_cap(inst, DEFAULT_EXACT_CAP)
}

pub fn exact_solve_with_cap(inst: &Instance, cap: u64) -> Result<ExactSolution> {
    let capacity = inst.capacity();
    if capacity > cap {
        return Err(SumkError::ExactCapExceeded { capacity, cap });
    }
    inst.check_positive_support()?;
    let w_max = capacity as usize;
    let mut opt = vec![0.0; w_max + 1];
    let mut best_type = vec![0; w_max + 1];
    for w in 1..=w_max {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (j, t) in inst.types().iter().enumerate() {
            let mut value = t.cost;
            for &(x, p) in t.dist.support() {
                let x = x as usize;
                if x >= w {
                    break;
                }
                value += p * opt[w - x];
            }
            if value < best {
                best = value;
                arg = j;
            }
        }
        opt[w] = best;
        best_type[w] = arg;
    }
    Ok(ExactSolution { opt, best_type })
}

/// Exact solution returned as a policy for the simulator.
pub fn exact_policy(sol: &ExactSolution, w: u64) -> Result<usize> {
    sol.policy(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ItemType, WeightDistribution};

    fn inst(capacity: u64, types: &[(f64, &[(u64, f64)])]) -> Instance {
        let types = types
            .iter()
            .map(|(c, d)| ItemType::new(*c, WeightDistribution::new(d.to_vec()).unwrap()).unwrap())
            .collect();
        Instance::new(capacity, types).unwrap()
    }

    #[test]
    fn deterministic_unit_steps() {
        let sol = exact_solve(&inst(5, &[(3.0, &[(1, 1.0)])])).unwrap();
        assert_eq!(sol.value(), 15.0);
    }

    #[test]
    fn uniform_one_two() {
        // OPT_1 = 1, OPT_2 = 1 + 0.5 * OPT_1
        let sol = exact_solve(&inst(2, &[(1.0, &[(1, 0.5), (2, 0.5)])])).unwrap();
        assert_eq!(sol.opt(1), 1.0);
        assert_eq!(sol.value(), 1.5);
        assert_eq!(exact_policy(&sol, 2).unwrap(), 0);
    }

    #[test]
    fn capacity_one_is_min_cost() {
        let sol = exact_solve(&inst(
            1,
            &[(4.0, &[(1, 1.0)]), (2.5, &[(1, 0.3), (3, 0.7)]), (7.0, &[(2, 1.0)])],
        ))
        .unwrap();
        assert_eq!(sol.value(), 2.5);
        assert_eq!(sol.policy(1).unwrap(), 1);
    }

    #[test]
    fn cheap_versus_expensive_policy() {
        let i1 = inst(1, &[(1.0, &[(1, 1.0)]), (10.0, &[(5, 1.0)])]);
        assert_eq!(exact_solve(&i1).unwrap().policy(1).unwrap(), 0);
        let i5 = inst(5, &[(1.0, &[(1, 1.0)]), (10.0, &[(5, 1.0)])]);
        let sol = exact_solve(&i5).unwrap();
        assert_eq!(sol.value(), 5.0);
        assert_eq!(sol.policy(5).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let sol = exact_solve(&inst(3, &[(1.0, &[(1, 1.0)]), (1.0, &[(1, 1.0)])])).unwrap();
        for w in 1..=3 {
            assert_eq!(sol.policy(w).unwrap(), 0);
        }
    }

    #[test]
    fn errors() {
        let i = inst(10, &[(1.0, &[(1, 1.0)])]);
        assert!(matches!(
            exact_solve_with_cap(&i, 9),
            Err(SumkError::ExactCapExceeded { .. })
        ));
        let sol = exact_solve(&i).unwrap();
        assert!(sol.policy(0).is_err());
        assert!(sol.policy(11).is_err());
        let zero = inst(3, &[(1.0, &[(0, 0.5), (1, 0.5)])]);
        assert!(matches!(exact_solve(&zero), Err(SumkError::NotNormalized { .. })));
    }

    #[test]
    fn table_is_monotone_and_satisfies_bellman() {
        let i = inst(
            40,
            &[
                (2.0, &[(1, 0.2), (4, 0.5), (9, 0.3)]),
                (0.7, &[(1, 0.9), (2, 0.1)]),
                (5.0, &[(13, 0.6), (40, 0.4)]),
            ],
        );
        let sol = exact_solve(&i).unwrap();
        for w in 1..=40i64 {
            assert!(sol.opt(w) >= sol.opt(w - 1));
            let bellman = i
                .types()
                .iter()
                .map(|t| {
                    t.cost
                        + t.dist
                            .support()
                            .iter()
                            .map(|&(x, p)| p * sol.opt(w - x as i64))
                            .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((bellman - sol.opt(w)).abs() < 1e-9);
        }
    }
}
