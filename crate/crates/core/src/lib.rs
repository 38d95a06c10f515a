//! Exact and approximate solvers for the stochastic unbounded min-knapsack
//! problem: insert items of `n` types, each with a fixed cost and a random
//! integer weight, until the total weight reaches the capacity `W`, at
//! minimum expected cost.

pub mod cli;
pub mod dist;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod frontier;
pub mod generate;
pub mod instance;
pub mod pipeline;
pub mod policy;
pub mod simulate;

pub use dist::{approx_iid_sum, convolve, round_zeta_eta, ApproxParams, TailArray};
pub use error::{Result, SumkError};
pub use estimator::{estimate_t, rounded_mean, Estimate};
pub use exact::{exact_policy, exact_solve, exact_solve_with_cap, ExactSolution, DEFAULT_EXACT_CAP};
pub use frontier::{
    build_frontier, extract_policy, frontier_feasible, DpConfig, DpItem, FrontierPolicy, FrontierTable,
};
pub use generate::{generate_instance, GenSpec};
pub use instance::{parse_instance, CdfOracle, Instance, ItemType, QueryCounter, WeightDistribution};
pub use pipeline::{bundle_types, solve, solve_full, solve_policy, BlockType, Solution, SolveReport};
pub use policy::{Action, Policy};
pub use simulate::{simulate, SimResult};
