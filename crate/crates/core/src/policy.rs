//! Insertion policies: remaining capacity in, block of items out.

use serde::Serialize;

/// Insert `count` items of type `type_index`, observing every weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Action {
    pub type_index: usize,
    pub count: u64,
}

/// A stationary policy over remaining capacity `w` in `[1, W]`.
pub trait Policy: Sync {
    fn action(&self, w: u64) -> Action;
}
