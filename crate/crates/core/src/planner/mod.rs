//! Execution plans: bushy join trees, matching orders and hypercube shares.

pub mod binjoin;
pub mod cost;
pub mod order;
pub mod shares;

pub use binjoin::{
    annotate_compression, candidate_units, optimal_binjoin_plan, select_batching_vertex, unit_root, BinJoinPlan,
    PlanNode, UnitFamily,
};
pub use cost::{CostMode, CostModel};
pub use order::{
    choose_order, compression_flags, crystal_order, greedy_matching_order, trindexing_groups, Group, OrderKind,
    WOptOrder,
};
pub use shares::{hypercube_shares, HypercubeShares};
