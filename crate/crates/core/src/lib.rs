//! Distributed subgraph matching over a worker/channel runtime.
//!
//! Four strategies share one substrate: binary joins over star and clique
//! units ([`Strategy::BinJoin`]), vertex-at-a-time worst-case optimal joins
//! ([`Strategy::WOptJoin`]), hypercube shares ([`Strategy::ShrCube`]) and full
//! replication ([`Strategy::FullRep`]). Batching, triangle indexing and
//! compression can be switched on independently for the two join strategies.

pub mod error;
pub mod graph;
pub mod intersect;
pub mod oracle;
pub mod partition;
pub mod planner;
pub mod query;
pub mod runtime;
pub mod strategies;

pub use error::{Error, Result};
pub use graph::{DataGraph, GraphStats, Label, VertexId};
pub use partition::{GraphPartition, PartitionMode, Placement};
pub use query::{PartialOrder, QueryGraph};

pub use strategies::{run, ExecutionPlan, OptFlags, OutputMode, RunResult, Strategy, StrategyConfig};
