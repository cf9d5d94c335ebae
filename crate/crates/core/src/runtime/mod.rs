//! Worker runtime: transports, round-based exchange, records and joins.

pub mod batch;
pub mod budget;
pub mod comm;
pub mod cpi;
pub mod join;
pub mod record;
pub mod transport;

pub use budget::{current_memory_bytes, peak_memory_bytes, Budget};
pub use comm::{Comm, CommStats, Outbox};
pub use join::{key_hash, HashJoin, JoinConfig, JoinStats};
pub use record::{Relation, Schema};
pub use transport::{thread_cluster, TcpTransport, ThreadTransport, Transport};
