//! Full replication: every worker holds the whole graph and matches the
//! vertices of its own seed class without communicating.

use crate::error::Result;
use crate::graph::{DataGraph, VertexId};

use super::local::{local_match, LocalPlan};
use super::WorkerCtx;

pub(crate) fn run(ctx: &mut WorkerCtx, g: &DataGraph, plan: &LocalPlan) -> Result<()> {
    let w = ctx.comm.num_workers() as VertexId;
    let me = ctx.comm.worker_id() as VertexId;
    let sink = &mut ctx.sink;
    local_match(ctx.q, g, plan, ctx.order, &|u| u % w == me, &mut ctx.budget, &mut |f| {
        sink.tuple(f)
    })
}
