//! Vertex-at-a-time worst-case optimal join.

use crate::error::Result;
use crate::partition::GraphPartition;
use crate::planner::WOptOrder;
use crate::runtime::batch::{batch_ranges, label_candidates};
use crate::runtime::cpi::{extend_level, Level};
use crate::runtime::{Relation, Schema};

use super::WorkerCtx;

pub(crate) fn run(ctx: &mut WorkerCtx, part: &GraphPartition, plan: &WOptOrder) -> Result<()> {
    let q = ctx.q;
    let n = q.n();
    let v1 = plan.order[0];
    let label1 = q.label(v1);
    let labels = part.labels().map(|l| l.as_slice());
    let ranges: Vec<Option<std::ops::RangeInclusive<u32>>> = if ctx.cfg.opts.batching {
        let cands = label_candidates(part.num_vertices(), labels, label1);
        batch_ranges(&cands, ctx.cfg.batch_size).into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    ctx.report.level_counts = vec![0; n];
    for range in ranges {
        ctx.report.batches += 1;
        let mut rel = Relation::new(Schema::new(vec![v1], vec![]));
        for &u in part.owned_vertices() {
            if range.as_ref().is_some_and(|r| !r.contains(&u)) {
                continue;
            }
            if label1.is_some() && part.label(u) != label1 {
                continue;
            }
            rel.push(&[u]);
        }
        ctx.report.level_counts[0] += rel.len() as u64;
        for i in 1..n {
            let level = Level {
                new_vertex: plan.order[i],
                groups: &plan.groups[i],
                compress: plan.compressed[i],
                label: q.label(plan.order[i]),
            };
            if i > 1 {
                ctx.report.intermediate_records += rel.len() as u64;
            }
            rel = extend_level(ctx.comm, part, rel, &level, ctx.order, &mut ctx.budget)?;
            ctx.report.level_counts[i] += rel.len() as u64;
        }
        ctx.sink.relation(&rel, ctx.order)?;
    }
    Ok(())
}
