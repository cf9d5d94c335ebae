//! Bushy binary joins over star and clique units.

use std::ops::RangeInclusive;

use crate::error::Result;
use crate::graph::VertexId;
use crate::intersect::retain_intersection;
use crate::partition::GraphPartition;
use crate::planner::{unit_root, BinJoinPlan, PlanNode};
use crate::query::{bit, members, JoinUnit, PartialOrder, QueryGraph, VertexSet};
use crate::runtime::batch::{batch_ranges, label_candidates};
use crate::runtime::record::order_ok;
use crate::runtime::{key_hash, Budget, HashJoin, JoinConfig, Relation, Schema};

use super::WorkerCtx;

type Batch = (usize, RangeInclusive<VertexId>);

pub(crate) fn run(ctx: &mut WorkerCtx, part: &GraphPartition, plan: &BinJoinPlan) -> Result<()> {
    let batches: Vec<Option<Batch>> = match plan.batching_vertex {
        Some(b) if ctx.cfg.opts.batching => {
            let labels = part.labels().map(|l| l.as_slice());
            let cands = label_candidates(part.num_vertices(), labels, ctx.q.label(b));
            batch_ranges(&cands, ctx.cfg.batch_size)
                .into_iter()
                .map(|r| Some((b, r)))
                .collect()
        }
        _ => vec![None],
    };
    for batch in batches {
        ctx.report.batches += 1;
        let rel = eval(ctx, part, &plan.root, batch.as_ref())?;
        ctx.sink.relation(&rel, ctx.order)?;
    }
    Ok(())
}

fn eval(ctx: &mut WorkerCtx, part: &GraphPartition, node: &PlanNode, batch: Option<&Batch>) -> Result<Relation> {
    match node {
        PlanNode::Leaf { unit, compressed, .. } => {
            let rel = enumerate_unit(ctx.q, part, unit, *compressed, ctx.order, batch, &mut ctx.budget)?;
            ctx.report.intermediate_records += rel.len() as u64;
            Ok(rel)
        }
        PlanNode::Join { left, right, key } => {
            let l = eval(ctx, part, left, batch)?;
            let r = eval(ctx, part, right, batch)?;
            let out = join(ctx, l, r, *key)?;
            ctx.report.intermediate_records += out.len() as u64;
            Ok(out)
        }
    }
}

struct UnitEnum<'a> {
    q: &'a QueryGraph,
    part: &'a GraphPartition,
    order: &'a PartialOrder,
    clique: bool,
    /// Non-root vertices kept concrete, then the compressed ones.
    concrete: Vec<usize>,
    compressed: Vec<usize>,
    batch: Option<&'a Batch>,
    f: Vec<(usize, VertexId)>,
    out: Relation,
}

impl UnitEnum<'_> {
    fn fits(&self, v: usize, c: VertexId) -> bool {
        if let Some(l) = self.q.label(v) {
            if self.part.label(c) != Some(l) {
                return false;
            }
        }
        if let Some((b, r)) = self.batch {
            if *b == v && !r.contains(&c) {
                return false;
            }
        }
        self.f.iter().all(|&(u, x)| x != c && order_ok(self.order, v, c, u, x))
    }

    /// Candidates for the next non-root member: the root's neighbors, and for
    /// clique units also adjacent to every member bound so far.
    fn candidates(&self, root_nb: &[VertexId]) -> Vec<VertexId> {
        let mut c = root_nb.to_vec();
        if self.clique {
            for &(_, x) in &self.f[1..] {
                if c.is_empty() {
                    break;
                }
                retain_intersection(&mut c, self.part.local_neighbors(x));
            }
        }
        c
    }

    fn go(&mut self, i: usize, root_nb: &[VertexId], budget: &mut Budget) -> Result<()> {
        if i < self.concrete.len() {
            let v = self.concrete[i];
            for c in self.candidates(root_nb) {
                budget.tick()?;
                if self.fits(v, c) {
                    self.f.push((v, c));
                    self.go(i + 1, root_nb, budget)?;
                    self.f.pop();
                }
            }
            return Ok(());
        }
        let mut rec: Vec<u32> = self.f.iter().map(|&(_, x)| x).collect();
        if !self.compressed.is_empty() {
            let base = self.candidates(root_nb);
            for &v in &self.compressed {
                let at = rec.len();
                rec.push(0);
                rec.extend(base.iter().copied().filter(|&c| self.fits(v, c)));
                let len = rec.len() - at - 1;
                if len == 0 {
                    return Ok(());
                }
                rec[at] = len as u32;
            }
        }
        self.out.push(&rec);
        Ok(())
    }
}

fn enumerate_unit(
    q: &QueryGraph,
    part: &GraphPartition,
    unit: &JoinUnit,
    compressed: VertexSet,
    order: &PartialOrder,
    batch: Option<&Batch>,
    budget: &mut Budget,
) -> Result<Relation> {
    let root = unit_root(unit, order);
    let others = unit.vertices() & !bit(root);
    let concrete: Vec<usize> = members(others & !compressed).collect();
    let comp: Vec<usize> = members(others & compressed).collect();
    let mut schema_conc = vec![root];
    schema_conc.extend(&concrete);
    let mut e = UnitEnum {
        q,
        part,
        order,
        clique: unit.is_clique(),
        concrete,
        compressed: comp.clone(),
        batch,
        f: Vec::with_capacity(q.n()),
        out: Relation::new(Schema::new(schema_conc, comp)),
    };
    for &u in part.owned_vertices() {
        budget.tick()?;
        if !e.fits(root, u) {
            continue;
        }
        let nb = part.neighbors(u).expect("owned");
        if nb.is_empty() {
            continue;
        }
        e.f.push((root, u));
        e.go(0, nb, budget)?;
        e.f.pop();
    }
    Ok(e.out)
}

fn join(ctx: &mut WorkerCtx, l: Relation, r: Relation, key: VertexSet) -> Result<Relation> {
    let keys: Vec<usize> = members(key).collect();
    let ls = l.schema.clone();
    let rs = r.schema.clone();
    let lkey: Vec<usize> = keys.iter().map(|&v| ls.position(v).expect("key is concrete")).collect();
    let rkey: Vec<usize> = keys.iter().map(|&v| rs.position(v).expect("key is concrete")).collect();
    let threshold = ctx.cfg.opts.batching.then_some(ctx.cfg.batch_size);
    let mut hj = HashJoin::new(
        ls.clone(),
        rs.clone(),
        &keys,
        JoinConfig {
            threshold,
            spill_dir: ctx.cfg.spill_dir.clone(),
        },
    );
    let w = ctx.comm.num_workers() as u64;
    let budget = &mut ctx.budget;
    ctx.comm.exchange(
        |out| {
            for rec in l.iter() {
                let h = key_hash(lkey.iter().map(|&p| rec[p]));
                out.push_parts((h % w) as usize, &[&[0], rec])?;
            }
            for rec in r.iter() {
                let h = key_hash(rkey.iter().map(|&p| rec[p]));
                out.push_parts((h % w) as usize, &[&[1], rec])?;
            }
            Ok(())
        },
        |_, data| {
            let mut at = 0;
            while at < data.len() {
                budget.tick()?;
                let tag = data[at];
                at += 1;
                if tag == 0 {
                    let len = ls.record_len(&data[at..]);
                    hj.push_left(&data[at..at + len])?;
                    at += len;
                } else {
                    let len = rs.record_len(&data[at..]);
                    hj.push_right(&data[at..at + len])?;
                    at += len;
                }
            }
            Ok(())
        },
    )?;
    drop(l);
    drop(r);

    let order = ctx.order;
    let l_only: Vec<(usize, usize)> = ls
        .concrete
        .iter()
        .enumerate()
        .filter(|(_, v)| key & bit(**v) == 0)
        .map(|(p, &v)| (p, v))
        .collect();
    let r_extra: Vec<(usize, usize)> = rs
        .concrete
        .iter()
        .enumerate()
        .filter(|(_, v)| key & bit(**v) == 0)
        .map(|(p, &v)| (p, v))
        .collect();
    let mut out_schema = ls.clone();
    out_schema.concrete.extend(r_extra.iter().map(|&(_, v)| v));
    out_schema.compressed.extend(&rs.compressed);
    let mut out = Relation::new(out_schema);
    let mut bindings: Vec<(usize, VertexId)> = Vec::new();

    let mut combine = |lr: &[u32], rr: &[u32], buf: &mut Vec<u32>| -> bool {
        for &(p, v) in &r_extra {
            let x = rr[p];
            for (i, &u) in ls.concrete.iter().enumerate() {
                if lr[i] == x || !order_ok(order, v, x, u, lr[i]) {
                    return false;
                }
            }
        }
        buf.extend_from_slice(&lr[..ls.concrete.len()]);
        buf.extend(r_extra.iter().map(|&(p, _)| rr[p]));
        bindings.clear();
        bindings.extend(r_extra.iter().map(|&(p, v)| (v, rr[p])));
        for (arr, &a) in ls.arrays(lr).zip(&ls.compressed) {
            if filter_into(arr, a, &bindings, order, buf) == 0 {
                return false;
            }
        }
        bindings.clear();
        bindings.extend(l_only.iter().map(|&(p, v)| (v, lr[p])));
        for (arr, &a) in rs.arrays(rr).zip(&rs.compressed) {
            if filter_into(arr, a, &bindings, order, buf) == 0 {
                return false;
            }
        }
        true
    };
    let stats = hj.finish(&mut ctx.budget, &mut combine, &mut |data, n| {
        out.extend_counted(data, n);
        Ok(())
    })?;
    ctx.report.join.merge(&stats);
    Ok(out)
}

/// Appends `[len, values..]` keeping the values of compressed vertex `a`
/// consistent with every binding.
fn filter_into(
    arr: &[u32],
    a: usize,
    bindings: &[(usize, VertexId)],
    order: &PartialOrder,
    out: &mut Vec<u32>,
) -> usize {
    let at = out.len();
    out.push(0);
    out.extend(
        arr.iter()
            .copied()
            .filter(|&c| bindings.iter().all(|&(v, x)| c != x && order_ok(order, a, c, v, x))),
    );
    let len = out.len() - at - 1;
    out[at] = len as u32;
    len
}
