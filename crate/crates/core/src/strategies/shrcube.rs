//! Hypercube shares: one round of edge replication, then local matching.

use crate::error::Result;
use crate::graph::VertexId;
use crate::partition::GraphPartition;
use crate::planner::HypercubeShares;
use crate::query::QueryGraph;

use super::local::{local_match, LocalPlan, SparseGraph};
use super::WorkerCtx;

/// Cells that must see data edge `{u, v}`: for every query edge `(a, c)` and
/// both orientations, the cells with `z_a = h_a(u)` and `z_c = h_c(v)`, every
/// other coordinate free. Label filters apply when the query is labelled.
pub fn route_edge(
    q: &QueryGraph,
    shares: &HypercubeShares,
    u: VertexId,
    v: VertexId,
    label: &dyn Fn(VertexId) -> Option<u32>,
    cells: &mut Vec<usize>,
) {
    cells.clear();
    let n = q.n();
    let mut coords = vec![0usize; n];
    for &(a, c) in q.edges() {
        for (x, y) in [(u, v), (v, u)] {
            if q.is_labelled() && (label(x) != q.label(a) || label(y) != q.label(c)) {
                continue;
            }
            let (za, zc) = (shares.coord(a, x), shares.coord(c, y));
            // odometer over the free coordinates
            coords.iter_mut().for_each(|z| *z = 0);
            coords[a] = za;
            coords[c] = zc;
            'cells: loop {
                cells.push(shares.cell_index(&coords));
                for d in (0..n).rev() {
                    if d == a || d == c {
                        continue;
                    }
                    coords[d] += 1;
                    if coords[d] < shares.buckets[d] {
                        continue 'cells;
                    }
                    coords[d] = 0;
                }
                break;
            }
        }
    }
    cells.sort_unstable();
    cells.dedup();
}

pub(crate) fn run(
    ctx: &mut WorkerCtx,
    part: &GraphPartition,
    shares: &HypercubeShares,
    plan: &LocalPlan,
) -> Result<()> {
    let q = ctx.q;
    let me = ctx.comm.worker_id();
    let label = |x: VertexId| part.label(x);
    let mut received: Vec<(VertexId, VertexId)> = Vec::new();
    let budget = &mut ctx.budget;
    ctx.comm.exchange(
        |out| {
            let mut cells = Vec::new();
            for &u in part.owned_vertices() {
                for &v in part.neighbors(u).expect("owned") {
                    // each undirected edge is routed once, by the owner of its smaller end
                    if v <= u {
                        continue;
                    }
                    route_edge(q, shares, u, v, &label, &mut cells);
                    for &cell in &cells {
                        out.push(cell, &[u, v])?;
                    }
                }
            }
            Ok(())
        },
        |_, data| {
            budget.tick()?;
            received.extend(data.chunks_exact(2).map(|p| (p[0], p[1])));
            Ok(())
        },
    )?;
    if me >= shares.cells() {
        return Ok(());
    }
    let local = SparseGraph::from_edges(received, part.labels().cloned());
    ctx.report.local_edges = local.num_edges() as u64;
    let cell = shares.cell_coords(me);
    let sink = &mut ctx.sink;
    local_match(q, &local, plan, ctx.order, &|_| true, &mut ctx.budget, &mut |f| {
        if shares.retains(&cell, f) {
            sink.tuple(f)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::hypercube_shares;
    use crate::query::corpus_query;

    #[test]
    fn triangle_routing_on_27_cells() {
        let t = corpus_query("triangle").unwrap();
        let s = hypercube_shares(&t, 27);
        assert_eq!(s.buckets, vec![3, 3, 3]);
        let mut cells = Vec::new();
        route_edge(&t, &s, 1, 5, &|_| None, &mut cells);
        // 3 query edges x 2 orientations x 3 free values, minus coincidences
        assert!(cells.len() <= 18);
        for &c in &cells {
            let z = s.cell_coords(c);
            let hits = [(0, 1), (0, 2), (1, 2)]
                .iter()
                .any(|&(a, b)| (z[a] == 1 && z[b] == 2) || (z[a] == 2 && z[b] == 1));
            assert!(hits, "{z:?}");
        }
        // every cell that could hold a triangle through (1,5) receives it
        for c in 0..27 {
            let z = s.cell_coords(c);
            let needed = [(0, 1), (0, 2), (1, 2)]
                .iter()
                .any(|&(a, b)| (z[a] == 1 && z[b] == 2) || (z[a] == 2 && z[b] == 1));
            assert_eq!(needed, cells.contains(&c));
        }
    }
}
