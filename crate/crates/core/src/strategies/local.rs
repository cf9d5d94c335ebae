//! Single-machine matcher used by ShrCube cells and FullRep workers.
//!
//! The connected vertex cover is matched by backtracking; every remaining
//! vertex (a bud) only touches the cover, so its candidates are the
//! intersection of its cover neighbors' adjacency lists.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::error::Result;
use crate::graph::{DataGraph, Label, VertexId};
use crate::intersect::{intersect_into, retain_intersection};
use crate::planner::crystal_order;
use crate::query::{bit, members, min_connected_vertex_cover, PartialOrder, QueryGraph, VertexSet};
use crate::runtime::Budget;

pub trait LocalGraph {
    /// Vertices to try for the first cover vertex.
    fn vertex_list(&self) -> Vec<VertexId>;
    /// Sorted neighbors; empty for unknown vertices.
    fn neighbors(&self, u: VertexId) -> &[VertexId];
    fn label(&self, u: VertexId) -> Option<Label>;
}

impl LocalGraph for DataGraph {
    fn vertex_list(&self) -> Vec<VertexId> {
        (0..self.num_vertices() as VertexId).collect()
    }

    fn neighbors(&self, u: VertexId) -> &[VertexId] {
        DataGraph::neighbors(self, u)
    }

    fn label(&self, u: VertexId) -> Option<Label> {
        DataGraph::label(self, u)
    }
}

/// Adjacency over an arbitrary subset of global vertex ids.
#[derive(Clone, Debug, Default)]
pub struct SparseGraph {
    ids: Vec<VertexId>,
    offsets: Vec<usize>,
    adjacency: Vec<VertexId>,
    labels: Option<std::sync::Arc<Vec<Label>>>,
}

impl SparseGraph {
    /// `edges` may hold duplicates and either direction; both directions are stored.
    pub fn from_edges(mut edges: Vec<(VertexId, VertexId)>, labels: Option<std::sync::Arc<Vec<Label>>>) -> Self {
        let n = edges.len();
        edges.reserve(n);
        for i in 0..n {
            let (a, b) = edges[i];
            edges.push((b, a));
        }
        edges.retain(|&(a, b)| a != b);
        edges.sort_unstable();
        edges.dedup();
        let mut ids = Vec::new();
        let mut offsets = vec![0];
        let mut adjacency = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if ids.last() != Some(&a) {
                if !ids.is_empty() {
                    offsets.push(adjacency.len());
                }
                ids.push(a);
            }
            adjacency.push(b);
        }
        if !ids.is_empty() {
            offsets.push(adjacency.len());
        }
        SparseGraph {
            ids,
            offsets,
            adjacency,
            labels,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.ids.len()
    }

    /// Distinct undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.len() / 2
    }
}

impl LocalGraph for SparseGraph {
    fn vertex_list(&self) -> Vec<VertexId> {
        self.ids.clone()
    }

    fn neighbors(&self, u: VertexId) -> &[VertexId] {
        match self.ids.binary_search(&u) {
            Ok(i) => &self.adjacency[self.offsets[i]..self.offsets[i + 1]],
            Err(_) => &[],
        }
    }

    fn label(&self, u: VertexId) -> Option<Label> {
        self.labels.as_ref().map(|l| l[u as usize])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalPlan {
    /// Cover vertices in matching order.
    pub core: Vec<usize>,
    /// Earlier core neighbors of each core vertex.
    pub core_sources: Vec<VertexSet>,
    /// Non-cover vertices; all their neighbors are in the cover.
    pub buds: Vec<usize>,
}

impl LocalPlan {
    pub fn new(q: &QueryGraph) -> Self {
        let cover = min_connected_vertex_cover(q);
        let order = crystal_order(q, None).order;
        let k = cover.count_ones() as usize;
        let core: Vec<usize> = order[..k].to_vec();
        debug_assert!(core.iter().all(|&v| cover & bit(v) != 0));
        let mut before = 0;
        let core_sources = core
            .iter()
            .map(|&v| {
                let s = q.adj(v) & before;
                before |= bit(v);
                s
            })
            .collect();
        LocalPlan {
            core,
            core_sources,
            buds: order[k..].to_vec(),
        }
    }

    pub fn first(&self) -> usize {
        self.core[0]
    }
}

struct Matcher<'a, G: LocalGraph + ?Sized> {
    q: &'a QueryGraph,
    g: &'a G,
    plan: &'a LocalPlan,
    order: &'a PartialOrder,
    budget: &'a mut Budget,
    f: Vec<VertexId>,
    bound: VertexSet,
    sink: &'a mut dyn FnMut(&[VertexId]) -> Result<()>,
    scratch: Vec<Vec<VertexId>>,
}

impl<G: LocalGraph + ?Sized> Matcher<'_, G> {
    fn fits(&self, v: usize, c: VertexId) -> bool {
        if let Some(l) = self.q.label(v) {
            if self.g.label(c) != Some(l) {
                return false;
            }
        }
        for u in members(self.bound) {
            let x = self.f[u];
            if x == c {
                return false;
            }
            if !self.order.is_empty() && (self.order.less(u, v) && x >= c || self.order.less(v, u) && c >= x) {
                return false;
            }
        }
        true
    }

    fn core(&mut self, i: usize) -> Result<()> {
        if i == self.plan.core.len() {
            return self.buds();
        }
        let v = self.plan.core[i];
        let mut srcs = members(self.plan.core_sources[i]);
        let first = srcs
            .next()
            .expect("core vertices after the first have earlier neighbors");
        let mut cands = std::mem::take(&mut self.scratch[i]);
        cands.clear();
        cands.extend_from_slice(self.g.neighbors(self.f[first]));
        for s in srcs {
            retain_intersection(&mut cands, self.g.neighbors(self.f[s]));
        }
        for &c in &cands {
            self.budget.tick()?;
            if self.fits(v, c) {
                self.f[v] = c;
                self.bound |= bit(v);
                let r = self.core(i + 1);
                self.bound &= !bit(v);
                r?;
            }
        }
        self.scratch[i] = cands;
        Ok(())
    }

    fn buds(&mut self) -> Result<()> {
        if self.plan.buds.is_empty() {
            return (self.sink)(&self.f);
        }
        // buds with the same attachment share one candidate list
        let mut lists: HashMap<VertexSet, Vec<VertexId>> = HashMap::new();
        let mut per_bud = Vec::with_capacity(self.plan.buds.len());
        for &b in &self.plan.buds {
            let att = self.q.adj(b);
            if let Entry::Vacant(slot) = lists.entry(att) {
                let mut it = members(att);
                let a0 = it.next().expect("buds have a neighbor");
                let mut c = self.g.neighbors(self.f[a0]).to_vec();
                let mut tmp = Vec::new();
                for a in it {
                    tmp.clear();
                    intersect_into(&c, self.g.neighbors(self.f[a]), &mut tmp);
                    std::mem::swap(&mut c, &mut tmp);
                }
                if c.is_empty() {
                    return Ok(());
                }
                slot.insert(c);
            }
            per_bud.push(att);
        }
        let lists: Vec<&Vec<VertexId>> = per_bud.iter().map(|a| &lists[a]).collect();
        self.bud(0, &lists)
    }

    fn bud(&mut self, j: usize, lists: &[&Vec<VertexId>]) -> Result<()> {
        if j == self.plan.buds.len() {
            return (self.sink)(&self.f);
        }
        let v = self.plan.buds[j];
        for &c in lists[j] {
            self.budget.tick()?;
            if self.fits(v, c) {
                self.f[v] = c;
                self.bound |= bit(v);
                let r = self.bud(j + 1, lists);
                self.bound &= !bit(v);
                r?;
            }
        }
        Ok(())
    }
}

/// Enumerates all matches of `q` in `g` whose first cover vertex maps to a
/// vertex accepted by `seed`. Tuples are indexed by query vertex.
pub fn local_match<G: LocalGraph + ?Sized>(
    q: &QueryGraph,
    g: &G,
    plan: &LocalPlan,
    order: &PartialOrder,
    seed: &dyn Fn(VertexId) -> bool,
    budget: &mut Budget,
    sink: &mut dyn FnMut(&[VertexId]) -> Result<()>,
) -> Result<()> {
    let v0 = plan.first();
    let mut m = Matcher {
        q,
        g,
        plan,
        order,
        budget,
        f: vec![0; q.n()],
        bound: 0,
        sink,
        scratch: vec![Vec::new(); plan.core.len()],
    };
    for u in g.vertex_list() {
        if !seed(u) || g.neighbors(u).is_empty() && q.n() > 1 {
            continue;
        }
        m.budget.tick()?;
        if m.fits(v0, u) {
            m.f[v0] = u;
            m.bound = bit(v0);
            m.core(1)?;
            m.bound = 0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gnp;
    use crate::oracle::brute_force_with_order;
    use crate::query::{corpus, symmetry_break_order};

    #[test]
    fn matches_oracle_on_corpus() {
        let g = gnp(40, 0.25, 7);
        for (name, q) in corpus() {
            let order = symmetry_break_order(&q);
            let plan = LocalPlan::new(&q);
            let mut got = Vec::new();
            local_match(&q, &g, &plan, &order, &|_| true, &mut Budget::unlimited(), &mut |t| {
                got.push(t.to_vec());
                Ok(())
            })
            .unwrap();
            got.sort();
            let want = brute_force_with_order(&q, &g, &order, false, 1e12).unwrap();
            assert_eq!(got, want, "{name}");
        }
    }

    #[test]
    fn sparse_graph_dedups_and_symmetrizes() {
        let s = SparseGraph::from_edges(vec![(5, 9), (9, 5), (5, 9), (9, 2), (3, 3)], None);
        assert_eq!(s.num_edges(), 2);
        assert_eq!(s.vertex_list(), vec![2, 5, 9]);
        assert_eq!(LocalGraph::neighbors(&s, 9), &[2, 5]);
        assert!(LocalGraph::neighbors(&s, 4).is_empty());
    }
}
