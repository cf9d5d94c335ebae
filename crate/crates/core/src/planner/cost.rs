use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::graph::{DataGraph, Label, VertexId};
use crate::query::{bit, members, QueryGraph, VertexSet, MAX_QUERY_VERTICES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CostMode {
    /// Erdős–Rényi closed form.
    #[default]
    Er,
    /// Stars costed from the data's falling-factorial degree moments; other patterns as `Er`.
    DegreeStats,
}

impl FromStr for CostMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "er" => Ok(CostMode::Er),
            "degree" | "degree-stats" | "degree_stats" => Ok(CostMode::DegreeStats),
            _ => Err(Error::Config(format!("unknown cost model {s:?}"))),
        }
    }
}

impl fmt::Display for CostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostMode::Er => "er",
            CostMode::DegreeStats => "degree-stats",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CostModel {
    mode: CostMode,
    n: f64,
    m: f64,
    label_freq: BTreeMap<Label, usize>,
    /// `falling[k] = Σ_u d(u)·(d(u)-1)···(d(u)-k+1)`.
    falling: Vec<f64>,
}

impl CostModel {
    pub fn er(n: usize, m: usize) -> Self {
        CostModel {
            mode: CostMode::Er,
            n: n as f64,
            m: m as f64,
            label_freq: BTreeMap::new(),
            falling: Vec::new(),
        }
    }

    pub fn from_graph(g: &DataGraph, mode: CostMode) -> Self {
        let stats = g.stats();
        let mut falling = vec![0.0; MAX_QUERY_VERTICES];
        if mode == CostMode::DegreeStats {
            for u in 0..g.num_vertices() as VertexId {
                let d = g.degree(u) as f64;
                let mut acc = 1.0;
                for (k, slot) in falling.iter_mut().enumerate() {
                    *slot += acc;
                    acc *= d - k as f64;
                    if acc <= 0.0 {
                        break;
                    }
                }
            }
        }
        CostModel {
            mode,
            n: stats.num_vertices as f64,
            m: stats.num_edges as f64,
            label_freq: stats.label_frequencies,
            falling,
        }
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    pub fn label_frequencies(&self) -> &BTreeMap<Label, usize> {
        &self.label_freq
    }

    /// Expected number of matches of the sub-pattern `(vs, edges)` of `q`.
    /// With `ordered`, automorphic copies are counted once.
    pub fn estimate(&self, q: &QueryGraph, vs: VertexSet, edges: u128, ordered: bool) -> f64 {
        if vs == 0 {
            return 1.0;
        }
        if self.n == 0.0 {
            return 0.0;
        }
        let nv = vs.count_ones() as i32;
        let ne = edges.count_ones() as i32;
        let base = match (self.mode, star_leaves(q, vs, edges)) {
            (CostMode::DegreeStats, Some(k)) if k < self.falling.len() => self.falling[k],
            _ => {
                let p = (2.0 * self.m / (self.n * self.n)).min(1.0);
                self.n.powi(nv) * p.powi(ne)
            }
        };
        let mut est = base;
        if let Some(labels) = q.labels() {
            for v in members(vs) {
                let f = self.label_freq.get(&labels[v]).copied().unwrap_or(0) as f64;
                est *= f / self.n;
            }
        }
        if ordered && !q.is_labelled() {
            est /= pattern_automorphisms(q, vs, edges) as f64;
        }
        est
    }
}

/// Leaf count if the pattern is a star with at least one edge.
fn star_leaves(q: &QueryGraph, vs: VertexSet, edges: u128) -> Option<usize> {
    let ne = edges.count_ones() as usize;
    if ne == 0 || ne + 1 != vs.count_ones() as usize {
        return None;
    }
    members(vs).find_map(|r| {
        let incident = q
            .edges()
            .iter()
            .enumerate()
            .filter(|(i, &(a, b))| edges & (1u128 << i) != 0 && (a == r || b == r))
            .count();
        (incident == ne).then_some(ne)
    })
}

fn pattern_automorphisms(q: &QueryGraph, vs: VertexSet, edges: u128) -> usize {
    let verts: Vec<usize> = members(vs).collect();
    let k = verts.len();
    let mut adj = vec![0u32; k];
    for (i, &(a, b)) in q.edges().iter().enumerate() {
        if edges & (1u128 << i) != 0 {
            let ia = verts.iter().position(|&x| x == a).unwrap();
            let ib = verts.iter().position(|&x| x == b).unwrap();
            adj[ia] |= bit(ib);
            adj[ib] |= bit(ia);
        }
    }
    let label = |i: usize| q.label(verts[i]);
    fn go(adj: &[u32], label: &dyn Fn(usize) -> Option<Label>, perm: &mut Vec<usize>, used: u32) -> usize {
        let v = perm.len();
        if v == adj.len() {
            return 1;
        }
        let mut total = 0;
        for img in 0..adj.len() {
            if used & bit(img) != 0 || adj[img].count_ones() != adj[v].count_ones() || label(img) != label(v) {
                continue;
            }
            if (0..v).all(|u| (adj[u] & bit(v) != 0) == (adj[perm[u]] & bit(img) != 0)) {
                perm.push(img);
                total += go(adj, label, perm, used | bit(img));
                perm.pop();
            }
        }
        total
    }
    go(&adj, &label, &mut Vec::new(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::corpus_query;

    #[test]
    fn er_triangle_closed_form() {
        let t = corpus_query("triangle").unwrap();
        let model = CostModel::er(100, 495);
        let est = model.estimate(&t, t.all(), t.induced_edges(t.all()), true);
        let p: f64 = 990.0 / 10_000.0;
        assert!((est - 1e6 * p.powi(3) / 6.0).abs() < 1e-9);
        assert!((est - 161.7).abs() < 0.1);
    }

    #[test]
    fn single_edge_is_m() {
        let t = corpus_query("triangle").unwrap();
        let e = 1u128;
        let vs = t.edge_vertices(e);
        let model = CostModel::er(50, 200);
        assert!((model.estimate(&t, vs, e, true) - 200.0).abs() < 1e-9);
        assert!((model.estimate(&t, vs, e, false) - 400.0).abs() < 1e-9);
        assert_eq!(model.estimate(&t, 0, 0, true), 1.0);
    }

    #[test]
    fn degree_moments_count_stars_exactly() {
        let g = crate::graph::complete_graph(6);
        let model = CostModel::from_graph(&g, CostMode::DegreeStats);
        let star = QueryGraph::new(4, &[(0, 1), (0, 2), (0, 3)], None).unwrap();
        let all = star.induced_edges(star.all());
        assert_eq!(model.estimate(&star, star.all(), all, false), 6.0 * 5.0 * 4.0 * 3.0);
        assert_eq!(
            model.estimate(&star, star.all(), all, true),
            6.0 * 5.0 * 4.0 * 3.0 / 6.0
        );
    }
}
