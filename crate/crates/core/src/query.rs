//! Query graphs and the combinatorics the planners need from them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::graph::{Label, VertexId};

/// Largest supported query; planners search over vertex and edge subsets.
pub const MAX_QUERY_VERTICES: usize = 16;

/// Bit set over query vertices.
pub type VertexSet = u32;

#[inline]
pub fn bit(v: usize) -> VertexSet {
    1 << v
}

pub fn members(set: VertexSet) -> impl Iterator<Item = usize> {
    (0..32).filter(move |&v| set & (1 << v) != 0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    n: usize,
    adj: Vec<VertexSet>,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<Label>>,
}

impl QueryGraph {
    /// Connected simple graph on `n` vertices. Duplicate edges are merged.
    pub fn new(n: usize, edges: &[(usize, usize)], labels: Option<Vec<Label>>) -> Result<Self> {
        if n == 0 || n > MAX_QUERY_VERTICES {
            return Err(Error::InvalidQuery(format!(
                "query must have 1..={MAX_QUERY_VERTICES} vertices, got {n}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidQuery(format!("{} labels for {n} vertices", l.len())));
            }
        }
        let mut adj = vec![0; n];
        let mut list = Vec::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidQuery(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidQuery(format!("self-loop at {a}")));
            }
            adj[a] |= bit(b);
            adj[b] |= bit(a);
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let q = QueryGraph {
            n,
            adj,
            edges: list,
            labels,
        };
        if !q.is_connected(q.all()) {
            return Err(Error::InvalidQuery("query graph is not connected".into()));
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn all(&self) -> VertexSet {
        ((1u64 << self.n) - 1) as VertexSet
    }

    /// Edges as `(a, b)` with `a < b`, sorted. Edge indices refer to this order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn adj(&self, v: usize) -> VertexSet {
        self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] & bit(b) != 0
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> Option<Label> {
        self.labels.as_ref().map(|l| l[v])
    }

    pub fn is_labelled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn without_labels(&self) -> QueryGraph {
        QueryGraph {
            labels: None,
            ..self.clone()
        }
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Result<QueryGraph> {
        QueryGraph::new(self.n, &self.edges, Some(labels))
    }

    /// Vertices touched by a set of edges (bit `i` = edge index `i`).
    pub fn edge_vertices(&self, edges: u128) -> VertexSet {
        self.edges
            .iter()
            .enumerate()
            .filter(|(i, _)| edges & (1u128 << i) != 0)
            .fold(0, |acc, (_, &(a, b))| acc | bit(a) | bit(b))
    }

    /// Edges with both endpoints inside `vs`.
    pub fn induced_edges(&self, vs: VertexSet) -> u128 {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| vs & bit(a) != 0 && vs & bit(b) != 0)
            .fold(0, |acc, (i, _)| acc | (1u128 << i))
    }

    pub fn is_connected(&self, vs: VertexSet) -> bool {
        if vs == 0 {
            return true;
        }
        let start = vs.trailing_zeros() as usize;
        let mut seen = bit(start);
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let next = self.adj[v] & vs & !seen;
            seen |= next;
            frontier |= next;
        }
        seen == vs
    }

    /// Whether an edge subset forms a connected subgraph.
    pub fn edges_connected(&self, edges: u128) -> bool {
        let vs = self.edge_vertices(edges);
        if vs == 0 {
            return true;
        }
        let start = vs.trailing_zeros() as usize;
        let mut seen = bit(start);
        loop {
            let mut grown = seen;
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                if edges & (1u128 << i) != 0 && (seen & (bit(a) | bit(b))) != 0 {
                    grown |= bit(a) | bit(b);
                }
            }
            if grown == seen {
                return seen == vs;
            }
            seen = grown;
        }
    }

    pub fn is_clique(&self, vs: VertexSet) -> bool {
        members(vs).all(|v| self.adj[v] & vs == vs & !bit(v))
    }

    /// Induced subquery on `vs`; returns it with `old_of_new[new] = old`.
    pub fn induced(&self, vs: VertexSet) -> Result<(QueryGraph, Vec<usize>)> {
        let old_of_new: Vec<usize> = members(vs).collect();
        let mut new_of_old = vec![usize::MAX; self.n];
        for (i, &o) in old_of_new.iter().enumerate() {
            new_of_old[o] = i;
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|&&(a, b)| vs & bit(a) != 0 && vs & bit(b) != 0)
            .map(|&(a, b)| (new_of_old[a], new_of_old[b]))
            .collect();
        let labels = self.labels.as_ref().map(|l| old_of_new.iter().map(|&o| l[o]).collect());
        Ok((QueryGraph::new(old_of_new.len(), &edges, labels)?, old_of_new))
    }

    /// Parses the text format: a vertex count, then `i j` edge lines, then an
    /// optional `labels` line followed by `i L` lines. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        let mut labels: Option<BTreeMap<usize, Label>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if n.is_none() {
                n = Some(
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(line, "expected vertex count"))?,
                );
                continue;
            }
            if t.eq_ignore_ascii_case("labels") {
                if labels.is_some() {
                    return Err(Error::parse(line, "duplicate labels section"));
                }
                labels = Some(BTreeMap::new());
                continue;
            }
            let toks: Vec<&str> = t.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::parse(line, "expected two integers"));
            }
            let a: usize = toks[0].parse().map_err(|_| Error::parse(line, "bad vertex index"))?;
            match labels.as_mut() {
                None => {
                    let b: usize = toks[1].parse().map_err(|_| Error::parse(line, "bad vertex index"))?;
                    edges.push((a, b));
                }
                Some(map) => {
                    let l: Label = toks[1].parse().map_err(|_| Error::parse(line, "bad label"))?;
                    if map.insert(a, l).is_some() {
                        return Err(Error::parse(line, format!("vertex {a} labelled twice")));
                    }
                }
            }
        }
        let n = n.ok_or_else(|| Error::InvalidQuery("empty query file".into()))?;
        let labels = match labels {
            None => None,
            Some(map) => {
                if map.len() != n || map.keys().any(|&k| k >= n) {
                    return Err(Error::InvalidQuery(
                        "labels must cover every query vertex exactly once".into(),
                    ));
                }
                Some(map.into_values().collect())
            }
        };
        QueryGraph::new(n, &edges, labels)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        QueryGraph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for &(a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        if let Some(l) = &self.labels {
            s.push_str("labels\n");
            for (v, x) in l.iter().enumerate() {
                s.push_str(&format!("{v} {x}\n"));
            }
        }
        s
    }
}

impl fmt::Display for QueryGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(n={}, E={{", self.n)?;
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}-{b}")?;
        }
        f.write_str("})")
    }
}

/// All label-respecting automorphisms, each as `perm[v] = image of v`.
pub fn automorphisms(q: &QueryGraph) -> Vec<Vec<usize>> {
    fn extend(q: &QueryGraph, perm: &mut Vec<usize>, used: VertexSet, out: &mut Vec<Vec<usize>>) {
        let v = perm.len();
        if v == q.n() {
            out.push(perm.clone());
            return;
        }
        for img in 0..q.n() {
            if used & bit(img) != 0 || q.degree(img) != q.degree(v) || q.label(img) != q.label(v) {
                continue;
            }
            let consistent = (0..v).all(|u| q.has_edge(u, v) == q.has_edge(perm[u], img));
            if consistent {
                perm.push(img);
                extend(q, perm, used | bit(img), out);
                perm.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(q, &mut Vec::with_capacity(q.n()), 0, &mut out);
    out
}

/// A strict partial order on query vertices, kept transitively closed.
/// `less(a, b)` means a match must satisfy `f(a) < f(b)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialOrder {
    greater: Vec<VertexSet>,
}

impl PartialOrder {
    pub fn empty(n: usize) -> Self {
        PartialOrder { greater: vec![0; n] }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut o = PartialOrder::empty(n);
        for &(a, b) in pairs {
            o.add(a, b)?;
        }
        Ok(o)
    }

    pub fn n(&self) -> usize {
        self.greater.len()
    }

    /// Adds `a < b` and closes transitively. Rejects cycles.
    pub fn add(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b || self.less(b, a) {
            return Err(Error::InvalidQuery(format!("order {a}<{b} creates a cycle")));
        }
        let up = self.greater[b] | bit(b);
        for x in 0..self.n() {
            if x == a || self.less(x, a) {
                self.greater[x] |= up;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn less(&self, a: usize, b: usize) -> bool {
        self.greater[a] & bit(b) != 0
    }

    /// Vertices that must map above `a`.
    #[inline]
    pub fn above(&self, a: usize) -> VertexSet {
        self.greater[a]
    }

    /// Vertices that must map below `b`.
    pub fn below(&self, b: usize) -> VertexSet {
        (0..self.n()).filter(|&a| self.less(a, b)).fold(0, |s, a| s | bit(a))
    }

    pub fn is_empty(&self) -> bool {
        self.greater.iter().all(|&g| g == 0)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|a| members(self.greater[a]).map(move |b| (a, b)))
            .collect()
    }

    /// Keeps only pairs with both ends in `vs`, renumbered by `old_of_new`.
    pub fn project(&self, old_of_new: &[usize]) -> PartialOrder {
        let mut o = PartialOrder::empty(old_of_new.len());
        for (i, &a) in old_of_new.iter().enumerate() {
            for (j, &b) in old_of_new.iter().enumerate() {
                if self.less(a, b) {
                    o.greater[i] |= bit(j);
                }
            }
        }
        o
    }

    /// Checks a complete assignment `f[v]`.
    pub fn is_satisfied(&self, f: &[VertexId]) -> bool {
        (0..self.n()).all(|a| members(self.greater[a]).all(|b| f[a] < f[b]))
    }
}

impl fmt::Display for PartialOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.pairs();
        if p.is_empty() {
            return f.write_str("{}");
        }
        write!(f, "{{{}}}", p.iter().map(|(a, b)| format!("v{a}<v{b}")).join(", "))
    }
}

/// Symmetry-breaking order: one match per automorphism class satisfies it.
pub fn symmetry_break_order(q: &QueryGraph) -> PartialOrder {
    let mut group = automorphisms(q);
    let mut order = PartialOrder::empty(q.n());
    while let Some(v) = (0..q.n()).find(|&v| group.iter().any(|g| g[v] != v)) {
        let orbit: VertexSet = group.iter().fold(0, |s, g| s | bit(g[v]));
        for u in members(orbit & !bit(v)) {
            order
                .add(v, u)
                .expect("orbit constraints point away from the fixed representative");
        }
        group.retain(|g| g[v] == v);
    }
    order
}

/// Smallest vertex set covering every edge with a connected induced subgraph;
/// among minimum covers the lexicographically smallest. A query without edges
/// gets `{v0}`.
pub fn min_connected_vertex_cover(q: &QueryGraph) -> VertexSet {
    if q.num_edges() == 0 {
        return bit(0);
    }
    for k in 1..=q.n() {
        for combo in (0..q.n()).combinations(k) {
            let vs = combo.iter().fold(0, |s, &v| s | bit(v));
            let covers = q.edges().iter().all(|&(a, b)| vs & (bit(a) | bit(b)) != 0);
            if covers && q.is_connected(vs) {
                return vs;
            }
        }
    }
    unreachable!("the full vertex set is a connected cover")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinUnit {
    Star { root: usize, leaves: VertexSet },
    Clique { vertices: VertexSet },
}

impl JoinUnit {
    pub fn vertices(&self) -> VertexSet {
        match *self {
            JoinUnit::Star { root, leaves } => bit(root) | leaves,
            JoinUnit::Clique { vertices } => vertices,
        }
    }

    pub fn edge_mask(&self, q: &QueryGraph) -> u128 {
        match *self {
            JoinUnit::Star { root, leaves } => members(leaves)
                .map(|l| q.edge_index(root, l).expect("star edge exists"))
                .fold(0, |m, i| m | (1u128 << i)),
            JoinUnit::Clique { vertices } => q.induced_edges(vertices),
        }
    }

    pub fn is_clique(&self) -> bool {
        matches!(self, JoinUnit::Clique { .. })
    }
}

impl fmt::Display for JoinUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: VertexSet| members(s).map(|v| format!("v{v}")).join(",");
        match *self {
            JoinUnit::Star { root, leaves } => write!(f, "Star(v{root}; {{{}}})", list(leaves)),
            JoinUnit::Clique { vertices } => write!(f, "Clique({{{}}})", list(vertices)),
        }
    }
}

/// Maximal stars at every vertex, plus every clique of three or more vertices
/// when the partition carries triangle closing edges.
pub fn enumerate_join_units(q: &QueryGraph, triangle_indexed: bool) -> Vec<JoinUnit> {
    let mut units: Vec<JoinUnit> = (0..q.n())
        .filter(|&v| q.adj(v) != 0)
        .map(|v| JoinUnit::Star {
            root: v,
            leaves: q.adj(v),
        })
        .collect();
    if triangle_indexed {
        units.extend(cliques(q, 3).into_iter().map(|vertices| JoinUnit::Clique { vertices }));
    }
    units
}

/// Every vertex set of size at least `min_size` that induces a complete graph.
pub fn cliques(q: &QueryGraph, min_size: usize) -> Vec<VertexSet> {
    (1..(1u32 << q.n()))
        .filter(|s| s.count_ones() as usize >= min_size && q.is_clique(*s))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crystal {
    /// Cover vertices every bud attaches to.
    pub clique: VertexSet,
    pub buds: VertexSet,
    /// False when the attachment set does not induce a complete graph (e.g. the square).
    pub is_clique: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreCrystal {
    pub core: VertexSet,
    pub crystals: Vec<Crystal>,
}

pub fn core_crystal_decompose(q: &QueryGraph) -> CoreCrystal {
    let core = min_connected_vertex_cover(q);
    let mut groups: BTreeMap<VertexSet, VertexSet> = BTreeMap::new();
    for v in members(q.all() & !core) {
        debug_assert_eq!(q.adj(v) & !core, 0, "non-cover vertices form an independent set");
        *groups.entry(q.adj(v)).or_insert(0) |= bit(v);
    }
    let crystals = groups
        .into_iter()
        .map(|(clique, buds)| Crystal {
            clique,
            buds,
            is_clique: q.is_clique(clique),
        })
        .collect();
    CoreCrystal { core, crystals }
}

/// The nine benchmark patterns, vertices numbered from 0.
pub fn corpus() -> Vec<(&'static str, QueryGraph)> {
    let k = |n: usize| -> Vec<(usize, usize)> { (0..n).tuple_combinations().collect() };
    type Entry = (&'static str, usize, Vec<(usize, usize)>);
    let list: Vec<Entry> = vec![
        ("triangle", 3, vec![(0, 1), (1, 2), (0, 2)]),
        ("square", 4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]),
        ("square-diagonal", 4, vec![(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)]),
        ("four-clique", 4, k(4)),
        ("house", 5, vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)]),
        (
            "chordal-house",
            5,
            vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4), (0, 2)],
        ),
        ("five-path", 5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]),
        ("five-clique", 5, k(5)),
        (
            "double-square",
            6,
            vec![(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)],
        ),
    ];
    list.into_iter()
        .map(|(name, n, e)| (name, QueryGraph::new(n, &e, None).expect("corpus queries are valid")))
        .collect()
}

pub fn corpus_query(name: &str) -> Option<QueryGraph> {
    corpus().into_iter().find(|(n, _)| *n == name).map(|(_, q)| q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: usize, e: &[(usize, usize)]) -> QueryGraph {
        QueryGraph::new(n, e, None).unwrap()
    }

    fn set(vs: &[usize]) -> VertexSet {
        vs.iter().fold(0, |s, &v| s | bit(v))
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(automorphisms(&corpus_query("triangle").unwrap()).len(), 6);
        assert_eq!(automorphisms(&corpus_query("square-diagonal").unwrap()).len(), 4);
        let lab = QueryGraph::new(3, &[(0, 1), (1, 2), (0, 2)], Some(vec![1, 2, 3])).unwrap();
        assert_eq!(automorphisms(&lab), vec![vec![0, 1, 2]]);
        assert_eq!(automorphisms(&corpus_query("five-clique").unwrap()).len(), 120);
        assert_eq!(automorphisms(&corpus_query("double-square").unwrap()).len(), 4);
    }

    #[test]
    fn symmetry_breaking_examples() {
        let t = symmetry_break_order(&corpus_query("triangle").unwrap());
        assert!(t.less(0, 1) && t.less(1, 2) && t.less(0, 2));

        let d = symmetry_break_order(&corpus_query("square-diagonal").unwrap());
        let expect = PartialOrder::from_pairs(4, &[(0, 2), (1, 3)]).unwrap();
        assert_eq!(d, expect);

        let asym = QueryGraph::new(3, &[(0, 1), (1, 2), (0, 2)], Some(vec![1, 2, 3])).unwrap();
        assert!(symmetry_break_order(&asym).is_empty());
        let tadpole = q(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        assert_eq!(symmetry_break_order(&tadpole).pairs(), vec![(0, 1)]);
    }

    #[test]
    fn order_closure_and_cycles() {
        let mut o = PartialOrder::empty(4);
        o.add(0, 1).unwrap();
        o.add(2, 3).unwrap();
        o.add(1, 2).unwrap();
        assert!(o.less(0, 3));
        assert!(o.add(3, 0).is_err());
        assert!(o.is_satisfied(&[1, 2, 3, 4]));
        assert!(!o.is_satisfied(&[1, 2, 4, 3]));
        let p = o.project(&[0, 3]);
        assert_eq!(p.pairs(), vec![(0, 1)]);
    }

    #[test]
    fn covers() {
        assert_eq!(
            min_connected_vertex_cover(&corpus_query("triangle").unwrap()),
            set(&[0, 1])
        );
        let star = q(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(min_connected_vertex_cover(&star), set(&[0]));
        assert_eq!(
            min_connected_vertex_cover(&corpus_query("five-path").unwrap()),
            set(&[1, 2, 3])
        );
    }

    #[test]
    fn join_units() {
        let d = corpus_query("square-diagonal").unwrap();
        let units = enumerate_join_units(&d, true);
        assert!(units.contains(&JoinUnit::Clique {
            vertices: set(&[0, 1, 3])
        }));
        assert!(units.contains(&JoinUnit::Clique {
            vertices: set(&[1, 2, 3])
        }));
        let plain = enumerate_join_units(&d, false);
        assert!(plain.iter().all(|u| !u.is_clique()));
        assert!(plain.contains(&JoinUnit::Star {
            root: 1,
            leaves: set(&[0, 2, 3])
        }));
        let path = corpus_query("five-path").unwrap();
        assert!(enumerate_join_units(&path, true).iter().all(|u| !u.is_clique()));
        assert_eq!(
            JoinUnit::Clique {
                vertices: set(&[0, 1, 3])
            }
            .edge_mask(&d)
            .count_ones(),
            3
        );
    }

    #[test]
    fn core_crystal_examples() {
        let d = core_crystal_decompose(&corpus_query("square-diagonal").unwrap());
        assert_eq!(d.core, set(&[1, 3]));
        assert_eq!(
            d.crystals,
            vec![Crystal {
                clique: set(&[1, 3]),
                buds: set(&[0, 2]),
                is_clique: true
            }]
        );

        let k4 = core_crystal_decompose(&corpus_query("four-clique").unwrap());
        assert_eq!(k4.core.count_ones(), 3);
        assert_eq!(k4.crystals.len(), 1);
        assert_eq!(k4.crystals[0].buds.count_ones(), 1);

        let star = core_crystal_decompose(&q(4, &[(0, 1), (0, 2), (0, 3)]));
        assert_eq!(star.core, set(&[0]));
        assert_eq!(star.crystals[0].buds, set(&[1, 2, 3]));

        let sq = core_crystal_decompose(&corpus_query("square").unwrap());
        assert!(!sq.crystals[0].is_clique);
    }

    #[test]
    fn reassembly_covers_every_edge() {
        for (_, query) in corpus() {
            let d = core_crystal_decompose(&query);
            for &(a, b) in query.edges() {
                let in_core = d.core & bit(a) != 0 && d.core & bit(b) != 0;
                let in_crystal = d.crystals.iter().any(|c| {
                    (c.buds & bit(a) != 0 && c.clique & bit(b) != 0) || (c.buds & bit(b) != 0 && c.clique & bit(a) != 0)
                });
                assert!(in_core || in_crystal);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        let text = "# square with labels\n4\n0 1\n1 2\n2 3\n3 0\nlabels\n0 7\n1 7\n2 8\n3 8\n";
        let q = QueryGraph::parse(text).unwrap();
        assert_eq!(q.num_edges(), 4);
        assert_eq!(q.labels(), Some(&[7, 7, 8, 8][..]));
        assert_eq!(QueryGraph::parse(&q.to_text()).unwrap(), q);
        assert!(QueryGraph::parse("3\n0 1\n").is_err());
        assert!(matches!(
            QueryGraph::parse("3\n0 1\n1 x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn corpus_has_nine_connected_queries() {
        let c = corpus();
        assert_eq!(c.len(), 9);
        assert!(c.iter().all(|(_, q)| q.is_connected(q.all())));
    }
}
