//! Brute-force reference matcher.
//!
//! Deliberately shares nothing with the engine beyond the input types: it
//! builds its own adjacency sets and backtracks over query vertices in id
//! order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{DataGraph, VertexId};
use crate::query::{symmetry_break_order, PartialOrder, QueryGraph};

pub const DEFAULT_GUARD: f64 = 1e9;

/// Upper bound on search nodes: `max_degree` choices for a vertex with an
/// earlier neighbor, `N` otherwise.
pub fn estimated_nodes(q: &QueryGraph, g: &DataGraph) -> f64 {
    let n = g.num_vertices() as f64;
    let dmax = (0..g.num_vertices() as VertexId)
        .map(|u| g.degree(u))
        .max()
        .unwrap_or(0) as f64;
    (0..q.n())
        .map(|i| if q.adj(i) & ((1 << i) - 1) != 0 { dmax } else { n })
        .product()
}

struct Search<'a> {
    q: &'a QueryGraph,
    lists: Vec<Vec<VertexId>>,
    sets: Vec<HashSet<VertexId>>,
    labels: Option<&'a [u32]>,
    order: PartialOrder,
    earlier: Vec<Vec<usize>>,
    f: Vec<VertexId>,
}

impl Search<'_> {
    fn fits(&self, i: usize, c: VertexId) -> bool {
        if self.f[..i].contains(&c) {
            return false;
        }
        if let (Some(ls), Some(l)) = (self.labels, self.q.label(i)) {
            if ls[c as usize] != l {
                return false;
            }
        }
        if !self.earlier[i]
            .iter()
            .all(|&j| self.sets[c as usize].contains(&self.f[j]))
        {
            return false;
        }
        (0..i).all(|j| !(self.order.less(j, i) && self.f[j] >= c || self.order.less(i, j) && c >= self.f[j]))
    }

    fn go(&mut self, i: usize, out: &mut dyn FnMut(&[VertexId])) {
        if i == self.q.n() {
            out(&self.f);
            return;
        }
        let cands: Vec<VertexId> = match self.earlier[i].first() {
            Some(&j) => self.lists[self.f[j] as usize].clone(),
            None => (0..self.lists.len() as VertexId).collect(),
        };
        for c in cands {
            if self.fits(i, c) {
                self.f[i] = c;
                self.go(i + 1, out);
            }
        }
    }
}

/// All matches under an explicit order, as tuples indexed by query vertex.
pub fn brute_force_with_order(
    q: &QueryGraph,
    g: &DataGraph,
    order: &PartialOrder,
    use_labels: bool,
    guard: f64,
) -> Result<Vec<Vec<VertexId>>> {
    let mut all = Vec::new();
    visit(q, g, order, use_labels, guard, &mut |t| all.push(t.to_vec()))?;
    all.sort_unstable();
    Ok(all)
}

pub fn count_with_order(
    q: &QueryGraph,
    g: &DataGraph,
    order: &PartialOrder,
    use_labels: bool,
    guard: f64,
) -> Result<u64> {
    let mut n = 0;
    visit(q, g, order, use_labels, guard, &mut |_| n += 1)?;
    Ok(n)
}

fn visit(
    q: &QueryGraph,
    g: &DataGraph,
    order: &PartialOrder,
    use_labels: bool,
    guard: f64,
    out: &mut dyn FnMut(&[VertexId]),
) -> Result<()> {
    let est = estimated_nodes(q, g);
    if est > guard {
        return Err(Error::OracleGuard { estimated: est, guard });
    }
    if use_labels && q.is_labelled() && g.labels().is_none() {
        return Err(Error::Config("labelled query against an unlabelled graph".into()));
    }
    let nv = g.num_vertices();
    let mut lists = vec![Vec::new(); nv];
    let mut sets = vec![HashSet::new(); nv];
    for u in 0..nv as VertexId {
        for &v in g.neighbors(u) {
            if v != u && sets[u as usize].insert(v) {
                lists[u as usize].push(v);
            }
        }
    }
    let earlier = (0..q.n())
        .map(|i| (0..i).filter(|&j| q.has_edge(i, j)).collect())
        .collect();
    let mut s = Search {
        q,
        lists,
        sets,
        labels: if use_labels { g.labels() } else { None },
        order: order.clone(),
        earlier,
        f: vec![0; q.n()],
    };
    s.go(0, out);
    Ok(())
}

/// Symmetry-breaking order of `q` when `use_order`, none otherwise.
pub fn oracle_order(q: &QueryGraph, use_order: bool) -> PartialOrder {
    if use_order {
        symmetry_break_order(q)
    } else {
        PartialOrder::empty(q.n())
    }
}

pub fn brute_force(q: &QueryGraph, g: &DataGraph, use_order: bool, use_labels: bool) -> Result<Vec<Vec<VertexId>>> {
    brute_force_with_order(q, g, &oracle_order(q, use_order), use_labels, DEFAULT_GUARD)
}

pub fn brute_force_count(q: &QueryGraph, g: &DataGraph, use_order: bool, use_labels: bool) -> Result<u64> {
    count_with_order(q, g, &oracle_order(q, use_order), use_labels, DEFAULT_GUARD)
}

/// Multiset difference between two match lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchDiff {
    pub expected: u64,
    pub got: u64,
    /// Up to ten tuples with their surplus multiplicity.
    pub missing: Vec<(Vec<VertexId>, u64)>,
    pub unexpected: Vec<(Vec<VertexId>, u64)>,
    pub missing_total: u64,
    pub unexpected_total: u64,
}

impl MatchDiff {
    pub fn is_empty(&self) -> bool {
        self.missing_total == 0 && self.unexpected_total == 0
    }
}

impl fmt::Display for MatchDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "expected {} matches, got {} ({} missing, {} unexpected)",
            self.expected, self.got, self.missing_total, self.unexpected_total
        )?;
        for (t, k) in &self.missing {
            writeln!(f, "  missing    {t:?} x{k}")?;
        }
        for (t, k) in &self.unexpected {
            writeln!(f, "  unexpected {t:?} x{k}")?;
        }
        Ok(())
    }
}

pub fn compare(expected: &[Vec<VertexId>], got: &[Vec<VertexId>]) -> MatchDiff {
    let mut bag: BTreeMap<&[VertexId], i64> = BTreeMap::new();
    for t in expected {
        *bag.entry(t).or_default() += 1;
    }
    for t in got {
        *bag.entry(t).or_default() -= 1;
    }
    let mut d = MatchDiff {
        expected: expected.len() as u64,
        got: got.len() as u64,
        ..Default::default()
    };
    for (t, k) in bag {
        if k > 0 {
            d.missing_total += k as u64;
            if d.missing.len() < 10 {
                d.missing.push((t.to_vec(), k as u64));
            }
        } else if k < 0 {
            d.unexpected_total += (-k) as u64;
            if d.unexpected.len() < 10 {
                d.unexpected.push((t.to_vec(), (-k) as u64));
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_graph;
    use crate::query::corpus_query;

    #[test]
    fn triangle_in_k4() {
        let g = complete_graph(4);
        let t = corpus_query("triangle").unwrap();
        assert_eq!(brute_force_count(&t, &g, false, false).unwrap(), 24);
        assert_eq!(brute_force_count(&t, &g, true, false).unwrap(), 4);
        let m = brute_force(&t, &g, true, false).unwrap();
        assert!(m.iter().all(|f| f[0] < f[1] && f[1] < f[2]));
    }

    #[test]
    fn guard_refuses_big_searches() {
        let g = complete_graph(200);
        let q = corpus_query("five-clique").unwrap();
        assert!(matches!(
            brute_force_count(&q, &g, true, false),
            Err(Error::OracleGuard { .. })
        ));
    }

    #[test]
    fn diff_reports_multiset_differences() {
        let a = vec![vec![1, 2], vec![1, 2], vec![3, 4]];
        let b = vec![vec![1, 2], vec![5, 6]];
        let d = compare(&a, &b);
        assert_eq!(d.missing, vec![(vec![1, 2], 1), (vec![3, 4], 1)]);
        assert_eq!(d.unexpected, vec![(vec![5, 6], 1)]);
        assert!(!d.is_empty());
        assert!(compare(&a, &a).is_empty());
    }
}
