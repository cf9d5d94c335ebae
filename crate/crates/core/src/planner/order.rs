use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::Label;
use crate::query::{bit, members, min_connected_vertex_cover, PartialOrder, QueryGraph, VertexSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderKind {
    Greedy,
    Crystal,
    Given,
}

/// Sources that can be intersected inside the partition owning `leader`'s match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Group {
    pub leader: usize,
    pub members: VertexSet,
}

impl Group {
    pub fn all(&self) -> VertexSet {
        bit(self.leader) | self.members
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WOptOrder {
    pub kind: OrderKind,
    /// `order[i]` is the query vertex matched at level `i`.
    pub order: Vec<usize>,
    /// Earlier neighbors of `order[i]`.
    pub sources: Vec<VertexSet>,
    pub compressed: Vec<bool>,
    /// Per level, a partition of `sources[i]`; singletons unless triangle indexing is on.
    pub groups: Vec<Vec<Group>>,
}

impl WOptOrder {
    pub fn from_sequence(q: &QueryGraph, order: Vec<usize>, kind: OrderKind) -> Result<Self> {
        let n = q.n();
        let mut seen = 0;
        for &v in &order {
            if v >= n || seen & bit(v) != 0 {
                return Err(Error::Plan(format!(
                    "{order:?} is not a permutation of the query vertices"
                )));
            }
            seen |= bit(v);
        }
        if order.len() != n {
            return Err(Error::Plan(format!(
                "{order:?} is not a permutation of the query vertices"
            )));
        }
        let mut sources = Vec::with_capacity(n);
        let mut before = 0;
        for (i, &v) in order.iter().enumerate() {
            let s = q.adj(v) & before;
            if i > 0 && s == 0 {
                return Err(Error::Plan(format!("order {order:?} is not prefix-connected at v{v}")));
            }
            sources.push(s);
            before |= bit(v);
        }
        let groups = sources
            .iter()
            .map(|&s| members(s).map(|leader| Group { leader, members: 0 }).collect())
            .collect();
        let mut o = WOptOrder {
            kind,
            order,
            sources,
            compressed: vec![false; n],
            groups,
        };
        o.compressed = compression_flags(q, &o.order);
        Ok(o)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn batching_vertex(&self) -> usize {
        self.order[0]
    }

    pub fn num_compressed(&self) -> usize {
        self.compressed.iter().filter(|&&c| c).count()
    }

    pub fn without_compression(mut self) -> Self {
        self.compressed = vec![false; self.order.len()];
        self
    }

    /// Replaces singleton groups with triangle-indexing groups. With an ordered
    /// triangle partition, pass the symmetry-breaking order: a member only joins
    /// a group when the order places its leader below both it and the new vertex.
    pub fn with_trindexing_groups(mut self, q: &QueryGraph, ordered: Option<&PartialOrder>) -> Self {
        for i in 1..self.order.len() {
            self.groups[i] = trindexing_groups(q, self.sources[i], self.order[i], ordered);
        }
        self
    }
}

impl fmt::Display for WOptOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &v) in self.order.iter().enumerate() {
            write!(f, "{i}: v{v}")?;
            if i > 0 {
                let groups: Vec<String> = self.groups[i]
                    .iter()
                    .map(|g| {
                        let m: Vec<String> = members(g.all()).map(|x| format!("v{x}")).collect();
                        format!("[{}]", m.join(","))
                    })
                    .collect();
                write!(f, "  intersect {}", groups.join(" "))?;
            } else {
                f.write_str("  batching vertex")?;
            }
            if self.compressed[i] {
                f.write_str("  compressed")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// `compressed[i]` iff `order[i]` has no neighbor later in the order.
pub fn compression_flags(q: &QueryGraph, order: &[usize]) -> Vec<bool> {
    let mut later = 0;
    let mut flags = vec![false; order.len()];
    for i in (0..order.len()).rev() {
        flags[i] = q.adj(order[i]) & later == 0;
        later |= bit(order[i]);
    }
    flags
}

fn rarity(q: &QueryGraph, v: usize, freq: Option<&BTreeMap<Label, usize>>) -> usize {
    match (q.label(v), freq) {
        (Some(l), Some(f)) => f.get(&l).copied().unwrap_or(0),
        _ => 0,
    }
}

/// Greedy pick among `pool`: most connections to `selected` (or highest degree
/// when nothing is selected), then rarest label, then smallest index.
fn greedy_extend(
    q: &QueryGraph,
    pool: VertexSet,
    mut selected: VertexSet,
    order: &mut Vec<usize>,
    freq: Option<&BTreeMap<Label, usize>>,
) {
    let mut remaining = pool & !selected;
    while remaining != 0 {
        let v = members(remaining)
            .min_by_key(|&v| {
                let score = if selected == 0 {
                    q.degree(v)
                } else {
                    (q.adj(v) & selected).count_ones() as usize
                };
                (std::cmp::Reverse(score), rarity(q, v, freq), v)
            })
            .unwrap();
        order.push(v);
        selected |= bit(v);
        remaining &= !bit(v);
    }
}

pub fn greedy_matching_order(q: &QueryGraph, freq: Option<&BTreeMap<Label, usize>>) -> WOptOrder {
    let mut order = Vec::with_capacity(q.n());
    greedy_extend(q, q.all(), 0, &mut order, freq);
    WOptOrder::from_sequence(q, order, OrderKind::Greedy)
        .expect("greedy order on a connected query is prefix-connected")
}

/// Cover vertices first (greedy within the cover), then the remaining vertices.
pub fn crystal_order(q: &QueryGraph, freq: Option<&BTreeMap<Label, usize>>) -> WOptOrder {
    let cover = min_connected_vertex_cover(q);
    let mut order = Vec::with_capacity(q.n());
    greedy_extend(q, cover, 0, &mut order, freq);
    greedy_extend(q, q.all(), cover, &mut order, freq);
    WOptOrder::from_sequence(q, order, OrderKind::Crystal).expect("cover-first order is prefix-connected")
}

/// The greedy order, unless compression is on and the crystal order compresses strictly more vertices.
pub fn choose_order(q: &QueryGraph, compression: bool, freq: Option<&BTreeMap<Label, usize>>) -> WOptOrder {
    let greedy = greedy_matching_order(q, freq);
    if !compression {
        return greedy.without_compression();
    }
    let crystal = crystal_order(q, freq);
    if crystal.num_compressed() > greedy.num_compressed() {
        crystal
    } else {
        greedy
    }
}

/// Repeatedly carves the largest group `{x} ∪ (N(x) ∩ remaining)` out of the
/// sources, ties to the smaller leader.
pub fn trindexing_groups(
    q: &QueryGraph,
    sources: VertexSet,
    new_vertex: usize,
    ordered: Option<&PartialOrder>,
) -> Vec<Group> {
    let reach = |x: usize, remaining: VertexSet| -> VertexSet {
        let nb = q.adj(x) & remaining;
        match ordered {
            None => nb,
            Some(o) if o.less(x, new_vertex) => nb & o.above(x),
            Some(_) => 0,
        }
    };
    let mut remaining = sources;
    let mut groups = Vec::new();
    while remaining != 0 {
        let leader = members(remaining)
            .min_by_key(|&x| (std::cmp::Reverse(reach(x, remaining).count_ones()), x))
            .unwrap();
        let m = reach(leader, remaining);
        groups.push(Group { leader, members: m });
        remaining &= !(m | bit(leader));
    }
    groups
}
