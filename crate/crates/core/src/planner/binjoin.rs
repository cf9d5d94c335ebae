use std::fmt;

use crate::error::{Error, Result};
use crate::query::{bit, cliques, members, JoinUnit, PartialOrder, QueryGraph, VertexSet};

use super::cost::CostModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitFamily {
    Star,
    /// Stars with at most two leaves.
    TwinTwig,
    /// Stars plus cliques; needs a triangle partition.
    Clique,
}

/// Largest edge count the planner accepts (the DP is exponential in it).
pub const MAX_PLAN_EDGES: usize = 16;
pub const MAX_OVERLAP_PLAN_EDGES: usize = 12;

/// Root used when enumerating a clique unit: the member below all others in
/// `order` if there is one, otherwise the smallest member.
pub fn clique_root(vertices: VertexSet, order: &PartialOrder) -> Option<usize> {
    members(vertices).find(|&r| o_min(r, vertices, order))
}

fn o_min(r: usize, vertices: VertexSet, order: &PartialOrder) -> bool {
    let others = vertices & !bit(r);
    order.above(r) & others == others
}

/// Units the DP may place at the leaves. With `ordered_cliques`, only cliques
/// with an order-minimum member are admitted (an ordered triangle partition
/// can only resolve cliques from their smallest data vertex).
pub fn candidate_units(q: &QueryGraph, family: UnitFamily, ordered_cliques: Option<&PartialOrder>) -> Vec<JoinUnit> {
    let max_leaves = if family == UnitFamily::TwinTwig { 2 } else { usize::MAX };
    let mut units = Vec::new();
    let mut seen_edges = Vec::new();
    for root in 0..q.n() {
        let nb = q.adj(root);
        let mut sub = nb;
        while sub != 0 {
            if (sub.count_ones() as usize) <= max_leaves {
                let u = JoinUnit::Star { root, leaves: sub };
                let e = u.edge_mask(q);
                if !seen_edges.contains(&e) {
                    seen_edges.push(e);
                    units.push(u);
                }
            }
            sub = (sub - 1) & nb;
        }
    }
    if family == UnitFamily::Clique {
        for vs in cliques(q, 3) {
            if ordered_cliques.is_some_and(|o| clique_root(vs, o).is_none()) {
                continue;
            }
            units.push(JoinUnit::Clique { vertices: vs });
        }
    }
    units
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanNode {
    Leaf {
        unit: JoinUnit,
        /// Unit vertices kept as candidate arrays.
        compressed: VertexSet,
        /// The unit lacks the batching vertex and is recomputed for every batch.
        recompute: bool,
    },
    Join {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
        key: VertexSet,
    },
}

impl PlanNode {
    pub fn vertices(&self) -> VertexSet {
        match self {
            PlanNode::Leaf { unit, .. } => unit.vertices(),
            PlanNode::Join { left, right, .. } => left.vertices() | right.vertices(),
        }
    }

    pub fn edges(&self, q: &QueryGraph) -> u128 {
        match self {
            PlanNode::Leaf { unit, .. } => unit.edge_mask(q),
            PlanNode::Join { left, right, .. } => left.edges(q) | right.edges(q),
        }
    }

    pub fn units(&self) -> Vec<JoinUnit> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |u, _, _| out.push(*u));
        out
    }

    pub fn num_joins(&self) -> usize {
        match self {
            PlanNode::Leaf { .. } => 0,
            PlanNode::Join { left, right, .. } => 1 + left.num_joins() + right.num_joins(),
        }
    }

    pub fn join_keys(&self) -> VertexSet {
        match self {
            PlanNode::Leaf { .. } => 0,
            PlanNode::Join { left, right, key } => key | left.join_keys() | right.join_keys(),
        }
    }

    /// True when every join has a unit as one child.
    pub fn is_left_deep(&self) -> bool {
        match self {
            PlanNode::Leaf { .. } => true,
            PlanNode::Join { left, right, .. } => {
                let l = matches!(**left, PlanNode::Leaf { .. });
                let r = matches!(**right, PlanNode::Leaf { .. });
                (l || r) && left.is_left_deep() && right.is_left_deep()
            }
        }
    }

    fn visit_leaves(&self, f: &mut dyn FnMut(&JoinUnit, VertexSet, bool)) {
        match self {
            PlanNode::Leaf {
                unit,
                compressed,
                recompute,
            } => f(unit, *compressed, *recompute),
            PlanNode::Join { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    fn leaves_mut(&mut self, f: &mut dyn FnMut(&JoinUnit, &mut VertexSet, &mut bool)) {
        match self {
            PlanNode::Leaf {
                unit,
                compressed,
                recompute,
            } => f(unit, compressed, recompute),
            PlanNode::Join { left, right, .. } => {
                left.leaves_mut(f);
                right.leaves_mut(f);
            }
        }
    }

    fn fmt_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            PlanNode::Leaf {
                unit,
                compressed,
                recompute,
            } => {
                write!(f, "{pad}{unit}")?;
                if *compressed != 0 {
                    let c: Vec<String> = members(*compressed).map(|v| format!("v{v}")).collect();
                    write!(f, " compress {{{}}}", c.join(","))?;
                }
                if *recompute {
                    f.write_str(" recompute-per-batch")?;
                }
                writeln!(f)
            }
            PlanNode::Join { left, right, key } => {
                let k: Vec<String> = members(*key).map(|v| format!("v{v}")).collect();
                writeln!(f, "{pad}Join on {{{}}}", k.join(","))?;
                left.fmt_indented(f, depth + 1)?;
                right.fmt_indented(f, depth + 1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinJoinPlan {
    pub root: PlanNode,
    /// Sum of estimated cardinalities over all relations in the tree.
    pub cost: f64,
    pub batching_vertex: Option<usize>,
}

impl fmt::Display for BinJoinPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "estimated cost {:.3e}", self.cost)?;
        if let Some(b) = self.batching_vertex {
            writeln!(f, "batching vertex v{b}")?;
        }
        self.root.fmt_indented(f, 0)
    }
}

#[derive(Clone, Copy)]
enum Choice {
    Unit(usize),
    Split(u32, u32),
}

/// Cost-optimal bushy plan by dynamic programming over connected edge subsets.
/// `overlap` lets the two sides of a join share edges.
pub fn optimal_binjoin_plan(
    q: &QueryGraph,
    units: &[JoinUnit],
    model: &CostModel,
    ordered: bool,
    overlap: bool,
) -> Result<BinJoinPlan> {
    let m = q.num_edges();
    let limit = if overlap {
        MAX_OVERLAP_PLAN_EDGES
    } else {
        MAX_PLAN_EDGES
    };
    if m == 0 {
        return Err(Error::Plan("query has no edges".into()));
    }
    if m > limit {
        return Err(Error::Plan(format!(
            "{m} query edges exceed the planner limit of {limit}"
        )));
    }
    let full: u32 = ((1u64 << m) - 1) as u32;
    let unit_masks: Vec<u32> = units.iter().map(|u| u.edge_mask(q) as u32).collect();
    let mut best: Vec<Option<(f64, Choice)>> = vec![None; 1 << m];

    for s in 1..=full {
        if !q.edges_connected(s as u128) {
            continue;
        }
        let est = model.estimate(q, q.edge_vertices(s as u128), s as u128, ordered);
        let mut cur: Option<(f64, Choice)> = None;
        let mut offer = |cost: f64, c: Choice| {
            if cur.is_none_or(|(b, _)| cost < b) {
                cur = Some((cost, c));
            }
        };
        for (i, &um) in unit_masks.iter().enumerate() {
            if um == s {
                offer(est, Choice::Unit(i));
            }
        }
        let mut l = (s - 1) & s;
        while l != 0 {
            if let Some((lc, _)) = best[l as usize] {
                if overlap {
                    let must = s & !l;
                    let mut t = (l - 1) & l;
                    loop {
                        let r = must | t;
                        if let Some((rc, _)) = best[r as usize] {
                            offer(lc + rc + est, Choice::Split(l, r));
                        }
                        if t == 0 {
                            break;
                        }
                        t = (t - 1) & l;
                    }
                } else {
                    let r = s & !l;
                    if l < r {
                        if let Some((rc, _)) = best[r as usize] {
                            offer(lc + rc + est, Choice::Split(l, r));
                        }
                    }
                }
            }
            l = (l - 1) & s;
        }
        best[s as usize] = cur;
    }

    fn build(s: u32, best: &[Option<(f64, Choice)>], units: &[JoinUnit]) -> PlanNode {
        match best[s as usize].expect("solved subset").1 {
            Choice::Unit(i) => PlanNode::Leaf {
                unit: units[i],
                compressed: 0,
                recompute: false,
            },
            Choice::Split(l, r) => {
                let left = build(l, best, units);
                let right = build(r, best, units);
                let key = left.vertices() & right.vertices();
                PlanNode::Join {
                    left: Box::new(left),
                    right: Box::new(right),
                    key,
                }
            }
        }
    }

    let (cost, _) = best[full as usize].ok_or_else(|| Error::Plan("units do not cover the query".into()))?;
    Ok(BinJoinPlan {
        root: build(full, &best, units),
        cost,
        batching_vertex: None,
    })
}

/// Cost of an arbitrary plan tree under the same accounting as the DP.
pub fn plan_cost(q: &QueryGraph, node: &PlanNode, model: &CostModel, ordered: bool) -> f64 {
    let here = model.estimate(q, node.vertices(), node.edges(q), ordered);
    match node {
        PlanNode::Leaf { .. } => here,
        PlanNode::Join { left, right, .. } => {
            here + plan_cost(q, left, model, ordered) + plan_cost(q, right, model, ordered)
        }
    }
}

/// Exhaustive enumeration of every plan tree, for checking the DP on small queries.
pub fn exhaustive_min_cost(
    q: &QueryGraph,
    units: &[JoinUnit],
    model: &CostModel,
    ordered: bool,
    overlap: bool,
) -> Option<f64> {
    struct Ctx<'a> {
        q: &'a QueryGraph,
        units: &'a [JoinUnit],
        model: &'a CostModel,
        ordered: bool,
        overlap: bool,
        memo: std::collections::HashMap<u128, Option<f64>>,
    }
    fn solve(c: &mut Ctx<'_>, s: u128) -> Option<f64> {
        if let Some(&v) = c.memo.get(&s) {
            return v;
        }
        let result = if !c.q.edges_connected(s) {
            None
        } else {
            let est = c.model.estimate(c.q, c.q.edge_vertices(s), s, c.ordered);
            let mut best: Option<f64> = None;
            for u in c.units {
                if u.edge_mask(c.q) == s {
                    best = Some(best.map_or(est, |b: f64| b.min(est)));
                }
            }
            let all: Vec<u128> = (1..s).filter(|x| x & !s == 0).collect();
            for &l in &all {
                for &r in &all {
                    if l | r != s || (!c.overlap && l & r != 0) {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (solve(c, l), solve(c, r)) {
                        let total = a + b + est;
                        best = Some(best.map_or(total, |x: f64| x.min(total)));
                    }
                }
            }
            best
        };
        c.memo.insert(s, result);
        result
    }
    let mut c = Ctx {
        q,
        units,
        model,
        ordered,
        overlap,
        memo: Default::default(),
    };
    let full = (1u128 << q.num_edges()) - 1;
    solve(&mut c, full)
}

/// Batching vertex: the join-key vertex contained in the most units (ties to
/// the smaller id); the root of the only unit for a single-unit plan. Units
/// without it are flagged for recomputation.
pub fn select_batching_vertex(plan: &mut BinJoinPlan, order: &PartialOrder) {
    let units = plan.root.units();
    let b = if units.len() == 1 {
        Some(unit_root(&units[0], order))
    } else {
        members(plan.root.join_keys()).max_by_key(|&v| {
            let c = units.iter().filter(|u| u.vertices() & bit(v) != 0).count();
            (c, std::cmp::Reverse(v))
        })
    };
    plan.batching_vertex = b;
    if let Some(b) = b {
        plan.root.leaves_mut(&mut |u, _, rec| *rec = u.vertices() & bit(b) == 0);
    }
}

/// The vertex a unit is enumerated from.
pub fn unit_root(unit: &JoinUnit, order: &PartialOrder) -> usize {
    match *unit {
        JoinUnit::Star { root, .. } => root,
        JoinUnit::Clique { vertices } => {
            clique_root(vertices, order).unwrap_or_else(|| vertices.trailing_zeros() as usize)
        }
    }
}

/// Marks non-key, non-root star leaves and one non-key, non-root clique vertex as compressed.
pub fn annotate_compression(plan: &mut BinJoinPlan, order: &PartialOrder) {
    let keys = plan.root.join_keys();
    plan.root.leaves_mut(&mut |u, comp, _| {
        let root = unit_root(u, order);
        let free = u.vertices() & !keys & !bit(root);
        *comp = match u {
            JoinUnit::Star { .. } => free,
            JoinUnit::Clique { .. } => match members(free).last() {
                Some(v) => bit(v),
                None => 0,
            },
        };
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{corpus, corpus_query, symmetry_break_order};

    fn set(vs: &[usize]) -> VertexSet {
        vs.iter().fold(0, |s, &v| s | bit(v))
    }

    #[test]
    fn two_triangle_plan_with_cliques() {
        let d = corpus_query("square-diagonal").unwrap();
        let units = candidate_units(&d, UnitFamily::Clique, None);
        let plan = optimal_binjoin_plan(&d, &units, &CostModel::er(1000, 5000), true, true).unwrap();
        let mut got = plan.root.units();
        got.sort();
        assert_eq!(
            got,
            vec![
                JoinUnit::Clique {
                    vertices: set(&[0, 1, 3])
                },
                JoinUnit::Clique {
                    vertices: set(&[1, 2, 3])
                }
            ]
        );
        if let PlanNode::Join { key, .. } = plan.root {
            assert_eq!(key, set(&[1, 3]));
        } else {
            panic!("expected a join");
        }
    }

    #[test]
    fn twintwig_plan_beats_the_three_unit_decomposition() {
        let d = corpus_query("square-diagonal").unwrap();
        let model = CostModel::er(1000, 5000);
        let units = candidate_units(&d, UnitFamily::TwinTwig, None);
        let plan = optimal_binjoin_plan(&d, &units, &model, true, false).unwrap();
        for u in plan.root.units() {
            assert!(u.edge_mask(&d).count_ones() <= 2);
        }
        assert_eq!(plan.root.edges(&d), (1u128 << d.num_edges()) - 1);

        let tt = |root, leaves: &[usize]| PlanNode::Leaf {
            unit: JoinUnit::Star {
                root,
                leaves: set(leaves),
            },
            compressed: 0,
            recompute: false,
        };
        let eq2 = PlanNode::Join {
            left: Box::new(PlanNode::Join {
                left: Box::new(tt(0, &[1, 3])),
                right: Box::new(tt(1, &[2, 3])),
                key: set(&[1, 3]),
            }),
            right: Box::new(tt(2, &[3])),
            key: set(&[2, 3]),
        };
        assert_eq!(eq2.num_joins(), 2);
        assert!(eq2.is_left_deep());
        assert!(plan.cost <= plan_cost(&d, &eq2, &model, true) + 1e-9);
        assert!((plan.cost - plan_cost(&d, &plan.root, &model, true)).abs() < 1e-6);
    }

    #[test]
    fn clique_query_is_one_leaf() {
        let t = corpus_query("triangle").unwrap();
        let units = candidate_units(&t, UnitFamily::Clique, None);
        let plan = optimal_binjoin_plan(&t, &units, &CostModel::er(100, 400), true, true).unwrap();
        assert_eq!(plan.root.num_joins(), 0);
    }

    #[test]
    fn dp_matches_exhaustive_search() {
        let model = CostModel::er(500, 4000);
        for (name, q) in corpus() {
            if q.num_edges() > 6 {
                continue;
            }
            for (family, overlap) in [
                (UnitFamily::Star, false),
                (UnitFamily::TwinTwig, false),
                (UnitFamily::Clique, true),
            ] {
                let units = candidate_units(&q, family, None);
                let plan = optimal_binjoin_plan(&q, &units, &model, true, overlap).unwrap();
                let brute = exhaustive_min_cost(&q, &units, &model, true, overlap).unwrap();
                assert!(
                    (plan.cost - brute).abs() <= 1e-9 * brute.max(1.0),
                    "{name}: {} vs {brute}",
                    plan.cost
                );
            }
        }
    }

    #[test]
    fn plans_are_executable() {
        let model = CostModel::er(300, 3000);
        for (_, q) in corpus() {
            for (family, overlap) in [(UnitFamily::Star, false), (UnitFamily::Clique, true)] {
                let units = candidate_units(&q, family, None);
                let plan = optimal_binjoin_plan(&q, &units, &model, true, overlap).unwrap();
                assert_eq!(plan.root.vertices(), q.all());
                assert_eq!(plan.root.edges(&q), (1u128 << q.num_edges()) - 1);
                fn keys_ok(n: &PlanNode) -> bool {
                    match n {
                        PlanNode::Leaf { .. } => true,
                        PlanNode::Join { left, right, key } => {
                            *key == left.vertices() & right.vertices() && *key != 0 && keys_ok(left) && keys_ok(right)
                        }
                    }
                }
                assert!(keys_ok(&plan.root));
            }
        }
    }

    #[test]
    fn star_compression_rule() {
        let d = corpus_query("square-diagonal").unwrap();
        let order = symmetry_break_order(&d);
        let mut plan = BinJoinPlan {
            root: PlanNode::Join {
                left: Box::new(PlanNode::Leaf {
                    unit: JoinUnit::Star {
                        root: 1,
                        leaves: set(&[0, 2, 3]),
                    },
                    compressed: 0,
                    recompute: false,
                }),
                right: Box::new(PlanNode::Leaf {
                    unit: JoinUnit::Star {
                        root: 3,
                        leaves: set(&[1]),
                    },
                    compressed: 0,
                    recompute: false,
                }),
                key: set(&[1, 3]),
            },
            cost: 0.0,
            batching_vertex: None,
        };
        annotate_compression(&mut plan, &order);
        let comp: Vec<VertexSet> = {
            let mut v = Vec::new();
            plan.root.visit_leaves(&mut |_, c, _| v.push(c));
            v
        };
        assert_eq!(comp, vec![set(&[0, 2]), 0]);
    }

    #[test]
    fn batching_vertex_examples() {
        let d = corpus_query("square-diagonal").unwrap();
        let order = symmetry_break_order(&d);
        let tt = |root, leaves: &[usize]| PlanNode::Leaf {
            unit: JoinUnit::Star {
                root,
                leaves: set(leaves),
            },
            compressed: 0,
            recompute: false,
        };
        // T1(v0; v1, v3) ⋈ T2(v2; v1, v3) ⋈ T3(v2; v3) in 0-based ids.
        let j1 = PlanNode::Join {
            left: Box::new(tt(0, &[1, 3])),
            right: Box::new(tt(1, &[2, 3])),
            key: set(&[1, 3]),
        };
        let mut plan = BinJoinPlan {
            root: PlanNode::Join {
                left: Box::new(j1),
                right: Box::new(tt(2, &[3])),
                key: set(&[2, 3]),
            },
            cost: 0.0,
            batching_vertex: None,
        };
        select_batching_vertex(&mut plan, &order);
        assert_eq!(plan.batching_vertex, Some(3));

        let units = candidate_units(&d, UnitFamily::Clique, None);
        let mut plan = optimal_binjoin_plan(&d, &units, &CostModel::er(1000, 5000), true, true).unwrap();
        select_batching_vertex(&mut plan, &order);
        assert_eq!(plan.batching_vertex, Some(1));
        assert!(plan.root.units().len() == 2);
    }

    #[test]
    fn ordered_partition_admits_only_rooted_cliques() {
        let k4 = corpus_query("four-clique").unwrap();
        let order = symmetry_break_order(&k4);
        assert!(candidate_units(&k4, UnitFamily::Clique, Some(&order))
            .iter()
            .any(|u| u.is_clique()));
        let none = PartialOrder::empty(4);
        assert!(!candidate_units(&k4, UnitFamily::Clique, Some(&none))
            .iter()
            .any(|u| u.is_clique()));
    }
}
