use std::collections::BTreeSet;

use proptest::prelude::*;

use shardmatch::graph::{gnp, random_labels, DataGraph, VertexId};
use shardmatch::oracle::{brute_force_count, brute_force_with_order, compare};
use shardmatch::partition::{partition_graph, PartitionMode, Placement};
use shardmatch::planner::hypercube_shares;
use shardmatch::query::{
    automorphisms, bit, core_crystal_decompose, corpus, members, min_connected_vertex_cover, PartialOrder, QueryGraph,
};
use shardmatch::runtime::{Relation, Schema};
use shardmatch::strategies::{effective_order, run, OptFlags, OutputMode, StrategyConfig};

fn graph() -> impl Strategy<Value = DataGraph> {
    (6usize..22, 0.1f64..0.5, any::<u64>()).prop_map(|(n, p, seed)| gnp(n, p, seed))
}

fn opts() -> impl Strategy<Value = OptFlags> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(batching, trindexing, compression)| OptFlags {
        batching,
        trindexing,
        compression,
    })
}

/// Random connected query: a random spanning tree plus extra edges.
fn query() -> impl Strategy<Value = QueryGraph> {
    (3usize..6)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|v| 0..v).collect();
            (Just(n), parents, prop::collection::vec((0..n, 0..n), 0..5))
        })
        .prop_map(|(n, parents, extra)| {
            let mut e: BTreeSet<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
            e.extend(
                extra
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b))),
            );
            QueryGraph::new(n, &e.into_iter().collect::<Vec<_>>(), None).unwrap()
        })
}

fn strategy() -> impl Strategy<Value = shardmatch::Strategy> {
    prop::sample::select(shardmatch::Strategy::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strategies_agree_with_oracle(g in graph(), q in query(), s in strategy(), o in opts(),
                                    w in 1usize..5, bs in 1usize..20, labelled in any::<bool>()) {
        let (g, q) = if labelled {
            let l = random_labels(g.num_vertices(), 2, 7);
            let ql = (0..q.n()).map(|v| (v % 2) as u32).collect();
            (g.with_labels(Some(l)).unwrap(), q.with_labels(ql).unwrap())
        } else {
            (g, q)
        };
        let mut cfg = StrategyConfig::new(s, if s.uses_opts() { o } else { OptFlags::NONE })
            .with_output(OutputMode::Collect);
        cfg.batch_size = bs;
        let order = effective_order(&q, &cfg);
        let want = brute_force_with_order(&q, &g, &order, labelled, 1e9).unwrap();
        let r = run(&q, &g, w, &cfg).unwrap();
        let got = r.matches.unwrap();
        let d = compare(&want, &got);
        prop_assert!(d.is_empty(), "{} {}\n{}", s, cfg.opts, d);
        prop_assert_eq!(r.count, want.len() as u64);
        prop_assert_eq!(r.metrics.total_recv_integers, r.metrics.total_sent_integers);
    }

    #[test]
    fn matches_are_injective_ordered_and_edge_preserving(g in graph(), qi in 0usize..9, s in strategy(), w in 1usize..4) {
        let q = corpus()[qi].1.clone();
        let cfg = StrategyConfig::new(s, OptFlags::NONE).with_output(OutputMode::Collect);
        let order = effective_order(&q, &cfg);
        for f in run(&q, &g, w, &cfg).unwrap().matches.unwrap() {
            let distinct: BTreeSet<_> = f.iter().collect();
            prop_assert_eq!(distinct.len(), q.n());
            prop_assert!(order.is_satisfied(&f));
            for &(a, b) in q.edges() {
                prop_assert!(g.has_edge(f[a], f[b]));
            }
        }
    }

    #[test]
    fn automorphism_factor(g in graph(), q in query()) {
        let ordered = brute_force_count(&q, &g, true, false).unwrap();
        let unordered = brute_force_count(&q, &g, false, false).unwrap();
        prop_assert_eq!(unordered, automorphisms(&q).len() as u64 * ordered);
    }

    #[test]
    fn partitions_cover_the_graph(g in graph(), w in 1usize..7, tri in any::<bool>(), ordered in any::<bool>(), spread in any::<bool>()) {
        let mode = match (tri, ordered) {
            (false, _) => PartitionMode::Hash,
            (true, false) => PartitionMode::Triangle,
            (true, true) => PartitionMode::TriangleOrdered,
        };
        let placement = if spread { Placement::Seeded(3) } else { Placement::Modulo };
        let parts = partition_graph(&g, w, mode, placement).unwrap();
        let mut owned: Vec<VertexId> = parts.iter().flat_map(|p| p.owned_vertices().to_vec()).collect();
        owned.sort_unstable();
        prop_assert_eq!(owned, (0..g.num_vertices() as VertexId).collect::<Vec<_>>());
        let entries: usize = parts.iter().map(|p| p.size().owned_entries).sum();
        prop_assert_eq!(entries, 2 * g.num_edges());
        for p in &parts {
            for &(a, b) in p.extra_edges() {
                prop_assert!(g.has_edge(a, b));
            }
            if !tri {
                continue;
            }
            for &u in p.owned_vertices() {
                let nb = g.neighbors(u);
                for &a in nb {
                    for &b in nb {
                        let wanted = g.has_edge(a, b) && (!ordered || (u < a && a < b));
                        if wanted {
                            prop_assert!(p.local_neighbors(a).binary_search(&b).is_ok(), "({a},{b}) via {u}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shares_fit_the_workers(q in query(), w in 1usize..40) {
        let s = hypercube_shares(&q, w);
        prop_assert_eq!(s.buckets.len(), q.n());
        prop_assert!(s.buckets.iter().all(|&b| b >= 1));
        prop_assert!(s.cells() <= w);
    }

    #[test]
    fn cover_and_crystals_reassemble_the_query(q in query()) {
        let cover = min_connected_vertex_cover(&q);
        prop_assert!(q.edges().iter().all(|&(a, b)| cover & (bit(a) | bit(b)) != 0));
        prop_assert!(q.is_connected(cover));
        let cc = core_crystal_decompose(&q);
        let mut edges = q.induced_edges(cc.core);
        for c in &cc.crystals {
            for bud in members(c.buds) {
                prop_assert_eq!(q.adj(bud), c.clique);
                for x in members(c.clique) {
                    edges |= 1u128 << q.edge_index(bud, x).unwrap();
                }
            }
        }
        prop_assert_eq!(edges, q.induced_edges(q.all()));
    }

    #[test]
    fn compressed_record_count_matches_expansion(
        x in 0u32..50,
        arrays in prop::collection::vec(prop::collection::btree_set(0u32..50, 0..8), 1..4),
        pairs in prop::collection::vec((1usize..4, 1usize..4), 0..3),
    ) {
        let k = arrays.len();
        let mut order = PartialOrder::empty(k + 1);
        for (a, b) in pairs {
            if a < b && b <= k {
                order.add(a, b).unwrap();
            }
        }
        let schema = Schema::new(vec![0], (1..=k).collect());
        let mut rec = vec![x];
        for a in &arrays {
            let kept: Vec<u32> = a.iter().copied().filter(|&c| c != x).collect();
            rec.push(kept.len() as u32);
            rec.extend(kept);
        }
        // independent count: every combination, injective and ordered
        let mut want = 0u64;
        let mut stack = vec![(0usize, vec![x])];
        while let Some((i, t)) = stack.pop() {
            if i == k {
                if order.is_satisfied(&t) {
                    want += 1;
                }
                continue;
            }
            for &c in &arrays[i] {
                if !t.contains(&c) {
                    let mut t2 = t.clone();
                    t2.push(c);
                    stack.push((i + 1, t2));
                }
            }
        }
        let mut expanded = 0u64;
        let n = schema.expand(&rec, &order, k + 1, &mut |t| {
            assert!(order.is_satisfied(t));
            expanded += 1;
            Ok(())
        }).unwrap();
        prop_assert_eq!(n, want);
        prop_assert_eq!(expanded, want);
        prop_assert_eq!(schema.count(&rec, &order), want);
        let mut rel = Relation::new(schema);
        rel.push(&rec);
        prop_assert_eq!(rel.count_matches(&order), want);
    }
}
