use shardmatch::graph::{gnp, random_labels, DataGraph};
use shardmatch::oracle::{brute_force_with_order, compare};
use shardmatch::planner::UnitFamily;
use shardmatch::query::corpus;
use shardmatch::strategies::{effective_order, run, OptFlags, OutputMode, Strategy, StrategyConfig};

fn check(g: &DataGraph, w: usize, tweak: &dyn Fn(&mut StrategyConfig)) {
    for (name, q) in corpus() {
        let base = StrategyConfig::default();
        let want = brute_force_with_order(&q, g, &effective_order(&q, &base), q.is_labelled(), 1e10).unwrap();
        for s in Strategy::ALL {
            let combos = if s.uses_opts() {
                OptFlags::all_combinations()
            } else {
                vec![OptFlags::NONE]
            };
            for opts in combos {
                let mut cfg = StrategyConfig::new(s, opts).with_output(OutputMode::Collect);
                tweak(&mut cfg);
                let r = run(&q, g, w, &cfg).unwrap_or_else(|e| panic!("{name} {s} {opts}: {e}"));
                let got = r.matches.unwrap();
                let d = compare(&want, &got);
                assert!(d.is_empty(), "{name} {s} {opts} w={w}\n{d}");
                assert_eq!(r.count, want.len() as u64);
            }
        }
    }
}

#[test]
fn corpus_on_random_graph_four_workers() {
    check(&gnp(60, 0.15, 1), 4, &|_| {});
}

#[test]
fn small_batches_force_spilling() {
    check(&gnp(40, 0.2, 2), 3, &|c| c.batch_size = 7);
}

#[test]
fn ordered_triangle_partition() {
    check(&gnp(45, 0.2, 3), 5, &|c| c.ordered_triangles = true);
}

#[test]
fn single_worker() {
    check(&gnp(30, 0.25, 4), 1, &|c| c.batch_size = 5);
}

#[test]
fn twintwig_units() {
    let g = gnp(40, 0.2, 5);
    for (name, q) in corpus() {
        let want =
            brute_force_with_order(&q, &g, &effective_order(&q, &StrategyConfig::default()), false, 1e10).unwrap();
        let mut cfg = StrategyConfig::new(Strategy::BinJoin, OptFlags::NONE);
        cfg.unit_family = Some(UnitFamily::TwinTwig);
        assert_eq!(run(&q, &g, 3, &cfg).unwrap().count, want.len() as u64, "{name}");
    }
}

#[test]
fn labelled_corpus() {
    let n = 50;
    let g = gnp(n, 0.25, 6).with_labels(Some(random_labels(n, 2, 9))).unwrap();
    for (name, q) in corpus() {
        let labels: Vec<u32> = (0..q.n() as u32).map(|i| i % 2).collect();
        let ql = q.with_labels(labels).unwrap();
        let want =
            brute_force_with_order(&ql, &g, &effective_order(&ql, &StrategyConfig::default()), true, 1e10).unwrap();
        for s in Strategy::ALL {
            for opts in OptFlags::all_combinations() {
                if !s.uses_opts() && opts != OptFlags::NONE {
                    continue;
                }
                let mut cfg = StrategyConfig::new(s, opts).with_output(OutputMode::Collect);
                cfg.batch_size = 9;
                let r = run(&ql, &g, 3, &cfg).unwrap();
                let d = compare(&want, r.matches.as_ref().unwrap());
                assert!(d.is_empty(), "{name} {s} {opts}\n{d}");
            }
        }
    }
}
