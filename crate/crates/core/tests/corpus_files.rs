use std::path::PathBuf;

use shardmatch::query::{corpus, QueryGraph};

fn queries_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../queries")
}

#[test]
fn shipped_query_files_match_the_corpus() {
    for (name, q) in corpus() {
        let parsed = QueryGraph::from_file(queries_dir().join(format!("{name}.txt"))).unwrap();
        assert_eq!(parsed, q, "{name}");
        assert_eq!(QueryGraph::parse(&q.to_text()).unwrap(), q);
    }
    let l = QueryGraph::from_file(queries_dir().join("square-diagonal-labelled.txt")).unwrap();
    assert_eq!(l.labels(), Some(&[0, 1, 2, 3][..]));
}
