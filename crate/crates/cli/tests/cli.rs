use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shardmatch"))
}

fn sh(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_k4(dir: &Path) -> String {
    let p = dir.join("k4.txt");
    fs::write(&p, "# K_4\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n").unwrap();
    p.to_str().unwrap().to_string()
}

fn ingest_k4(dir: &Path) -> String {
    let csr = dir.join("k4.csr");
    let o = sh(&["ingest", &write_k4(dir), "-o", csr.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    csr.to_str().unwrap().to_string()
}

/// Result count from the CSV row printed by `run`.
fn count_of(o: &Output) -> u64 {
    let out = stdout(o);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    let i = header.iter().position(|h| *h == "result_count").unwrap();
    row[i].parse().unwrap()
}

#[test]
fn ingest_is_deterministic_and_keeps_labels() {
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let again = d.path().join("again.csr");
    assert!(sh(&["ingest", &csr, "-o", again.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&csr).unwrap(), fs::read(&again).unwrap());

    let tri = d.path().join("tri.txt");
    fs::write(&tri, "0 1\n1 2\n2 0\n").unwrap();
    let o = sh(&[
        "ingest",
        tri.to_str().unwrap(),
        "-o",
        d.path().join("t.csr").to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains("N=3 M=3 labels=false"), "{}", stdout(&o));

    let labels = d.path().join("labels.txt");
    fs::write(&labels, "0 1\n1 1\n2 2\n").unwrap();
    let o = sh(&[
        "ingest",
        tri.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "-o",
        d.path().join("tl.csr").to_str().unwrap(),
    ]);
    assert!(stdout(&o).contains("labels=true"), "{}", stdout(&o));
}

#[test]
fn run_counts_triangles_of_k4() {
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let o = sh(&["run", &csr, "triangle", "--strategy", "fullrep", "--workers", "2"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(count_of(&o), 4);
    assert!(stdout(&o).starts_with("query,strategy,opts,T,T_comp,T_comm,max_recv_integers,peak_mem,result_count\n"));
}

#[test]
fn strategies_agree_and_csv_appends() {
    let d = TempDir::new().unwrap();
    let g = d.path().join("g.txt");
    let mut edges = String::new();
    for u in 0..40u32 {
        for v in (u + 1)..40 {
            if (u * 7 + v * 13) % 5 == 0 {
                edges.push_str(&format!("{u} {v}\n"));
            }
        }
    }
    fs::write(&g, edges).unwrap();
    let csv = d.path().join("metrics.csv");
    let mut counts = Vec::new();
    for s in ["woptjoin", "binjoin", "shrcube", "fullrep"] {
        let o = sh(&[
            "run",
            g.to_str().unwrap(),
            "square-diagonal",
            "--strategy",
            s,
            "--workers",
            "3",
            "--compression",
            "--trindexing",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{s}: {o:?}");
        counts.push(count_of(&o));
    }
    assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("query,"));
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), 9);
        for x in &f[3..6] {
            x.parse::<f64>().unwrap();
        }
        for x in &f[6..9] {
            x.parse::<u64>().unwrap();
        }
    }
}

#[test]
fn query_files_and_output_directory() {
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let q = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../queries/four-clique.txt");
    let out = d.path().join("matches");
    let o = sh(&[
        "run",
        &csr,
        q.to_str().unwrap(),
        "--workers",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(count_of(&o), 1);
    let lines: usize = (0..2)
        .map(|k| {
            fs::read_to_string(out.join(format!("matches-{k}.txt")))
                .unwrap()
                .lines()
                .count()
        })
        .sum();
    assert_eq!(lines, 1);
}

#[test]
fn budget_limits_exit_with_ot_and_oom() {
    let d = TempDir::new().unwrap();
    let g = d.path().join("big.txt");
    let mut edges = String::new();
    for u in 0..300u32 {
        for v in (u + 1)..300 {
            if (u ^ v) % 3 != 0 {
                edges.push_str(&format!("{u} {v}\n"));
            }
        }
    }
    fs::write(&g, edges).unwrap();
    let o = sh(&[
        "run",
        g.to_str().unwrap(),
        "five-clique",
        "--strategy",
        "fullrep",
        "--workers",
        "1",
        "--time-limit",
        "1ms",
    ]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("OT"));

    let o = sh(&[
        "run",
        g.to_str().unwrap(),
        "five-clique",
        "--strategy",
        "fullrep",
        "--workers",
        "1",
        "--mem-limit",
        "1KiB",
    ]);
    assert_eq!(o.status.code(), Some(4), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("OOM"));
}

#[test]
fn plan_and_partition_and_stats() {
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let o = sh(&[
        "plan",
        &csr,
        "square-diagonal",
        "--strategy",
        "binjoin",
        "--trindexing",
        "--workers",
        "4",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Join on"), "{}", stdout(&o));
    let o = sh(&["plan", &csr, "triangle", "--strategy", "shrcube", "--workers", "27"]);
    assert!(stdout(&o).contains("shares (3,3,3)"), "{}", stdout(&o));

    let parts = d.path().join("parts");
    let o = sh(&[
        "partition",
        &csr,
        "--workers",
        "2",
        "--partition",
        "triangle",
        "-o",
        parts.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(parts.join("part-0.bin").exists() && parts.join("part-1.bin").exists());
    let total: usize = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 12);

    let o = sh(&["stats", &csr]);
    assert!(stdout(&o).contains("edges: 6"));
}

#[test]
fn verify_passes_fails_and_handles_zero_trials() {
    let o = sh(&["verify", "--trials", "1", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verify: 162 checks, 0 failed: PASS"));

    let o = sh(&[
        "verify",
        "--trials",
        "1",
        "--queries",
        "square",
        "--fault",
        "drop-intersection",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains(",FAIL") && out.contains("unexpected"), "{out}");

    let o = sh(&["verify", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verify: 0 checks, 0 failed: PASS"));

    let o = sh(&[
        "verify",
        "--trials",
        "1",
        "--labels",
        "2",
        "--queries",
        "triangle,square",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn bad_input_is_an_error() {
    let o = sh(&["run", "/nonexistent/graph", "triangle"]);
    assert_eq!(o.status.code(), Some(1));
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let o = sh(&["run", &csr, "no-such-query"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn two_processes_over_tcp() {
    let d = TempDir::new().unwrap();
    let csr = ingest_k4(d.path());
    let ports: Vec<u16> = (0..2)
        .map(|_| TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port())
        .collect();
    let hosts = format!("127.0.0.1:{},127.0.0.1:{}", ports[0], ports[1]);
    let spawned: Vec<_> = (0..2)
        .map(|k| {
            bin()
                .args([
                    "run",
                    &csr,
                    "square-diagonal",
                    "--strategy",
                    "binjoin",
                    "--hosts",
                    &hosts,
                ])
                .args(["--process-index", &k.to_string()])
                .stdout(std::process::Stdio::piped())
                .spawn()
                .unwrap()
        })
        .collect();
    let outs: Vec<Output> = spawned.into_iter().map(|c| c.wait_with_output().unwrap()).collect();
    assert!(outs.iter().all(|o| o.status.success()), "{outs:?}");
    // K_4 holds 6 diamonds (one per removed edge), reported by process 0 only
    assert_eq!(count_of(&outs[0]), 6);
    assert!(stdout(&outs[1]).is_empty());
}
