use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use shardmatch::graph::{gnp, load_edge_list, random_labels, DataGraph};
use shardmatch::oracle::{brute_force_with_order, compare, DEFAULT_GUARD};
use shardmatch::partition::{partition_graph, PartitionMode};
use shardmatch::planner::{CostMode, UnitFamily};
use shardmatch::query::{corpus, corpus_query, QueryGraph};
use shardmatch::runtime::TcpTransport;
use shardmatch::strategies::{
    effective_order, plan, run, run_process, Fault, OptFlags, OutputMode, RunResult, Strategy, StrategyConfig,
    METRICS_CSV_HEADER,
};
use shardmatch::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_VERIFY_FAIL: u8 = 2;
const EXIT_TIME_LIMIT: u8 = 3;
const EXIT_MEMORY_LIMIT: u8 = 4;

#[derive(Parser)]
#[command(name = "shardmatch", version, about = "Distributed subgraph matching")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert an edge list (or an existing CSR file) to the binary CSR format.
    Ingest {
        input: PathBuf,
        /// "vertex label" lines for the edge list
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// keep the input ids instead of renumbering by degree
        #[arg(long)]
        no_relabel: bool,
    },
    /// Build the per-worker partitions and write them to a directory.
    Partition {
        graph: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "hash")]
        partition: PartitionMode,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the execution plan of a query.
    Plan {
        graph: PathBuf,
        query: String,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run a query and print one metrics CSV line.
    Run {
        graph: PathBuf,
        query: String,
        #[command(flatten)]
        run: RunFlags,
        /// each worker writes its matches to <dir>/matches-<worker>.txt
        #[arg(long)]
        output: Option<PathBuf>,
        /// also append the metrics line to this CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
        /// comma-separated host:port list, one per process
        #[arg(long, value_delimiter = ',')]
        hosts: Vec<String>,
        #[arg(long, requires = "hosts")]
        process_index: Option<usize>,
        #[arg(long, default_value = "30s", value_parser = humantime::parse_duration)]
        connect_timeout: Duration,
    },
    /// Check every strategy and optimization combination against the oracle.
    Verify {
        /// graph to check on; random G(n, p) graphs otherwise
        #[arg(long)]
        graph: Option<PathBuf>,
        /// query files or corpus names; the whole corpus by default
        #[arg(long, value_delimiter = ',')]
        queries: Vec<String>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 0.15)]
        p: f64,
        /// random vertex labels drawn from this many values (queries get v mod k)
        #[arg(long)]
        labels: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 7)]
        batch_size: usize,
        #[arg(long, value_parser = parse_fault)]
        fault: Option<Fault>,
    },
    /// Print graph statistics.
    Stats { graph: PathBuf },
}

#[derive(Args, Clone)]
struct RunFlags {
    #[arg(long, default_value = "woptjoin")]
    strategy: Strategy,
    #[arg(long, overrides_with = "no_batching")]
    batching: bool,
    #[arg(long)]
    no_batching: bool,
    #[arg(long)]
    trindexing: bool,
    #[arg(long)]
    compression: bool,
    #[arg(long, default_value_t = 1_000_000)]
    batch_size: usize,
    /// defaults to the number of cores
    #[arg(long)]
    workers: Option<usize>,
    /// hash, triangle or triangle-ordered; triangle modes turn on triangle indexing
    #[arg(long)]
    partition: Option<PartitionMode>,
    #[arg(long, value_parser = humantime::parse_duration)]
    time_limit: Option<Duration>,
    /// bytes, e.g. 512MiB or 4GB
    #[arg(long, value_parser = parse_bytes)]
    mem_limit: Option<u64>,
    /// star, twintwig or clique
    #[arg(long, value_parser = parse_family)]
    units: Option<UnitFamily>,
    #[arg(long, default_value = "er")]
    cost_model: CostMode,
    /// enumerate all automorphic copies of each match
    #[arg(long)]
    no_symmetry_breaking: bool,
    #[arg(long)]
    spill_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_fault, hide = true)]
    fault: Option<Fault>,
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    s.parse::<bytesize::ByteSize>().map(|b| b.as_u64())
}

fn parse_family(s: &str) -> Result<UnitFamily, String> {
    match s {
        "star" => Ok(UnitFamily::Star),
        "twintwig" | "twin-twig" => Ok(UnitFamily::TwinTwig),
        "clique" => Ok(UnitFamily::Clique),
        _ => Err(format!("unknown unit family {s:?}")),
    }
}

fn parse_fault(s: &str) -> Result<Fault, String> {
    match s {
        "drop-intersection" => Ok(Fault::DropIntersection),
        _ => Err(format!("unknown fault {s:?}")),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunFlags {
    fn config(&self) -> Result<(StrategyConfig, usize)> {
        let mut opts = OptFlags {
            batching: self.batching || !self.no_batching,
            trindexing: self.trindexing,
            compression: self.compression,
        };
        let mut ordered = false;
        match self.partition {
            Some(PartitionMode::Hash) if self.trindexing => bail!("--partition hash contradicts --trindexing"),
            Some(PartitionMode::Hash) | None => {}
            Some(PartitionMode::Triangle) => opts.trindexing = true,
            Some(PartitionMode::TriangleOrdered) => {
                opts.trindexing = true;
                ordered = true;
            }
        }
        let mut cfg = StrategyConfig::new(self.strategy, opts);
        cfg.batch_size = self.batch_size;
        cfg.ordered_triangles = ordered;
        cfg.time_limit = self.time_limit;
        cfg.mem_limit = self.mem_limit;
        cfg.unit_family = self.units;
        cfg.cost_mode = self.cost_model;
        cfg.symmetry_breaking = !self.no_symmetry_breaking;
        cfg.spill_dir = self.spill_dir.clone();
        cfg.fault = self.fault;
        Ok((cfg, self.workers.unwrap_or_else(default_workers)))
    }
}

/// A binary CSR file, or else a text edge list with compacted ids.
fn load_graph(path: &Path, labels: Option<&Path>) -> Result<DataGraph> {
    if labels.is_none() {
        if let Ok(g) = DataGraph::open(path) {
            return Ok(g);
        }
    }
    let edges = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let labels = match labels {
        Some(l) => Some(BufReader::new(
            File::open(l).with_context(|| format!("opening {}", l.display()))?,
        )),
        None => None,
    };
    let loaded = load_edge_list(edges, labels).with_context(|| format!("reading {}", path.display()))?;
    Ok(loaded.graph)
}

/// A query file, or the name of a built-in corpus query.
fn load_query(arg: &str) -> Result<(String, QueryGraph)> {
    let path = Path::new(arg);
    if path.exists() {
        let q = QueryGraph::from_file(path).with_context(|| format!("reading query {arg}"))?;
        let name = path
            .file_stem()
            .map_or(arg.to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, q));
    }
    match corpus_query(arg) {
        Some(q) => Ok((arg.to_string(), q)),
        None => bail!("{arg} is neither a query file nor a corpus query"),
    }
}

fn ingest(input: &Path, labels: Option<&Path>, output: &Path, no_relabel: bool) -> Result<()> {
    let g = load_graph(input, labels)?;
    let g = if no_relabel { g } else { g.relabel_by_degree().0 };
    g.save(output)
        .with_context(|| format!("writing {}", output.display()))?;
    println!(
        "{}: N={} M={} labels={}",
        output.display(),
        g.num_vertices(),
        g.num_edges(),
        g.labels().is_some()
    );
    Ok(())
}

fn partition(graph: &Path, workers: usize, mode: PartitionMode, output: Option<&Path>) -> Result<()> {
    let g = load_graph(graph, None)?;
    let parts = partition_graph(&g, workers, mode, Default::default())?;
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
    }
    println!("worker,owned_vertices,owned_entries,extra_edges");
    for p in &parts {
        let s = p.size();
        println!(
            "{},{},{},{}",
            p.worker_id(),
            p.owned_vertices().len(),
            s.owned_entries,
            s.extra_edges
        );
        if let Some(dir) = output {
            p.save(dir.join(format!("part-{}.bin", p.worker_id())))?;
        }
    }
    Ok(())
}

fn write_csv(path: &Path, row: &str) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{METRICS_CSV_HEADER}")?;
    }
    writeln!(f, "{row}")?;
    Ok(())
}

fn report(name: &str, r: &RunResult, csv: Option<&Path>) -> Result<()> {
    let row = r.csv_row(name);
    println!("{METRICS_CSV_HEADER}");
    println!("{row}");
    if let Some(p) = csv {
        write_csv(p, &row)?;
    }
    Ok(())
}

fn resolve_hosts(hosts: &[String]) -> Result<Vec<SocketAddr>> {
    hosts
        .iter()
        .map(|h| {
            h.to_socket_addrs()
                .with_context(|| format!("resolving {h}"))?
                .next()
                .with_context(|| format!("no address for {h}"))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_cmd(
    graph: &Path,
    query: &str,
    flags: &RunFlags,
    output: Option<PathBuf>,
    csv: Option<&Path>,
    hosts: &[String],
    process_index: Option<usize>,
    connect_timeout: Duration,
) -> Result<()> {
    let g = load_graph(graph, None)?;
    let (name, q) = load_query(query)?;
    let (mut cfg, w) = flags.config()?;
    if let Some(dir) = output {
        fs::create_dir_all(&dir)?;
        cfg.output = OutputMode::Files(dir);
    }
    if hosts.is_empty() {
        let r = run(&q, &g, w, &cfg)?;
        return report(&name, &r, csv);
    }
    let Some(me) = process_index else {
        bail!("--hosts needs --process-index");
    };
    let addrs = resolve_hosts(hosts)?;
    let transport = TcpTransport::connect(&addrs, me, connect_timeout)?;
    if let Some(r) = run_process(&q, &g, Box::new(transport), &cfg)? {
        report(&name, &r, csv)?;
    }
    Ok(())
}

fn plan_cmd(graph: &Path, query: &str, flags: &RunFlags) -> Result<()> {
    let g = load_graph(graph, None)?;
    let (name, q) = load_query(query)?;
    let (cfg, w) = flags.config()?;
    let p = plan(&q, &g, w, &cfg)?;
    println!(
        "query: {name} ({} vertices, {} edges), workers: {w}",
        q.n(),
        q.num_edges()
    );
    print!("{p}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn verify(
    graph: Option<&Path>,
    queries: &[String],
    trials: usize,
    seed: u64,
    n: usize,
    p: f64,
    labels: Option<u32>,
    workers: Option<usize>,
    batch_size: usize,
    fault: Option<Fault>,
) -> Result<bool> {
    let queries: Vec<(String, QueryGraph)> = if queries.is_empty() {
        corpus().into_iter().map(|(n, q)| (n.to_string(), q)).collect()
    } else {
        queries.iter().map(|s| load_query(s)).collect::<Result<_>>()?
    };
    let fixed = graph.map(|p| load_graph(p, None)).transpose()?;
    let (mut checks, mut failed) = (0, 0);
    println!("trial,query,strategy,opts,workers,expected,got,status");
    for t in 0..trials {
        let s = seed.wrapping_add(t as u64);
        let mut g = match &fixed {
            Some(g) => g.clone(),
            None => gnp(n, p, s),
        };
        if let Some(k) = labels {
            let l = random_labels(g.num_vertices(), k, s);
            g = g.with_labels(Some(l))?;
        }
        let w = workers.unwrap_or(2 + (s % 3) as usize);
        for (name, q) in &queries {
            let q = match labels {
                Some(k) => q.with_labels((0..q.n()).map(|v| v as u32 % k).collect())?,
                None => q.clone(),
            };
            let base = StrategyConfig::default();
            let want = brute_force_with_order(&q, &g, &effective_order(&q, &base), q.is_labelled(), DEFAULT_GUARD)?;
            for strategy in Strategy::ALL {
                let combos = if strategy.uses_opts() {
                    OptFlags::all_combinations()
                } else {
                    vec![OptFlags::NONE]
                };
                for opts in combos {
                    let mut cfg = StrategyConfig::new(strategy, opts).with_output(OutputMode::Collect);
                    cfg.batch_size = batch_size;
                    cfg.fault = fault;
                    let got = run(&q, &g, w, &cfg)?.matches.unwrap_or_default();
                    let diff = compare(&want, &got);
                    checks += 1;
                    let status = if diff.is_empty() { "PASS" } else { "FAIL" };
                    println!("{t},{name},{strategy},{opts},{w},{},{},{status}", want.len(), got.len());
                    if !diff.is_empty() {
                        failed += 1;
                        for line in diff.to_string().lines() {
                            println!("  {line}");
                        }
                    }
                }
            }
        }
    }
    let verdict = if failed == 0 { "PASS" } else { "FAIL" };
    println!("verify: {checks} checks, {failed} failed: {verdict}");
    Ok(failed == 0)
}

fn stats(graph: &Path) -> Result<()> {
    let g = load_graph(graph, None)?;
    let s = g.stats();
    println!("vertices: {}", s.num_vertices);
    println!("edges: {}", s.num_edges);
    println!("average degree: {:.3}", s.avg_degree);
    println!("max degree: {}", s.max_degree);
    if !s.label_frequencies.is_empty() {
        println!("labels: {}", s.label_frequencies.len());
        for (l, c) in &s.label_frequencies {
            println!("  {l}: {c}");
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Ingest {
            input,
            labels,
            output,
            no_relabel,
        } => ingest(&input, labels.as_deref(), &output, no_relabel)?,
        Cmd::Partition {
            graph,
            workers,
            partition: mode,
            output,
        } => partition(&graph, workers.unwrap_or_else(default_workers), mode, output.as_deref())?,
        Cmd::Plan { graph, query, run } => plan_cmd(&graph, &query, &run)?,
        Cmd::Run {
            graph,
            query,
            run,
            output,
            csv,
            hosts,
            process_index,
            connect_timeout,
        } => run_cmd(
            &graph,
            &query,
            &run,
            output,
            csv.as_deref(),
            &hosts,
            process_index,
            connect_timeout,
        )?,
        Cmd::Verify {
            graph,
            queries,
            trials,
            seed,
            n,
            p,
            labels,
            workers,
            batch_size,
            fault,
        } => {
            return verify(
                graph.as_deref(),
                &queries,
                trials,
                seed,
                n,
                p,
                labels,
                workers,
                batch_size,
                fault,
            )
        }
        Cmd::Stats { graph } => stats(&graph)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY_FAIL),
        Err(e) => {
            let _ = io::stdout().flush();
            match e.downcast_ref::<Error>() {
                Some(Error::TimeLimit(_)) => {
                    eprintln!("OT: {e}");
                    ExitCode::from(EXIT_TIME_LIMIT)
                }
                Some(Error::MemoryLimit(_)) => {
                    eprintln!("OOM: {e}");
                    ExitCode::from(EXIT_MEMORY_LIMIT)
                }
                _ => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_ERROR)
                }
            }
        }
    }
}
