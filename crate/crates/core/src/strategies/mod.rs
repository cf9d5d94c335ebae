//! The four matching strategies and the driver that deploys them on workers.

pub mod binjoin;
pub mod fullrep;
pub mod local;
pub mod shrcube;
pub mod woptjoin;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::{DataGraph, VertexId};
use crate::partition::{build_partition, partition_graph, GraphPartition, PartitionMode, Placement};
use crate::planner::{
    annotate_compression, candidate_units, choose_order, hypercube_shares, optimal_binjoin_plan,
    select_batching_vertex, BinJoinPlan, CostMode, CostModel, HypercubeShares, UnitFamily, WOptOrder,
};
use crate::query::{symmetry_break_order, PartialOrder, QueryGraph};
use crate::runtime::{peak_memory_bytes, thread_cluster, Budget, Comm, JoinStats, Relation, Transport};

use local::LocalPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    BinJoin,
    WOptJoin,
    ShrCube,
    FullRep,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::BinJoin,
        Strategy::WOptJoin,
        Strategy::ShrCube,
        Strategy::FullRep,
    ];

    /// Whether the optimization flags change anything for this strategy.
    pub fn uses_opts(self) -> bool {
        matches!(self, Strategy::BinJoin | Strategy::WOptJoin)
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "binjoin" => Ok(Strategy::BinJoin),
            "woptjoin" => Ok(Strategy::WOptJoin),
            "shrcube" => Ok(Strategy::ShrCube),
            "fullrep" => Ok(Strategy::FullRep),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::BinJoin => "BinJoin",
            Strategy::WOptJoin => "WOptJoin",
            Strategy::ShrCube => "ShrCube",
            Strategy::FullRep => "FullRep",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OptFlags {
    pub batching: bool,
    pub trindexing: bool,
    pub compression: bool,
}

impl OptFlags {
    pub const NONE: OptFlags = OptFlags {
        batching: false,
        trindexing: false,
        compression: false,
    };

    pub fn all_combinations() -> Vec<OptFlags> {
        (0..8)
            .map(|m| OptFlags {
                batching: m & 1 != 0,
                trindexing: m & 2 != 0,
                compression: m & 4 != 0,
            })
            .collect()
    }
}

impl fmt::Display for OptFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.batching {
            parts.push("batching");
        }
        if self.trindexing {
            parts.push("trindexing");
        }
        if self.compression {
            parts.push("compression");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// Accepts `none`, or names separated by `,` or `+` (`batching`,
/// `trindexing`, `compression`, or their initials).
impl FromStr for OptFlags {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut o = OptFlags::NONE;
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "none" => {}
                "b" | "batch" | "batching" => o.batching = true,
                "t" | "tri" | "trindexing" | "triangle-indexing" => o.trindexing = true,
                "c" | "compress" | "compression" => o.compression = true,
                "all" => {
                    o = OptFlags {
                        batching: true,
                        trindexing: true,
                        compression: true,
                    }
                }
                other => return Err(Error::Config(format!("unknown optimization {other:?}"))),
            }
        }
        Ok(o)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum OutputMode {
    #[default]
    Count,
    /// Keep every match in memory and return it sorted.
    Collect,
    /// Each worker writes its matches to `<dir>/matches-<worker>.txt`.
    Files(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Drops one intersection group from the last WOptJoin level that has
    /// several, so the plan accepts non-matches. Only for testing verification.
    DropIntersection,
}

#[derive(Clone, Debug)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub opts: OptFlags,
    pub batch_size: usize,
    pub output: OutputMode,
    /// Enumerate each subgraph once via the automorphism-breaking order.
    /// Ignored for labelled queries.
    pub symmetry_breaking: bool,
    /// Use the ordered triangle partition when triangle indexing is on.
    pub ordered_triangles: bool,
    /// BinJoin unit family; defaults to stars, or stars and cliques with
    /// triangle indexing.
    pub unit_family: Option<UnitFamily>,
    pub cost_mode: CostMode,
    pub placement: Placement,
    pub time_limit: Option<Duration>,
    pub mem_limit: Option<u64>,
    pub spill_dir: Option<PathBuf>,
    pub fault: Option<Fault>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::WOptJoin,
            opts: OptFlags::NONE,
            batch_size: 1_000_000,
            output: OutputMode::Count,
            symmetry_breaking: true,
            ordered_triangles: false,
            unit_family: None,
            cost_mode: CostMode::Er,
            placement: Placement::Modulo,
            time_limit: None,
            mem_limit: None,
            spill_dir: None,
            fault: None,
        }
    }
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, opts: OptFlags) -> Self {
        StrategyConfig {
            strategy,
            opts,
            ..Default::default()
        }
    }

    pub fn with_output(mut self, output: OutputMode) -> Self {
        self.output = output;
        self
    }

    fn partition_mode(&self) -> Option<PartitionMode> {
        match self.strategy {
            Strategy::FullRep => None,
            Strategy::ShrCube => Some(PartitionMode::Hash),
            Strategy::BinJoin | Strategy::WOptJoin => Some(if !self.opts.trindexing {
                PartitionMode::Hash
            } else if self.ordered_triangles {
                PartitionMode::TriangleOrdered
            } else {
                PartitionMode::Triangle
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanDetail {
    BinJoin(BinJoinPlan),
    WOptJoin(WOptOrder),
    ShrCube(HypercubeShares, LocalPlan),
    FullRep(LocalPlan),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionPlan {
    pub strategy: Strategy,
    pub opts: OptFlags,
    /// Order constraints enforced during matching (empty when labelled or
    /// symmetry breaking is off).
    pub order: PartialOrder,
    pub partition_mode: Option<PartitionMode>,
    pub detail: PlanDetail,
}

impl fmt::Display for ExecutionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "strategy: {}  opts: {}", self.strategy, self.opts)?;
        match self.partition_mode {
            Some(m) => writeln!(f, "partition: {m}")?,
            None => writeln!(f, "partition: full replication")?,
        }
        if self.order.is_empty() {
            writeln!(f, "order constraints: none")?;
        } else {
            writeln!(f, "order constraints: {}", self.order)?;
        }
        match &self.detail {
            PlanDetail::BinJoin(p) => write!(f, "{p}"),
            PlanDetail::WOptJoin(o) => write!(f, "{:?} matching order\n{o}", o.kind),
            PlanDetail::ShrCube(s, l) => writeln!(
                f,
                "shares {s} ({} cells)\ncover {:?} buds {:?}",
                s.cells(),
                l.core,
                l.buds
            ),
            PlanDetail::FullRep(l) => writeln!(f, "cover {:?} buds {:?}", l.core, l.buds),
        }
    }
}

/// The order constraints a run enforces.
pub fn effective_order(q: &QueryGraph, cfg: &StrategyConfig) -> PartialOrder {
    if cfg.symmetry_breaking && !q.is_labelled() {
        symmetry_break_order(q)
    } else {
        PartialOrder::empty(q.n())
    }
}

fn validate(q: &QueryGraph, g: &DataGraph, w: usize, cfg: &StrategyConfig) -> Result<()> {
    if w == 0 {
        return Err(Error::Config("number of workers must be positive".into()));
    }
    if q.is_labelled() && g.labels().is_none() {
        return Err(Error::Config("labelled query needs a labelled data graph".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    Ok(())
}

/// Builds the plan every worker follows.
pub fn plan(q: &QueryGraph, g: &DataGraph, w: usize, cfg: &StrategyConfig) -> Result<ExecutionPlan> {
    validate(q, g, w, cfg)?;
    let order = effective_order(q, cfg);
    let partition_mode = cfg.partition_mode();
    let model = CostModel::from_graph(g, cfg.cost_mode);
    let freq = q.is_labelled().then(|| model.label_frequencies());
    let ordered_part = partition_mode == Some(PartitionMode::TriangleOrdered);
    let detail = match cfg.strategy {
        Strategy::WOptJoin => {
            let mut o = choose_order(q, cfg.opts.compression, freq);
            if cfg.opts.trindexing {
                o = o.with_trindexing_groups(q, ordered_part.then_some(&order));
            }
            if cfg.fault == Some(Fault::DropIntersection) {
                if let Some(i) = (1..o.len()).rev().find(|&i| o.groups[i].len() > 1) {
                    let g = o.groups[i].pop().unwrap();
                    o.sources[i] &= !g.all();
                }
            }
            PlanDetail::WOptJoin(o)
        }
        Strategy::BinJoin => {
            let family = cfg.unit_family.unwrap_or(if cfg.opts.trindexing {
                UnitFamily::Clique
            } else {
                UnitFamily::Star
            });
            if family == UnitFamily::Clique && !cfg.opts.trindexing {
                return Err(Error::Config("clique units need triangle indexing".into()));
            }
            let units = candidate_units(q, family, ordered_part.then_some(&order));
            let mut p = optimal_binjoin_plan(q, &units, &model, !order.is_empty(), family == UnitFamily::Clique)?;
            if cfg.opts.batching {
                select_batching_vertex(&mut p, &order);
            }
            if cfg.opts.compression {
                annotate_compression(&mut p, &order);
            }
            PlanDetail::BinJoin(p)
        }
        Strategy::ShrCube => PlanDetail::ShrCube(hypercube_shares(q, w), LocalPlan::new(q)),
        Strategy::FullRep => PlanDetail::FullRep(LocalPlan::new(q)),
    };
    Ok(ExecutionPlan {
        strategy: cfg.strategy,
        opts: if cfg.strategy.uses_opts() {
            cfg.opts
        } else {
            OptFlags::NONE
        },
        order,
        partition_mode,
        detail,
    })
}

/// Per-worker measurements.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkerReport {
    pub worker: usize,
    pub result_count: u64,
    /// Integers received from other workers (own records excluded).
    pub recv_integers: u64,
    pub sent_integers: u64,
    pub rounds: u32,
    pub total_time: Duration,
    /// Total time minus time blocked on communication.
    pub comp_time: Duration,
    /// WOptJoin: records held after each level, summed over batches.
    pub level_counts: Vec<u64>,
    /// Records produced by every operator before the final output.
    pub intermediate_records: u64,
    /// ShrCube: distinct undirected edges in this worker's cell.
    pub local_edges: u64,
    pub batches: u32,
    pub join: JoinStats,
    pub peak_mem_bytes: u64,
}

fn push_u64(out: &mut Vec<u32>, x: u64) {
    out.push(x as u32);
    out.push((x >> 32) as u32);
}

fn take_u64(it: &mut impl Iterator<Item = u32>) -> u64 {
    let lo = it.next().unwrap_or(0) as u64;
    let hi = it.next().unwrap_or(0) as u64;
    lo | hi << 32
}

impl WorkerReport {
    fn encode(&self) -> Vec<u32> {
        let mut v = Vec::new();
        for x in [
            self.worker as u64,
            self.result_count,
            self.recv_integers,
            self.sent_integers,
            self.rounds as u64,
            self.total_time.as_nanos() as u64,
            self.comp_time.as_nanos() as u64,
            self.intermediate_records,
            self.local_edges,
            self.batches as u64,
            self.join.left_records,
            self.join.right_records,
            self.join.output_records,
            self.join.spilled_runs as u64,
            self.join.ranges as u64,
            self.join.nested_loop_buckets as u64,
            self.join.peak_tuples as u64,
            self.join.max_output_batch as u64,
            self.peak_mem_bytes,
            self.level_counts.len() as u64,
        ] {
            push_u64(&mut v, x);
        }
        for &c in &self.level_counts {
            push_u64(&mut v, c);
        }
        v
    }

    fn decode(data: &[u32]) -> WorkerReport {
        let mut it = data.iter().copied();
        let mut next = || take_u64(&mut it);
        let mut r = WorkerReport {
            worker: next() as usize,
            result_count: next(),
            recv_integers: next(),
            sent_integers: next(),
            rounds: next() as u32,
            total_time: Duration::from_nanos(next()),
            comp_time: Duration::from_nanos(next()),
            intermediate_records: next(),
            local_edges: next(),
            batches: next() as u32,
            ..Default::default()
        };
        r.join = JoinStats {
            left_records: next(),
            right_records: next(),
            output_records: next(),
            spilled_runs: next() as usize,
            ranges: next() as usize,
            nested_loop_buckets: next() as usize,
            peak_tuples: next() as usize,
            max_output_batch: next() as usize,
        };
        r.peak_mem_bytes = next();
        let k = next() as usize;
        r.level_counts = (0..k).map(|_| next()).collect();
        r
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Metrics {
    /// Slowest worker's wall-clock time.
    pub total_time: Duration,
    /// Largest per-worker computation time.
    pub comp_time: Duration,
    /// `total_time - comp_time`.
    pub comm_time: Duration,
    pub max_recv_integers: u64,
    pub total_recv_integers: u64,
    pub total_sent_integers: u64,
    /// Peak resident set size (largest over processes).
    pub peak_mem_bytes: u64,
}

pub const METRICS_CSV_HEADER: &str = "query,strategy,opts,T,T_comp,T_comm,max_recv_integers,peak_mem,result_count";

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub count: u64,
    /// Sorted matches, indexed by query vertex, when collected.
    pub matches: Option<Vec<Vec<VertexId>>>,
    pub metrics: Metrics,
    pub workers: Vec<WorkerReport>,
    pub plan: ExecutionPlan,
}

impl RunResult {
    /// WOptJoin per-level totals over all workers.
    pub fn level_counts(&self) -> Vec<u64> {
        let k = self.workers.iter().map(|w| w.level_counts.len()).max().unwrap_or(0);
        (0..k)
            .map(|i| {
                self.workers
                    .iter()
                    .map(|w| w.level_counts.get(i).copied().unwrap_or(0))
                    .sum()
            })
            .collect()
    }

    pub fn csv_row(&self, query: &str) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{},{},{}",
            query,
            self.plan.strategy,
            self.plan.opts,
            m.total_time.as_secs_f64(),
            m.comp_time.as_secs_f64(),
            m.comm_time.as_secs_f64(),
            m.max_recv_integers,
            m.peak_mem_bytes,
            self.count
        )
    }
}

pub(crate) struct Sink {
    worker: usize,
    n: usize,
    count: u64,
    collect: Option<Vec<Vec<VertexId>>>,
    file: Option<BufWriter<File>>,
}

impl Sink {
    fn new(output: &OutputMode, worker: usize, n: usize) -> Result<Self> {
        let (collect, file) = match output {
            OutputMode::Count => (None, None),
            OutputMode::Collect => (Some(Vec::new()), None),
            OutputMode::Files(dir) => {
                fs::create_dir_all(dir)?;
                let f = File::create(dir.join(format!("matches-{worker}.txt")))?;
                (None, Some(BufWriter::new(f)))
            }
        };
        Ok(Sink {
            worker,
            n,
            count: 0,
            collect,
            file,
        })
    }

    fn wants_tuples(&self) -> bool {
        self.collect.is_some() || self.file.is_some()
    }

    pub(crate) fn tuple(&mut self, t: &[VertexId]) -> Result<()> {
        self.count += 1;
        if let Some(c) = &mut self.collect {
            c.push(t.to_vec());
        }
        if let Some(f) = &mut self.file {
            let line: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Records covering the whole query.
    pub(crate) fn relation(&mut self, rel: &Relation, order: &PartialOrder) -> Result<()> {
        if !self.wants_tuples() {
            self.count += rel.count_matches(order);
            return Ok(());
        }
        let n = self.n;
        for rec in rel.iter() {
            rel.schema.expand(rec, order, n, &mut |t| self.tuple(t))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(u64, Vec<Vec<VertexId>>)> {
        if let Some(f) = &mut self.file {
            f.flush()?;
        }
        log::debug!("worker {} produced {} matches", self.worker, self.count);
        Ok((self.count, self.collect.unwrap_or_default()))
    }
}

pub(crate) struct WorkerCtx<'a> {
    pub q: &'a QueryGraph,
    pub order: &'a PartialOrder,
    pub cfg: &'a StrategyConfig,
    pub comm: &'a mut Comm,
    pub budget: Budget,
    pub sink: Sink,
    pub report: WorkerReport,
}

/// What a worker holds of the data graph.
#[derive(Clone, Copy)]
pub enum WorkerInput<'a> {
    Partition(&'a GraphPartition),
    Full(&'a DataGraph),
}

pub struct WorkerOutcome {
    pub report: WorkerReport,
    pub matches: Vec<Vec<VertexId>>,
}

/// Runs one worker's share of `plan`. All workers must call this with the
/// same plan; on error the peers are told to abort.
pub fn execute_worker(
    q: &QueryGraph,
    plan: &ExecutionPlan,
    input: WorkerInput,
    transport: Box<dyn Transport>,
    cfg: &StrategyConfig,
) -> Result<WorkerOutcome> {
    execute_on(q, plan, input, &mut Comm::new(transport), cfg)
}

fn execute_on(
    q: &QueryGraph,
    plan: &ExecutionPlan,
    input: WorkerInput,
    comm: &mut Comm,
    cfg: &StrategyConfig,
) -> Result<WorkerOutcome> {
    let start = Instant::now();
    let me = comm.worker_id();
    let base = comm.stats();
    let mut ctx = WorkerCtx {
        q,
        order: &plan.order,
        cfg,
        comm,
        budget: Budget::new(cfg.time_limit, cfg.mem_limit).started_at(start),
        sink: Sink::new(&cfg.output, me, q.n())?,
        report: WorkerReport {
            worker: me,
            ..Default::default()
        },
    };
    let r = catch_unwind(AssertUnwindSafe(|| dispatch(&mut ctx, plan, input)))
        .unwrap_or_else(|_| Err(Error::Execution(format!("worker {me} panicked"))));
    if let Err(e) = r {
        if !matches!(e, Error::PeerAborted(_)) {
            ctx.comm.abort();
        }
        return Err(e);
    }
    let stats = ctx.comm.stats();
    let mut report = ctx.report;
    report.total_time = start.elapsed();
    report.comp_time = report.total_time.saturating_sub(stats.wait - base.wait);
    report.recv_integers = stats.recv_integers - base.recv_integers;
    report.sent_integers = stats.sent_integers - base.sent_integers;
    report.rounds = stats.rounds - base.rounds;
    report.peak_mem_bytes = peak_memory_bytes().unwrap_or(0);
    let (count, matches) = ctx.sink.finish()?;
    report.result_count = count;
    Ok(WorkerOutcome { report, matches })
}

fn dispatch(ctx: &mut WorkerCtx, plan: &ExecutionPlan, input: WorkerInput) -> Result<()> {
    ctx.budget.check()?;
    match (&plan.detail, input) {
        (PlanDetail::WOptJoin(o), WorkerInput::Partition(p)) => woptjoin::run(ctx, p, o),
        (PlanDetail::BinJoin(b), WorkerInput::Partition(p)) => binjoin::run(ctx, p, b),
        (PlanDetail::ShrCube(s, l), WorkerInput::Partition(p)) => shrcube::run(ctx, p, s, l),
        (PlanDetail::FullRep(l), WorkerInput::Full(g)) => fullrep::run(ctx, g, l),
        _ => Err(Error::Config(format!(
            "{} cannot run on this graph input",
            plan.strategy
        ))),
    }
}

fn aggregate(plan: ExecutionPlan, outcomes: Vec<WorkerOutcome>, collect: bool) -> RunResult {
    let mut workers = Vec::with_capacity(outcomes.len());
    let mut matches = Vec::new();
    for o in outcomes {
        workers.push(o.report);
        matches.extend(o.matches);
    }
    workers.sort_by_key(|w| w.worker);
    let total_time = workers.iter().map(|w| w.total_time).max().unwrap_or_default();
    let comp_time = workers.iter().map(|w| w.comp_time).max().unwrap_or_default();
    let metrics = Metrics {
        total_time,
        comp_time,
        comm_time: total_time.saturating_sub(comp_time),
        max_recv_integers: workers.iter().map(|w| w.recv_integers).max().unwrap_or(0),
        total_recv_integers: workers.iter().map(|w| w.recv_integers).sum(),
        total_sent_integers: workers.iter().map(|w| w.sent_integers).sum(),
        peak_mem_bytes: workers.iter().map(|w| w.peak_mem_bytes).max().unwrap_or(0),
    };
    let matches = collect.then(|| {
        matches.sort_unstable();
        matches
    });
    RunResult {
        count: workers.iter().map(|w| w.result_count).sum(),
        matches,
        metrics,
        workers,
        plan,
    }
}

/// Prefers the root cause over the peers' "aborted" echoes.
fn first_error(errors: Vec<Error>) -> Error {
    let mut errors = errors;
    let pos = errors
        .iter()
        .position(|e| !matches!(e, Error::PeerAborted(_)))
        .unwrap_or(0);
    errors.swap_remove(pos)
}

/// Plans and runs `q` on `w` in-process workers (one thread each).
pub fn run(q: &QueryGraph, g: &DataGraph, w: usize, cfg: &StrategyConfig) -> Result<RunResult> {
    let p = plan(q, g, w, cfg)?;
    run_planned(q, g, w, cfg, p)
}

pub fn run_planned(
    q: &QueryGraph,
    g: &DataGraph,
    w: usize,
    cfg: &StrategyConfig,
    plan: ExecutionPlan,
) -> Result<RunResult> {
    validate(q, g, w, cfg)?;
    let parts = match plan.partition_mode {
        Some(mode) => partition_graph(g, w, mode, cfg.placement)?,
        None => Vec::new(),
    };
    let transports = thread_cluster(w);
    let results: Vec<Result<WorkerOutcome>> = thread::scope(|s| {
        let handles: Vec<_> = transports
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let input = match parts.get(k) {
                    Some(p) => WorkerInput::Partition(p),
                    None => WorkerInput::Full(g),
                };
                let plan = &plan;
                thread::Builder::new()
                    .name(format!("worker-{k}"))
                    .spawn_scoped(s, move || execute_worker(q, plan, input, Box::new(t), cfg))
                    .expect("spawn worker thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Execution("worker thread panicked".into())))
            })
            .collect()
    });
    let mut outcomes = Vec::with_capacity(w);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(first_error(errors));
    }
    Ok(aggregate(plan, outcomes, cfg.output == OutputMode::Collect))
}

/// One worker of a multi-process deployment. Every process loads the whole
/// graph, keeps its own partition and runs its share; worker 0 gathers the
/// reports (and collected matches) and returns the combined result.
pub fn run_process(
    q: &QueryGraph,
    g: &DataGraph,
    transport: Box<dyn Transport>,
    cfg: &StrategyConfig,
) -> Result<Option<RunResult>> {
    let w = transport.num_workers();
    let me = transport.worker_id();
    let p = plan(q, g, w, cfg)?;
    let part = match p.partition_mode {
        Some(mode) => Some(build_partition(g, w, me, mode, cfg.placement)?),
        None => None,
    };
    let input = match &part {
        Some(p) => WorkerInput::Partition(p),
        None => WorkerInput::Full(g),
    };
    let mut comm = Comm::new(transport);
    let outcome = execute_on(q, &p, input, &mut comm, cfg)?;
    let mut payload = outcome.report.encode();
    payload.insert(0, payload.len() as u32);
    for m in &outcome.matches {
        payload.extend_from_slice(m);
    }
    let all = comm.all_gather(&payload)?;
    if me != 0 {
        return Ok(None);
    }
    let n = q.n();
    let outcomes = all
        .into_iter()
        .map(|d| {
            let k = d[0] as usize;
            let report = WorkerReport::decode(&d[1..1 + k]);
            let matches = d[1 + k..].chunks(n).map(|c| c.to_vec()).collect();
            WorkerOutcome { report, matches }
        })
        .collect();
    Ok(Some(aggregate(p, outcomes, cfg.output == OutputMode::Collect)))
}
