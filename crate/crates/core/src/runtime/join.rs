//! Buffer-and-Batch hash join.
//!
//! Each side buffers at most `threshold` records in memory. A full buffer is
//! sorted by key hash and written to a temporary run file together with the
//! byte offset of every hash bucket. At the end, buckets are grouped into
//! ranges holding at most `threshold` records per side, and each range is
//! loaded and joined in memory. A single bucket that is too large on its own
//! falls back to a block nested loop over `threshold`-sized chunks.
//! Without a threshold the join stays in memory.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::mem;
use std::path::PathBuf;

use crate::error::Result;
use crate::partition::splitmix64;

use super::budget::Budget;
use super::record::Schema;

const BUCKET_BITS: u32 = 12;
const BUCKETS: usize = 1 << BUCKET_BITS;
/// Output flush size when no threshold is set.
const DEFAULT_FLUSH: usize = 1 << 12;

/// Writes the joined record for a matching pair and reports whether it did.
pub type Combine<'a> = dyn FnMut(&[u32], &[u32], &mut Vec<u32>) -> bool + 'a;

pub fn key_hash(values: impl IntoIterator<Item = u32>) -> u64 {
    values
        .into_iter()
        .fold(0x51_7c_c1_b7_27_22_0a_95, |h, v| splitmix64(h ^ v as u64))
}

fn bucket(h: u64) -> usize {
    (h >> (64 - BUCKET_BITS)) as usize
}

#[derive(Clone, Debug, Default)]
pub struct JoinConfig {
    /// Records per side held in memory; `None` joins fully in memory.
    pub threshold: Option<usize>,
    pub spill_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct JoinStats {
    pub left_records: u64,
    pub right_records: u64,
    pub output_records: u64,
    pub spilled_runs: usize,
    pub ranges: usize,
    pub nested_loop_buckets: usize,
    /// Largest number of records held at once: both input buffers or loaded
    /// ranges plus the pending output batch.
    pub peak_tuples: usize,
    pub max_output_batch: usize,
}

impl JoinStats {
    pub fn merge(&mut self, o: &JoinStats) {
        self.left_records += o.left_records;
        self.right_records += o.right_records;
        self.output_records += o.output_records;
        self.spilled_runs += o.spilled_runs;
        self.ranges += o.ranges;
        self.nested_loop_buckets += o.nested_loop_buckets;
        self.peak_tuples = self.peak_tuples.max(o.peak_tuples);
        self.max_output_batch = self.max_output_batch.max(o.max_output_batch);
    }
}

/// One sorted run inside the side's spill file.
struct Run {
    /// (bucket, byte offset) of every non-empty bucket, ascending.
    buckets: Vec<(u32, u64)>,
    end: u64,
}

impl Run {
    fn start_of(&self, b: usize) -> u64 {
        let i = self.buckets.partition_point(|&(x, _)| (x as usize) < b);
        self.buckets.get(i).map_or(self.end, |&(_, o)| o)
    }
}

struct Side {
    schema: Schema,
    key_pos: Vec<usize>,
    data: Vec<u32>,
    /// (hash, start) per buffered record.
    index: Vec<(u64, usize)>,
    runs: Vec<Run>,
    /// Runs are appended to one file per side.
    file: Option<File>,
    file_len: u64,
    hist: Vec<u64>,
    records: u64,
}

impl Side {
    fn new(schema: Schema, key: &[usize]) -> Self {
        let key_pos = key
            .iter()
            .map(|&v| schema.position(v).expect("join key vertex must be concrete"))
            .collect();
        Side {
            schema,
            key_pos,
            data: Vec::new(),
            index: Vec::new(),
            runs: Vec::new(),
            file: None,
            file_len: 0,
            hist: Vec::new(),
            records: 0,
        }
    }

    fn hash(&self, rec: &[u32]) -> u64 {
        key_hash(self.key_pos.iter().map(|&p| rec[p]))
    }

    fn push(&mut self, rec: &[u32]) {
        let h = self.hash(rec);
        self.index.push((h, self.data.len()));
        self.data.extend_from_slice(rec);
        self.records += 1;
    }

    fn record_at(&self, start: usize) -> &[u32] {
        let len = self.schema.record_len(&self.data[start..]);
        &self.data[start..start + len]
    }

    fn spill(&mut self, dir: Option<&PathBuf>) -> Result<()> {
        if self.index.is_empty() {
            return Ok(());
        }
        if self.hist.is_empty() {
            self.hist = vec![0; BUCKETS];
        }
        let mut index = mem::take(&mut self.index);
        index.sort_unstable_by_key(|&(h, _)| h);
        if self.file.is_none() {
            self.file = Some(match dir {
                Some(d) => tempfile::tempfile_in(d)?,
                None => tempfile::tempfile()?,
            });
        }
        let start = self.file_len;
        let mut file = self.file.as_ref().expect("spill file");
        file.seek(SeekFrom::Start(start))?;
        let mut w = BufWriter::new(file);
        let mut buckets = Vec::new();
        let mut pos = start;
        for &(h, s) in &index {
            let b = bucket(h);
            if buckets.last().is_none_or(|&(x, _)| x as usize != b) {
                buckets.push((b as u32, pos));
            }
            self.hist[b] += 1;
            let rec = self.record_at(s);
            w.write_all(&(rec.len() as u32).to_le_bytes())?;
            for x in rec {
                w.write_all(&x.to_le_bytes())?;
            }
            pos += 4 * (rec.len() as u64 + 1);
        }
        w.flush()?;
        drop(w);
        self.file_len = pos;
        self.runs.push(Run { buckets, end: pos });
        self.data = Vec::new();
        Ok(())
    }

    /// Streams the records of buckets `[lo, hi)` from every run.
    fn scan(&self, lo: usize, hi: usize, f: &mut dyn FnMut(&[u32]) -> Result<()>) -> Result<()> {
        let mut rec = Vec::new();
        let Some(mut file) = self.file.as_ref() else {
            return Ok(());
        };
        for run in &self.runs {
            let (a, b) = (run.start_of(lo), run.start_of(hi));
            if a == b {
                continue;
            }
            file.seek(SeekFrom::Start(a))?;
            let mut r = BufReader::new(file.take(b - a));
            let mut word = [0u8; 4];
            loop {
                match r.read_exact(&mut word) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                    Err(e) => return Err(e.into()),
                }
                let len = u32::from_le_bytes(word) as usize;
                rec.clear();
                for _ in 0..len {
                    r.read_exact(&mut word)?;
                    rec.push(u32::from_le_bytes(word));
                }
                f(&rec)?;
            }
        }
        Ok(())
    }
}

/// Records of one side loaded for an in-memory join.
struct Loaded {
    data: Vec<u32>,
    starts: Vec<usize>,
}

impl Loaded {
    fn new() -> Self {
        Loaded {
            data: Vec::new(),
            starts: Vec::new(),
        }
    }

    fn push(&mut self, rec: &[u32]) {
        self.starts.push(self.data.len());
        self.data.extend_from_slice(rec);
    }

    fn get(&self, i: usize, schema: &Schema) -> &[u32] {
        let s = self.starts[i];
        &self.data[s..s + schema.record_len(&self.data[s..])]
    }
}

pub struct HashJoin {
    left: Side,
    right: Side,
    cfg: JoinConfig,
    stats: JoinStats,
}

struct Output<'a> {
    buf: Vec<u32>,
    pending: usize,
    flush_at: usize,
    sink: &'a mut dyn FnMut(&[u32], usize) -> Result<()>,
}

impl Output<'_> {
    fn flush(&mut self, stats: &mut JoinStats) -> Result<()> {
        if self.pending == 0 {
            return Ok(());
        }
        stats.max_output_batch = stats.max_output_batch.max(self.pending);
        stats.output_records += self.pending as u64;
        (self.sink)(&self.buf, self.pending)?;
        self.buf.clear();
        self.pending = 0;
        Ok(())
    }
}

impl HashJoin {
    /// `key` lists the shared query vertices; both schemas must hold them as
    /// concrete values.
    pub fn new(left: Schema, right: Schema, key: &[usize], cfg: JoinConfig) -> Self {
        HashJoin {
            left: Side::new(left, key),
            right: Side::new(right, key),
            cfg,
            stats: JoinStats::default(),
        }
    }

    fn in_memory(&self) -> usize {
        self.left.index.len() + self.right.index.len()
    }

    fn note_peak(&mut self, extra: usize) {
        self.stats.peak_tuples = self.stats.peak_tuples.max(self.in_memory() + extra);
    }

    pub fn push_left(&mut self, rec: &[u32]) -> Result<()> {
        self.left.push(rec);
        self.note_peak(0);
        if let Some(t) = self.cfg.threshold {
            if self.left.index.len() >= t {
                self.left.spill(self.cfg.spill_dir.as_ref())?;
                self.stats.spilled_runs += 1;
            }
        }
        Ok(())
    }

    pub fn push_right(&mut self, rec: &[u32]) -> Result<()> {
        self.right.push(rec);
        self.note_peak(0);
        if let Some(t) = self.cfg.threshold {
            if self.right.index.len() >= t {
                self.right.spill(self.cfg.spill_dir.as_ref())?;
                self.stats.spilled_runs += 1;
            }
        }
        Ok(())
    }

    /// Joins everything pushed so far. `combine` writes the joined record for
    /// a matching pair into the buffer and returns whether it wrote one;
    /// `sink` receives output in batches of whole records with their count.
    pub fn finish(
        mut self,
        budget: &mut Budget,
        combine: &mut Combine,
        sink: &mut dyn FnMut(&[u32], usize) -> Result<()>,
    ) -> Result<JoinStats> {
        self.stats.left_records = self.left.records;
        self.stats.right_records = self.right.records;
        let flush_at = self.cfg.threshold.unwrap_or(DEFAULT_FLUSH).max(1);
        let mut out = Output {
            buf: Vec::new(),
            pending: 0,
            flush_at,
            sink,
        };
        if self.left.runs.is_empty() && self.right.runs.is_empty() {
            self.join_buffers(budget, combine, &mut out)?;
        } else {
            let dir = self.cfg.spill_dir.clone();
            for side in [&mut self.left, &mut self.right] {
                if !side.index.is_empty() {
                    side.spill(dir.as_ref())?;
                    self.stats.spilled_runs += 1;
                }
            }
            self.join_runs(budget, combine, &mut out)?;
        }
        out.flush(&mut self.stats)?;
        Ok(self.stats)
    }

    fn keys_equal(&self, l: &[u32], r: &[u32]) -> bool {
        self.left
            .key_pos
            .iter()
            .zip(&self.right.key_pos)
            .all(|(&a, &b)| l[a] == r[b])
    }

    fn emit(&mut self, l: &[u32], r: &[u32], held: usize, combine: &mut Combine, out: &mut Output) -> Result<()> {
        let mark = out.buf.len();
        if !combine(l, r, &mut out.buf) {
            out.buf.truncate(mark);
        } else {
            out.pending += 1;
            self.stats.peak_tuples = self.stats.peak_tuples.max(held + out.pending);
            if out.pending >= out.flush_at {
                out.flush(&mut self.stats)?;
            }
        }
        Ok(())
    }

    fn join_buffers(&mut self, budget: &mut Budget, combine: &mut Combine, out: &mut Output) -> Result<()> {
        let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
        for &(h, start) in &self.right.index {
            table.entry(h).or_default().push(start);
        }
        let held = self.in_memory();
        let left_index = mem::take(&mut self.left.index);
        let left_data = mem::take(&mut self.left.data);
        let right_data = mem::take(&mut self.right.data);
        for &(h, ls) in &left_index {
            budget.tick()?;
            let Some(starts) = table.get(&h) else { continue };
            let l = &left_data[ls..ls + self.left.schema.record_len(&left_data[ls..])];
            for &rs in starts {
                let r = &right_data[rs..rs + self.right.schema.record_len(&right_data[rs..])];
                if self.keys_equal(l, r) {
                    self.emit(l, r, held, combine, out)?;
                }
            }
        }
        Ok(())
    }

    fn join_runs(&mut self, budget: &mut Budget, combine: &mut Combine, out: &mut Output) -> Result<()> {
        let t = self.cfg.threshold.unwrap_or(usize::MAX) as u64;
        let hl = |s: &Side, b: usize| s.hist.get(b).copied().unwrap_or(0);
        let mut b = 0;
        while b < BUCKETS {
            let (lb, rb) = (hl(&self.left, b), hl(&self.right, b));
            if lb > t || rb > t {
                if lb > 0 && rb > 0 {
                    self.stats.nested_loop_buckets += 1;
                    self.nested_loop(b, budget, combine, out)?;
                }
                b += 1;
                continue;
            }
            let start = b;
            let (mut l, mut r) = (0, 0);
            while b < BUCKETS {
                let (lb, rb) = (hl(&self.left, b), hl(&self.right, b));
                if lb > t || rb > t || l + lb > t || r + rb > t {
                    break;
                }
                l += lb;
                r += rb;
                b += 1;
            }
            if l > 0 && r > 0 {
                self.stats.ranges += 1;
                self.join_range(start, b, budget, combine, out)?;
            }
        }
        Ok(())
    }

    fn join_range(
        &mut self,
        lo: usize,
        hi: usize,
        budget: &mut Budget,
        combine: &mut Combine,
        out: &mut Output,
    ) -> Result<()> {
        let mut right = Loaded::new();
        self.right.scan(lo, hi, &mut |rec| {
            right.push(rec);
            Ok(())
        })?;
        let mut left = Loaded::new();
        self.left.scan(lo, hi, &mut |rec| {
            left.push(rec);
            Ok(())
        })?;
        let held = left.starts.len() + right.starts.len();
        self.stats.peak_tuples = self.stats.peak_tuples.max(held);
        let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
        for i in 0..right.starts.len() {
            table
                .entry(self.right.hash(right.get(i, &self.right.schema)))
                .or_default()
                .push(i);
        }
        for i in 0..left.starts.len() {
            budget.tick()?;
            let l = left.get(i, &self.left.schema);
            let Some(js) = table.get(&self.left.hash(l)) else {
                continue;
            };
            for &j in js {
                let r = right.get(j, &self.right.schema);
                if self.keys_equal(l, r) {
                    self.emit(l, r, held, combine, out)?;
                }
            }
        }
        Ok(())
    }

    /// Joins one oversized bucket: the right side is read in chunks of at most
    /// `threshold` records and the left side is streamed past each chunk.
    fn nested_loop(&mut self, b: usize, budget: &mut Budget, combine: &mut Combine, out: &mut Output) -> Result<()> {
        let t = self.cfg.threshold.unwrap_or(usize::MAX);
        let rschema = self.right.schema.clone();
        let total = self.right.hist[b] as usize;
        let mut done = 0;
        while done < total {
            let mut chunk = Loaded::new();
            let mut seen = 0;
            self.right.scan(b, b + 1, &mut |rec| {
                if seen >= done && chunk.starts.len() < t {
                    chunk.push(rec);
                }
                seen += 1;
                Ok(())
            })?;
            done += chunk.starts.len();
            let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
            for i in 0..chunk.starts.len() {
                table
                    .entry(self.right.hash(chunk.get(i, &self.right.schema)))
                    .or_default()
                    .push(i);
            }
            let held = chunk.starts.len() + 1;
            self.stats.peak_tuples = self.stats.peak_tuples.max(held);
            let left = mem::take(&mut self.left.runs);
            let left_side = Side {
                schema: self.left.schema.clone(),
                key_pos: self.left.key_pos.clone(),
                data: Vec::new(),
                index: Vec::new(),
                runs: left,
                file: self.left.file.take(),
                file_len: 0,
                hist: Vec::new(),
                records: 0,
            };
            let r = left_side.scan(b, b + 1, &mut |l| {
                budget.tick()?;
                let Some(js) = table.get(&left_side.hash(l)) else {
                    return Ok(());
                };
                for &j in js {
                    let r = chunk.get(j, &rschema);
                    if self.keys_equal(l, r) {
                        self.emit(l, r, held, combine, out)?;
                    }
                }
                Ok(())
            });
            self.left.runs = left_side.runs;
            self.left.file = left_side.file;
            r?;
        }
        Ok(())
    }
}
