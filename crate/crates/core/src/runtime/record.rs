//! Flat u32 encoding of partial matches.
//!
//! A record stores the concrete values first (one per concrete vertex of the
//! schema), then for every compressed vertex a length followed by that many
//! candidate values. Candidate arrays are kept filtered against the concrete
//! values of their record: no duplicates of a concrete value and no violation
//! of the order between the compressed vertex and a concrete one.

use crate::error::Result;
use crate::graph::VertexId;
use crate::query::{bit, PartialOrder, VertexSet};

pub const UNMATCHED: VertexId = VertexId::MAX;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub concrete: Vec<usize>,
    pub compressed: Vec<usize>,
}

impl Schema {
    pub fn new(concrete: Vec<usize>, compressed: Vec<usize>) -> Self {
        Schema { concrete, compressed }
    }

    pub fn vertices(&self) -> VertexSet {
        self.concrete.iter().chain(&self.compressed).fold(0, |s, &v| s | bit(v))
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        self.concrete.iter().position(|&x| x == v)
    }

    /// Length of the record starting at `data[0]`.
    pub fn record_len(&self, data: &[u32]) -> usize {
        let mut at = self.concrete.len();
        for _ in 0..self.compressed.len() {
            at += 1 + data[at] as usize;
        }
        at
    }

    pub fn iter<'a>(&'a self, data: &'a [u32]) -> RecordIter<'a> {
        RecordIter { schema: self, data }
    }

    /// Candidate arrays of a record, in `compressed` order.
    pub fn arrays<'a>(&self, rec: &'a [u32]) -> impl Iterator<Item = &'a [u32]> + 'a {
        let mut at = self.concrete.len();
        let k = self.compressed.len();
        (0..k).map(move |_| {
            let len = rec[at] as usize;
            let a = &rec[at + 1..at + 1 + len];
            at += 1 + len;
            a
        })
    }

    /// Number of full matches a record stands for.
    pub fn count(&self, rec: &[u32], order: &PartialOrder) -> u64 {
        match self.compressed.len() {
            0 => 1,
            1 => rec[self.concrete.len()] as u64,
            _ => {
                let mut n = 0u64;
                self.expand_with(rec, order, self.max_vertex() + 1, &mut |_| {
                    n += 1;
                    Ok(())
                })
                .expect("counting cannot fail");
                n
            }
        }
    }

    fn max_vertex(&self) -> usize {
        self.concrete.iter().chain(&self.compressed).copied().max().unwrap_or(0)
    }

    /// Expands a record into full tuples indexed by query vertex (length `n`,
    /// [`UNMATCHED`] for vertices outside the schema). Compressed values are
    /// checked for injectivity and order among themselves.
    pub fn expand(
        &self,
        rec: &[u32],
        order: &PartialOrder,
        n: usize,
        sink: &mut dyn FnMut(&[VertexId]) -> Result<()>,
    ) -> Result<u64> {
        self.expand_with(rec, order, n, sink)
    }

    fn expand_with(
        &self,
        rec: &[u32],
        order: &PartialOrder,
        n: usize,
        sink: &mut dyn FnMut(&[VertexId]) -> Result<()>,
    ) -> Result<u64> {
        let mut t = vec![UNMATCHED; n];
        for (i, &v) in self.concrete.iter().enumerate() {
            t[v] = rec[i];
        }
        let arrays: Vec<&[u32]> = self.arrays(rec).collect();
        let mut count = 0;
        expand_rec(&self.compressed, &arrays, order, 0, &mut t, &mut count, sink)?;
        Ok(count)
    }
}

fn expand_rec(
    vs: &[usize],
    arrays: &[&[u32]],
    order: &PartialOrder,
    i: usize,
    t: &mut [VertexId],
    count: &mut u64,
    sink: &mut dyn FnMut(&[VertexId]) -> Result<()>,
) -> Result<()> {
    if i == vs.len() {
        *count += 1;
        return sink(t);
    }
    let v = vs[i];
    'cand: for &c in arrays[i] {
        for &u in &vs[..i] {
            if t[u] == c || !order_ok(order, v, c, u, t[u]) {
                continue 'cand;
            }
        }
        t[v] = c;
        expand_rec(vs, arrays, order, i + 1, t, count, sink)?;
    }
    t[v] = UNMATCHED;
    Ok(())
}

/// Whether `f(a) = x` and `f(b) = y` agree with the order.
#[inline]
pub fn order_ok(order: &PartialOrder, a: usize, x: VertexId, b: usize, y: VertexId) -> bool {
    if order.is_empty() {
        return true;
    }
    !(order.less(a, b) && x >= y || order.less(b, a) && y >= x)
}

pub struct RecordIter<'a> {
    schema: &'a Schema,
    data: &'a [u32],
}

impl<'a> Iterator for RecordIter<'a> {
    type Item = &'a [u32];

    fn next(&mut self) -> Option<&'a [u32]> {
        if self.data.is_empty() {
            return None;
        }
        let len = self.schema.record_len(self.data);
        let (rec, rest) = self.data.split_at(len);
        self.data = rest;
        Some(rec)
    }
}

/// A bag of records sharing one schema.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Relation {
    pub schema: Schema,
    data: Vec<u32>,
    len: usize,
}

impl Relation {
    pub fn new(schema: Schema) -> Self {
        Relation {
            schema,
            data: Vec::new(),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn iter(&self) -> RecordIter<'_> {
        self.schema.iter(&self.data)
    }

    pub fn push(&mut self, rec: &[u32]) {
        self.data.extend_from_slice(rec);
        self.len += 1;
    }

    /// Appends a batch of whole records.
    pub fn extend_records(&mut self, data: &[u32]) {
        self.len += self.schema.iter(data).count();
        self.data.extend_from_slice(data);
    }

    /// Appends `n` whole records already written to `data`.
    pub fn extend_counted(&mut self, data: &[u32], n: usize) {
        self.data.extend_from_slice(data);
        self.len += n;
    }

    pub fn count_matches(&self, order: &PartialOrder) -> u64 {
        self.iter().map(|r| self.schema.count(r, order)).sum()
    }

    pub fn clear(&mut self) {
        self.data = Vec::new();
        self.len = 0;
    }
}

/// Writes `arr` filtered against the new binding `f(v) = x` (compressed
/// vertex `a`). Returns the kept length.
pub fn filter_array_into(
    arr: &[u32],
    a: usize,
    v: usize,
    x: VertexId,
    order: &PartialOrder,
    out: &mut Vec<u32>,
) -> usize {
    let lo = order.less(v, a);
    let hi = order.less(a, v);
    let start = out.len();
    out.push(0);
    for &c in arr {
        if c == x || lo && c <= x || hi && c >= x {
            continue;
        }
        out.push(c);
    }
    let len = out.len() - start - 1;
    out[start] = len as u32;
    len
}

/// Appends to `out` the record `rec` extended by the concrete binding
/// `f(v) = x`. Existing arrays are filtered; returns false (and leaves `out`
/// untouched) when the binding is inconsistent or an array runs empty.
pub fn bind(schema: &Schema, rec: &[u32], v: usize, x: VertexId, order: &PartialOrder, out: &mut Vec<u32>) -> bool {
    let k = schema.concrete.len();
    for (i, &u) in schema.concrete.iter().enumerate() {
        if rec[i] == x || !order_ok(order, v, x, u, rec[i]) {
            return false;
        }
    }
    let start = out.len();
    out.extend_from_slice(&rec[..k]);
    out.push(x);
    for (arr, &a) in schema.arrays(rec).zip(&schema.compressed) {
        if filter_array_into(arr, a, v, x, order, out) == 0 {
            out.truncate(start);
            return false;
        }
    }
    true
}
