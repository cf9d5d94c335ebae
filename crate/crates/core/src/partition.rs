//! Per-worker views of a data graph: hash partition and triangle partition.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{DataGraph, Label, VertexId};
use crate::intersect::intersect_into;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PartitionMode {
    Hash,
    Triangle,
    /// Stores a closing edge `(u', u'')` at the owner of `u` only when `u < u' < u''`.
    TriangleOrdered,
}

impl PartitionMode {
    pub fn is_triangle(self) -> bool {
        !matches!(self, PartitionMode::Hash)
    }

    fn code(self) -> u64 {
        match self {
            PartitionMode::Hash => 0,
            PartitionMode::Triangle => 1,
            PartitionMode::TriangleOrdered => 2,
        }
    }

    fn from_code(c: u64) -> Result<Self> {
        Ok(match c {
            0 => PartitionMode::Hash,
            1 => PartitionMode::Triangle,
            2 => PartitionMode::TriangleOrdered,
            _ => return Err(Error::InvalidGraph(format!("unknown partition mode {c}"))),
        })
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionMode::Hash => "hash",
            PartitionMode::Triangle => "tri",
            PartitionMode::TriangleOrdered => "tri-ordered",
        })
    }
}

impl FromStr for PartitionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hash" => Ok(PartitionMode::Hash),
            "tri" | "triangle" => Ok(PartitionMode::Triangle),
            "tri-ordered" | "triangle-ordered" => Ok(PartitionMode::TriangleOrdered),
            _ => Err(Error::Config(format!("unknown partition mode {s:?}"))),
        }
    }
}

/// The vertex placement function γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Placement {
    #[default]
    Modulo,
    Seeded(u64),
}

impl Placement {
    #[inline]
    pub fn owner(self, u: VertexId, w: usize) -> usize {
        match self {
            Placement::Modulo => u as usize % w,
            Placement::Seeded(seed) => (splitmix64(u as u64 ^ seed) % w as u64) as usize,
        }
    }

    fn encode(self) -> (u64, u64) {
        match self {
            Placement::Modulo => (0, 0),
            Placement::Seeded(s) => (1, s),
        }
    }

    fn decode(tag: u64, seed: u64) -> Result<Self> {
        match tag {
            0 => Ok(Placement::Modulo),
            1 => Ok(Placement::Seeded(seed)),
            _ => Err(Error::InvalidGraph(format!("unknown placement tag {tag}"))),
        }
    }
}

#[inline]
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

const NOT_OWNED: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct GraphPartition {
    worker_id: usize,
    num_workers: usize,
    mode: PartitionMode,
    placement: Placement,
    owned: Vec<VertexId>,
    offsets: Vec<u64>,
    adjacency: Vec<VertexId>,
    local_index: Vec<u32>,
    extra: Vec<(VertexId, VertexId)>,
    overlay: HashMap<VertexId, Vec<VertexId>>,
    labels: Option<Arc<Vec<Label>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionSize {
    /// Adjacency entries of owned vertices (each undirected edge counts once per endpoint).
    pub owned_entries: usize,
    /// Distinct undirected closing edges held in the triangle overlay.
    pub extra_edges: usize,
}

impl GraphPartition {
    pub fn worker_id(&self) -> usize {
        self.worker_id
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Vertex count of the whole graph.
    pub fn num_vertices(&self) -> usize {
        self.local_index.len()
    }

    #[inline]
    pub fn owner(&self, u: VertexId) -> usize {
        self.placement.owner(u, self.num_workers)
    }

    #[inline]
    pub fn is_owned(&self, u: VertexId) -> bool {
        self.local_index.get(u as usize).is_some_and(|&i| i != NOT_OWNED)
    }

    pub fn owned_vertices(&self) -> &[VertexId] {
        &self.owned
    }

    /// Full neighbor list of an owned vertex.
    #[inline]
    pub fn neighbors(&self, u: VertexId) -> Option<&[VertexId]> {
        match self.local_index.get(u as usize) {
            Some(&i) if i != NOT_OWNED => {
                let i = i as usize;
                Some(&self.adjacency[self.offsets[i] as usize..self.offsets[i + 1] as usize])
            }
            _ => None,
        }
    }

    /// Neighbor lookup merged with the triangle overlay: the full list for an
    /// owned vertex, otherwise whatever closing edges this partition holds.
    #[inline]
    pub fn local_neighbors(&self, u: VertexId) -> &[VertexId] {
        if let Some(nb) = self.neighbors(u) {
            return nb;
        }
        self.overlay.get(&u).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn extra_edges(&self) -> &[(VertexId, VertexId)] {
        &self.extra
    }

    pub fn labels(&self) -> Option<&Arc<Vec<Label>>> {
        self.labels.as_ref()
    }

    #[inline]
    pub fn label(&self, u: VertexId) -> Option<Label> {
        self.labels.as_ref().map(|l| l[u as usize])
    }

    pub fn size(&self) -> PartitionSize {
        PartitionSize {
            owned_entries: self.adjacency.len(),
            extra_edges: self.extra.len(),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        let (tag, seed) = self.placement.encode();
        let header = [
            self.worker_id as u64,
            self.num_workers as u64,
            self.num_vertices() as u64,
            self.mode.code(),
            tag,
            seed,
            self.owned.len() as u64,
            self.adjacency.len() as u64,
            self.extra.len() as u64,
            self.labels.is_some() as u64,
        ];
        for h in header {
            w.write_all(&h.to_le_bytes())?;
        }
        for &o in &self.offsets {
            w.write_all(&o.to_le_bytes())?;
        }
        for &u in self.owned.iter().chain(&self.adjacency) {
            w.write_all(&u.to_le_bytes())?;
        }
        for &(a, b) in &self.extra {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
        }
        if let Some(l) = &self.labels {
            for &x in l.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut h = [0u64; 10];
        for x in h.iter_mut() {
            *x = read_u64(&mut r)?;
        }
        let [worker_id, num_workers, n, mode, tag, seed, n_owned, n_adj, n_extra, has_labels] = h;
        let (n, n_owned, n_adj, n_extra) = (n as usize, n_owned as usize, n_adj as usize, n_extra as usize);
        if num_workers == 0 || worker_id >= num_workers || n_owned > n {
            return Err(Error::InvalidGraph("corrupt partition header".into()));
        }
        let offsets = (0..=n_owned)
            .map(|_| read_u64(&mut r))
            .collect::<io::Result<Vec<_>>>()?;
        let owned = (0..n_owned).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let adjacency = (0..n_adj).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let extra = (0..n_extra)
            .map(|_| Ok((read_u32(&mut r)?, read_u32(&mut r)?)))
            .collect::<io::Result<Vec<_>>>()?;
        let labels = if has_labels == 1 {
            Some(Arc::new(
                (0..n).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?,
            ))
        } else {
            None
        };
        if offsets.last().copied() != Some(n_adj as u64) {
            return Err(Error::InvalidGraph("partition offsets do not match adjacency".into()));
        }
        let mut local_index = vec![NOT_OWNED; n];
        for (i, &u) in owned.iter().enumerate() {
            *local_index
                .get_mut(u as usize)
                .ok_or(Error::VertexOutOfRange(u as u64))? = i as u32;
        }
        Ok(GraphPartition {
            worker_id: worker_id as usize,
            num_workers: num_workers as usize,
            mode: PartitionMode::from_code(mode)?,
            placement: Placement::decode(tag, seed)?,
            owned,
            offsets,
            adjacency,
            local_index,
            overlay: build_overlay(&extra),
            extra,
            labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)?;
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        GraphPartition::read_from(File::open(path)?)
    }
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn build_overlay(extra: &[(VertexId, VertexId)]) -> HashMap<VertexId, Vec<VertexId>> {
    let mut overlay: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
    for &(a, b) in extra {
        overlay.entry(a).or_default().push(b);
        overlay.entry(b).or_default().push(a);
    }
    for list in overlay.values_mut() {
        list.sort_unstable();
    }
    overlay
}

/// Builds the partition of one worker. Other workers' partitions are not materialized.
pub fn build_partition(
    g: &DataGraph,
    num_workers: usize,
    worker_id: usize,
    mode: PartitionMode,
    placement: Placement,
) -> Result<GraphPartition> {
    let labels = g.labels().map(|l| Arc::new(l.to_vec()));
    build_with_labels(g, num_workers, worker_id, mode, placement, labels)
}

fn build_with_labels(
    g: &DataGraph,
    num_workers: usize,
    worker_id: usize,
    mode: PartitionMode,
    placement: Placement,
    labels: Option<Arc<Vec<Label>>>,
) -> Result<GraphPartition> {
    if num_workers == 0 {
        return Err(Error::Config("number of workers must be positive".into()));
    }
    if worker_id >= num_workers {
        return Err(Error::Config(format!(
            "worker {worker_id} out of range for {num_workers} workers"
        )));
    }
    let n = g.num_vertices();
    let owned: Vec<VertexId> = (0..n as VertexId)
        .filter(|&u| placement.owner(u, num_workers) == worker_id)
        .collect();
    let mut local_index = vec![NOT_OWNED; n];
    let mut offsets = Vec::with_capacity(owned.len() + 1);
    let mut adjacency = Vec::new();
    offsets.push(0);
    for (i, &u) in owned.iter().enumerate() {
        local_index[u as usize] = i as u32;
        adjacency.extend_from_slice(g.neighbors(u));
        offsets.push(adjacency.len() as u64);
    }

    let mut extra = Vec::new();
    if mode.is_triangle() {
        let ordered = mode == PartitionMode::TriangleOrdered;
        let mut common = Vec::new();
        for &u in &owned {
            let nu = g.neighbors(u);
            for &a in nu {
                if ordered && a <= u {
                    continue;
                }
                common.clear();
                intersect_into(nu, g.neighbors(a), &mut common);
                extra.extend(common.iter().filter(|&&b| b > a).map(|&b| (a, b)));
            }
        }
        extra.sort_unstable();
        extra.dedup();
    }

    Ok(GraphPartition {
        worker_id,
        num_workers,
        mode,
        placement,
        owned,
        offsets,
        adjacency,
        local_index,
        overlay: build_overlay(&extra),
        extra,
        labels,
    })
}

pub fn partition_graph(
    g: &DataGraph,
    num_workers: usize,
    mode: PartitionMode,
    placement: Placement,
) -> Result<Vec<GraphPartition>> {
    if num_workers == 0 {
        return Err(Error::Config("number of workers must be positive".into()));
    }
    let labels = g.labels().map(|l| Arc::new(l.to_vec()));
    (0..num_workers)
        .map(|k| build_with_labels(g, num_workers, k, mode, placement, labels.clone()))
        .collect()
}

pub fn hash_partition(g: &DataGraph, num_workers: usize) -> Result<Vec<GraphPartition>> {
    partition_graph(g, num_workers, PartitionMode::Hash, Placement::Modulo)
}

pub fn triangle_partition(g: &DataGraph, num_workers: usize, ordered: bool) -> Result<Vec<GraphPartition>> {
    let mode = if ordered {
        PartitionMode::TriangleOrdered
    } else {
        PartitionMode::Triangle
    };
    partition_graph(g, num_workers, mode, Placement::Modulo)
}

pub fn partition_sizes(parts: &[GraphPartition]) -> Vec<PartitionSize> {
    parts.iter().map(GraphPartition::size).collect()
}
