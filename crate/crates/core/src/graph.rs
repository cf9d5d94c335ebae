//! Undirected data graphs in compressed-sparse-row form.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type VertexId = u32;
pub type Label = u32;

/// Simple undirected graph. Neighbor lists are strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataGraph {
    offsets: Vec<u64>,
    adjacency: Vec<VertexId>,
    labels: Option<Vec<Label>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphStats {
    pub num_vertices: usize,
    pub num_edges: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub label_frequencies: BTreeMap<Label, usize>,
}

impl DataGraph {
    /// Builds a graph over `n` vertices, dropping self-loops and duplicate edges.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)], labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidGraph(format!("{} labels for {} vertices", l.len(), n)));
            }
        }
        let mut directed: Vec<(VertexId, VertexId)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            if u as usize >= n {
                return Err(Error::VertexOutOfRange(u as u64));
            }
            if v as usize >= n {
                return Err(Error::VertexOutOfRange(v as u64));
            }
            if u != v {
                directed.push((u, v));
                directed.push((v, u));
            }
        }
        directed.sort_unstable();
        directed.dedup();

        let mut offsets = vec![0u64; n + 1];
        for &(u, _) in &directed {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let adjacency = directed.into_iter().map(|(_, v)| v).collect();
        Ok(DataGraph {
            offsets,
            adjacency,
            labels,
        })
    }

    /// Reassembles a graph from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(offsets: Vec<u64>, adjacency: Vec<VertexId>, labels: Option<Vec<Label>>) -> Result<Self> {
        let g = DataGraph {
            offsets,
            adjacency,
            labels,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGraph(m));
        if self.offsets.is_empty() || self.offsets[0] != 0 {
            return bad("offsets must start at 0".into());
        }
        let n = self.num_vertices();
        if *self.offsets.last().unwrap() as usize != self.adjacency.len() {
            return bad("offsets[N] does not match adjacency length".into());
        }
        if !self.adjacency.len().is_multiple_of(2) {
            return bad("odd adjacency length".into());
        }
        if let Some(l) = &self.labels {
            if l.len() != n {
                return bad(format!("{} labels for {} vertices", l.len(), n));
            }
        }
        for u in 0..n {
            if self.offsets[u] > self.offsets[u + 1] {
                return bad(format!("offsets decrease at {u}"));
            }
            let nb = self.neighbors(u as VertexId);
            for (i, &v) in nb.iter().enumerate() {
                if v as usize >= n {
                    return Err(Error::VertexOutOfRange(v as u64));
                }
                if v as usize == u {
                    return bad(format!("self-loop at {u}"));
                }
                if i > 0 && nb[i - 1] >= v {
                    return bad(format!("neighbor list of {u} not strictly increasing"));
                }
                if !self.has_edge(v, u as VertexId) {
                    return bad(format!("edge ({u},{v}) has no reverse"));
                }
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: VertexId) -> &[VertexId] {
        let u = u as usize;
        &self.adjacency[self.offsets[u] as usize..self.offsets[u + 1] as usize]
    }

    pub fn try_neighbors(&self, u: VertexId) -> Result<&[VertexId]> {
        if (u as usize) < self.num_vertices() {
            Ok(self.neighbors(u))
        } else {
            Err(Error::VertexOutOfRange(u as u64))
        }
    }

    #[inline]
    pub fn degree(&self, u: VertexId) -> usize {
        let u = u as usize;
        (self.offsets[u + 1] - self.offsets[u]) as usize
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn label(&self, u: VertexId) -> Option<Label> {
        self.labels.as_ref().map(|l| l[u as usize])
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn adjacency(&self) -> &[VertexId] {
        &self.adjacency
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        (0..self.num_vertices() as VertexId)
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn with_labels(mut self, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.num_vertices() {
                return Err(Error::InvalidGraph(format!(
                    "{} labels for {} vertices",
                    l.len(),
                    self.num_vertices()
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn stats(&self) -> GraphStats {
        let n = self.num_vertices();
        let m = self.num_edges();
        let max_degree = (0..n as VertexId).map(|u| self.degree(u)).max().unwrap_or(0);
        let mut label_frequencies = BTreeMap::new();
        if let Some(l) = &self.labels {
            for &x in l {
                *label_frequencies.entry(x).or_insert(0) += 1;
            }
        }
        GraphStats {
            num_vertices: n,
            num_edges: m,
            avg_degree: if n == 0 { 0.0 } else { 2.0 * m as f64 / n as f64 },
            max_degree,
            label_frequencies,
        }
    }

    /// Renames vertices so that ids are non-decreasing in degree, ties by old id.
    /// Returns the new graph and `mapping[old] = new`.
    pub fn relabel_by_degree(&self) -> (DataGraph, Vec<VertexId>) {
        let n = self.num_vertices();
        let mut order: Vec<VertexId> = (0..n as VertexId).collect();
        order.sort_by_key(|&u| (self.degree(u), u));
        let mut mapping = vec![0 as VertexId; n];
        for (new, &old) in order.iter().enumerate() {
            mapping[old as usize] = new as VertexId;
        }
        (self.permute(&mapping), mapping)
    }

    /// Applies a vertex bijection `mapping[old] = new`.
    pub fn permute(&self, mapping: &[VertexId]) -> DataGraph {
        let n = self.num_vertices();
        assert_eq!(mapping.len(), n);
        let mut inverse = vec![0 as VertexId; n];
        for (old, &new) in mapping.iter().enumerate() {
            inverse[new as usize] = old as VertexId;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::with_capacity(self.adjacency.len());
        offsets.push(0u64);
        for &old in &inverse {
            let start = adjacency.len();
            adjacency.extend(self.neighbors(old).iter().map(|&v| mapping[v as usize]));
            adjacency[start..].sort_unstable();
            offsets.push(adjacency.len() as u64);
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| inverse.iter().map(|&old| l[old as usize]).collect());
        DataGraph {
            offsets,
            adjacency,
            labels,
        }
    }

    pub fn write_binary<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(&(self.num_vertices() as u64).to_le_bytes())?;
        w.write_all(&(self.num_edges() as u64).to_le_bytes())?;
        w.write_all(&(self.labels.is_some() as u64).to_le_bytes())?;
        for &o in &self.offsets {
            w.write_all(&o.to_le_bytes())?;
        }
        for &v in &self.adjacency {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(l) = &self.labels {
            for &x in l {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let n = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let has_labels = match read_u64(&mut r)? {
            0 => false,
            1 => true,
            x => return Err(Error::InvalidGraph(format!("bad label flag {x}"))),
        };
        let offsets = (0..=n).map(|_| read_u64(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let adjacency = (0..2 * m).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?;
        let labels = if has_labels {
            Some((0..n).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?)
        } else {
            None
        };
        DataGraph::from_csr(offsets, adjacency, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(File::create(path)?)?;
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        DataGraph::read_binary(File::open(path)?)
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

/// Output of [`load_edge_list`]: the graph over compacted ids plus the
/// original id of every vertex.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: DataGraph,
    pub original_ids: Vec<u64>,
}

fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, io::Result<String>)> {
    r.lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn parse_pair(line: usize, text: &str) -> Result<Option<(u64, u64)>> {
    let t = text.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    let mut it = t.split_whitespace();
    let mut next = || -> Result<u64> {
        let tok = it.next().ok_or_else(|| Error::parse(line, "expected two integers"))?;
        tok.parse::<u64>()
            .map_err(|_| Error::parse(line, format!("not a non-negative integer: {tok:?}")))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::parse(line, "expected two integers"));
    }
    Ok(Some((a, b)))
}

/// Reads "u v" pairs (and optionally "u label" pairs), compacting the
/// referenced ids to `[0, N)` in increasing original order.
pub fn load_edge_list<R: BufRead, L: BufRead>(edges: R, labels: Option<L>) -> Result<LoadedGraph> {
    let mut raw = Vec::new();
    for (line, text) in data_lines(edges) {
        if let Some(p) = parse_pair(line, &text?)? {
            raw.push(p);
        }
    }
    let mut raw_labels: HashMap<u64, Label> = HashMap::new();
    if let Some(l) = labels {
        for (line, text) in data_lines(l) {
            if let Some((u, x)) = parse_pair(line, &text?)? {
                let x = Label::try_from(x).map_err(|_| Error::parse(line, "label exceeds 32 bits"))?;
                if let Some(prev) = raw_labels.insert(u, x) {
                    if prev != x {
                        return Err(Error::parse(
                            line,
                            format!("vertex {u} has conflicting labels {prev} and {x}"),
                        ));
                    }
                }
            }
        }
    }

    let mut ids: Vec<u64> = raw
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(raw_labels.keys().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() > VertexId::MAX as usize {
        return Err(Error::InvalidGraph("too many vertices".into()));
    }
    let index: HashMap<u64, VertexId> = ids.iter().enumerate().map(|(i, &x)| (x, i as VertexId)).collect();
    let edges: Vec<(VertexId, VertexId)> = raw.iter().map(|(a, b)| (index[a], index[b])).collect();

    let labels = if raw_labels.is_empty() {
        None
    } else {
        let mut l = Vec::with_capacity(ids.len());
        for &x in &ids {
            match raw_labels.get(&x) {
                Some(&lab) => l.push(lab),
                None => return Err(Error::InvalidGraph(format!("vertex {x} has no label"))),
            }
        }
        Some(l)
    };

    Ok(LoadedGraph {
        graph: DataGraph::from_edges(ids.len(), &edges, labels)?,
        original_ids: ids,
    })
}

/// Erdős–Rényi G(n, p), reproducible from `seed`.
pub fn gnp(n: usize, p: f64, seed: u64) -> DataGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as VertexId {
        for v in u + 1..n as VertexId {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    DataGraph::from_edges(n, &edges, None).expect("generated edges are in range")
}

/// Assigns each vertex a label drawn uniformly from `0..num_labels`.
pub fn random_labels(n: usize, num_labels: Label, seed: u64) -> Vec<Label> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..num_labels)).collect()
}

pub fn complete_graph(n: usize) -> DataGraph {
    let edges: Vec<_> = (0..n as VertexId)
        .flat_map(|u| (u + 1..n as VertexId).map(move |v| (u, v)))
        .collect();
    DataGraph::from_edges(n, &edges, None).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> LoadedGraph {
        load_edge_list(text.as_bytes(), None::<&[u8]>).unwrap()
    }

    #[test]
    fn triangle() {
        let g = load("0 1\n1 2\n2 0").graph;
        assert_eq!((g.num_vertices(), g.num_edges()), (3, 3));
        assert_eq!(g.neighbors(0), &[1, 2]);
    }

    #[test]
    fn loops_and_duplicates_are_dropped() {
        let g = load("0 0\n0 1\n1 0").graph;
        assert_eq!((g.num_vertices(), g.num_edges()), (2, 1));
    }

    #[test]
    fn ids_are_compacted() {
        let l = load("# comment\n5 7\n");
        assert_eq!((l.graph.num_vertices(), l.graph.num_edges()), (2, 1));
        assert_eq!(l.original_ids, vec![5, 7]);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = load_edge_list("0 1\n1 x\n".as_bytes(), None::<&[u8]>).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = load_edge_list("0 1 2\n".as_bytes(), None::<&[u8]>).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn label_only_vertex_is_isolated() {
        let l = load_edge_list("0 1\n".as_bytes(), Some("0 3\n1 4\n9 5\n".as_bytes())).unwrap();
        assert_eq!(l.graph.num_vertices(), 3);
        assert_eq!(l.graph.neighbors(2), &[] as &[VertexId]);
        assert_eq!(l.graph.labels(), Some(&[3, 4, 5][..]));
    }

    #[test]
    fn missing_or_conflicting_labels_error() {
        assert!(load_edge_list("0 1\n".as_bytes(), Some("0 3\n".as_bytes())).is_err());
        assert!(load_edge_list("0 1\n".as_bytes(), Some("0 3\n1 2\n0 4\n".as_bytes())).is_err());
    }

    #[test]
    fn relabel_star_and_path() {
        let star = DataGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)], None).unwrap();
        let (_, map) = star.relabel_by_degree();
        assert_eq!(map[0], 3);

        let path = DataGraph::from_edges(3, &[(0, 1), (1, 2)], None).unwrap();
        let (g, map) = path.relabel_by_degree();
        assert_eq!(map, vec![0, 2, 1]);
        assert_eq!(g.neighbors(2), &[0, 1]);
    }

    #[test]
    fn neighbors_and_stats() {
        let path = DataGraph::from_edges(4, &[(0, 1), (1, 2)], None).unwrap();
        assert_eq!(path.neighbors(1), &[0, 2]);
        assert!(path.neighbors(3).is_empty());
        assert!(path.try_neighbors(4).is_err());

        let s = complete_graph(3).stats();
        assert_eq!(
            (s.num_vertices, s.num_edges, s.avg_degree, s.max_degree),
            (3, 3, 2.0, 2)
        );
        let star = DataGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)], None)
            .unwrap()
            .stats();
        assert_eq!((star.avg_degree, star.max_degree), (1.5, 3));
        let empty = DataGraph::from_edges(0, &[], None).unwrap().stats();
        assert_eq!((empty.num_vertices, empty.num_edges, empty.avg_degree), (0, 0, 0.0));
    }

    #[test]
    fn binary_round_trip() {
        let g = gnp(40, 0.2, 7).with_labels(Some(random_labels(40, 3, 1))).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[16..24], &1u64.to_le_bytes());
        let h = DataGraph::read_binary(&buf[..]).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn corrupt_csr_is_rejected() {
        assert!(DataGraph::from_csr(vec![0, 1, 1], vec![1, 0], None).is_err());
        assert!(DataGraph::from_csr(vec![0, 1, 2], vec![1, 0], None).is_ok());
    }
}
