//! Count / Propose / Intersect extension of partial matches by one vertex.
//!
//! A partial match visits the owner of every group leader once to learn the
//! degrees (Count), then the owner of the leader with the smallest degree
//! proposes that group's candidate set (Propose), and the remaining groups'
//! owners shrink the set in turn (Intersect). A group's candidate set is the
//! leader's adjacency intersected with the triangle-closing edges of its
//! members. The worker holding the final set binds the new vertex.

use std::mem;

use crate::error::Result;
use crate::graph::{Label, VertexId};
use crate::intersect::retain_intersection;
use crate::partition::GraphPartition;
use crate::planner::Group;
use crate::query::{members, PartialOrder};

use super::budget::Budget;
use super::comm::Comm;
use super::record::{bind, order_ok, Relation, Schema};

#[derive(Clone, Debug)]
pub struct Level<'a> {
    pub new_vertex: usize,
    pub groups: &'a [Group],
    pub compress: bool,
    pub label: Option<Label>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Hop {
    Count(usize),
    Propose,
    Intersect(usize),
}

fn hops(groups: usize) -> Vec<Hop> {
    let mut h = Vec::new();
    if groups > 1 {
        h.extend((0..groups).map(Hop::Count));
    }
    h.push(Hop::Propose);
    h.extend((1..groups).map(Hop::Intersect));
    h
}

/// The `j`-th group visited in the Intersect phase: all groups but the
/// proposing one, in plan order.
fn intersect_stop(j: usize, min_idx: usize) -> usize {
    if j - 1 < min_idx {
        j - 1
    } else {
        j
    }
}

struct Stop {
    leader_pos: usize,
    member_pos: Vec<usize>,
}

/// Candidates of one group at the owner of its leader's match, intersected
/// into `acc` (or proposed when `acc` is `None`).
fn group_candidates(part: &GraphPartition, stop: &Stop, rec: &[u32], acc: Option<&mut Vec<VertexId>>) -> Vec<VertexId> {
    let leader = rec[stop.leader_pos];
    let nb = part
        .neighbors(leader)
        .expect("partial match routed to the owner of its leader");
    let mut c = match acc {
        Some(a) => {
            retain_intersection(a, nb);
            mem::take(a)
        }
        None => nb.to_vec(),
    };
    for &p in &stop.member_pos {
        if c.is_empty() {
            break;
        }
        retain_intersection(&mut c, part.local_neighbors(rec[p]));
    }
    c
}

/// Extends every local record by `level.new_vertex`. Returns the records
/// held by this worker afterwards; the schema gains the new vertex either as
/// a concrete value or as a candidate array.
pub fn extend_level(
    comm: &mut Comm,
    part: &GraphPartition,
    rel: Relation,
    level: &Level,
    order: &PartialOrder,
    budget: &mut Budget,
) -> Result<Relation> {
    let schema = rel.schema.clone();
    let stops: Vec<Stop> = level
        .groups
        .iter()
        .map(|g| Stop {
            leader_pos: schema.position(g.leader).expect("sources are concrete"),
            member_pos: members(g.members)
                .map(|y| schema.position(y).expect("sources are concrete"))
                .collect(),
        })
        .collect();
    let g = stops.len();
    assert!(g > 0, "a level needs at least one source");
    let plan = hops(g);

    let mut out_schema = schema.clone();
    if level.compress {
        out_schema.compressed.push(level.new_vertex);
    } else {
        out_schema.concrete.push(level.new_vertex);
    }
    let mut out = Relation::new(out_schema);

    // in flight: [record][state]; Count state [min_deg, min_idx],
    // Intersect state [min_idx, len, candidates..]
    let mut inflight: Vec<u32> = Vec::with_capacity(rel.data().len() + 2 * rel.len());
    for rec in rel.iter() {
        inflight.extend_from_slice(rec);
        if g > 1 {
            inflight.extend_from_slice(&[u32::MAX, 0]);
        } else {
            inflight.push(0);
        }
    }
    drop(rel);
    let state_len = |data: &[u32], at_count: bool| -> usize {
        if at_count {
            2
        } else {
            2 + data[1] as usize
        }
    };

    let last = plan.len() - 1;
    for (step, &hop) in plan.iter().enumerate() {
        budget.check()?;
        // state layout of items currently in flight
        let sending_count = matches!(hop, Hop::Count(_) | Hop::Propose) && g > 1;
        let sending_single = g == 1;
        let items = mem::take(&mut inflight);
        let mut next: Vec<u32> = Vec::new();
        let mut cands: Vec<VertexId> = Vec::new();
        let mut err: Result<()> = Ok(());
        comm.exchange(
            |outbox| {
                let mut at = 0;
                while at < items.len() {
                    let rlen = schema.record_len(&items[at..]);
                    let rec = &items[at..at + rlen];
                    let st = &items[at + rlen..];
                    let slen = if sending_single {
                        1
                    } else {
                        state_len(st, sending_count)
                    };
                    let dest_stop = match hop {
                        Hop::Count(k) => k,
                        Hop::Propose => {
                            if g > 1 {
                                st[1] as usize
                            } else {
                                0
                            }
                        }
                        Hop::Intersect(j) => intersect_stop(j, st[0] as usize),
                    };
                    let dest = part.owner(rec[stops[dest_stop].leader_pos]);
                    outbox.push_parts(dest, &[rec, &st[..slen]])?;
                    at += rlen + slen;
                }
                Ok(())
            },
            |_, data| {
                let mut at = 0;
                while at < data.len() {
                    if let Err(e) = budget.tick() {
                        err = Err(e);
                        return Ok(());
                    }
                    let rlen = schema.record_len(&data[at..]);
                    let rec = &data[at..at + rlen];
                    let st = &data[at + rlen..];
                    let slen = if sending_single {
                        1
                    } else {
                        state_len(st, sending_count)
                    };
                    at += rlen + slen;
                    let candidates: &[VertexId] = match hop {
                        Hop::Count(k) => {
                            let deg = part.neighbors(rec[stops[k].leader_pos]).map_or(0, |n| n.len()) as u32;
                            let (mut md, mut mi) = (st[0], st[1]);
                            if deg < md {
                                md = deg;
                                mi = k as u32;
                            }
                            next.extend_from_slice(rec);
                            next.extend_from_slice(&[md, mi]);
                            continue;
                        }
                        Hop::Propose => {
                            let mi = if g > 1 { st[1] as usize } else { 0 };
                            cands = group_candidates(part, &stops[mi], rec, None);
                            if cands.is_empty() {
                                continue;
                            }
                            if step < last {
                                next.extend_from_slice(rec);
                                next.extend_from_slice(&[mi as u32, cands.len() as u32]);
                                next.extend_from_slice(&cands);
                                continue;
                            }
                            &cands
                        }
                        Hop::Intersect(j) => {
                            let mi = st[0] as usize;
                            let mut acc = st[2..slen].to_vec();
                            cands = group_candidates(part, &stops[intersect_stop(j, mi)], rec, Some(&mut acc));
                            if cands.is_empty() {
                                continue;
                            }
                            if step < last {
                                next.extend_from_slice(rec);
                                next.extend_from_slice(&[mi as u32, cands.len() as u32]);
                                next.extend_from_slice(&cands);
                                continue;
                            }
                            &cands
                        }
                    };
                    finalize(part, &schema, rec, candidates, level, order, &mut out);
                }
                Ok(())
            },
        )?;
        err?;
        inflight = next;
    }
    Ok(out)
}

fn finalize(
    part: &GraphPartition,
    schema: &Schema,
    rec: &[u32],
    candidates: &[VertexId],
    level: &Level,
    order: &PartialOrder,
    out: &mut Relation,
) {
    let v = level.new_vertex;
    let label_ok = |c: VertexId| level.label.is_none() || part.label(c) == level.label;
    if level.compress {
        let mut arr: Vec<u32> = Vec::with_capacity(rec.len() + candidates.len() + 1);
        arr.extend_from_slice(rec);
        let len_at = arr.len();
        arr.push(0);
        'c: for &c in candidates {
            if !label_ok(c) {
                continue;
            }
            for (i, &u) in schema.concrete.iter().enumerate() {
                if rec[i] == c || !order_ok(order, v, c, u, rec[i]) {
                    continue 'c;
                }
            }
            arr.push(c);
        }
        if arr.len() > len_at + 1 {
            arr[len_at] = (arr.len() - len_at - 1) as u32;
            out.push(&arr);
        }
    } else {
        let mut buf = Vec::new();
        let mut n = 0;
        for &c in candidates {
            if label_ok(c) && bind(schema, rec, v, c, order, &mut buf) {
                n += 1;
            }
        }
        out.extend_counted(&buf, n);
    }
}
