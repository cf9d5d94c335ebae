//! Round-based all-to-all exchange on top of a [`Transport`].
//!
//! Every worker runs the same sequence of exchanges. In each round a worker
//! streams records to arbitrary peers, then sends `End` to everyone and drains
//! its inbox until every peer has sent `End` for that round. Messages for a
//! later round that arrive early are stashed.

use std::mem;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

use super::transport::{Envelope, Payload, Transport};

/// Integers per outgoing message before a partial buffer is flushed.
pub const DEFAULT_CHUNK: usize = 1 << 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    /// Payload integers received from other workers.
    pub recv_integers: u64,
    pub sent_integers: u64,
    /// Time blocked in the transport (send or receive).
    pub wait: Duration,
    pub rounds: u32,
}

pub struct Comm {
    transport: Box<dyn Transport>,
    round: u32,
    stash: Vec<Envelope>,
    stats: CommStats,
    chunk: usize,
}

pub struct Outbox<'a> {
    comm: &'a mut Comm,
    bufs: Vec<Vec<u32>>,
    counted: bool,
}

impl Outbox<'_> {
    pub fn worker_id(&self) -> usize {
        self.comm.worker_id()
    }

    pub fn num_workers(&self) -> usize {
        self.bufs.len()
    }

    /// Queues one whole record for worker `to`. Records are never split
    /// across messages.
    pub fn push(&mut self, to: usize, record: &[u32]) -> Result<()> {
        self.push_parts(to, &[record])
    }

    pub fn push_parts(&mut self, to: usize, parts: &[&[u32]]) -> Result<()> {
        let buf = &mut self.bufs[to];
        for p in parts {
            buf.extend_from_slice(p);
        }
        if to != self.comm.worker_id() && buf.len() >= self.comm.chunk {
            self.flush_to(to)?;
        }
        Ok(())
    }

    fn flush_to(&mut self, to: usize) -> Result<()> {
        if self.bufs[to].is_empty() {
            return Ok(());
        }
        let data = mem::take(&mut self.bufs[to]);
        self.comm.send(to, Payload::Data(data), self.counted)
    }
}

impl Comm {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Comm {
            transport,
            round: 0,
            stash: Vec::new(),
            stats: CommStats::default(),
            chunk: DEFAULT_CHUNK,
        }
    }

    pub fn with_chunk(mut self, ints: usize) -> Self {
        self.chunk = ints.max(1);
        self
    }

    pub fn worker_id(&self) -> usize {
        self.transport.worker_id()
    }

    pub fn num_workers(&self) -> usize {
        self.transport.num_workers()
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    fn send(&mut self, to: usize, payload: Payload, counted: bool) -> Result<()> {
        if counted {
            if let Payload::Data(d) = &payload {
                self.stats.sent_integers += d.len() as u64;
            }
        }
        let t = Instant::now();
        let r = self.transport.send(to, self.round, payload);
        self.stats.wait += t.elapsed();
        r
    }

    fn recv(&mut self) -> Result<Envelope> {
        let t = Instant::now();
        let r = self.transport.recv();
        self.stats.wait += t.elapsed();
        r
    }

    /// One counted round. `consume` receives whole-record batches, tagged
    /// with the sending worker; the worker's own records bypass the transport.
    pub fn exchange<P, C>(&mut self, produce: P, consume: C) -> Result<()>
    where
        P: FnOnce(&mut Outbox) -> Result<()>,
        C: FnMut(usize, &[u32]) -> Result<()>,
    {
        self.exchange_with(true, produce, consume)
    }

    /// Same as [`exchange`](Self::exchange) but not reflected in the
    /// integer counters (used for control traffic such as result gathering).
    pub fn exchange_with<P, C>(&mut self, counted: bool, produce: P, mut consume: C) -> Result<()>
    where
        P: FnOnce(&mut Outbox) -> Result<()>,
        C: FnMut(usize, &[u32]) -> Result<()>,
    {
        self.round += 1;
        self.stats.rounds += 1;
        let me = self.worker_id();
        let w = self.num_workers();
        let mut out = Outbox {
            bufs: vec![Vec::new(); w],
            comm: self,
            counted,
        };
        produce(&mut out)?;
        for to in (0..w).filter(|&to| to != me) {
            out.flush_to(to)?;
        }
        let local = mem::take(&mut out.bufs[me]);
        drop(out);
        for to in (0..w).filter(|&to| to != me) {
            self.send(to, Payload::End, counted)?;
        }
        self.transport.flush()?;

        let mut remaining = w - 1;
        for env in mem::take(&mut self.stash) {
            if env.round == self.round {
                self.handle(env, counted, &mut remaining, &mut consume)?;
            } else {
                self.stash.push(env);
            }
        }
        if !local.is_empty() {
            consume(me, &local)?;
        }
        drop(local);
        while remaining > 0 {
            let env = self.recv()?;
            if env.round > self.round && env.payload != Payload::Abort {
                self.stash.push(env);
                continue;
            }
            self.handle(env, counted, &mut remaining, &mut consume)?;
        }
        Ok(())
    }

    fn handle<C>(&mut self, env: Envelope, counted: bool, remaining: &mut usize, consume: &mut C) -> Result<()>
    where
        C: FnMut(usize, &[u32]) -> Result<()>,
    {
        debug_assert!(env.round <= self.round || env.payload == Payload::Abort);
        match env.payload {
            Payload::Abort => Err(Error::PeerAborted(env.from)),
            Payload::End => {
                *remaining -= 1;
                Ok(())
            }
            Payload::Data(d) => {
                if counted {
                    self.stats.recv_integers += d.len() as u64;
                }
                consume(env.from, &d)
            }
        }
    }

    /// Synchronises all workers without moving data.
    pub fn barrier(&mut self) -> Result<()> {
        self.exchange_with(false, |_| Ok(()), |_, _| Ok(()))
    }

    /// Every worker contributes `data`; every worker gets all contributions
    /// indexed by worker id. Not counted.
    pub fn all_gather(&mut self, data: &[u32]) -> Result<Vec<Vec<u32>>> {
        let w = self.num_workers();
        let mut got = vec![Vec::new(); w];
        self.exchange_with(
            false,
            |out| {
                for to in 0..w {
                    out.push(to, data)?;
                }
                Ok(())
            },
            |from, d| {
                got[from].extend_from_slice(d);
                Ok(())
            },
        )?;
        Ok(got)
    }

    /// Tells every peer to stop. Best effort: failures are ignored.
    pub fn abort(&mut self) {
        let me = self.worker_id();
        for to in (0..self.num_workers()).filter(|&to| to != me) {
            let _ = self.transport.send(to, self.round, Payload::Abort);
        }
        let _ = self.transport.flush();
    }
}
