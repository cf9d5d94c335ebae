//! Point-to-point channels between workers: in-process (threads) or TCP.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Data(Vec<u32>),
    /// Sender has nothing more for this round.
    End,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: usize,
    pub round: u32,
    pub payload: Payload,
}

/// Reliable channels preserving per-sender order.
pub trait Transport: Send {
    fn worker_id(&self) -> usize;
    fn num_workers(&self) -> usize;
    fn send(&mut self, to: usize, round: u32, payload: Payload) -> Result<()>;
    /// Blocks until the next envelope from any peer.
    fn recv(&mut self) -> Result<Envelope>;
    /// Pushes buffered bytes to the wire; a no-op for in-process channels.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

pub struct ThreadTransport {
    id: usize,
    peers: Vec<Sender<Envelope>>,
    inbox: Receiver<Envelope>,
}

/// One transport per worker, fully connected.
pub fn thread_cluster(w: usize) -> Vec<ThreadTransport> {
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..w).map(|_| unbounded()).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(id, inbox)| ThreadTransport {
            id,
            peers: senders.clone(),
            inbox,
        })
        .collect()
}

impl Transport for ThreadTransport {
    fn worker_id(&self) -> usize {
        self.id
    }

    fn num_workers(&self) -> usize {
        self.peers.len()
    }

    fn send(&mut self, to: usize, round: u32, payload: Payload) -> Result<()> {
        // a peer that already returned has finished every round, so a
        // closed inbox just drops the message
        let _ = self.peers[to].send(Envelope {
            from: self.id,
            round,
            payload,
        });
        Ok(())
    }

    fn recv(&mut self) -> Result<Envelope> {
        self.inbox
            .recv()
            .map_err(|_| Error::Execution("all channels closed".into()))
    }
}

const KIND_DATA: u8 = 0;
const KIND_END: u8 = 1;
const KIND_ABORT: u8 = 2;

fn write_frame<W: Write>(w: &mut W, round: u32, payload: &Payload) -> io::Result<()> {
    let (kind, data): (u8, &[u32]) = match payload {
        Payload::Data(d) => (KIND_DATA, d),
        Payload::End => (KIND_END, &[]),
        Payload::Abort => (KIND_ABORT, &[]),
    };
    w.write_all(&round.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(&(data.len() as u32).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for x in data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&bytes)
}

fn read_frame<R: Read>(r: &mut R) -> io::Result<(u32, Payload)> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head)?;
    let round = u32::from_le_bytes(head[0..4].try_into().unwrap());
    let len = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
    let mut bytes = vec![0u8; len * 4];
    r.read_exact(&mut bytes)?;
    let payload = match head[4] {
        KIND_DATA => Payload::Data(
            bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        KIND_END => Payload::End,
        KIND_ABORT => Payload::Abort,
        k => {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("bad frame kind {k}"),
            ))
        }
    };
    Ok((round, payload))
}

/// One process per worker, pairwise TCP connections. Worker `i` dials every
/// lower id and accepts from every higher id.
pub struct TcpTransport {
    id: usize,
    writers: Vec<Option<BufWriter<TcpStream>>>,
    inbox: Receiver<Envelope>,
}

impl TcpTransport {
    pub fn connect(hosts: &[SocketAddr], id: usize, timeout: Duration) -> Result<Self> {
        let w = hosts.len();
        if id >= w {
            return Err(Error::Config(format!("process index {id} out of range for {w} hosts")));
        }
        let listener = TcpListener::bind(hosts[id])?;
        let mut streams: Vec<Option<TcpStream>> = (0..w).map(|_| None).collect();
        let deadline = Instant::now() + timeout;
        for (peer, addr) in hosts.iter().enumerate().take(id) {
            let stream = loop {
                match TcpStream::connect(addr) {
                    Ok(s) => break s,
                    Err(e) if Instant::now() < deadline => {
                        log::debug!("worker {id}: waiting for {addr}: {e}");
                        thread::sleep(Duration::from_millis(50));
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            let mut s = stream;
            s.write_all(&(id as u32).to_le_bytes())?;
            streams[peer] = Some(s);
        }
        for _ in id + 1..w {
            let (mut s, _) = listener.accept()?;
            let mut b = [0u8; 4];
            s.read_exact(&mut b)?;
            let peer = u32::from_le_bytes(b) as usize;
            if peer <= id || peer >= w || streams[peer].is_some() {
                return Err(Error::Execution(format!("unexpected handshake from worker {peer}")));
            }
            streams[peer] = Some(s);
        }

        let (tx, inbox) = unbounded();
        let mut writers = Vec::with_capacity(w);
        for (peer, s) in streams.into_iter().enumerate() {
            match s {
                None => writers.push(None),
                Some(s) => {
                    s.set_nodelay(true)?;
                    let mut reader = BufReader::new(s.try_clone()?);
                    let tx: Sender<Envelope> = tx.clone();
                    thread::spawn(move || loop {
                        match read_frame(&mut reader) {
                            Ok((round, payload)) => {
                                if tx
                                    .send(Envelope {
                                        from: peer,
                                        round,
                                        payload,
                                    })
                                    .is_err()
                                {
                                    return;
                                }
                            }
                            Err(_) => return,
                        }
                    });
                    writers.push(Some(BufWriter::with_capacity(1 << 16, s)));
                }
            }
        }
        Ok(TcpTransport { id, writers, inbox })
    }
}

impl Transport for TcpTransport {
    fn worker_id(&self) -> usize {
        self.id
    }

    fn num_workers(&self) -> usize {
        self.writers.len()
    }

    fn send(&mut self, to: usize, round: u32, payload: Payload) -> Result<()> {
        let flush = !matches!(payload, Payload::Data(_));
        let w = self.writers[to]
            .as_mut()
            .ok_or_else(|| Error::Execution(format!("no connection to worker {to}")))?;
        write_frame(w, round, &payload)?;
        if flush {
            w.flush()?;
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Envelope> {
        self.inbox
            .recv()
            .map_err(|_| Error::Execution("all peer connections closed".into()))
    }

    fn flush(&mut self) -> Result<()> {
        for w in self.writers.iter_mut().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, 7, &Payload::Data(vec![1, 2, u32::MAX])).unwrap();
        write_frame(&mut buf, 8, &Payload::End).unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), (7, Payload::Data(vec![1, 2, u32::MAX])));
        assert_eq!(read_frame(&mut r).unwrap(), (8, Payload::End));
    }

    #[test]
    fn thread_channels_preserve_sender_order() {
        let mut t = thread_cluster(2);
        let mut b = t.pop().unwrap();
        let mut a = t.pop().unwrap();
        for i in 0..100 {
            a.send(1, 0, Payload::Data(vec![i])).unwrap();
        }
        for i in 0..100 {
            assert_eq!(b.recv().unwrap().payload, Payload::Data(vec![i]));
        }
        b.send(0, 0, Payload::End).unwrap();
        assert_eq!(a.recv().unwrap().from, 1);
    }

    #[test]
    fn tcp_pair_exchanges_frames() {
        let ports: Vec<SocketAddr> = (0..2)
            .map(|_| {
                let l = TcpListener::bind("127.0.0.1:0").unwrap();
                l.local_addr().unwrap()
            })
            .collect();
        let hosts = ports.clone();
        let h = thread::spawn(move || {
            let mut t = TcpTransport::connect(&hosts, 1, Duration::from_secs(10)).unwrap();
            t.send(0, 3, Payload::Data(vec![42, 43])).unwrap();
            t.send(0, 3, Payload::End).unwrap();
            t.recv().unwrap()
        });
        let mut t = TcpTransport::connect(&ports, 0, Duration::from_secs(10)).unwrap();
        assert_eq!(t.recv().unwrap().payload, Payload::Data(vec![42, 43]));
        assert_eq!(t.recv().unwrap().payload, Payload::End);
        t.send(1, 4, Payload::Abort).unwrap();
        let got = h.join().unwrap();
        assert_eq!((got.from, got.round, got.payload), (0, 4, Payload::Abort));
    }
}
