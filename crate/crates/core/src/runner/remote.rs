//! Line protocol between a coordinator and remote workers.
//!
//! ```text
//! REQ <id> <model_hash> <query_b64> <seed_lo> <seed_hi>
//! RES <id> <bitvector_hex> <aggregates_csv>
//! ERR <id> <reason>
//! ```
//!
//! See `docs/protocol.md` for the field encodings.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine;
use sha2::{Digest, Sha256};

use super::{run_range, Backend, Job, Local, Outcome, RunError};
use crate::model::{load_query, Network};

pub fn model_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Req {
        id: u64,
        model_hash: String,
        query: String,
        seed_lo: u64,
        seed_hi: u64,
    },
    Res {
        id: u64,
        outcomes: Vec<Outcome>,
    },
    Err {
        id: u64,
        reason: String,
    },
}

fn b64() -> base64::engine::GeneralPurpose {
    base64::engine::general_purpose::STANDARD
}

/// Pack `bits` outcome bits per run, least significant bit first.
pub fn encode_bits(outcomes: &[Outcome], bits: usize) -> String {
    if outcomes.is_empty() {
        return "-".into();
    }
    let mut bytes = vec![0u8; (outcomes.len() * bits).div_ceil(8)];
    for (i, o) in outcomes.iter().enumerate() {
        for j in 0..bits {
            if o.bits >> j & 1 == 1 {
                let pos = i * bits + j;
                bytes[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    hex::encode(bytes)
}

fn encode_aggregates(outcomes: &[Outcome]) -> String {
    if outcomes.is_empty() {
        return "-".into();
    }
    outcomes
        .iter()
        .map(|o| {
            let v = o.value.map_or("-".to_string(), |v| v.to_string());
            let dl = if o.deadlock { "!" } else { "" };
            format!("{v}{dl};{};{}", o.steps, o.resamples)
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn decode_outcomes(bits_hex: &str, aggs: &str, bits: usize) -> Result<Vec<Outcome>, String> {
    if aggs == "-" {
        return Ok(Vec::new());
    }
    let bytes = hex::decode(bits_hex).map_err(|e| format!("bad bitvector: {e}"))?;
    let mut out = Vec::new();
    for (i, a) in aggs.split(',').enumerate() {
        let mut parts = a.split(';');
        let head = parts.next().unwrap_or("");
        let (head, deadlock) = match head.strip_suffix('!') {
            Some(h) => (h, true),
            None => (head, false),
        };
        let value = if head == "-" {
            None
        } else {
            Some(head.parse::<f64>().map_err(|_| format!("bad aggregate {a:?}"))?)
        };
        let mut num = || -> Result<u64, String> {
            parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad aggregate {a:?}"))
        };
        let steps = num()?;
        let resamples = num()?;
        let mut b = 0u8;
        for j in 0..bits {
            let pos = i * bits + j;
            let byte = *bytes.get(pos / 8).ok_or("bitvector too short")?;
            b |= (byte >> (pos % 8) & 1) << j;
        }
        out.push(Outcome {
            bits: b,
            value,
            deadlock,
            work: 0.0,
            steps,
            resamples,
        });
    }
    Ok(out)
}

impl Message {
    /// Wire form; `bits` is the outcome width of the job for responses.
    pub fn encode(&self, bits: usize) -> String {
        match self {
            Message::Req {
                id,
                model_hash,
                query,
                seed_lo,
                seed_hi,
            } => format!(
                "REQ {id} {model_hash} {} {seed_lo} {seed_hi}",
                b64().encode(query.as_bytes())
            ),
            Message::Res { id, outcomes } => format!(
                "RES {id} {} {}",
                encode_bits(outcomes, bits),
                encode_aggregates(outcomes)
            ),
            Message::Err { id, reason } => format!("ERR {id} {}", reason.replace('\n', " ")),
        }
    }

    pub fn decode(line: &str, bits: usize) -> Result<Message, String> {
        let line = line.trim_end_matches(['\r', '\n']);
        let mut it = line.splitn(3, ' ');
        let tag = it.next().unwrap_or("");
        let id: u64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("missing id in {line:?}"))?;
        let rest = it.next().unwrap_or("");
        match tag {
            "REQ" => {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 4 {
                    return Err(format!("malformed request {line:?}"));
                }
                let query = b64()
                    .decode(f[1])
                    .ok()
                    .and_then(|b| String::from_utf8(b).ok())
                    .ok_or("query is not base64 UTF-8")?;
                let seed = |s: &str| s.parse::<u64>().map_err(|_| format!("bad seed {s:?}"));
                Ok(Message::Req {
                    id,
                    model_hash: f[0].to_string(),
                    query,
                    seed_lo: seed(f[2])?,
                    seed_hi: seed(f[3])?,
                })
            }
            "RES" => {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 2 {
                    return Err(format!("malformed response {line:?}"));
                }
                Ok(Message::Res {
                    id,
                    outcomes: decode_outcomes(f[0], f[1], bits)?,
                })
            }
            "ERR" => Ok(Message::Err {
                id,
                reason: rest.to_string(),
            }),
            _ => Err(format!("unknown message {tag:?}")),
        }
    }
}

/// Answer one request line.
pub fn handle(net: &Network, hash: &str, threads: usize, reuse: bool, line: &str) -> String {
    let req = match Message::decode(line, 1) {
        Ok(m @ Message::Req { .. }) => m,
        Ok(_) => {
            return Message::Err {
                id: 0,
                reason: "expected REQ".into(),
            }
            .encode(1)
        }
        Err(e) => return Message::Err { id: 0, reason: e }.encode(1),
    };
    let Message::Req {
        id,
        model_hash,
        query,
        seed_lo,
        seed_hi,
    } = req
    else {
        unreachable!()
    };
    let err = |reason: String| Message::Err { id, reason }.encode(1);
    if model_hash != hash {
        return err(format!("model hash mismatch: worker has {hash}"));
    }
    let job = match load_query(net, &query)
        .map_err(|e| e.to_string())
        .and_then(|q| Job::for_query(&q).map_err(|e| e.to_string()))
    {
        Ok(j) => j,
        Err(e) => return err(e),
    };
    let count = seed_hi.wrapping_sub(seed_lo);
    match run_range(net, &job, seed_lo, 0, count, threads, reuse) {
        Ok(outcomes) => Message::Res { id, outcomes }.encode(job.bits()),
        Err(e) => err(e.to_string()),
    }
}

/// Serve connections until the listener fails.
pub fn serve(listener: TcpListener, net: &Network, hash: &str, threads: usize, reuse: bool) -> std::io::Result<()> {
    std::thread::scope(|s| {
        for conn in listener.incoming() {
            let conn = conn?;
            s.spawn(move || {
                let mut w = match conn.try_clone() {
                    Ok(w) => w,
                    Err(_) => return,
                };
                let r = BufReader::new(conn);
                for line in r.lines() {
                    let Ok(line) = line else { return };
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp = handle(net, hash, threads, reuse, &line);
                    if writeln!(w, "{resp}").and_then(|_| w.flush()).is_err() {
                        return;
                    }
                }
            });
        }
        Ok(())
    })
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// A worker reachable over TCP.
#[derive(Clone, Debug)]
pub struct Endpoint {
    pub addr: String,
    pub timeout: Duration,
}

impl Endpoint {
    pub fn new(addr: impl Into<String>) -> Self {
        Endpoint {
            addr: addr.into(),
            timeout: Duration::from_secs(300),
        }
    }

    fn exchange(&self, req: &Message, bits: usize) -> Result<Message, String> {
        let addr = self
            .addr
            .to_socket_addrs()
            .map_err(|e| format!("{}: {e}", self.addr))?
            .next()
            .ok_or_else(|| format!("{}: no address", self.addr))?;
        let mut s =
            TcpStream::connect_timeout(&addr, Duration::from_secs(5)).map_err(|e| format!("{}: {e}", self.addr))?;
        s.set_read_timeout(Some(self.timeout)).ok();
        writeln!(s, "{}", req.encode(bits)).map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(s)
            .read_line(&mut line)
            .map_err(|e| format!("{}: {e}", self.addr))?;
        if line.is_empty() {
            return Err(format!("{}: connection closed", self.addr));
        }
        Message::decode(&line, bits)
    }

    /// Runs with seeds `seed_lo..seed_hi`. `Ok(Err)` is a refusal by the
    /// worker, `Err` a transport failure.
    pub fn request(
        &self,
        hash: &str,
        query: &str,
        seed_lo: u64,
        seed_hi: u64,
        bits: usize,
    ) -> Result<Result<Vec<Outcome>, String>, String> {
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        let req = Message::Req {
            id,
            model_hash: hash.to_string(),
            query: query.to_string(),
            seed_lo,
            seed_hi,
        };
        match self.exchange(&req, bits)? {
            Message::Res { id: rid, outcomes } if rid == id => {
                if outcomes.len() as u64 != seed_hi.wrapping_sub(seed_lo) {
                    return Err(format!("{}: wrong number of outcomes", self.addr));
                }
                Ok(Ok(outcomes))
            }
            Message::Err { reason, .. } => Ok(Err(reason)),
            other => Err(format!("{}: unexpected reply {other:?}", self.addr)),
        }
    }
}

/// Local threads plus remote workers. Each round is split into equal
/// chunks; a remote chunk that fails twice is recomputed locally, which
/// gives the same outcomes because seeds are fixed by run index.
pub struct Distributed<'a> {
    pub local: Local<'a>,
    pub endpoints: Vec<Endpoint>,
    pub hash: String,
    pub query: String,
}

impl<'a> Distributed<'a> {
    /// Check that every worker accepts the model before any run starts.
    pub fn connect(local: Local<'a>, endpoints: Vec<Endpoint>, hash: String, query: String) -> Result<Self, RunError> {
        for e in &endpoints {
            match e.request(&hash, &query, 0, 0, 1) {
                Ok(Ok(_)) => {}
                Ok(Err(reason)) => return Err(RunError::Remote(format!("{} refused: {reason}", e.addr))),
                Err(msg) => return Err(RunError::Remote(msg)),
            }
        }
        Ok(Distributed {
            local,
            endpoints,
            hash,
            query,
        })
    }
}

impl Backend for Distributed<'_> {
    fn compute(&mut self, job: &Job, lo: u64, hi: u64) -> Result<Vec<Outcome>, RunError> {
        let slots = self.local.threads.max(1) as u64 + self.endpoints.len() as u64;
        let n = hi - lo;
        let chunk = n.div_ceil(slots).max(1);
        let remote_ranges: Vec<(u64, u64)> = (0..self.endpoints.len() as u64)
            .map(|k| {
                let a = (lo + k * chunk).min(hi);
                (a, (a + chunk).min(hi))
            })
            .collect();
        let local_lo = remote_ranges.last().map_or(lo, |r| r.1);
        let Local {
            net,
            master,
            threads,
            reuse,
        } = self.local;
        let bits = job.bits();
        let (hash, query) = (&self.hash, &self.query);
        std::thread::scope(|s| {
            let handles: Vec<_> = self
                .endpoints
                .iter()
                .zip(&remote_ranges)
                .map(|(ep, &(a, b))| {
                    s.spawn(move || -> Result<Vec<Outcome>, RunError> {
                        if a == b {
                            return Ok(Vec::new());
                        }
                        let (slo, shi) = (super::run_seed(master, a), super::run_seed(master, b));
                        for _ in 0..2 {
                            match ep.request(hash, query, slo, shi, bits) {
                                Ok(Ok(o)) => return Ok(o),
                                Ok(Err(reason)) => return Err(RunError::Remote(reason)),
                                Err(_) => continue,
                            }
                        }
                        Ok(run_range(net, job, master, a, b, 1, reuse)?)
                    })
                })
                .collect();
            let local = run_range(net, job, master, local_lo, hi, threads, reuse);
            let mut out = Vec::with_capacity(n as usize);
            for h in handles {
                out.extend(h.join().expect("dispatch thread panicked")?);
            }
            out.extend(local?);
            Ok(out)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(bits: u8, value: Option<f64>, deadlock: bool) -> Outcome {
        Outcome {
            bits,
            value,
            deadlock,
            work: 0.0,
            steps: 3,
            resamples: 4,
        }
    }

    #[test]
    fn bit_order() {
        let v = [o(1, None, false), o(0, None, false), o(1, None, false)];
        assert_eq!(encode_bits(&v, 1), "05");
        let v = [o(2, None, false), o(1, None, false)];
        assert_eq!(encode_bits(&v, 2), "06");
    }

    #[test]
    fn round_trip() {
        let outcomes = vec![o(1, Some(0.1), false), o(0, None, true), o(3, Some(2.5), false)];
        let m = Message::Res { id: 7, outcomes };
        let line = m.encode(2);
        assert_eq!(Message::decode(&line, 2).unwrap(), m);
        let r = Message::Req {
            id: 1,
            model_hash: "ab".into(),
            query: "Pr[<=10](<> T.T3)".into(),
            seed_lo: 5,
            seed_hi: 9,
        };
        assert_eq!(Message::decode(&r.encode(1), 1).unwrap(), r);
        let e = Message::Err {
            id: 3,
            reason: "model hash mismatch".into(),
        };
        assert_eq!(Message::decode(&e.encode(1), 1).unwrap(), e);
    }

    #[test]
    fn empty_response() {
        let m = Message::Res {
            id: 2,
            outcomes: vec![],
        };
        assert_eq!(m.encode(1), "RES 2 - -");
        assert_eq!(Message::decode("RES 2 - -", 1).unwrap(), m);
    }
}
