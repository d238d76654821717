//! Blocking client and a multi-connection trace replayer.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use calm_core::backend::{feedback_rating, FEEDBACK_NOISE_SD};
use calm_core::rng::stream;
use calm_core::workload::TraceEntry;
use parking_lot::Mutex;

use super::codec::{decode, encode, WireMessage};
use crate::config::ClockMode;
use crate::Error;

pub struct Client {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Result<Self, Error> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        let reader = BufReader::new(writer.try_clone()?);
        Ok(Self { writer, reader })
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<(), Error> {
        self.writer.write_all(encode(msg).as_bytes())?;
        Ok(())
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), Error> {
        self.writer.write_all(bytes)?;
        Ok(())
    }

    /// Blocks for the next message; errors on a closed connection.
    pub fn recv(&mut self) -> Result<WireMessage, Error> {
        let mut line = Vec::new();
        if self.reader.read_until(b'\n', &mut line)? == 0 {
            return Err(Error::Protocol("connection closed".into()));
        }
        decode(&line).map_err(|e| Error::Protocol(e.to_string()))
    }

    pub fn request(&mut self, msg: &WireMessage) -> Result<WireMessage, Error> {
        self.send(msg)?;
        self.recv()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    /// Position in the replayed trace.
    pub index: usize,
    pub request_id: String,
    pub model: String,
    pub domain: String,
    pub arrival_s: f64,
    pub send_s: f64,
    pub receive_s: f64,
    pub latency_s: f64,
    pub queue_wait_s: f64,
    pub service_s: f64,
    pub energy_j: f64,
    pub rating: u8,
    pub cold_start: bool,
    pub cache_hit: bool,
}

#[derive(Debug)]
pub struct ReplayError {
    /// Entries completed before the failure.
    pub partial: Vec<ReplayEntry>,
    pub error: Error,
}

#[derive(Debug, Clone, Copy)]
pub struct ReplayOptions {
    pub connections: usize,
    pub clock: ClockMode,
    /// Real seconds per trace second when pacing on the wall clock.
    pub time_scale: f64,
    pub seed: u64,
}

/// Sends trace entry `i` on connection `i % connections`. On the wall clock
/// each query is sent at its arrival time; on the virtual clock all are sent
/// at once with the arrival carried in the message. Every response is rated
/// and the rating sent back as feedback.
pub fn replay(addr: SocketAddr, trace: &[TraceEntry], opts: ReplayOptions) -> Result<Vec<ReplayEntry>, ReplayError> {
    let n = opts.connections.max(1);
    let mut conns = Vec::with_capacity(n);
    for _ in 0..n {
        match Client::connect(addr) {
            Ok(c) => conns.push(c),
            Err(error) => {
                return Err(ReplayError {
                    partial: Vec::new(),
                    error,
                })
            }
        }
    }
    let log = Arc::new(Mutex::new(Vec::with_capacity(trace.len())));
    let epoch = Instant::now();
    let mut handles = Vec::new();
    for (c, client) in conns.into_iter().enumerate() {
        let mine: Vec<(usize, TraceEntry)> = trace
            .iter()
            .enumerate()
            .filter(|(i, _)| i % n == c)
            .map(|(i, e)| (i, e.clone()))
            .collect();
        let log = Arc::clone(&log);
        handles.push(thread::spawn(move || run_connection(client, c, mine, opts, epoch, log)));
    }
    let mut failure = None;
    for h in handles {
        match h.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => failure = failure.or(Some(e)),
            Err(_) => failure = failure.or(Some(Error::Protocol("replay thread panicked".into()))),
        }
    }
    let mut entries = std::mem::take(&mut *log.lock());
    entries.sort_by_key(|e| e.index);
    match failure {
        None => Ok(entries),
        Some(error) => Err(ReplayError {
            partial: entries,
            error,
        }),
    }
}

fn run_connection(
    client: Client,
    conn: usize,
    entries: Vec<(usize, TraceEntry)>,
    opts: ReplayOptions,
    epoch: Instant,
    log: Arc<Mutex<Vec<ReplayEntry>>>,
) -> Result<(), Error> {
    let Client { writer, mut reader } = client;
    let writer = Arc::new(Mutex::new(writer));
    let sent: Arc<Mutex<Vec<Option<f64>>>> = Arc::new(Mutex::new(vec![None; entries.len()]));
    let clock = move || epoch.elapsed().as_secs_f64() / opts.time_scale;

    let sender = {
        let writer = Arc::clone(&writer);
        let sent = Arc::clone(&sent);
        let entries = entries.clone();
        thread::spawn(move || -> Result<(), Error> {
            for (k, (_, e)) in entries.iter().enumerate() {
                if opts.clock == ClockMode::Wall {
                    let wait = e.arrival_s - clock();
                    if wait > 0.0 {
                        thread::sleep(Duration::from_secs_f64(wait * opts.time_scale));
                    }
                }
                let msg = WireMessage::Query {
                    id: format!("q{k}"),
                    text: e.query_text.clone(),
                    max_tokens: e.max_tokens,
                    domain_hint: Some(e.domain.clone()),
                    arrival_s: (opts.clock == ClockMode::Virtual).then_some(e.arrival_s),
                };
                sent.lock()[k] = Some(clock());
                writer.lock().write_all(encode(&msg).as_bytes())?;
            }
            Ok(())
        })
    };

    let mut rng = stream(opts.seed, &format!("client/{conn}"));
    let mut responses = 0usize;
    let mut acks = 0usize;
    let mut result = Ok(());
    while responses < entries.len() || acks < responses {
        let mut line = Vec::new();
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => {
                result = Err(Error::Protocol("server closed the connection".into()));
                break;
            }
            Err(e) => {
                result = Err(e.into());
                break;
            }
            Ok(_) => {}
        }
        let msg = match decode(&line) {
            Ok(m) => m,
            Err(e) => {
                result = Err(Error::Protocol(e.to_string()));
                break;
            }
        };
        match msg {
            WireMessage::Response {
                id,
                request_id,
                model,
                latency_s,
                queue_wait_s,
                service_s,
                energy_j,
                latent_quality,
                cold_start,
                cache_hit,
                ..
            } => {
                let k: usize = match id.strip_prefix('q').and_then(|s| s.parse().ok()) {
                    Some(k) if k < entries.len() => k,
                    _ => {
                        result = Err(Error::Protocol(format!("reply for unknown query `{id}`")));
                        break;
                    }
                };
                let rating = feedback_rating(latent_quality, FEEDBACK_NOISE_SD, &mut rng);
                let fb = WireMessage::Feedback {
                    id: request_id.clone(),
                    rating,
                };
                if let Err(e) = writer.lock().write_all(encode(&fb).as_bytes()) {
                    result = Err(e.into());
                    break;
                }
                let (index, e) = &entries[k];
                log.lock().push(ReplayEntry {
                    index: *index,
                    request_id,
                    model,
                    domain: e.domain.clone(),
                    arrival_s: e.arrival_s,
                    send_s: sent.lock()[k].unwrap_or(0.0),
                    receive_s: clock(),
                    latency_s,
                    queue_wait_s,
                    service_s,
                    energy_j,
                    rating,
                    cold_start,
                    cache_hit,
                });
                responses += 1;
            }
            WireMessage::FeedbackAck { .. } => acks += 1,
            WireMessage::Error { id, reason, detail } => {
                result = Err(Error::Protocol(format!("{id}: {reason:?}: {detail}")));
                break;
            }
            other => {
                result = Err(Error::Protocol(format!("unexpected message {other:?}")));
                break;
            }
        }
    }
    if result.is_err() {
        let _ = writer.lock().shutdown(std::net::Shutdown::Both);
    }
    let sent_ok = sender.join().unwrap_or_else(|_| Err(Error::Protocol("sender panicked".into())));
    result.and(sent_ok)
}
