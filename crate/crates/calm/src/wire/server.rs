//! TCP front end over an [`Orchestrator`].
//!
//! Each connection gets a reader thread and a writer thread; a single
//! executor thread drains the request queue. Replies reach the right client
//! through the `reply_to`/`client_id` stored on each envelope.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use calm_core::engine::{request_id, Execution, Orchestrator};
use calm_core::registry::{Endpoint, ModelRecord};
use calm_core::scheduler::{ClientMeta, RequestEnvelope};
use calm_core::telemetry::MetricKind;
use parking_lot::{Condvar, Mutex};

use super::codec::{decode, encode, ErrorReason, ModelStats, ServerStats, WireMessage};
use crate::config::ClockMode;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerOptions {
    pub clock: ClockMode,
    /// Real seconds per simulated second on the wall clock.
    pub time_scale: f64,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            clock: ClockMode::Virtual,
            time_scale: 1.0,
        }
    }
}

struct State {
    orch: Orchestrator,
    clients: BTreeMap<String, Sender<String>>,
    next_request: usize,
    last_admit: f64,
    free_at: f64,
    served: usize,
    per_model: BTreeMap<String, usize>,
    stopping: bool,
}

struct Shared {
    state: Mutex<State>,
    work: Condvar,
    options: ServerOptions,
    epoch: Instant,
    closed: AtomicBool,
    streams: Mutex<Vec<TcpStream>>,
}

impl Shared {
    fn clock_s(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() / self.options.time_scale
    }

    fn handle(&self, client_id: &str, msg: WireMessage) -> Option<WireMessage> {
        let mut st = self.state.lock();
        match msg {
            WireMessage::Register {
                id,
                model_id,
                description,
                host,
                port,
                display_name,
                profile,
            } => {
                let record = ModelRecord {
                    model_id: model_id.clone(),
                    description,
                    endpoint: Endpoint { host, port },
                    display_name,
                    profile_ref: profile,
                };
                Some(match st.orch.register(record) {
                    Ok(reg) => WireMessage::RegisterAck {
                        id,
                        model_id,
                        fleet_size: reg.fleet_size,
                    },
                    Err(e) => WireMessage::error(id, ErrorReason::Registration, e.to_string()),
                })
            }
            WireMessage::Query {
                id,
                text,
                max_tokens,
                domain_hint,
                arrival_s,
            } => {
                if st.stopping {
                    return Some(WireMessage::error(id, ErrorReason::ShuttingDown, "server is shutting down"));
                }
                let enqueue_time = match self.options.clock {
                    ClockMode::Virtual => st.last_admit.max(arrival_s.unwrap_or(0.0)),
                    ClockMode::Wall => self.clock_s().max(st.last_admit),
                };
                let rid = request_id(st.next_request);
                let epoch = self.epoch;
                let now_ms = move || epoch.elapsed().as_secs_f64() * 1e3;
                let decision = match st.orch.route(&rid, &text, &now_ms) {
                    Ok(d) => d,
                    Err(e) => return Some(WireMessage::error(id, ErrorReason::RoutingUnavailable, e.to_string())),
                };
                let envelope = RequestEnvelope {
                    request_id: rid,
                    query_text: text,
                    selected_model: decision.selected,
                    client: ClientMeta {
                        client_id: client_id.to_string(),
                        reply_to: id.clone(),
                    },
                    enqueue_time,
                    max_tokens,
                    domain_tag: domain_hint,
                };
                match st.orch.admit(envelope) {
                    Ok(_) => {
                        st.next_request += 1;
                        st.last_admit = enqueue_time;
                        self.work.notify_one();
                        None
                    }
                    Err(e) => Some(WireMessage::error(id, ErrorReason::Invalid, e.to_string())),
                }
            }
            WireMessage::Feedback { id, rating } => Some(match st.orch.record_feedback(&id, rating) {
                Ok(model) => WireMessage::FeedbackAck { id, model },
                Err(calm_core::Error::InvalidRating(_)) => {
                    WireMessage::error(id, ErrorReason::Invalid, format!("rating {rating} outside 1..=5"))
                }
                Err(e) => WireMessage::error(id, ErrorReason::UnknownRequest, e.to_string()),
            }),
            WireMessage::StatsRequest { id } => Some(WireMessage::StatsResponse {
                id,
                stats: stats(&st),
            }),
            other => Some(WireMessage::error(
                other.id(),
                ErrorReason::Invalid,
                "message type is server-to-client only",
            )),
        }
    }
}

fn stats(st: &State) -> ServerStats {
    let o = &st.orch;
    let models = o
        .knowledge()
        .models()
        .iter()
        .map(|m| {
            (
                m.model_id.clone(),
                ModelStats {
                    requests: st.per_model.get(&m.model_id).copied().unwrap_or(0),
                    mean_latency_s: m.average(MetricKind::LatencySeconds),
                    mean_energy_j: m.average(MetricKind::EnergyJoules),
                    mean_confidence: m.average(MetricKind::ConfidenceRaw),
                    resident: o.cache().is_resident(&m.model_id),
                },
            )
        })
        .collect();
    ServerStats {
        served: st.served,
        queued: o.queue().len(),
        cache_hits: o.cache().hits(),
        cache_misses: o.cache().misses(),
        peak_footprint_mb: o.cache().peak_footprint_mb(),
        models,
    }
}

fn payload(exec: &Execution) -> String {
    format!(
        "[{}] simulated answer, {} tokens",
        exec.envelope.selected_model, exec.result.tokens_generated
    )
}

fn executor(shared: Arc<Shared>) {
    loop {
        let mut st = shared.state.lock();
        while st.orch.queue().is_empty() && !st.stopping {
            shared.work.wait(&mut st);
        }
        let now = match shared.options.clock {
            ClockMode::Virtual => st.free_at,
            ClockMode::Wall => shared.clock_s(),
        };
        let Some(exec) = st.orch.dispatch(now) else {
            break;
        };
        let mut exec = match exec {
            Ok(e) => e,
            Err(e) => {
                log::warn!("dispatch failed: {e}");
                continue;
            }
        };
        // a request cannot start before it arrived
        exec.start_s = exec.start_s.max(exec.envelope.enqueue_time);
        if shared.options.clock == ClockMode::Wall {
            drop(st);
            thread::sleep(Duration::from_secs_f64(exec.busy_s() * shared.options.time_scale));
            st = shared.state.lock();
        }
        st.free_at = exec.finish_s();
        if let Err(e) = st.orch.complete(&exec) {
            log::warn!("completion failed: {e}");
        }
        st.served += 1;
        *st.per_model.entry(exec.envelope.selected_model.clone()).or_default() += 1;
        let reply = WireMessage::Response {
            id: exec.envelope.client.reply_to.clone(),
            request_id: exec.envelope.request_id.clone(),
            model: exec.envelope.selected_model.clone(),
            payload: payload(&exec),
            latency_s: exec.end_to_end_s(),
            queue_wait_s: exec.queue_wait_s(),
            service_s: exec.busy_s(),
            energy_j: exec.result.energy_j,
            latent_quality: exec.result.latent_quality,
            cold_start: exec.result.cold_start,
            cache_hit: exec.access.is_hit(),
        };
        if let Some(tx) = st.clients.get(&exec.envelope.client.client_id) {
            let _ = tx.send(encode(&reply));
        }
    }
}

fn connection(shared: Arc<Shared>, stream: TcpStream, client_id: String) {
    let (tx, rx) = mpsc::channel::<String>();
    let Ok(mut write_half) = stream.try_clone() else {
        return;
    };
    let writer = thread::spawn(move || {
        for line in rx {
            if write_half.write_all(line.as_bytes()).and_then(|_| write_half.flush()).is_err() {
                break;
            }
        }
    });
    shared.state.lock().clients.insert(client_id.clone(), tx.clone());

    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        match reader.read_until(b'\n', &mut line) {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let reply = match decode(&line) {
            Ok(msg) => shared.handle(&client_id, msg),
            Err(e) => Some(e.into_reply()),
        };
        if let Some(reply) = reply {
            if tx.send(encode(&reply)).is_err() {
                break;
            }
        }
    }
    shared.state.lock().clients.remove(&client_id);
    drop(tx);
    let _ = writer.join();
}

/// A running server. Dropping the handle without calling
/// [`ServerHandle::shutdown`] leaves the threads running.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
    executor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> ServerStats {
        stats(&self.shared.state.lock())
    }

    /// Stops admitting, finishes every queued request, then closes all
    /// connections. Returns the final stats.
    pub fn shutdown(mut self) -> ServerStats {
        {
            let mut st = self.shared.state.lock();
            st.stopping = true;
            self.shared.work.notify_all();
        }
        if let Some(h) = self.executor.take() {
            let _ = h.join();
        }
        let final_stats = self.stats();
        self.shared.closed.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        for s in self.shared.streams.lock().drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        final_stats
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
pub fn spawn(orch: Orchestrator, addr: &str, options: ServerOptions) -> Result<ServerHandle, Error> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        state: Mutex::new(State {
            orch,
            clients: BTreeMap::new(),
            next_request: 0,
            last_admit: 0.0,
            free_at: 0.0,
            served: 0,
            per_model: BTreeMap::new(),
            stopping: false,
        }),
        work: Condvar::new(),
        options,
        epoch: Instant::now(),
        closed: AtomicBool::new(false),
        streams: Mutex::new(Vec::new()),
    });
    let exec_shared = Arc::clone(&shared);
    let executor = thread::spawn(move || executor(exec_shared));
    let acc_shared = Arc::clone(&shared);
    let acceptor = thread::spawn(move || {
        let mut n = 0usize;
        for stream in listener.incoming() {
            if acc_shared.closed.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let _ = stream.set_nodelay(true);
            if let Ok(c) = stream.try_clone() {
                acc_shared.streams.lock().push(c);
            }
            let s = Arc::clone(&acc_shared);
            let client_id = format!("c{n}");
            n += 1;
            thread::spawn(move || connection(s, stream, client_id));
        }
    });
    Ok(ServerHandle {
        addr,
        shared,
        acceptor: Some(acceptor),
        executor: Some(executor),
    })
}
