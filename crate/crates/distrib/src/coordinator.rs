//! The coordinator side: a [`Planner`] whose searches run on workers.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use seapath_core::agents::AgentId;
use seapath_core::planner::{BlockQuery, PlanQuery, Planner, PlannerError};
use seapath_core::{Plan, RoadNetwork, SEAgent};

use crate::wire::{self, read_message, write_message, Message};
use crate::worker::kind;

pub const TIMEOUT_VAR: &str = "SEAPATH_NET_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// Socket timeout from `SEAPATH_NET_TIMEOUT_MS`.
pub fn net_timeout() -> Duration {
    let ms = std::env::var(TIMEOUT_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|ms| *ms > 0)
        .unwrap_or(DEFAULT_TIMEOUT_MS);
    Duration::from_millis(ms)
}

#[derive(Debug, thiserror::Error)]
pub enum CoordinatorError {
    #[error("cannot reach worker {address}: {reason}")]
    Connect { address: String, reason: String },
    #[error("worker {address} refused {agent}: {reason}")]
    Register {
        address: String,
        agent: AgentId,
        reason: String,
    },
    #[error("no workers given")]
    NoWorkers,
}

/// Which worker serves which agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerRegistry {
    addresses: Vec<String>,
    owner: BTreeMap<AgentId, usize>,
    registered: Vec<bool>,
}

impl WorkerRegistry {
    /// Agents in id order, dealt to workers in turn.
    pub fn round_robin(addresses: &[String], agents: &[SEAgent]) -> Self {
        let mut ids: Vec<AgentId> = agents.iter().map(|a| a.id).collect();
        ids.sort();
        WorkerRegistry {
            addresses: addresses.to_vec(),
            owner: ids.into_iter().enumerate().map(|(i, id)| (id, i % addresses.len().max(1))).collect(),
            registered: vec![false; addresses.len()],
        }
    }

    pub fn worker_of(&self, agent: AgentId) -> Option<usize> {
        self.owner.get(&agent).copied()
    }

    pub fn address(&self, worker: usize) -> &str {
        &self.addresses[worker]
    }

    pub fn agents_of(&self, worker: usize) -> impl Iterator<Item = AgentId> + '_ {
        self.owner.iter().filter(move |(_, w)| **w == worker).map(|(a, _)| *a)
    }

    pub fn is_registered(&self, worker: usize) -> bool {
        self.registered[worker]
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RequestStats {
    pub plan_requests: usize,
    pub block_requests: usize,
    /// Summed over batches sent to one worker, from first write to last read.
    pub round_trip: Duration,
}

struct Conn {
    out: TcpStream,
    input: BufReader<TcpStream>,
    alive: bool,
}

pub struct RemotePlanner<'a> {
    net: &'a RoadNetwork,
    registry: WorkerRegistry,
    conns: Vec<Mutex<Conn>>,
    next_request: AtomicU64,
    log: Mutex<Vec<AgentId>>,
    stats: Mutex<RequestStats>,
}

fn open(address: &str, timeout: Duration) -> Result<TcpStream, String> {
    let addrs: Vec<_> = address.to_socket_addrs().map_err(|e| e.to_string())?.collect();
    let mut last = "address resolved to nothing".to_string();
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => {
                s.set_read_timeout(Some(timeout)).map_err(|e| e.to_string())?;
                s.set_write_timeout(Some(timeout)).map_err(|e| e.to_string())?;
                let _ = s.set_nodelay(true);
                return Ok(s);
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(last)
}

impl<'a> RemotePlanner<'a> {
    /// Connects to every worker and registers each agent with its worker.
    /// Fails unless every agent is registered.
    pub fn connect(addresses: &[String], agents: &[SEAgent], net: &'a RoadNetwork) -> Result<Self, CoordinatorError> {
        if addresses.is_empty() {
            return Err(CoordinatorError::NoWorkers);
        }
        let timeout = net_timeout();
        let mut registry = WorkerRegistry::round_robin(addresses, agents);
        let mut conns = Vec::new();
        for (w, address) in addresses.iter().enumerate() {
            let fail = |reason: String| CoordinatorError::Connect {
                address: address.clone(),
                reason,
            };
            let stream = open(address, timeout).map_err(fail)?;
            let mut conn = Conn {
                out: stream.try_clone().map_err(|e| fail(e.to_string()))?,
                input: BufReader::new(stream),
                alive: true,
            };
            for agent in registry.agents_of(w).collect::<Vec<_>>() {
                let refuse = |reason: String| CoordinatorError::Register {
                    address: address.clone(),
                    agent,
                    reason,
                };
                write_message(&mut conn.out, &Message::Hello { agent }).map_err(|e| refuse(e.to_string()))?;
                match read_message(&mut conn.input).map_err(|e| refuse(e.to_string()))? {
                    Message::Hello { agent: a } if a == agent => {}
                    Message::Error { message, .. } => return Err(refuse(message)),
                    other => return Err(refuse(format!("unexpected {}", kind(&other)))),
                }
            }
            registry.registered[w] = true;
            conns.push(Mutex::new(conn));
        }
        Ok(RemotePlanner {
            net,
            registry,
            conns,
            next_request: AtomicU64::new(1),
            log: Mutex::new(Vec::new()),
            stats: Mutex::new(RequestStats::default()),
        })
    }

    pub fn registry(&self) -> &WorkerRegistry {
        &self.registry
    }

    /// Agent of every plan request sent, in request-id order.
    pub fn request_log(&self) -> Vec<AgentId> {
        self.log.lock().unwrap().clone()
    }

    pub fn stats(&self) -> RequestStats {
        self.stats.lock().unwrap().clone()
    }

    /// Tells every live worker to exit.
    pub fn shutdown(&self) {
        for c in &self.conns {
            let mut c = c.lock().unwrap();
            if c.alive {
                let _ = write_message(&mut c.out, &Message::Shutdown);
                c.alive = false;
            }
        }
    }

    /// Sends `requests` to one worker and collects the responses by request
    /// id. `agents[i]` is the agent `requests[i]` is charged to.
    fn exchange(&self, worker: usize, requests: &[(u64, Message)], agents: &[AgentId]) -> Result<Vec<Message>, PlannerError> {
        let mut conn = self.conns[worker].lock().unwrap();
        let address = self.registry.address(worker).to_string();
        if !conn.alive {
            return Err(PlannerError::Worker {
                agent: agents[0],
                reason: format!("worker {address} is gone"),
            });
        }
        let start = Instant::now();
        let Conn { out, input, alive } = &mut *conn;
        let mut replies: Vec<Option<Message>> = vec![None; requests.len()];
        let result = std::thread::scope(|s| {
            let writer = s.spawn(|| {
                for (_, m) in requests {
                    write_message(out, m)?;
                }
                Ok::<_, std::io::Error>(())
            });
            let mut outcome = Ok(());
            for _ in 0..requests.len() {
                let pending = replies.iter().position(|r| r.is_none()).unwrap();
                let lost = |reason: String| PlannerError::Worker {
                    agent: agents[pending],
                    reason: format!("worker {address}: {reason}"),
                };
                let m = match read_message(input) {
                    Ok(m) => m,
                    Err(e) => {
                        outcome = Err(lost(e.to_string()));
                        break;
                    }
                };
                let id = match &m {
                    Message::PlanResponse { request, .. } | Message::BlockSolveResponse { request, .. } => *request,
                    Message::Error {
                        request: Some(request),
                        message,
                    } => {
                        let at = requests.iter().position(|(r, _)| r == request).unwrap_or(pending);
                        outcome = Err(PlannerError::Worker {
                            agent: agents[at],
                            reason: message.clone(),
                        });
                        break;
                    }
                    other => {
                        outcome = Err(lost(format!("unexpected {}", kind(other))));
                        break;
                    }
                };
                match requests.iter().position(|(r, _)| *r == id) {
                    Some(at) if replies[at].is_none() => replies[at] = Some(m),
                    _ => {
                        outcome = Err(lost(format!("response to unknown request {id}")));
                        break;
                    }
                }
            }
            let written = writer.join().unwrap();
            match (outcome, written) {
                (Err(e), _) => Err(e),
                (Ok(()), Err(e)) => Err(PlannerError::Worker {
                    agent: agents[0],
                    reason: format!("worker {address}: {e}"),
                }),
                (Ok(()), Ok(())) => Ok(()),
            }
        });
        self.stats.lock().unwrap().round_trip += start.elapsed();
        match result {
            Ok(()) => Ok(replies.into_iter().map(Option::unwrap).collect()),
            Err(e) => {
                // unread replies leave the stream out of step, so the
                // connection is dropped on any failure
                *alive = false;
                let _ = out.shutdown(std::net::Shutdown::Both);
                Err(e)
            }
        }
    }

    /// Runs one request per item, grouped by worker, all workers at once.
    /// Results come back in item order.
    fn dispatch<T: Send>(
        &self,
        owners: &[AgentId],
        messages: Vec<Message>,
        ids: Vec<u64>,
        unpack: impl Fn(Message) -> Result<T, String> + Sync,
    ) -> Result<Vec<T>, PlannerError> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, agent) in owners.iter().enumerate() {
            let w = self.registry.worker_of(*agent).ok_or(PlannerError::UnknownAgent(*agent))?;
            groups.entry(w).or_default().push(i);
        }
        let mut messages: Vec<Option<Message>> = messages.into_iter().map(Some).collect();
        let batches: Vec<(usize, Vec<usize>, Vec<(u64, Message)>)> = groups
            .into_iter()
            .map(|(w, items)| {
                let reqs = items.iter().map(|&i| (ids[i], messages[i].take().unwrap())).collect();
                (w, items, reqs)
            })
            .collect();
        let outcomes: Vec<Result<Vec<(usize, T)>, PlannerError>> = std::thread::scope(|s| {
            let handles: Vec<_> = batches
                .iter()
                .map(|(w, items, reqs)| {
                    let unpack = &unpack;
                    s.spawn(move || {
                        let charged: Vec<AgentId> = items.iter().map(|&i| owners[i]).collect();
                        let replies = self.exchange(*w, reqs, &charged)?;
                        items
                            .iter()
                            .zip(replies)
                            .map(|(&i, m)| {
                                unpack(m).map(|t| (i, t)).map_err(|reason| PlannerError::Worker {
                                    agent: owners[i],
                                    reason,
                                })
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut out: Vec<Option<T>> = (0..owners.len()).map(|_| None).collect();
        for o in outcomes {
            for (i, t) in o? {
                out[i] = Some(t);
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }

    fn reserve(&self, n: usize) -> Vec<u64> {
        let first = self.next_request.fetch_add(n as u64, Ordering::SeqCst);
        (first..first + n as u64).collect()
    }
}

impl Planner for RemotePlanner<'_> {
    fn plan_batch(&self, queries: &[PlanQuery]) -> Result<Vec<Plan>, PlannerError> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let ids = self.reserve(queries.len());
        {
            let mut log = self.log.lock().unwrap();
            log.extend(queries.iter().map(|q| q.agent));
            self.stats.lock().unwrap().plan_requests += queries.len();
        }
        let messages = queries
            .iter()
            .zip(&ids)
            .map(|(q, id)| wire::plan_request(*id, q, self.net))
            .collect();
        let owners: Vec<AgentId> = queries.iter().map(|q| q.agent).collect();
        let net = self.net;
        self.dispatch(&owners, messages, ids, |m| match m {
            Message::PlanResponse { plan, .. } => plan.to_plan(net).map_err(|e| e.to_string()),
            other => Err(format!("unexpected {}", kind(&other))),
        })
    }

    fn solve_blocks(&self, queries: &[BlockQuery]) -> Result<Vec<Vec<Plan>>, PlannerError> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let ids = self.reserve(queries.len());
        self.stats.lock().unwrap().block_requests += queries.len();
        let owners = queries
            .iter()
            .map(|q| {
                q.members
                    .iter()
                    .min()
                    .copied()
                    .ok_or_else(|| PlannerError::Malformed("empty block".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let messages = queries
            .iter()
            .zip(&ids)
            .map(|(q, id)| wire::block_request(*id, q, self.net))
            .collect();
        let net = self.net;
        self.dispatch(&owners, messages, ids, |m| match m {
            Message::BlockSolveResponse { plans, .. } => wire::plans(&plans, net).map_err(|e| e.to_string()),
            other => Err(format!("unexpected {}", kind(&other))),
        })
    }
}
