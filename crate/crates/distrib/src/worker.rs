//! A worker answers search requests for the agents of one scenario. It keeps
//! nothing between requests.

use std::io::BufReader;
use std::net::{TcpListener, TcpStream};

use seapath_core::agents::PlanRecord;
use seapath_core::planner::{answer_block, answer_query, BlockQuery, PlanQuery};
use seapath_core::{RoadNetwork, SEAgent};

use crate::wire::{self, read_message, write_message, FrameError, Message};

/// Consecutive failed accepts tolerated before giving up.
const ACCEPT_RETRIES: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum WorkerError {
    #[error("accept failed {ACCEPT_RETRIES} times in a row: {0}")]
    Accept(std::io::Error),
}

enum Served {
    Shutdown,
    Disconnected,
}

/// Serves connections one at a time until a `Shutdown` arrives.
pub fn serve(listener: TcpListener, net: &RoadNetwork, agents: &[SEAgent]) -> Result<(), WorkerError> {
    let mut failures = 0;
    loop {
        match listener.accept() {
            Ok((stream, _)) => {
                failures = 0;
                if let Served::Shutdown = connection(stream, net, agents) {
                    return Ok(());
                }
            }
            Err(e) => {
                failures += 1;
                if failures >= ACCEPT_RETRIES {
                    return Err(WorkerError::Accept(e));
                }
            }
        }
    }
}

fn connection(stream: TcpStream, net: &RoadNetwork, agents: &[SEAgent]) -> Served {
    let _ = stream.set_nodelay(true);
    let Ok(mut out) = stream.try_clone() else {
        return Served::Disconnected;
    };
    let mut input = BufReader::new(stream);
    loop {
        let reply = match read_message(&mut input) {
            Ok(Message::Shutdown) => return Served::Shutdown,
            Ok(m) => respond(m, net, agents),
            Err(e) if e.recoverable() => Message::Error {
                request: None,
                message: e.to_string(),
            },
            Err(FrameError::Oversize(n)) => {
                let _ = write_message(
                    &mut out,
                    &Message::Error {
                        request: None,
                        message: FrameError::Oversize(n).to_string(),
                    },
                );
                return Served::Disconnected;
            }
            Err(_) => return Served::Disconnected,
        };
        if write_message(&mut out, &reply).is_err() {
            return Served::Disconnected;
        }
    }
}

fn respond(m: Message, net: &RoadNetwork, agents: &[SEAgent]) -> Message {
    let fail = |request, message: String| Message::Error { request, message };
    match m {
        Message::Hello { agent } => {
            if agents.iter().any(|a| a.id == agent) {
                Message::Hello { agent }
            } else {
                fail(None, format!("no agent {agent} in this scenario"))
            }
        }
        Message::PlanRequest {
            request,
            agent,
            constraints,
            committed_to,
            seed,
        } => {
            let query = (|| {
                Ok::<_, String>(PlanQuery {
                    agent,
                    constraints: wire::constraint_set(&constraints, net).map_err(|e| e.to_string())?,
                    seed: seed.map(|s| s.to_plan(net)).transpose().map_err(|e| e.to_string())?,
                    committed_to,
                })
            })();
            match query.and_then(|q| answer_query(&q, agents, net).map_err(|e| e.to_string())) {
                Ok(plan) => Message::PlanResponse {
                    request,
                    cost: plan.cost,
                    plan: PlanRecord::from_plan(&plan, net),
                },
                Err(e) => fail(Some(request), e),
            }
        }
        Message::BlockSolveRequest {
            request,
            members,
            seeds,
            outside,
        } => {
            let query = (|| {
                Ok::<_, String>(BlockQuery {
                    members,
                    seeds: wire::plans(&seeds, net).map_err(|e| e.to_string())?,
                    outside: outside
                        .iter()
                        .map(|cs| wire::constraint_set(cs, net))
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?,
                })
            })();
            match query.and_then(|q| answer_block(&q, agents, net).map_err(|e| e.to_string())) {
                Ok(plans) => Message::BlockSolveResponse {
                    request,
                    plans: plans.iter().map(|p| PlanRecord::from_plan(p, net)).collect(),
                },
                Err(e) => fail(Some(request), e),
            }
        }
        other => fail(None, format!("unexpected {} from coordinator", kind(&other))),
    }
}

pub(crate) fn kind(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "hello",
        Message::PlanRequest { .. } => "plan_request",
        Message::PlanResponse { .. } => "plan_response",
        Message::BlockSolveRequest { .. } => "block_solve_request",
        Message::BlockSolveResponse { .. } => "block_solve_response",
        Message::Error { .. } => "error",
        Message::Shutdown => "shutdown",
    }
}
