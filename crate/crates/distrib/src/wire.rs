//! Frames are a 4-byte big-endian payload length followed by one JSON
//! message.

use std::io::{self, Read, Write};

use seapath_core::agents::{AgentId, ConstraintRecord, PlanRecord, RecordError};
use seapath_core::lowlevel::ConstraintSet;
use seapath_core::planner::{BlockQuery, PlanQuery};
use seapath_core::{Plan, RoadNetwork, Time};
use serde::{Deserialize, Serialize};

/// Largest accepted payload.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        agent: AgentId,
    },
    PlanRequest {
        request: u64,
        agent: AgentId,
        constraints: Vec<ConstraintRecord>,
        /// Agents whose footprints the constraints carry as commitments.
        committed_to: Vec<AgentId>,
        seed: Option<PlanRecord>,
    },
    PlanResponse {
        request: u64,
        plan: PlanRecord,
        cost: Time,
    },
    BlockSolveRequest {
        request: u64,
        members: Vec<AgentId>,
        seeds: Vec<PlanRecord>,
        outside: Vec<Vec<ConstraintRecord>>,
    },
    BlockSolveResponse {
        request: u64,
        plans: Vec<PlanRecord>,
    },
    Error {
        request: Option<u64>,
        message: String,
    },
    Shutdown,
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("connection closed")]
    Closed,
    #[error("truncated frame")]
    Truncated,
    #[error("frame of {0} bytes exceeds the {MAX_FRAME} byte limit")]
    Oversize(usize),
    #[error("{0} bytes after the frame")]
    Trailing(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FrameError {
    /// Whether the stream is still aligned on a frame boundary.
    pub fn recoverable(&self) -> bool {
        matches!(self, FrameError::Malformed(_))
    }
}

pub fn encode(m: &Message) -> Vec<u8> {
    let payload = serde_json::to_vec(m).expect("messages always serialize");
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

fn parse(payload: &[u8]) -> Result<Message, FrameError> {
    serde_json::from_slice(payload).map_err(|e| FrameError::Malformed(e.to_string()))
}

/// Decodes exactly one frame.
pub fn decode(bytes: &[u8]) -> Result<Message, FrameError> {
    let Some(head) = bytes.get(..4) else {
        return Err(FrameError::Truncated);
    };
    let len = u32::from_be_bytes(head.try_into().unwrap()) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::Oversize(len));
    }
    let rest = &bytes[4..];
    if rest.len() < len {
        return Err(FrameError::Truncated);
    }
    if rest.len() > len {
        return Err(FrameError::Trailing(rest.len() - len));
    }
    parse(rest)
}

fn fill(r: &mut impl Read, buf: &mut [u8]) -> Result<usize, io::Error> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

pub fn read_message(r: &mut impl Read) -> Result<Message, FrameError> {
    let mut head = [0u8; 4];
    match fill(r, &mut head)? {
        0 => return Err(FrameError::Closed),
        4 => {}
        _ => return Err(FrameError::Truncated),
    }
    let len = u32::from_be_bytes(head) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::Oversize(len));
    }
    let mut payload = vec![0u8; len];
    if fill(r, &mut payload)? < len {
        return Err(FrameError::Truncated);
    }
    parse(&payload)
}

pub fn write_message(w: &mut impl Write, m: &Message) -> io::Result<()> {
    w.write_all(&encode(m))?;
    w.flush()
}

pub fn plan_request(request: u64, q: &PlanQuery, net: &RoadNetwork) -> Message {
    Message::PlanRequest {
        request,
        agent: q.agent,
        constraints: q.constraints.iter().map(|c| ConstraintRecord::from_constraint(c, net)).collect(),
        committed_to: q.committed_to.clone(),
        seed: q.seed.as_ref().map(|p| PlanRecord::from_plan(p, net)),
    }
}

pub fn constraint_set(records: &[ConstraintRecord], net: &RoadNetwork) -> Result<ConstraintSet, RecordError> {
    let cs = records.iter().map(|r| r.to_constraint(net)).collect::<Result<Vec<_>, _>>()?;
    Ok(ConstraintSet::new(cs))
}

pub fn plans(records: &[PlanRecord], net: &RoadNetwork) -> Result<Vec<Plan>, RecordError> {
    records.iter().map(|r| r.to_plan(net)).collect()
}

pub fn block_request(request: u64, q: &BlockQuery, net: &RoadNetwork) -> Message {
    Message::BlockSolveRequest {
        request,
        members: q.members.clone(),
        seeds: q.seeds.iter().map(|p| PlanRecord::from_plan(p, net)).collect(),
        outside: q
            .outside
            .iter()
            .map(|cs| cs.iter().map(|c| ConstraintRecord::from_constraint(c, net)).collect())
            .collect(),
    }
}
