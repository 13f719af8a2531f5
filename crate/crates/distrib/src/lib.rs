//! Distributed solving: a coordinator keeps the whole search and ships
//! low-level and block searches to worker processes over TCP.

pub mod coordinator;
pub mod wire;
pub mod worker;

pub use coordinator::{net_timeout, CoordinatorError, RemotePlanner, RequestStats, WorkerRegistry};
pub use wire::{decode, encode, read_message, write_message, FrameError, Message, MAX_FRAME};
pub use worker::{serve, WorkerError};
