//! Multi-agent path finding for spatially extended agents: agents whose
//! bodies are long enough to cover several road segments at once.
//!
//! The crate provides the road-network model, the footprint semantics of
//! agent plans, conflict detection over temporal occupancy graphs, a
//! single-agent replanner, and the constraint-tree searches built on them.

pub mod agents;
pub mod conflict;
pub mod highlevel;
pub mod lowlevel;
pub mod planner;
pub mod roadnet;
pub mod units;

pub use agents::{
    AgentId, Action, Constraint, Itinerary, OccupancyRecord, Plan, PlanError, SEAgent, Timeline,
};
pub use roadnet::{build_grid, shortest_path, EdgeId, Location, Path, RoadNetwork, VertexId};
pub use units::{Distance, Interval, Speed, Time};
pub use highlevel::{solve, Algorithm, Heuristic, SolveError, SolveOptions, SolveReport};
pub use planner::{LocalPlanner, Planner};
