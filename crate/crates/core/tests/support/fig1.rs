//! The five-agent worked example: C1 and C2 share e2, C2 and C3 meet head-on
//! on e4, C3 and C4 meet head-on on e6, and C5 drives e5 alone.

#![allow(dead_code)]

use seapath_core::roadnet::{EdgeRecord, NetworkFile};
use seapath_core::*;

pub const EDGES: [(&str, &str, &str); 10] = [
    ("e1", "v1", "v2"),
    ("e2", "v2", "v3"),
    ("e3", "v9", "v3"),
    ("e4", "v4", "v2"),
    ("e5", "v8", "v9"),
    ("e6", "v4", "v5"),
    ("e7", "v2", "v6"),
    ("e8", "v5", "v7"),
    ("e9", "v6", "v3"),
    ("e10", "v1", "v9"),
];

pub fn network() -> RoadNetwork {
    let vertices = (1..=9).map(|i| format!("v{i}")).collect();
    let edges = EDGES
        .iter()
        .map(|(id, a, b)| EdgeRecord {
            id: id.to_string(),
            a: a.to_string(),
            b: b.to_string(),
            length: Distance::from_units(10),
            speed: Speed::from_units(5),
        })
        .collect();
    RoadNetwork::from_file(&NetworkFile { vertices, edges }).unwrap()
}

pub fn vertex(net: &RoadNetwork, name: &str) -> VertexId {
    net.vertex_by_name(name).unwrap()
}

pub fn edge(net: &RoadNetwork, name: &str) -> EdgeId {
    net.edge_by_name(name).unwrap()
}

/// C1..C5 as agents 1..5: (from, to).
pub const TRIPS: [(&str, &str); 5] = [("v1", "v3"), ("v4", "v3"), ("v2", "v5"), ("v7", "v4"), ("v8", "v9")];

pub fn agents(net: &RoadNetwork) -> Vec<SEAgent> {
    TRIPS
        .iter()
        .enumerate()
        .map(|(i, (a, b))| SEAgent {
            id: AgentId(i as u32 + 1),
            length: Distance::from_units(5),
            initial: vertex(net, a),
            destination: vertex(net, b),
            speed: Speed::from_units(5),
        })
        .collect()
}

/// Everyone on their fastest route, leaving at once.
pub fn root_solution(net: &RoadNetwork, agents: &[SEAgent]) -> Vec<Plan> {
    agents
        .iter()
        .map(|a| agents::unconstrained_plan(a, net).unwrap().unwrap())
        .collect()
}
