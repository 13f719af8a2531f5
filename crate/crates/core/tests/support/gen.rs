//! Random networks, routes and plans for property tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use seapath_core::agents::Itinerary;
use seapath_core::roadnet::{EdgeRecord, NetworkFile};
use seapath_core::*;

/// `rows x cols` grid with random lengths and speeds, in whole millis.
pub fn random_grid<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> RoadNetwork {
    let name = |r: usize, c: usize| format!("v{r}_{c}");
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(name(r, c));
            let mut link = |a: String, b: String| {
                edges.push(EdgeRecord {
                    id: format!("e{}", edges.len()),
                    a,
                    b,
                    length: Distance::from_millis(rng.gen_range(2_000..20_000)),
                    speed: Speed::from_millis(rng.gen_range(1_000..8_000)),
                });
            };
            if c + 1 < cols {
                link(name(r, c), name(r, c + 1));
            }
            if r + 1 < rows {
                link(name(r, c), name(r + 1, c));
            }
        }
    }
    RoadNetwork::from_file(&NetworkFile { vertices, edges }).unwrap()
}

pub fn random_agent<R: Rng>(rng: &mut R, id: u32, from: VertexId, to: VertexId) -> SEAgent {
    SEAgent {
        id: AgentId(id),
        length: Distance::from_millis(rng.gen_range(500..25_000)),
        initial: from,
        destination: to,
        speed: Speed::from_millis(rng.gen_range(1_000..8_000)),
    }
}

/// A simple walk of one to `max_hops` edges from a random vertex.
pub fn random_route<R: Rng>(rng: &mut R, net: &RoadNetwork, max_hops: usize) -> Itinerary {
    loop {
        let mut vertices = vec![VertexId(rng.gen_range(0..net.vertex_count() as u32))];
        let mut edges = Vec::new();
        for _ in 0..rng.gen_range(1..=max_hops) {
            let here = *vertices.last().unwrap();
            let next: Vec<_> = net
                .neighbours(here)
                .iter()
                .filter(|(_, w)| !vertices.contains(w))
                .collect();
            let Some((e, w)) = next.choose(rng) else { break };
            edges.push(*e);
            vertices.push(*w);
        }
        if !edges.is_empty() {
            return Itinerary::new(vertices, edges);
        }
    }
}

/// Random waits, each zero or up to `max_wait` millis.
pub fn with_waits<R: Rng>(rng: &mut R, mut it: Itinerary, max_wait: i64) -> Itinerary {
    for w in &mut it.waits {
        if rng.gen_bool(0.4) {
            *w = Time::from_millis(rng.gen_range(1..=max_wait));
        }
    }
    it
}

/// An agent travelling `it`, and its plan.
pub fn random_planned_agent<R: Rng>(rng: &mut R, id: u32, net: &RoadNetwork, it: Itinerary) -> (SEAgent, Plan) {
    let agent = random_agent(rng, id, it.vertices[0], *it.vertices.last().unwrap());
    let plan = it.to_plan(&agent, net);
    (agent, plan)
}

/// `random_route` followed by `with_waits`.
pub fn waited_route<R: Rng>(rng: &mut R, net: &RoadNetwork, max_hops: usize, max_wait: i64) -> Itinerary {
    let it = random_route(rng, net, max_hops);
    with_waits(rng, it, max_wait)
}
