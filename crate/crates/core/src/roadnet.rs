//! Road networks: vertices joined by undirected single-lane edges.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::units::{travel_time, Distance, Speed, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A place an agent's body can occupy. Vertices order before edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Vertex(VertexId),
    Edge(EdgeId),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Vertex(v) => write!(f, "#v{}", v.0),
            Location::Edge(e) => write!(f, "#e{}", e.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub name: String,
    pub a: VertexId,
    pub b: VertexId,
    pub length: Distance,
    pub speed: Speed,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.a == v || self.b == v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetworkError {
    #[error("grid dimensions and edge parameters must be positive")]
    InvalidGrid,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    UnknownEndpoint { edge: String, vertex: String },
    #[error("edge `{0}` joins a vertex to itself")]
    SelfLoop(String),
    #[error("edge `{0}` must have positive length and speed")]
    NonPositive(String),
    #[error("edges `{0}` and `{1}` join the same pair of vertices")]
    ParallelEdge(String, String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(VertexId),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("agent speed must be positive")]
    NonPositiveAgentSpeed,
}

/// On-disk form of a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: String,
    pub a: String,
    pub b: String,
    pub length: Distance,
    pub speed: Speed,
}

/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct RoadNetwork {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    /// Incident `(edge, neighbour)` pairs per vertex, sorted by edge id.
    adjacency: Vec<Vec<(EdgeId, VertexId)>>,
    vertex_index: HashMap<String, VertexId>,
    edge_index: HashMap<String, EdgeId>,
}

impl RoadNetwork {
    pub fn from_file(file: &NetworkFile) -> Result<Self, NetworkError> {
        let mut vertex_index = HashMap::new();
        for (i, name) in file.vertices.iter().enumerate() {
            if vertex_index.insert(name.clone(), VertexId(i as u32)).is_some() {
                return Err(NetworkError::DuplicateVertex(name.clone()));
            }
        }
        let mut edges = Vec::with_capacity(file.edges.len());
        let mut edge_index = HashMap::new();
        let mut pairs: HashMap<(VertexId, VertexId), String> = HashMap::new();
        for (i, rec) in file.edges.iter().enumerate() {
            let lookup = |name: &String| {
                vertex_index.get(name).copied().ok_or_else(|| NetworkError::UnknownEndpoint {
                    edge: rec.id.clone(),
                    vertex: name.clone(),
                })
            };
            let a = lookup(&rec.a)?;
            let b = lookup(&rec.b)?;
            if a == b {
                return Err(NetworkError::SelfLoop(rec.id.clone()));
            }
            if !rec.length.is_positive() || !rec.speed.is_positive() {
                return Err(NetworkError::NonPositive(rec.id.clone()));
            }
            let id = EdgeId(i as u32);
            if edge_index.insert(rec.id.clone(), id).is_some() {
                return Err(NetworkError::DuplicateEdge(rec.id.clone()));
            }
            if let Some(prev) = pairs.insert((a.min(b), a.max(b)), rec.id.clone()) {
                return Err(NetworkError::ParallelEdge(prev, rec.id.clone()));
            }
            edges.push(Edge {
                id,
                name: rec.id.clone(),
                a,
                b,
                length: rec.length,
                speed: rec.speed,
            });
        }
        let mut adjacency = vec![Vec::new(); file.vertices.len()];
        for e in &edges {
            adjacency[e.a.index()].push((e.id, e.b));
            adjacency[e.b.index()].push((e.id, e.a));
        }
        Ok(RoadNetwork {
            vertex_names: file.vertices.clone(),
            edges,
            adjacency,
            vertex_index,
            edge_index,
        })
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            vertices: self.vertex_names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.name.clone(),
                    a: self.vertex_names[e.a.index()].clone(),
                    b: self.vertex_names[e.b.index()].clone(),
                    length: e.length,
                    speed: e.speed,
                })
                .collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_names.len() as u32).map(VertexId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v.index() < self.vertex_names.len()
    }

    pub fn contains(&self, loc: Location) -> bool {
        match loc {
            Location::Vertex(v) => self.contains_vertex(v),
            Location::Edge(e) => e.index() < self.edges.len(),
        }
    }

    pub fn neighbours(&self, v: VertexId) -> &[(EdgeId, VertexId)] {
        &self.adjacency[v.index()]
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.index()]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertex_index.get(name).copied()
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edge_index.get(name).copied()
    }

    pub fn location_name(&self, loc: Location) -> &str {
        match loc {
            Location::Vertex(v) => self.vertex_name(v),
            Location::Edge(e) => &self.edge(e).name,
        }
    }

    /// Resolves a textual id; edge ids win if a name is used for both.
    pub fn location_by_name(&self, name: &str) -> Result<Location, NetworkError> {
        if let Some(e) = self.edge_by_name(name) {
            return Ok(Location::Edge(e));
        }
        self.vertex_by_name(name)
            .map(Location::Vertex)
            .ok_or_else(|| NetworkError::UnknownLocation(name.to_string()))
    }

    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.neighbours(a).iter().find(|(_, n)| *n == b).map(|(e, _)| *e)
    }

    /// True when every vertex is reachable from vertex 0.
    pub fn is_connected(&self) -> bool {
        if self.vertex_names.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertex_names.len()];
        let mut stack = vec![VertexId(0)];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(_, n) in self.neighbours(v) {
                if !seen[n.index()] {
                    seen[n.index()] = true;
                    stack.push(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Rows × cols lattice. Vertex `v{r*cols+c}` sits at row `r`, column `c`;
/// edges are numbered walking vertices in row-major order, emitting the
/// rightward edge before the downward one.
pub fn build_grid(
    rows: usize,
    cols: usize,
    edge_length: Distance,
    edge_speed: Speed,
) -> Result<RoadNetwork, NetworkError> {
    if rows == 0 || cols == 0 || !edge_length.is_positive() || !edge_speed.is_positive() {
        return Err(NetworkError::InvalidGrid);
    }
    let name = |r: usize, c: usize| format!("v{}", r * cols + c);
    let vertices = (0..rows * cols).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((name(r, c), name(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((name(r, c), name(r + 1, c)));
            }
        }
    }
    let file = NetworkFile {
        vertices,
        edges: edges
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| EdgeRecord {
                id: format!("e{i}"),
                a,
                b,
                length: edge_length,
                speed: edge_speed,
            })
            .collect(),
    };
    RoadNetwork::from_file(&file)
}

/// `length / min(agent_speed, edge speed)`, rounded up to a quantum.
pub fn traversal_time(edge: &Edge, agent_speed: Speed) -> Time {
    travel_time(edge.length, agent_speed.min(edge.speed))
}

/// Alternating vertex/edge walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub travel_time: Time,
}

impl Path {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, loc: Location) -> bool {
        match loc {
            Location::Vertex(v) => self.vertices.contains(&v),
            Location::Edge(e) => self.edges.contains(&e),
        }
    }
}

/// Minimum travel-time path from `src` to `dst` avoiding blocked edges and
/// blocked intermediate vertices. Among equally fast paths the
/// lexicographically smallest edge-id sequence wins.
pub fn shortest_path(
    net: &RoadNetwork,
    src: VertexId,
    dst: VertexId,
    agent_speed: Speed,
    blocked: &BTreeSet<Location>,
) -> Result<Option<Path>, NetworkError> {
    for v in [src, dst] {
        if !net.contains_vertex(v) {
            return Err(NetworkError::UnknownVertex(v));
        }
    }
    if !agent_speed.is_positive() {
        return Err(NetworkError::NonPositiveAgentSpeed);
    }
    if src == dst {
        return Ok(Some(Path {
            vertices: vec![src],
            edges: Vec::new(),
            travel_time: Time::ZERO,
        }));
    }
    let vertex_blocked = |v: VertexId| blocked.contains(&Location::Vertex(v));
    let edge_blocked = |e: EdgeId| blocked.contains(&Location::Edge(e));

    // Distances to dst; blocked vertices receive a distance but are never
    // expanded, so only src may route out of one.
    let n = net.vertex_count();
    let mut dist: Vec<Option<Time>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[dst.index()] = Some(Time::ZERO);
    heap.push(Reverse((Time::ZERO, dst)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u.index()] {
            continue;
        }
        done[u.index()] = true;
        if u == src || (u != dst && vertex_blocked(u)) {
            continue;
        }
        for &(e, w) in net.neighbours(u) {
            if edge_blocked(e) || done[w.index()] {
                continue;
            }
            let nd = d + traversal_time(net.edge(e), agent_speed);
            if dist[w.index()].map_or(true, |cur| nd < cur) {
                dist[w.index()] = Some(nd);
                heap.push(Reverse((nd, w)));
            }
        }
    }
    let Some(total) = dist[src.index()] else {
        return Ok(None);
    };

    let mut vertices = vec![src];
    let mut edges = Vec::new();
    let mut u = src;
    let mut remaining = total;
    while u != dst {
        let (e, w, d) = net
            .neighbours(u)
            .iter()
            .filter(|(e, w)| !edge_blocked(*e) && (*w == dst || !vertex_blocked(*w)))
            .filter_map(|&(e, w)| {
                let step = traversal_time(net.edge(e), agent_speed);
                match dist[w.index()] {
                    Some(dw) if w != src && step + dw == remaining => Some((e, w, dw)),
                    _ => None,
                }
            })
            .min_by_key(|(e, _, _)| *e)
            .expect("shortest-path tree is consistent");
        edges.push(e);
        vertices.push(w);
        remaining = d;
        u = w;
    }
    Ok(Some(Path {
        vertices,
        edges,
        travel_time: total,
    }))
}

/// Every edge and vertex on `path`, in walk order.
pub fn path_locations(path: &Path) -> Vec<Location> {
    let mut out = Vec::with_capacity(path.vertices.len() + path.edges.len());
    for (i, v) in path.vertices.iter().enumerate() {
        out.push(Location::Vertex(*v));
        if let Some(e) = path.edges.get(i) {
            out.push(Location::Edge(*e));
        }
    }
    out
}

/// True when the path visits no vertex twice.
pub fn is_simple(path: &Path) -> bool {
    let mut seen = HashSet::new();
    path.vertices.iter().all(|v| seen.insert(*v))
}
