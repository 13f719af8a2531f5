use std::path::Path;

use seapath_core::agents::{AgentRecord, PlanRecord, RecordError};
use seapath_core::roadnet::{NetworkError, NetworkFile};
use seapath_core::{Plan, RoadNetwork, SEAgent, Time};
use serde::{Deserialize, Serialize};

/// How a scenario was made. Informational only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub rows: usize,
    pub cols: usize,
    /// Probability each grid edge was deleted before repair.
    pub density: f64,
    pub block_spec: Vec<usize>,
    pub path_band: (Time, Time),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub meta: ScenarioMeta,
    pub network: NetworkFile,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("{path}: {error}")]
    Parse { path: String, error: serde_json::Error },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("agent {0}: {1}")]
    Agent(String, String),
    #[error("duplicate agent id {0}")]
    DuplicateAgent(String),
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|error| ScenarioError::Io {
        path: path.display().to_string(),
        error,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|error| ScenarioError::Parse {
        path: path.display().to_string(),
        error,
    })
}

fn write(path: &Path, text: String) -> Result<(), ScenarioError> {
    std::fs::write(path, text).map_err(|error| ScenarioError::Io {
        path: path.display().to_string(),
        error,
    })
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        parse(path, &read(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenarios always serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        write(path, self.to_json())
    }

    /// Builds and checks the network and agents.
    pub fn resolve(&self) -> Result<(RoadNetwork, Vec<SEAgent>), ScenarioError> {
        let net = RoadNetwork::from_file(&self.network)?;
        let mut agents = Vec::with_capacity(self.agents.len());
        for r in &self.agents {
            let a = r.to_agent(&net)?;
            a.validate(&net).map_err(|e| ScenarioError::Agent(a.id.to_string(), e.to_string()))?;
            if agents.iter().any(|b: &SEAgent| b.id == a.id) {
                return Err(ScenarioError::DuplicateAgent(a.id.to_string()));
            }
            agents.push(a);
        }
        agents.sort_by_key(|a| a.id);
        Ok((net, agents))
    }

    pub fn grid(&self) -> String {
        format!("{}x{}", self.meta.rows, self.meta.cols)
    }
}

/// A solution file is the list of plan records.
pub fn save_solution(path: &Path, plans: &[Plan], net: &RoadNetwork) -> Result<(), ScenarioError> {
    let records: Vec<PlanRecord> = plans.iter().map(|p| PlanRecord::from_plan(p, net)).collect();
    let mut s = serde_json::to_string_pretty(&records).expect("plans always serialize");
    s.push('\n');
    write(path, s)
}

pub fn load_solution(path: &Path, net: &RoadNetwork) -> Result<Vec<Plan>, ScenarioError> {
    let records: Vec<PlanRecord> = parse(path, &read(path)?)?;
    let mut plans = records.iter().map(|r| r.to_plan(net)).collect::<Result<Vec<_>, _>>()?;
    plans.sort_by_key(|p| p.agent);
    Ok(plans)
}
