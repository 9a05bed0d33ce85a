use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AgentKind;
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::estimation::RidgeCheckpoint;

/// One episode of a run. The first nine columns are the standard CSV
/// schema; the rest are optional diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub value_est: f64,
    pub beta_k: f64,
    pub logdet: f64,
    pub opt_flag: bool,
    pub wgood_flag: bool,
    pub pot_sum: f64,
    pub cum_regret: f64,
    #[serde(default)]
    pub value_se: Option<f64>,
    #[serde(default)]
    pub maha_err: Option<f64>,
    #[serde(default)]
    pub logdet_next: Option<f64>,
    #[serde(default)]
    pub sigma_k_sq: Option<f64>,
    #[serde(default)]
    pub xi_norm_max: Option<f64>,
    #[serde(default)]
    pub beta_xi: Option<f64>,
    #[serde(default)]
    pub xigood_flag: Option<bool>,
    #[serde(default)]
    pub iota_sq_sum: Option<f64>,
    #[serde(default)]
    pub policy_value: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub agent: AgentKind,
    pub seed: u64,
    pub k_max: usize,
    pub v_star: f64,
    pub v_star_se: f64,
    pub rows: Vec<IterationRow>,
    pub trajectories: Vec<Trajectory>,
    pub final_estimate: Option<RidgeCheckpoint>,
}

/// The observable behaviour of one episode, compared bit for bit across
/// agents.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub actions: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub episode_return: f64,
    pub value_est: f64,
    pub cum_regret: f64,
}

impl RunRecord {
    pub fn cum_regret(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cum_regret).collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn trace(&self) -> Vec<TraceEntry> {
        self.rows
            .iter()
            .zip(&self.trajectories)
            .map(|(row, traj)| TraceEntry {
                actions: traj.steps.iter().map(|s| s.action.as_slice().to_vec()).collect(),
                states: traj.steps.iter().map(|s| s.next_state.as_slice().to_vec()).collect(),
                episode_return: row.episode_return,
                value_est: row.value_est,
                cum_regret: row.cum_regret,
            })
            .collect()
    }
}

pub fn write_rows<W: Write>(rows: &[IterationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[IterationRow], path: &Path) -> Result<()> {
    write_rows(rows, std::fs::File::create(path)?)
}

/// Reads rows back; missing standard columns are a schema error.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<IterationRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    for col in [
        "k",
        "return",
        "value_est",
        "beta_k",
        "logdet",
        "opt_flag",
        "wgood_flag",
        "pot_sum",
        "cum_regret",
    ] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("missing column {col}")));
        }
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<IterationRow>> {
    read_rows(std::fs::File::open(path)?)
}
