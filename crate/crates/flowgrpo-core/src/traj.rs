//! Canonical trajectory and prediction types, coordinate-frame conventions,
//! and relative/absolute conversions shared by every other module.
//!
//! Conventions: positions are 2-D, world frame, in the window's `unit`
//! (meters for ETH/UCY-style data, pixels for SDD-style data). Each agent's
//! anchor is its last observed position; predicted futures are expressed
//! relative to that anchor until explicitly converted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

/// World-coordinate unit of a dataset. Never implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Meters,
    Pixels,
}

/// Coordinate frame of a prediction set. Guards against double-shifting:
/// converting an already-absolute set is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Relative,
    Absolute,
}

/// One forecasting instance: per-agent observed history and ground-truth
/// future in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryWindow {
    pub scene_id: String,
    pub agent_ids: Vec<i64>,
    /// Per-agent history, `agents x history_len`, world frame.
    pub history: Vec<Vec<Point>>,
    /// Per-agent ground-truth future, `agents x future_len`, world frame.
    pub future_gt: Vec<Vec<Point>>,
    /// Seconds per step (0.4 s at 2.5 Hz).
    pub dt: f64,
    pub unit: Unit,
    /// Last observed position per agent; the anchor for relative futures.
    pub origin_per_agent: Vec<Point>,
}

impl TrajectoryWindow {
    /// Builds a window and checks every structural invariant. The origin is
    /// derived from the history, not taken on trust.
    pub fn new(
        scene_id: impl Into<String>,
        agent_ids: Vec<i64>,
        history: Vec<Vec<Point>>,
        future_gt: Vec<Vec<Point>>,
        dt: f64,
        unit: Unit,
    ) -> Result<Self> {
        let a = agent_ids.len();
        if a == 0 {
            return Err(Error::Data("window has no agents".into()));
        }
        if history.len() != a || future_gt.len() != a {
            return Err(Error::Data(format!(
                "window arrays disagree on agent count: ids={a}, history={}, future={}",
                history.len(),
                future_gt.len()
            )));
        }
        let t_h = history[0].len();
        let t_f = future_gt[0].len();
        if t_h == 0 || t_f == 0 {
            return Err(Error::Data("history and future lengths must be positive".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Data(format!("dt must be positive, got {dt}")));
        }
        for (i, h) in history.iter().enumerate() {
            if h.len() != t_h {
                return Err(Error::Data(format!("ragged history for agent index {i}")));
            }
            if h.iter().any(|p| !geom::is_finite(*p)) {
                return Err(Error::Data(format!("non-finite history position for agent index {i}")));
            }
        }
        for (i, f) in future_gt.iter().enumerate() {
            if f.len() != t_f {
                return Err(Error::Data(format!("ragged future for agent index {i}")));
            }
            if f.iter().any(|p| !geom::is_finite(*p)) {
                return Err(Error::Data(format!("non-finite future position for agent index {i}")));
            }
        }
        let origin_per_agent = history.iter().map(|h| *h.last().unwrap()).collect();
        Ok(Self {
            scene_id: scene_id.into(),
            agent_ids,
            history,
            future_gt,
            dt,
            unit,
            origin_per_agent,
        })
    }

    pub fn agents(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn history_len(&self) -> usize {
        self.history[0].len()
    }

    pub fn future_len(&self) -> usize {
        self.future_gt[0].len()
    }

    /// Ground-truth future of one agent relative to its anchor.
    pub fn relative_future(&self, agent: usize) -> Vec<Point> {
        let o = self.origin_per_agent[agent];
        self.future_gt[agent].iter().map(|p| geom::sub(*p, o)).collect()
    }

    /// Ground-truth future of one agent flattened to `[x1, y1, x2, y2, ...]`
    /// relative to its anchor; the latent the flow model regresses onto.
    pub fn relative_future_flat(&self, agent: usize) -> Vec<f64> {
        self.relative_future(agent).iter().flat_map(|p| [p[0], p[1]]).collect()
    }
}

/// K sampled future trajectories per agent for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    /// `k x agents x future_len` positions.
    pub samples: Vec<Vec<Vec<Point>>>,
    pub frame: Frame,
}

impl PredictionSet {
    pub fn new(samples: Vec<Vec<Vec<Point>>>, frame: Frame) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("prediction set needs at least one sample".into()));
        }
        let a = samples[0].len();
        let t_f = samples[0].first().map_or(0, |s| s.len());
        if a == 0 || t_f == 0 {
            return Err(Error::Data("prediction set has no agents or empty futures".into()));
        }
        for sample in &samples {
            if sample.len() != a || sample.iter().any(|s| s.len() != t_f) {
                return Err(Error::Data("ragged prediction set".into()));
            }
        }
        Ok(Self { samples, frame })
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn agents(&self) -> usize {
        self.samples[0].len()
    }

    pub fn future_len(&self) -> usize {
        self.samples[0][0].len()
    }
}

/// Shifts a relative prediction set into the absolute world frame by adding
/// each agent's anchor to every position.
pub fn to_absolute(pred: &PredictionSet, window: &TrajectoryWindow) -> Result<PredictionSet> {
    if pred.frame == Frame::Absolute {
        return Err(Error::Data("prediction set is already absolute".into()));
    }
    if pred.agents() != window.agents() {
        return Err(Error::Data(format!(
            "agent count mismatch: predictions={}, window={}",
            pred.agents(),
            window.agents()
        )));
    }
    let samples = pred
        .samples
        .iter()
        .map(|sample| {
            sample
                .iter()
                .enumerate()
                .map(|(a, traj)| {
                    let o = window.origin_per_agent[a];
                    traj.iter().map(|p| geom::add(*p, o)).collect()
                })
                .collect()
        })
        .collect();
    Ok(PredictionSet { samples, frame: Frame::Absolute })
}

/// Step-to-step displacements: `out[t] = traj[t+1] - traj[t]`, in units of
/// position per step.
pub fn finite_differences(traj: &[Point]) -> Result<Vec<Point>> {
    if traj.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 positions for finite differences, got {}",
            traj.len()
        )));
    }
    Ok(traj.windows(2).map(|w| geom::sub(w[1], w[0])).collect())
}
