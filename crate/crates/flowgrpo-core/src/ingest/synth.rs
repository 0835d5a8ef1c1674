//! Seeded synthetic crowd scenes for desk-scale training and post-training
//! experiments.
//!
//! Motion comes from a goal-directed integrator with short-range agent
//! repulsion (and obstacle repulsion plus waypoint detours in the obstacle
//! scenario), so ground-truth futures are collision-sparse while still
//! carrying interaction structure a constant-velocity extrapolation cannot
//! capture. Everything is deterministic under the config seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::rng;
use crate::scenemap::SceneMap;
use crate::traj::{TrajectoryWindow, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Two interleaved opposing streams with head-on passing pressure.
    CrossingFlows,
    /// Parallel lanes with overtaking and adjacent-lane passing.
    Corridor,
    /// A rectangular obstacle agents must detour around; emits a SceneMap.
    ObstacleField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_agents: usize,
    pub scenario: Scenario,
    /// Per-step position noise, meters.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    pub n_windows: usize,
    #[serde(default = "default_t_h")]
    pub t_h: usize,
    #[serde(default = "default_t_f")]
    pub t_f: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_noise_std() -> f64 {
    0.05
}
fn default_t_h() -> usize {
    8
}
fn default_t_f() -> usize {
    12
}
fn default_dt() -> f64 {
    0.4
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be >= 1".into()));
        }
        if self.noise_std < 0.0 {
            return Err(Error::Config("noise_std must be >= 0".into()));
        }
        if self.n_windows == 0 {
            return Err(Error::Config("n_windows must be >= 1".into()));
        }
        if self.t_h == 0 || self.t_f == 0 {
            return Err(Error::Config("t_h and t_f must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SynthOutput {
    pub windows: Vec<TrajectoryWindow>,
    /// Present for the obstacle scenario; shared by all its windows.
    pub map: Option<SceneMap>,
}

// Integrator constants (GT dynamics, not exposed as config).
const RELAX_TAU: f64 = 0.6;
const MAX_SPEED: f64 = 2.0;
const REP_STRENGTH: f64 = 2.4;
const REP_RANGE: f64 = 0.70;
const REP_FALLOFF: f64 = 0.32;
const REP_CUTOFF: f64 = 2.5;
const OBS_STRENGTH: f64 = 2.5;
const OBS_RANGE: f64 = 0.45;
const OBS_FALLOFF: f64 = 0.30;

// Obstacle-field geometry (world meters).
const OBSTACLE_HALF: f64 = 1.0;
const MAP_EXTENT: f64 = 8.0;
const MAP_CELL: f64 = 0.25;
const DETOUR_Y: f64 = 1.7;

struct Agent {
    pos: Point,
    vel: Point,
    goal: Point,
    pref_speed: f64,
    /// Remaining detour waypoints, consumed front to back.
    waypoints: Vec<Point>,
}

impl Agent {
    fn target(&self) -> Point {
        *self.waypoints.first().unwrap_or(&self.goal)
    }

    fn advance_waypoints(&mut self) {
        while let Some(wp) = self.waypoints.first() {
            let toward_goal_x = (self.goal[0] - wp[0]).signum();
            let passed = (wp[0] - self.pos[0]) * toward_goal_x < 0.0;
            if geom::dist(self.pos, *wp) < 0.5 || passed {
                self.waypoints.remove(0);
            } else {
                break;
            }
        }
    }
}

/// Shortest distance from a point to the axis-aligned obstacle square,
/// together with the unit direction pointing away from it.
fn obstacle_clearance(p: Point) -> (f64, Point) {
    let cx = p[0].clamp(-OBSTACLE_HALF, OBSTACLE_HALF);
    let cy = p[1].clamp(-OBSTACLE_HALF, OBSTACLE_HALF);
    let away = geom::sub(p, [cx, cy]);
    let d = geom::norm(away);
    if d > 1e-9 {
        (d, geom::scale(away, 1.0 / d))
    } else {
        // Inside the rectangle: push toward the nearest face.
        let dirs = [
            (OBSTACLE_HALF - p[0], [1.0, 0.0]),
            (p[0] + OBSTACLE_HALF, [-1.0, 0.0]),
            (OBSTACLE_HALF - p[1], [0.0, 1.0]),
            (p[1] + OBSTACLE_HALF, [0.0, -1.0]),
        ];
        let (_, dir) = dirs
            .into_iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        (0.0, dir)
    }
}

fn simulate(
    agents: &mut [Agent],
    steps: usize,
    cfg: &SynthConfig,
    with_obstacle: bool,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Vec<Vec<Point>> {
    let mut tracks: Vec<Vec<Point>> = agents.iter().map(|a| vec![a.pos]).collect();
    for _ in 1..steps {
        let positions: Vec<Point> = agents.iter().map(|a| a.pos).collect();
        for (i, agent) in agents.iter_mut().enumerate() {
            agent.advance_waypoints();
            let to_target = geom::sub(agent.target(), agent.pos);
            let dist = geom::norm(to_target);
            let desired = if dist > 1e-9 {
                geom::scale(to_target, agent.pref_speed / dist)
            } else {
                [0.0, 0.0]
            };
            let mut accel = geom::scale(geom::sub(desired, agent.vel), 1.0 / RELAX_TAU);
            for (j, other) in positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let away = geom::sub(agent.pos, *other);
                let d = geom::norm(away);
                if d > 1e-9 && d < REP_CUTOFF {
                    let mag = REP_STRENGTH * ((REP_RANGE - d) / REP_FALLOFF).exp();
                    accel = geom::add(accel, geom::scale(away, mag / d));
                }
            }
            if with_obstacle {
                let (d, dir) = obstacle_clearance(agent.pos);
                let mag = OBS_STRENGTH * ((OBS_RANGE - d) / OBS_FALLOFF).exp();
                accel = geom::add(accel, geom::scale(dir, mag));
            }
            agent.vel = geom::add(agent.vel, geom::scale(accel, cfg.dt));
            let speed = geom::norm(agent.vel);
            if speed > MAX_SPEED {
                agent.vel = geom::scale(agent.vel, MAX_SPEED / speed);
            }
            agent.pos = geom::add(agent.pos, geom::scale(agent.vel, cfg.dt));
            if cfg.noise_std > 0.0 {
                agent.pos[0] += cfg.noise_std * rng::normal(rng);
                agent.pos[1] += cfg.noise_std * rng::normal(rng);
            }
            tracks[i].push(agent.pos);
        }
    }
    tracks
}

fn corridor_agents(cfg: &SynthConfig, rng: &mut rand_chacha::ChaCha12Rng) -> Vec<Agent> {
    let n = cfg.n_agents;
    let n_lanes = (n.div_ceil(2)).clamp(1, 4);
    let lane_gap = 0.7;
    (0..n)
        .map(|i| {
            let lane = i % n_lanes;
            let slot = i / n_lanes;
            let lane_y = (lane as f64 - (n_lanes as f64 - 1.0) / 2.0) * lane_gap;
            let dir = if lane % 2 == 0 { 1.0 } else { -1.0 };
            // Rear slots start behind and faster, forcing overtakes.
            let base_speed = rng::uniform(rng) * 0.4 + 0.8;
            let pref_speed = base_speed + 0.35 * slot as f64;
            let x0 = -dir * (3.0 + 2.2 * slot as f64 + rng::uniform(rng) * 1.2);
            let pos = [x0, lane_y];
            Agent {
                pos,
                vel: [dir * pref_speed, 0.0],
                goal: [dir * 60.0, lane_y],
                pref_speed,
                waypoints: Vec::new(),
            }
        })
        .collect()
}

fn crossing_agents(cfg: &SynthConfig, rng: &mut rand_chacha::ChaCha12Rng) -> Vec<Agent> {
    let n = cfg.n_agents;
    (0..n)
        .map(|i| {
            let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
            let lane_slot = (i / 2) as f64;
            // Opposing lanes interleaved 0.45 m apart so streams weave.
            let y0 = (lane_slot - (n as f64 / 2.0 - 1.0) / 2.0) * 0.9 + dir * 0.225
                + (rng::uniform(rng) - 0.5) * 0.2;
            let x0 = -dir * (3.2 + rng::uniform(rng) * 1.8);
            let pref_speed = rng::uniform(rng) * 0.4 + 0.9;
            Agent {
                pos: [x0, y0],
                vel: [dir * pref_speed, 0.0],
                goal: [dir * 60.0, y0],
                pref_speed,
                waypoints: Vec::new(),
            }
        })
        .collect()
}

fn obstacle_agents(cfg: &SynthConfig, rng: &mut rand_chacha::ChaCha12Rng) -> Vec<Agent> {
    let n = cfg.n_agents;
    (0..n)
        .map(|_| {
            let x0 = -6.2 + rng::uniform(rng) * 1.8;
            let y0 = (rng::uniform(rng) - 0.5) * 4.4;
            let goal_y = (rng::uniform(rng) - 0.5) * 3.6;
            let pref_speed = rng::uniform(rng) * 0.4 + 0.9;
            let pos = [x0, y0];
            // Detour around the square when the straight path would cross it.
            let crossing_y = y0 + (goal_y - y0) * ((0.0 - x0) / (6.0 - x0));
            let mut waypoints = Vec::new();
            if crossing_y.abs() < OBSTACLE_HALF + 0.45 {
                let side = if crossing_y >= 0.0 { 1.0 } else { -1.0 };
                waypoints.push([-1.6, side * DETOUR_Y]);
                waypoints.push([1.6, side * DETOUR_Y]);
            }
            Agent {
                pos,
                vel: [pref_speed, 0.0],
                goal: [6.0, goal_y],
                pref_speed,
                waypoints,
            }
        })
        .collect()
}

/// Occupancy grid for the obstacle scenario: a square of side
/// `2 * OBSTACLE_HALF` centered at the origin, on a grid spanning
/// `[-MAP_EXTENT, MAP_EXTENT]^2` at `MAP_CELL` resolution.
pub fn obstacle_field_map() -> Result<SceneMap> {
    let cells = (2.0 * MAP_EXTENT / MAP_CELL) as usize;
    let origin = [-MAP_EXTENT, -MAP_EXTENT];
    let mut occ = vec![0u8; cells * cells];
    for r in 0..cells {
        for c in 0..cells {
            let x = origin[0] + c as f64 * MAP_CELL;
            let y = origin[1] + r as f64 * MAP_CELL;
            if x.abs() <= OBSTACLE_HALF && y.abs() <= OBSTACLE_HALF {
                occ[r * cells + c] = 1;
            }
        }
    }
    SceneMap::axis_aligned(occ, cells, cells, origin, MAP_CELL)
}

/// Generates `n_windows` independent seeded episodes of `t_h + t_f` steps.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let steps = cfg.t_h + cfg.t_f;
    let with_obstacle = cfg.scenario == Scenario::ObstacleField;
    let scenario_tag = match cfg.scenario {
        Scenario::CrossingFlows => "crossing",
        Scenario::Corridor => "corridor",
        Scenario::ObstacleField => "obstacle",
    };
    let mut windows = Vec::with_capacity(cfg.n_windows);
    for w in 0..cfg.n_windows {
        let mut episode_rng = rng::stream_indexed(cfg.seed, "synth", w as u64);
        let mut agents = match cfg.scenario {
            Scenario::Corridor => corridor_agents(cfg, &mut episode_rng),
            Scenario::CrossingFlows => crossing_agents(cfg, &mut episode_rng),
            Scenario::ObstacleField => obstacle_agents(cfg, &mut episode_rng),
        };
        let tracks = simulate(&mut agents, steps, cfg, with_obstacle, &mut episode_rng);
        let history: Vec<Vec<Point>> = tracks.iter().map(|t| t[..cfg.t_h].to_vec()).collect();
        let future: Vec<Vec<Point>> = tracks.iter().map(|t| t[cfg.t_h..].to_vec()).collect();
        let agent_ids: Vec<i64> = (0..cfg.n_agents as i64).collect();
        windows.push(TrajectoryWindow::new(
            format!("synth-{scenario_tag}:{w}"),
            agent_ids,
            history,
            future,
            cfg.dt,
            Unit::Meters,
        )?);
    }
    let map = if with_obstacle { Some(obstacle_field_map()?) } else { None };
    Ok(SynthOutput { windows, map })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scenario: Scenario, n_agents: usize, noise_std: f64, n_windows: usize) -> SynthConfig {
        SynthConfig {
            n_agents,
            scenario,
            noise_std,
            seed: 11,
            n_windows,
            t_h: 8,
            t_f: 12,
            dt: 0.4,
        }
    }

    #[test]
    fn corridor_single_agent_no_noise_is_constant_velocity() {
        let out = generate_synthetic(&cfg(Scenario::Corridor, 1, 0.0, 3)).unwrap();
        for w in &out.windows {
            let mut track = w.history[0].clone();
            track.extend(&w.future_gt[0]);
            let steps = crate::traj::finite_differences(&track).unwrap();
            let first = steps[0];
            for s in &steps {
                assert!((s[0] - first[0]).abs() < 1e-9 && (s[1] - first[1]).abs() < 1e-9);
            }
            assert!(first[1].abs() < 1e-12, "straight lane motion");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic(&cfg(Scenario::CrossingFlows, 6, 0.05, 4)).unwrap();
        let b = generate_synthetic(&cfg(Scenario::CrossingFlows, 6, 0.05, 4)).unwrap();
        assert_eq!(a.windows, b.windows);
        let c = generate_synthetic(&SynthConfig { seed: 12, ..cfg(Scenario::CrossingFlows, 6, 0.05, 4) })
            .unwrap();
        assert_ne!(a.windows, c.windows);
    }

    #[test]
    fn crossing_flows_ground_truth_is_collision_sparse() {
        // Distance-scan oracle over the generated set: min pairwise GT
        // distance above 0.2 m in at least 95% of windows.
        let out = generate_synthetic(&cfg(Scenario::CrossingFlows, 8, 0.05, 100)).unwrap();
        let mut ok = 0usize;
        for w in &out.windows {
            let mut min_d = f64::INFINITY;
            for t in 0..w.future_len() {
                for i in 0..w.agents() {
                    for j in i + 1..w.agents() {
                        min_d = min_d.min(geom::dist(w.future_gt[i][t], w.future_gt[j][t]));
                    }
                }
            }
            if min_d > 0.2 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "collision-sparse in {ok}/100 windows");
    }

    #[test]
    fn obstacle_field_emits_matching_map_and_clean_tracks() {
        let out = generate_synthetic(&cfg(Scenario::ObstacleField, 6, 0.05, 20)).unwrap();
        let map = out.map.expect("obstacle scenario emits a map");
        assert!(map.occupancy.iter().any(|&c| c != 0));
        // Ground truth should rarely enter the obstacle itself.
        let mut inside = 0usize;
        let mut total = 0usize;
        for w in &out.windows {
            for a in 0..w.agents() {
                for p in w.history[a].iter().chain(&w.future_gt[a]) {
                    total += 1;
                    if p[0].abs() < OBSTACLE_HALF && p[1].abs() < OBSTACLE_HALF {
                        inside += 1;
                    }
                }
            }
        }
        assert!(
            (inside as f64) < 0.01 * total as f64,
            "{inside}/{total} ground-truth points inside the obstacle"
        );
    }

    #[test]
    fn mean_step_length_tracks_preferred_speed() {
        let out = generate_synthetic(&cfg(Scenario::Corridor, 1, 0.0, 50)).unwrap();
        let mut speeds = Vec::new();
        for w in &out.windows {
            let steps = crate::traj::finite_differences(&w.history[0]).unwrap();
            speeds.push(geom::norm(steps[0]) / w.dt);
        }
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        // Preferred speeds are drawn from U(0.8, 1.2).
        assert!(mean > 0.85 && mean < 1.15, "mean speed {mean}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = cfg(Scenario::Corridor, 0, 0.0, 1);
        assert!(generate_synthetic(&c).is_err());
        c.n_agents = 1;
        c.noise_std = -0.1;
        assert!(generate_synthetic(&c).is_err());
    }
}
