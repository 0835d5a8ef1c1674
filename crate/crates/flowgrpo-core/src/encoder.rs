//! Interaction-aware spatio-temporal context encoder.
//!
//! Two branches produce one conditioning token per agent. An implicit branch
//! runs temporal self-attention over each agent's own history and social
//! self-attention across agents at the last observed frame. An explicit
//! branch builds a field-of-view-masked top-K neighbor graph, passes
//! sigmoid-gated edge messages (no softmax competition across neighbors),
//! pools them over time with a gated temporal average, and fuses the result
//! into the implicit context through a strength-modulated gated residual.
//!
//! The whole forward pass is built on the autodiff graph, so pretraining can
//! differentiate end to end through both branches.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::params::ParamSet;
use crate::traj::TrajectoryWindow;

/// Raw per-frame node state: position relative to the agent's own anchor,
/// plus velocity in position units per step.
pub const NODE_FEAT: usize = 4;
/// Raw edge feature width: relative position, relative velocity, distance,
/// heading cosine.
pub const EDGE_FEAT: usize = 6;
/// Implicit-branch input: node state plus the scaled absolute anchor.
pub const SOCIAL_FEAT: usize = 6;

/// Keeps world-scale anchors commensurate with unit-scale kinematics.
const ANCHOR_SCALE: f64 = 0.1;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FovConfig {
    /// Field-of-view threshold on the angle between velocity and relative
    /// position, degrees; a neighbor is visible iff the angle is at most
    /// this value.
    #[serde(default = "default_theta_fov")]
    pub theta_fov_deg: f64,
    /// History frames accumulated for neighbor selection (capped at the
    /// window's history length).
    #[serde(default = "default_fov_window")]
    pub window: usize,
    /// Neighbor budget per agent.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_theta_fov() -> f64 {
    120.0
}
fn default_fov_window() -> usize {
    8
}
fn default_top_k() -> usize {
    4
}
fn default_eps() -> f64 {
    1e-6
}

impl Default for FovConfig {
    fn default() -> Self {
        Self {
            theta_fov_deg: default_theta_fov(),
            window: default_fov_window(),
            top_k: default_top_k(),
            eps: default_eps(),
        }
    }
}

impl FovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_fov_deg > 0.0 && self.theta_fov_deg <= 180.0) {
            return Err(Error::Config("theta_fov_deg must lie in (0, 180]".into()));
        }
        if self.top_k == 0 || self.window == 0 {
            return Err(Error::Config("top_k and window must be >= 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Field-of-view-masked neighbor graph over the accumulation window.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    /// Per-agent selected neighbor indices, strongest score first.
    pub neighbors: Vec<Vec<usize>>,
    /// `agents x agents x window` binary visibility per frame.
    pub visibility: Vec<Vec<Vec<u8>>>,
    /// Accumulated visibility-weighted inverse-distance scores.
    pub selection_scores: Vec<Vec<f64>>,
    /// Raw edge features for selected pairs: `[i][neighbor_idx][frame]`.
    pub edge_feats: Vec<Vec<Vec<[f64; EDGE_FEAT]>>>,
    /// Number of history frames the graph covers (the selection window).
    pub frames: usize,
}

/// Per-agent conditioning output.
#[derive(Debug, Clone)]
pub struct ContextToken {
    pub token: Vec<f64>,
    pub strength: f64,
    pub soc_context: Vec<f64>,
    pub phys_feature: Vec<f64>,
}

/// 1 iff the neighbor direction lies within the field of view of a moving
/// agent. Zero velocity has no defined heading and masks everything out;
/// a coincident neighbor counts as dead ahead.
pub fn visibility_mask(velocity: Point, rel_pos: Point, cfg: &FovConfig) -> u8 {
    if geom::norm(velocity) <= cfg.eps {
        return 0;
    }
    if geom::norm(rel_pos) <= cfg.eps {
        return 1;
    }
    u8::from(geom::angle_deg(velocity, rel_pos) <= cfg.theta_fov_deg)
}

/// Per-frame velocities from history by backward differences; the first
/// frame reuses the second frame's velocity. Single-frame histories get
/// zero velocity.
pub fn history_velocities(history: &[Point]) -> Vec<Point> {
    if history.len() < 2 {
        return vec![[0.0, 0.0]; history.len()];
    }
    let mut v: Vec<Point> = Vec::with_capacity(history.len());
    v.push(geom::sub(history[1], history[0]));
    for t in 1..history.len() {
        v.push(geom::sub(history[t], history[t - 1]));
    }
    v
}

/// Raw edge feature vector between two agents at one frame:
/// `[dp.x, dp.y, dv.x, dv.y, |dp|, cos(v_i, dp)]`.
pub fn edge_feature(
    pos_i: Point,
    vel_i: Point,
    pos_j: Point,
    vel_j: Point,
    eps: f64,
) -> [f64; EDGE_FEAT] {
    let dp = geom::sub(pos_j, pos_i);
    let dv = geom::sub(vel_j, vel_i);
    let dist = geom::norm(dp);
    let vi_norm = geom::norm(vel_i);
    let cos = if vi_norm <= eps || dist <= eps {
        0.0
    } else {
        geom::dot(vel_i, dp) / (vi_norm * dist)
    };
    [dp[0], dp[1], dv[0], dv[1], dist, cos]
}

/// Builds the dynamic neighbor graph: accumulated visibility-masked inverse
/// distance over the trailing window, top-K by score with index-order tie
/// breaking, zero-score candidates excluded.
pub fn select_neighbors(window: &TrajectoryWindow, cfg: &FovConfig) -> InteractionGraph {
    let a = window.agents();
    let t_h = window.history_len();
    let frames = cfg.window.min(t_h);
    let start = t_h - frames;
    let velocities: Vec<Vec<Point>> =
        window.history.iter().map(|h| history_velocities(h)).collect();

    let mut visibility = vec![vec![vec![0u8; frames]; a]; a];
    let mut scores = vec![vec![0.0f64; a]; a];
    for i in 0..a {
        for j in 0..a {
            if i == j {
                continue;
            }
            for (f, t) in (start..t_h).enumerate() {
                let rel = geom::sub(window.history[j][t], window.history[i][t]);
                let m = visibility_mask(velocities[i][t], rel, cfg);
                visibility[i][j][f] = m;
                if m == 1 {
                    scores[i][j] += 1.0 / (geom::norm(rel) + cfg.eps);
                }
            }
        }
    }

    let mut neighbors = Vec::with_capacity(a);
    for i in 0..a {
        let mut cands: Vec<usize> = (0..a).filter(|&j| j != i && scores[i][j] > 0.0).collect();
        cands.sort_by(|&x, &y| {
            scores[i][y].partial_cmp(&scores[i][x]).unwrap().then(x.cmp(&y))
        });
        cands.truncate(cfg.top_k);
        neighbors.push(cands);
    }

    let mut edge_feats = Vec::with_capacity(a);
    for i in 0..a {
        let mut per_neighbor = Vec::with_capacity(neighbors[i].len());
        for &j in &neighbors[i] {
            let feats: Vec<[f64; EDGE_FEAT]> = (start..t_h)
                .map(|t| {
                    edge_feature(
                        window.history[i][t],
                        velocities[i][t],
                        window.history[j][t],
                        velocities[j][t],
                        cfg.eps,
                    )
                })
                .collect();
            per_neighbor.push(feats);
        }
        edge_feats.push(per_neighbor);
    }

    InteractionGraph { neighbors, visibility, selection_scores: scores, edge_feats, frames }
}

// ----- parameter layout -----

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Embedding width.
    #[serde(default = "default_width")]
    pub d: usize,
}

fn default_width() -> usize {
    64
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { d: default_width() }
    }
}

/// Block shapes for the encoder, prefix `enc.`.
pub fn encoder_blocks(cfg: &EncoderConfig) -> Vec<(String, usize, usize)> {
    let d = cfg.d;
    let b = |name: &str, rows: usize, cols: usize| (format!("enc.{name}"), rows, cols);
    vec![
        b("soc.w_in", d, SOCIAL_FEAT),
        b("soc.b_in", d, 1),
        b("soc.t_wq", d, d),
        b("soc.t_wk", d, d),
        b("soc.t_wv", d, d),
        b("soc.t_wo", d, d),
        b("soc.t_ln_scale", d, 1),
        b("soc.t_ln_shift", d, 1),
        b("soc.s_wq", d, d),
        b("soc.s_wk", d, d),
        b("soc.s_wv", d, d),
        b("soc.s_wo", d, d),
        b("soc.s_ln_scale", d, 1),
        b("soc.s_ln_shift", d, 1),
        b("edge.w1", d, EDGE_FEAT),
        b("edge.b1", d, 1),
        b("edge.w2", d, d),
        b("edge.b2", d, 1),
        b("gate.w1", d, 2 * NODE_FEAT + d),
        b("gate.b1", d, 1),
        b("gate.w2", d, d),
        b("gate.b2", d, 1),
        b("value_proj", d, NODE_FEAT),
        b("edge_proj", d, d),
        b("tgate.w", d, d),
        b("tgate.b", d, 1),
        b("fuse.w1", d, 2 * d + 1),
        b("fuse.b1", d, 1),
        b("fuse.w2", d, d),
        b("fuse.b2", d, 1),
        b("phys_proj", d, d),
        b("ln_scale", d, 1),
        b("ln_shift", d, 1),
        b("lambda", 1, 1),
    ]
}

/// Parameter leaves for one graph.
pub struct EncoderVars {
    pub soc_w_in: Var,
    pub soc_b_in: Var,
    pub t_wq: Var,
    pub t_wk: Var,
    pub t_wv: Var,
    pub t_wo: Var,
    pub t_ln_scale: Var,
    pub t_ln_shift: Var,
    pub s_wq: Var,
    pub s_wk: Var,
    pub s_wv: Var,
    pub s_wo: Var,
    pub s_ln_scale: Var,
    pub s_ln_shift: Var,
    pub edge_w1: Var,
    pub edge_b1: Var,
    pub edge_w2: Var,
    pub edge_b2: Var,
    pub gate_w1: Var,
    pub gate_b1: Var,
    pub gate_w2: Var,
    pub gate_b2: Var,
    pub value_proj: Var,
    pub edge_proj: Var,
    pub tgate_w: Var,
    pub tgate_b: Var,
    pub fuse_w1: Var,
    pub fuse_b1: Var,
    pub fuse_w2: Var,
    pub fuse_b2: Var,
    pub phys_proj: Var,
    pub ln_scale: Var,
    pub ln_shift: Var,
    pub lambda: Var,
    pub d: usize,
}

pub fn encoder_leaves(g: &mut Graph, params: &ParamSet, cfg: &EncoderConfig) -> EncoderVars {
    let l = |g: &mut Graph, name: &str| params.leaf(g, &format!("enc.{name}"));
    EncoderVars {
        soc_w_in: l(g, "soc.w_in"),
        soc_b_in: l(g, "soc.b_in"),
        t_wq: l(g, "soc.t_wq"),
        t_wk: l(g, "soc.t_wk"),
        t_wv: l(g, "soc.t_wv"),
        t_wo: l(g, "soc.t_wo"),
        t_ln_scale: l(g, "soc.t_ln_scale"),
        t_ln_shift: l(g, "soc.t_ln_shift"),
        s_wq: l(g, "soc.s_wq"),
        s_wk: l(g, "soc.s_wk"),
        s_wv: l(g, "soc.s_wv"),
        s_wo: l(g, "soc.s_wo"),
        s_ln_scale: l(g, "soc.s_ln_scale"),
        s_ln_shift: l(g, "soc.s_ln_shift"),
        edge_w1: l(g, "edge.w1"),
        edge_b1: l(g, "edge.b1"),
        edge_w2: l(g, "edge.w2"),
        edge_b2: l(g, "edge.b2"),
        gate_w1: l(g, "gate.w1"),
        gate_b1: l(g, "gate.b1"),
        gate_w2: l(g, "gate.w2"),
        gate_b2: l(g, "gate.b2"),
        value_proj: l(g, "value_proj"),
        edge_proj: l(g, "edge_proj"),
        tgate_w: l(g, "tgate.w"),
        tgate_b: l(g, "tgate.b"),
        fuse_w1: l(g, "fuse.w1"),
        fuse_b1: l(g, "fuse.b1"),
        fuse_w2: l(g, "fuse.w2"),
        fuse_b2: l(g, "fuse.b2"),
        phys_proj: l(g, "phys_proj"),
        ln_scale: l(g, "ln_scale"),
        ln_shift: l(g, "ln_shift"),
        lambda: l(g, "lambda"),
        d: cfg.d,
    }
}

/// Validates that a parameter set carries every encoder block at the shapes
/// this config requires.
pub fn validate_encoder_params(params: &ParamSet, cfg: &EncoderConfig) -> Result<()> {
    for (name, rows, cols) in encoder_blocks(cfg) {
        let found = params
            .blocks()
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Config(format!("missing parameter block {name}")))?;
        if (found.rows, found.cols) != (rows, cols) {
            return Err(Error::Config(format!(
                "parameter block {name} has shape {}x{}, expected {rows}x{cols}",
                found.rows, found.cols
            )));
        }
    }
    Ok(())
}

/// Two-layer perceptron with tanh hidden activation and linear output.
fn mlp2(g: &mut Graph, w1: Var, b1: Var, w2: Var, b2: Var, x: Var) -> Var {
    let h = g.matvec(w1, x);
    let h = g.add(h, b1);
    let h = g.tanh(h);
    let o = g.matvec(w2, h);
    g.add(o, b2)
}

fn sinusoidal_embedding(pos: f64, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let freq = 1.0 / 10_000f64.powf(2.0 * k as f64 / dim as f64);
        out.push((pos * freq).sin());
        out.push((pos * freq).cos());
    }
    if dim % 2 == 1 {
        out.push(0.0);
    }
    out
}

/// Implicit social context: temporal attention of each agent's final-frame
/// token over its own history, then social attention across agents.
pub fn social_context(
    g: &mut Graph,
    vars: &EncoderVars,
    window: &TrajectoryWindow,
) -> Vec<Var> {
    let a = window.agents();
    let t_h = window.history_len();
    let scale = 1.0 / (vars.d as f64).sqrt();
    let velocities: Vec<Vec<Point>> =
        window.history.iter().map(|h| history_velocities(h)).collect();

    // Per-agent attended history summary.
    let mut summaries = Vec::with_capacity(a);
    for i in 0..a {
        let anchor = window.origin_per_agent[i];
        let mut toks = Vec::with_capacity(t_h);
        for t in 0..t_h {
            let rel = geom::sub(window.history[i][t], anchor);
            let feat = [
                rel[0],
                rel[1],
                velocities[i][t][0],
                velocities[i][t][1],
                ANCHOR_SCALE * anchor[0],
                ANCHOR_SCALE * anchor[1],
            ];
            let x = g.constant_vec(&feat);
            let proj = g.matvec(vars.soc_w_in, x);
            let proj = g.add(proj, vars.soc_b_in);
            let proj = g.tanh(proj);
            let pe = g.constant_vec(&sinusoidal_embedding(t as f64, vars.d));
            toks.push(g.add(proj, pe));
        }
        let last = toks[t_h - 1];
        let q = g.matvec(vars.t_wq, last);
        let mut scores = Vec::with_capacity(t_h);
        let mut values = Vec::with_capacity(t_h);
        for tok in &toks {
            let k = g.matvec(vars.t_wk, *tok);
            let s = g.dot(q, k);
            scores.push(g.scale(s, scale));
            values.push(g.matvec(vars.t_wv, *tok));
        }
        let score_vec = g.concat(&scores);
        let attn = g.softmax(score_vec);
        let mut ctx: Option<Var> = None;
        for (t, v) in values.iter().enumerate() {
            let w = g.index(attn, t);
            let contrib = g.mul_scalar(*v, w);
            ctx = Some(match ctx {
                Some(c) => g.add(c, contrib),
                None => contrib,
            });
        }
        let proj = g.matvec(vars.t_wo, ctx.unwrap());
        let res = g.add(last, proj);
        summaries.push(g.layer_norm(res, vars.t_ln_scale, vars.t_ln_shift, LN_EPS));
    }

    // Social attention across agents at the last frame.
    let mut out = Vec::with_capacity(a);
    for i in 0..a {
        let q = g.matvec(vars.s_wq, summaries[i]);
        let mut scores = Vec::with_capacity(a);
        let mut values = Vec::with_capacity(a);
        for s in &summaries {
            let k = g.matvec(vars.s_wk, *s);
            let sc = g.dot(q, k);
            scores.push(g.scale(sc, scale));
            values.push(g.matvec(vars.s_wv, *s));
        }
        let score_vec = g.concat(&scores);
        let attn = g.softmax(score_vec);
        let mut ctx: Option<Var> = None;
        for (j, v) in values.iter().enumerate() {
            let w = g.index(attn, j);
            let contrib = g.mul_scalar(*v, w);
            ctx = Some(match ctx {
                Some(c) => g.add(c, contrib),
                None => contrib,
            });
        }
        let proj = g.matvec(vars.s_wo, ctx.unwrap());
        let res = g.add(summaries[i], proj);
        out.push(g.layer_norm(res, vars.s_ln_scale, vars.s_ln_shift, LN_EPS));
    }
    out
}

/// Messages and gate activations from edge-aware gated message passing.
pub struct MessagePassing {
    /// `agents x frames` message vectors.
    pub messages: Vec<Vec<Var>>,
    /// Per-agent gate activations, one per (neighbor, frame) edge.
    pub gates: Vec<Vec<Var>>,
}

/// Eq-style gated aggregation: per edge an independent sigmoid gate over
/// `[h_i || h_j || e_ij]` weights `W_V h_j + W_E e_ij`; messages sum over
/// the neighbor set, so empty neighborhoods yield exact zeros.
pub fn gated_message_passing(
    g: &mut Graph,
    vars: &EncoderVars,
    igraph: &InteractionGraph,
    node_states: &[Vec<[f64; NODE_FEAT]>],
) -> MessagePassing {
    let a = node_states.len();
    let frames = igraph.frames;
    let mut messages = Vec::with_capacity(a);
    let mut gates = Vec::with_capacity(a);
    for i in 0..a {
        let mut agent_msgs = Vec::with_capacity(frames);
        let mut agent_gates = Vec::new();
        for f in 0..frames {
            let mut msg: Option<Var> = None;
            for (n_idx, &j) in igraph.neighbors[i].iter().enumerate() {
                let e_raw = g.constant_vec(&igraph.edge_feats[i][n_idx][f]);
                let e = mlp2(g, vars.edge_w1, vars.edge_b1, vars.edge_w2, vars.edge_b2, e_raw);
                let hi = g.constant_vec(&node_states[i][f]);
                let hj = g.constant_vec(&node_states[j][f]);
                let gate_in = g.concat(&[hi, hj, e]);
                let pre =
                    mlp2(g, vars.gate_w1, vars.gate_b1, vars.gate_w2, vars.gate_b2, gate_in);
                let gate = g.sigmoid(pre);
                let vh = g.matvec(vars.value_proj, hj);
                let ve = g.matvec(vars.edge_proj, e);
                let payload = g.add(vh, ve);
                let weighted = g.hadamard(gate, payload);
                msg = Some(match msg {
                    Some(m) => g.add(m, weighted),
                    None => weighted,
                });
                agent_gates.push(gate);
            }
            let m = msg.unwrap_or_else(|| g.constant_vec(&vec![0.0; vars.d]));
            agent_msgs.push(m);
        }
        messages.push(agent_msgs);
        gates.push(agent_gates);
    }
    MessagePassing { messages, gates }
}

/// Temporal gated pooling plus the scalar interaction strength: per-channel
/// sigmoid gates normalized to sum to one over frames weight the messages;
/// strength is the mean of all gate activations (zero without edges).
pub fn temporal_pool_and_strength(
    g: &mut Graph,
    vars: &EncoderVars,
    messages: &[Var],
    gates: &[Var],
) -> (Var, Var) {
    assert!(!messages.is_empty(), "temporal pooling needs at least one frame");
    let mut alphas = Vec::with_capacity(messages.len());
    for m in messages {
        let pre = g.matvec(vars.tgate_w, *m);
        let pre = g.add(pre, vars.tgate_b);
        alphas.push(g.sigmoid(pre));
    }
    let mut total = alphas[0];
    for a in &alphas[1..] {
        total = g.add(total, *a);
    }
    let mut pooled: Option<Var> = None;
    for (alpha, m) in alphas.iter().zip(messages) {
        let norm = g.div_elem(*alpha, total);
        let contrib = g.hadamard(norm, *m);
        pooled = Some(match pooled {
            Some(p) => g.add(p, contrib),
            None => contrib,
        });
    }
    let strength = if gates.is_empty() {
        g.scalar(0.0)
    } else {
        let all = g.concat(gates);
        g.mean(all)
    };
    (pooled.unwrap(), strength)
}

/// Strength-modulated gated residual fusion:
/// `c = z_soc + lambda * s * gate (.) tanh(W_phy LN(h_phy))`.
pub fn fuse_context(
    g: &mut Graph,
    vars: &EncoderVars,
    z_soc: Var,
    h_phy: Var,
    strength: Var,
) -> Var {
    let fuse_in = g.concat(&[z_soc, h_phy, strength]);
    let pre = mlp2(g, vars.fuse_w1, vars.fuse_b1, vars.fuse_w2, vars.fuse_b2, fuse_in);
    let gate = g.sigmoid(pre);
    let ln = g.layer_norm(h_phy, vars.ln_scale, vars.ln_shift, LN_EPS);
    let proj = g.matvec(vars.phys_proj, ln);
    let act = g.tanh(proj);
    let gated = g.hadamard(gate, act);
    let scaled = g.mul_scalar(gated, strength);
    let lam = g.index(vars.lambda, 0);
    let scaled = g.mul_scalar(scaled, lam);
    g.add(z_soc, scaled)
}

/// Graph-side per-agent token handles from a full encoder forward.
pub struct TokenVars {
    pub token: Var,
    pub strength: Var,
    pub soc_context: Var,
    pub phys_feature: Var,
}

/// Full encoder forward on an existing graph.
pub fn encode_on_graph(
    g: &mut Graph,
    vars: &EncoderVars,
    window: &TrajectoryWindow,
    cfg: &FovConfig,
) -> Vec<TokenVars> {
    let a = window.agents();
    let igraph = select_neighbors(window, cfg);
    let z_socs = social_context(g, vars, window);

    let t_h = window.history_len();
    let start = t_h - igraph.frames;
    let node_states: Vec<Vec<[f64; NODE_FEAT]>> = (0..a)
        .map(|i| {
            let vels = history_velocities(&window.history[i]);
            let anchor = window.origin_per_agent[i];
            (start..t_h)
                .map(|t| {
                    let rel = geom::sub(window.history[i][t], anchor);
                    [rel[0], rel[1], vels[t][0], vels[t][1]]
                })
                .collect()
        })
        .collect();

    let mp = gated_message_passing(g, vars, &igraph, &node_states);
    let mut out = Vec::with_capacity(a);
    for i in 0..a {
        let (h_phy, strength) =
            temporal_pool_and_strength(g, vars, &mp.messages[i], &mp.gates[i]);
        let token = fuse_context(g, vars, z_socs[i], h_phy, strength);
        out.push(TokenVars { token, strength, soc_context: z_socs[i], phys_feature: h_phy });
    }
    out
}

/// Value-level encoding: runs the forward on a throwaway graph.
pub fn encode(
    params: &ParamSet,
    enc_cfg: &EncoderConfig,
    window: &TrajectoryWindow,
    cfg: &FovConfig,
) -> Result<Vec<ContextToken>> {
    cfg.validate()?;
    validate_encoder_params(params, enc_cfg)?;
    let mut g = Graph::new();
    let vars = encoder_leaves(&mut g, params, enc_cfg);
    let tokens = encode_on_graph(&mut g, &vars, window, cfg);
    tokens
        .into_iter()
        .map(|t| {
            let token = g.value(t.token).to_vec();
            if token.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("non-finite context token".into()));
            }
            Ok(ContextToken {
                token,
                strength: g.scalar_value(t.strength),
                soc_context: g.value(t.soc_context).to_vec(),
                phys_feature: g.value(t.phys_feature).to_vec(),
            })
        })
        .collect()
}
