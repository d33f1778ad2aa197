//! Policy-gradient pedestrian agent acting inside an HMM background scene.
//!
//! The learner controls its acceleration through a diagonal Gaussian policy
//! whose mean and pre-variance come from an [`Mlp64`]. Rewards follow
//!
//! ```text
//! R_t = AF^t · (n_ICS + 1)^(AS + AP) / (t² · (1 + ‖G − x_t‖))
//! ```
//!
//! with an extra terminal penalty on collision, and the network is trained
//! by minimizing `J = −Σ_t log P(a_t | s_t) · R_t`.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interaction::{HmmSim, Observed, SceneConfig};
use crate::neural::{Activation, Gradients};
use crate::rng::SeededRng;
use crate::traj::{Point2, Scene, Track};
use crate::{Mlp64, Point2d, Scene64, Trajectory64};

pub const VAR_FLOOR: f64 = 1e-4;
pub const NUM_NEIGHBORS: usize = 3;
pub const FEATURE_DIM: usize = 4 + 4 * NUM_NEIGHBORS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    /// Fitness.
    pub af: f64,
    /// Sociability.
    #[serde(rename = "as")]
    pub as_: f64,
    /// Patience.
    pub ap: f64,
    pub goal: Point2d,
}

impl AgentProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("af", self.af), ("as", self.as_), ("ap", self.ap)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.goal.is_finite() {
            return Err(Error::InvalidConfig("goal must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub rel_pos: Point2d,
    pub rel_vel: Point2d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point2d,
    pub velocity: Point2d,
    pub t: usize,
    pub n_ics: usize,
    /// Agents within detection range, nearest first.
    pub neighbors: Vec<Neighbor>,
}

/// Per-step reward; `t` is treated as at least 1.
pub fn reward_fn(s: &AgentState, p: &AgentProfile) -> f64 {
    let t = s.t.max(1);
    let tf = t as f64;
    let fatigue = p.af.powi(t.min(i32::MAX as usize) as i32);
    let social = ((s.n_ics + 1) as f64).powf(p.as_ + p.ap);
    fatigue * social / (tf * tf * (1.0 + p.goal.distance(s.position)))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log density of a diagonal Gaussian.
pub fn gaussian_logprob(a: Point2d, mu: Point2d, var: Point2d) -> f64 {
    let term = |a: f64, m: f64, v: f64| -0.5 * (2.0 * PI * v).ln() - (a - m) * (a - m) / (2.0 * v);
    term(a.x, mu.x, var.x) + term(a.y, mu.y, var.y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyHead {
    pub mu: Point2d,
    pub var: Point2d,
    pre_var: Point2d,
}

/// Maps raw network output `[μx, μy, ρx, ρy]` to the Gaussian parameters.
pub fn policy_head(out: &[f64]) -> Result<PolicyHead> {
    if out.len() != 4 {
        return Err(Error::LengthMismatch { expected: 4, found: out.len() });
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("policy network output".into()));
    }
    Ok(PolicyHead {
        mu: Point2::new(out[0], out[1]),
        var: Point2::new(softplus(out[2]) + VAR_FLOOR, softplus(out[3]) + VAR_FLOOR),
        pre_var: Point2::new(out[2], out[3]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub action: Point2d,
    pub logprob: f64,
    pub mu: Point2d,
    pub var: Point2d,
}

/// Policy input: goal offset, own velocity, then relative position and
/// velocity of up to three nearest neighbors (zero-padded), positions
/// divided by `scale`.
pub fn features(s: &AgentState, goal: Point2d, scale: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(FEATURE_DIM);
    let off = (goal - s.position) * (1.0 / scale);
    f.extend([off.x, off.y, s.velocity.x, s.velocity.y]);
    for k in 0..NUM_NEIGHBORS {
        match s.neighbors.get(k) {
            Some(n) => f.extend([n.rel_pos.x / scale, n.rel_pos.y / scale, n.rel_vel.x, n.rel_vel.y]),
            None => f.extend([0.0; 4]),
        }
    }
    f
}

/// Samples an action for a precomputed feature vector.
pub fn act_on(net: &Mlp64, feats: &[f64], rng: &mut SeededRng) -> Result<Action> {
    let head = policy_head(&net.forward(feats)?)?;
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let action = Point2::new(head.mu.x + head.var.x.sqrt() * z1, head.mu.y + head.var.y.sqrt() * z2);
    Ok(Action { action, logprob: gaussian_logprob(action, head.mu, head.var), mu: head.mu, var: head.var })
}

pub fn policy_act(net: &Mlp64, s: &AgentState, goal: Point2d, scale: f64, rng: &mut SeededRng) -> Result<Action> {
    act_on(net, &features(s, goal, scale), rng)
}

/// Learner placement and kinematics around a background scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlEnv {
    /// Background agents, bounds and the shared collision/detection radii.
    pub scene: SceneConfig,
    pub start: Point2d,
    #[serde(default)]
    pub start_velocity: Point2d,
    pub goal_radius: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::v_max")]
    pub v_max: f64,
    #[serde(default = "defaults::a_max")]
    pub a_max: f64,
    /// Added to the reward of a colliding step.
    #[serde(default = "defaults::collision_penalty")]
    pub collision_penalty: f64,
    #[serde(default)]
    pub background_sees_learner: bool,
    #[serde(default = "defaults::feature_scale")]
    pub feature_scale: f64,
    pub max_steps: usize,
}

mod defaults {
    pub fn dt() -> f64 {
        1.0
    }
    pub fn v_max() -> f64 {
        2.0
    }
    pub fn a_max() -> f64 {
        0.5
    }
    pub fn collision_penalty() -> f64 {
        -10.0
    }
    pub fn feature_scale() -> f64 {
        10.0
    }
}

impl RlEnv {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.goal_radius > 0.0 && self.goal_radius.is_finite()) {
            return bad("goal_radius must be positive");
        }
        if !(self.dt > 0.0 && self.v_max > 0.0 && self.a_max >= 0.0 && self.feature_scale > 0.0)
            || !(self.dt.is_finite() && self.v_max.is_finite() && self.a_max.is_finite() && self.feature_scale.is_finite())
        {
            return bad("dt, v_max and feature_scale must be positive, a_max non-negative");
        }
        if !self.collision_penalty.is_finite() {
            return bad("collision_penalty must be finite");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if !self.scene.bounds.contains(self.start) || !self.start_velocity.is_finite() {
            return bad("learner start must be inside the scene bounds");
        }
        if self.scene.agents.iter().any(|a| a.start.distance(self.start) < self.scene.collision_radius) {
            return bad("learner starts inside a collision radius");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Goal,
    Collision,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Policy inputs, one per step.
    pub features: Vec<Vec<f64>>,
    /// States after each step.
    pub states: Vec<AgentState>,
    /// Sampled (unclamped) accelerations.
    pub actions: Vec<Point2d>,
    pub logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub terminal: Terminal,
    pub collision_penalty: f64,
    /// Learner positions including the start.
    pub path: Vec<Point2d>,
    /// Background positions per agent including frame 0.
    pub background: Vec<Vec<Point2d>>,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn final_distance(&self, goal: Point2d) -> f64 {
        self.path.last().expect("path includes start").distance(goal)
    }

    /// Rewards recomputed from the logged states.
    pub fn recompute_rewards(&self, p: &AgentProfile) -> Vec<f64> {
        let n = self.states.len();
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = reward_fn(s, p);
                if i + 1 == n && self.terminal == Terminal::Collision {
                    r + self.collision_penalty
                } else {
                    r
                }
            })
            .collect()
    }

    /// Learner as agent 0 followed by the background agents.
    pub fn to_scene(&self, id: u64, env: &RlEnv) -> Result<Scene64> {
        let mut tracks = vec![Track { agent_id: 0, start_frame: 0, trajectory: Trajectory64::new(self.path.clone())? }];
        for (i, b) in self.background.iter().enumerate() {
            tracks.push(Track { agent_id: i as u64 + 1, start_frame: 0, trajectory: Trajectory64::new(b.clone())? });
        }
        Scene::new(id, tracks, Some(env.scene.bounds))
    }
}

fn neighbors(pos: Point2d, vel: Point2d, others: &[Observed], det: f64) -> Vec<Neighbor> {
    let mut n: Vec<(f64, Neighbor)> = others
        .iter()
        .map(|o| (o.position.distance(pos), Neighbor { rel_pos: o.position - pos, rel_vel: o.velocity - vel }))
        .filter(|(d, _)| *d < det)
        .collect();
    n.sort_by(|a, b| a.0.total_cmp(&b.0));
    n.into_iter().map(|(_, n)| n).collect()
}

fn clamp_norm(v: Point2d, max: f64) -> Point2d {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Rolls out one episode. The policy samples from `rng.derive(0)`, the
/// background scene from `rng.derive(1)`.
pub fn run_episode(net: &Mlp64, env: &RlEnv, p: &AgentProfile, rng: &SeededRng) -> Result<EpisodeLog> {
    env.validate()?;
    p.validate()?;
    if net.input_dim() != FEATURE_DIM || net.output_dim() != 4 {
        return invalid(format!("policy network must map {FEATURE_DIM} inputs to 4 outputs"));
    }
    let mut prng = rng.derive(0);
    let mut sim = HmmSim::new(env.scene.clone(), rng.derive(1))?;
    let det = env.scene.detection_radius;
    let col = env.scene.collision_radius;

    let mut bg = sim.observed();
    let mut state = AgentState {
        position: env.start,
        velocity: env.start_velocity,
        t: 0,
        n_ics: 0,
        neighbors: neighbors(env.start, env.start_velocity, &bg, det),
    };
    let mut log = EpisodeLog {
        features: vec![],
        states: vec![],
        actions: vec![],
        logprobs: vec![],
        rewards: vec![],
        terminal: Terminal::Timeout,
        collision_penalty: env.collision_penalty,
        path: vec![env.start],
        background: bg.iter().map(|o| vec![o.position]).collect(),
    };
    for t in 1..=env.max_steps {
        let feats = features(&state, p.goal, env.feature_scale);
        let a = act_on(net, &feats, &mut prng)?;
        let acc = clamp_norm(a.action, env.a_max);
        let vel = clamp_norm(state.velocity + acc * env.dt, env.v_max);
        let pos = env.scene.bounds.clamp(state.position + vel * env.dt);
        let vel = (pos - state.position) * (1.0 / env.dt);

        let learner = Observed { position: state.position, velocity: state.velocity };
        let external = if env.background_sees_learner { vec![learner] } else { vec![] };
        let prev_bg = bg;
        sim.step(&external);
        bg = sim.observed();

        let mut collided = false;
        let mut entered = 0;
        for (before, now) in prev_bg.iter().zip(&bg) {
            let d = now.position.distance(pos);
            if d < col {
                collided = true;
            } else if d < det && before.position.distance(state.position) >= det {
                entered += 1;
            }
        }
        state = AgentState {
            position: pos,
            velocity: vel,
            t,
            n_ics: state.n_ics + entered,
            neighbors: neighbors(pos, vel, &bg, det),
        };
        let mut r = reward_fn(&state, p);
        if collided {
            r += env.collision_penalty;
        }
        log.features.push(feats);
        log.actions.push(a.action);
        log.logprobs.push(a.logprob);
        log.rewards.push(r);
        log.states.push(state.clone());
        log.path.push(pos);
        for (trace, o) in log.background.iter_mut().zip(&bg) {
            trace.push(o.position);
        }
        if collided {
            log.terminal = Terminal::Collision;
            break;
        }
        if pos.distance(p.goal) <= env.goal_radius {
            log.terminal = Terminal::Goal;
            break;
        }
    }
    Ok(log)
}

/// `J = −Σ logP(a_t|s_t)·R_t` over all episodes under the current network,
/// and its parameter gradient.
pub fn reinforce_objective(net: &Mlp64, episodes: &[EpisodeLog]) -> Result<(f64, Gradients<f64>)> {
    if episodes.is_empty() {
        return invalid("reinforce needs at least one episode");
    }
    let mut j = 0.0;
    let mut g = Gradients::zeros_like(net);
    for ep in episodes {
        if ep.features.len() != ep.rewards.len() || ep.actions.len() != ep.rewards.len() {
            return invalid("inconsistent episode log");
        }
        for ((f, a), r) in ep.features.iter().zip(&ep.actions).zip(&ep.rewards) {
            let (out, cache) = net.forward_cached(f)?;
            let h = policy_head(&out)?;
            j -= gaussian_logprob(*a, h.mu, h.var) * r;
            let up = score_upstream(*a, &h, *r);
            g.add_scaled(&net.backward(&cache, &up)?, 1.0);
        }
    }
    Ok((j, g))
}

/// Gradient of `−R·log P(a)` with respect to the raw network outputs.
pub fn score_upstream(a: Point2d, h: &PolicyHead, r: f64) -> [f64; 4] {
    let d = a - h.mu;
    let dvar = |d: f64, v: f64| -r * (-0.5 / v + d * d / (2.0 * v * v));
    [
        -r * d.x / h.var.x,
        -r * d.y / h.var.y,
        dvar(d.x, h.var.x) * sigmoid(h.pre_var.x),
        dvar(d.y, h.var.y) * sigmoid(h.pre_var.y),
    ]
}

/// One gradient step on `J`; returns the updated network and the loss
/// before the update.
pub fn reinforce_update(net: &Mlp64, episodes: &[EpisodeLog], lr: f64) -> Result<(Mlp64, f64)> {
    let (j, g) = reinforce_objective(net, episodes)?;
    let mut out = net.clone();
    out.apply_sgd(&g, lr)?;
    Ok((out, j))
}

fn default_hidden() -> Vec<usize> {
    vec![]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: usize,
    pub episodes_per_iter: usize,
    pub lr: f64,
    pub seed: u64,
    /// Hidden ReLU layer widths; empty gives a linear policy.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Initial pre-variance bias of the output layer.
    #[serde(default)]
    pub init_pre_var: f64,
    /// Scale applied to the He-initialized output-layer weights.
    #[serde(default = "default_gain")]
    pub output_gain: f64,
}

fn default_gain() -> f64 {
    0.1
}

impl TrainConfig {
    /// Seeded corridor configuration: linear policy, 1000 iterations of
    /// 32 episodes at `lr = 0.05`.
    pub fn corridor(seed: u64) -> Self {
        Self {
            iters: 1000,
            episodes_per_iter: 32,
            lr: 0.05,
            seed,
            hidden: default_hidden(),
            init_pre_var: 0.0,
            output_gain: default_gain(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub mean_return: f64,
    pub mean_final_dist: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub net: Mlp64,
    pub curve: Vec<CurvePoint>,
    /// Episodes of the final iteration.
    pub last_episodes: Vec<EpisodeLog>,
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("iter,mean_return,mean_final_dist\n");
    for c in curve {
        s.push_str(&format!("{},{},{}\n", c.iter, c.mean_return, c.mean_final_dist));
    }
    s
}

/// He-initialized ReLU policy with an identity output layer.
pub fn init_policy(cfg: &TrainConfig, rng: &mut SeededRng) -> Result<Mlp64> {
    let mut dims = vec![FEATURE_DIM];
    dims.extend(&cfg.hidden);
    dims.push(4);
    let mut net = Mlp64::new(&dims, Activation::Relu, Activation::Identity)?;
    net.he_init(rng);
    let last = net.layers_mut().last_mut().expect("non-empty");
    for w in &mut last.weights {
        *w *= cfg.output_gain;
    }
    last.bias[2] = cfg.init_pre_var;
    last.bias[3] = cfg.init_pre_var;
    Ok(net)
}

/// Alternates batches of episodes with REINFORCE updates. Episode `e` of
/// iteration `i` uses `SeededRng::new(seed).derive(1).derive(i).derive(e)`.
pub fn train(env: &RlEnv, p: &AgentProfile, cfg: &TrainConfig) -> Result<TrainResult> {
    if cfg.iters == 0 || cfg.episodes_per_iter == 0 {
        return Err(Error::InvalidConfig("iters and episodes_per_iter must be positive".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid learning rate {}", cfg.lr)));
    }
    env.validate()?;
    p.validate()?;
    let root = SeededRng::new(cfg.seed);
    let mut net = init_policy(cfg, &mut root.derive(0))?;
    let episode_root = root.derive(1);
    let mut curve = Vec::with_capacity(cfg.iters);
    let mut last = vec![];
    for i in 0..cfg.iters {
        let iter_rng = episode_root.derive(i as u64);
        let episodes = (0..cfg.episodes_per_iter)
            .map(|e| run_episode(&net, env, p, &iter_rng.derive(e as u64)))
            .collect::<Result<Vec<_>>>()?;
        let n = episodes.len() as f64;
        curve.push(CurvePoint {
            iter: i + 1,
            mean_return: episodes.iter().map(|e| e.total_return()).sum::<f64>() / n,
            mean_final_dist: episodes.iter().map(|e| e.final_distance(p.goal)).sum::<f64>() / n,
        });
        let (next, _) = reinforce_update(&net, &episodes, cfg.lr)?;
        net = next;
        last = episodes;
    }
    Ok(TrainResult { net, curve, last_episodes: last })
}

/// Obstacle-free straight corridor: start at the origin, goal 15 units
/// along x.
pub fn corridor_task() -> (RlEnv, AgentProfile) {
    let env = RlEnv {
        scene: SceneConfig {
            agents: vec![],
            bounds: crate::interaction::square_bounds(30.0),
            collision_radius: 0.5,
            detection_radius: 3.0,
            max_frames: 2,
            heading_noise_deg: 5.0,
            turn_max_deg: 90.0,
        },
        start: Point2::zero(),
        start_velocity: Point2::zero(),
        goal_radius: 1.0,
        dt: 1.0,
        v_max: 2.0,
        a_max: 0.5,
        collision_penalty: -10.0,
        background_sees_learner: false,
        feature_scale: 10.0,
        max_steps: 40,
    };
    let profile = AgentProfile { af: 1.0, as_: 0.0, ap: 0.0, goal: Point2::new(15.0, 0.0) };
    (env, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{HmmAgentConfig, HmmState, Transition};

    fn state(t: usize, n_ics: usize, position: Point2d) -> AgentState {
        AgentState { position, velocity: Point2::zero(), t, n_ics, neighbors: vec![] }
    }

    /// Identity-layer policy `μ = kp·offset·scale − kd·v` with a tiny variance.
    fn scripted(kp: f64, kd: f64, scale: f64) -> Mlp64 {
        let mut net = Mlp64::new(&[FEATURE_DIM, 4], Activation::Identity, Activation::Identity).unwrap();
        let l = &mut net.layers_mut()[0];
        l.weights[0] = kp * scale;
        l.weights[2] = -kd;
        l.weights[FEATURE_DIM + 1] = kp * scale;
        l.weights[FEATURE_DIM + 3] = -kd;
        l.bias[2] = -1000.0;
        l.bias[3] = -1000.0;
        net
    }

    #[test]
    fn reward_examples() {
        let g = Point2::new(3.0, 4.0);
        let p = AgentProfile { af: 1.0, as_: 0.0, ap: 0.0, goal: g };
        assert_eq!(reward_fn(&state(1, 0, g), &p), 1.0);
        let p = AgentProfile { af: 0.5, as_: 0.25, ap: 0.75, goal: g };
        assert_eq!(reward_fn(&state(2, 1, Point2::new(3.0, 1.0)), &p), 0.03125);
        let p = AgentProfile { af: 0.0, as_: 0.5, ap: 0.5, goal: g };
        assert_eq!(reward_fn(&state(3, 2, Point2::zero()), &p), 0.0);
    }

    #[test]
    fn floor_logprob() {
        let h = policy_head(&[0.0, 0.0, -1000.0, -1000.0]).unwrap();
        assert_eq!(h.var, Point2::new(VAR_FLOOR, VAR_FLOOR));
        let lp = gaussian_logprob(Point2::zero(), h.mu, h.var);
        assert!((lp + (2.0 * PI * VAR_FLOOR).ln()).abs() < 1e-12);
        assert!(policy_head(&[f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn act_is_seeded() {
        let net = scripted(0.1, 0.5, 10.0);
        let s = state(0, 0, Point2::zero());
        let g = Point2::new(5.0, 0.0);
        let a = policy_act(&net, &s, g, 10.0, &mut SeededRng::new(3)).unwrap();
        let b = policy_act(&net, &s, g, 10.0, &mut SeededRng::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scripted_policy_reaches_goal() {
        let (env, p) = corridor_task();
        let ep = run_episode(&scripted(0.1, 0.6, env.feature_scale), &env, &p, &SeededRng::new(1)).unwrap();
        assert_eq!(ep.terminal, Terminal::Goal);
        assert!(ep.final_distance(p.goal) < env.goal_radius);
        assert_eq!(ep.recompute_rewards(&p), ep.rewards);
    }

    #[test]
    fn forced_collision_at_first_step() {
        let (mut env, p) = corridor_task();
        env.scene.agents.push(HmmAgentConfig {
            start: Point2::new(0.8, 0.0),
            goal: Point2::new(20.0, 20.0),
            base_speed: 1.0,
            transition: Transition::forced(HmmState::Wait),
        });
        let mut toward = scripted(0.0, 0.0, 1.0);
        toward.layers_mut()[0].bias[0] = 1.0;
        let ep = rollout(&toward, &env, &p);
        assert_eq!(ep.terminal, Terminal::Collision);
        assert_eq!(ep.len(), 1);
        assert_eq!(ep.rewards[0], reward_fn(&ep.states[0], &p) + env.collision_penalty);
        assert_eq!(ep.recompute_rewards(&p), ep.rewards);
    }

    fn rollout(net: &Mlp64, env: &RlEnv, p: &AgentProfile) -> EpisodeLog {
        run_episode(net, env, p, &SeededRng::new(0)).unwrap()
    }

    #[test]
    fn zero_rewards_zero_update() {
        let (env, mut p) = corridor_task();
        p.af = 0.0;
        let cfg = TrainConfig { iters: 3, episodes_per_iter: 2, ..TrainConfig::corridor(5) };
        let net = init_policy(&cfg, &mut SeededRng::new(5).derive(0)).unwrap();
        let res = train(&env, &p, &cfg).unwrap();
        assert!(res.curve.iter().all(|c| c.mean_return == 0.0));
        assert_eq!(res.net, net);
    }

    #[test]
    fn start_inside_collision_radius_rejected() {
        let (mut env, p) = corridor_task();
        env.scene.agents.push(HmmAgentConfig {
            start: Point2::new(0.2, 0.0),
            goal: Point2::new(20.0, 20.0),
            base_speed: 1.0,
            transition: Transition::default(),
        });
        assert!(run_episode(&scripted(0.1, 0.6, 10.0), &env, &p, &SeededRng::new(0)).is_err());
        assert!(reinforce_update(&scripted(0.1, 0.6, 10.0), &[], 0.1).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (env, p) = corridor_task();
        let cfg = TrainConfig { iters: 5, episodes_per_iter: 4, ..TrainConfig::corridor(9) };
        let a = train(&env, &p, &cfg).unwrap();
        let b = train(&env, &p, &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.net, b.net);
        assert!(curve_csv(&a.curve).starts_with("iter,mean_return,mean_final_dist\n1,"));
    }
}
