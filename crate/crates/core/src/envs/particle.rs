//! Particle worlds with per-agent health.
//!
//! Agents are unit-mass point particles with double-integrator kinematics and
//! velocity damping. A terminated agent executes only the zero action, is
//! frozen where it died and stays visible to the others.
//!
//! Non-health state layout for `n` agents and `L` landmarks (terminals in the
//! communication scenario):
//!
//! | range                     | content                 |
//! |---------------------------|-------------------------|
//! | `0 .. 2n`                 | agent positions         |
//! | `2n .. 4n`                | agent velocities        |
//! | `4n .. 4n + 2L`           | landmark positions      |
//! | `4n + 2L .. 4n + 2L + 2`  | hazard position         |
//! | `4n + 2L + 2`             | hazard-revealed flag    |

use std::collections::VecDeque;

use ndarray::Array2;
use rand::Rng;

use super::{Environment, Scenario, StepOutcome};
use crate::error::{argument, config, Error, Result};
use crate::health::{constrict_action, constrict_observation, HealthVector, JointAction, JointObservation, JointState};
use crate::rng::SimRng;

/// Fixed terminal positions of the communication scenario.
pub const TERMINALS: [[f64; 2]; 2] = [[-1.0, 0.0], [1.0, 0.0]];

const ACTION_DIM: usize = 2;
const REACH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleWorldConfig {
    pub scenario: Scenario,
    pub n_agents: usize,
    pub world_halfwidth: f64,
    pub dt: f64,
    /// Fraction of velocity removed each step, in `[0, 1)`.
    pub damping: f64,
    /// Acceleration produced by a unit action component.
    pub max_force: f64,
    /// Landmarks in the navigation scenarios; ignored for communication.
    pub landmark_count: usize,
    pub hazard_enabled: bool,
    pub hazard_radius: f64,
    /// Per-step termination probability inside the hazard radius.
    pub p_fail: f64,
    /// Communication range; `None` uses `2 * separation / (n + 1)`.
    pub comm_radius: Option<f64>,
    /// Episode length `t_f`.
    pub episode_length: usize,
}

impl ParticleWorldConfig {
    pub fn for_scenario(scenario: Scenario, n_agents: usize) -> Self {
        let hazard_enabled = !matches!(scenario, Scenario::CoopNav);
        Self {
            scenario,
            n_agents,
            world_halfwidth: 1.0,
            dt: 0.1,
            damping: 0.25,
            max_force: 5.0,
            landmark_count: n_agents,
            hazard_enabled,
            hazard_radius: 0.25,
            p_fail: if hazard_enabled { 0.3 } else { 0.0 },
            comm_radius: None,
            episode_length: 50,
        }
    }

    pub fn effective_comm_radius(&self) -> f64 {
        let separation = TERMINALS[1][0] - TERMINALS[0][0];
        self.comm_radius
            .unwrap_or(2.0 * separation / (self.n_agents as f64 + 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config(msg.to_string())) };
        check(self.scenario.is_particle(), "scenario is not a particle world")?;
        check(self.n_agents >= 1, "n_agents must be at least 1")?;
        check(self.world_halfwidth > 0.0, "world_halfwidth must be positive")?;
        check(self.dt > 0.0, "dt must be positive")?;
        check((0.0..1.0).contains(&self.damping), "damping must lie in [0, 1)")?;
        check(self.max_force >= 0.0, "max_force must be nonnegative")?;
        check(self.hazard_radius >= 0.0, "hazard_radius must be nonnegative")?;
        check((0.0..=1.0).contains(&self.p_fail), "p_fail must lie in [0, 1]")?;
        check(self.episode_length >= 1, "episode_length must be at least 1")?;
        check(self.effective_comm_radius() >= 0.0, "comm_radius must be nonnegative")?;
        if self.scenario != Scenario::HazardousComm {
            check(self.landmark_count >= 1, "landmark_count must be at least 1")?;
        } else {
            check(self.hazard_radius < 1.0, "hazard_radius must be below half the terminal separation")?;
        }
        Ok(())
    }
}

/// Index arithmetic over the flat non-health vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    landmarks: usize,
}

impl Layout {
    fn pos(self, i: usize) -> usize {
        2 * i
    }
    fn vel(self, i: usize) -> usize {
        2 * self.n + 2 * i
    }
    fn landmark(self, k: usize) -> usize {
        4 * self.n + 2 * k
    }
    fn hazard(self) -> usize {
        4 * self.n + 2 * self.landmarks
    }
    fn revealed(self) -> usize {
        self.hazard() + 2
    }
    fn len(self) -> usize {
        self.revealed() + 1
    }
}

fn xy(v: &[f64], at: usize) -> [f64; 2] {
    [v[at], v[at + 1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone)]
pub struct ParticleEnv {
    cfg: ParticleWorldConfig,
    layout: Layout,
    name: String,
    mask: [usize; 3],
}

impl ParticleEnv {
    pub fn new(cfg: ParticleWorldConfig) -> Result<Self> {
        cfg.validate()?;
        let landmarks = match cfg.scenario {
            Scenario::HazardousComm => TERMINALS.len(),
            _ => cfg.landmark_count,
        };
        Ok(Self {
            layout: Layout { n: cfg.n_agents, landmarks },
            name: cfg.scenario.as_str().to_string(),
            // own velocity (2) and own health
            mask: [0, 1, 4],
            cfg,
        })
    }

    pub fn config(&self) -> &ParticleWorldConfig {
        &self.cfg
    }

    pub fn landmark_count(&self) -> usize {
        self.layout.landmarks
    }

    pub fn nonhealth_len(&self) -> usize {
        self.layout.len()
    }

    /// Assembles a state from its parts; used by tests and tools.
    pub fn compose_state(
        &self,
        positions: &[[f64; 2]],
        velocities: &[[f64; 2]],
        landmarks: &[[f64; 2]],
        hazard: [f64; 2],
        revealed: bool,
        health: Vec<f64>,
        time: usize,
    ) -> Result<JointState> {
        let l = self.layout;
        if positions.len() != l.n || velocities.len() != l.n || health.len() != l.n {
            return Err(argument("per-agent arrays must have n_agents entries"));
        }
        if landmarks.len() != l.landmarks {
            return Err(argument(format!("expected {} landmarks", l.landmarks)));
        }
        let mut p = vec![0.0; l.len()];
        for i in 0..l.n {
            p[l.pos(i)..l.pos(i) + 2].copy_from_slice(&positions[i]);
            p[l.vel(i)..l.vel(i) + 2].copy_from_slice(&velocities[i]);
        }
        for (k, lm) in landmarks.iter().enumerate() {
            p[l.landmark(k)..l.landmark(k) + 2].copy_from_slice(lm);
        }
        p[l.hazard()..l.hazard() + 2].copy_from_slice(&hazard);
        p[l.revealed()] = if revealed { 1.0 } else { 0.0 };
        Ok(JointState { health: HealthVector::new(health)?, nonhealth: p, time })
    }

    pub fn position(&self, s: &JointState, i: usize) -> [f64; 2] {
        xy(&s.nonhealth, self.layout.pos(i))
    }

    pub fn velocity(&self, s: &JointState, i: usize) -> [f64; 2] {
        xy(&s.nonhealth, self.layout.vel(i))
    }

    pub fn landmark(&self, s: &JointState, k: usize) -> [f64; 2] {
        xy(&s.nonhealth, self.layout.landmark(k))
    }

    pub fn hazard(&self, s: &JointState) -> [f64; 2] {
        xy(&s.nonhealth, self.layout.hazard())
    }

    pub fn is_revealed(&self, s: &JointState) -> bool {
        s.nonhealth[self.layout.revealed()] > 0.0
    }

    fn in_hazard(&self, s: &JointState, i: usize) -> bool {
        self.cfg.hazard_enabled && dist(self.position(s, i), self.hazard(s)) <= self.cfg.hazard_radius
    }

    /// Terminates each live agent inside the hazard radius independently with
    /// probability `p_fail`.
    pub fn hazard_termination(&self, s: &JointState, rng: &mut SimRng) -> HealthVector {
        let mut health = s.health.clone();
        if !self.cfg.hazard_enabled {
            return health;
        }
        for i in 0..self.layout.n {
            if health.get(i) > 0.0 && self.in_hazard(s, i) && rng.random::<f64>() < self.cfg.p_fail {
                health.set(i, 0.0).expect("index and value in range");
            }
        }
        health
    }

    /// Negative sum over landmarks of the distance to the nearest live agent.
    /// With no live agent, each landmark costs the world diagonal.
    pub fn navigation_reward(&self, s: &JointState) -> f64 {
        let diagonal = 2.0 * std::f64::consts::SQRT_2 * self.cfg.world_halfwidth;
        (0..self.layout.landmarks)
            .map(|k| {
                let lm = self.landmark(s, k);
                let nearest = (0..self.layout.n)
                    .filter(|&i| s.health.get(i) > 0.0)
                    .map(|i| dist(lm, self.position(s, i)))
                    .fold(f64::INFINITY, f64::min);
                if nearest.is_finite() { -nearest } else { -diagonal }
            })
            .sum()
    }

    /// 1 if the terminals are linked through live relays within
    /// communication range, else 0.
    pub fn communication_reward(&self, s: &JointState) -> f64 {
        let radius = self.cfg.effective_comm_radius();
        // vertex 0 and 1 are the terminals
        let mut vertices = vec![self.landmark(s, 0), self.landmark(s, 1)];
        vertices.extend(
            (0..self.layout.n)
                .filter(|&i| s.health.get(i) > 0.0)
                .map(|i| self.position(s, i)),
        );
        let mut seen = vec![false; vertices.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            if v == 1 {
                return 1.0;
            }
            for (u, p) in vertices.iter().enumerate() {
                if !seen[u] && dist(vertices[v], *p) <= radius {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        0.0
    }

    pub fn reward(&self, s: &JointState) -> f64 {
        match self.cfg.scenario {
            Scenario::HazardousComm => self.communication_reward(s),
            _ => self.navigation_reward(s),
        }
    }

    fn live_observation(&self, s: &JointState, i: usize, out: &mut [f64]) {
        let me = self.position(s, i);
        let v = self.velocity(s, i);
        out[..5].copy_from_slice(&[v[0], v[1], me[0], me[1], s.health.get(i)]);
        let mut k = 5;
        for lm in 0..self.layout.landmarks {
            let p = self.landmark(s, lm);
            out[k] = p[0] - me[0];
            out[k + 1] = p[1] - me[1];
            k += 2;
        }
        for j in (0..self.layout.n).filter(|&j| j != i) {
            let p = self.position(s, j);
            out[k] = p[0] - me[0];
            out[k + 1] = p[1] - me[1];
            out[k + 2] = s.health.get(j);
            k += 3;
        }
        if self.is_revealed(s) {
            let hz = self.hazard(s);
            out[k] = hz[0] - me[0];
            out[k + 1] = hz[1] - me[1];
            out[k + 2] = 1.0;
        } else {
            out[k..k + 3].fill(0.0);
        }
    }

    fn observe(&self, s: &JointState, prev: Option<&JointObservation>) -> JointObservation {
        let mut obs = Array2::zeros((self.layout.n, self.obs_dim()));
        for (i, mut row) in obs.rows_mut().into_iter().enumerate() {
            let out = row.as_slice_mut().expect("standard layout");
            match prev {
                Some(prev) if s.health.is_dead(i) => {
                    let last = prev.agent(i).to_vec();
                    out.copy_from_slice(&constrict_observation(&last, &self.mask));
                }
                _ => {
                    self.live_observation(s, i, out);
                    if s.health.is_dead(i) {
                        for &m in &self.mask {
                            out[m] = 0.0;
                        }
                    }
                }
            }
        }
        JointObservation::from_array(obs)
    }

    fn any_in_hazard(&self, s: &JointState) -> bool {
        (0..self.layout.n).any(|i| self.in_hazard(s, i))
    }
}

impl Environment for ParticleEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_agents(&self) -> usize {
        self.layout.n
    }

    fn obs_dim(&self) -> usize {
        5 + 2 * self.layout.landmarks + 3 * (self.layout.n - 1) + 3
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn horizon(&self) -> usize {
        self.cfg.episode_length
    }

    fn critic_dim(&self) -> usize {
        self.layout.n + self.layout.len() + 1
    }

    fn critic_features(&self, state: &JointState, out: &mut [f64]) {
        let n = self.layout.n;
        out[..n].copy_from_slice(state.health.as_slice());
        out[n..n + self.layout.len()].copy_from_slice(&state.nonhealth);
        out[n + self.layout.len()] = state.time as f64 / self.cfg.episode_length as f64;
    }

    fn dead_observation_mask(&self) -> &[usize] {
        &self.mask
    }

    fn reset(&self, rng: &mut SimRng) -> Result<(JointState, JointObservation)> {
        let w = self.cfg.world_halfwidth;
        let uniform_point = |rng: &mut SimRng| [rng.random_range(-w..w), rng.random_range(-w..w)];
        let positions: Vec<_> = (0..self.layout.n).map(|_| uniform_point(rng)).collect();
        let velocities = vec![[0.0; 2]; self.layout.n];
        let (landmarks, hazard) = match self.cfg.scenario {
            Scenario::HazardousComm => {
                let r = self.cfg.hazard_radius;
                let x = rng.random_range((TERMINALS[0][0] + r)..(TERMINALS[1][0] - r));
                let y = if r > 0.0 { rng.random_range(-r..r) } else { 0.0 };
                (TERMINALS.to_vec(), [x, y])
            }
            _ => {
                let lms: Vec<_> = (0..self.layout.landmarks).map(|_| uniform_point(rng)).collect();
                let hazard = if self.cfg.hazard_enabled {
                    lms[rng.random_range(0..lms.len())]
                } else {
                    [0.0, 0.0]
                };
                (lms, hazard)
            }
        };
        let mut state = self.compose_state(
            &positions,
            &velocities,
            &landmarks,
            hazard,
            false,
            vec![1.0; self.layout.n],
            0,
        )?;
        if self.any_in_hazard(&state) {
            state.nonhealth[self.layout.revealed()] = 1.0;
        }
        let obs = self.observe(&state, None);
        Ok((state, obs))
    }

    fn step(
        &self,
        state: &JointState,
        prev_obs: &JointObservation,
        sampled: &JointAction,
        rng: &mut SimRng,
    ) -> Result<StepOutcome> {
        let l = self.layout;
        if state.time >= self.cfg.episode_length {
            return Err(Error::State(format!(
                "episode finished at t = {}; reset before stepping",
                state.time
            )));
        }
        if sampled.n_agents() != l.n || sampled.dim() != ACTION_DIM {
            return Err(argument("joint action shape does not match the environment"));
        }
        if prev_obs.n_agents() != l.n || prev_obs.dim() != self.obs_dim() {
            return Err(argument("observation shape does not match the environment"));
        }

        let bound = self.action_bound();
        let mut executed = JointAction::zeros(l.n, ACTION_DIM);
        let mut next = state.clone();
        next.time += 1;
        let (dt, keep) = (self.cfg.dt, 1.0 - self.cfg.damping);
        for i in 0..l.n {
            let clamped: Vec<f64> = sampled.agent(i).iter().map(|a| a.clamp(-bound, bound)).collect();
            let act = constrict_action(&clamped, state.health.get(i));
            executed.agent_mut(i).assign(&ndarray::ArrayView1::from(&act));
            let (pi, vi) = (l.pos(i), l.vel(i));
            if state.health.is_dead(i) {
                next.nonhealth[vi] = 0.0;
                next.nonhealth[vi + 1] = 0.0;
                continue;
            }
            for d in 0..2 {
                let v = state.nonhealth[vi + d] * keep + act[d] * self.cfg.max_force * dt;
                next.nonhealth[vi + d] = v;
                next.nonhealth[pi + d] = state.nonhealth[pi + d] + v * dt;
            }
        }

        next.health = self.hazard_termination(&next, rng);
        for i in 0..l.n {
            if next.health.is_dead(i) {
                next.nonhealth[l.vel(i)] = 0.0;
                next.nonhealth[l.vel(i) + 1] = 0.0;
            }
        }
        if self.any_in_hazard(&next) {
            next.nonhealth[l.revealed()] = 1.0;
        }

        let reward = self.reward(&next);
        let observations = self.observe(&next, Some(prev_obs));
        let done = next.time == self.cfg.episode_length;
        Ok(StepOutcome { state: next, observations, executed, reward, done })
    }

    fn reachable(&self, from: &JointState, to: &JointState) -> bool {
        let l = self.layout;
        if to.time != from.time + 1 || to.nonhealth.len() != l.len() || from.nonhealth.len() != l.len() {
            return false;
        }
        let statics = l.landmark(0)..l.revealed();
        if to.nonhealth[statics.clone()] != from.nonhealth[statics] {
            return false;
        }
        let (dt, keep) = (self.cfg.dt, 1.0 - self.cfg.damping);
        let max_dv = self.action_bound() * self.cfg.max_force * dt;
        for i in 0..l.n {
            let (p0, v0) = (self.position(from, i), self.velocity(from, i));
            let (p1, v1) = (self.position(to, i), self.velocity(to, i));
            if from.health.is_dead(i) {
                if p1 != p0 || v1 != [0.0, 0.0] {
                    return false;
                }
                continue;
            }
            for d in 0..2 {
                // the velocity actually applied during the move
                let applied = if to.health.is_dead(i) {
                    if v1[d] != 0.0 {
                        return false;
                    }
                    (p1[d] - p0[d]) / dt
                } else {
                    let moved = p0[d] + v1[d] * dt;
                    if (p1[d] - moved).abs() > REACH_TOL * (1.0 + moved.abs()) {
                        return false;
                    }
                    v1[d]
                };
                if (applied - v0[d] * keep).abs() > max_dv + REACH_TOL {
                    return false;
                }
            }
        }
        let revealed = self.is_revealed(from) || self.any_in_hazard(to);
        revealed == self.is_revealed(to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn nav(n: usize) -> ParticleEnv {
        ParticleEnv::new(ParticleWorldConfig::for_scenario(Scenario::HazardousNav, n)).unwrap()
    }

    fn comm(n: usize, radius: f64) -> ParticleEnv {
        let mut cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousComm, n);
        cfg.comm_radius = Some(radius);
        ParticleEnv::new(cfg).unwrap()
    }

    fn two_landmark_nav() -> ParticleEnv {
        let mut cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 2);
        cfg.landmark_count = 2;
        ParticleEnv::new(cfg).unwrap()
    }

    fn nav_state(env: &ParticleEnv, agents: &[[f64; 2]], health: Vec<f64>) -> JointState {
        env.compose_state(
            agents,
            &vec![[0.0; 2]; agents.len()],
            &[[0.0, 0.0], [1.0, 0.0]],
            [5.0, 5.0],
            false,
            health,
            0,
        )
        .unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let env = nav(4);
        let a = env.reset(&mut stream(3, &[1])).unwrap();
        let b = env.reset(&mut stream(3, &[1])).unwrap();
        assert_eq!(a.0.to_bytes(), b.0.to_bytes());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn navigation_reset_matches_agent_and_landmark_counts() {
        let env = nav(4);
        let (s, obs) = env.reset(&mut stream(0, &[])).unwrap();
        assert_eq!(env.landmark_count(), 4);
        assert_eq!(s.health.alive_count(), 4);
        assert_eq!(obs.n_agents(), 4);
        assert_eq!(obs.dim(), env.obs_dim());
        let hz = env.hazard(&s);
        assert!((0..4).any(|k| env.landmark(&s, k) == hz), "hazard sits on a landmark");
    }

    #[test]
    fn communication_reset_places_hazard_between_terminals() {
        let env = comm(3, 0.6);
        for seed in 0..1000 {
            let (s, _) = env.reset(&mut stream(seed, &[])).unwrap();
            assert_eq!(env.landmark(&s, 0), [-1.0, 0.0]);
            assert_eq!(env.landmark(&s, 1), [1.0, 0.0]);
            let hz = env.hazard(&s);
            assert!(hz[0] > -1.0 && hz[0] < 1.0, "hazard x = {}", hz[0]);
        }
    }

    #[test]
    fn hidden_hazard_is_not_observed() {
        let env = nav(2);
        let l = env.layout;
        let s = env
            .compose_state(
                &[[-0.9, -0.9], [0.9, 0.9]],
                &[[0.0; 2]; 2],
                &[[0.0, 0.0], [0.5, 0.5]],
                [0.5, 0.5],
                false,
                vec![1.0, 1.0],
                0,
            )
            .unwrap();
        let obs = env.observe(&s, None);
        let tail = &obs.agent(0).to_vec()[env.obs_dim() - 3..];
        assert_eq!(tail, &[0.0, 0.0, 0.0]);
        assert_eq!(s.nonhealth[l.revealed()], 0.0);
    }

    #[test]
    fn zero_action_moves_only_by_damped_velocity() {
        let env = nav(2);
        let mut s = env.reset(&mut stream(9, &[])).unwrap().0;
        s.nonhealth[env.layout.vel(0)] = 0.4;
        s.nonhealth[env.layout.vel(0) + 1] = -0.2;
        let obs = env.observe(&s, None);
        let mut rng = stream(1, &[]);
        let out = env.step(&s, &obs, &JointAction::zeros(2, 2), &mut rng).unwrap();
        let v = [0.4 * 0.75, -0.2 * 0.75];
        let p0 = env.position(&s, 0);
        if out.state.health.get(0) > 0.0 {
            assert_eq!(env.velocity(&out.state, 0), v);
        }
        assert_eq!(env.position(&out.state, 0), [p0[0] + v[0] * 0.1, p0[1] + v[1] * 0.1]);
        assert_eq!(env.position(&out.state, 1), env.position(&s, 1));
    }

    #[test]
    fn dead_agent_is_frozen_whatever_it_proposes() {
        let env = nav(2);
        let mut s = env.reset(&mut stream(2, &[])).unwrap().0;
        s.health.set(1, 0.0).unwrap();
        let obs = env.observe(&s, None);
        let a = JointAction::from_rows(&[vec![0.5, 0.5], vec![0.9, -0.9]]).unwrap();
        let out = env.step(&s, &obs, &a, &mut stream(0, &[])).unwrap();
        assert_eq!(env.position(&out.state, 1), env.position(&s, 1));
        assert_eq!(out.executed.agent(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(out.executed.agent(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(out.state.health.get(1), 0.0);
    }

    #[test]
    fn actions_are_clamped_before_execution() {
        let env = nav(1);
        let (s, obs) = env.reset(&mut stream(4, &[])).unwrap();
        let a = JointAction::from_rows(&[vec![3.0, -7.0]]).unwrap();
        let out = env.step(&s, &obs, &a, &mut stream(0, &[])).unwrap();
        assert_eq!(out.executed.agent(0).to_vec(), vec![1.0, -1.0]);
    }

    #[test]
    fn full_episode_has_fifty_rewards_and_rejects_extra_steps() {
        let env = nav(3);
        let mut rng = stream(5, &[]);
        let (mut s, mut obs) = env.reset(&mut rng).unwrap();
        let mut rewards = Vec::new();
        loop {
            let out = env.step(&s, &obs, &JointAction::zeros(3, 2), &mut rng).unwrap();
            rewards.push(out.reward);
            s = out.state;
            obs = out.observations;
            if out.done {
                break;
            }
        }
        assert_eq!(rewards.len(), 50);
        assert!(matches!(env.step(&s, &obs, &JointAction::zeros(3, 2), &mut rng), Err(Error::State(_))));
    }

    #[test]
    fn hazard_termination_examples() {
        let env = nav(1);
        let inside = env
            .compose_state(&[[0.1, 0.0]], &[[0.0; 2]], &[[0.0, 0.0]], [0.0, 0.0], false, vec![1.0], 0)
            .unwrap();
        let outside = env
            .compose_state(&[[0.9, 0.0]], &[[0.0; 2]], &[[0.0, 0.0]], [0.0, 0.0], false, vec![1.0], 0)
            .unwrap();
        let mut rng = stream(11, &[]);
        for _ in 0..100 {
            assert_eq!(env.hazard_termination(&outside, &mut rng).get(0), 1.0);
        }

        let mut cfg = env.config().clone();
        cfg.p_fail = 1.0;
        let certain = ParticleEnv::new(cfg).unwrap();
        assert_eq!(certain.hazard_termination(&inside, &mut rng).get(0), 0.0);

        let trials = 10_000;
        let killed = (0..trials)
            .filter(|_| env.hazard_termination(&inside, &mut rng).is_dead(0))
            .count();
        let rate = killed as f64 / trials as f64;
        assert!((rate - 0.3).abs() < 0.02, "empirical termination rate {rate}");
    }

    #[test]
    fn hazard_is_revealed_after_first_entry() {
        let mut cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 1);
        cfg.p_fail = 0.0;
        let env = ParticleEnv::new(cfg).unwrap();
        let s = env
            .compose_state(&[[-0.3, 0.0]], &[[0.0; 2]], &[[0.0, 0.0]], [0.0, 0.0], false, vec![1.0], 0)
            .unwrap();
        let mut obs = env.observe(&s, None);
        let mut state = s;
        let mut rng = stream(0, &[]);
        let push = JointAction::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let mut seen = false;
        for _ in 0..10 {
            let out = env.step(&state, &obs, &push, &mut rng).unwrap();
            state = out.state;
            obs = out.observations;
            seen |= env.position(&state, 0)[0].abs() <= 0.25;
            assert_eq!(env.is_revealed(&state), seen);
        }
        assert!(seen);
        assert_eq!(obs.agent(0)[env.obs_dim() - 1], 1.0);
    }

    #[test]
    fn navigation_reward_examples() {
        let env = two_landmark_nav();
        let on = nav_state(&env, &[[0.0, 0.0], [1.0, 0.0]], vec![1.0, 1.0]);
        assert_eq!(env.navigation_reward(&on), 0.0);
        let stacked = nav_state(&env, &[[0.0, 0.0], [0.0, 0.0]], vec![1.0, 1.0]);
        assert_eq!(env.navigation_reward(&stacked), -1.0);
        let one_dead = nav_state(&env, &[[0.0, 0.0], [1.0, 0.0]], vec![0.0, 1.0]);
        assert_eq!(env.navigation_reward(&one_dead), -1.0);
    }

    #[test]
    fn communication_reward_examples() {
        let env = comm(3, 0.6);
        let chain = |health: Vec<f64>| {
            env.compose_state(
                &[[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]],
                &[[0.0; 2]; 3],
                &TERMINALS,
                [0.0, 0.5],
                false,
                health,
                0,
            )
            .unwrap()
        };
        assert_eq!(env.communication_reward(&chain(vec![1.0; 3])), 1.0);
        assert_eq!(env.communication_reward(&chain(vec![1.0, 0.0, 1.0])), 0.0);
        let empty = comm(3, 0.6);
        let all_dead = chain(vec![0.0; 3]);
        assert_eq!(empty.communication_reward(&all_dead), 0.0);
    }

    #[test]
    fn default_comm_radius_admits_a_full_chain() {
        let cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousComm, 3);
        assert!((cfg.effective_comm_radius() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coop_nav_never_kills() {
        let env = ParticleEnv::new(ParticleWorldConfig::for_scenario(Scenario::CoopNav, 3)).unwrap();
        let mut rng = stream(21, &[]);
        for _ in 0..20 {
            let (mut s, mut obs) = env.reset(&mut rng).unwrap();
            loop {
                let rows: Vec<Vec<f64>> = (0..3)
                    .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect();
                let out = env.step(&s, &obs, &JointAction::from_rows(&rows).unwrap(), &mut rng).unwrap();
                assert_eq!(out.state.health.alive_count(), 3);
                assert!(!env.is_revealed(&out.state));
                s = out.state;
                obs = out.observations;
                if out.done {
                    break;
                }
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 3);
        for broken in [
            ParticleWorldConfig { p_fail: 1.5, ..base.clone() },
            ParticleWorldConfig { hazard_radius: -0.1, ..base.clone() },
            ParticleWorldConfig { episode_length: 0, ..base.clone() },
            ParticleWorldConfig { n_agents: 0, ..base.clone() },
            ParticleWorldConfig { damping: 1.0, ..base.clone() },
        ] {
            assert!(matches!(ParticleEnv::new(broken), Err(Error::Config(_))));
        }
    }

    proptest! {
        #[test]
        fn navigation_reward_is_translation_invariant(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
            alive in prop::collection::vec(any::<bool>(), 3),
            shift in (-5.0f64..5.0, -5.0f64..5.0),
        ) {
            let mut cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 3);
            cfg.landmark_count = 2;
            let env = ParticleEnv::new(cfg).unwrap();
            let health: Vec<f64> = alive.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            let build = |dx: f64, dy: f64| {
                let p: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x + dx, y + dy]).collect();
                env.compose_state(&p[..3], &[[0.0; 2]; 3], &p[3..], [0.0, 0.0], false, health.clone(), 0).unwrap()
            };
            let a = env.navigation_reward(&build(0.0, 0.0));
            let b = env.navigation_reward(&build(shift.0, shift.1));
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn communication_reward_is_monotone_in_radius(
            pts in prop::collection::vec((-1.2f64..1.2, -0.6f64..0.6), 4),
            alive in prop::collection::vec(any::<bool>(), 4),
            r in 0.05f64..1.5,
            extra in 0.0f64..1.0,
        ) {
            let health: Vec<f64> = alive.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            let p: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let small = comm(4, r);
            let large = comm(4, r + extra);
            let s = small.compose_state(&p, &[[0.0; 2]; 4], &TERMINALS, [0.0, 0.0], false, health, 0).unwrap();
            prop_assert!(large.communication_reward(&s) >= small.communication_reward(&s));
        }
    }
}
