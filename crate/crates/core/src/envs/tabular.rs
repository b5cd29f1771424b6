//! Small tabular Dec-POMDPs with health labels, enumerable exactly.
//!
//! Joint actions are encoded as base-`n_actions` integers with agent 0 in
//! the least significant digit. Agents act on a deterministic local
//! observation of the current state through a softmax table policy.

use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::rng::SimRng;

/// Default cap on the enumeration tree size.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDecPomdp {
    pub n_agents: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub n_obs: usize,
    pub horizon: usize,
    /// `initial[s]`
    pub initial: Vec<f64>,
    /// `transition[(s * n_joint + u) * n_states + s']`
    pub transition: Vec<f64>,
    /// `reward[s * n_joint + u]`
    pub reward: Vec<f64>,
    /// `observation[i * n_states + s]`
    pub observation: Vec<usize>,
    /// `health[s * n_agents + i]`
    pub health: Vec<f64>,
    /// `counterfactual[i * n_states + s]`: the state with agent `i` at
    /// minimum health and everything else unchanged.
    pub counterfactual: Vec<usize>,
    /// Terminated agents can only execute action 0.
    pub dead_actions_singleton: bool,
}

/// Parameters of the random model family.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomModelSpec {
    pub n_agents: usize,
    pub env_states: usize,
    pub n_actions: usize,
    pub n_obs: usize,
    pub horizon: usize,
    pub max_death_prob: f64,
    pub dead_actions_singleton: bool,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        Self {
            n_agents: 2,
            env_states: 3,
            n_actions: 2,
            n_obs: 2,
            horizon: 3,
            max_death_prob: 0.5,
            dead_actions_singleton: true,
        }
    }
}

impl TabularDecPomdp {
    pub fn n_joint(&self) -> usize {
        self.n_actions.pow(self.n_agents as u32)
    }

    pub fn decode(&self, u: usize) -> Vec<usize> {
        let mut rest = u;
        (0..self.n_agents)
            .map(|_| {
                let a = rest % self.n_actions;
                rest /= self.n_actions;
                a
            })
            .collect()
    }

    pub fn action_of(&self, u: usize, agent: usize) -> usize {
        (u / self.n_actions.pow(agent as u32)) % self.n_actions
    }

    pub fn t(&self, s: usize, u: usize, next: usize) -> f64 {
        self.transition[(s * self.n_joint() + u) * self.n_states + next]
    }

    pub fn r(&self, s: usize, u: usize) -> f64 {
        self.reward[s * self.n_joint() + u]
    }

    pub fn health(&self, s: usize, agent: usize) -> f64 {
        self.health[s * self.n_agents + agent]
    }

    pub fn is_dead(&self, s: usize, agent: usize) -> bool {
        self.health(s, agent) == 0.0
    }

    pub fn obs(&self, agent: usize, s: usize) -> usize {
        self.observation[agent * self.n_states + s]
    }

    pub fn counterfactual_state(&self, agent: usize, s: usize) -> usize {
        self.counterfactual[agent * self.n_states + s]
    }

    pub fn n_params(&self) -> usize {
        self.n_agents * self.n_obs * self.n_actions
    }

    /// Upper bound on the number of enumerated trajectories.
    pub fn branching_bound(&self) -> f64 {
        self.n_states as f64 * ((self.n_joint() * self.n_states) as f64).powi(self.horizon as i32)
    }

    /// Checks table shapes, normalisation and the structural health rules.
    pub fn validate(&self) -> Result<()> {
        let (ns, nj, n) = (self.n_states, self.n_joint(), self.n_agents);
        let shape = |ok: bool, what: &str| if ok { Ok(()) } else { Err(argument(format!("bad {what} table"))) };
        shape(n >= 1 && ns >= 1 && self.n_actions >= 1 && self.n_obs >= 1, "dimension")?;
        shape(self.initial.len() == ns, "initial")?;
        shape(self.transition.len() == ns * nj * ns, "transition")?;
        shape(self.reward.len() == ns * nj, "reward")?;
        shape(self.observation.len() == n * ns && self.observation.iter().all(|&z| z < self.n_obs), "observation")?;
        shape(self.health.len() == ns * n && self.health.iter().all(|h| (0.0..=1.0).contains(h)), "health")?;
        shape(self.counterfactual.len() == n * ns && self.counterfactual.iter().all(|&c| c < ns), "counterfactual")?;

        let norm = |row: &[f64]| row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= ROW_TOL;
        if !norm(&self.initial) {
            return Err(argument("initial distribution does not sum to 1"));
        }
        for s in 0..ns {
            for u in 0..nj {
                let row = &self.transition[(s * nj + u) * ns..(s * nj + u + 1) * ns];
                if !norm(row) {
                    return Err(argument(format!("transition row (s={s}, u={u}) does not sum to 1")));
                }
                for (next, &p) in row.iter().enumerate() {
                    if let Some(i) = (0..n).find(|&i| self.is_dead(s, i) && !self.is_dead(next, i)) {
                        if p > 0.0 {
                            return Err(argument(format!(
                                "agent {i} revives on s={s} -> s'={next} under u={u}"
                            )));
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for s in 0..ns {
                let c = self.counterfactual_state(i, s);
                let others_equal = (0..n).filter(|&j| j != i).all(|j| self.health(c, j) == self.health(s, j));
                if !self.is_dead(c, i) || !others_equal {
                    return Err(argument(format!("counterfactual of agent {i} in s={s} is not s with h_i = 0")));
                }
            }
        }
        Ok(())
    }

    /// Random model over `env_states × {alive, dead}^n` states with binary
    /// health. Every agent starts alive; a live agent dies with a probability
    /// that depends on the environment state and its own action.
    pub fn random(spec: &RandomModelSpec, rng: &mut SimRng) -> Self {
        let n = spec.n_agents;
        let masks = 1usize << n;
        let ns = spec.env_states * masks;
        let nj = spec.n_actions.pow(n as u32);
        let alive = |s: usize, i: usize| (s % masks) >> i & 1 == 1;

        let mut env_t = vec![0.0; spec.env_states * nj * spec.env_states];
        for row in env_t.chunks_mut(spec.env_states) {
            // Occasional exact zeros keep some branches pruned.
            row.iter_mut()
                .for_each(|p| *p = if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() });
            if row.iter().all(|&p| p == 0.0) {
                row[rng.random_range(0..row.len())] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        let death: Vec<f64> = (0..spec.env_states * n * spec.n_actions)
            .map(|_| rng.random::<f64>() * spec.max_death_prob)
            .collect();
        let death_p = |e: usize, i: usize, a: usize| death[(e * n + i) * spec.n_actions + a];

        let mut model = Self {
            n_agents: n,
            n_states: ns,
            n_actions: spec.n_actions,
            n_obs: spec.n_obs,
            horizon: spec.horizon,
            initial: vec![0.0; ns],
            transition: vec![0.0; ns * nj * ns],
            reward: (0..ns * nj).map(|_| rng.random_range(-1.0..1.0)).collect(),
            observation: Vec::with_capacity(n * ns),
            health: (0..ns)
                .flat_map(|s| (0..n).map(move |i| if alive(s, i) { 1.0 } else { 0.0 }))
                .collect(),
            counterfactual: (0..n)
                .flat_map(|i| (0..ns).map(move |s| s & !(1 << i)))
                .collect(),
            dead_actions_singleton: spec.dead_actions_singleton,
        };
        for _ in 0..n {
            let table: Vec<usize> = (0..spec.env_states).map(|_| rng.random_range(0..spec.n_obs)).collect();
            model.observation.extend((0..ns).map(|s| table[s / masks]));
        }
        let init_env: Vec<f64> = (0..spec.env_states).map(|_| rng.random::<f64>() + 0.05).collect();
        let z: f64 = init_env.iter().sum();
        for (e, w) in init_env.iter().enumerate() {
            model.initial[e * masks + masks - 1] = w / z;
        }

        for s in 0..ns {
            let e = s / masks;
            for u in 0..nj {
                let acts = model.decode(u);
                for next in 0..ns {
                    let e2 = next / masks;
                    let mut p = env_t[(e * nj + u) * spec.env_states + e2];
                    for i in 0..n {
                        p *= match (alive(s, i), alive(next, i)) {
                            (true, true) => 1.0 - death_p(e, i, acts[i]),
                            (true, false) => death_p(e, i, acts[i]),
                            (false, false) => 1.0,
                            (false, true) => 0.0,
                        };
                    }
                    model.transition[(s * nj + u) * ns + next] = p;
                }
            }
        }
        model
    }

    /// The default verification model: 2 agents, 3 environment states with
    /// binary health labels, 2 actions, horizon 3.
    pub fn toy() -> Self {
        Self::random(&RandomModelSpec::default(), &mut crate::rng::stream(0x7ab, &[]))
    }
}

/// Softmax table policy, one logit per (agent, observation, action).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub theta: Vec<f64>,
}

impl TabularPolicy {
    pub fn zeros(model: &TabularDecPomdp) -> Self {
        Self { theta: vec![0.0; model.n_params()] }
    }

    pub fn random(model: &TabularDecPomdp, scale: f64, rng: &mut SimRng) -> Self {
        Self { theta: (0..model.n_params()).map(|_| rng.random_range(-scale..scale)).collect() }
    }

    fn offset(model: &TabularDecPomdp, agent: usize, z: usize) -> usize {
        (agent * model.n_obs + z) * model.n_actions
    }

    /// Whether agent `i`'s decision in state `s` is forced to action 0.
    pub fn is_forced(model: &TabularDecPomdp, agent: usize, s: usize) -> bool {
        model.dead_actions_singleton && model.is_dead(s, agent)
    }

    /// Local action distribution `π_i(· | z_i(s))`.
    pub fn probs(&self, model: &TabularDecPomdp, agent: usize, s: usize) -> Vec<f64> {
        let mut p = vec![0.0; model.n_actions];
        if Self::is_forced(model, agent, s) {
            p[0] = 1.0;
            return p;
        }
        let off = Self::offset(model, agent, model.obs(agent, s));
        let logits = &self.theta[off..off + model.n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (pa, l) in p.iter_mut().zip(logits) {
            *pa = (l - max).exp();
            total += *pa;
        }
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    pub fn joint_prob(&self, model: &TabularDecPomdp, s: usize, u: usize) -> f64 {
        (0..model.n_agents)
            .map(|i| self.probs(model, i, s)[model.action_of(u, i)])
            .product()
    }

    /// Adds `weight * ∇_θ log π_i(a | z_i(s))` into `grad`.
    pub fn accumulate_score(&self, model: &TabularDecPomdp, agent: usize, s: usize, a: usize, weight: f64, grad: &mut [f64]) {
        if Self::is_forced(model, agent, s) {
            return;
        }
        let p = self.probs(model, agent, s);
        let off = Self::offset(model, agent, model.obs(agent, s));
        for (b, pb) in p.iter().enumerate() {
            let indicator = if b == a { 1.0 } else { 0.0 };
            grad[off + b] += weight * (indicator - pb);
        }
    }
}

/// One enumerated history `s_0, u_0, r_0, …, s_{H-1}, u_{H-1}, r_{H-1}, s_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    /// Undiscounted return from each step, `G_t = Σ_{k ≥ t} r_k`.
    pub fn returns_to_go(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.rewards.len()];
        let mut acc = 0.0;
        for t in (0..self.rewards.len()).rev() {
            acc += self.rewards[t];
            g[t] = acc;
        }
        g
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Visits every positive-probability trajectory with its exact probability.
pub fn for_each_trajectory(
    model: &TabularDecPomdp,
    policy: &TabularPolicy,
    budget: u64,
    mut visit: impl FnMut(&Trajectory, f64),
) -> Result<()> {
    if model.branching_bound() > budget as f64 {
        return Err(Error::Resource(format!(
            "enumeration tree bound {:.3e} exceeds budget {budget}",
            model.branching_bound()
        )));
    }
    if policy.theta.len() != model.n_params() {
        return Err(argument("policy size does not match the model"));
    }
    // Joint-action probabilities depend only on the state.
    let joint: Vec<Vec<f64>> = (0..model.n_states)
        .map(|s| (0..model.n_joint()).map(|u| policy.joint_prob(model, s, u)).collect())
        .collect();
    let mut traj = Trajectory {
        states: Vec::with_capacity(model.horizon + 1),
        actions: Vec::with_capacity(model.horizon),
        rewards: Vec::with_capacity(model.horizon),
    };
    for s0 in 0..model.n_states {
        if model.initial[s0] > 0.0 {
            traj.states.push(s0);
            descend(model, &joint, &mut traj, model.initial[s0], &mut visit);
            traj.states.pop();
        }
    }
    Ok(())
}

fn descend(
    model: &TabularDecPomdp,
    joint: &[Vec<f64>],
    traj: &mut Trajectory,
    prob: f64,
    visit: &mut impl FnMut(&Trajectory, f64),
) {
    if traj.actions.len() == model.horizon {
        visit(traj, prob);
        return;
    }
    let s = *traj.states.last().expect("trajectory has a state");
    for u in 0..model.n_joint() {
        let pu = joint[s][u];
        if pu == 0.0 {
            continue;
        }
        traj.actions.push(u);
        traj.rewards.push(model.r(s, u));
        for next in 0..model.n_states {
            let pt = model.t(s, u, next);
            if pt > 0.0 {
                traj.states.push(next);
                descend(model, joint, traj, prob * pu * pt, visit);
                traj.states.pop();
            }
        }
        traj.actions.pop();
        traj.rewards.pop();
    }
}

/// Exhaustive list of `(trajectory, probability, return)`.
pub fn tabular_enumerate(
    model: &TabularDecPomdp,
    policy: &TabularPolicy,
    budget: u64,
) -> Result<Vec<(Trajectory, f64, f64)>> {
    let mut out = Vec::new();
    for_each_trajectory(model, policy, budget, |t, p| out.push((t.clone(), p, t.total_return())))?;
    Ok(out)
}
