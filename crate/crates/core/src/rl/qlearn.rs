use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::env::{Environment, GridworldBoxEnv};
use crate::error::{Error, Result};
use crate::numkit::RngStream;

/// Largest state space the value-iteration oracle will enumerate.
pub const MAX_STATES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    pub gamma: f64,
    pub alpha: f64,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, gamma: f64, alpha: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidArgument("Q table needs states and actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1)")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("learning rate {alpha} outside (0, 1)")));
        }
        Ok(QTable {
            num_states,
            num_actions,
            gamma,
            alpha,
            values: vec![0.0; num_states * num_actions],
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// argmax_a Q(s, a), lowest index on ties.
    pub fn greedy_action(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(Error::InvalidArgument(format!(
                "state-action ({s}, {a}) outside {}x{}",
                self.num_states, self.num_actions
            )));
        }
        Ok(())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Q(s,a) += α (r + γ max_a' Q(s',a') − Q(s,a)), with zero bootstrap on
/// terminal transitions.
pub fn q_update(table: &mut QTable, s: usize, a: usize, r: f64, s_next: usize, done: bool) -> Result<()> {
    table.check(s, a)?;
    table.check(s_next, 0)?;
    let bootstrap = if done { 0.0 } else { table.max_value(s_next) };
    let q = table.get(s, a);
    let updated = q + table.alpha * (r + table.gamma * bootstrap - q);
    if !updated.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            detail: format!("Q({s},{a}) became {updated}"),
        });
    }
    table.set(s, a, updated);
    Ok(())
}

/// Uniform random action with probability ε, greedy otherwise.
pub fn epsilon_greedy(table: &QTable, s: usize, epsilon: f64, rng: &mut RngStream) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} outside [0, 1]")));
    }
    table.check(s, 0)?;
    if epsilon > 0.0 && rng.uniform01() < epsilon {
        Ok(rng.index(table.num_actions))
    } else {
        Ok(table.greedy_action(s))
    }
}

/// One possible outcome of taking an action.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub next: usize,
    pub reward: f64,
    pub done: bool,
}

/// Fully enumerated finite MDP. `outcomes[s][a]` lists the possible
/// results of action a in state s. States marked terminal take no actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub num_actions: usize,
    pub outcomes: Vec<Vec<Vec<Outcome>>>,
    pub terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(num_actions: usize, outcomes: Vec<Vec<Vec<Outcome>>>, terminal: Vec<bool>) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::Unsupported(format!("{n} states cannot be enumerated")));
        }
        if terminal.len() != n {
            return Err(Error::Shape("terminal flags must cover every state".into()));
        }
        for (s, per_action) in outcomes.iter().enumerate() {
            if terminal[s] {
                continue;
            }
            if per_action.len() != num_actions {
                return Err(Error::Shape(format!("state {s} lists {} actions", per_action.len())));
            }
            for (a, outs) in per_action.iter().enumerate() {
                let total: f64 = outs.iter().map(|o| o.probability).sum();
                if (total - 1.0).abs() > 1e-12 || outs.iter().any(|o| o.next >= n || o.probability < 0.0) {
                    return Err(Error::InvalidArgument(format!("bad outcome distribution at ({s}, {a})")));
                }
            }
        }
        Ok(TabularMdp {
            num_actions,
            outcomes,
            terminal,
        })
    }

    pub fn num_states(&self) -> usize {
        self.outcomes.len()
    }

    /// States reachable from `start` through non-terminal states, the
    /// terminal ones excluded.
    pub fn reachable_from(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut out = Vec::new();
        while let Some(s) = queue.pop_front() {
            if self.terminal[s] {
                continue;
            }
            out.push(s);
            for outs in &self.outcomes[s] {
                for o in outs {
                    if o.probability > 0.0 && !seen[o.next] {
                        seen[o.next] = true;
                        queue.push_back(o.next);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

impl GridworldBoxEnv {
    pub fn to_mdp(&self) -> Result<TabularMdp> {
        let n = self.num_states();
        if n > MAX_STATES {
            return Err(Error::Unsupported(format!("{n} grid states cannot be enumerated")));
        }
        let mut outcomes = Vec::with_capacity(n);
        let mut terminal = Vec::with_capacity(n);
        for i in 0..n {
            let s = self.state_from_index(i);
            let term = self.is_terminal(&s);
            terminal.push(term);
            if term {
                outcomes.push(Vec::new());
                continue;
            }
            let mut per_action = Vec::with_capacity(4);
            for a in 0..4 {
                let tr = self.transition(&s, a)?;
                per_action.push(vec![Outcome {
                    probability: 1.0,
                    next: self.state_index(&tr.next),
                    reward: tr.reward,
                    done: tr.done,
                }]);
            }
            outcomes.push(per_action);
        }
        TabularMdp::new(4, outcomes, terminal)
    }
}

/// Optimal Q* by Bellman optimality sweeps until the largest change is
/// below `tol`. Terminal states hold zeros.
pub fn value_iteration_oracle(mdp: &TabularMdp, gamma: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = mdp.num_states();
    let mut q = vec![vec![0.0; mdp.num_actions]; n];
    let max_sweeps = 100_000;
    for _ in 0..max_sweeps {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut change: f64 = 0.0;
        for s in 0..n {
            if mdp.terminal[s] {
                continue;
            }
            for a in 0..mdp.num_actions {
                let new: f64 = mdp.outcomes[s][a]
                    .iter()
                    .map(|o| {
                        let boot = if o.done || mdp.terminal[o.next] { 0.0 } else { v[o.next] };
                        o.probability * (o.reward + gamma * boot)
                    })
                    .sum();
                change = change.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if change < tol {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence {
        sweeps: max_sweeps,
        off_norm: f64::NAN,
    })
}

/// Actions within `tol` of the optimum in one row of Q*.
pub fn optimal_actions(row: &[f64], tol: f64) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..row.len()).filter(|&a| row[a] >= best - tol).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearningConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// ε decays linearly from `epsilon_start` to `epsilon_end` over the episodes.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            episodes: 4000,
            max_steps: 100,
            alpha: 0.9,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QLearningReport {
    pub table: QTable,
    /// Update count per (state, action), row-major like the table.
    pub visits: Vec<u64>,
    pub returns: Vec<f64>,
    pub epsilons: Vec<f64>,
}

/// ε-greedy tabular Q-learning on any environment with discrete observations
/// that identify the state.
pub fn train_q_learning<E: Environment>(env: &E, config: &QLearningConfig, seed: u64) -> Result<QLearningReport> {
    if config.episodes == 0 || config.max_steps == 0 {
        return Err(Error::InvalidArgument("episodes and max_steps must be positive".into()));
    }
    let mut table = QTable::new(env.num_observations(), env.num_actions(), config.gamma, config.alpha)?;
    let mut visits = vec![0u64; env.num_observations() * env.num_actions()];
    let mut returns = Vec::with_capacity(config.episodes);
    let mut epsilons = Vec::with_capacity(config.episodes);
    for ep in 0..config.episodes {
        let frac = if config.episodes > 1 { ep as f64 / (config.episodes - 1) as f64 } else { 1.0 };
        let eps = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
        let mut rng = RngStream::new(seed, ep as u64);
        let mut state = env.reset(&mut rng);
        let mut ret = 0.0;
        for _ in 0..config.max_steps {
            let s = env.observation(&state);
            let a = epsilon_greedy(&table, s, eps, &mut rng)?;
            let tr = env.step(&state, a, &mut rng)?;
            let s_next = env.observation(&tr.next);
            q_update(&mut table, s, a, tr.reward, s_next, tr.done)?;
            visits[s * env.num_actions() + a] += 1;
            ret += tr.reward;
            state = tr.next;
            if tr.done {
                break;
            }
        }
        returns.push(ret);
        epsilons.push(eps);
    }
    Ok(QLearningReport {
        table,
        visits,
        returns,
        epsilons,
    })
}

/// Comparison of a learned table against Q* on the states reachable from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub reachable_states: usize,
    /// Reachable states whose greedy action is not optimal under Q*.
    pub policy_mismatches: Vec<usize>,
    /// Largest |Q − Q*| over visited state-actions.
    pub max_visited_error: f64,
}

pub fn compare_with_oracle(
    report: &QLearningReport,
    mdp: &TabularMdp,
    q_star: &[Vec<f64>],
    start: usize,
) -> OracleComparison {
    let reachable = mdp.reachable_from(start);
    let na = report.table.num_actions();
    let policy_mismatches = reachable
        .iter()
        .copied()
        .filter(|&s| !optimal_actions(&q_star[s], 1e-9).contains(&report.table.greedy_action(s)))
        .collect();
    let mut max_visited_error: f64 = 0.0;
    for s in 0..report.table.num_states() {
        for a in 0..na {
            if report.visits[s * na + a] > 0 {
                max_visited_error = max_visited_error.max((report.table.get(s, a) - q_star[s][a]).abs());
            }
        }
    }
    OracleComparison {
        reachable_states: reachable.len(),
        policy_mismatches,
        max_visited_error,
    }
}
