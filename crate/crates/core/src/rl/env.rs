use crate::error::{Error, Result};
use crate::numkit::RngStream;

/// Outcome of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    pub reward: f64,
    pub done: bool,
}

/// A Markov environment with discrete actions and discrete observations.
pub trait Environment {
    type State: Clone;

    fn num_actions(&self) -> usize;
    fn num_observations(&self) -> usize;
    fn reset(&self, rng: &mut RngStream) -> Self::State;
    fn step(&self, state: &Self::State, action: usize, rng: &mut RngStream) -> Result<Transition<Self::State>>;
    fn observation(&self, state: &Self::State) -> usize;
}

/// Anything that assigns action probabilities to an observation.
pub trait Policy {
    fn probabilities(&self, observation: usize) -> Vec<f64>;

    fn sample_action(&self, observation: usize, rng: &mut RngStream) -> usize {
        rng.categorical_unchecked(&self.probabilities(observation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub ret: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Runs the policy for `steps` transitions or until the episode ends.
pub fn sample_trajectory<E: Environment, P: Policy>(
    env: &E,
    policy: &P,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("trajectory needs at least one step".into()));
    }
    let mut state = env.reset(rng);
    let mut traj = Trajectory {
        observations: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        ret: 0.0,
    };
    for _ in 0..steps {
        let obs = env.observation(&state);
        let action = policy.sample_action(obs, rng);
        let tr = env.step(&state, action, rng)?;
        traj.observations.push(obs);
        traj.actions.push(action);
        traj.rewards.push(tr.reward);
        state = tr.next;
        if tr.done {
            break;
        }
    }
    traj.ret = traj.rewards.iter().sum();
    Ok(traj)
}

fn check_action(action: usize, n: usize) -> Result<()> {
    if action >= n {
        return Err(Error::InvalidArgument(format!("action {action} out of range 0..{n}")));
    }
    Ok(())
}

/// Random walker on the integers. Action 0 steps up, action 1 steps down.
/// The return x(T) arrives as a single reward on the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerEnv {
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkerState {
    pub x: i64,
    pub t: usize,
}

impl WalkerEnv {
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;

    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("walker horizon must be positive".into()));
        }
        Ok(WalkerEnv { horizon })
    }
}

impl Environment for WalkerEnv {
    type State = WalkerState;

    fn num_actions(&self) -> usize {
        2
    }

    fn num_observations(&self) -> usize {
        1
    }

    fn reset(&self, _rng: &mut RngStream) -> WalkerState {
        WalkerState { x: 0, t: 0 }
    }

    fn step(&self, s: &WalkerState, action: usize, _rng: &mut RngStream) -> Result<Transition<WalkerState>> {
        check_action(action, 2)?;
        let x = if action == Self::UP { s.x + 1 } else { s.x - 1 };
        let t = s.t + 1;
        let done = t >= self.horizon;
        Ok(Transition {
            next: WalkerState { x, t },
            reward: if done { x as f64 } else { 0.0 },
            done,
        })
    }

    fn observation(&self, _s: &WalkerState) -> usize {
        0
    }
}

/// Walker that should park on a hidden target. Action 0 stays, action 1
/// moves one site up; observation 1 means "on target". Reward 1 per step
/// spent on the target after moving.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerTargetEnv {
    pub x_max: i64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkerTargetState {
    pub x: i64,
    pub target: i64,
    pub t: usize,
}

impl WalkerTargetEnv {
    pub const STAY: usize = 0;
    pub const MOVE: usize = 1;

    pub fn new(x_max: i64, horizon: usize) -> Result<Self> {
        if x_max < 1 || horizon == 0 {
            return Err(Error::InvalidArgument("walker-target needs x_max ≥ 1 and a positive horizon".into()));
        }
        Ok(WalkerTargetEnv { x_max, horizon })
    }
}

impl Default for WalkerTargetEnv {
    fn default() -> Self {
        WalkerTargetEnv { x_max: 10, horizon: 50 }
    }
}

impl Environment for WalkerTargetEnv {
    type State = WalkerTargetState;

    fn num_actions(&self) -> usize {
        2
    }

    fn num_observations(&self) -> usize {
        2
    }

    fn reset(&self, rng: &mut RngStream) -> WalkerTargetState {
        WalkerTargetState {
            x: 0,
            target: 1 + rng.index(self.x_max as usize) as i64,
            t: 0,
        }
    }

    fn step(&self, s: &WalkerTargetState, action: usize, _rng: &mut RngStream) -> Result<Transition<WalkerTargetState>> {
        check_action(action, 2)?;
        let next = WalkerTargetState {
            x: s.x + if action == Self::MOVE { 1 } else { 0 },
            target: s.target,
            t: s.t + 1,
        };
        Ok(Transition {
            reward: if next.x == next.target { 1.0 } else { 0.0 },
            done: next.t >= self.horizon,
            next,
        })
    }

    fn observation(&self, s: &WalkerTargetState) -> usize {
        usize::from(s.x == s.target)
    }
}

/// Grid world in which an agent collects boxes. Actions move N, S, W, E;
/// moves into the boundary leave the agent in place. Stepping onto a box
/// picks it up for reward 1, and the episode ends when no box is left.
#[derive(Debug, Clone, PartialEq)]
pub struct GridworldBoxEnv {
    pub height: usize,
    pub width: usize,
    pub start: (usize, usize),
    pub boxes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub row: usize,
    pub col: usize,
    /// Bit k is set while box k is still present.
    pub remaining: u32,
}

impl GridworldBoxEnv {
    pub const NORTH: usize = 0;
    pub const SOUTH: usize = 1;
    pub const WEST: usize = 2;
    pub const EAST: usize = 3;

    pub fn new(height: usize, width: usize, start: (usize, usize), boxes: Vec<(usize, usize)>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("grid must be non-empty".into()));
        }
        if boxes.is_empty() || boxes.len() > 16 {
            return Err(Error::InvalidArgument("between 1 and 16 boxes are supported".into()));
        }
        let inside = |(r, c): (usize, usize)| r < height && c < width;
        if !inside(start) || !boxes.iter().all(|&b| inside(b)) {
            return Err(Error::InvalidArgument("start and boxes must lie on the grid".into()));
        }
        if boxes.contains(&start) {
            return Err(Error::InvalidArgument("a box may not sit on the start cell".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if boxes[..i].contains(b) {
                return Err(Error::InvalidArgument("boxes must occupy distinct cells".into()));
            }
        }
        Ok(GridworldBoxEnv {
            height,
            width,
            start,
            boxes,
        })
    }

    pub fn num_states(&self) -> usize {
        (self.height * self.width) << self.boxes.len()
    }

    pub fn state_index(&self, s: &GridState) -> usize {
        (s.remaining as usize * self.height + s.row) * self.width + s.col
    }

    pub fn state_from_index(&self, index: usize) -> GridState {
        let cells = self.height * self.width;
        let cell = index % cells;
        GridState {
            row: cell / self.width,
            col: cell % self.width,
            remaining: (index / cells) as u32,
        }
    }

    pub fn start_state(&self) -> GridState {
        GridState {
            row: self.start.0,
            col: self.start.1,
            remaining: (1u32 << self.boxes.len()) - 1,
        }
    }

    pub fn is_terminal(&self, s: &GridState) -> bool {
        s.remaining == 0
    }

    /// Deterministic transition used by both the simulator and the oracle.
    pub fn transition(&self, s: &GridState, action: usize) -> Result<Transition<GridState>> {
        check_action(action, 4)?;
        let (mut row, mut col) = (s.row, s.col);
        match action {
            Self::NORTH => row = row.saturating_sub(1),
            Self::SOUTH => row = (row + 1).min(self.height - 1),
            Self::WEST => col = col.saturating_sub(1),
            _ => col = (col + 1).min(self.width - 1),
        }
        let mut remaining = s.remaining;
        let mut reward = 0.0;
        for (k, &b) in self.boxes.iter().enumerate() {
            if remaining & (1 << k) != 0 && b == (row, col) {
                remaining &= !(1 << k);
                reward += 1.0;
            }
        }
        Ok(Transition {
            next: GridState { row, col, remaining },
            reward,
            done: remaining == 0,
        })
    }
}

impl Environment for GridworldBoxEnv {
    type State = GridState;

    fn num_actions(&self) -> usize {
        4
    }

    fn num_observations(&self) -> usize {
        self.num_states()
    }

    fn reset(&self, _rng: &mut RngStream) -> GridState {
        self.start_state()
    }

    fn step(&self, s: &GridState, action: usize, _rng: &mut RngStream) -> Result<Transition<GridState>> {
        self.transition(s, action)
    }

    fn observation(&self, s: &GridState) -> usize {
        self.state_index(s)
    }
}
