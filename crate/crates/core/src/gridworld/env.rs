use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GridLevel, Pos};

pub const ACTION_COUNT: usize = 7;

/// Observation planes, in encoding order: walls, agent, key on the floor,
/// closed door, goal.
pub const OBS_PLANES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Pickup,
    Toggle,
    Noop,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Pickup,
        Action::Toggle,
        Action::Noop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> Option<(isize, isize)> {
        match self {
            Action::Up => Some((0, -1)),
            Action::Down => Some((0, 1)),
            Action::Left => Some((-1, 0)),
            Action::Right => Some((1, 0)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Mutable state of one episode on a level.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub level: Arc<GridLevel>,
    pub agent_pos: Pos,
    pub has_key: bool,
    pub door_open: bool,
    pub step_count: usize,
    pub max_steps: usize,
}

impl EnvState {
    pub fn new(level: Arc<GridLevel>, max_steps: usize) -> Self {
        Self {
            agent_pos: level.agent_start,
            level,
            has_key: false,
            door_open: false,
            step_count: 0,
            max_steps,
        }
    }

    fn blocked(&self, p: Pos) -> bool {
        self.level.is_wall(p) || (p == self.level.door_pos && !self.door_open)
    }

    /// Applies one action. Invalid interactions (walking into a wall, picking
    /// up nothing, toggling away from the door) are no-ops that still consume
    /// a step.
    pub fn step(&mut self, action: Action) -> StepResult {
        let mut reward = 0.0;
        let mut terminated = false;
        match action {
            Action::Pickup => {
                if !self.has_key && self.agent_pos == self.level.key_pos {
                    self.has_key = true;
                }
            }
            Action::Toggle => {
                if self.has_key && !self.door_open && self.agent_pos.manhattan(self.level.door_pos) == 1 {
                    self.door_open = true;
                }
            }
            Action::Noop => {}
            mv => {
                let (dx, dy) = mv.delta().expect("movement action");
                let target = Pos::new(
                    self.agent_pos.x.wrapping_add_signed(dx),
                    self.agent_pos.y.wrapping_add_signed(dy),
                );
                if !self.blocked(target) {
                    self.agent_pos = target;
                    if target == self.level.goal_pos {
                        reward = 1.0;
                        terminated = true;
                    }
                }
            }
        }
        self.step_count += 1;
        let truncated = !terminated && self.step_count >= self.max_steps;
        StepResult {
            obs: encode_obs(self),
            reward,
            terminated,
            truncated,
        }
    }
}

/// One-hot planes flattened plane-major, then row-major: entry
/// `plane * size^2 + y * size + x`. Length `5 * size^2`.
pub fn encode_obs(state: &EnvState) -> Vec<f64> {
    let level = &state.level;
    let n = level.size();
    let cells = n * n;
    let mut obs = vec![0.0; OBS_PLANES * cells];
    let idx = |p: Pos| p.y * n + p.x;
    for w in level.walls() {
        obs[idx(w)] = 1.0;
    }
    obs[cells + idx(state.agent_pos)] = 1.0;
    if !state.has_key {
        obs[2 * cells + idx(level.key_pos)] = 1.0;
    }
    if !state.door_open {
        obs[3 * cells + idx(level.door_pos)] = 1.0;
    }
    obs[4 * cells + idx(level.goal_pos)] = 1.0;
    obs
}
