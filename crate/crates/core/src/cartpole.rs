//! Multi-objective CartPole.
//!
//! Classic cart-pole dynamics with a 100-step horizon and a four-component
//! reward: a sparse task bonus for surviving the full horizon, a per-step
//! survival heuristic, a position heuristic for keeping the cart right of
//! `x = 0.5`, and an interference penalty whenever the agent does what a PD
//! stabiliser would have done.

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const X_LIMIT: f64 = 2.4;
pub const HORIZON: usize = 100;
pub const TASK_BONUS: f64 = 100.0;
pub const POSITION_THRESHOLD: f64 = 0.5;
pub const PD_KP: f64 = 10.0;
pub const PD_KD: f64 = 2.0;
pub const NUM_COMPONENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Left
        } else {
            Action::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub t: usize,
}

impl CartState {
    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// Pole and cart inside their limits, regardless of the step count.
    pub fn within_limits(&self) -> bool {
        self.theta.abs() <= THETA_LIMIT && self.x.abs() <= X_LIMIT
    }

    pub fn is_alive(&self) -> bool {
        self.within_limits() && self.t < HORIZON
    }
}

/// Per-step reward components, in `(task, survival, position, interference)` order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardVector {
    pub task: f64,
    pub survival: f64,
    pub position: f64,
    pub interference: f64,
}

impl RewardVector {
    pub fn new(task: f64, survival: f64, position: f64, interference: f64) -> Self {
        Self {
            task,
            survival,
            position,
            interference,
        }
    }

    pub fn as_array(&self) -> [f64; NUM_COMPONENTS] {
        [self.task, self.survival, self.position, self.interference]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: CartState,
    pub reward: RewardVector,
    pub done: bool,
    pub success: bool,
}

/// Initial state with every variable uniform in `[-0.05, 0.05]`.
pub fn reset(rng: &mut Rng) -> CartState {
    let mut draw = || rng.random_range(-0.05..=0.05);
    CartState {
        x: draw(),
        x_dot: draw(),
        theta: draw(),
        theta_dot: draw(),
        t: 0,
    }
}

/// Push right iff `Kp * theta + Kd * theta_dot > 0`.
pub fn pd_action(s: &CartState) -> Action {
    if PD_KP * s.theta + PD_KD * s.theta_dot > 0.0 {
        Action::Right
    } else {
        Action::Left
    }
}

/// One explicit Euler step of the classic equations of motion.
pub fn dynamics(s: &CartState, action: Action) -> CartState {
    let force = match action {
        Action::Right => FORCE,
        Action::Left => -FORCE,
    };
    let total_mass = CART_MASS + POLE_MASS;
    let pml = POLE_MASS * HALF_LENGTH;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pml * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pml * theta_acc * cos / total_mass;
    CartState {
        x: s.x + DT * s.x_dot,
        x_dot: s.x_dot + DT * x_acc,
        theta: s.theta + DT * s.theta_dot,
        theta_dot: s.theta_dot + DT * theta_acc,
        t: s.t + 1,
    }
}

pub fn step(s: &CartState, action: Action) -> Result<Transition> {
    if !s.is_alive() {
        return Err(Error::Contract(format!("step called on a finished episode at t = {}", s.t)));
    }
    let interference = if action == pd_action(s) { -1.0 } else { 0.0 };
    let next = dynamics(s, action);
    let failed = !next.within_limits();
    let success = !failed && next.t == HORIZON;
    let reward = RewardVector {
        task: if success { TASK_BONUS } else { 0.0 },
        survival: 1.0,
        position: if next.x > POSITION_THRESHOLD { 1.0 } else { 0.0 },
        interference,
    };
    Ok(Transition {
        next,
        reward,
        done: failed || next.t == HORIZON,
        success,
    })
}

/// `w . R` in component order.
pub fn composite_reward(w: &[f64], r: &RewardVector) -> f64 {
    debug_assert_eq!(w.len(), NUM_COMPONENTS);
    w.iter().zip(r.as_array()).map(|(a, b)| a * b).sum()
}
