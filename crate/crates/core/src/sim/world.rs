use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError};

/// Radius of both the robot and the collider.
pub const BODY_RADIUS: f64 = 0.5;

/// Collider set-up relative to the robot, which starts at the origin facing
/// the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterState {
    pub x_diff: f64,
    pub y_diff: f64,
    /// Linear speed, units/s.
    pub s: f64,
    /// Heading, rad.
    pub theta: f64,
    /// Angular velocity, rad/s.
    pub theta_dot: f64,
}

impl EncounterState {
    /// `[x_diff, y_diff, s, theta, theta_dot]` scaled to [-1,1], [0,1], [0,1],
    /// [-1,1] and [-1,1] by the spawn limits.
    pub fn normalized(&self, cfg: &SimConfig) -> [f64; 5] {
        [
            self.x_diff / cfg.x_lim,
            self.y_diff / cfg.y_lim,
            self.s / cfg.s_lim,
            self.theta / PI,
            self.theta_dot / cfg.theta_dot_lim,
        ]
    }

    pub fn within_bounds(&self, cfg: &SimConfig) -> bool {
        self.x_diff.abs() <= cfg.x_lim
            && (0.0..=cfg.y_lim).contains(&self.y_diff)
            && (0.0..=cfg.s_lim).contains(&self.s)
            && self.theta.abs() <= PI
            && self.theta_dot.abs() <= cfg.theta_dot_lim
    }
}

/// Draws a collider uniformly from the spawn box.
pub fn spawn_collider(cfg: &SimConfig, rng: &mut impl Rng) -> EncounterState {
    EncounterState {
        x_diff: rng.gen_range(-cfg.x_lim..=cfg.x_lim),
        y_diff: rng.gen_range(0.0..=cfg.y_lim),
        s: rng.gen_range(0.0..=cfg.s_lim),
        theta: rng.gen_range(-PI..=PI),
        theta_dot: rng.gen_range(-cfg.theta_dot_lim..=cfg.theta_dot_lim),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub collision: bool,
    pub journey_time: f64,
}

/// Drives the robot to the goal, optionally past a collider. Bodies that
/// overlap are pushed apart along the line between their centres, half the
/// overlap each; the push knocks the robot off course and it slows down to
/// steer back.
pub fn simulate_encounter(cfg: &SimConfig, collider: Option<&EncounterState>) -> Result<Outcome, SimError> {
    cfg.check()?;
    if let Some(c) = collider {
        if !c.within_bounds(cfg) {
            return Err(SimError::InvalidConfig(format!("collider {c:?} outside the spawn bounds")));
        }
    }
    let (mut rx, mut ry, mut heading) = (0.0f64, 0.0f64, PI / 2.0);
    let mut other = collider.map(|c| (c.x_diff, c.y_diff, c.theta));
    let contact = 2.0 * BODY_RADIUS;
    let max_steps = (cfg.max_time / cfg.dt).ceil() as u64;
    let mut collision = false;
    for step in 1..=max_steps {
        let (gx, gy) = (cfg.x_goal - rx, cfg.y_goal - ry);
        let (vx, vy) = (heading.cos(), heading.sin());
        let error = (vx * gy - vy * gx).atan2(vx * gx + vy * gy);
        let speed = if error.abs() > cfg.heading_tolerance { cfg.slow_speed } else { cfg.robot_speed };
        heading += cfg.alpha * error * cfg.dt;
        rx += speed * heading.cos() * cfg.dt;
        ry += speed * heading.sin() * cfg.dt;
        if let (Some((cx, cy, ct)), Some(c)) = (other.as_mut(), collider) {
            *ct += c.theta_dot * cfg.dt;
            *cx += c.s * ct.cos() * cfg.dt;
            *cy += c.s * ct.sin() * cfg.dt;
            let (dx, dy) = (rx - *cx, ry - *cy);
            let d = dx.hypot(dy);
            if d < contact {
                collision = true;
                let (nx, ny) = if d > 0.0 { (dx / d, dy / d) } else { (0.0, -1.0) };
                let push = 0.5 * (contact - d);
                rx += nx * push;
                ry += ny * push;
                *cx -= nx * push;
                *cy -= ny * push;
            }
        }
        if (rx - cfg.x_goal).abs() <= cfg.epsilon && (ry - cfg.y_goal).abs() <= cfg.epsilon {
            return Ok(Outcome { collision, journey_time: step as f64 * cfg.dt });
        }
    }
    Err(SimError::Timeout { limit: cfg.max_time })
}

/// Class 2 if the robot collides when it goes regardless, else class 1.
pub fn label_oracle(cfg: &SimConfig, collider: &EncounterState) -> Result<u32, SimError> {
    Ok(if simulate_encounter(cfg, Some(collider))?.collision { 2 } else { 1 })
}
