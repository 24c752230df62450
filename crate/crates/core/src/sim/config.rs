use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Steering gain.
    pub alpha: f64,
    pub x_goal: f64,
    pub y_goal: f64,
    /// Half-width of the goal box.
    pub epsilon: f64,
    /// Colliders spawn with x in [-x_lim, x_lim] and y in [0, y_lim].
    pub x_lim: f64,
    pub y_lim: f64,
    /// Largest collider speed, units/s.
    pub s_lim: f64,
    /// Largest collider angular speed, rad/s.
    pub theta_dot_lim: f64,
    /// Integration step, s.
    pub dt: f64,
    pub robot_speed: f64,
    /// Speed while the heading error exceeds `heading_tolerance`.
    pub slow_speed: f64,
    pub heading_tolerance: f64,
    /// Journeys longer than this are reported as timeouts.
    pub max_time: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            alpha: 0.5,
            x_goal: 0.0,
            y_goal: 10.0,
            epsilon: 0.05,
            x_lim: 10.0,
            y_lim: 10.0,
            s_lim: 2.0,
            theta_dot_lim: PI / 4.0,
            dt: 0.01,
            robot_speed: 1.0,
            slow_speed: 0.1,
            heading_tolerance: PI / 36.0,
            max_time: 100.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        let positive = [
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("x_lim", self.x_lim),
            ("y_lim", self.y_lim),
            ("s_lim", self.s_lim),
            ("theta_dot_lim", self.theta_dot_lim),
            ("dt", self.dt),
            ("robot_speed", self.robot_speed),
            ("slow_speed", self.slow_speed),
            ("heading_tolerance", self.heading_tolerance),
            ("max_time", self.max_time),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.x_goal.is_finite() && self.y_goal.is_finite()) {
            return Err(SimError::InvalidConfig("goal must be finite".into()));
        }
        Ok(())
    }

    /// Straight-line time from the origin to the edge of the goal box, for a
    /// goal on a coordinate axis.
    pub fn free_travel_time(&self) -> f64 {
        (self.x_goal.hypot(self.y_goal) - self.epsilon) / self.robot_speed
    }
}
