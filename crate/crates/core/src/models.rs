//! Bundled case-study models, requirements and fixture tensors.

use crate::uncertainty::ConfusionTensor;

/// Perfect-perception model of the mobile-robot waypoint decision.
pub const ROBOT: &str = include_str!("../models/robot.pm");

/// Perfect-perception model of the driver-attentiveness alert controller.
pub const SAFESCAD: &str = include_str!("../models/safescad.pm");

/// Constraint and objectives of the robot study.
pub const ROBOT_REQUIREMENTS: &str = include_str!("../models/robot.req");

/// Constraints and objectives of the driver-alert study.
pub const SAFESCAD_REQUIREMENTS: &str = include_str!("../models/safescad.req");

/// Hypervolume nadir scale used for each study.
pub const ROBOT_HV_SCALE: f64 = 1.5;
pub const SAFESCAD_HV_SCALE: f64 = 1.75;

/// `(name, source)` for every bundled model.
pub const ALL: [(&str, &str); 2] = [("robot", ROBOT), ("safescad", SAFESCAD)];

pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn requirements_by_name(name: &str) -> Option<&'static str> {
    match name {
        "robot" => Some(ROBOT_REQUIREMENTS),
        "safescad" => Some(SAFESCAD_REQUIREMENTS),
        _ => None,
    }
}

pub fn hv_scale_by_name(name: &str) -> Option<f64> {
    match name {
        "robot" => Some(ROBOT_HV_SCALE),
        "safescad" => Some(SAFESCAD_HV_SCALE),
        _ => None,
    }
}

/// Fixture tensor for the robot with two verifiers, 1000 samples per class.
/// Predictions with both verdicts true are almost always right; with both
/// false they are close to a coin flip. Every cell is non-zero.
pub fn robot_tensor() -> ConfusionTensor {
    ConfusionTensor::from_counts(
        2,
        2,
        &[
            vec![vec![166, 100], vec![100, 171]],
            vec![vec![150, 15], vec![20, 140]],
            vec![vec![150, 15], vec![15, 150]],
            vec![vec![400, 4], vec![4, 400]],
        ],
    )
    .expect("fixture counts are well formed")
}

/// Fixture tensor for the driver-alert study with one verifier, 1000 samples
/// per class.
pub fn safescad_tensor() -> ConfusionTensor {
    ConfusionTensor::from_counts(
        3,
        1,
        &[
            vec![vec![150, 80, 45], vec![120, 250, 100], vec![60, 120, 200]],
            vec![vec![700, 20, 5], vec![20, 500, 10], vec![5, 15, 600]],
        ],
    )
    .expect("fixture counts are well formed")
}

pub fn tensor_by_name(name: &str) -> Option<ConfusionTensor> {
    match name {
        "robot" => Some(robot_tensor()),
        "safescad" => Some(safescad_tensor()),
        _ => None,
    }
}
