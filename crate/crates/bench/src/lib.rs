//! Fixtures shared by the benchmarks.

use decsynth::augment::{augment, AugmentationSpec};
use decsynth::lang::{build_source, BuildOptions};
use decsynth::markov::ExplicitPdtmc;
use decsynth::models;
use decsynth::synth::Requirements;

/// The perfect-perception robot model.
pub fn robot() -> ExplicitPdtmc {
    build_source(models::ROBOT, &BuildOptions::default()).expect("bundled robot model builds")
}

/// The robot augmented with the given verifiers of its bundled tensor.
pub fn augmented_robot(verifiers: &[usize]) -> ExplicitPdtmc {
    let tensor = models::robot_tensor().project(verifiers).expect("bundled verifiers");
    augment(&robot(), &AugmentationSpec::new(tensor)).expect("bundled robot augments")
}

/// The perfect-perception SafeSCAD model.
pub fn safescad() -> ExplicitPdtmc {
    build_source(models::SAFESCAD, &BuildOptions::default()).expect("bundled SafeSCAD model builds")
}

/// SafeSCAD augmented with its bundled tensor.
pub fn augmented_safescad() -> ExplicitPdtmc {
    augment(&safescad(), &AugmentationSpec::new(models::safescad_tensor())).expect("bundled SafeSCAD augments")
}

pub fn robot_requirements() -> Requirements {
    Requirements::parse(models::ROBOT_REQUIREMENTS).expect("bundled requirements parse")
}

pub fn safescad_requirements() -> Requirements {
    Requirements::parse(models::SAFESCAD_REQUIREMENTS).expect("bundled requirements parse")
}

/// Every parameter of `model` set to the centre of its family's simplex.
pub fn centre(model: &ExplicitPdtmc) -> Vec<f64> {
    let mut values = vec![0.0; model.params().len()];
    for family in model.families() {
        for p in &family.members {
            values[p.param.index()] = 1.0 / family.members.len() as f64;
        }
    }
    values
}
