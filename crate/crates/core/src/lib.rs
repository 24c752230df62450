pub mod augment;
pub mod lang;
pub mod markov;
pub mod models;
pub mod pctl;
pub mod sim;
pub mod synth;
pub mod uncertainty;
