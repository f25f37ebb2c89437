//! Experiment harness around `chord-churn-core`: replicated parameter sweeps
//! comparing simulation against the analytical predictions, Monte Carlo
//! oracles for the derived probability formulas, and the file formats the
//! CLI emits.

pub mod experiment;
pub mod oracle;
pub mod output;
pub mod stats;
pub mod validate;
