//! Simulator for online aggregation of crowd preference labels.
//!
//! Workers report a probability per prompt; a mechanism weighs them, emits
//! an aggregate, and reweighs once the labels are verified. [`sim`] runs a
//! scenario end to end, [`analysis`] turns runs and payoff models into
//! pass/fail checks, and [`cli`] writes the CSV and JSON artifacts.

pub mod aggregation;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod ledger;
pub mod mechanisms;
pub mod model;
pub mod sim;
pub mod workers;
