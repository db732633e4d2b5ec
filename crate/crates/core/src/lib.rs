//! Online feedback optimization of switched linear plants.
//!
//! Simulates switched LTI plants in closed loop with a gradient-flow controller
//! or a hybrid restarted accelerated controller, and computes and monitors the
//! associated stability certificates.

pub mod certificates;
pub mod controller;
pub mod config;
pub mod cost;
pub mod disturbance;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod linalg;
pub mod output;
pub mod plant;
pub mod report;
pub mod sim;
pub mod switching;

pub use error::{Error, Result};
