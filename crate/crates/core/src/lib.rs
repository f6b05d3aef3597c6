//! Perception error models for autonomous-vehicle virtual testing.
//!
//! * [`pem`] holds the model and injects detection and position errors into a
//!   ground-truth object list.
//! * [`learn`] fits a model from paired ground-truth/detection streams.
//! * [`server`] exposes models to an external simulator over TCP.
//! * [`sim`] is a small 2D scenario simulator with safety and perception metrics.
//! * [`cli`] implements the `pemkit` binary.

pub mod pem;
pub mod learn;
pub mod server;
pub mod sim;
pub mod cli;
