//! Desk-scale pedestrian trajectory forecasting engine: interaction-aware
//! context encoding, conditional flow-matching generation, stochastic
//! ODE-to-SDE rollout, composite social/physical rewards, group-relative
//! policy post-training, and an ADE/FDE/collision evaluation harness.

pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scenemap;
pub mod traj;

pub use error::{Error, Result};
