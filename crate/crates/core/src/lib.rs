//! Simulation-based design optimization of a single-actuator gripper whose
//! crawler fingertip switches passively between a parallel approach, a
//! pull-in conveying mode and a power grasp.
//!
//! - [`transmission`]: tendon, slider and spring torques on the hand.
//! - [`dynamics`]: planar rigid-body simulation of the hand and objects.
//! - [`scenario`]: the grasp trial, its score and the force measurement.
//! - [`optimizer`]: ask/tell search with TPE and random sampling.
//! - [`study`]: study configuration, the objective and report tables.

pub mod dynamics;
pub mod optimizer;
pub mod scenario;
pub mod study;
pub mod transmission;

pub use transmission::{DesignParams, DesignParamsMm, GraspMode, TransmissionConfig};
