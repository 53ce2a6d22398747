//! Attitude control for quadcopter UAVs: quaternion kinematics, rigid-body
//! dynamics, LQR and integral-augmented LQR gain synthesis via a continuous
//! algebraic Riccati solver, and a fixed-step nonlinear closed-loop simulator
//! with tracking metrics.
//!
//! Conventions used throughout:
//! - quaternions are scalar-first `(w, x, y, z)` and map body-frame vectors
//!   into the inertial frame,
//! - the inertial frame is z-up with gravity `(0, 0, -9.81)` m/s²,
//! - body rates are expressed in the body frame,
//! - rotors are numbered 1 = front-right, 2 = back-left, 3 = front-left,
//!   4 = back-right, with 1 and 2 spinning opposite to 3 and 4.

pub mod control;
pub mod metrics;
pub mod quat;
pub mod sim;
pub mod synthesis;
pub mod vehicle;

pub use control::{
    allocate, AttitudeCommand, ControlError, ControllerMode, ControllerState,
    DEFAULT_INTEGRAL_LIMIT,
};
pub use metrics::{AxisImprovement, AxisStats, Improvement, MetricsError, TrackingMetrics};
pub use quat::{AngleAxis, Quaternion};
pub use sim::{run, run_comparison, Scenario, SimError, SimTrace, TraceRow};
pub use synthesis::{
    augment_integral, linearize_hover, solve_care, synthesize_lqr, synthesize_lqri,
    AugmentedStateSpace, CareSolution, CostWeights, GainMatrix, StateSpace, SynthesisError,
};
pub use vehicle::{
    dynamics_full, dynamics_reduced, mix_forward, mix_inverse, ParamError, RigidBodyState,
    RotorSpeeds, StateDerivative, VehicleParams, WrenchB,
};
