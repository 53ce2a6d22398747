//! Runtime attitude controller: error computation, the state-feedback law
//! with integral anti-windup, and control allocation to rotor speeds.

use crate::quat::Quaternion;
use crate::synthesis::GainMatrix;
use crate::vehicle::{RigidBodyState, RotorSpeeds, VehicleParams};
use nalgebra::{DVector, Vector3, Vector6};
use thiserror::Error;

/// Default per-axis anti-windup clamp in rad·s, sized so that
/// clamp × integral gain stays well below the available torque.
pub const DEFAULT_INTEGRAL_LIMIT: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("{mode:?} mode expects a 3x{expected} gain, got {rows}x{cols}")]
    GainShape {
        mode: ControllerMode,
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("integral limit components must be nonnegative")]
    NegativeIntegralLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    Lqr,
    Lqri,
}

/// Attitude setpoint plus the thrust to hold while regulating attitude.
#[derive(Debug, Clone, Copy)]
pub struct AttitudeCommand {
    pub target_attitude: Quaternion,
    pub target_body_rates: Vector3<f64>,
    pub feedforward_thrust: f64,
}

impl AttitudeCommand {
    /// Hold `target` at the given thrust with zero commanded rates.
    pub fn attitude_hold(target: Quaternion, thrust: f64) -> Self {
        Self {
            target_attitude: target.normalized(),
            target_body_rates: Vector3::zeros(),
            feedforward_thrust: thrust,
        }
    }

    /// Level attitude at hover thrust.
    pub fn hover(params: &VehicleParams) -> Self {
        Self::attitude_hold(Quaternion::identity(), params.hover_thrust())
    }
}

/// Error state `[Q_a; ω − ω_ref]` fed to the gain: the angle-axis of the
/// rotation carrying the target attitude onto the current one, stacked with
/// the body-rate error. `τ = −K·e` then pushes the vehicle toward the
/// target.
pub fn attitude_error_state(current: &RigidBodyState, cmd: &AttitudeCommand) -> Vector6<f64> {
    let e_att = current
        .attitude
        .error_from(&cmd.target_attitude)
        .to_angle_axis()
        .vector;
    let e_rate = current.body_rates - cmd.target_body_rates;
    Vector6::new(e_att.x, e_att.y, e_att.z, e_rate.x, e_rate.y, e_rate.z)
}

/// Feedback controller holding the gain, the mode, and the integral state.
#[derive(Debug, Clone)]
pub struct ControllerState {
    mode: ControllerMode,
    gain: GainMatrix,
    integral: Vector3<f64>,
    integral_limit: Vector3<f64>,
}

impl ControllerState {
    pub fn new(
        mode: ControllerMode,
        gain: GainMatrix,
        integral_limit: Vector3<f64>,
    ) -> Result<Self, ControlError> {
        let expected = match mode {
            ControllerMode::Lqr => 6,
            ControllerMode::Lqri => 9,
        };
        if gain.n_inputs() != 3 || gain.n_states() != expected {
            return Err(ControlError::GainShape {
                mode,
                expected,
                rows: gain.n_inputs(),
                cols: gain.n_states(),
            });
        }
        if integral_limit.iter().any(|&l| l.is_nan() || l < 0.0) {
            return Err(ControlError::NegativeIntegralLimit);
        }
        Ok(Self {
            mode,
            gain,
            integral: Vector3::zeros(),
            integral_limit,
        })
    }

    pub fn lqr(gain: GainMatrix) -> Result<Self, ControlError> {
        Self::new(ControllerMode::Lqr, gain, Vector3::zeros())
    }

    pub fn lqri(gain: GainMatrix, integral_limit: Vector3<f64>) -> Result<Self, ControlError> {
        Self::new(ControllerMode::Lqri, gain, integral_limit)
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn gain(&self) -> &GainMatrix {
        &self.gain
    }

    pub fn integral(&self) -> Vector3<f64> {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    /// One controller update from a precomputed error state; returns the
    /// torque command in N·m. In LQRi mode the attitude-error integral is
    /// advanced by explicit Euler and clamped per axis before the gain is
    /// applied; in LQR mode the integral stays untouched at zero.
    pub fn step_with_error(&mut self, error: &Vector6<f64>, dt: f64) -> Vector3<f64> {
        let tau = match self.mode {
            ControllerMode::Lqr => {
                let e = DVector::from_column_slice(error.as_slice());
                -(self.gain.k() * e)
            }
            ControllerMode::Lqri => {
                for i in 0..3 {
                    let lim = self.integral_limit[i];
                    self.integral[i] = (self.integral[i] + error[i] * dt).clamp(-lim, lim);
                }
                let mut x = DVector::zeros(9);
                for i in 0..3 {
                    x[i] = self.integral[i];
                }
                for i in 0..6 {
                    x[3 + i] = error[i];
                }
                -(self.gain.k() * x)
            }
        };
        Vector3::new(tau[0], tau[1], tau[2])
    }

    /// One controller update from the measured state and the active command.
    pub fn step(
        &mut self,
        current: &RigidBodyState,
        cmd: &AttitudeCommand,
        dt: f64,
    ) -> Vector3<f64> {
        let error = attitude_error_state(current, cmd);
        self.step_with_error(&error, dt)
    }
}

/// Maps a torque command plus feedforward thrust to rotor speeds. If the
/// wrench is infeasible, thrust is preserved and the torque is scaled down
/// uniformly until every squared rotor speed fits in
/// `[0, rotor_speed_max²]`; the flag reports that any scaling or clamping
/// occurred.
pub fn allocate(
    tau_ref: &Vector3<f64>,
    thrust_ref: f64,
    params: &VehicleParams,
) -> (RotorSpeeds, bool) {
    let feasible_thrust = thrust_ref.clamp(0.0, params.max_thrust());
    let mut saturated = feasible_thrust != thrust_ref;

    let minv = params.mixing_matrix_inv();
    // Ω² = base + scale·delta: base from thrust alone (uniform, hence always
    // feasible), delta from the torque columns
    let base = minv.column(0) * feasible_thrust;
    let delta = minv.fixed_columns::<3>(1) * tau_ref;
    let max_sq = params.rotor_speed_max() * params.rotor_speed_max();

    let mut scale = 1.0f64;
    for i in 0..4 {
        if delta[i] > 0.0 {
            scale = scale.min((max_sq - base[i]) / delta[i]);
        } else if delta[i] < 0.0 {
            scale = scale.min(-base[i] / delta[i]);
        }
    }
    if scale < 1.0 {
        saturated = true;
    }
    let scale = scale.clamp(0.0, 1.0);

    let mut omega = [0.0; 4];
    for i in 0..4 {
        omega[i] = (base[i] + scale * delta[i]).max(0.0).sqrt();
    }
    (RotorSpeeds { omega }, saturated)
}
