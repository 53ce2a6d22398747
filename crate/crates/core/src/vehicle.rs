//! Quadcopter physical parameters, motor mixing, and rigid-body dynamics.
//!
//! Rotor ordering: 1 = front-right, 2 = back-left, 3 = front-left,
//! 4 = back-right (X configuration), with rotors 1 and 2 spinning opposite
//! to 3 and 4. The mixing rows follow this assignment:
//!
//! ```text
//! thrust = k_T·(Ω1² + Ω2² + Ω3² + Ω4²)
//! roll   = k_T·l·(Ω1² − Ω2² − Ω3² + Ω4²)
//! pitch  = k_T·l·(Ω1² − Ω2² + Ω3² − Ω4²)
//! yaw    = k_τ·(Ω1² + Ω2² − Ω3² − Ω4²)
//! ```

use crate::quat::{AngleAxis, Quaternion};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4, Vector6};
use std::ops::{Add, Mul};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("invalid vehicle parameter: {0}")]
pub struct ParamError(pub String);

/// Physical constants of one vehicle. Immutable after construction, so a
/// single instance can back any number of concurrent simulations.
#[derive(Debug, Clone)]
pub struct VehicleParams {
    mass: f64,
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    arm_length: f64,
    thrust_constant: f64,
    torque_constant: f64,
    rotor_speed_max: f64,
    gravity: Vector3<f64>,
    mix: Matrix4<f64>,
    mix_inv: Matrix4<f64>,
}

impl VehicleParams {
    /// Validates parameters and precomputes the inertia inverse and the
    /// 4×4 mixing matrix with its inverse.
    ///
    /// `thrust_constant` is in N/(rad/s)², `torque_constant` in
    /// N·m/(rad/s)² (the reaction-torque coefficient already carries the
    /// full torque dimension; no arm-length factor enters the yaw row).
    pub fn new(
        mass: f64,
        inertia: Matrix3<f64>,
        arm_length: f64,
        thrust_constant: f64,
        torque_constant: f64,
        rotor_speed_max: f64,
        gravity: Vector3<f64>,
    ) -> Result<Self, ParamError> {
        let positive = [
            ("mass", mass),
            ("arm_length", arm_length),
            ("thrust_constant", thrust_constant),
            ("torque_constant", torque_constant),
            ("rotor_speed_max", rotor_speed_max),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(ParamError(format!("{name} must be positive, got {value}")));
            }
        }
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(ParamError("gravity must be finite".into()));
        }
        if !inertia.iter().all(|j| j.is_finite()) {
            return Err(ParamError("inertia must be finite".into()));
        }
        let asym = (inertia - inertia.transpose()).norm();
        if asym > 1e-9 * inertia.norm().max(1e-300) {
            return Err(ParamError(format!(
                "inertia must be symmetric (asymmetry norm {asym:.3e})"
            )));
        }
        let chol = nalgebra::Cholesky::new(inertia)
            .ok_or_else(|| ParamError("inertia must be positive definite".into()))?;
        let inertia_inv = chol.inverse();

        let a = thrust_constant * arm_length;
        let b = torque_constant;
        let k = thrust_constant;
        #[rustfmt::skip]
        let mix = Matrix4::new(
            k,  k,  k,  k,
            a, -a, -a,  a,
            a, -a,  a, -a,
            b,  b, -b, -b,
        );
        let mix_inv = mix
            .try_inverse()
            .ok_or_else(|| ParamError("mixing matrix is singular".into()))?;

        Ok(Self {
            mass,
            inertia,
            inertia_inv,
            arm_length,
            thrust_constant,
            torque_constant,
            rotor_speed_max,
            gravity,
            mix,
            mix_inv,
        })
    }

    /// Reference vehicle: a 1.5 kg, 450-size X quad with
    /// J = diag(0.01, 0.02, 0.01) kg·m², hovering near 60% of its thrust
    /// range.
    pub fn reference() -> Self {
        Self::new(
            1.5,
            Matrix3::from_diagonal(&Vector3::new(0.01, 0.02, 0.01)),
            0.225,
            1.0e-5,
            1.7e-7,
            1200.0,
            Vector3::new(0.0, 0.0, -9.81),
        )
        .expect("reference parameters are valid")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    pub fn arm_length(&self) -> f64 {
        self.arm_length
    }

    pub fn thrust_constant(&self) -> f64 {
        self.thrust_constant
    }

    pub fn torque_constant(&self) -> f64 {
        self.torque_constant
    }

    pub fn rotor_speed_max(&self) -> f64 {
        self.rotor_speed_max
    }

    pub fn gravity(&self) -> &Vector3<f64> {
        &self.gravity
    }

    /// Mixing matrix mapping (Ω1², Ω2², Ω3², Ω4²) to (thrust, τx, τy, τz).
    pub fn mixing_matrix(&self) -> &Matrix4<f64> {
        &self.mix
    }

    pub fn mixing_matrix_inv(&self) -> &Matrix4<f64> {
        &self.mix_inv
    }

    /// Thrust balancing gravity, in N.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity.norm()
    }

    /// Per-rotor speed at hover, in rad/s.
    pub fn hover_speed(&self) -> f64 {
        (self.hover_thrust() / (4.0 * self.thrust_constant)).sqrt()
    }

    /// Total thrust with all rotors at `rotor_speed_max`.
    pub fn max_thrust(&self) -> f64 {
        4.0 * self.thrust_constant * self.rotor_speed_max * self.rotor_speed_max
    }
}

/// Full 13-component rigid-body state. Position and velocity are inertial,
/// body rates are body-frame, and the attitude maps body to inertial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quaternion,
    pub body_rates: Vector3<f64>,
}

impl RigidBodyState {
    /// Level attitude, everything at rest.
    pub fn hover() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: Quaternion::identity(),
            body_rates: Vector3::zeros(),
        }
    }

    /// Euler step `self + d·dt` without renormalizing the attitude; the
    /// integrator renormalizes once per full step.
    pub fn add_scaled(&self, d: &StateDerivative, dt: f64) -> Self {
        Self {
            position: self.position + d.velocity * dt,
            velocity: self.velocity + d.acceleration * dt,
            attitude: self.attitude + d.attitude_rate * dt,
            body_rates: self.body_rates + d.angular_acceleration * dt,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.body_rates.iter().all(|v| v.is_finite())
            && [
                self.attitude.w,
                self.attitude.x,
                self.attitude.y,
                self.attitude.z,
            ]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Time derivative of `RigidBodyState`.
#[derive(Debug, Clone, Copy)]
pub struct StateDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub attitude_rate: Quaternion,
    pub angular_acceleration: Vector3<f64>,
}

impl Add for StateDerivative {
    type Output = StateDerivative;

    fn add(self, o: StateDerivative) -> StateDerivative {
        StateDerivative {
            velocity: self.velocity + o.velocity,
            acceleration: self.acceleration + o.acceleration,
            attitude_rate: self.attitude_rate + o.attitude_rate,
            angular_acceleration: self.angular_acceleration + o.angular_acceleration,
        }
    }
}

impl Mul<f64> for StateDerivative {
    type Output = StateDerivative;

    fn mul(self, s: f64) -> StateDerivative {
        StateDerivative {
            velocity: self.velocity * s,
            acceleration: self.acceleration * s,
            attitude_rate: self.attitude_rate * s,
            angular_acceleration: self.angular_acceleration * s,
        }
    }
}

/// Rotor speeds in rad/s, indexed per the module-level ordering contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpeeds {
    pub omega: [f64; 4],
}

impl RotorSpeeds {
    pub fn new(omega: [f64; 4]) -> Self {
        Self { omega }
    }

    pub fn uniform(speed: f64) -> Self {
        Self { omega: [speed; 4] }
    }

    fn squared(&self) -> Vector4<f64> {
        Vector4::new(
            self.omega[0] * self.omega[0],
            self.omega[1] * self.omega[1],
            self.omega[2] * self.omega[2],
            self.omega[3] * self.omega[3],
        )
    }
}

/// Body-frame wrench: total body-z thrust plus torque about the body axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchB {
    pub thrust: f64,
    pub torque: Vector3<f64>,
}

/// Thrust and torque produced by the given rotor speeds.
pub fn mix_forward(speeds: &RotorSpeeds, params: &VehicleParams) -> WrenchB {
    let w = params.mix * speeds.squared();
    WrenchB {
        thrust: w[0],
        torque: Vector3::new(w[1], w[2], w[3]),
    }
}

/// Rotor speeds realizing the wrench, clamping each squared speed to
/// `[0, rotor_speed_max²]`. The flag reports whether any clamp activated;
/// when it did, the returned speeds realize a different (feasible) wrench.
pub fn mix_inverse(wrench: &WrenchB, params: &VehicleParams) -> (RotorSpeeds, bool) {
    let target = Vector4::new(
        wrench.thrust,
        wrench.torque.x,
        wrench.torque.y,
        wrench.torque.z,
    );
    let omega_sq = params.mix_inv * target;
    let max_sq = params.rotor_speed_max * params.rotor_speed_max;
    let mut saturated = false;
    let mut omega = [0.0; 4];
    for i in 0..4 {
        let clamped = omega_sq[i].clamp(0.0, max_sq);
        if clamped != omega_sq[i] {
            saturated = true;
        }
        omega[i] = clamped.sqrt();
    }
    (RotorSpeeds { omega }, saturated)
}

/// Newton–Euler derivative of the full state.
///
/// Translational: `a_I = rotate(q, (0,0,F_B))/m + g`. Rotational:
/// `ω̇ = J⁻¹(τ_B + disturbance − ω×Jω)`. Attitude kinematics with
/// body-frame rates: `q̇ = ½·q ⊗ (0, ω_B)`.
pub fn dynamics_full(
    state: &RigidBodyState,
    speeds: &RotorSpeeds,
    params: &VehicleParams,
    disturbance_torque: &Vector3<f64>,
) -> StateDerivative {
    let wrench = mix_forward(speeds, params);
    let q = state.attitude;
    let thrust_body = Vector3::new(0.0, 0.0, wrench.thrust);
    let acceleration = q.normalized().rotate_vector(&thrust_body) / params.mass + params.gravity;
    let omega = state.body_rates;
    let attitude_rate = (q * Quaternion::new(0.0, omega.x, omega.y, omega.z)) * 0.5;
    let gyro = omega.cross(&(params.inertia * omega));
    let angular_acceleration = params.inertia_inv * (wrench.torque + disturbance_torque - gyro);
    StateDerivative {
        velocity: state.velocity,
        acceleration,
        attitude_rate,
        angular_acceleration,
    }
}

/// Reduced attitude dynamics over `[Q_a; ω_B]`: the attitude-error rows are
/// `ω_B` (first order about hover) and the rate rows are the Euler equation.
/// The derivative does not depend on the error itself; the argument is kept
/// so callers can treat this as `f(x, u)` when differencing the full reduced
/// state.
pub fn dynamics_reduced(
    _attitude_error: &AngleAxis,
    omega_b: &Vector3<f64>,
    tau_b: &Vector3<f64>,
    params: &VehicleParams,
) -> Vector6<f64> {
    let gyro = omega_b.cross(&(params.inertia * omega_b));
    let omega_dot = params.inertia_inv * (tau_b - gyro);
    Vector6::new(
        omega_b.x,
        omega_b.y,
        omega_b.z,
        omega_dot.x,
        omega_dot.y,
        omega_dot.z,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equal_speeds_give_pure_thrust() {
        let p = VehicleParams::reference();
        let w = mix_forward(&RotorSpeeds::uniform(500.0), &p);
        assert_relative_eq!(w.thrust, 4.0 * 1.0e-5 * 500.0 * 500.0);
        assert_eq!(w.torque, Vector3::zeros());
    }

    #[test]
    fn diagonal_rotor_pair_rolls() {
        let p = VehicleParams::reference();
        let w = mix_forward(&RotorSpeeds::new([400.0, 0.0, 0.0, 400.0]), &p);
        assert_relative_eq!(w.thrust, 3.2, epsilon = 1e-12);
        assert_relative_eq!(w.torque.x, 0.72, epsilon = 1e-12);
        assert_relative_eq!(w.torque.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(w.torque.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_speeds_give_zero_wrench() {
        let p = VehicleParams::reference();
        let w = mix_forward(&RotorSpeeds::uniform(0.0), &p);
        assert_eq!(w.thrust, 0.0);
        assert_eq!(w.torque, Vector3::zeros());
    }

    #[test]
    fn hover_wrench_inverts_to_equal_speeds() {
        let p = VehicleParams::reference();
        let wrench = WrenchB {
            thrust: p.hover_thrust(),
            torque: Vector3::zeros(),
        };
        let (speeds, saturated) = mix_inverse(&wrench, &p);
        assert!(!saturated);
        let expected = (1.5f64 * 9.81 / (4.0 * 1.0e-5)).sqrt();
        for s in speeds.omega {
            assert_relative_eq!(s, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn infeasible_roll_torque_saturates() {
        let p = VehicleParams::reference();
        let wrench = WrenchB {
            thrust: p.hover_thrust(),
            torque: Vector3::new(50.0, 0.0, 0.0),
        };
        let (speeds, saturated) = mix_inverse(&wrench, &p);
        assert!(saturated);
        for s in speeds.omega {
            assert!((0.0..=p.rotor_speed_max()).contains(&s));
        }
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = VehicleParams::reference();
        let d = dynamics_full(
            &RigidBodyState::hover(),
            &RotorSpeeds::uniform(p.hover_speed()),
            &p,
            &Vector3::zeros(),
        );
        assert!(d.velocity.norm() < 1e-12);
        assert!(d.acceleration.norm() < 1e-12);
        assert!(d.attitude_rate.norm() < 1e-12);
        assert!(d.angular_acceleration.norm() < 1e-12);
    }

    #[test]
    fn zero_thrust_free_falls() {
        let p = VehicleParams::reference();
        let d = dynamics_full(
            &RigidBodyState::hover(),
            &RotorSpeeds::uniform(0.0),
            &p,
            &Vector3::zeros(),
        );
        assert_eq!(d.acceleration, Vector3::new(0.0, 0.0, -9.81));
    }

    #[test]
    fn pure_yaw_torque_only_yaws() {
        let p = VehicleParams::reference();
        let wrench = WrenchB {
            thrust: p.hover_thrust(),
            torque: Vector3::new(0.0, 0.0, 0.001),
        };
        let (speeds, saturated) = mix_inverse(&wrench, &p);
        assert!(!saturated);
        let d = dynamics_full(&RigidBodyState::hover(), &speeds, &p, &Vector3::zeros());
        assert_relative_eq!(d.angular_acceleration.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(d.angular_acceleration.y, 0.0, epsilon = 1e-9);
        assert_relative_eq!(d.angular_acceleration.z, 0.001 / 0.01, epsilon = 1e-9);
    }

    #[test]
    fn disturbance_enters_rate_equation() {
        let p = VehicleParams::reference();
        let d = dynamics_full(
            &RigidBodyState::hover(),
            &RotorSpeeds::uniform(p.hover_speed()),
            &p,
            &Vector3::new(0.02, 0.0, 0.0),
        );
        assert_relative_eq!(d.angular_acceleration.x, 0.02 / 0.01, epsilon = 1e-12);
    }

    #[test]
    fn reduced_dynamics_zero_at_origin() {
        let p = VehicleParams::reference();
        let d = dynamics_reduced(&AngleAxis::zero(), &Vector3::zeros(), &Vector3::zeros(), &p);
        assert_eq!(d, Vector6::zeros());
    }

    #[test]
    fn principal_axis_rotation_has_no_gyroscopic_term() {
        let p = VehicleParams::reference();
        let d = dynamics_reduced(
            &AngleAxis::zero(),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::zeros(),
            &p,
        );
        assert_eq!(
            d.fixed_rows::<3>(0).into_owned(),
            Vector3::new(1.0, 0.0, 0.0)
        );
        assert_eq!(d.fixed_rows::<3>(3).into_owned(), Vector3::zeros());
    }

    #[test]
    fn gyroscopic_coupling_hand_case() {
        // ω = (1,1,0), J = diag(0.01,0.02,0.01):
        // (ω×Jω)_z = 1·0.02 − 1·0.01 = 0.01, so ω̇_z = −0.01/0.01 = −1
        let p = VehicleParams::reference();
        let d = dynamics_reduced(
            &AngleAxis::zero(),
            &Vector3::new(1.0, 1.0, 0.0),
            &Vector3::zeros(),
            &p,
        );
        assert_relative_eq!(d[5], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixing_matrix_is_invertible() {
        let p = VehicleParams::reference();
        let det = p.mixing_matrix().determinant();
        assert!(det.abs() > 0.0);
        let round = p.mixing_matrix() * p.mixing_matrix_inv();
        assert_relative_eq!((round - Matrix4::identity()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let j = Matrix3::from_diagonal(&Vector3::new(0.01, 0.02, 0.01));
        let g = Vector3::new(0.0, 0.0, -9.81);
        assert!(VehicleParams::new(-1.0, j, 0.225, 1e-5, 1.7e-7, 1200.0, g).is_err());
        assert!(VehicleParams::new(1.5, j, 0.225, 0.0, 1.7e-7, 1200.0, g).is_err());
        let indefinite = Matrix3::from_diagonal(&Vector3::new(0.01, -0.02, 0.01));
        assert!(VehicleParams::new(1.5, indefinite, 0.225, 1e-5, 1.7e-7, 1200.0, g).is_err());
        let mut asym = j;
        asym[(0, 1)] = 0.005;
        assert!(VehicleParams::new(1.5, asym, 0.225, 1e-5, 1.7e-7, 1200.0, g).is_err());
    }

    #[test]
    fn accepts_coupled_inertia() {
        let mut j = Matrix3::from_diagonal(&Vector3::new(0.01, 0.02, 0.01));
        j[(0, 1)] = 0.001;
        j[(1, 0)] = 0.001;
        let p = VehicleParams::new(
            1.5,
            j,
            0.225,
            1e-5,
            1.7e-7,
            1200.0,
            Vector3::new(0.0, 0.0, -9.81),
        );
        assert!(p.is_ok());
        let p = p.unwrap();
        let round = p.inertia() * p.inertia_inv();
        assert_relative_eq!((round - Matrix3::identity()).norm(), 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn mix_round_trips_on_feasible_speeds(
            s1 in 20.0..1150.0f64, s2 in 20.0..1150.0f64, s3 in 20.0..1150.0f64, s4 in 20.0..1150.0f64,
        ) {
            let p = VehicleParams::reference();
            let speeds = RotorSpeeds::new([s1, s2, s3, s4]);
            let (back, saturated) = mix_inverse(&mix_forward(&speeds, &p), &p);
            prop_assert!(!saturated);
            for i in 0..4 {
                prop_assert!((back.omega[i] - speeds.omega[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn forward_map_is_linear_in_squared_speeds(
            s1 in 0.0..800.0f64, s2 in 0.0..800.0f64, s3 in 0.0..800.0f64, s4 in 0.0..800.0f64,
            c in 0.1..1.4f64,
        ) {
            let p = VehicleParams::reference();
            let speeds = RotorSpeeds::new([s1, s2, s3, s4]);
            let scaled = RotorSpeeds::new([s1 * c.sqrt(), s2 * c.sqrt(), s3 * c.sqrt(), s4 * c.sqrt()]);
            let w = mix_forward(&speeds, &p);
            let ws = mix_forward(&scaled, &p);
            prop_assert!((ws.thrust - c * w.thrust).abs() < 1e-9 * (1.0 + w.thrust.abs()));
            prop_assert!((ws.torque - w.torque * c).norm() < 1e-9 * (1.0 + w.torque.norm()));
        }
    }
}
