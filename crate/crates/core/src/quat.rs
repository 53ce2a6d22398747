//! Scalar-first quaternion algebra for attitude representation.

use nalgebra::Vector3;
use std::ops::{Add, Mul};

/// Threshold on `1 - w²` (i.e. sin²(θ/2)) below which the angle-axis
/// conversion switches to its small-angle limit.
const SMALL_ANGLE_SIN_SQ: f64 = 1e-10;

/// Quaternion `w + x·i + y·j + z·k`.
///
/// Unit quaternions represent rotations; `q.rotate_vector(v)` maps a
/// body-frame vector into the inertial frame when `q` is the vehicle
/// attitude. The type itself does not enforce unit norm, since integration
/// produces slightly non-unit values that are renormalized explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Rotation as angle times unit axis, stored as a single 3-vector in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleAxis {
    pub vector: Vector3<f64>,
}

impl AngleAxis {
    pub fn new(vector: Vector3<f64>) -> Self {
        Self { vector }
    }

    pub fn zero() -> Self {
        Self {
            vector: Vector3::zeros(),
        }
    }

    /// Rotation angle in radians (norm of the vector).
    pub fn angle(&self) -> f64 {
        self.vector.norm()
    }
}

impl Quaternion {
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Flips sign so `w >= 0`, picking the short-way representative of the
    /// double cover. The rotation is unchanged.
    pub fn canonicalized(&self) -> Self {
        if self.w < 0.0 {
            Self {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            *self
        }
    }

    /// Relative rotation `self ⊗ other*`, canonicalized. For `self` the
    /// current attitude and `other` the target, this is the rotation carrying
    /// the target onto the current attitude; feeding it to `to_angle_axis`
    /// yields the attitude error vector.
    pub fn error_from(&self, other: &Quaternion) -> Quaternion {
        (*self * other.conjugate()).canonicalized()
    }

    /// Angle-axis vector of the rotation. Canonicalizes first, so the
    /// returned angle is at most π. Below the small-angle threshold the
    /// result is `2·(x, y, z)`, the exact limit of `θ·axis` as θ → 0.
    pub fn to_angle_axis(&self) -> AngleAxis {
        let q = self.canonicalized();
        let w = q.w.clamp(-1.0, 1.0);
        let sin_sq_half = 1.0 - w * w;
        let v = Vector3::new(q.x, q.y, q.z);
        if sin_sq_half < SMALL_ANGLE_SIN_SQ {
            AngleAxis::new(2.0 * v)
        } else {
            let theta = 2.0 * w.acos();
            AngleAxis::new(v * (theta / sin_sq_half.sqrt()))
        }
    }

    pub fn from_angle_axis(aa: &AngleAxis) -> Self {
        let theta = aa.angle();
        let half = 0.5 * theta;
        // sin(θ/2)/θ → 1/2 as θ → 0
        let k = if theta < 1e-12 {
            0.5
        } else {
            half.sin() / theta
        };
        Self {
            w: half.cos(),
            x: k * aa.vector.x,
            y: k * aa.vector.y,
            z: k * aa.vector.z,
        }
    }

    /// Applies the rotation via the sandwich product `q ⊗ (0, v) ⊗ q*`.
    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let p = Quaternion::new(0.0, v.x, v.y, v.z);
        let r = *self * p * self.conjugate();
        Vector3::new(r.x, r.y, r.z)
    }

    /// Intrinsic Z-Y-X Euler angles (roll, pitch, yaw) in radians.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let q = self.normalized();
        let roll = (2.0 * (q.w * q.x + q.y * q.z)).atan2(1.0 - 2.0 * (q.x * q.x + q.y * q.y));
        let pitch = (2.0 * (q.w * q.y - q.z * q.x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (q.w * q.z + q.x * q.y)).atan2(1.0 - 2.0 * (q.y * q.y + q.z * q.z));
        (roll, pitch, yaw)
    }

    /// Quaternion for intrinsic Z-Y-X Euler angles (roll, pitch, yaw) in radians.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (0.5 * roll).sin_cos();
        let (sp, cp) = (0.5 * pitch).sin_cos();
        let (sy, cy) = (0.5 * yaw).sin_cos();
        Self {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, q: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * q.w - self.x * q.x - self.y * q.y - self.z * q.z,
            x: self.w * q.x + self.x * q.w + self.y * q.z - self.z * q.y,
            y: self.w * q.y - self.x * q.z + self.y * q.w + self.z * q.x,
            z: self.w * q.z + self.x * q.y - self.y * q.x + self.z * q.w,
        }
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    fn mul(self, s: f64) -> Quaternion {
        Quaternion {
            w: self.w * s,
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, q: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w + q.w,
            x: self.x + q.x,
            y: self.y + q.y,
            z: self.z + q.z,
        }
    }
}
