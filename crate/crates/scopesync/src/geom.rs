//! Minimal 3-vector and quaternion types.
//!
//! Only the operations the toolkit needs: no general linear algebra. The
//! quaternion storage order is `(w, x, y, z)` and that order is what the
//! on-disk formats use.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot normalize zero or non-finite vector".into(),
            ));
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::sub(self, rhs)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::add(self, rhs)
    }
}

/// Unit quaternion stored as `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Rotation of `angle_rad` about `axis`. The axis does not have to be
    /// normalized; a zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Quat::IDENTITY;
        }
        let half = angle_rad * 0.5;
        let s = half.sin() / n;
        Quat {
            w: half.cos(),
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
        }
    }

    /// Shortest rotation taking `from` onto `to` (both assumed non-zero).
    pub fn between(from: Vec3, to: Vec3) -> Result<Quat> {
        let f = from.normalized()?;
        let t = to.normalized()?;
        let d = f.dot(t);
        if d >= 1.0 - 1e-12 {
            return Ok(Quat::IDENTITY);
        }
        if d <= -1.0 + 1e-12 {
            // 180 degrees: rotate about any axis orthogonal to `f`.
            let ortho = if f.x.abs() < 0.9 {
                Vec3::new(1.0, 0.0, 0.0)
            } else {
                Vec3::new(0.0, 1.0, 0.0)
            };
            let axis = f.cross(ortho).normalized()?;
            return Ok(Quat::from_axis_angle(axis, std::f64::consts::PI));
        }
        let axis = f.cross(t);
        let angle = d.clamp(-1.0, 1.0).acos();
        Ok(Quat::from_axis_angle(axis, angle))
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, other: Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn normalized(self) -> Result<Quat> {
        if !self.is_finite() {
            return Err(Error::InvalidArgument("non-finite quaternion".into()));
        }
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero quaternion".into()));
        }
        let inv = 1.0 / n;
        Ok(Quat::new(
            self.w * inv,
            self.x * inv,
            self.y * inv,
            self.z * inv,
        ))
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Hamilton product `self * other` (apply `other`, then `self`).
    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = q v q*  expanded through the cross-product form.
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v).scale(2.0);
        v.add(t.scale(self.w)).add(u.cross(t))
    }

    /// Row-major 3x3 rotation matrix; assumes the quaternion is unit.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Rotation angle (radians) between the rotations represented by the two
    /// quaternions; insensitive to quaternion sign.
    pub fn rotation_angle_to(self, other: Quat) -> f64 {
        let d = self.dot(other).abs().clamp(0.0, 1.0);
        2.0 * d.acos()
    }
}

const UNIT_TOL: f64 = 1e-6;

/// Spherical linear interpolation between two unit quaternions.
///
/// `q1` is negated when `dot(q0, q1) < 0` so the interpolation takes the
/// shortest arc; as a consequence the result rotation is independent of the
/// sign of either input. For nearly parallel inputs the spherical weights
/// collapse to normalized linear interpolation.
pub fn quat_slerp(q0: Quat, q1: Quat, u: f64) -> Result<Quat> {
    if !q0.is_finite() || !q1.is_finite() || !u.is_finite() {
        return Err(Error::InvalidArgument("non-finite slerp input".into()));
    }
    if (q0.norm() - 1.0).abs() > UNIT_TOL || (q1.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(
            "slerp inputs must be unit quaternions".into(),
        ));
    }

    let mut q1 = q1;
    let mut dot = q0.dot(q1);
    if dot < 0.0 {
        q1 = q1.neg();
        dot = -dot;
    }
    dot = dot.clamp(-1.0, 1.0);

    let q = if dot > 1.0 - 1e-9 {
        // Arc too small for stable sin ratios.
        Quat::new(
            q0.w + (q1.w - q0.w) * u,
            q0.x + (q1.x - q0.x) * u,
            q0.y + (q1.y - q0.y) * u,
            q0.z + (q1.z - q0.z) * u,
        )
    } else {
        let theta = dot.acos();
        let sin_theta = theta.sin();
        let w0 = ((1.0 - u) * theta).sin() / sin_theta;
        let w1 = (u * theta).sin() / sin_theta;
        Quat::new(
            q0.w * w0 + q1.w * w1,
            q0.x * w0 + q1.x * w1,
            q0.y * w0 + q1.y * w1,
            q0.z * w0 + q1.z * w1,
        )
    };
    q.normalized()
}
