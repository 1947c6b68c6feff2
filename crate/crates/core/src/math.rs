//! Small planar geometry toolkit shared by the simulator, the reference
//! pipeline and the environment.
//!
//! Coordinates live in the sagittal plane: `x` points forward, `z` up.
//! Angles are counter-clockwise in that plane, in radians.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// Scalar 2D cross product `self.x * o.z - self.z * o.x`.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    /// `w × r` for an angular velocity `w` about the out-of-plane axis.
    #[inline]
    pub fn cross_scalar(w: f64, r: Vec2) -> Vec2 {
        Vec2::new(-w * r.z, w * r.x)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.x.hypot(self.z)
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        (len > 1e-12).then(|| self / len)
    }

    /// Left-hand perpendicular, i.e. rotated by +90°.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.z, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        Rot::new(angle).apply(self)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.z]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.z += o.z;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.z -= o.z;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl MulAssign<f64> for Vec2 {
    #[inline]
    fn mul_assign(&mut self, s: f64) {
        self.x *= s;
        self.z *= s;
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.z / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}

/// A planar rotation stored as its cosine/sine pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot {
    pub c: f64,
    pub s: f64,
}

impl Rot {
    #[inline]
    pub fn new(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { c, s }
    }

    #[inline]
    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.c * v.x - self.s * v.z, self.s * v.x + self.c * v.z)
    }

    #[inline]
    pub fn apply_inverse(self, v: Vec2) -> Vec2 {
        Vec2::new(self.c * v.x + self.s * v.z, -self.s * v.x + self.c * v.z)
    }
}

/// A rigid planar pose (position + heading).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub pos: Vec2,
    pub angle: f64,
}

impl Pose2 {
    pub const fn new(pos: Vec2, angle: f64) -> Self {
        Self { pos, angle }
    }

    /// Maps a point from this pose's local frame into the parent frame.
    #[inline]
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.pos + local.rotate(self.angle)
    }

    /// Maps a parent-frame point into this pose's local frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: Vec2) -> Vec2 {
        Rot::new(self.angle).apply_inverse(p - self.pos)
    }
}

/// Rigid SE(2) transform `p -> R(angle)·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2 {
    pub angle: f64,
    pub translation: Vec2,
}

impl Se2 {
    pub fn new(angle: f64, translation: Vec2) -> Self {
        Self { angle, translation }
    }

    #[inline]
    pub fn apply_point(&self, p: Vec2) -> Vec2 {
        p.rotate(self.angle) + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: Vec2) -> Vec2 {
        v.rotate(self.angle)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already; only an input of exactly π-ish lands
    // on the open end after subtraction.
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Signed shortest rotation taking `from` to `to`, in `(-π, π]`.
///
/// A difference of exactly π resolves to `+π` (positive rotation).
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// Interpolates along the shortest arc from `a` to `b`; result wrapped.
pub fn lerp_angle(a: f64, b: f64, t: f64) -> f64 {
    wrap_angle(a + angle_diff(b, a) * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        for k in -20..=20 {
            let a = k as f64 * 0.7;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} -> {w}");
            assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((a - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn diff_tie_breaks_positive() {
        assert!((angle_diff(PI, 0.0) - PI).abs() < 1e-15);
        assert!((angle_diff(0.0, PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn shortest_arc_midpoint_wraps() {
        let m = lerp_angle(-3.0, 3.0, 0.5);
        assert!((m.abs() - PI).abs() < 1e-9, "{m}");
    }

    #[test]
    fn rotation_by_quarter_turn() {
        let v = Vec2::new(0.1, 0.0).rotate(PI / 2.0);
        assert!(v.x.abs() < 1e-15 && (v.z - 0.1).abs() < 1e-15);
        let back = Rot::new(PI / 2.0).apply_inverse(v);
        assert!((back.x - 0.1).abs() < 1e-15 && back.z.abs() < 1e-15);
    }

    #[test]
    fn pose_round_trip() {
        let pose = Pose2::new(Vec2::new(2.0, 1.0), 0.3);
        let p = Vec2::new(-0.4, 0.7);
        let q = pose.inverse_transform_point(pose.transform_point(p));
        assert!((q - p).length() < 1e-14);
    }
}
