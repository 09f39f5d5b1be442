//! Small fixed-size linear algebra and geometric queries.

mod bvh;
mod mesh;

pub use bvh::{Aabb, Bvh, ClosestHit};
pub use mesh::{area_weighted_normals, BoundaryLoop, TriMesh, TubeBuilder};

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Real", from = "[S; 3]", into = "[S; 3]")]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S> From<[S; 3]> for Vec3<S> {
    fn from([x, y, z]: [S; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<S> From<Vec3<S>> for [S; 3] {
    fn from(v: Vec3<S>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<S: Real> Vec3<S> {
    #[inline]
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    #[inline]
    pub fn unit_x() -> Self {
        Self::new(S::one(), S::zero(), S::zero())
    }

    #[inline]
    pub fn unit_y() -> Self {
        Self::new(S::zero(), S::one(), S::zero())
    }

    #[inline]
    pub fn unit_z() -> Self {
        Self::new(S::zero(), S::zero(), S::one())
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(S::lit(v[0]), S::lit(v[1]), S::lit(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> S {
        (self - o).norm()
    }

    #[inline]
    pub fn distance_squared(self, o: Self) -> S {
        (self - o).norm_squared()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn try_normalize(self) -> Option<Self> {
        let n = self.norm();
        if n > S::epsilon() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn normalize(self) -> Self {
        self.try_normalize().unwrap_or_else(Self::zero)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn lerp(self, o: Self, t: S) -> Self {
        self + (o - self) * t
    }

    /// Any unit vector orthogonal to `self` (which must be non-zero).
    pub fn any_orthogonal(self) -> Self {
        let a = if self.x.abs() < S::lit(0.9) { Self::unit_x() } else { Self::unit_y() };
        self.cross(a).normalize()
    }

    pub fn cast<T: Real>(self) -> Vec3<T> {
        Vec3::new(T::lit(self.x.as_f64()), T::lit(self.y.as_f64()), T::lit(self.z.as_f64()))
    }
}

impl<S: Real> Index<usize> for Vec3<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<S: Real> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Real> AddAssign for Vec3<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Real> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Real> SubAssign for Vec3<S> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<S: Real> Mul<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Real> Div<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn div(self, s: S) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<S: Real> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Mat3<S> {
    pub rows: [[S; 3]; 3],
}

impl<S: Real> Mat3<S> {
    pub fn from_rows(rows: [[S; 3]; 3]) -> Self {
        Self { rows }
    }

    pub fn identity() -> Self {
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn rot_x(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[o, z, z], [z, c, -s], [z, s, c]])
    }

    pub fn rot_z(angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self::from_rows([[c, -s, z], [s, c, z], [z, z, o]])
    }

    pub fn column(&self, j: usize) -> Vec3<S> {
        Vec3::new(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Self::from_rows([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    pub fn determinant(&self) -> S {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// Entries in row-major order.
    pub fn flat(&self) -> [S; 9] {
        let r = &self.rows;
        [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]]
    }
}

impl<S: Real> Mul<Vec3<S>> for Mat3<S> {
    type Output = Vec3<S>;
    #[inline]
    fn mul(self, v: Vec3<S>) -> Vec3<S> {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }
}

impl<S: Real> Mul for Mat3<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = [[S::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Self::from_rows(out)
    }
}

/// Oriented plane; `normal` points to the allowed side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Plane<S> {
    pub point: Vec3<S>,
    pub normal: Vec3<S>,
}

impl<S: Real> Plane<S> {
    pub fn new(point: Vec3<S>, normal: Vec3<S>) -> Self {
        Self { point, normal: normal.normalize() }
    }

    pub fn signed_distance(&self, p: Vec3<S>) -> S {
        (p - self.point).dot(self.normal)
    }
}

/// Möller–Trumbore ray/triangle test. Returns the ray parameter of the hit.
pub fn ray_triangle<S: Real>(
    origin: Vec3<S>,
    dir: Vec3<S>,
    a: Vec3<S>,
    b: Vec3<S>,
    c: Vec3<S>,
) -> Option<S> {
    let eps = S::lit(1e-12);
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < eps {
        return None;
    }
    let inv = S::one() / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if u < S::zero() || u > S::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < S::zero() || u + v > S::one() {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t >= S::zero()).then_some(t)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle<S: Real>(p: Vec3<S>, a: Vec3<S>, b: Vec3<S>, c: Vec3<S>) -> Vec3<S> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= S::zero() && d2 <= S::zero() {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= S::zero() && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= S::zero() && d1 >= S::zero() && d3 <= S::zero() {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= S::zero() && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= S::zero() && d2 >= S::zero() && d6 <= S::zero() {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= S::zero() && (d4 - d3) >= S::zero() && (d5 - d6) >= S::zero() {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = S::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<S: Real>(a: S) -> S {
    let two_pi = S::TAU();
    let mut x = a % two_pi;
    if x > S::PI() {
        x -= two_pi;
    } else if x <= -S::PI() {
        x += two_pi;
    }
    x
}
