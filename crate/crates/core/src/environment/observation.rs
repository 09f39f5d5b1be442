//! Agent observation: tip pose, normalized target distance and direction,
//! and a fan of wall-distance rays cast in the tip frame.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::TipPose;
use crate::softbody::SoftBodyWorld;

/// Positions enter the feature vector divided by this length, mm.
pub const POSITION_SCALE: f64 = 100.0;
/// Bumped whenever the layout of [`Observation::features`] changes.
pub const FEATURE_VERSION: u32 = 1;

/// Ray directions expressed in the tip frame (x_A, y_A, z_A); y_A is the
/// heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayFan {
    /// mm
    pub length: f64,
    /// Number of rays on the forward cone.
    pub cone_rays: usize,
    /// Cone half-angle from the heading, radians.
    pub cone_angle: f64,
}

impl Default for RayFan {
    fn default() -> Self {
        Self { length: 30.0, cone_rays: 8, cone_angle: std::f64::consts::FRAC_PI_4 }
    }
}

impl RayFan {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.cone_angle > 0.0 && self.cone_angle < std::f64::consts::PI) {
            return Err(Error::config(format!("invalid ray fan {self:?}")));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        6 + self.cone_rays
    }

    /// Unit directions in the tip frame: the six axis directions, then the
    /// cone rays around +y.
    pub fn local_directions(&self) -> Vec<Vec3<f64>> {
        let mut dirs = vec![
            Vec3::unit_x(),
            -Vec3::unit_x(),
            Vec3::unit_y(),
            -Vec3::unit_y(),
            Vec3::unit_z(),
            -Vec3::unit_z(),
        ];
        let (s, c) = self.cone_angle.sin_cos();
        for k in 0..self.cone_rays {
            let phi = std::f64::consts::TAU * k as f64 / self.cone_rays as f64;
            dirs.push(Vec3::new(s * phi.cos(), c, s * phi.sin()).normalize());
        }
        dirs
    }

    /// Normalized hit distances (1 = nothing within `length`).
    pub fn cast(&self, world: &SoftBodyWorld<f64>, pose: &TipPose<f64>) -> Vec<f64> {
        let rot = pose.rotation();
        self.local_directions()
            .into_iter()
            .map(|d| {
                let dir = (rot * d).normalize();
                match world.raycast(pose.position, dir, self.length) {
                    Ok(Some(t)) => (t / self.length).min(1.0),
                    _ => 1.0,
                }
            })
            .collect()
    }

    /// Hex digest identifying the observation layout this fan produces.
    pub fn schema_hash(&self) -> String {
        let text = format!(
            "features=v{FEATURE_VERSION};dim={};rays={};length={:e};cone={:e}",
            Observation::feature_dim(self.count()),
            self.count(),
            self.length,
            self.cone_angle
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: TipPose<f64>,
    /// Tip-target distance over d_max, in [0, 1].
    pub u: f64,
    /// Target minus tip, mm.
    pub v: Vec3<f64>,
    pub rays: Vec<f64>,
}

impl Observation {
    pub fn build(world: &SoftBodyWorld<f64>, pose: &TipPose<f64>, fan: &RayFan, d_max: f64) -> Self {
        let v = world.target_position() - pose.position;
        let u = if d_max > 0.0 { (v.norm() / d_max).clamp(0.0, 1.0) } else { 0.0 };
        Self { pose: *pose, u, v, rays: fan.cast(world, pose) }
    }

    pub fn feature_dim(rays: usize) -> usize {
        9 + 3 + 1 + 3 + rays
    }

    /// Flat network input: rotation matrix (row-major), scaled position, u,
    /// u times the unit target direction, ray distances.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(Self::feature_dim(self.rays.len()));
        self.write_features(&mut f);
        f
    }

    pub fn write_features(&self, f: &mut Vec<f64>) {
        f.extend_from_slice(&self.pose.rotation().flat());
        f.extend(self.pose.position.to_f64().iter().map(|x| x / POSITION_SCALE));
        f.push(self.u);
        let dir = self.v.try_normalize().unwrap_or(Vec3::zero()) * self.u;
        f.extend_from_slice(&dir.to_f64());
        f.extend_from_slice(&self.rays);
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite() && self.u.is_finite() && self.v.is_finite() && self.rays.iter().all(|r| r.is_finite())
    }
}
