//! Free-space description of a scenario: guidance centerline, start poses,
//! target sampling region and the lumen openings.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::centerline::Opening;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::TipPose;
use crate::softbody::SoftBodyWorld;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRegion {
    pub center: Vec3<f64>,
    /// mm
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spaces {
    pub centerline: Vec<Vec3<f64>>,
    pub target_region: TargetRegion,
    pub start_poses: Vec<TipPose<f64>>,
    /// Every open end; crossing any of them outward counts as exiting.
    pub openings: Vec<Opening>,
    /// Normalizer for the tip-target distance, mm.
    pub d_max: f64,
    /// Free particles inside the target region; targets snap to these.
    candidates: Vec<usize>,
}

impl Spaces {
    pub fn new(
        centerline: Vec<Vec3<f64>>,
        target_region: TargetRegion,
        start_poses: Vec<TipPose<f64>>,
        openings: Vec<Opening>,
        world: &SoftBodyWorld<f64>,
    ) -> Result<Self> {
        if start_poses.is_empty() {
            return Err(Error::config("at least one start pose is required"));
        }
        if centerline.is_empty() {
            return Err(Error::config("centerline is empty"));
        }
        if !(target_region.radius >= 0.0) {
            return Err(Error::config("target radius must be non-negative"));
        }
        let candidates = target_candidates(world, &target_region)?;
        let d_max = centerline
            .iter()
            .chain(start_poses.iter().map(|p| &p.position))
            .map(|p| p.distance(target_region.center) + target_region.radius)
            .fold(0.0, f64::max);
        Ok(Self { centerline, target_region, start_poses, openings, d_max, candidates })
    }

    pub fn target_candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Uniform sample in the target sphere snapped to the nearest candidate
    /// particle.
    pub fn sample_target<R: Rng + ?Sized>(&self, world: &SoftBodyWorld<f64>, rng: &mut R) -> usize {
        let r = self.target_region.radius;
        let dir = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
            .try_normalize()
            .unwrap_or(Vec3::unit_x());
        let radius = r * rng.random::<f64>().cbrt();
        let p = self.target_region.center + dir * radius;
        let rest = |i: usize| world.particles[i].rest_position;
        *self
            .candidates
            .iter()
            .min_by(|&&a, &&b| rest(a).distance_squared(p).total_cmp(&rest(b).distance_squared(p)))
            .expect("candidates checked non-empty")
    }
}

fn target_candidates(world: &SoftBodyWorld<f64>, region: &TargetRegion) -> Result<Vec<usize>> {
    let free = world.particles.iter().enumerate().filter(|(_, p)| !p.is_pinned());
    let candidates: Vec<usize> = if region.radius == 0.0 {
        free.min_by(|a, b| {
            a.1.rest_position
                .distance_squared(region.center)
                .total_cmp(&b.1.rest_position.distance_squared(region.center))
        })
        .map(|(i, _)| vec![i])
        .unwrap_or_default()
    } else {
        free.filter(|(_, p)| p.rest_position.distance(region.center) <= region.radius).map(|(i, _)| i).collect()
    };
    if candidates.is_empty() {
        return Err(Error::config(format!("no free particle inside the target region {region:?}")));
    }
    Ok(candidates)
}
