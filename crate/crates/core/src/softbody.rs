//! Position-based dynamics vessel model.
//!
//! Every mesh vertex is a particle; every mesh edge is a distance constraint.
//! Free particles are also tethered to their (heartbeat-displaced) rest
//! position by an anchor projection so the vessel stays in place. Tip contact
//! is resolved as a post-pass after the constraint solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{area_weighted_normals, Bvh, TriMesh, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Particle<S> {
    pub position: Vec3<S>,
    pub prev_position: Vec3<S>,
    pub rest_position: Vec3<S>,
    /// 1/g; zero pins the particle.
    pub inverse_mass: S,
}

impl<S: Real> Particle<S> {
    pub fn at_rest(p: Vec3<S>, inverse_mass: S) -> Self {
        Self { position: p, prev_position: p, rest_position: p, inverse_mass }
    }

    pub fn is_pinned(&self) -> bool {
        self.inverse_mass == S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct DistanceConstraint<S> {
    pub i: usize,
    pub j: usize,
    pub rest_length: S,
    pub stiffness: S,
}

impl<S: Real> DistanceConstraint<S> {
    pub fn residual(&self, particles: &[Particle<S>]) -> S {
        (particles[self.i].position.distance(particles[self.j].position) - self.rest_length).abs()
    }
}

/// Sinusoidal wall motion `amplitude * sin(2 pi t / period)`, scaled per
/// particle by `weights` (missing weights count as zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct HeartbeatDriver<S> {
    pub amplitude: Vec3<S>,
    pub period: S,
    pub weights: Vec<S>,
}

impl<S: Real> HeartbeatDriver<S> {
    pub fn off() -> Self {
        Self { amplitude: Vec3::zero(), period: S::one(), weights: Vec::new() }
    }

    /// Weights fall off linearly from 1 at `center` to 0 at `radius`.
    pub fn with_falloff(amplitude: Vec3<S>, period: S, rest: &[Vec3<S>], center: Vec3<S>, radius: S) -> Self {
        let weights = rest
            .iter()
            .map(|p| (S::one() - p.distance(center) / radius).max(S::zero()).min(S::one()))
            .collect();
        Self { amplitude, period, weights }
    }

    /// Unweighted displacement at time `t`.
    pub fn displacement(&self, t: S) -> Result<Vec3<S>> {
        if !(self.period > S::zero()) {
            return Err(Error::config(format!("heartbeat period must be positive, got {}", self.period)));
        }
        Ok(self.amplitude * (S::TAU() * t / self.period).sin())
    }

    pub fn weight(&self, particle: usize) -> S {
        self.weights.get(particle).copied().unwrap_or(S::zero())
    }

    pub fn is_off(&self) -> bool {
        self.amplitude == Vec3::zero() || self.weights.iter().all(|w| *w == S::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactClass {
    None,
    Minor,
    NonMinor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct CollisionReport<S> {
    pub hit: bool,
    pub contact_point: Vec3<S>,
    /// mm
    pub penetration_depth: S,
    /// N
    pub estimated_force: S,
    pub classification: ContactClass,
}

impl<S: Real> CollisionReport<S> {
    pub fn none() -> Self {
        Self {
            hit: false,
            contact_point: Vec3::zero(),
            penetration_depth: S::zero(),
            estimated_force: S::zero(),
            classification: ContactClass::None,
        }
    }

    pub fn is_non_minor(&self) -> bool {
        self.classification == ContactClass::NonMinor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real", default)]
pub struct SoftBodyConfig<S> {
    /// Distance constraint stiffness in [0, 1].
    pub stiffness: S,
    /// Linear penalty converting penetration (mm) to force (N).
    pub contact_stiffness: S,
    /// Contacts above this force are non-minor, N.
    pub force_cap: S,
    pub solver_iterations: usize,
    /// Per-iteration pull toward the rest (plus heartbeat) position, in [0, 1].
    pub anchor_stiffness: S,
    /// Velocity retention per step, in [0, 1].
    pub damping: S,
}

impl<S: Real> Default for SoftBodyConfig<S> {
    fn default() -> Self {
        Self {
            stiffness: S::lit(0.9),
            contact_stiffness: S::lit(2.0),
            force_cap: S::lit(0.8),
            solver_iterations: 10,
            anchor_stiffness: S::lit(0.05),
            damping: S::lit(0.9),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SoftBodyWorld<S> {
    pub particles: Vec<Particle<S>>,
    pub constraints: Vec<DistanceConstraint<S>>,
    pub triangles: Vec<[usize; 3]>,
    pub heartbeat: HeartbeatDriver<S>,
    pub target_particle: usize,
    pub sim_time: S,
    pub config: SoftBodyConfig<S>,
    positions: Vec<Vec3<S>>,
    normals: Vec<Vec3<S>>,
    bvh: Bvh<S>,
}

impl<S: Real> SoftBodyWorld<S> {
    /// Builds a world from raw parts. Positions are taken from the particles.
    pub fn new(
        particles: Vec<Particle<S>>,
        constraints: Vec<DistanceConstraint<S>>,
        triangles: Vec<[usize; 3]>,
        heartbeat: HeartbeatDriver<S>,
        config: SoftBodyConfig<S>,
    ) -> Result<Self> {
        let n = particles.len();
        if triangles.iter().flatten().any(|&i| i >= n) {
            return Err(Error::config("triangle index out of range"));
        }
        if let Some(c) = constraints.iter().find(|c| c.i >= n || c.j >= n || c.i == c.j || !(c.rest_length > S::zero())) {
            return Err(Error::config(format!("invalid constraint {c:?}")));
        }
        if particles.iter().any(|p| !(p.inverse_mass >= S::zero())) {
            return Err(Error::config("negative inverse mass"));
        }
        let positions: Vec<Vec3<S>> = particles.iter().map(|p| p.position).collect();
        let bvh = Bvh::build(&positions, &triangles);
        let mut world = Self {
            particles,
            constraints,
            triangles,
            heartbeat,
            target_particle: 0,
            sim_time: S::zero(),
            config,
            positions,
            normals: Vec::new(),
            bvh,
        };
        world.refresh_surface();
        Ok(world)
    }

    /// Particles on mesh vertices, constraints on mesh edges, boundary loop
    /// vertices pinned.
    pub fn from_mesh(mesh: &TriMesh<S>, config: SoftBodyConfig<S>, heartbeat: HeartbeatDriver<S>) -> Result<Self> {
        let mut pinned = vec![false; mesh.vertices.len()];
        for l in mesh.boundary_loops()? {
            for v in l.vertices {
                pinned[v] = true;
            }
        }
        let particles = mesh
            .vertices
            .iter()
            .zip(&pinned)
            .map(|(&p, &pin)| Particle::at_rest(p, if pin { S::zero() } else { S::one() }))
            .collect();
        let constraints = mesh
            .edges()
            .into_iter()
            .map(|(i, j)| DistanceConstraint {
                i,
                j,
                rest_length: mesh.vertices[i].distance(mesh.vertices[j]),
                stiffness: config.stiffness,
            })
            .collect();
        Self::new(particles, constraints, mesh.triangles.clone(), heartbeat, config)
    }

    pub fn set_target_particle(&mut self, index: usize) -> Result<()> {
        if index >= self.particles.len() {
            return Err(Error::config(format!("target particle {index} out of range")));
        }
        self.target_particle = index;
        Ok(())
    }

    pub fn positions(&self) -> &[Vec3<S>] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3<S>] {
        &self.normals
    }

    pub fn target_position(&self) -> Vec3<S> {
        self.particles[self.target_particle].position
    }

    /// Restores every particle to rest and zeroes the clock.
    pub fn reset(&mut self) {
        for p in &mut self.particles {
            p.position = p.rest_position;
            p.prev_position = p.rest_position;
        }
        self.sim_time = S::zero();
        self.refresh_surface();
    }

    fn refresh_surface(&mut self) {
        for (dst, p) in self.positions.iter_mut().zip(&self.particles) {
            *dst = p.position;
        }
        self.normals = area_weighted_normals(&self.triangles, &self.positions);
        self.bvh.refit(&self.positions, &self.triangles);
    }

    /// One Gauss-Seidel sweep over the distance constraints.
    pub fn project_sweep(&mut self) {
        for c in &self.constraints {
            let (pi, pj) = (self.particles[c.i], self.particles[c.j]);
            let wsum = pi.inverse_mass + pj.inverse_mass;
            if wsum == S::zero() {
                continue;
            }
            let d = pi.position - pj.position;
            let len = d.norm();
            if len == S::zero() {
                continue;
            }
            let err = len - c.rest_length;
            if err == S::zero() {
                continue;
            }
            let corr = d * (c.stiffness * err / (wsum * len));
            if pi.inverse_mass > S::zero() {
                self.particles[c.i].position -= corr * pi.inverse_mass;
            }
            if pj.inverse_mass > S::zero() {
                self.particles[c.j].position += corr * pj.inverse_mass;
            }
        }
    }

    /// Largest absolute constraint violation, mm.
    pub fn max_residual(&self) -> S {
        self.constraints.iter().map(|c| c.residual(&self.particles)).fold(S::zero(), S::max)
    }

    /// Advances the simulation by `dt`: Verlet prediction, constraint
    /// projection with the heartbeat-displaced anchors, surface refresh.
    pub fn step(&mut self, dt: S) -> Result<()> {
        if !(dt > S::zero()) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        self.sim_time += dt;
        let beat = self.heartbeat.displacement(self.sim_time)?;
        let damping = self.config.damping;
        for p in self.particles.iter_mut().filter(|p| !p.is_pinned()) {
            let velocity = (p.position - p.prev_position) * damping;
            p.prev_position = p.position;
            p.position += velocity;
        }
        let k_anchor = self.config.anchor_stiffness;
        for _ in 0..self.config.solver_iterations {
            self.project_sweep();
            if k_anchor > S::zero() {
                for (idx, p) in self.particles.iter_mut().enumerate() {
                    if p.is_pinned() {
                        continue;
                    }
                    let target = p.rest_position + beat * self.heartbeat.weight(idx);
                    p.position += (target - p.position) * k_anchor;
                }
            }
        }
        if let Some(particle) = self.particles.iter().position(|p| !p.position.is_finite()) {
            return Err(Error::SimulationDiverged { particle });
        }
        self.refresh_surface();
        Ok(())
    }

    /// Value-semantics form of [`Self::step`].
    pub fn stepped(&self, dt: S) -> Result<Self> {
        let mut next = self.clone();
        next.step(dt)?;
        Ok(next)
    }

    /// Classifies contact between a spherical tip of `radius` and the
    /// current surface without deforming it.
    pub fn contact_report(&self, tip: Vec3<S>, radius: S) -> CollisionReport<S> {
        let Some(hit) = self.bvh.closest(&self.positions, &self.triangles, tip, radius) else {
            return CollisionReport::none();
        };
        let [a, b, c] = self.triangles[hit.triangle];
        let (pa, pb, pc) = (self.positions[a], self.positions[b], self.positions[c]);
        let outward = (pb - pa).cross(pc - pa);
        let outside = (tip - hit.point).dot(outward) > S::zero();
        let penetration = if outside { radius + hit.distance } else { radius - hit.distance };
        if !outside && penetration <= S::zero() {
            return CollisionReport::none();
        }
        let force = self.config.contact_stiffness * penetration;
        let classification = if outside || force > self.config.force_cap {
            ContactClass::NonMinor
        } else {
            ContactClass::Minor
        };
        CollisionReport { hit: true, contact_point: hit.point, penetration_depth: penetration, estimated_force: force, classification }
    }

    /// Resolves tip contact: free particles within `radius` of the tip are
    /// pushed outward along their vertex normal by their overlap. The report
    /// describes the contact before the push.
    pub fn apply_tip_contact(&mut self, tip: Vec3<S>, radius: S) -> CollisionReport<S> {
        let report = self.contact_report(tip, radius);
        if !report.hit {
            return report;
        }
        let mut touched: Vec<usize> = self
            .bvh
            .triangles_within(&self.positions, &self.triangles, tip, radius)
            .into_iter()
            .flat_map(|t| self.triangles[t])
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let mut moved = false;
        for v in touched {
            let p = &mut self.particles[v];
            if p.is_pinned() {
                continue;
            }
            let overlap = radius - p.position.distance(tip);
            if overlap > S::zero() {
                p.position += self.normals[v] * overlap;
                moved = true;
            }
        }
        if moved {
            self.refresh_surface();
        }
        report
    }

    /// Distance to the nearest surface hit along a unit ray, if within
    /// `max_len`.
    pub fn raycast(&self, origin: Vec3<S>, direction: Vec3<S>, max_len: S) -> Result<Option<S>> {
        if (direction.norm() - S::one()).abs() > S::lit(1e-9) {
            return Err(Error::domain("ray direction must be unit length"));
        }
        if !(max_len > S::zero()) {
            return Err(Error::domain("ray length must be positive"));
        }
        Ok(self.bvh.raycast(&self.positions, &self.triangles, origin, direction, max_len).map(|h| h.0))
    }

    /// Whether the segment `a -> b` passes through the surface.
    pub fn segment_crosses_surface(&self, a: Vec3<S>, b: Vec3<S>) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= S::epsilon() {
            return false;
        }
        self.bvh.raycast(&self.positions, &self.triangles, a, d / len, len).is_some()
    }

    /// Distance from `p` to the surface, searching up to `max_dist`.
    pub fn clearance(&self, p: Vec3<S>, max_dist: S) -> Option<S> {
        self.bvh.closest(&self.positions, &self.triangles, p, max_dist).map(|h| h.distance)
    }

    /// Per-particle displacement from rest.
    pub fn displacements(&self) -> impl Iterator<Item = (usize, Vec3<S>)> + '_ {
        self.particles.iter().enumerate().map(|(i, p)| (i, p.position - p.rest_position))
    }
}
