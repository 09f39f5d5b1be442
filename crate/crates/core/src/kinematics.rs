//! Catheter tip agent: pose parameterisation, the per-step bend bound, and
//! follow-the-leader propagation of the catheter body.
//!
//! The tip frame's `y` axis is the insertion direction. Orientation is stored
//! as the two bend angles `(alpha, gamma)` about the tip `x` and `z` axes and
//! the rotation is `Rz(gamma) * Rx(alpha)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct TipPose<S> {
    pub position: Vec3<S>,
    pub alpha: S,
    pub gamma: S,
}

impl<S: Real> TipPose<S> {
    pub fn new(position: Vec3<S>, alpha: S, gamma: S) -> Self {
        Self { position, alpha, gamma }
    }

    pub fn at(position: Vec3<S>) -> Self {
        Self::new(position, S::zero(), S::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.alpha.is_finite() && self.gamma.is_finite()
    }

    pub fn rotation(&self) -> Mat3<S> {
        Mat3::rot_z(self.gamma) * Mat3::rot_x(self.alpha)
    }

    /// Insertion direction (the tip frame's `y` axis) in world coordinates.
    pub fn heading(&self) -> Vec3<S> {
        self.rotation().column(1)
    }
}

/// Homogeneous tip configuration `[R t; 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct HomogeneousConfig<S> {
    pub rotation: Mat3<S>,
    pub translation: Vec3<S>,
}

impl<S: Real> HomogeneousConfig<S> {
    pub fn matrix(&self) -> [[S; 4]; 4] {
        let r = &self.rotation.rows;
        let t = self.translation;
        let (z, o) = (S::zero(), S::one());
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [z, z, z, o],
        ]
    }

    /// Maps a point from the tip frame to the world frame.
    pub fn transform_point(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation * p + self.translation
    }
}

/// Bend increments about the tip `x` and `z` axes plus insertion length.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Action<S> {
    pub alpha: S,
    pub gamma: S,
    pub insertion: S,
}

impl<S: Real> Action<S> {
    pub fn new(alpha: S, gamma: S, insertion: S) -> Self {
        Self { alpha, gamma, insertion }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real", default)]
pub struct CatheterSpec<S> {
    /// Steerable distal segment length, mm.
    pub segment_length: S,
    /// Maximum bending angle, rad.
    pub theta_max: S,
    /// mm
    pub outer_diameter: S,
    /// Maximum insertion speed, mm/s.
    pub v_max: S,
    /// Control period, s.
    pub dt: S,
}

impl<S: Real> Default for CatheterSpec<S> {
    fn default() -> Self {
        Self {
            segment_length: S::lit(50.0),
            theta_max: S::FRAC_PI_2(),
            outer_diameter: S::lit(7.0),
            v_max: S::lit(5.0),
            dt: S::lit(0.1),
        }
    }
}

impl<S: Real> CatheterSpec<S> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.segment_length > S::zero()
            && self.theta_max > S::zero()
            && self.theta_max <= S::PI()
            && self.v_max > S::zero()
            && self.dt > S::zero()
            && self.outer_diameter > S::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid catheter spec {self:?}")))
        }
    }

    /// Largest insertion allowed in one control period.
    pub fn max_step(&self) -> S {
        self.v_max * self.dt
    }

    pub fn radius(&self) -> S {
        self.outer_diameter * S::lit(0.5)
    }

    /// Copy of this spec with a different bend limit (used by the curriculum).
    pub fn with_theta_max(&self, theta_max: S) -> Self {
        Self { theta_max, ..*self }
    }
}

/// Per-step bend bound `theta_max * dl / L`, saturated at `theta_max`.
pub fn max_bend_at_step<S: Real>(spec: &CatheterSpec<S>, insertion: S) -> Result<S> {
    if !(insertion >= S::zero()) {
        return Err(Error::domain(format!("insertion must be non-negative, got {insertion}")));
    }
    Ok((spec.theta_max * insertion / spec.segment_length).min(spec.theta_max))
}

fn finite_or_zero<S: Real>(x: S) -> S {
    if x.is_finite() {
        x
    } else {
        S::zero()
    }
}

/// Projects an action onto the feasible set: insertion into
/// `[0, v_max * dt]`, then both bends into the bound at that insertion.
pub fn clamp_action<S: Real>(spec: &CatheterSpec<S>, a: &Action<S>) -> Action<S> {
    let insertion = finite_or_zero(a.insertion).max(S::zero()).min(spec.max_step());
    let bound = max_bend_at_step(spec, insertion).unwrap_or(S::zero());
    Action {
        alpha: finite_or_zero(a.alpha).max(-bound).min(bound),
        gamma: finite_or_zero(a.gamma).max(-bound).min(bound),
        insertion,
    }
}

fn bend_tolerance<S: Real>(bound: S) -> S {
    S::lit(1e-12) + bound * S::epsilon() * S::lit(4.0)
}

/// Advances the tip: bend increments are added to the orientation angles
/// (each saturated at the spec's `theta_max`), then the tip moves `insertion`
/// along the new heading.
pub fn apply_action<S: Real>(spec: &CatheterSpec<S>, pose: &TipPose<S>, a: &Action<S>) -> Result<TipPose<S>> {
    if !pose.is_finite() {
        return Err(Error::InvalidPose(format!("{pose:?}")));
    }
    let insertion_ok = a.insertion >= S::zero() && a.insertion <= spec.max_step() + bend_tolerance(spec.max_step());
    let bound = max_bend_at_step(spec, a.insertion.max(S::zero()))?;
    let tol = bend_tolerance(bound);
    if !insertion_ok || !(a.alpha.abs() <= bound + tol) || !(a.gamma.abs() <= bound + tol) {
        return Err(Error::Contract(format!("action {a:?} exceeds the bend/insertion bound")));
    }
    Ok(advance(spec, pose, a.alpha, a.gamma, a.insertion))
}

/// Teleoperation variant that allows signed insertion (retraction). The bend
/// bound uses the magnitude of the insertion.
pub fn clamp_signed_action<S: Real>(spec: &CatheterSpec<S>, a: &Action<S>) -> Action<S> {
    let step = spec.max_step();
    let insertion = finite_or_zero(a.insertion).max(-step).min(step);
    let bound = max_bend_at_step(spec, insertion.abs()).unwrap_or(S::zero());
    Action {
        alpha: finite_or_zero(a.alpha).max(-bound).min(bound),
        gamma: finite_or_zero(a.gamma).max(-bound).min(bound),
        insertion,
    }
}

/// Applies a signed action produced by [`clamp_signed_action`].
pub fn apply_signed_action<S: Real>(spec: &CatheterSpec<S>, pose: &TipPose<S>, a: &Action<S>) -> Result<TipPose<S>> {
    if !pose.is_finite() {
        return Err(Error::InvalidPose(format!("{pose:?}")));
    }
    let clamped = clamp_signed_action(spec, a);
    if clamped != *a {
        return Err(Error::Contract(format!("action {a:?} exceeds the bend/insertion bound")));
    }
    Ok(advance(spec, pose, a.alpha, a.gamma, a.insertion))
}

fn advance<S: Real>(spec: &CatheterSpec<S>, pose: &TipPose<S>, d_alpha: S, d_gamma: S, insertion: S) -> TipPose<S> {
    let limit = spec.theta_max;
    let alpha = (pose.alpha + d_alpha).max(-limit).min(limit);
    let gamma = (pose.gamma + d_gamma).max(-limit).min(limit);
    let mut next = TipPose::new(pose.position, alpha, gamma);
    next.position = pose.position + next.heading() * insertion;
    next
}

pub fn pose_to_matrix<S: Real>(pose: &TipPose<S>) -> Result<HomogeneousConfig<S>> {
    if !pose.is_finite() {
        return Err(Error::InvalidPose(format!("{pose:?}")));
    }
    Ok(HomogeneousConfig { rotation: pose.rotation(), translation: pose.position })
}

/// Follow-the-leader body: the catheter behind the tip occupies the tip's
/// previous poses. Oldest pose first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct CatheterBody<S> {
    pub history: VecDeque<TipPose<S>>,
    pub max_points: usize,
}

impl<S: Real> CatheterBody<S> {
    pub fn new(max_points: usize) -> Self {
        Self { history: VecDeque::with_capacity(max_points.min(4096)), max_points: max_points.max(1) }
    }

    pub fn push(&mut self, tip: TipPose<S>) {
        self.history.push_back(tip);
        while self.history.len() > self.max_points {
            self.history.pop_front();
        }
    }

    /// Value-semantics form of [`Self::push`].
    pub fn propagate(&self, tip: TipPose<S>) -> Self {
        let mut next = self.clone();
        next.push(tip);
        next
    }

    pub fn tip(&self) -> Option<&TipPose<S>> {
        self.history.back()
    }

    pub fn polyline(&self) -> Vec<Vec3<S>> {
        self.history.iter().map(|p| p.position).collect()
    }

    pub fn arc_length(&self) -> S {
        self.history
            .iter()
            .zip(self.history.iter().skip(1))
            .map(|(a, b)| a.position.distance(b.position))
            .sum()
    }
}
