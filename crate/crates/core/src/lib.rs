//! Catheter navigation simulator and demonstration-guided policy learner.
//!
//! Geometry, kinematics, the soft-body model, the neural network layer and
//! the path metrics are generic over the scalar type (`f32` or `f64`); the
//! environment and training loop run in `f64`.

pub mod demonstrations;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod learner;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod softbody;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3d = geometry::Vec3<f64>;
pub type Mat3d = geometry::Mat3<f64>;
pub type TriMeshF64 = geometry::TriMesh<f64>;
pub type TipPoseF64 = kinematics::TipPose<f64>;
pub type ActionF64 = kinematics::Action<f64>;
pub type CatheterSpecF64 = kinematics::CatheterSpec<f64>;
pub type SoftBodyWorldF64 = softbody::SoftBodyWorld<f64>;
pub type SoftBodyWorldF32 = softbody::SoftBodyWorld<f32>;
pub type MlpF64 = nn::Mlp<f64>;
pub type MlpF32 = nn::Mlp<f32>;
