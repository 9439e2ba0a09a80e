//! Core algorithms for a headless real-time deformable/rigid body simulator.
//!
//! This crate is `no_std` (`alloc` required) and holds everything that is pure
//! computation: mesh topology and queries, force models and integrators,
//! linear solvers, proximity collision, barycentric embedding, runtime
//! topology modification, articulation kinematics, transform trees, Loop
//! subdivision and the slack-clamped timestep rule. File formats, threads,
//! wall clocks and the CLI live in the companion `tetsim` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod articulation;
pub mod checksum;
pub mod collision;
pub mod coupling;
pub mod dynamics;
pub mod event;
pub mod mapping;
pub mod mesh;
pub mod schedule;
pub mod subdivide;
pub mod topology;
pub mod transform;

pub use nalgebra;

/// Scalar type used throughout the simulation.
pub type Real = f64;
/// 3D vector of [`Real`].
pub type Vec3 = nalgebra::Vector3<Real>;
/// 3D point of [`Real`].
pub type Point3 = nalgebra::Point3<Real>;
/// 3x3 matrix of [`Real`].
pub type Mat3 = nalgebra::Matrix3<Real>;
/// Unit quaternion orientation.
pub type UnitQuat = nalgebra::UnitQuaternion<Real>;
/// Rigid transform (rotation + translation).
pub type Isometry = nalgebra::Isometry3<Real>;
