//! Virtual haptic device: scripted 6-DOF trajectories and the spring
//! coupling wrench that ties a rigid body to the device pose.

use alloc::vec::Vec;

use crate::dynamics::integrate::Wrench;
use crate::dynamics::Twist;
use crate::{Isometry, Point3, Real, UnitQuat};

/// One timed pose of a scripted device trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: Real,
    pub pose: Isometry,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    Empty,
    /// Waypoint times must be strictly increasing.
    NonMonotonicTimes { index: usize },
}

impl core::fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrajectoryError::Empty => write!(f, "trajectory needs at least one waypoint"),
            TrajectoryError::NonMonotonicTimes { index } => {
                write!(f, "waypoint {index} does not increase in time")
            }
        }
    }
}

impl core::error::Error for TrajectoryError {}

/// Piecewise pose script: translation interpolates linearly, orientation
/// spherically. Outside the scripted range the nearest end pose holds.
#[derive(Debug, Clone)]
pub struct ScriptedTrajectory {
    waypoints: Vec<Waypoint>,
}

impl ScriptedTrajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, TrajectoryError> {
        if waypoints.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for i in 1..waypoints.len() {
            if !(waypoints[i].time > waypoints[i - 1].time) {
                return Err(TrajectoryError::NonMonotonicTimes { index: i });
            }
        }
        Ok(Self { waypoints })
    }

    /// Constant pose.
    pub fn hold(pose: Isometry) -> Self {
        Self {
            waypoints: alloc::vec![Waypoint { time: 0.0, pose }],
        }
    }

    pub fn duration(&self) -> Real {
        self.waypoints.last().map(|w| w.time).unwrap_or(0.0)
    }

    pub fn pose_at(&self, t: Real) -> Isometry {
        let first = &self.waypoints[0];
        if t <= first.time {
            return first.pose;
        }
        for pair in self.waypoints.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t <= b.time {
                let s = (t - a.time) / (b.time - a.time);
                let translation = a.pose.translation.vector.lerp(&b.pose.translation.vector, s);
                let rotation = a.pose.rotation.slerp(&b.pose.rotation, s);
                return Isometry::from_parts(translation.into(), rotation);
            }
        }
        self.waypoints.last().unwrap().pose
    }
}

/// Device placement: reference-frame origin and position scale applied to
/// the scripted trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DevicePlacement {
    pub origin: Isometry,
    pub scale: Real,
}

impl Default for DevicePlacement {
    fn default() -> Self {
        Self {
            origin: Isometry::identity(),
            scale: 1.0,
        }
    }
}

/// Device pose in scene coordinates at time t: origin * scaled trajectory.
/// The scale applies to translations only.
pub fn device_pose(placement: &DevicePlacement, trajectory: &ScriptedTrajectory, t: Real) -> Isometry {
    let raw = trajectory.pose_at(t);
    let scaled = Isometry::from_parts(
        (placement.scale * raw.translation.vector).into(),
        raw.rotation,
    );
    placement.origin * scaled
}

/// Stiffness and damping of the 6-DOF coupling spring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    /// N/m.
    pub linear_stiffness: Real,
    /// N*m/rad.
    pub angular_stiffness: Real,
    /// N*s/m, applied against the body's absolute linear velocity.
    pub linear_damping: Real,
    /// N*m*s/rad, applied against the body's absolute angular velocity.
    pub angular_damping: Real,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            linear_stiffness: 100.0,
            angular_stiffness: 1.0,
            linear_damping: 1.0,
            angular_damping: 0.01,
        }
    }
}

/// Spring-damper wrench pulling a body frame toward the device pose:
/// force = k_lin (p_dev - p_body) - c_lin v, torque = k_ang rotvec(q_dev
/// q_body^-1) - c_ang w.
pub fn coupling_wrench(
    device: &Isometry,
    body: &Isometry,
    body_twist: &Twist,
    params: &CouplingParams,
) -> Wrench {
    let force = params.linear_stiffness * (device.translation.vector - body.translation.vector)
        - params.linear_damping * body_twist.linear;
    let q_err: UnitQuat = device.rotation * body.rotation.inverse();
    let torque =
        params.angular_stiffness * q_err.scaled_axis() - params.angular_damping * body_twist.angular;
    Wrench { force, torque }
}

/// Convenience: device position as a point.
pub fn device_position(pose: &Isometry) -> Point3 {
    Point3::from(pose.translation.vector)
}
