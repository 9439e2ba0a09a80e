//! 1-DOF joint trees driving rigid-body frames, and the prefabricated
//! instrument/endoscope pose math.

use alloc::vec::Vec;
use nalgebra::{Translation3, Unit};

use crate::{Isometry, Real, UnitQuat, Vec3};

/// Joint kind: translation along or rotation about the joint axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Prismatic,
    Revolute,
}

/// One 1-DOF joint between two frames of a rigid body.
#[derive(Debug, Clone)]
pub struct JointConfiguration {
    pub joint_type: JointType,
    /// From the parent frame to the joint origin.
    pub parent_offset: Isometry,
    /// From the joint origin to the child frame.
    pub child_offset: Isometry,
    pub axis: Unit<Vec3>,
    pub parent_index: usize,
    pub child_index: usize,
    /// Optional (lower, upper) joint limits; unbounded by default.
    pub limits: Option<(Real, Real)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArticulationError {
    FrameOutOfRange { frame: usize, count: usize },
    /// A frame is driven by more than one joint.
    DuplicateChild { frame: usize },
    /// The joint graph has a cycle.
    Cycle,
    ValueCountMismatch { joints: usize, values: usize },
    ValueOutOfLimits { joint: usize, value: Real },
    InvalidJawCount(usize),
}

impl core::fmt::Display for ArticulationError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ArticulationError::FrameOutOfRange { frame, count } => {
                write!(f, "joint references frame {frame}, body has {count}")
            }
            ArticulationError::DuplicateChild { frame } => {
                write!(f, "frame {frame} is driven by more than one joint")
            }
            ArticulationError::Cycle => write!(f, "joint graph contains a cycle"),
            ArticulationError::ValueCountMismatch { joints, values } => {
                write!(f, "{values} values for {joints} joints")
            }
            ArticulationError::ValueOutOfLimits { joint, value } => {
                write!(f, "value {value} outside the limits of joint {joint}")
            }
            ArticulationError::InvalidJawCount(n) => {
                write!(f, "articulated instrument supports 1 or 2 jaws, got {n}")
            }
        }
    }
}

impl core::error::Error for ArticulationError {}

/// A validated joint tree over the frames of one rigid body. The body that
/// serves as reference frame (if any) drives the root frames externally.
#[derive(Debug, Clone)]
pub struct Articulation {
    joints: Vec<JointConfiguration>,
    /// Joint evaluation order, parents before children.
    order: Vec<usize>,
    frame_count: usize,
}

impl Articulation {
    /// Builds the tree, rejecting cycles and doubly driven frames.
    pub fn new(joints: Vec<JointConfiguration>, frame_count: usize) -> Result<Self, ArticulationError> {
        let mut driven = alloc::vec![false; frame_count];
        for j in &joints {
            for frame in [j.parent_index, j.child_index] {
                if frame >= frame_count {
                    return Err(ArticulationError::FrameOutOfRange {
                        frame,
                        count: frame_count,
                    });
                }
            }
            if driven[j.child_index] {
                return Err(ArticulationError::DuplicateChild { frame: j.child_index });
            }
            driven[j.child_index] = true;
        }
        // Order joints so parents are evaluated first; a leftover joint
        // whose parent never resolves means a cycle.
        let mut resolved: Vec<bool> = (0..frame_count).map(|f| !driven[f]).collect();
        let mut order = Vec::with_capacity(joints.len());
        let mut placed = alloc::vec![false; joints.len()];
        loop {
            let mut progressed = false;
            for (i, j) in joints.iter().enumerate() {
                if !placed[i] && resolved[j.parent_index] {
                    order.push(i);
                    placed[i] = true;
                    resolved[j.child_index] = true;
                    progressed = true;
                }
            }
            if order.len() == joints.len() {
                break;
            }
            if !progressed {
                return Err(ArticulationError::Cycle);
            }
        }
        Ok(Self {
            joints,
            order,
            frame_count,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointConfiguration] {
        &self.joints
    }

    /// Forward kinematics: child = parent * parent_offset * motion(axis,
    /// value) * child_offset, evaluated down the tree. Frames that are not
    /// driven by any joint keep their entry from `base_frames`.
    pub fn forward_kinematics(
        &self,
        base_frames: &[Isometry],
        values: &[Real],
    ) -> Result<Vec<Isometry>, ArticulationError> {
        if values.len() != self.joints.len() {
            return Err(ArticulationError::ValueCountMismatch {
                joints: self.joints.len(),
                values: values.len(),
            });
        }
        debug_assert_eq!(base_frames.len(), self.frame_count);
        for (i, j) in self.joints.iter().enumerate() {
            if let Some((lo, hi)) = j.limits {
                if values[i] < lo || values[i] > hi {
                    return Err(ArticulationError::ValueOutOfLimits {
                        joint: i,
                        value: values[i],
                    });
                }
            }
        }
        let mut frames = base_frames.to_vec();
        for &ji in &self.order {
            let j = &self.joints[ji];
            let motion = joint_motion(j.joint_type, &j.axis, values[ji]);
            frames[j.child_index] = frames[j.parent_index] * j.parent_offset * motion * j.child_offset;
        }
        Ok(frames)
    }
}

fn joint_motion(kind: JointType, axis: &Unit<Vec3>, value: Real) -> Isometry {
    match kind {
        JointType::Prismatic => Isometry::from_parts(
            Translation3::from(axis.into_inner() * value),
            UnitQuat::identity(),
        ),
        JointType::Revolute => Isometry::from_parts(
            Translation3::identity(),
            UnitQuat::from_axis_angle(axis, value),
        ),
    }
}

/// A rigid endoscopic instrument with a 1-DOF articulated tip carrying one
/// or two jaws. Frame 0 is the shaft; jaws follow. The two-jaw variant
/// drives both jaws symmetrically from one opening value.
#[derive(Debug, Clone)]
pub struct ArticulatedInstrument {
    pub articulation: Articulation,
    jaw_count: usize,
}

/// Geometry of an [`ArticulatedInstrument`].
#[derive(Debug, Clone, Copy)]
pub struct InstrumentConfig {
    pub jaw_count: usize,
    /// Shaft origin to the jaw pivot, along the shaft +z.
    pub shaft_length: Real,
    /// Jaw pivot to the jaw tip frame.
    pub jaw_length: Real,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            jaw_count: 2,
            shaft_length: 0.3,
            jaw_length: 0.02,
        }
    }
}

impl ArticulatedInstrument {
    pub fn new(cfg: InstrumentConfig) -> Result<Self, ArticulationError> {
        if !(1..=2).contains(&cfg.jaw_count) {
            return Err(ArticulationError::InvalidJawCount(cfg.jaw_count));
        }
        let pivot = Isometry::from_parts(
            Translation3::new(0.0, 0.0, cfg.shaft_length),
            UnitQuat::identity(),
        );
        let tip = Isometry::from_parts(
            Translation3::new(0.0, 0.0, cfg.jaw_length),
            UnitQuat::identity(),
        );
        let joints = (0..cfg.jaw_count)
            .map(|k| JointConfiguration {
                joint_type: JointType::Revolute,
                parent_offset: pivot,
                child_offset: tip,
                axis: Vec3::x_axis(),
                parent_index: 0,
                child_index: 1 + k,
                limits: None,
            })
            .collect();
        Ok(Self {
            articulation: Articulation::new(joints, 1 + cfg.jaw_count)?,
            jaw_count: cfg.jaw_count,
        })
    }

    pub fn frame_count(&self) -> usize {
        1 + self.jaw_count
    }

    pub fn jaw_count(&self) -> usize {
        self.jaw_count
    }

    /// Joint values for an opening angle: one jaw follows +angle, the second
    /// mirrors it.
    pub fn joint_values(&self, opening: Real) -> Vec<Real> {
        match self.jaw_count {
            1 => alloc::vec![opening],
            _ => alloc::vec![opening, -opening],
        }
    }

    /// Frames (shaft + jaws) for the given shaft pose and opening angle.
    pub fn frames(&self, shaft: Isometry, opening: Real) -> Vec<Isometry> {
        let mut base = alloc::vec![Isometry::identity(); self.frame_count()];
        base[0] = shaft;
        self.articulation
            .forward_kinematics(&base, &self.joint_values(opening))
            .expect("instrument joints are unbounded")
    }
}

/// Camera pose of an angled endoscope: the camera sits at the scope's distal
/// tip; its view axis is the scope axis (+z of the scope frame) tilted by
/// `inclination`, with the tilt plane rotated by `roll` about the scope
/// axis (right-handed).
pub fn endoscope_view_pose(scope_frame: &Isometry, inclination: Real, roll: Real) -> Isometry {
    let orient = scope_frame.rotation
        * UnitQuat::from_axis_angle(&Vec3::z_axis(), roll)
        * UnitQuat::from_axis_angle(&Vec3::x_axis(), inclination);
    Isometry::from_parts(scope_frame.translation, orient)
}
