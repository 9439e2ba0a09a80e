//! Transform tree for visual entities.
//!
//! Every visual entity (body, camera, light) is a node with a local rigid
//! transform, optionally parented to another node or mapped to a physical
//! body frame. Cycles are rejected when a parent is set, not at evaluation.

use alloc::vec::Vec;

use crate::Isometry;

/// Handle to a node of a [`TransformGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

/// Reference to a frame of a physical body, resolved by the caller when the
/// graph is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BodyFrameRef {
    pub body: usize,
    pub frame: usize,
}

/// What a node hangs off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    /// World-rooted: the node's local transform is its world transform.
    None,
    Node(NodeId),
    /// Mapped to a physical body frame.
    Body(BodyFrameRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformError {
    UnknownNode(usize),
    /// Setting this parent would close a cycle.
    Cycle { node: usize },
    /// The body-frame resolver had no frame for this reference.
    UnresolvedBodyFrame(BodyFrameRef),
}

impl core::fmt::Display for TransformError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TransformError::UnknownNode(n) => write!(f, "unknown transform node {n}"),
            TransformError::Cycle { node } => {
                write!(f, "attaching node {node} here would create a cycle")
            }
            TransformError::UnresolvedBodyFrame(r) => {
                write!(f, "no frame {} on body {}", r.frame, r.body)
            }
        }
    }
}

impl core::error::Error for TransformError {}

struct Node {
    local: Isometry,
    parent: Parent,
}

/// Arena of transform nodes.
#[derive(Default)]
pub struct TransformGraph {
    nodes: Vec<Node>,
}

impl TransformGraph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn add_node(&mut self, local: Isometry, parent: Parent) -> Result<NodeId, TransformError> {
        if let Parent::Node(NodeId(p)) = parent {
            if p >= self.nodes.len() {
                return Err(TransformError::UnknownNode(p));
            }
        }
        self.nodes.push(Node { local, parent });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn set_local(&mut self, node: NodeId, local: Isometry) -> Result<(), TransformError> {
        self.nodes
            .get_mut(node.0)
            .ok_or(TransformError::UnknownNode(node.0))?
            .local = local;
        Ok(())
    }

    /// Re-parents a node, rejecting attachments that would close a cycle.
    pub fn set_parent(&mut self, node: NodeId, parent: Parent) -> Result<(), TransformError> {
        if node.0 >= self.nodes.len() {
            return Err(TransformError::UnknownNode(node.0));
        }
        if let Parent::Node(mut cursor) = parent {
            loop {
                if cursor == node {
                    return Err(TransformError::Cycle { node: node.0 });
                }
                match self.nodes.get(cursor.0).ok_or(TransformError::UnknownNode(cursor.0))?.parent {
                    Parent::Node(next) => cursor = next,
                    _ => break,
                }
            }
        }
        self.nodes[node.0].parent = parent;
        Ok(())
    }

    /// World transform of a node: composition from its root (or mapped body
    /// frame) down to the node. `body_frames` resolves body references to
    /// current physical frames.
    pub fn world_transform<F>(&self, node: NodeId, body_frames: &F) -> Result<Isometry, TransformError>
    where
        F: Fn(BodyFrameRef) -> Option<Isometry>,
    {
        let n = self.nodes.get(node.0).ok_or(TransformError::UnknownNode(node.0))?;
        match n.parent {
            Parent::None => Ok(n.local),
            Parent::Node(p) => Ok(self.world_transform(p, body_frames)? * n.local),
            Parent::Body(r) => {
                let frame = body_frames(r).ok_or(TransformError::UnresolvedBodyFrame(r))?;
                Ok(frame * n.local)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{UnitQuat, Vec3};
    use nalgebra::Translation3;

    fn iso(x: f64, y: f64, z: f64) -> Isometry {
        Isometry::from_parts(Translation3::new(x, y, z), UnitQuat::identity())
    }

    const NO_BODIES: fn(BodyFrameRef) -> Option<Isometry> = |_| None;

    #[test]
    fn unparented_node_is_its_own_world_transform() {
        let mut g = TransformGraph::new();
        let n = g.add_node(iso(1.0, 2.0, 3.0), Parent::None).unwrap();
        let w = g.world_transform(n, &NO_BODIES).unwrap();
        assert_eq!(w.translation.vector, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn identity_child_equals_parent() {
        let mut g = TransformGraph::new();
        let parent = g.add_node(iso(5.0, 0.0, 0.0), Parent::None).unwrap();
        let child = g.add_node(Isometry::identity(), Parent::Node(parent)).unwrap();
        let w = g.world_transform(child, &NO_BODIES).unwrap();
        assert_eq!(w.translation.vector, Vec3::new(5.0, 0.0, 0.0));
    }

    #[test]
    fn chain_matches_independent_matrix_composition() {
        let mut g = TransformGraph::new();
        let a_iso = Isometry::from_parts(
            Translation3::new(0.1, -0.2, 0.3),
            UnitQuat::from_euler_angles(0.2, 0.5, -0.1),
        );
        let b_iso = Isometry::from_parts(
            Translation3::new(1.0, 0.0, -0.5),
            UnitQuat::from_euler_angles(-0.7, 0.0, 0.4),
        );
        let c_iso = Isometry::from_parts(
            Translation3::new(0.0, 2.0, 0.0),
            UnitQuat::from_euler_angles(0.0, 1.1, 0.0),
        );
        let a = g.add_node(a_iso, Parent::None).unwrap();
        let b = g.add_node(b_iso, Parent::Node(a)).unwrap();
        let c = g.add_node(c_iso, Parent::Node(b)).unwrap();
        let w = g.world_transform(c, &NO_BODIES).unwrap();
        // 4x4 homogeneous product as the oracle.
        let m = a_iso.to_homogeneous() * b_iso.to_homogeneous() * c_iso.to_homogeneous();
        assert!((w.to_homogeneous() - m).norm() < 1e-12);
    }

    #[test]
    fn camera_and_light_follow_mapped_body() {
        let mut g = TransformGraph::new();
        let body_frame = Isometry::from_parts(
            Translation3::new(0.3, 0.1, -0.2),
            UnitQuat::from_euler_angles(0.4, -0.3, 0.9),
        );
        let camera_local = iso(0.0, 0.0, 0.05);
        let light_local = iso(0.0, 0.01, 0.05);
        let resolver = move |r: BodyFrameRef| (r.body == 7).then_some(body_frame);
        let cam = g
            .add_node(camera_local, Parent::Body(BodyFrameRef { body: 7, frame: 0 }))
            .unwrap();
        let light = g
            .add_node(light_local, Parent::Body(BodyFrameRef { body: 7, frame: 0 }))
            .unwrap();
        let wc = g.world_transform(cam, &resolver).unwrap();
        let wl = g.world_transform(light, &resolver).unwrap();
        assert!((wc.to_homogeneous() - body_frame.to_homogeneous() * camera_local.to_homogeneous()).norm() < 1e-12);
        assert!((wl.to_homogeneous() - body_frame.to_homogeneous() * light_local.to_homogeneous()).norm() < 1e-12);
    }

    #[test]
    fn cycle_rejected_at_attachment_time() {
        let mut g = TransformGraph::new();
        let a = g.add_node(Isometry::identity(), Parent::None).unwrap();
        let b = g.add_node(Isometry::identity(), Parent::Node(a)).unwrap();
        let c = g.add_node(Isometry::identity(), Parent::Node(b)).unwrap();
        let err = g.set_parent(a, Parent::Node(c)).unwrap_err();
        assert_eq!(err, TransformError::Cycle { node: a.0 });
    }
}
