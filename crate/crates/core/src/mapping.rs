//! Barycentric embedding and inter-body attachments.
//!
//! A [`BarycentricMap`] embeds a point set in a tet mesh; applying it to the
//! mesh's deformed node positions carries the points along. Attachments
//! couple bodies either directly (node to nearest node) or through a proxy
//! point set cloned from the attached body and embedded barycentrically in
//! the host body.

use alloc::vec::Vec;

use crate::mesh::TetMesh;
use crate::{Mat3, Point3, Real, Vec3};

/// Containment tolerance: a point counts as inside an element when all its
/// barycentric weights are at least this.
const INSIDE_TOL: Real = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum MappingError {
    DegenerateTet,
    EmptyMesh,
    /// The source body's topology changed since this map was bound.
    StaleMap { bound_nodes: usize, current_nodes: usize },
    NodeOutOfRange { node: usize, count: usize },
    NoNodes,
    CountMismatch,
}

impl core::fmt::Display for MappingError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MappingError::DegenerateTet => write!(f, "tetrahedron is degenerate"),
            MappingError::EmptyMesh => write!(f, "mesh has no tetrahedra"),
            MappingError::StaleMap {
                bound_nodes,
                current_nodes,
            } => write!(
                f,
                "map bound over {bound_nodes} nodes applied to {current_nodes}; rebind required"
            ),
            MappingError::NodeOutOfRange { node, count } => {
                write!(f, "node {node} out of range ({count} nodes)")
            }
            MappingError::NoNodes => write!(f, "attachment needs at least one node"),
            MappingError::CountMismatch => write!(f, "array lengths disagree"),
        }
    }
}

impl core::error::Error for MappingError {}

/// Barycentric weights of `point` with respect to a tetrahedron, solving the
/// 4x4 affine system; the weights always sum to 1 and reproduce the point.
pub fn barycentric_coords(point: Point3, tet: &[Point3; 4]) -> Result<[Real; 4], MappingError> {
    let dm = Mat3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]);
    let inv = dm.try_inverse().ok_or(MappingError::DegenerateTet)?;
    let local = inv * (point - tet[0]);
    Ok([1.0 - local.x - local.y - local.z, local.x, local.y, local.z])
}

/// One embedded point: its element and weights, with node indices resolved
/// at bind time so application only needs positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryEntry {
    pub tet: usize,
    pub nodes: [usize; 4],
    pub weights: [Real; 4],
}

/// Embedding of a point set in a tet mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap {
    pub entries: Vec<BaryEntry>,
    /// Node count of the source at bind time; used to detect stale maps.
    source_node_count: usize,
}

impl BarycentricMap {
    /// Assembles a map from prebound entries (used by topology propagation).
    pub(crate) fn from_entries(entries: Vec<BaryEntry>, source_node_count: usize) -> Self {
        Self {
            entries,
            source_node_count,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_node_count(&self) -> usize {
        self.source_node_count
    }
}

/// Binds each point to its containing element, or to the element with the
/// nearest centroid when no element contains it (weights clamped to the
/// element and renormalized). Containment ties break to the lowest element
/// index, so binding is deterministic.
pub fn bind_points(points: &[Point3], mesh: &TetMesh) -> Result<BarycentricMap, MappingError> {
    bind_points_filtered(points, mesh, |_| true)
}

/// [`bind_points`] restricted to elements accepted by `allowed`. Used when
/// rebinding after a topology split, where each point must stay within its
/// fragment.
pub fn bind_points_filtered<F>(
    points: &[Point3],
    mesh: &TetMesh,
    allowed: F,
) -> Result<BarycentricMap, MappingError>
where
    F: Fn(usize) -> bool,
{
    let mut any = false;
    let mut entries = Vec::with_capacity(points.len());
    let centroids: Vec<Option<Point3>> = mesh
        .tetrahedra
        .iter()
        .enumerate()
        .map(|(t, tet)| {
            if !allowed(t) {
                return None;
            }
            any = true;
            let sum = tet.iter().fold(Vec3::zeros(), |acc, &v| acc + mesh.vertices[v].coords);
            Some(Point3::from(sum / 4.0))
        })
        .collect();
    if !any {
        return Err(MappingError::EmptyMesh);
    }

    for &p in points {
        let mut chosen: Option<BaryEntry> = None;
        // First containing element in index order wins.
        for (t, tet) in mesh.tetrahedra.iter().enumerate() {
            if !allowed(t) {
                continue;
            }
            let corners = [
                mesh.vertices[tet[0]],
                mesh.vertices[tet[1]],
                mesh.vertices[tet[2]],
                mesh.vertices[tet[3]],
            ];
            let w = barycentric_coords(p, &corners)?;
            if w.iter().all(|&wi| wi >= INSIDE_TOL) {
                chosen = Some(BaryEntry {
                    tet: t,
                    nodes: *tet,
                    weights: w,
                });
                break;
            }
        }
        // Outside: nearest element by centroid distance, weights clamped
        // then renormalized so they still sum to 1.
        if chosen.is_none() {
            let mut best: Option<(Real, usize)> = None;
            for (t, c) in centroids.iter().enumerate() {
                let Some(c) = c else { continue };
                let d2 = (p - c).norm_squared();
                if best.map_or(true, |(bd, _)| d2 < bd) {
                    best = Some((d2, t));
                }
            }
            let (_, t) = best.expect("checked above that some element is allowed");
            let tet = mesh.tetrahedra[t];
            let corners = [
                mesh.vertices[tet[0]],
                mesh.vertices[tet[1]],
                mesh.vertices[tet[2]],
                mesh.vertices[tet[3]],
            ];
            let mut w = barycentric_coords(p, &corners)?;
            let mut sum = 0.0;
            for wi in &mut w {
                *wi = wi.max(0.0);
                sum += *wi;
            }
            if sum == 0.0 {
                w = [0.25; 4];
            } else {
                for wi in &mut w {
                    *wi /= sum;
                }
            }
            chosen = Some(BaryEntry {
                tet: t,
                nodes: tet,
                weights: w,
            });
        }
        entries.push(chosen.expect("every point is bound"));
    }
    Ok(BarycentricMap {
        entries,
        source_node_count: mesh.vertex_count(),
    })
}

/// Evaluates the embedding at the given source node positions. Errors when
/// the map was bound against a different topology (node count changed).
pub fn apply_map(map: &BarycentricMap, source_positions: &[Point3]) -> Result<Vec<Point3>, MappingError> {
    if source_positions.len() != map.source_node_count {
        return Err(MappingError::StaleMap {
            bound_nodes: map.source_node_count,
            current_nodes: source_positions.len(),
        });
    }
    let mut out = Vec::with_capacity(map.entries.len());
    for e in &map.entries {
        let mut p = Vec3::zeros();
        for k in 0..4 {
            p += e.weights[k] * source_positions[e.nodes[k]].coords;
        }
        out.push(Point3::from(p));
    }
    Ok(out)
}

/// In-place variant of [`apply_map`] for per-frame use.
pub fn apply_map_into(
    map: &BarycentricMap,
    source_positions: &[Point3],
    out: &mut Vec<Point3>,
) -> Result<(), MappingError> {
    if source_positions.len() != map.source_node_count {
        return Err(MappingError::StaleMap {
            bound_nodes: map.source_node_count,
            current_nodes: source_positions.len(),
        });
    }
    out.clear();
    for e in &map.entries {
        let mut p = Vec3::zeros();
        for k in 0..4 {
            p += e.weights[k] * source_positions[e.nodes[k]].coords;
        }
        out.push(Point3::from(p));
    }
    Ok(())
}

/// Attachment strength: a hard pin or a spring of finite stiffness.
/// Infinite stiffness is represented as the dedicated pin mode rather than a
/// huge spring constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttachmentStiffness {
    Pin,
    Spring(Real),
}

/// Attachment configuration: which nodes of the attachable body couple, how
/// stiffly, and whether the proxy-based barycentric mode is used.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentConfig {
    pub stiffness: AttachmentStiffness,
    pub node_indices: Vec<usize>,
    pub barycentric: bool,
}

/// Where one coupled node anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorTarget {
    /// Fixed point in space.
    World(Point3),
    /// A node of the other body.
    BodyNode(usize),
    /// A proxy point embedded in the other body; index into the proxy map.
    Proxy(usize),
    /// A point rigidly carried by a frame of the other body, in local
    /// coordinates.
    RigidLocal { frame: usize, local: Point3 },
}

/// One node-to-anchor coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupler {
    pub node: usize,
    pub target: AnchorTarget,
}

/// A built attachment: the couplers plus, in barycentric mode, the proxy
/// embedding into the host body.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub stiffness: AttachmentStiffness,
    pub couplers: Vec<Coupler>,
    pub proxy_map: Option<BarycentricMap>,
}

fn check_nodes(nodes: &[usize], count: usize) -> Result<(), MappingError> {
    if nodes.is_empty() {
        return Err(MappingError::NoNodes);
    }
    for &n in nodes {
        if n >= count {
            return Err(MappingError::NodeOutOfRange { node: n, count });
        }
    }
    Ok(())
}

impl Attachment {
    /// Pins or springs the selected nodes to their current world positions.
    pub fn to_world(
        nodes: &[usize],
        positions: &[Point3],
        stiffness: AttachmentStiffness,
    ) -> Result<Self, MappingError> {
        check_nodes(nodes, positions.len())?;
        let couplers = nodes
            .iter()
            .map(|&n| Coupler {
                node: n,
                target: AnchorTarget::World(positions[n]),
            })
            .collect();
        Ok(Self {
            stiffness,
            couplers,
            proxy_map: None,
        })
    }

    /// Direct mode: each selected node couples to the nearest node of the
    /// other body (ties break to the lowest index).
    pub fn direct(
        nodes_a: &[usize],
        positions_a: &[Point3],
        positions_b: &[Point3],
        stiffness: AttachmentStiffness,
    ) -> Result<Self, MappingError> {
        check_nodes(nodes_a, positions_a.len())?;
        if positions_b.is_empty() {
            return Err(MappingError::NoNodes);
        }
        let couplers = nodes_a
            .iter()
            .map(|&n| {
                let p = positions_a[n];
                let mut best = (Real::INFINITY, 0);
                for (j, q) in positions_b.iter().enumerate() {
                    let d2 = (p - q).norm_squared();
                    if d2 < best.0 {
                        best = (d2, j);
                    }
                }
                Coupler {
                    node: n,
                    target: AnchorTarget::BodyNode(best.1),
                }
            })
            .collect();
        Ok(Self {
            stiffness,
            couplers,
            proxy_map: None,
        })
    }

    /// Barycentric mode: clones the selected nodes as proxy points, embeds
    /// them in the host mesh, and couples each node to its proxy. The proxies
    /// are massless; their coupling forces act on both real bodies through
    /// the embedding weights.
    pub fn barycentric(
        nodes_a: &[usize],
        positions_a: &[Point3],
        host_mesh: &TetMesh,
        stiffness: AttachmentStiffness,
    ) -> Result<Self, MappingError> {
        check_nodes(nodes_a, positions_a.len())?;
        let proxy_points: Vec<Point3> = nodes_a.iter().map(|&n| positions_a[n]).collect();
        let proxy_map = bind_points(&proxy_points, host_mesh)?;
        let couplers = nodes_a
            .iter()
            .enumerate()
            .map(|(i, &n)| Coupler {
                node: n,
                target: AnchorTarget::Proxy(i),
            })
            .collect();
        Ok(Self {
            stiffness,
            couplers,
            proxy_map: Some(proxy_map),
        })
    }

    /// Couples the selected nodes to points rigidly carried by a rigid-body
    /// frame, anchored at the nodes' current positions.
    pub fn to_rigid_frame(
        nodes_a: &[usize],
        positions_a: &[Point3],
        frame: usize,
        frame_pose: &crate::Isometry,
        stiffness: AttachmentStiffness,
    ) -> Result<Self, MappingError> {
        check_nodes(nodes_a, positions_a.len())?;
        let inv = frame_pose.inverse();
        let couplers = nodes_a
            .iter()
            .map(|&n| Coupler {
                node: n,
                target: AnchorTarget::RigidLocal {
                    frame,
                    local: inv * positions_a[n],
                },
            })
            .collect();
        Ok(Self {
            stiffness,
            couplers,
            proxy_map: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_tet;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vertex_gets_unit_weight() {
        let mesh = unit_tet();
        let corners = [
            mesh.vertices[0],
            mesh.vertices[1],
            mesh.vertices[2],
            mesh.vertices[3],
        ];
        let w = barycentric_coords(mesh.vertices[0], &corners).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        for k in 1..4 {
            assert!(w[k].abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_gets_uniform_weights() {
        let mesh = unit_tet();
        let corners = [
            mesh.vertices[0],
            mesh.vertices[1],
            mesh.vertices[2],
            mesh.vertices[3],
        ];
        let centroid = Point3::new(0.25, 0.25, 0.25);
        let w = barycentric_coords(centroid, &corners).unwrap();
        for wi in w {
            assert!((wi - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn random_interior_points_reconstruct() {
        let mesh = unit_tet();
        let corners = [
            mesh.vertices[0],
            mesh.vertices[1],
            mesh.vertices[2],
            mesh.vertices[3],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            // Random convex combination gives an interior point.
            let mut w = [0.0; 4];
            let mut sum = 0.0;
            for wi in &mut w {
                *wi = rng.gen_range(0.01..1.0);
                sum += *wi;
            }
            for wi in &mut w {
                *wi /= sum;
            }
            let p = Point3::from(
                (0..4).fold(Vec3::zeros(), |acc, k| acc + w[k] * corners[k].coords),
            );
            let back = barycentric_coords(p, &corners).unwrap();
            let rebuilt = Point3::from(
                (0..4).fold(Vec3::zeros(), |acc, k| acc + back[k] * corners[k].coords),
            );
            assert!((rebuilt - p).norm() < 1e-12);
            assert!((back.iter().sum::<Real>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_tet_is_an_error() {
        let corners = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ];
        assert_eq!(
            barycentric_coords(Point3::new(0.5, 0.5, 0.5), &corners),
            Err(MappingError::DegenerateTet)
        );
    }

    fn two_tets() -> TetMesh {
        TetMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(1.0, 1.0, 1.0),
            ],
            vec![[0, 1, 2, 3], [1, 2, 3, 4]],
        )
        .unwrap()
    }

    #[test]
    fn centroid_points_bind_to_their_own_elements() {
        let mesh = two_tets();
        let centroids: Vec<Point3> = mesh
            .tetrahedra
            .iter()
            .map(|tet| {
                Point3::from(
                    tet.iter().fold(Vec3::zeros(), |acc, &v| acc + mesh.vertices[v].coords) / 4.0,
                )
            })
            .collect();
        let map = bind_points(&centroids, &mesh).unwrap();
        for (i, e) in map.entries.iter().enumerate() {
            assert_eq!(e.tet, i);
            for w in e.weights {
                assert!((w - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outside_point_binds_to_nearest_with_unit_weight_sum() {
        let mesh = unit_tet();
        let map = bind_points(&[Point3::new(5.0, 5.0, 5.0)], &mesh).unwrap();
        let e = &map.entries[0];
        assert_eq!(e.tet, 0);
        let sum: Real = e.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(e.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn apply_map_is_linear_and_follows_deformation() {
        let mesh = two_tets();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Point3> = (0..50)
            .map(|_| {
                Point3::new(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                )
            })
            .collect();
        let map = bind_points(&points, &mesh).unwrap();
        // Deform the source and compare against per-point direct evaluation.
        let deformed: Vec<Point3> = mesh
            .vertices
            .iter()
            .map(|p| {
                Point3::new(
                    p.x + rng.gen_range(-0.1..0.1),
                    p.y + rng.gen_range(-0.1..0.1),
                    p.z + rng.gen_range(-0.1..0.1),
                )
            })
            .collect();
        let mapped = apply_map(&map, &deformed).unwrap();
        for (e, m) in map.entries.iter().zip(&mapped) {
            let direct = Point3::from((0..4).fold(Vec3::zeros(), |acc, k| {
                acc + e.weights[k] * deformed[e.nodes[k]].coords
            }));
            assert_eq!(*m, direct);
        }
    }

    #[test]
    fn rigid_translation_reproduces_affinely() {
        let mesh = two_tets();
        let points = vec![Point3::new(0.2, 0.2, 0.2), Point3::new(0.7, 0.6, 0.6)];
        let map = bind_points(&points, &mesh).unwrap();
        let t = Vec3::new(0.5, -1.0, 2.0);
        let moved: Vec<Point3> = mesh.vertices.iter().map(|p| p + t).collect();
        let mapped = apply_map(&map, &moved).unwrap();
        let original = apply_map(&map, &mesh.vertices).unwrap();
        for (m, o) in mapped.iter().zip(&original) {
            assert!(((m - o) - t).norm() < 1e-12);
        }
    }

    #[test]
    fn stale_map_is_detected() {
        let mesh = unit_tet();
        let map = bind_points(&[Point3::new(0.2, 0.2, 0.2)], &mesh).unwrap();
        let mut grown = mesh.vertices.clone();
        grown.push(Point3::new(9.0, 9.0, 9.0));
        assert!(matches!(
            apply_map(&map, &grown),
            Err(MappingError::StaleMap { .. })
        ));
    }

    #[test]
    fn world_pin_attachment_records_current_positions() {
        let positions = vec![Point3::new(0.0, 1.0, 0.0), Point3::new(1.0, 1.0, 0.0)];
        let att = Attachment::to_world(&[1], &positions, AttachmentStiffness::Pin).unwrap();
        assert_eq!(att.couplers.len(), 1);
        assert_eq!(
            att.couplers[0].target,
            AnchorTarget::World(Point3::new(1.0, 1.0, 0.0))
        );
    }

    #[test]
    fn direct_attachment_picks_nearest_counterpart() {
        let a = vec![Point3::new(0.0, 0.0, 0.0)];
        let b = vec![Point3::new(2.0, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)];
        let att = Attachment::direct(&[0], &a, &b, AttachmentStiffness::Spring(10.0)).unwrap();
        assert_eq!(att.couplers[0].target, AnchorTarget::BodyNode(1));
    }

    #[test]
    fn barycentric_attachment_builds_proxies() {
        let mesh = unit_tet();
        let positions = vec![Point3::new(0.1, 0.1, 0.1), Point3::new(0.3, 0.2, 0.2)];
        let att =
            Attachment::barycentric(&[0, 1], &positions, &mesh, AttachmentStiffness::Pin).unwrap();
        let proxies = att.proxy_map.as_ref().unwrap();
        assert_eq!(proxies.len(), 2);
        let rebuilt = apply_map(proxies, &mesh.vertices).unwrap();
        for (r, p) in rebuilt.iter().zip(&positions) {
            assert!((r - p).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_node_set_is_rejected() {
        let positions = vec![Point3::origin()];
        assert_eq!(
            Attachment::to_world(&[], &positions, AttachmentStiffness::Pin),
            Err(MappingError::NoNodes)
        );
    }
}
