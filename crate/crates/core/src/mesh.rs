//! Triangle surface meshes and tetrahedral volume meshes.
//!
//! Meshes are immutable after construction; runtime topology changes go
//! through [`crate::topology`], which rebuilds them through the same
//! validating constructors.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::{Point3, Real, Vec3};

/// Index range / degeneracy problems detected while validating a mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshError {
    /// A triangle or tetrahedron references a vertex that does not exist.
    IndexOutOfRange {
        element: usize,
        vertex_index: usize,
        vertex_count: usize,
    },
    /// A triangle repeats a vertex index.
    DegenerateTriangle { triangle: usize, indices: [usize; 3] },
    /// A tetrahedron has (numerically) zero volume.
    ZeroVolumeTet { tet: usize },
    /// The mesh has no elements where at least one is required.
    Empty,
}

impl core::fmt::Display for MeshError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MeshError::IndexOutOfRange {
                element,
                vertex_index,
                vertex_count,
            } => write!(
                f,
                "element {element} references vertex {vertex_index} but the mesh has {vertex_count} vertices"
            ),
            MeshError::DegenerateTriangle { triangle, indices } => {
                write!(f, "triangle {triangle} repeats a vertex index: {indices:?}")
            }
            MeshError::ZeroVolumeTet { tet } => write!(f, "tetrahedron {tet} has zero volume"),
            MeshError::Empty => write!(f, "mesh has no elements"),
        }
    }
}

impl core::error::Error for MeshError {}

/// Triangulated surface. Used for collision shells, visual bodies and
/// boundary extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-vertex unit normals, if computed.
    pub normals: Option<Vec<Vec3>>,
}

impl SurfaceMesh {
    /// Builds a surface mesh, validating index ranges and rejecting
    /// triangles that repeat a vertex.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        element: t,
                        vertex_index: v,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle {
                    triangle: t,
                    indices: *tri,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
            normals: None,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Signed volume enclosed by the surface (divergence theorem). Only
    /// meaningful for closed, outward-oriented surfaces.
    pub fn enclosed_volume(&self) -> Real {
        let mut six_v = 0.0;
        for tri in &self.triangles {
            let a = self.vertices[tri[0]].coords;
            let b = self.vertices[tri[1]].coords;
            let c = self.vertices[tri[2]].coords;
            six_v += a.dot(&b.cross(&c));
        }
        six_v / 6.0
    }

    /// Drops vertices not referenced by any triangle and remaps indices.
    /// Returns the compacted mesh and, for each new vertex, the index it had
    /// in `self`.
    pub fn compact(&self) -> (SurfaceMesh, Vec<usize>) {
        let mut old_of_new: Vec<usize> = Vec::new();
        {
            let mut seen = alloc::vec![false; self.vertices.len()];
            for tri in &self.triangles {
                for &v in tri {
                    if !seen[v] {
                        seen[v] = true;
                        old_of_new.push(v);
                    }
                }
            }
        }
        // Ascending old-index order keeps the output independent of triangle
        // ordering.
        old_of_new.sort_unstable();
        let remap: BTreeMap<usize, usize> = old_of_new
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let vertices = old_of_new.iter().map(|&v| self.vertices[v]).collect();
        let triangles = self
            .triangles
            .iter()
            .map(|tri| [remap[&tri[0]], remap[&tri[1]], remap[&tri[2]]])
            .collect();
        (
            SurfaceMesh {
                vertices,
                triangles,
                normals: None,
            },
            old_of_new,
        )
    }

    /// True when every vertex is referenced by at least one triangle.
    pub fn fully_referenced(&self) -> bool {
        let mut used = alloc::vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        used.iter().all(|&u| u)
    }
}

/// Area-weighted per-vertex unit normals for the given positions and
/// connectivity. Vertices without incident triangles get a zero normal.
pub fn vertex_normals(positions: &[Point3], triangles: &[[usize; 3]]) -> Vec<Vec3> {
    let mut normals = alloc::vec![Vec3::zeros(); positions.len()];
    for tri in triangles {
        let a = positions[tri[0]];
        let b = positions[tri[1]];
        let c = positions[tri[2]];
        // Cross product length is twice the area, so this is area weighting.
        let n = (b - a).cross(&(c - a));
        for &v in tri {
            normals[v] += n;
        }
    }
    for n in &mut normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    normals
}

/// Tetrahedral volume mesh with per-element rest volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Point3>,
    pub tetrahedra: Vec<[usize; 4]>,
    /// Rest volume of each element, always positive.
    pub rest_volumes: Vec<Real>,
}

/// Signed volume of the tetrahedron (a, b, c, d).
pub fn tet_volume(a: Point3, b: Point3, c: Point3, d: Point3) -> Real {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

impl TetMesh {
    /// Builds a tet mesh. Negatively oriented elements are silently fixed by
    /// swapping two indices; elements with numerically zero volume are
    /// rejected.
    pub fn new(vertices: Vec<Point3>, mut tetrahedra: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let mut scale: Real = 0.0;
        for (t, tet) in tetrahedra.iter().enumerate() {
            for &v in tet {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        element: t,
                        vertex_index: v,
                        vertex_count: vertices.len(),
                    });
                }
            }
            for i in 0..4 {
                for j in i + 1..4 {
                    scale = scale.max((vertices[tet[i]] - vertices[tet[j]]).norm());
                }
            }
        }
        let vol_floor = Real::EPSILON * scale * scale * scale;
        let mut rest_volumes = Vec::with_capacity(tetrahedra.len());
        for (t, tet) in tetrahedra.iter_mut().enumerate() {
            let mut vol = tet_volume(
                vertices[tet[0]],
                vertices[tet[1]],
                vertices[tet[2]],
                vertices[tet[3]],
            );
            if vol < 0.0 {
                tet.swap(2, 3);
                vol = -vol;
            }
            if vol <= vol_floor {
                return Err(MeshError::ZeroVolumeTet { tet: t });
            }
            rest_volumes.push(vol);
        }
        Ok(Self {
            vertices,
            tetrahedra,
            rest_volumes,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tetrahedra.len()
    }

    pub fn total_volume(&self) -> Real {
        self.rest_volumes.iter().sum()
    }

    /// Unique edges over all tetrahedra, each as (low, high) vertex indices.
    pub fn unique_edges(&self) -> Vec<(usize, usize)> {
        let mut set = alloc::collections::BTreeSet::new();
        for tet in &self.tetrahedra {
            for i in 0..4 {
                for j in i + 1..4 {
                    let (a, b) = (tet[i].min(tet[j]), tet[i].max(tet[j]));
                    set.insert((a, b));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Faces of the mesh that belong to exactly one tetrahedron, oriented
    /// outward. The result shares this mesh's vertex indexing (the full
    /// vertex array is carried over; interior vertices are simply unused).
    pub fn boundary_surface(&self) -> SurfaceMesh {
        let mut faces: BTreeMap<[usize; 3], (usize, [usize; 3])> = BTreeMap::new();
        for tet in &self.tetrahedra {
            let [a, b, c, d] = *tet;
            // Outward-oriented faces of a positively oriented element.
            for tri in [[a, c, b], [a, b, d], [a, d, c], [b, c, d]] {
                let mut key = tri;
                key.sort_unstable();
                let entry = faces.entry(key).or_insert((0, tri));
                entry.0 += 1;
            }
        }
        let triangles = faces
            .into_values()
            .filter_map(|(count, tri)| (count == 1).then_some(tri))
            .collect();
        SurfaceMesh {
            vertices: self.vertices.clone(),
            triangles,
            normals: None,
        }
    }

    /// Connected components over tetrahedra, where two elements are adjacent
    /// when they share at least one vertex. Returns (component count,
    /// per-element component id).
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let n = self.tet_count();
        let mut vertex_to_tets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (t, tet) in self.tetrahedra.iter().enumerate() {
            for &v in tet {
                vertex_to_tets.entry(v).or_default().push(t);
            }
        }
        let mut component = alloc::vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            stack.push(start);
            component[start] = count;
            while let Some(t) = stack.pop() {
                for &v in &self.tetrahedra[t] {
                    for &other in &vertex_to_tets[&v] {
                        if component[other] == usize::MAX {
                            component[other] = count;
                            stack.push(other);
                        }
                    }
                }
            }
            count += 1;
        }
        (count, component)
    }
}

/// Connected components of a triangle mesh, where triangles sharing a vertex
/// are connected. Returns the component count.
pub fn surface_component_count(triangles: &[[usize; 3]], vertex_count: usize) -> usize {
    let mut vertex_to_tris: Vec<Vec<usize>> = alloc::vec![Vec::new(); vertex_count];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            vertex_to_tris[v].push(t);
        }
    }
    let mut component = alloc::vec![usize::MAX; triangles.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..triangles.len() {
        if component[start] != usize::MAX {
            continue;
        }
        stack.push(start);
        component[start] = count;
        while let Some(t) = stack.pop() {
            for &v in &triangles[t] {
                for &other in &vertex_to_tris[v] {
                    if component[other] == usize::MAX {
                        component[other] = count;
                        stack.push(other);
                    }
                }
            }
        }
        count += 1;
    }
    count
}

/// The canonical unit tetrahedron: origin plus the three unit axes.
/// Rest volume 1/6. Handy in tests.
pub fn unit_tet() -> TetMesh {
    TetMesh::new(
        alloc::vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ],
        alloc::vec![[0, 1, 2, 3]],
    )
    .expect("unit tet is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_tets() -> TetMesh {
        // Two tets glued along the (1,2,3) face.
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
    fn unit_tet_volume() {
        let mesh = unit_tet();
        assert_eq!(mesh.tet_count(), 1);
        assert!((mesh.rest_volumes[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn negative_orientation_is_fixed() {
        let mesh = TetMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 3, 2]], // negatively oriented
        )
        .unwrap();
        assert!(mesh.rest_volumes[0] > 0.0);
        let [a, b, c, d] = mesh.tetrahedra[0];
        assert!(
            tet_volume(
                mesh.vertices[a],
                mesh.vertices[b],
                mesh.vertices[c],
                mesh.vertices[d]
            ) > 0.0
        );
    }

    #[test]
    fn coincident_vertices_rejected() {
        let err = TetMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap_err();
        assert_eq!(err, MeshError::ZeroVolumeTet { tet: 0 });
    }

    #[test]
    fn index_out_of_range_rejected() {
        let err = SurfaceMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 99]],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MeshError::IndexOutOfRange { vertex_index: 99, .. }
        ));
    }

    #[test]
    fn repeated_index_rejected() {
        let err = SurfaceMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::DegenerateTriangle { .. }));
    }

    #[test]
    fn single_tet_boundary_has_four_faces() {
        let surf = unit_tet().boundary_surface();
        assert_eq!(surf.triangle_count(), 4);
    }

    #[test]
    fn glued_tets_boundary_has_six_faces() {
        let surf = two_tets().boundary_surface();
        assert_eq!(surf.triangle_count(), 6);
    }

    #[test]
    fn boundary_is_outward_and_volume_matches() {
        for mesh in [unit_tet(), two_tets()] {
            let surf = mesh.boundary_surface();
            let enclosed = surf.enclosed_volume();
            let total = mesh.total_volume();
            assert!(
                ((enclosed - total) / total).abs() < 1e-9,
                "enclosed {enclosed} vs summed {total}"
            );
        }
    }

    #[test]
    fn boundary_edges_shared_by_two_triangles() {
        let surf = two_tets().boundary_surface();
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &surf.triangles {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edge_count.values().all(|&c| c == 2));
    }

    #[test]
    fn compact_drops_unreferenced_vertices() {
        let surf = two_tets().boundary_surface();
        let (compacted, old_of_new) = surf.compact();
        assert!(compacted.fully_referenced());
        assert_eq!(compacted.vertex_count(), 5);
        for (new, &old) in old_of_new.iter().enumerate() {
            assert_eq!(compacted.vertices[new], surf.vertices[old]);
        }
    }

    #[test]
    fn components_split_and_merged() {
        let mesh = two_tets();
        assert_eq!(mesh.connected_components().0, 1);
        let apart = TetMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(5.0, 0.0, 0.0),
                Point3::new(6.0, 0.0, 0.0),
                Point3::new(5.0, 1.0, 0.0),
                Point3::new(5.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3], [4, 5, 6, 7]],
        )
        .unwrap();
        assert_eq!(apart.connected_components().0, 2);
    }

    #[test]
    fn unique_edges_of_single_tet() {
        assert_eq!(unit_tet().unique_edges().len(), 6);
    }
}
