//! Runtime topology modification: stress-threshold rupture and propagation
//! of splits to mapped visual meshes.
//!
//! Rupture separates interior faces whose two incident elements both exceed
//! the tearing threshold (maximum principal stress). Separation duplicates
//! the shared vertices and reassigns one side; no elements are deleted and
//! no remeshing happens, so mass and FEM assembly stay intact. At most one
//! separation wave runs per physics step.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::dynamics::{FemModel, SoftBodyState};
use crate::mapping::{self, BarycentricMap, MappingError};
use crate::mesh::{MeshError, SurfaceMesh, TetMesh};
use crate::{Point3, Real, Vec3};

/// Dynamic-topology configuration and history of one body.
#[derive(Debug, Clone, Default)]
pub struct DynamicTopologyState {
    pub enabled: bool,
    /// Maximum principal stress (Pa) beyond which faces separate.
    pub tearing_threshold: Real,
    /// Append-only separation log, step indices nondecreasing.
    pub log: Vec<SeparationRecord>,
}

/// One logged topology event.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRecord {
    pub step: u64,
    /// Separated interior faces (vertex triples in pre-split indexing), or
    /// contacted faces for cut registrations.
    pub faces: Vec<[usize; 3]>,
    /// (original vertex, duplicate vertex) pairs created by this event.
    pub duplicated: Vec<(usize, usize)>,
}

impl DynamicTopologyState {
    pub fn new(tearing_threshold: Real) -> Self {
        Self {
            enabled: true,
            tearing_threshold,
            log: Vec::new(),
        }
    }

    /// Records contacts reported by a cut-registration collision model.
    pub fn log_cut_registration(&mut self, step: u64, faces: Vec<[usize; 3]>) {
        self.log.push(SeparationRecord {
            step,
            faces,
            duplicated: Vec::new(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyError {
    /// Rupture ran on a body without dynamic topology enabled.
    NotEnabled,
    /// The visual body is not mapped with the dynamic-topology scheme;
    /// rebuild the mapping with it enabled.
    NonDynamicMapping,
    Mesh(MeshError),
    Mapping(MappingError),
}

impl From<MeshError> for TopologyError {
    fn from(e: MeshError) -> Self {
        TopologyError::Mesh(e)
    }
}

impl From<MappingError> for TopologyError {
    fn from(e: MappingError) -> Self {
        TopologyError::Mapping(e)
    }
}

impl core::fmt::Display for TopologyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TopologyError::NotEnabled => write!(f, "dynamic topology is not enabled on this body"),
            TopologyError::NonDynamicMapping => write!(
                f,
                "visual body is not mapped with the dynamic-topology scheme; configure the mapping with dynamic topology"
            ),
            TopologyError::Mesh(e) => write!(f, "mesh invalid after separation: {e}"),
            TopologyError::Mapping(e) => write!(f, "mapping failed: {e}"),
        }
    }
}

impl core::error::Error for TopologyError {}

/// Maximum principal (tensile) stress of one element at the model's last
/// refreshed configuration.
pub fn element_stress(model: &FemModel, element: usize) -> Real {
    model.max_principal_stress(element)
}

/// Interior faces (sorted vertex triple -> the two incident elements).
fn interior_faces(mesh: &TetMesh) -> BTreeMap<[usize; 3], Vec<usize>> {
    let mut faces: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
    for (t, tet) in mesh.tetrahedra.iter().enumerate() {
        let [a, b, c, d] = *tet;
        for mut tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
            tri.sort_unstable();
            faces.entry(tri).or_default().push(t);
        }
    }
    faces.retain(|_, tets| tets.len() == 2);
    faces
}

/// One separation wave over a FEM body.
///
/// Every interior face whose two incident elements both exceed the tearing
/// threshold is cut. For each vertex of a cut face, the incident elements
/// are grouped into components connected by uncut faces; each extra
/// component receives a duplicate of the vertex (rest and current state),
/// and node masses are re-lumped so total mass is conserved. Returns the log
/// record, or None when nothing separated. The caller must rebuild force
/// models, collision shells and visual mappings afterwards.
pub fn rupture_step(
    rest_mesh: &mut TetMesh,
    state: &mut SoftBodyState,
    model: &FemModel,
    topo: &mut DynamicTopologyState,
    step: u64,
    density: Real,
) -> Result<Option<SeparationRecord>, TopologyError> {
    if !topo.enabled {
        return Err(TopologyError::NotEnabled);
    }
    let stresses: Vec<Real> = (0..model.element_count())
        .map(|e| model.max_principal_stress(e))
        .collect();

    let faces = interior_faces(rest_mesh);
    let mut cut_faces: BTreeSet<[usize; 3]> = BTreeSet::new();
    for (face, tets) in &faces {
        if tets.iter().all(|&t| stresses[t] > topo.tearing_threshold) {
            cut_faces.insert(*face);
        }
    }
    if cut_faces.is_empty() {
        return Ok(None);
    }

    // Vertices touched by any cut face, in ascending order.
    let mut cut_vertices: BTreeSet<usize> = BTreeSet::new();
    for face in &cut_faces {
        cut_vertices.extend(face.iter().copied());
    }

    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (t, tet) in rest_mesh.tetrahedra.iter().enumerate() {
        for &v in tet {
            if cut_vertices.contains(&v) {
                incident.entry(v).or_default().push(t);
            }
        }
    }

    let mut duplicated = Vec::new();
    for (&v, tets) in &incident {
        // Components of the incident elements, adjacent when they share an
        // uncut face containing v.
        let k = tets.len();
        let mut component: Vec<usize> = (0..k).collect();
        // Union-find over the local indices.
        fn find(component: &mut Vec<usize>, i: usize) -> usize {
            let mut root = i;
            while component[root] != root {
                root = component[root];
            }
            let mut cur = i;
            while component[cur] != root {
                let next = component[cur];
                component[cur] = root;
                cur = next;
            }
            root
        }
        for i in 0..k {
            for j in i + 1..k {
                let (ti, tj) = (tets[i], tets[j]);
                if let Some(shared) = shared_face(&rest_mesh.tetrahedra[ti], &rest_mesh.tetrahedra[tj]) {
                    if shared.contains(&v) && !cut_faces.contains(&shared) {
                        let (ri, rj) = (find(&mut component, i), find(&mut component, j));
                        if ri != rj {
                            let lo = ri.min(rj);
                            let hi = ri.max(rj);
                            component[hi] = lo;
                        }
                    }
                }
            }
        }
        // Group local indices by root; the component containing the lowest
        // element id keeps the original vertex.
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..k {
            let root = find(&mut component, i);
            groups.entry(root).or_default().push(i);
        }
        if groups.len() < 2 {
            continue;
        }
        for (gi, (_, members)) in groups.iter().enumerate() {
            if gi == 0 {
                continue; // first (lowest-id) component keeps v
            }
            let new_v = rest_mesh.vertices.len();
            rest_mesh.vertices.push(rest_mesh.vertices[v]);
            let dup_state = state.duplicate_node(v);
            debug_assert_eq!(dup_state, new_v);
            for &local in members {
                let tet = &mut rest_mesh.tetrahedra[tets[local]];
                for idx in tet.iter_mut() {
                    if *idx == v {
                        *idx = new_v;
                    }
                }
            }
            duplicated.push((v, new_v));
        }
    }

    // Re-lump masses so duplicates split their incident-element shares;
    // total mass is conserved by construction.
    let masses = crate::dynamics::lump_fem_masses(rest_mesh, density);
    state.masses = masses;

    // Full validation: the rewrite must not have broken the mesh.
    let validated = TetMesh::new(rest_mesh.vertices.clone(), rest_mesh.tetrahedra.clone())?;
    *rest_mesh = validated;

    let record = SeparationRecord {
        step,
        faces: cut_faces.into_iter().collect(),
        duplicated,
    };
    topo.log.push(record.clone());
    Ok(Some(record))
}

fn shared_face(a: &[usize; 4], b: &[usize; 4]) -> Option<[usize; 3]> {
    let mut shared = [0usize; 3];
    let mut n = 0;
    for &v in a {
        if b.contains(&v) {
            if n == 3 {
                return None; // identical tets; malformed input
            }
            shared[n] = v;
            n += 1;
        }
    }
    (n == 3).then(|| {
        shared.sort_unstable();
        shared
    })
}

/// Visual mesh + embedding rebuilt after physical topology changed.
pub struct PropagatedVisual {
    pub mesh: SurfaceMesh,
    pub map: BarycentricMap,
    /// (original visual vertex, duplicate) pairs created.
    pub duplicated: Vec<(usize, usize)>,
}

/// Propagates a physical split to a mapped visual body.
///
/// Each visual triangle is assigned to the physical fragment nearest its
/// rest centroid; visual vertices whose incident triangles span several
/// fragments are duplicated per fragment, and every vertex is rebound
/// barycentrically within its fragment. `dynamic_mapping` must have been
/// enabled when the visual body was configured.
pub fn propagate_topology(
    physical_rest: &TetMesh,
    visual_rest: &SurfaceMesh,
    dynamic_mapping: bool,
) -> Result<PropagatedVisual, TopologyError> {
    if !dynamic_mapping {
        return Err(TopologyError::NonDynamicMapping);
    }
    let (component_count, tet_component) = physical_rest.connected_components();

    // Fragment of each visual triangle: component of the element with the
    // nearest centroid to the triangle's rest centroid.
    let tet_centroids: Vec<Point3> = physical_rest
        .tetrahedra
        .iter()
        .map(|tet| {
            Point3::from(
                tet.iter()
                    .fold(Vec3::zeros(), |acc, &v| acc + physical_rest.vertices[v].coords)
                    / 4.0,
            )
        })
        .collect();
    let nearest_component = |p: Point3| -> usize {
        let mut best = (Real::INFINITY, 0usize);
        for (t, c) in tet_centroids.iter().enumerate() {
            let d2 = (p - c).norm_squared();
            if d2 < best.0 {
                best = (d2, t);
            }
        }
        tet_component[best.1]
    };
    let tri_component: Vec<usize> = visual_rest
        .triangles
        .iter()
        .map(|tri| {
            let centroid = Point3::from(
                tri.iter()
                    .fold(Vec3::zeros(), |acc, &v| acc + visual_rest.vertices[v].coords)
                    / 3.0,
            );
            nearest_component(centroid)
        })
        .collect();

    // Components seen at each visual vertex, ascending.
    let mut vertex_components: Vec<BTreeSet<usize>> =
        alloc::vec![BTreeSet::new(); visual_rest.vertices.len()];
    for (t, tri) in visual_rest.triangles.iter().enumerate() {
        for &v in tri {
            vertex_components[v].insert(tri_component[t]);
        }
    }

    let mut vertices = visual_rest.vertices.clone();
    let mut triangles = visual_rest.triangles.clone();
    // (vertex, component) -> vertex index to use.
    let mut instance: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut vertex_fragment: Vec<usize> = alloc::vec![0; vertices.len()];
    let mut duplicated = Vec::new();
    for (v, comps) in vertex_components.iter().enumerate() {
        let mut comps = comps.iter().copied();
        let first = comps.next().unwrap_or(0);
        instance.insert((v, first), v);
        vertex_fragment[v] = first;
        for c in comps {
            let dup = vertices.len();
            vertices.push(vertices[v]);
            vertex_fragment.push(c);
            instance.insert((v, c), dup);
            duplicated.push((v, dup));
        }
    }
    for (t, tri) in triangles.iter_mut().enumerate() {
        let c = tri_component[t];
        for v in tri.iter_mut() {
            *v = instance[&(*v, c)];
        }
    }

    let mesh = SurfaceMesh::new(vertices, triangles)?;
    // Rebind every vertex within its fragment.
    let mut entries = Vec::with_capacity(mesh.vertices.len());
    for (v, &fragment) in vertex_fragment.iter().enumerate() {
        let single = mapping::bind_points_filtered(
            core::slice::from_ref(&mesh.vertices[v]),
            physical_rest,
            |t| tet_component[t] == fragment,
        )?;
        entries.push(single.entries[0]);
    }
    let map = BarycentricMap::from_entries(entries, physical_rest.vertex_count());
    let _ = component_count;
    Ok(PropagatedVisual {
        mesh,
        map,
        duplicated,
    })
}
