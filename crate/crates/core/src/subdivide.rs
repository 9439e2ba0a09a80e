//! Online Loop subdivision.
//!
//! `build_subdivision` runs the topological refinement once and expresses
//! every refined vertex as a fixed linear stencil over the BASE vertices
//! (levels composed). Per-frame work is then a single sparse
//! stencil-times-positions product in `refresh_positions`, whose operation
//! count is independent of the deformation. Interior rules are Loop's;
//! boundaries use the cubic B-spline curve rules.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use num_traits::Float;

use crate::mesh::SurfaceMesh;
use crate::{Point3, Real, Vec3};

/// Highest supported refinement level.
pub const MAX_LEVEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum SubdivisionError {
    LevelOutOfRange { level: usize, max: usize },
    /// Edges with more than two incident triangles.
    NonManifoldEdges { edges: Vec<(usize, usize)> },
    /// `refresh_positions` called with the wrong base vertex count.
    BaseCountMismatch { expected: usize, got: usize },
}

impl core::fmt::Display for SubdivisionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SubdivisionError::LevelOutOfRange { level, max } => {
                write!(f, "subdivision level {level} outside 0..={max}")
            }
            SubdivisionError::NonManifoldEdges { edges } => {
                write!(f, "non-manifold edges (more than two incident triangles): {edges:?}")
            }
            SubdivisionError::BaseCountMismatch { expected, got } => {
                write!(f, "cache built over {expected} base vertices, got {got}")
            }
        }
    }
}

impl core::error::Error for SubdivisionError {}

/// Refined connectivity plus per-vertex stencils over the base mesh,
/// stored compressed-sparse-row.
#[derive(Debug, Clone)]
pub struct SubdivisionCache {
    level: usize,
    base_vertex_count: usize,
    triangles: Vec<[usize; 3]>,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<Real>,
}

impl SubdivisionCache {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn base_vertex_count(&self) -> usize {
        self.base_vertex_count
    }

    pub fn refined_vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn refined_triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn refined_triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Multiply-accumulate count of one refresh; constant by construction.
    pub fn op_count(&self) -> usize {
        self.weights.len()
    }

    /// Stencil row of one refined vertex.
    pub fn stencil(&self, vertex: usize) -> impl Iterator<Item = (usize, Real)> + '_ {
        let range = self.offsets[vertex]..self.offsets[vertex + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }
}

/// One vertex's stencil while levels are being composed: sparse weights over
/// the base vertices.
type Row = Vec<(usize, Real)>;

fn combine(rows: &[Row], terms: &[(usize, Real)]) -> Row {
    let mut acc: BTreeMap<usize, Real> = BTreeMap::new();
    for &(vertex, coeff) in terms {
        for &(base, w) in &rows[vertex] {
            *acc.entry(base).or_insert(0.0) += coeff * w;
        }
    }
    acc.into_iter().collect()
}

/// Builds the refinement topology and composed stencils for `level` rounds
/// of Loop subdivision.
pub fn build_subdivision(mesh: &SurfaceMesh, level: usize) -> Result<SubdivisionCache, SubdivisionError> {
    if level > MAX_LEVEL {
        return Err(SubdivisionError::LevelOutOfRange {
            level,
            max: MAX_LEVEL,
        });
    }
    let mut triangles = mesh.triangles.clone();
    let mut rows: Vec<Row> = (0..mesh.vertices.len())
        .map(|v| alloc::vec![(v, 1.0)])
        .collect();

    for _ in 0..level {
        (triangles, rows) = subdivide_once(&triangles, rows)?;
    }

    let mut offsets = Vec::with_capacity(rows.len() + 1);
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for row in &rows {
        for &(base, w) in row {
            indices.push(base);
            weights.push(w);
        }
        offsets.push(indices.len());
    }
    Ok(SubdivisionCache {
        level,
        base_vertex_count: mesh.vertices.len(),
        triangles,
        offsets,
        indices,
        weights,
    })
}

struct EdgeInfo {
    /// Incident triangle count.
    count: usize,
    /// Vertices opposite the edge in its incident triangles.
    opposite: [usize; 2],
    /// Refined (odd) vertex index assigned to this edge.
    midpoint: usize,
}

fn subdivide_once(triangles: &[[usize; 3]], rows: Vec<Row>) -> Result<(Vec<[usize; 3]>, Vec<Row>), SubdivisionError> {
    let vertex_count = rows.len();
    let mut edges: BTreeMap<(usize, usize), EdgeInfo> = BTreeMap::new();
    let mut non_manifold = Vec::new();
    for tri in triangles {
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let opposite = tri[(k + 2) % 3];
            let key = (a.min(b), a.max(b));
            let e = edges.entry(key).or_insert(EdgeInfo {
                count: 0,
                opposite: [usize::MAX; 2],
                midpoint: usize::MAX,
            });
            if e.count < 2 {
                e.opposite[e.count] = opposite;
            } else if non_manifold.last() != Some(&key) {
                non_manifold.push(key);
            }
            e.count += 1;
        }
    }
    if !non_manifold.is_empty() {
        return Err(SubdivisionError::NonManifoldEdges { edges: non_manifold });
    }

    // Assign odd vertex ids in sorted edge order.
    for (rank, e) in edges.values_mut().enumerate() {
        e.midpoint = vertex_count + rank;
    }

    // Neighborhoods for the even-vertex rules.
    let mut neighbors: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); vertex_count];
    let mut boundary_neighbors: Vec<Vec<usize>> = alloc::vec![Vec::new(); vertex_count];
    for (&(a, b), e) in &edges {
        neighbors[a].insert(b);
        neighbors[b].insert(a);
        if e.count == 1 {
            boundary_neighbors[a].push(b);
            boundary_neighbors[b].push(a);
        }
    }

    let mut new_rows: Vec<Row> = Vec::with_capacity(vertex_count + edges.len());
    // Even (existing) vertices first, keeping their indices.
    for v in 0..vertex_count {
        let row = if !boundary_neighbors[v].is_empty() {
            if boundary_neighbors[v].len() == 2 {
                // Cubic B-spline boundary rule.
                combine(
                    &rows,
                    &[
                        (v, 0.75),
                        (boundary_neighbors[v][0], 0.125),
                        (boundary_neighbors[v][1], 0.125),
                    ],
                )
            } else {
                // Pinched boundary or dangling fan: hold the vertex.
                rows[v].clone()
            }
        } else {
            let n = neighbors[v].len();
            if n == 0 {
                rows[v].clone()
            } else {
                let nf = n as Real;
                let inner = 0.375 + 0.25 * (core::f64::consts::TAU / nf).cos();
                let beta = (0.625 - inner * inner) / nf;
                let mut terms: Vec<(usize, Real)> = alloc::vec![(v, 1.0 - nf * beta)];
                terms.extend(neighbors[v].iter().map(|&u| (u, beta)));
                combine(&rows, &terms)
            }
        };
        new_rows.push(row);
    }
    // Odd (edge) vertices.
    for (&(a, b), e) in &edges {
        let row = if e.count == 1 {
            combine(&rows, &[(a, 0.5), (b, 0.5)])
        } else {
            combine(
                &rows,
                &[
                    (a, 0.375),
                    (b, 0.375),
                    (e.opposite[0], 0.125),
                    (e.opposite[1], 0.125),
                ],
            )
        };
        debug_assert_eq!(new_rows.len(), e.midpoint);
        new_rows.push(row);
    }

    let midpoint = |a: usize, b: usize| edges[&(a.min(b), a.max(b))].midpoint;
    let mut new_triangles = Vec::with_capacity(triangles.len() * 4);
    for tri in triangles {
        let [v0, v1, v2] = *tri;
        let m01 = midpoint(v0, v1);
        let m12 = midpoint(v1, v2);
        let m20 = midpoint(v2, v0);
        new_triangles.push([v0, m01, m20]);
        new_triangles.push([v1, m12, m01]);
        new_triangles.push([v2, m20, m12]);
        new_triangles.push([m01, m12, m20]);
    }
    Ok((new_triangles, new_rows))
}

/// Applies the cached stencils to base positions, writing the refined
/// positions into `out` (resized on first use, reused afterwards). Returns
/// the number of multiply-accumulates performed.
pub fn refresh_positions(
    cache: &SubdivisionCache,
    base: &[Point3],
    out: &mut Vec<Point3>,
) -> Result<usize, SubdivisionError> {
    if base.len() != cache.base_vertex_count {
        return Err(SubdivisionError::BaseCountMismatch {
            expected: cache.base_vertex_count,
            got: base.len(),
        });
    }
    out.clear();
    out.reserve(cache.refined_vertex_count());
    let mut ops = 0;
    for v in 0..cache.refined_vertex_count() {
        let mut p = Vec3::zeros();
        for k in cache.offsets[v]..cache.offsets[v + 1] {
            p += cache.weights[k] * base[cache.indices[k]].coords;
            ops += 1;
        }
        out.push(Point3::from(p));
    }
    Ok(ops)
}

/// Refined mesh at the cache's level for the given base positions, with
/// fresh area-weighted normals. Convenience for exports and tests.
pub fn refined_mesh(cache: &SubdivisionCache, base: &[Point3]) -> Result<SurfaceMesh, SubdivisionError> {
    let mut positions = Vec::new();
    refresh_positions(cache, base, &mut positions)?;
    let normals = crate::mesh::vertex_normals(&positions, &cache.triangles);
    Ok(SurfaceMesh {
        vertices: positions,
        triangles: cache.triangles.clone(),
        normals: Some(normals),
    })
}
