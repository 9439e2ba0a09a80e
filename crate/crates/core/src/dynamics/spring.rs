//! Hookean spring network force model.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::ForceModel;
use crate::{Mat3, Point3, Real, Vec3};

/// One spring between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub nodes: (usize, usize),
    pub rest_length: Real,
}

/// Mass-spring force model over a fixed edge set with uniform stiffness.
#[derive(Debug, Clone)]
pub struct SpringModel {
    edges: Vec<Edge>,
    stiffness: Real,
    // Refreshed per step: current unit direction and length per edge.
    directions: Vec<Vec3>,
    lengths: Vec<Real>,
    degenerate_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpringError {
    NonPositiveRestLength { edge: usize },
    NodeOutOfRange { edge: usize },
}

impl core::fmt::Display for SpringError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpringError::NonPositiveRestLength { edge } => {
                write!(f, "edge {edge} has non-positive rest length")
            }
            SpringError::NodeOutOfRange { edge } => write!(f, "edge {edge} references a missing node"),
        }
    }
}

impl core::error::Error for SpringError {}

impl SpringModel {
    pub fn new(edges: Vec<Edge>, stiffness: Real, node_count: usize) -> Result<Self, SpringError> {
        for (i, e) in edges.iter().enumerate() {
            if !(e.rest_length > 0.0) {
                return Err(SpringError::NonPositiveRestLength { edge: i });
            }
            if e.nodes.0 >= node_count || e.nodes.1 >= node_count {
                return Err(SpringError::NodeOutOfRange { edge: i });
            }
        }
        let n = edges.len();
        Ok(Self {
            edges,
            stiffness,
            directions: alloc::vec![Vec3::zeros(); n],
            lengths: alloc::vec![0.0; n],
            degenerate_edges: 0,
        })
    }

    /// Builds the edge set from the unique edges of a tet mesh, with rest
    /// lengths measured on its rest positions.
    pub fn from_tet_mesh(mesh: &crate::mesh::TetMesh, stiffness: Real) -> Result<Self, SpringError> {
        let edges = mesh
            .unique_edges()
            .into_iter()
            .map(|(a, b)| Edge {
                nodes: (a, b),
                rest_length: (mesh.vertices[b] - mesh.vertices[a]).norm(),
            })
            .collect();
        Self::new(edges, stiffness, mesh.vertex_count())
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of zero-length edges skipped in the last refresh.
    pub fn degenerate_edge_count(&self) -> usize {
        self.degenerate_edges
    }
}

impl ForceModel for SpringModel {
    fn refresh(&mut self, positions: &[Point3]) {
        self.degenerate_edges = 0;
        for (i, e) in self.edges.iter().enumerate() {
            let d = positions[e.nodes.1] - positions[e.nodes.0];
            let len = d.norm();
            if len == 0.0 {
                self.degenerate_edges += 1;
                self.directions[i] = Vec3::zeros();
                self.lengths[i] = 0.0;
            } else {
                self.directions[i] = d / len;
                self.lengths[i] = len;
            }
        }
    }

    fn add_forces(&mut self, _positions: &[Point3], out: &mut [Vec3]) {
        for (i, e) in self.edges.iter().enumerate() {
            let len = self.lengths[i];
            if len == 0.0 {
                continue;
            }
            let f = self.stiffness * (len - e.rest_length) * self.directions[i];
            out[e.nodes.0] += f;
            out[e.nodes.1] -= f;
        }
    }

    fn apply_stiffness(&self, v: &[Real], out: &mut [Real]) {
        for (i, e) in self.edges.iter().enumerate() {
            let len = self.lengths[i];
            if len == 0.0 {
                continue;
            }
            let h = edge_hessian(self.stiffness, e.rest_length, len, &self.directions[i]);
            let (a, b) = e.nodes;
            let va = Vec3::new(v[3 * a], v[3 * a + 1], v[3 * a + 2]);
            let vb = Vec3::new(v[3 * b], v[3 * b + 1], v[3 * b + 2]);
            let r = h * (va - vb);
            for k in 0..3 {
                out[3 * a + k] += r[k];
                out[3 * b + k] -= r[k];
            }
        }
    }

    fn add_stiffness_dense(&self, a: &mut DMatrix<Real>, scale: Real) {
        for (i, e) in self.edges.iter().enumerate() {
            let len = self.lengths[i];
            if len == 0.0 {
                continue;
            }
            let h = edge_hessian(self.stiffness, e.rest_length, len, &self.directions[i]);
            let (p, q) = e.nodes;
            for r in 0..3 {
                for c in 0..3 {
                    let v = scale * h[(r, c)];
                    a[(3 * p + r, 3 * p + c)] += v;
                    a[(3 * q + r, 3 * q + c)] += v;
                    a[(3 * p + r, 3 * q + c)] -= v;
                    a[(3 * q + r, 3 * p + c)] -= v;
                }
            }
        }
    }

    fn energy(&self, positions: &[Point3]) -> Real {
        let mut e_total = 0.0;
        for e in &self.edges {
            let len = (positions[e.nodes.1] - positions[e.nodes.0]).norm();
            let stretch = len - e.rest_length;
            e_total += 0.5 * self.stiffness * stretch * stretch;
        }
        e_total
    }
}

/// 3x3 block of K = -df/dx coupling the two endpoints of one spring:
/// k [ d d^T + (1 - L0/L)(I - d d^T) ].
fn edge_hessian(k: Real, rest: Real, len: Real, dir: &Vec3) -> Mat3 {
    let ddt = dir * dir.transpose();
    let lateral = 1.0 - rest / len;
    k * (ddt + lateral * (Mat3::identity() - ddt))
}
