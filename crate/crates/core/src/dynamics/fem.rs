//! Corotational linear tetrahedral FEM.
//!
//! Forces are the exact gradient of the rotation-invariant corotated energy
//!   psi(F) = mu ||F - R||^2 + lambda/2 tr^2(R^T F - I),
//! with R the polar rotation of the deformation gradient F. Because the
//! rotation derivative drops out of the gradient, internal forces conserve
//! both linear and angular momentum to machine precision. Stiffness for the
//! implicit integrator uses the classic warped element matrix R Ke R^T.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SMatrix, SVector};

use super::{ForceModel, MechanicalParams, ParamError};
use crate::mesh::TetMesh;
use crate::{Mat3, Point3, Real, Vec3};

type Mat6x12 = SMatrix<Real, 6, 12>;
type Mat6 = SMatrix<Real, 6, 6>;
type Mat12 = SMatrix<Real, 12, 12>;
type Vec12 = SVector<Real, 12>;

#[derive(Debug, Clone)]
struct FemElement {
    nodes: [usize; 4],
    /// Inverse of the rest shape matrix [x1-x0 | x2-x0 | x3-x0].
    dm_inv: Mat3,
    volume: Real,
    /// Rest-frame linear stiffness, V0 * B^T C B.
    ke: Mat12,
    /// Current polar rotation; last valid one if the element is inverted.
    rotation: Mat3,
    /// Current symmetric stretch R^T F (identity at rest).
    stretch: Mat3,
}

/// Corotational FEM force model over a tetrahedral mesh.
#[derive(Debug, Clone)]
pub struct FemModel {
    elements: Vec<FemElement>,
    mu: Real,
    lambda: Real,
    inverted_elements: usize,
}

impl FemModel {
    /// Precomputes rest shape matrices and element stiffness from the mesh's
    /// rest configuration.
    pub fn new(mesh: &TetMesh, params: &MechanicalParams) -> Result<Self, ParamError> {
        params.validate()?;
        let (mu, lambda) = params.lame();
        let c = isotropic_elasticity(mu, lambda);
        let mut elements = Vec::with_capacity(mesh.tet_count());
        for (tet, &volume) in mesh.tetrahedra.iter().zip(&mesh.rest_volumes) {
            let dm = shape_matrix(&mesh.vertices, tet);
            let dm_inv = dm.try_inverse().expect("positive rest volume implies invertible shape");
            let b = strain_displacement(&dm_inv);
            let ke = volume * b.transpose() * c * b;
            elements.push(FemElement {
                nodes: *tet,
                dm_inv,
                volume,
                ke,
                rotation: Mat3::identity(),
                stretch: Mat3::identity(),
            });
        }
        Ok(Self {
            elements,
            mu,
            lambda,
            inverted_elements: 0,
        })
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Elements found inverted (non-positive volume) in the last refresh.
    pub fn inverted_element_count(&self) -> usize {
        self.inverted_elements
    }

    /// Corotational Cauchy stress tensor of an element at the last refreshed
    /// configuration: 2 mu eps + lambda tr(eps) I with eps = sym(R^T F) - I.
    pub fn stress_tensor(&self, element: usize) -> Mat3 {
        let e = &self.elements[element];
        let strain = e.stretch.symmetric_part() - Mat3::identity();
        2.0 * self.mu * strain + self.lambda * strain.trace() * Mat3::identity()
    }

    /// Maximum principal (tensile) stress of an element, clamped at zero.
    pub fn max_principal_stress(&self, element: usize) -> Real {
        let sigma = self.stress_tensor(element);
        let eig = sigma.symmetric_eigen();
        eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    fn deformation_gradient(&self, positions: &[Point3], e: &FemElement) -> Mat3 {
        shape_matrix(positions, &e.nodes) * e.dm_inv
    }
}

impl ForceModel for FemModel {
    fn refresh(&mut self, positions: &[Point3]) {
        self.inverted_elements = 0;
        for e in &mut self.elements {
            let f = shape_matrix(positions, &e.nodes) * e.dm_inv;
            if f.determinant() <= 0.0 {
                // Keep the last valid rotation for this element.
                self.inverted_elements += 1;
            } else {
                e.rotation = polar_rotation(&f);
            }
            e.stretch = e.rotation.transpose() * f;
        }
    }

    fn add_forces(&mut self, positions: &[Point3], out: &mut [Vec3]) {
        for e in &self.elements {
            let f = self.deformation_gradient(positions, e);
            let r = &e.rotation;
            let s_trace = (r.transpose() * f).trace() - 3.0;
            let p = 2.0 * self.mu * (f - r) + self.lambda * s_trace * r;
            // Columns of h are the forces on nodes 1..3; node 0 balances.
            let h = -e.volume * p * e.dm_inv.transpose();
            let f1 = h.column(0).into_owned();
            let f2 = h.column(1).into_owned();
            let f3 = h.column(2).into_owned();
            out[e.nodes[0]] -= f1 + f2 + f3;
            out[e.nodes[1]] += f1;
            out[e.nodes[2]] += f2;
            out[e.nodes[3]] += f3;
        }
    }

    fn apply_stiffness(&self, v: &[Real], out: &mut [Real]) {
        for e in &self.elements {
            let r = &e.rotation;
            let rt = r.transpose();
            // Gather and rotate into the element rest frame.
            let mut q = Vec12::zeros();
            for (k, &n) in e.nodes.iter().enumerate() {
                let w = rt * Vec3::new(v[3 * n], v[3 * n + 1], v[3 * n + 2]);
                q.fixed_rows_mut::<3>(3 * k).copy_from(&w);
            }
            let y = e.ke * q;
            for (k, &n) in e.nodes.iter().enumerate() {
                let w = r * Vec3::new(y[3 * k], y[3 * k + 1], y[3 * k + 2]);
                out[3 * n] += w.x;
                out[3 * n + 1] += w.y;
                out[3 * n + 2] += w.z;
            }
        }
    }

    fn add_stiffness_dense(&self, a: &mut DMatrix<Real>, scale: Real) {
        for e in &self.elements {
            let mut rot = Mat12::zeros();
            for k in 0..4 {
                rot.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(&e.rotation);
            }
            let warped = rot * e.ke * rot.transpose();
            for bi in 0..4 {
                for bj in 0..4 {
                    let (ni, nj) = (e.nodes[bi], e.nodes[bj]);
                    for r in 0..3 {
                        for c in 0..3 {
                            a[(3 * ni + r, 3 * nj + c)] += scale * warped[(3 * bi + r, 3 * bj + c)];
                        }
                    }
                }
            }
        }
    }

    fn energy(&self, positions: &[Point3]) -> Real {
        let mut total = 0.0;
        for e in &self.elements {
            let f = self.deformation_gradient(positions, e);
            // Recompute the rotation so the energy is a pure function of the
            // positions (finite-difference oracles rely on this).
            let r = if f.determinant() > 0.0 {
                polar_rotation(&f)
            } else {
                e.rotation
            };
            let dev = f - r;
            let s_trace = (r.transpose() * f).trace() - 3.0;
            total += e.volume * (self.mu * dev.norm_squared() + 0.5 * self.lambda * s_trace * s_trace);
        }
        total
    }
}

/// Shape matrix [x1-x0 | x2-x0 | x3-x0] of an element at given positions.
fn shape_matrix(positions: &[Point3], nodes: &[usize; 4]) -> Mat3 {
    let x0 = positions[nodes[0]];
    Mat3::from_columns(&[
        positions[nodes[1]] - x0,
        positions[nodes[2]] - x0,
        positions[nodes[3]] - x0,
    ])
}

/// Isotropic elasticity in Voigt order (xx, yy, zz, xy, yz, zx) with
/// engineering shear strains.
fn isotropic_elasticity(mu: Real, lambda: Real) -> Mat6 {
    let mut c = Mat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] = lambda + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

/// Strain-displacement matrix for linear shape functions. Row k of dm_inv is
/// the gradient of shape function k+1; shape function 0 closes the partition
/// of unity.
fn strain_displacement(dm_inv: &Mat3) -> Mat6x12 {
    let mut grads = [Vec3::zeros(); 4];
    for k in 0..3 {
        grads[k + 1] = dm_inv.row(k).transpose();
        grads[0] -= grads[k + 1];
    }
    let mut b = Mat6x12::zeros();
    for (k, g) in grads.iter().enumerate() {
        let col = 3 * k;
        b[(0, col)] = g.x;
        b[(1, col + 1)] = g.y;
        b[(2, col + 2)] = g.z;
        b[(3, col)] = g.y;
        b[(3, col + 1)] = g.x;
        b[(4, col + 1)] = g.z;
        b[(4, col + 2)] = g.y;
        b[(5, col)] = g.z;
        b[(5, col + 2)] = g.x;
    }
    b
}

/// Rotation factor of the polar decomposition of an invertible matrix with
/// positive determinant. Newton iteration (Higham), falling back to SVD for
/// ill-conditioned inputs.
pub fn polar_rotation(f: &Mat3) -> Mat3 {
    let mut r = *f;
    for _ in 0..40 {
        let Some(r_inv_t) = r.try_inverse().map(|m| m.transpose()) else {
            break;
        };
        let next = 0.5 * (r + r_inv_t);
        let delta = (next - r).norm();
        r = next;
        if delta < 1e-14 {
            return r;
        }
    }
    // Near-singular input: do it the expensive, robust way.
    let svd = f.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}
