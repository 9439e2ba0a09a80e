//! Body state, force models, time integration and linear solvers.

use alloc::vec::Vec;

use crate::{Isometry, Mat3, Point3, Real, Vec3};

pub mod fem;
pub mod integrate;
pub mod solve;
pub mod spring;

pub use fem::FemModel;
pub use integrate::{step_explicit_euler, step_implicit_euler, ImplicitStepReport, StepError};
pub use solve::{solve_cg, solve_cholesky, CgResult, SolverError};
pub use spring::SpringModel;

/// Nodal state of a deformable (3-DOF-per-node) body.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBodyState {
    pub positions: Vec<Point3>,
    pub velocities: Vec<Vec3>,
    pub masses: Vec<Real>,
    pinned: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateError {
    CountMismatch,
    NonPositiveMass { node: usize },
    NodeOutOfRange { node: usize, count: usize },
}

impl core::fmt::Display for StateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StateError::CountMismatch => write!(f, "positions, velocities and masses differ in length"),
            StateError::NonPositiveMass { node } => write!(f, "node {node} has non-positive mass"),
            StateError::NodeOutOfRange { node, count } => {
                write!(f, "node index {node} out of range for {count} nodes")
            }
        }
    }
}

impl core::error::Error for StateError {}

impl SoftBodyState {
    /// State at rest: the given positions, zero velocities.
    pub fn at_rest(positions: Vec<Point3>, masses: Vec<Real>) -> Result<Self, StateError> {
        if positions.len() != masses.len() {
            return Err(StateError::CountMismatch);
        }
        if let Some(node) = masses.iter().position(|&m| !(m > 0.0)) {
            return Err(StateError::NonPositiveMass { node });
        }
        let n = positions.len();
        Ok(Self {
            positions,
            velocities: alloc::vec![Vec3::zeros(); n],
            masses,
            pinned: alloc::vec![false; n],
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Pins the given nodes: their velocity is zeroed now and held at zero by
    /// every integrator step.
    pub fn pin_nodes(&mut self, nodes: &[usize]) -> Result<(), StateError> {
        for &node in nodes {
            if node >= self.node_count() {
                return Err(StateError::NodeOutOfRange {
                    node,
                    count: self.node_count(),
                });
            }
        }
        for &node in nodes {
            self.pinned[node] = true;
            self.velocities[node] = Vec3::zeros();
        }
        Ok(())
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.pinned[node]
    }

    pub fn pinned_mask(&self) -> &[bool] {
        &self.pinned
    }

    /// Sorted indices of pinned nodes.
    pub fn pinned_nodes(&self) -> Vec<usize> {
        self.pinned
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
            .collect()
    }

    /// Extends the state with a copy of an existing node (used by topology
    /// separation). The duplicate inherits position, velocity, mass and pin
    /// status; masses are typically re-lumped afterwards.
    pub fn duplicate_node(&mut self, node: usize) -> usize {
        let new = self.node_count();
        self.positions.push(self.positions[node]);
        self.velocities.push(self.velocities[node]);
        self.masses.push(self.masses[node]);
        self.pinned.push(self.pinned[node]);
        new
    }
}

/// State of a rigid (6-DOF-per-frame) body. Simple bodies have one frame;
/// articulated bodies have one per link.
#[derive(Debug, Clone)]
pub struct RigidBodyState {
    pub frames: Vec<Isometry>,
    pub twists: Vec<Twist>,
    pub inertia: Vec<RigidInertia>,
}

/// Linear and angular velocity of one rigid frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn zero() -> Self {
        Self {
            linear: Vec3::zeros(),
            angular: Vec3::zeros(),
        }
    }
}

/// Mass and body-frame inertia tensor of one rigid frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidInertia {
    pub mass: Real,
    pub tensor: Mat3,
}

impl RigidInertia {
    /// Solid-sphere inertia, a reasonable default for tool tips.
    pub fn solid_sphere(mass: Real, radius: Real) -> Self {
        let i = 0.4 * mass * radius * radius;
        Self {
            mass,
            tensor: Mat3::from_diagonal_element(i),
        }
    }
}

impl RigidBodyState {
    pub fn single(frame: Isometry, inertia: RigidInertia) -> Self {
        Self {
            frames: alloc::vec![frame],
            twists: alloc::vec![Twist::zero()],
            inertia: alloc::vec![inertia],
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Deformation model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeformationModel {
    MassSpring,
    Fem,
}

/// Material and damping parameters of a deformable body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalParams {
    pub model: DeformationModel,
    /// Spring stiffness (N/m), mass-spring model only.
    pub stiffness: Real,
    /// Young's modulus (Pa), FEM only.
    pub young_modulus: Real,
    /// Poisson ratio in [0, 0.5), FEM only.
    pub poisson_ratio: Real,
    /// Mass-proportional Rayleigh damping (1/s).
    pub rayleigh_mass: Real,
    /// Stiffness-proportional Rayleigh damping (s).
    pub rayleigh_stiffness: Real,
    /// Maximum principal stress (Pa) beyond which elements separate, when
    /// dynamic topology is enabled.
    pub tearing_threshold: Option<Real>,
    /// Density (kg/m^3) for FEM mass lumping.
    pub density: Real,
    /// Total mass (kg) spread uniformly over nodes for mass-spring bodies.
    pub total_mass: Real,
}

impl Default for MechanicalParams {
    fn default() -> Self {
        Self {
            model: DeformationModel::Fem,
            stiffness: 100.0,
            young_modulus: 1.0e4,
            poisson_ratio: 0.3,
            rayleigh_mass: 0.0,
            rayleigh_stiffness: 0.0,
            tearing_threshold: None,
            density: 1000.0,
            total_mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    PoissonOutOfRange(Real),
    NonPositive(&'static str),
    NegativeDamping(&'static str),
}

impl core::fmt::Display for ParamError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParamError::PoissonOutOfRange(v) => {
                write!(f, "poisson_ratio {v} outside [0, 0.5)")
            }
            ParamError::NonPositive(what) => write!(f, "{what} must be positive"),
            ParamError::NegativeDamping(what) => write!(f, "{what} must be non-negative"),
        }
    }
}

impl core::error::Error for ParamError {}

impl MechanicalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(ParamError::PoissonOutOfRange(self.poisson_ratio));
        }
        if !(self.young_modulus > 0.0) {
            return Err(ParamError::NonPositive("young_modulus"));
        }
        if !(self.stiffness > 0.0) {
            return Err(ParamError::NonPositive("stiffness"));
        }
        if !(self.density > 0.0) {
            return Err(ParamError::NonPositive("density"));
        }
        if !(self.total_mass > 0.0) {
            return Err(ParamError::NonPositive("total_mass"));
        }
        if self.rayleigh_mass < 0.0 {
            return Err(ParamError::NegativeDamping("rayleigh_mass"));
        }
        if self.rayleigh_stiffness < 0.0 {
            return Err(ParamError::NegativeDamping("rayleigh_stiffness"));
        }
        Ok(())
    }

    /// Lame coefficients (mu, lambda) from Young's modulus and Poisson ratio.
    pub fn lame(&self) -> (Real, Real) {
        let e = self.young_modulus;
        let nu = self.poisson_ratio;
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        (mu, lambda)
    }
}

/// Integration scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ExplicitEuler,
    ImplicitEuler,
}

/// Linear solver selector for the implicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    ConjugateGradient,
    Cholesky,
}

/// Integrator and linear-solver configuration of one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub linear_solver: LinearSolverKind,
    /// Relative residual ratio at which CG stops.
    pub cg_tolerance: Real,
    pub cg_max_iterations: usize,
}

impl Default for SolverConfig {
    /// Implicit Euler with conjugate gradient.
    fn default() -> Self {
        Self {
            integrator: Integrator::ImplicitEuler,
            linear_solver: LinearSolverKind::ConjugateGradient,
            cg_tolerance: 1.0e-9,
            cg_max_iterations: 25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.cg_tolerance > 0.0) {
            return Err(ParamError::NonPositive("cg_tolerance"));
        }
        if self.cg_max_iterations < 1 {
            return Err(ParamError::NonPositive("cg_max_iterations"));
        }
        Ok(())
    }
}

/// Internal-force model of a deformable body, as seen by the integrators.
///
/// `refresh` must be called with the current positions before the other
/// queries; it updates cached per-element data (spring directions, element
/// rotations) and diagnostics. Stiffness here means the positive
/// (semi-)definite matrix `K = -df/dx`, applied and assembled element by
/// element in index order so results are deterministic.
pub trait ForceModel {
    fn refresh(&mut self, positions: &[Point3]);

    /// Accumulates internal forces at the refreshed configuration.
    fn add_forces(&mut self, positions: &[Point3], out: &mut [Vec3]);

    /// out += K v, with v and out flat per-node xyz vectors.
    fn apply_stiffness(&self, v: &[Real], out: &mut [Real]);

    /// a += scale * K, dense, for the direct solver path.
    fn add_stiffness_dense(&self, a: &mut nalgebra::DMatrix<Real>, scale: Real);

    /// Elastic energy at arbitrary positions. Pure in the positions (used by
    /// finite-difference oracles), so per-element rotations are recomputed
    /// here instead of being read from the refresh cache.
    fn energy(&self, positions: &[Point3]) -> Real;
}

/// Lumped node masses for a FEM body: each element spreads density x rest
/// volume equally over its four nodes.
pub fn lump_fem_masses(mesh: &crate::mesh::TetMesh, density: Real) -> Vec<Real> {
    let mut masses = alloc::vec![0.0; mesh.vertex_count()];
    for (tet, &vol) in mesh.tetrahedra.iter().zip(&mesh.rest_volumes) {
        let share = density * vol / 4.0;
        for &v in tet {
            masses[v] += share;
        }
    }
    masses
}

/// Uniform node masses for a mass-spring body from its total mass.
pub fn uniform_masses(node_count: usize, total_mass: Real) -> Vec<Real> {
    alloc::vec![total_mass / node_count as Real; node_count]
}
