//! Explicit and implicit Euler steps for soft bodies, plus the rigid-frame
//! update.
//!
//! The implicit step linearizes internal forces around the current state and
//! solves (M - dt D - dt^2 K) dv = dt (f + dt K v) with K = df/dx and
//! D = df/dv the Rayleigh damping; pinned degrees of freedom are projected
//! out of the system. State is only mutated after the solve succeeds, so a
//! failed step leaves the previous state intact.

use nalgebra::DMatrix;

use super::solve::{solve_cg, solve_cholesky, CgResult, SolverError};
use super::{ForceModel, LinearSolverKind, RigidBodyState, SoftBodyState, SolverConfig};
use crate::{Real, Vec3};

/// Direct solves are kept at desk scale; beyond this many DOFs the caller
/// should use conjugate gradient.
pub const MAX_CHOLESKY_DOFS: usize = 3000;

/// A force and torque pair acting on a rigid frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vec3::zeros(),
            torque: Vec3::zeros(),
        }
    }
}

impl core::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

impl core::ops::AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        self.force += rhs.force;
        self.torque += rhs.torque;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepError {
    /// The supplied forces contain NaN or infinity; the step was aborted
    /// before touching the state.
    NonFiniteForce,
    /// The linear solve produced non-finite values.
    NonFiniteSolution,
    Solver(SolverError),
    /// Dense direct solve requested on a system that is too large.
    SystemTooLarge { dofs: usize, max: usize },
    /// Force/state array lengths disagree.
    DimensionMismatch,
}

impl From<SolverError> for StepError {
    fn from(e: SolverError) -> Self {
        StepError::Solver(e)
    }
}

impl core::fmt::Display for StepError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StepError::NonFiniteForce => write!(f, "non-finite force input; step aborted"),
            StepError::NonFiniteSolution => write!(f, "linear solve produced non-finite values"),
            StepError::Solver(e) => write!(f, "linear solver failed: {e}"),
            StepError::SystemTooLarge { dofs, max } => {
                write!(f, "direct solve limited to {max} DOFs, system has {dofs}")
            }
            StepError::DimensionMismatch => write!(f, "force and state sizes disagree"),
        }
    }
}

impl core::error::Error for StepError {}

/// One explicit Euler step: x += dt v(t), then v += dt M^-1 f.
/// Pinned nodes are left untouched (their velocity is held at zero).
pub fn step_explicit_euler(state: &mut SoftBodyState, forces: &[Vec3], dt: Real) -> Result<(), StepError> {
    if forces.len() != state.node_count() {
        return Err(StepError::DimensionMismatch);
    }
    if forces.iter().any(|f| !(f.x.is_finite() && f.y.is_finite() && f.z.is_finite())) {
        return Err(StepError::NonFiniteForce);
    }
    for i in 0..state.node_count() {
        if state.is_pinned(i) {
            state.velocities[i] = Vec3::zeros();
            continue;
        }
        let v_old = state.velocities[i];
        state.positions[i] += dt * v_old;
        state.velocities[i] = v_old + dt * forces[i] / state.masses[i];
    }
    Ok(())
}

/// Report of an implicit step: how the linear solve went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitStepReport {
    pub dofs: usize,
    /// Present when the iterative path was used.
    pub cg: Option<CgResult>,
}

/// One implicit (backward) Euler step.
///
/// `external` holds everything that is not the body's internal elasticity:
/// gravity, contacts, attachments, coupling springs. `rayleigh` is the
/// (mass, stiffness) damping pair; both enter the system matrix, and the
/// damping force on the current velocity enters the right-hand side.
pub fn step_implicit_euler(
    state: &mut SoftBodyState,
    model: &mut dyn ForceModel,
    external: &[Vec3],
    rayleigh: (Real, Real),
    dt: Real,
    solver: &SolverConfig,
) -> Result<ImplicitStepReport, StepError> {
    let n = state.node_count();
    if external.len() != n {
        return Err(StepError::DimensionMismatch);
    }
    let dofs = 3 * n;
    let (alpha, beta) = rayleigh;

    model.refresh(&state.positions);
    let mut forces = alloc::vec![Vec3::zeros(); n];
    model.add_forces(&state.positions, &mut forces);
    for (f, e) in forces.iter_mut().zip(external) {
        *f += *e;
    }
    if forces.iter().any(|f| !(f.x.is_finite() && f.y.is_finite() && f.z.is_finite())) {
        return Err(StepError::NonFiniteForce);
    }

    // rhs = dt (f - alpha M v - (beta + dt) K v), filtered at pinned dofs.
    let stiffness_scale = dt * (beta + dt);
    let mut v_flat = alloc::vec![0.0; dofs];
    for i in 0..n {
        let v = state.velocities[i];
        v_flat[3 * i] = v.x;
        v_flat[3 * i + 1] = v.y;
        v_flat[3 * i + 2] = v.z;
    }
    let mut kv = alloc::vec![0.0; dofs];
    model.apply_stiffness(&v_flat, &mut kv);
    let mut rhs = alloc::vec![0.0; dofs];
    for i in 0..n {
        let damped = forces[i] - alpha * state.masses[i] * state.velocities[i];
        for k in 0..3 {
            rhs[3 * i + k] = dt * damped[k] - stiffness_scale * kv[3 * i + k];
        }
    }
    for i in 0..n {
        if state.is_pinned(i) {
            rhs[3 * i] = 0.0;
            rhs[3 * i + 1] = 0.0;
            rhs[3 * i + 2] = 0.0;
        }
    }

    let mass_scale = 1.0 + dt * alpha;
    let mut dv = alloc::vec![0.0; dofs];
    let mut report = ImplicitStepReport { dofs, cg: None };

    match solver.linear_solver {
        LinearSolverKind::ConjugateGradient => {
            let masses = &state.masses;
            let pinned = state.pinned_mask();
            let mut filtered = alloc::vec![0.0; dofs];
            let apply = |p: &[Real], out: &mut [Real]| {
                filtered.copy_from_slice(p);
                for i in 0..n {
                    if pinned[i] {
                        filtered[3 * i] = 0.0;
                        filtered[3 * i + 1] = 0.0;
                        filtered[3 * i + 2] = 0.0;
                    }
                }
                model.apply_stiffness(&filtered, out);
                for i in 0..n {
                    for k in 0..3 {
                        let j = 3 * i + k;
                        out[j] = stiffness_scale * out[j] + mass_scale * masses[i] * filtered[j];
                    }
                }
                // Identity on the pinned subspace keeps the operator SPD.
                for i in 0..n {
                    if pinned[i] {
                        for k in 0..3 {
                            out[3 * i + k] = p[3 * i + k];
                        }
                    }
                }
            };
            let cg = solve_cg(apply, &rhs, &mut dv, solver)?;
            report.cg = Some(cg);
        }
        LinearSolverKind::Cholesky => {
            if dofs > MAX_CHOLESKY_DOFS {
                return Err(StepError::SystemTooLarge {
                    dofs,
                    max: MAX_CHOLESKY_DOFS,
                });
            }
            let mut a = DMatrix::zeros(dofs, dofs);
            model.add_stiffness_dense(&mut a, stiffness_scale);
            for i in 0..n {
                for k in 0..3 {
                    a[(3 * i + k, 3 * i + k)] += mass_scale * state.masses[i];
                }
            }
            for i in 0..n {
                if state.is_pinned(i) {
                    for k in 0..3 {
                        let j = 3 * i + k;
                        for c in 0..dofs {
                            a[(j, c)] = 0.0;
                            a[(c, j)] = 0.0;
                        }
                        a[(j, j)] = 1.0;
                    }
                }
            }
            dv = solve_cholesky(&a, &rhs)?;
        }
    }

    if dv.iter().any(|v| !v.is_finite()) {
        return Err(StepError::NonFiniteSolution);
    }

    for i in 0..n {
        if state.is_pinned(i) {
            state.velocities[i] = Vec3::zeros();
            continue;
        }
        let delta = Vec3::new(dv[3 * i], dv[3 * i + 1], dv[3 * i + 2]);
        state.velocities[i] += delta;
        state.positions[i] += dt * state.velocities[i];
    }
    Ok(report)
}

/// One explicit step for rigid frames: pose advances with the old twist,
/// then the twist integrates the wrench (with the gyroscopic term).
/// Orientations are renormalized every step.
pub fn step_rigid_explicit(state: &mut RigidBodyState, wrenches: &[Wrench], dt: Real) -> Result<(), StepError> {
    if wrenches.len() != state.frame_count() {
        return Err(StepError::DimensionMismatch);
    }
    for w in wrenches {
        if !(w.force.iter().all(|v| v.is_finite()) && w.torque.iter().all(|v| v.is_finite())) {
            return Err(StepError::NonFiniteForce);
        }
    }
    for i in 0..state.frame_count() {
        let twist = state.twists[i];
        let frame = &mut state.frames[i];
        frame.translation.vector += dt * twist.linear;
        let spin = crate::UnitQuat::from_scaled_axis(dt * twist.angular);
        frame.rotation = spin * frame.rotation;
        frame.rotation.renormalize();

        let inertia = &state.inertia[i];
        let r = frame.rotation.to_rotation_matrix();
        let i_world = r * inertia.tensor * r.transpose();
        let gyro = twist.angular.cross(&(i_world * twist.angular));
        let ang_acc = i_world
            .try_inverse()
            .map(|inv| inv * (wrenches[i].torque - gyro))
            .unwrap_or_else(Vec3::zeros);
        state.twists[i].linear += dt * wrenches[i].force / inertia.mass;
        state.twists[i].angular += dt * ang_acc;
    }
    Ok(())
}
