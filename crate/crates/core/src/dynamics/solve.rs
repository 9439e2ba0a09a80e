//! Linear solvers: matrix-free conjugate gradient and dense Cholesky.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;

use super::SolverConfig;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// Non-finite values appeared during iteration.
    Diverged,
    /// The operator is not positive definite; for Cholesky the failing pivot
    /// index is reported.
    NotPositiveDefinite { pivot: usize },
    /// Matrix/vector dimensions disagree.
    DimensionMismatch,
}

impl core::fmt::Display for SolverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolverError::Diverged => write!(f, "solver diverged: non-finite values encountered"),
            SolverError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix not positive definite at pivot {pivot}")
            }
            SolverError::DimensionMismatch => write!(f, "dimension mismatch"),
        }
    }
}

impl core::error::Error for SolverError {}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgResult {
    pub iterations: usize,
    /// Final true residual ratio ||Ax - b|| / ||b||.
    pub residual: Real,
    pub converged: bool,
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[Real]) -> Real {
    dot(a, a).sqrt()
}

/// Conjugate gradient on a symmetric positive definite operator given only
/// as a matrix-vector product. Starts from x = 0 and stops when the residual
/// ratio drops below `cfg.cg_tolerance` or after `cfg.cg_max_iterations`
/// iterations, whichever comes first; in the latter case the best iterate is
/// still returned with `converged = false`.
pub fn solve_cg<F>(mut apply_a: F, b: &[Real], x: &mut [Real], cfg: &SolverConfig) -> Result<CgResult, SolverError>
where
    F: FnMut(&[Real], &mut [Real]),
{
    if x.len() != b.len() {
        return Err(SolverError::DimensionMismatch);
    }
    let n = b.len();
    x.fill(0.0);
    let b_norm = norm(b);
    if !b_norm.is_finite() {
        return Err(SolverError::Diverged);
    }
    if b_norm == 0.0 {
        return Ok(CgResult {
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = alloc::vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    for _ in 0..cfg.cg_max_iterations {
        ap.fill(0.0);
        apply_a(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if !p_ap.is_finite() {
            return Err(SolverError::Diverged);
        }
        if p_ap <= 0.0 {
            // Breakdown on a direction of non-positive curvature.
            return Err(SolverError::NotPositiveDefinite { pivot: iterations });
        }
        let alpha = rr / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() {
            return Err(SolverError::Diverged);
        }
        if rr_next.sqrt() / b_norm <= cfg.cg_tolerance {
            break;
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }

    // Report the true residual, not the recurrence estimate.
    ap.fill(0.0);
    apply_a(x, &mut ap);
    let mut res = 0.0;
    for i in 0..n {
        let d = ap[i] - b[i];
        res += d * d;
    }
    let residual = res.sqrt() / b_norm;
    Ok(CgResult {
        iterations,
        residual,
        converged: residual <= cfg.cg_tolerance,
    })
}

/// Dense Cholesky solve of a symmetric positive definite system. The
/// factorization is in-place LL^T; a non-positive pivot reports its index.
pub fn solve_cholesky(a: &DMatrix<Real>, b: &[Real]) -> Result<Vec<Real>, SolverError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(SolverError::DimensionMismatch);
    }
    // Lower-triangular factor, row-major band of the input.
    let mut l = a.clone();
    for j in 0..n {
        let mut d = l[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(SolverError::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = l[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    // Forward substitution L y = b.
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[(i, k)] * y[k];
            y[i] -= t;
        }
        y[i] /= l[(i, i)];
    }
    // Back substitution L^T x = y.
    let mut x = y;
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = l[(k, i)] * x[k];
            x[i] -= t;
        }
        x[i] /= l[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_apply(a: &DMatrix<Real>) -> impl FnMut(&[Real], &mut [Real]) + '_ {
        move |v, out| {
            for i in 0..a.nrows() {
                let mut s = 0.0;
                for j in 0..a.ncols() {
                    s += a[(i, j)] * v[j];
                }
                out[i] += s;
            }
        }
    }

    fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<Real> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut a = &m.transpose() * &m;
        for i in 0..n {
            a[(i, i)] += n as Real;
        }
        a
    }

    #[test]
    fn cg_identity_converges_in_one_iteration() {
        let a = DMatrix::identity(5, 5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let mut x = [0.0; 5];
        let res = solve_cg(dense_apply(&a), &b, &mut x, &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_zero_rhs_returns_zero_without_iterating() {
        let a = DMatrix::identity(4, 4);
        let b = [0.0; 4];
        let mut x = [1.0; 4]; // overwritten
        let res = solve_cg(dense_apply(&a), &b, &mut x, &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_matches_cholesky_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.gen_range(5..50);
            let a = random_spd(n, &mut rng);
            let b: Vec<Real> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut x = alloc::vec![0.0; n];
            let cfg = SolverConfig {
                cg_tolerance: 1e-12,
                cg_max_iterations: 10 * n,
                ..SolverConfig::default()
            };
            let res = solve_cg(dense_apply(&a), &b, &mut x, &cfg).unwrap();
            assert!(res.converged, "cg failed to converge at n={n}");
            let direct = solve_cholesky(&a, &b).unwrap();
            let scale = direct.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-30);
            for (xi, di) in x.iter().zip(&direct) {
                assert!((xi - di).abs() / scale < 1e-8, "{xi} vs {di}");
            }
        }
    }

    #[test]
    fn cg_hits_iteration_cap_with_flag_false() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(40, &mut rng);
        let b: Vec<Real> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = alloc::vec![0.0; 40];
        let cfg = SolverConfig {
            cg_tolerance: 1e-15,
            cg_max_iterations: 2,
            ..SolverConfig::default()
        };
        let res = solve_cg(dense_apply(&a), &b, &mut x, &cfg).unwrap();
        assert_eq!(res.iterations, 2);
        assert!(!res.converged);
        assert!(x.iter().any(|&v| v != 0.0), "best iterate is still returned");
    }

    #[test]
    fn cholesky_diagonal() {
        let a = DMatrix::from_diagonal_element(1, 1, 4.0);
        let x = solve_cholesky(&a, &[8.0]).unwrap();
        assert_eq!(x[0], 2.0);
    }

    #[test]
    fn cholesky_identity_returns_rhs() {
        let a = DMatrix::identity(6, 6);
        let b = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let x = solve_cholesky(&a, &b).unwrap();
        assert_eq!(&x[..], &b[..]);
    }

    #[test]
    fn cholesky_residual_on_hilbert_like_spd() {
        // Hilbert-like: notoriously ill-conditioned but still SPD at n=8.
        let n = 8;
        let a = DMatrix::from_fn(n, n, |i, j| 1.0 / ((i + j + 1) as Real));
        let b: Vec<Real> = (0..n).map(|i| (i + 1) as Real).collect();
        let x = solve_cholesky(&a, &b).unwrap();
        let mut res: f64 = 0.0;
        let mut b_norm: f64 = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[(i, j)] * x[j];
            }
            res += (s - b[i]) * (s - b[i]);
            b_norm += b[i] * b[i];
        }
        // The residual stays tiny even when the solution error does not.
        assert!(res.sqrt() <= 1e-10 * b_norm.sqrt());
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let mut a = DMatrix::identity(3, 3);
        a[(2, 2)] = -1.0;
        let err = solve_cholesky(&a, &[1.0, 1.0, 1.0]).unwrap_err();
        assert_eq!(err, SolverError::NotPositiveDefinite { pivot: 2 });
    }
}
