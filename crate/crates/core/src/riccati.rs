//! Stabilizing solution of the q-parametrized algebraic Riccati equation
//!
//! ```text
//! R = A'RA + qC'C + (A'RB + qC'D) (I - B'RB - qD'D)^{-1} (B'RA + qD'C)
//! ```
//!
//! with `Sigma = (I - B'RB - qD'D)^{-1} > 0`, `L = Sigma (B'RA + qD'C)` and
//! `rho(A + BL) < 1`. A solution exists exactly when `q < ||F||_inf^{-2}`.
//!
//! The monotone fixed-point iteration `R_{k+1} = RHS(R_k)`, `R_0 = 0`, converges
//! to the stabilizing solution but only linearly, at rate `rho(A + BL)^2`. The
//! solver here runs the structure-preserving doubling recurrence, whose k-th
//! iterate equals fixed-point iterate `2^k`, so near-boundary problems need a
//! few dozen steps instead of millions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::numkit::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    /// Relative change between doubling steps that counts as converged.
    pub tol: f64,
    /// Cap on doubling steps; step k covers `2^k` fixed-point iterations.
    pub max_doublings: usize,
    /// Closed loops with `rho(A + BL) >= 1 - margin` are rejected, where
    /// `margin = min(boundary_margin, (1 - rho(A)) / 2)`. At the H-inf boundary
    /// rounding alone pulls `rho` about `sqrt(eps)` inside the unit circle, so
    /// the margin has to exceed that.
    pub boundary_margin: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_doublings: 60,
            boundary_margin: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiSolution {
    pub q: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub r: Matrix,
    #[serde(serialize_with = "serialize_matrix")]
    pub l: Matrix,
    #[serde(serialize_with = "serialize_matrix")]
    pub sigma: Matrix,
    /// `ln det Sigma^{-1} = ln det(I - B'RB - qD'D)`, at most zero.
    pub logdet_sigma_inv: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub closed_loop: Matrix,
    pub closed_loop_radius: f64,
    pub residual: f64,
    pub doublings: usize,
}

pub(crate) fn serialize_matrix<S: serde::Serializer>(
    m: &Matrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    numkit::matrix_to_rows(m).serialize(s)
}

/// Stabilizing solution `R_hat(q)`.
pub fn dare_stabilizing(f: &StateSpaceModel, q: f64, opts: &RiccatiOptions) -> Result<RiccatiSolution> {
    let n = f.states();
    dare_stabilizing_offset(f, q, &Matrix::zeros(n, n), opts)
}

/// Same equation with an extra constant term `Q >= 0` on the right-hand side.
/// With `Q > 0` the result satisfies the strict Riccati inequality of the
/// original equation, which is how strictly feasible LMI points are built.
pub fn dare_stabilizing_offset(
    f: &StateSpaceModel,
    q: f64,
    offset: &Matrix,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "q must be finite and >= 0, got {q}"
        )));
    }
    let n = f.states();
    if offset.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "offset must be {n}x{n}, got {}x{}",
            offset.nrows(),
            offset.ncols()
        )));
    }
    let rho_a = f.spectral_radius()?;
    if rho_a >= 1.0 {
        return Err(Error::Unstable(rho_a));
    }
    let margin = opts.boundary_margin.min(0.5 * (1.0 - rho_a));
    let (a, b, c, d) = (f.a(), f.b(), f.c(), f.d());
    let m = f.inputs();

    // M = I - qD'D must be positive definite: q < 1 / sigma_max(D)^2.
    let m_mat = Matrix::identity(m, m) - d.transpose() * d * q;
    let m_chol = numkit::cholesky(&m_mat).map_err(|_| Error::NoStabilizingSolution { q })?;

    let (mut r, doublings) = if n == 0 {
        (Matrix::zeros(0, 0), 0)
    } else {
        // Remove the cross term: w = v + K0 x.
        let k0 = m_chol.solve(&(d.transpose() * c * q));
        let a_t = a + b * &k0;
        let h = c.transpose() * c * q + k0.transpose() * &m_mat * &k0 + offset;
        let g = b * m_chol.solve(&b.transpose());
        doubling(f, q, &m_mat, a_t, g, numkit::symmetrize(&h), opts)?
    };

    let mut sol = assemble(f, q, &r, offset, margin)?;
    sol.doublings = doublings;
    let target = 10.0 * opts.tol * (1.0 + sol.r.norm());
    for _ in 0..3 {
        if sol.residual <= target || n == 0 {
            break;
        }
        // Newton correction: E = A_cl' E A_cl + Res(R).
        let defect = defect_matrix(f, q, &r, offset)?;
        let e = numkit::solve_stein(&sol.closed_loop.transpose(), &defect)?;
        let candidate = numkit::symmetrize(&(&r + e));
        match assemble(f, q, &candidate, offset, margin) {
            Ok(next) if next.residual < sol.residual => {
                r = candidate;
                sol = RiccatiSolution {
                    doublings: sol.doublings,
                    ..next
                };
            }
            _ => break,
        }
    }
    if sol.residual > 1e-6 * (1.0 + sol.r.norm()) {
        return Err(Error::ToleranceNotReached {
            tol: opts.tol,
            evaluations: sol.doublings,
        });
    }
    Ok(sol)
}

/// Doubling recurrence for `X = A'X(I + GX)^{-1}A + H` with `G = -B M^{-1} B'`.
fn doubling(
    f: &StateSpaceModel,
    q: f64,
    m_mat: &Matrix,
    mut ak: Matrix,
    g: Matrix,
    mut hk: Matrix,
    opts: &RiccatiOptions,
) -> Result<(Matrix, usize)> {
    let n = ak.nrows();
    let b = f.b();
    let ident = Matrix::identity(n, n);
    let mut gk = -g;
    let fail = || Error::NoStabilizingSolution { q };
    for step in 1..=opts.max_doublings {
        let w = &ident + &gk * &hk;
        let lu = w.lu();
        let wi_a = lu.solve(&ak).ok_or_else(fail)?;
        let wi_g = lu.solve(&gk).ok_or_else(fail)?;
        let a_next = &ak * &wi_a;
        let g_next = numkit::symmetrize(&(&gk + &ak * wi_g * ak.transpose()));
        let h_next = numkit::symmetrize(&(&hk + ak.transpose() * &hk * &wi_a));
        numkit::ensure_finite(&h_next, "Riccati iterate").map_err(|_| fail())?;

        // Iterates must stay in the domain and increase monotonically; a jump
        // past a pole of the Riccati map means q is beyond the H-inf boundary.
        numkit::cholesky(&(m_mat - b.transpose() * &h_next * b)).map_err(|_| fail())?;
        let inc = &h_next - &hk;
        let scale = 1.0 + h_next.norm();
        if numkit::min_eigenvalue_sym(&inc)? < -1e-9 * scale {
            return Err(fail());
        }
        let change = inc.norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if change <= opts.tol * scale || ak.norm() == 0.0 {
            return Ok((hk, step));
        }
    }
    Err(Error::MaxIterationsExceeded(opts.max_doublings))
}

fn assemble(
    f: &StateSpaceModel,
    q: f64,
    r: &Matrix,
    offset: &Matrix,
    margin: f64,
) -> Result<RiccatiSolution> {
    let (a, b, c, d) = (f.a(), f.b(), f.c(), f.d());
    let m = f.inputs();
    let x = numkit::symmetrize(&(b.transpose() * r * b + d.transpose() * d * q));
    let sigma_inv = Matrix::identity(m, m) - &x;
    let chol = numkit::cholesky(&sigma_inv).map_err(|_| Error::NoStabilizingSolution { q })?;
    let sigma = chol.inverse();
    // ln det(I - X) from the eigenvalues of X keeps full relative accuracy
    // when X is small, which the Cholesky diagonal does not.
    let logdet_sigma_inv = numkit::symmetric_eigenvalues(&x)?
        .iter()
        .map(|l| (-l).ln_1p())
        .sum();
    let l = chol.solve(&(b.transpose() * r * a + d.transpose() * c * q));
    let closed_loop = a + b * &l;
    let closed_loop_radius = numkit::spectral_radius(&closed_loop)?;
    if closed_loop_radius >= 1.0 - margin {
        return Err(Error::NoStabilizingSolution { q });
    }
    let residual = defect_matrix(f, q, r, offset)?.norm();
    Ok(RiccatiSolution {
        q,
        r: r.clone(),
        l,
        sigma,
        logdet_sigma_inv,
        closed_loop,
        closed_loop_radius,
        residual,
        doublings: 0,
    })
}

fn defect_matrix(f: &StateSpaceModel, q: f64, r: &Matrix, offset: &Matrix) -> Result<Matrix> {
    let (a, b, c, d) = (f.a(), f.b(), f.c(), f.d());
    let m = f.inputs();
    let n_mat = Matrix::identity(m, m) - b.transpose() * r * b - d.transpose() * d * q;
    let chol = numkit::cholesky(&n_mat)?;
    let s = a.transpose() * r * b + c.transpose() * d * q;
    let lhs = a.transpose() * r * a - r + c.transpose() * c * q + offset + &s * chol.solve(&s.transpose());
    Ok(numkit::symmetrize(&lhs))
}

/// Frobenius norm of the Riccati defect at a trial `R`.
pub fn riccati_residual(f: &StateSpaceModel, q: f64, r: &Matrix) -> Result<f64> {
    let n = f.states();
    if r.shape() != (n, n) {
        return Err(Error::Dimension(format!("R must be {n}x{n}")));
    }
    Ok(defect_matrix(f, q, r, &Matrix::zeros(n, n))?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn scalar_system() -> StateSpaceModel {
        StateSpaceModel::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap()
    }

    /// Plain fixed-point iteration from zero, the slow reference route.
    fn fixed_point(f: &StateSpaceModel, q: f64, steps: usize) -> Matrix {
        let n = f.states();
        let mut r = Matrix::zeros(n, n);
        let (a, b, c, d) = (f.a(), f.b(), f.c(), f.d());
        let m = f.inputs();
        for _ in 0..steps {
            let n_mat = Matrix::identity(m, m) - b.transpose() * &r * b - d.transpose() * d * q;
            let s = a.transpose() * &r * b + c.transpose() * d * q;
            let inv = n_mat.try_inverse().unwrap();
            r = a.transpose() * &r * a + c.transpose() * c * q + &s * inv * s.transpose();
        }
        r
    }

    #[test]
    fn zero_q_gives_zero_solution() {
        let f = StateSpaceModel::random_stable(4, 3, 2, 3, 0.9).unwrap();
        let sol = dare_stabilizing(&f, 0.0, &RiccatiOptions::default()).unwrap();
        assert_eq!(sol.r, Matrix::zeros(4, 4));
        assert_eq!(sol.l, Matrix::zeros(3, 4));
        assert_abs_diff_eq!(sol.sigma, Matrix::identity(3, 3), epsilon = 1e-15);
        assert_eq!(&sol.closed_loop, f.a());
        assert_eq!(sol.logdet_sigma_inv, 0.0);
    }

    #[test]
    fn scalar_closed_form() {
        // R^2 - 0.85 R + 0.1 = 0, smaller root.
        let expected = (0.85 - 0.3225f64.sqrt()) / 2.0;
        let sol = dare_stabilizing(&scalar_system(), 0.1, &RiccatiOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.r[(0, 0)], expected, epsilon = 1e-13);
        assert_abs_diff_eq!(expected, 0.1410545, epsilon = 1e-7);
        let closed = 0.5 + expected * 0.5 / (1.0 - expected);
        assert_abs_diff_eq!(sol.closed_loop[(0, 0)], closed, epsilon = 1e-12);
        assert_abs_diff_eq!(closed, 0.5821, epsilon = 1e-4);
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn boundary_q_has_no_stabilizing_solution() {
        let err = dare_stabilizing(&scalar_system(), 0.25, &RiccatiOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoStabilizingSolution { .. }), "{err:?}");
        assert!(dare_stabilizing(&scalar_system(), 0.3, &RiccatiOptions::default()).is_err());
    }

    #[test]
    fn residual_examples() {
        let f = scalar_system();
        let root = (0.85 - 0.3225f64.sqrt()) / 2.0;
        assert!(riccati_residual(&f, 0.1, &dmatrix![root]).unwrap() <= 1e-12);
        assert_eq!(riccati_residual(&f, 0.0, &dmatrix![0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            riccati_residual(&f, 0.1, &dmatrix![0.0]).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_eq!(
            riccati_residual(&f, 0.1, &dmatrix![2.0]),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn doubling_matches_fixed_point() {
        let f = StateSpaceModel::random_stable(3, 2, 2, 21, 0.8).unwrap();
        let q = 0.5 / crate::norms::hinf_norm(&f, 1e-9).unwrap().powi(2);
        let sol = dare_stabilizing(&f, q, &RiccatiOptions::default()).unwrap();
        let slow = fixed_point(&f, q, 20_000);
        assert!((&sol.r - slow).norm() <= 1e-10 * (1.0 + sol.r.norm()));
    }

    #[test]
    fn static_system_reduces_to_feedthrough() {
        let f = StateSpaceModel::static_gain(dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        let sol = dare_stabilizing(&f, 0.5, &RiccatiOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.logdet_sigma_inv, 0.5f64.ln(), epsilon = 1e-15);
        assert!(dare_stabilizing(&f, 1.0, &RiccatiOptions::default()).is_err());
    }

    #[test]
    fn unstable_model_rejected() {
        let f = StateSpaceModel::new(dmatrix![1.1], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
        assert!(matches!(
            dare_stabilizing(&f, 0.01, &RiccatiOptions::default()),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn negative_q_rejected() {
        assert!(matches!(
            dare_stabilizing(&scalar_system(), -0.1, &RiccatiOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn solution_is_monotone_in_q(seed in 0u64..5_000, s1 in 0.0f64..0.95, s2 in 0.0f64..0.95) {
            let f = StateSpaceModel::random_stable(3, 2, 2, seed, 0.95).unwrap();
            let qmax = crate::norms::hinf_norm(&f, 1e-9).unwrap().powi(-2);
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let opts = RiccatiOptions::default();
            let r1 = dare_stabilizing(&f, lo * qmax, &opts).unwrap().r;
            let r2 = dare_stabilizing(&f, hi * qmax, &opts).unwrap().r;
            proptest::prop_assert!(numkit::min_eigenvalue_sym(&(r2 - r1)).unwrap() >= -1e-9);
        }

        #[test]
        fn stabilizing_solution_is_below_strict_solutions(seed in 0u64..5_000, s in 0.05f64..0.9, eps in 1e-3f64..1.0) {
            let f = StateSpaceModel::random_stable(3, 2, 2, seed, 0.95).unwrap();
            let q = s * crate::norms::hinf_norm(&f, 1e-9).unwrap().powi(-2);
            let opts = RiccatiOptions::default();
            let r_hat = dare_stabilizing(&f, q, &opts).unwrap().r;
            // Strictly feasible pair: the equation with an added Q > 0.
            if let Ok(strict) = dare_stabilizing_offset(&f, q, &(Matrix::identity(3, 3) * eps), &opts) {
                let gap = strict.r - &r_hat;
                proptest::prop_assert!(numkit::min_eigenvalue_sym(&gap).unwrap() >= -1e-9);
            }
        }
    }
}
