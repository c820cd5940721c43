//! Mean anisotropy of shaping filters and the a-anisotropic norm.
//!
//! For `eta > ||F||_inf^2` let `Phi(eta) = eta * R_hat(1/eta)` be the rescaled
//! stabilizing Riccati solution. Minimizing the jointly convex determinant
//! plus LMI program over `Phi` at fixed `eta` lands exactly on `Phi(eta)`, so
//! the norm reduces to a scalar convex problem:
//!
//! ```text
//! |||F|||_a^2 = inf_eta  eta * (1 - exp(-2a/m) * det(I - B'RB - D'D/eta)^{1/m})
//! ```
//!
//! Since the determinant factor never exceeds one, every `eta` satisfies
//! `eta * (1 - exp(-2a/m)) <= objective(eta)`, which confines the minimizer to
//! `[||F||_inf^2, objective(eta)/(1 - exp(-2a/m))]` for any probe `eta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::{ShapingFilter, StateSpaceModel};
use crate::norms;
use crate::numkit::{self, Matrix};
use crate::riccati::{self, serialize_matrix, RiccatiOptions, RiccatiSolution};

/// Initial node count for mean-anisotropy quadrature.
pub const DEFAULT_GRID: usize = 256;
const MAX_GRID: usize = 1 << 18;
const QUAD_TOL: f64 = 1e-9;
/// `ln(1e-280)`: a spectral density determinant below this is treated as zero.
const LN_RANK_FLOOR: f64 = -644.7238260383328;
const MAX_EVALUATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct AnisoQuery {
    pub model: StateSpaceModel,
    /// Mean anisotropy level, nats per step.
    pub a: f64,
    pub tol: f64,
    /// Optional ceiling on the `eta` search interval.
    pub eta_cap: Option<f64>,
}

impl AnisoQuery {
    pub fn new(model: StateSpaceModel, a: f64) -> Self {
        Self {
            model,
            a,
            tol: 1e-9,
            eta_cap: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_eta_cap(mut self, cap: f64) -> Self {
        self.eta_cap = Some(cap);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnisoStatus {
    /// Interior minimizer found.
    Converged,
    /// `a = 0`: the norm is `||F||_2 / sqrt(m)`, attained only as `eta -> inf`.
    BoundaryA0,
    /// Minimum sits at the H-inf end of the `eta` interval.
    BoundaryHinf,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnisoNormResult {
    pub a: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub eta_star: Option<f64>,
    /// `1 / eta_star`; zero when `eta_star` is absent.
    pub q_star: f64,
    /// `eta_star * R_hat(q_star)`, or the observability Gramian at `a = 0`.
    #[serde(serialize_with = "serialize_matrix")]
    pub phi_star: Matrix,
    /// Riccati solves, including those of the H-inf bracket.
    pub evaluations: usize,
    pub status: AnisoStatus,
    pub h2_norm: f64,
    pub hinf_norm: f64,
}

fn check_level(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "anisotropy level must be finite and >= 0, got {a}"
        )))
    }
}

/// `1 - exp(-2a/m)` without cancellation.
fn one_minus_c(a: f64, m: usize) -> f64 {
    -(-2.0 * a / m as f64).exp_m1()
}

/// Objective and the Riccati solution it was built from.
fn objective(f: &StateSpaceModel, a: f64, eta: f64, opts: &RiccatiOptions) -> Result<(f64, RiccatiSolution)> {
    objective_at_q(f, a, 1.0 / eta, opts)
}

fn objective_at_q(
    f: &StateSpaceModel,
    a: f64,
    q: f64,
    opts: &RiccatiOptions,
) -> Result<(f64, RiccatiSolution)> {
    let m = f.inputs() as f64;
    let sol = riccati::dare_stabilizing(f, q, opts)?;
    let value = -((sol.logdet_sigma_inv - 2.0 * a) / m).exp_m1() / q;
    Ok((value, sol))
}

/// `eta - det(exp(-2a/m) (eta I - B' Phi B - D'D))^{1/m}` at the optimal `Phi`
/// for this `eta`. Defined for `eta > ||F||_inf^2`.
pub fn gamma_hat_of_eta(f: &StateSpaceModel, a: f64, eta: f64) -> Result<f64> {
    check_level(a)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    Ok(objective(f, a, eta, &RiccatiOptions::default())?.0)
}

struct Probe {
    eta: f64,
    value: f64,
    sol: RiccatiSolution,
}

pub fn anisotropic_norm(query: &AnisoQuery) -> Result<AnisoNormResult> {
    let f = &query.model;
    let a = query.a;
    check_level(a)?;
    if !(query.tol.is_finite() && query.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            query.tol
        )));
    }
    f.require_stable()?;
    let opts = RiccatiOptions::default();
    let m = f.inputs();
    let h2 = norms::h2_norm(f)?;
    let bounds = norms::hinf_bounds(f, query.tol, &opts)?;
    let hinf = bounds.upper;
    let n = f.states();

    if a == 0.0 {
        let gamma = h2 / (m as f64).sqrt();
        return Ok(AnisoNormResult {
            a,
            gamma,
            gamma_hat: gamma * gamma,
            eta_star: None,
            q_star: 0.0,
            phi_star: norms::observability_gramian(f)?,
            evaluations: bounds.evaluations,
            status: AnisoStatus::BoundaryA0,
            h2_norm: h2,
            hinf_norm: hinf,
        });
    }
    if hinf == 0.0 {
        return Ok(AnisoNormResult {
            a,
            gamma: 0.0,
            gamma_hat: 0.0,
            eta_star: None,
            q_star: 0.0,
            phi_star: Matrix::zeros(n, n),
            evaluations: bounds.evaluations,
            status: AnisoStatus::BoundaryHinf,
            h2_norm: h2,
            hinf_norm: hinf,
        });
    }

    let mut evaluations = bounds.evaluations;
    // Same q as the bracket's feasibility test, so this solve cannot fail.
    let q_lo = hinf.powi(-2);
    let eta_lo = 1.0 / q_lo;
    let (v_lo, sol_lo) = objective_at_q(f, a, q_lo, &opts)?;
    evaluations += 1;
    let mut best = Probe {
        eta: eta_lo,
        value: v_lo,
        sol: sol_lo,
    };

    let mut eta_hi = v_lo / one_minus_c(a, m);
    if let Some(cap) = query.eta_cap {
        if !(cap > eta_lo) {
            return Err(Error::InvalidArgument(format!(
                "eta_cap {cap} does not exceed ||F||_inf^2 = {eta_lo}"
            )));
        }
        eta_hi = eta_hi.min(cap);
    }

    let mut status = AnisoStatus::BoundaryHinf;
    if eta_hi > eta_lo * (1.0 + f64::EPSILON) {
        let mut failure = None;
        let mut probe = |t: f64| -> f64 {
            if failure.is_some() {
                return f64::INFINITY;
            }
            let eta = t.exp();
            evaluations += 1;
            match objective(f, a, eta, &opts) {
                Ok((value, sol)) => {
                    if value < best.value {
                        best = Probe { eta, value, sol };
                        status = AnisoStatus::Converged;
                    }
                    value
                }
                // The domain edge is only known to rounding accuracy.
                Err(Error::NoStabilizingSolution { .. }) => f64::INFINITY,
                Err(e) => {
                    failure = Some(e);
                    f64::INFINITY
                }
            }
        };
        let steps = brent_minimize(&mut probe, eta_lo.ln(), eta_hi.ln(), query.tol, MAX_EVALUATIONS);
        if let Some(e) = failure {
            return Err(e);
        }
        if steps.is_none() {
            return Err(Error::ToleranceNotReached {
                tol: query.tol,
                evaluations,
            });
        }
    }

    let Probe { eta, value, sol } = best;
    Ok(AnisoNormResult {
        a,
        gamma: value.sqrt(),
        gamma_hat: value,
        eta_star: Some(eta),
        q_star: sol.q,
        phi_star: sol.r * eta,
        evaluations,
        status,
        h2_norm: h2,
        hinf_norm: hinf,
    })
}

/// Brent's minimizer (golden section with parabolic steps) on `[lo, hi]` for
/// a unimodal function. Returns the number of evaluations, or `None` when the
/// budget runs out first.
fn brent_minimize(
    fun: &mut impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    budget: usize,
) -> Option<usize> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    // The objective is evaluated to near full precision, so the usual
    // sqrt(eps) floor on the step is replaced by a few ulps.
    const REL_EPS: f64 = 4.0 * f64::EPSILON;
    let mut x = lo + GOLD * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = fun(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    let mut used = 1;
    loop {
        let mid = 0.5 * (lo + hi);
        let tol1 = REL_EPS * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (hi - lo) {
            return Some(used);
        }
        if used >= budget {
            return None;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { hi - x } else { lo - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = fun(u);
        used += 1;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
}

/// Strictly feasible point of the state-space criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub q: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub r: Matrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub norm: f64,
    pub witness: Option<Witness>,
}

/// The block matrix
/// `[[A'RA - R, A'RB], [B'RA, B'RB - I]] + q [C D]'[C D]`,
/// negative definite for a strictly feasible `(q, R)`.
pub fn sanbrl_lmi(f: &StateSpaceModel, q: f64, r: &Matrix) -> Matrix {
    let (a, b, c, d) = (f.a(), f.b(), f.c(), f.d());
    let (n, m) = (f.states(), f.inputs());
    let mut lmi = Matrix::zeros(n + m, n + m);
    lmi.view_mut((0, 0), (n, n))
        .copy_from(&(a.transpose() * r * a - r));
    let off = a.transpose() * r * b;
    lmi.view_mut((0, n), (n, m)).copy_from(&off);
    lmi.view_mut((n, 0), (m, n)).copy_from(&off.transpose());
    lmi.view_mut((n, n), (m, m))
        .copy_from(&(b.transpose() * r * b - Matrix::identity(m, m)));
    let mut cd = Matrix::zeros(f.outputs(), n + m);
    cd.view_mut((0, 0), (f.outputs(), n)).copy_from(c);
    cd.view_mut((0, n), (f.outputs(), m)).copy_from(d);
    numkit::symmetrize(&(lmi + cd.transpose() * cd * q))
}

/// Log-form slack of the determinant condition
/// `det(I - B'RB - qD'D)^{1/m} > (1 - q gamma^2) exp(2a/m)`; positive exactly
/// when it holds strictly. `-inf` if the left matrix is not positive definite
/// or `q >= gamma^{-2}`.
pub fn determinant_margin(f: &StateSpaceModel, a: f64, gamma: f64, q: f64, r: &Matrix) -> f64 {
    let m = f.inputs();
    let (b, d) = (f.b(), f.d());
    let sigma_inv = Matrix::identity(m, m) - b.transpose() * r * b - d.transpose() * d * q;
    let rhs = 1.0 - q * gamma * gamma;
    match numkit::logdet_pd(&sigma_inv) {
        Ok(ld) if rhs > 0.0 => ld / m as f64 - rhs.ln() - 2.0 * a / m as f64,
        _ => f64::NEG_INFINITY,
    }
}

/// Decides `|||F|||_a < gamma - tol`; when true, also returns `(q, R)` that
/// satisfies the determinant inequality and the LMI strictly.
///
/// The witness needs `1 - q gamma^2 < exp(-2a/m) det(..)^{1/m}`, which has no
/// double-precision solution once `exp(-2a/m)` drops below about `1e-15`.
/// The witness is then `None` even though the decision is `true`.
pub fn aninorm_feasible(f: &StateSpaceModel, a: f64, gamma: f64, tol: f64) -> Result<Feasibility> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let res = anisotropic_norm(&AnisoQuery::new(f.clone(), a).with_tol(tol))?;
    if !(res.gamma < gamma - tol) {
        return Ok(Feasibility {
            feasible: false,
            norm: res.gamma,
            witness: None,
        });
    }
    Ok(Feasibility {
        feasible: true,
        norm: res.gamma,
        witness: build_witness(f, a, gamma, &res)?,
    })
}

fn build_witness(f: &StateSpaceModel, a: f64, gamma: f64, res: &AnisoNormResult) -> Result<Option<Witness>> {
    let opts = RiccatiOptions::default();
    let g2 = gamma * gamma;
    let floor = res.hinf_norm * res.hinf_norm;

    // Any eta > max(gamma^2, ||F||_inf^2) with objective below gamma^2 will do.
    let mut candidates = Vec::new();
    if let Some(eta) = res.eta_star {
        candidates.push(eta);
    }
    let base = g2.max(floor);
    candidates.extend((1..=52).map(|k| base * (1.0 + 0.5f64.powi(k))));
    candidates.extend((1..=200).map(|k| base * 2f64.powi(k)));

    let mut chosen = None;
    for eta in candidates {
        if !(eta > g2 && eta > floor) || !eta.is_finite() {
            continue;
        }
        match objective(f, a, eta, &opts) {
            Ok((value, sol)) if value < g2 => {
                chosen = Some((eta, sol));
                break;
            }
            Ok(_) | Err(Error::NoStabilizingSolution { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some((eta, sol)) = chosen else {
        return Ok(None);
    };
    let q = 1.0 / eta;
    let n = f.states();
    let scale = 1.0 + sol.r.norm();
    let mut delta = 1e-3 * scale;
    while delta > 1e-15 * scale {
        let offset = Matrix::identity(n, n) * delta;
        if let Ok(s) = riccati::dare_stabilizing_offset(f, q, &offset, &opts) {
            let lmi_ok = numkit::max_eigenvalue_sym(&sanbrl_lmi(f, q, &s.r))? < 0.0;
            let pd_ok = n == 0 || numkit::min_eigenvalue_sym(&s.r)? > 0.0;
            if lmi_ok && pd_ok && determinant_margin(f, a, gamma, q, &s.r) > 0.0 {
                return Ok(Some(Witness { q, r: s.r }));
            }
        }
        delta *= 0.1;
    }
    Ok(None)
}

/// `sum ln|u_ii|` of an LU factorization, i.e. `ln|det G|`.
fn ln_abs_det(g: crate::numkit::ComplexMatrix) -> f64 {
    g.lu().u().diagonal().iter().map(|u| u.norm().ln()).sum()
}

/// Mean anisotropy of `W = G V` for Gaussian white `V`:
/// `-(1/4pi) int ln det(m S(w) / ||G||_2^2) dw`, `S = G G*`.
///
/// Periodic trapezoid rule starting at `grid_size` nodes and doubling until
/// successive estimates agree. Returns `+inf` when `S` is numerically
/// singular at a node.
pub fn mean_anisotropy(g: &ShapingFilter, grid_size: usize) -> Result<f64> {
    if grid_size < 64 || !grid_size.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be a power of two >= 64, got {grid_size}"
        )));
    }
    let model = g.model();
    let m = g.dim();
    let h2 = norms::h2_norm(model)?;
    if h2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let offset = m as f64 * (m as f64 / (h2 * h2)).ln();
    // ln det S(w) = 2 ln|det G(e^{iw})|, even in w.
    let node = |k: usize, nodes: usize| -> Result<f64> {
        let w = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        Ok(2.0 * ln_abs_det(model.freq_response(w)?))
    };

    let mut nodes = grid_size;
    let mut sum = 0.0;
    for k in 0..=nodes / 2 {
        let v = node(k, nodes)?;
        if !(v >= LN_RANK_FLOOR) {
            return Ok(f64::INFINITY);
        }
        sum += if k == 0 || k == nodes / 2 { v } else { 2.0 * v };
    }
    let mut estimate = -0.5 * (sum / nodes as f64 + offset);
    loop {
        if nodes >= MAX_GRID {
            return Err(Error::QuadratureFailure(format!(
                "no convergence to {QUAD_TOL} with {nodes} nodes"
            )));
        }
        let finer = 2 * nodes;
        for k in (1..nodes).step_by(2) {
            let v = node(k, finer)?;
            if !(v >= LN_RANK_FLOOR) {
                return Ok(f64::INFINITY);
            }
            sum += 2.0 * v;
        }
        nodes = finer;
        let next = -0.5 * (sum / nodes as f64 + offset);
        let change = (next - estimate).abs();
        estimate = next;
        if change < QUAD_TOL {
            return Ok(estimate.max(0.0));
        }
    }
}

/// `theta G + (1 - theta) I`, sharing `G`'s state.
fn blend(g: &StateSpaceModel, theta: f64) -> Result<StateSpaceModel> {
    let m = g.inputs();
    StateSpaceModel::new(
        g.a().clone(),
        g.b().clone(),
        g.c() * theta,
        g.d() * theta + Matrix::identity(m, m) * (1.0 - theta),
    )
}

/// Pulls `G_raw` toward the identity just far enough that its mean
/// anisotropy drops to `a_target` (within `tol`, from below).
pub fn shaping_blend(g_raw: &ShapingFilter, a_target: f64, tol: f64) -> Result<ShapingFilter> {
    check_level(a_target)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    // A level the quadrature cannot certify counts as above the target.
    let certified = |g: &ShapingFilter| match mean_anisotropy(g, DEFAULT_GRID) {
        Err(Error::QuadratureFailure(_)) => Ok(f64::INFINITY),
        other => other,
    };
    if certified(g_raw)? <= a_target {
        return Ok(g_raw.clone());
    }
    let raw = g_raw.model();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = ShapingFilter::new(blend(raw, 0.0)?)?;
    for _ in 0..200 {
        let theta = 0.5 * (lo + hi);
        let candidate = ShapingFilter::new(blend(raw, theta)?)?;
        let level = certified(&candidate)?;
        if level <= a_target {
            lo = theta;
            best = candidate;
            if level >= a_target - tol {
                break;
            }
        } else {
            hi = theta;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok(best)
}
