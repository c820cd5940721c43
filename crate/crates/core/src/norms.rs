//! H2 and H-infinity norms of stable models.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::numkit::{self, Matrix};
use crate::riccati::{self, RiccatiOptions};

/// Frequency points on `[0, pi]` used to seed the H-inf bisection.
pub const HINF_GRID_POINTS: usize = 512;

/// `P = A P A' + B B'`.
pub fn controllability_gramian(f: &StateSpaceModel) -> Result<Matrix> {
    f.require_stable()?;
    numkit::solve_stein(f.a(), &(f.b() * f.b().transpose()))
}

/// `W = A' W A + C' C`.
pub fn observability_gramian(f: &StateSpaceModel) -> Result<Matrix> {
    f.require_stable()?;
    numkit::solve_stein(&f.a().transpose(), &(f.c().transpose() * f.c()))
}

/// `||F||_2 = sqrt(tr(C P C' + D D'))`.
pub fn h2_norm(f: &StateSpaceModel) -> Result<f64> {
    let p = controllability_gramian(f)?;
    let c = f.c();
    let d = f.d();
    let sq = (c * p * c.transpose()).trace() + (d * d.transpose()).trace();
    Ok(sq.max(0.0).sqrt())
}

/// Bracket on `||F||_inf`: `lower` is a certified gain at some frequency and
/// `upper` passes the bounded-real test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfBounds {
    pub lower: f64,
    pub upper: f64,
    pub peak_frequency: f64,
    pub evaluations: usize,
}

/// H-infinity norm within relative tolerance `tol`, reported as the feasible
/// end of the bisection bracket.
pub fn hinf_norm(f: &StateSpaceModel, tol: f64) -> Result<f64> {
    Ok(hinf_bounds(f, tol, &RiccatiOptions::default())?.upper)
}

/// Largest `sigma_max(F(e^{iw}))` over a uniform grid on `[0, pi]`, refined
/// around the best grid point by golden-section search.
pub fn peak_gain(f: &StateSpaceModel, points: usize) -> Result<(f64, f64)> {
    let gain = |w: f64| -> Result<f64> { numkit::max_singular_value(&f.freq_response(w)?) };
    let points = points.max(2);
    let step = PI / (points - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..points {
        let w = k as f64 * step;
        let g = gain(w)?;
        if g > best.0 {
            best = (g, w);
        }
    }
    let (mut lo, mut hi) = ((best.1 - step).max(0.0), (best.1 + step).min(PI));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (gain(x1)?, gain(x2)?);
    for _ in 0..60 {
        if hi - lo <= 1e-12 {
            break;
        }
        if g1 > g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = gain(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = gain(x2)?;
        }
    }
    for (g, w) in [(g1, x1), (g2, x2)] {
        if g > best.0 {
            best = (g, w);
        }
    }
    Ok(best)
}

pub fn hinf_bounds(f: &StateSpaceModel, tol: f64, opts: &RiccatiOptions) -> Result<HinfBounds> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    f.require_stable()?;
    if f.states() == 0 {
        let s = numkit::max_singular_value(f.d())?;
        return Ok(HinfBounds {
            lower: s,
            upper: s * (1.0 + tol),
            peak_frequency: 0.0,
            evaluations: 0,
        });
    }
    let (peak, peak_frequency) = peak_gain(f, HINF_GRID_POINTS)?;
    if peak == 0.0 {
        return Ok(HinfBounds {
            lower: 0.0,
            upper: 0.0,
            peak_frequency,
            evaluations: 0,
        });
    }

    let mut evaluations = 0;
    let mut feasible = |gamma: f64| -> Result<bool> {
        evaluations += 1;
        match riccati::dare_stabilizing(f, gamma.powi(-2), opts) {
            Ok(_) => Ok(true),
            Err(
                Error::NoStabilizingSolution { .. }
                | Error::MaxIterationsExceeded(_)
                | Error::ToleranceNotReached { .. },
            ) => Ok(false),
            Err(e) => Err(e),
        }
    };

    // The grid peak is a gain actually attained, hence never above the norm.
    let mut lo = peak;
    let mut hi = peak * (1.0 + 1e-3);
    let mut grown = 0;
    while !feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 200 || !hi.is_finite() {
            return Err(Error::BracketFailure(format!(
                "no feasible H-inf level found above {peak}"
            )));
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(HinfBounds {
        lower: peak.max(lo.min(hi)),
        upper: hi,
        peak_frequency,
        evaluations,
    })
}
