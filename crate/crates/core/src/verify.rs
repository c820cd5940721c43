//! Oracles that check the main algorithm by other routes.
//!
//! The grid oracle shares only the Riccati kernel with [`anisotropic_norm`]
//! and searches over `q` on a fixed grid instead of over `eta` adaptively.
//! The Monte Carlo oracle shares nothing but H2 norms, series connection and
//! the mean-anisotropy quadrature.
//!
//! [`anisotropic_norm`]: crate::anisotropy::anisotropic_norm

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::anisotropy::{self, AnisoNormResult, AnisoQuery, AnisoStatus};
use crate::error::{Error, Result};
use crate::lti::{ShapingFilter, StateSpaceModel};
use crate::norms;
use crate::numkit;
use crate::riccati::{self, RiccatiOptions};

/// Relative distance of the grid ends from `0` and `||F||_inf^{-2}`.
const GRID_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOracleResult {
    pub gamma: f64,
    pub q_star: f64,
    /// Riccati solves on the grid.
    pub evaluations: usize,
}

/// `gamma^2(q) = (1 - exp(-2a/m) det(Sigma^{-1}(q))^{1/m}) / q`.
fn gamma_sq_of_q(f: &StateSpaceModel, a: f64, q: f64, opts: &RiccatiOptions) -> Result<f64> {
    let m = f.inputs() as f64;
    let sol = riccati::dare_stabilizing(f, q, opts)?;
    Ok(-((sol.logdet_sigma_inv - 2.0 * a) / m).exp_m1() / q)
}

/// Minimum of `gamma(q)` over `grid_size` points spread uniformly in
/// `ln(q / (q_max - q))`, which is logarithmic near both `0` and
/// `q_max = ||F||_inf^{-2}`.
pub fn grid_oracle_norm(f: &StateSpaceModel, a: f64, grid_size: usize) -> Result<GridOracleResult> {
    if grid_size < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be >= 100, got {grid_size}"
        )));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "anisotropy level must be finite and >= 0, got {a}"
        )));
    }
    let opts = RiccatiOptions::default();
    let hinf = norms::hinf_bounds(f, 1e-9, &opts)?.upper;
    if hinf == 0.0 {
        return Ok(GridOracleResult {
            gamma: 0.0,
            q_star: 0.0,
            evaluations: 0,
        });
    }
    let q_max = hinf.powi(-2);
    let s_lo = (GRID_EPS / (1.0 - GRID_EPS)).ln();
    let s_hi = -s_lo;
    let step = (s_hi - s_lo) / (grid_size - 1) as f64;

    let mut best = (f64::INFINITY, 0.0);
    let mut evaluations = 0;
    for k in 0..grid_size {
        let s = s_lo + k as f64 * step;
        let q = q_max / (1.0 + (-s).exp());
        evaluations += 1;
        match gamma_sq_of_q(f, a, q, &opts) {
            Ok(g2) if g2 < best.0 => best = (g2, q),
            Ok(_) => {}
            Err(Error::NoStabilizingSolution { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if !best.0.is_finite() {
        return Err(Error::NoStabilizingSolution { q: q_max });
    }
    Ok(GridOracleResult {
        gamma: best.0.sqrt(),
        q_star: best.1,
        evaluations,
    })
}

/// Seed for sample `index`, a splitmix64 step away from `seed`.
fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Power gain `||F G||_2 / ||G||_2`.
pub fn power_gain(f: &StateSpaceModel, g: &ShapingFilter) -> Result<f64> {
    Ok(norms::h2_norm(&f.cascade(g.model())?)? / norms::h2_norm(g.model())?)
}

/// Largest power gain over `samples` random shaping filters with mean
/// anisotropy at most `a`. Sample 0 is the identity filter. Random samples
/// whose anisotropy cannot be certified by quadrature are skipped.
pub fn monte_carlo_lower_bound(f: &StateSpaceModel, a: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let m = f.inputs();
    let gains: Vec<Result<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return power_gain(f, &ShapingFilter::scaled_identity(m, 1.0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let order = rng.random_range(1..=3);
            let raw = StateSpaceModel::random_stable(order, m, m, rng.random(), 0.9)?;
            match anisotropy::shaping_blend(&ShapingFilter::new(raw)?, a, 1e-6) {
                Ok(g) => power_gain(f, &g),
                Err(Error::QuadratureFailure(_)) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut best = 0.0f64;
    for gain in gains {
        best = best.max(gain?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckEntry {
    /// Passes when `observed <= bound`.
    fn at_most(name: String, observed: f64, bound: f64) -> Self {
        Self {
            pass: observed <= bound,
            name,
            observed,
            bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitsReport {
    pub h2_scaled: f64,
    pub hinf: f64,
    pub levels: Vec<f64>,
    pub norms: Vec<f64>,
    pub checks: Vec<CheckEntry>,
    pub pass: bool,
}

/// Checks along a sorted list of levels: monotonicity, the
/// `||F||_2/sqrt(m) <= |||F|||_a <= ||F||_inf` sandwich, and two properties
/// of each witness `Phi`: `tr(B'PhiB + D'D) <= m gamma_hat` and
/// `A'PhiA - Phi + C'C <= 0`. Failures are recorded, not raised.
pub fn limits_check(f: &StateSpaceModel, a_list: &[f64]) -> Result<LimitsReport> {
    if a_list.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("a_list must be sorted ascending".into()));
    }
    let m = f.inputs() as f64;
    let results: Vec<AnisoNormResult> = a_list
        .iter()
        .map(|&a| anisotropy::anisotropic_norm(&AnisoQuery::new(f.clone(), a)))
        .collect::<Result<_>>()?;
    let h2_scaled = norms::h2_norm(f)? / m.sqrt();
    let hinf = norms::hinf_norm(f, 1e-9)?;
    let mut checks = Vec::new();

    for (w, r) in a_list.windows(2).zip(results.windows(2)) {
        checks.push(CheckEntry::at_most(
            format!("nondecreasing a={}..{}", w[0], w[1]),
            r[0].gamma - r[1].gamma,
            1e-8,
        ));
    }
    for r in &results {
        let a = r.a;
        checks.push(CheckEntry {
            name: format!("above scaled H2 a={a}"),
            observed: r.gamma,
            bound: h2_scaled - 1e-6,
            pass: r.gamma >= h2_scaled - 1e-6,
        });
        checks.push(CheckEntry::at_most(
            format!("below H-inf a={a}"),
            r.gamma,
            hinf + 1e-6,
        ));

        let phi = &r.phi_star;
        let (am, b, c, d) = (f.a(), f.b(), f.c(), f.d());
        let trace = (b.transpose() * phi * b + d.transpose() * d).trace();
        checks.push(CheckEntry::at_most(
            format!("witness trace a={a}"),
            trace,
            m * r.gamma_hat * (1.0 + 1e-8),
        ));
        let lyap = am.transpose() * phi * am - phi + c.transpose() * c;
        let top = if f.states() == 0 {
            f64::NEG_INFINITY
        } else {
            numkit::max_eigenvalue_sym(&lyap)?
        };
        checks.push(CheckEntry::at_most(
            format!("witness Lyapunov a={a}"),
            top,
            1e-8 * (1.0 + phi.norm()),
        ));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(LimitsReport {
        h2_scaled,
        hinf,
        levels: a_list.to_vec(),
        norms: results.iter().map(|r| r.gamma).collect(),
        checks,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub triples: usize,
    /// Largest `(f(mid) - (f(e1) + f(e2))/2) / (1 + |f(mid)|)`, floored at 0.
    pub worst_violation: f64,
    pub worst_pair: Option<(f64, f64)>,
}

/// Relative midpoint-convexity defect of `gamma_hat_of_eta` at `(eta1, eta2)`.
pub fn midpoint_violation(f: &StateSpaceModel, a: f64, eta1: f64, eta2: f64) -> Result<f64> {
    let f1 = anisotropy::gamma_hat_of_eta(f, a, eta1)?;
    let f2 = anisotropy::gamma_hat_of_eta(f, a, eta2)?;
    let fm = anisotropy::gamma_hat_of_eta(f, a, 0.5 * (eta1 + eta2))?;
    Ok((fm - 0.5 * (f1 + f2)) / (1.0 + fm.abs()))
}

/// Midpoint convexity on `n_triples` pairs drawn log-uniformly from
/// `(||F||_inf^2, ceiling)`, where the ceiling is the `eta` localization bound
/// (or `1e3 ||F||_inf^2` at `a = 0`).
pub fn convexity_probe(f: &StateSpaceModel, a: f64, n_triples: usize, seed: u64) -> Result<ConvexityReport> {
    if n_triples == 0 {
        return Err(Error::InvalidArgument("n_triples must be >= 1".into()));
    }
    let res = anisotropy::anisotropic_norm(&AnisoQuery::new(f.clone(), a))?;
    let lo = res.hinf_norm * res.hinf_norm;
    if lo == 0.0 {
        return Ok(ConvexityReport {
            triples: n_triples,
            worst_violation: 0.0,
            worst_pair: None,
        });
    }
    let m = f.inputs() as f64;
    let ceiling = if res.status == AnisoStatus::BoundaryA0 {
        1e3 * lo
    } else {
        (res.gamma_hat / -(-2.0 * a / m).exp_m1()).clamp(2.0 * lo, 1e3 * lo)
    };
    let (ln_lo, ln_hi) = ((lo * (1.0 + 1e-6)).ln(), ceiling.ln());
    let violations: Vec<Result<(f64, (f64, f64))>> = (0..n_triples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
            let e1 = rng.random_range(ln_lo..ln_hi).exp();
            let e2 = rng.random_range(ln_lo..ln_hi).exp();
            Ok((midpoint_violation(f, a, e1, e2)?, (e1, e2)))
        })
        .collect();
    let mut worst = (0.0, None);
    for v in violations {
        let (value, pair) = v?;
        if value > worst.0 {
            worst = (value, Some(pair));
        }
    }
    Ok(ConvexityReport {
        triples: n_triples,
        worst_violation: worst.0,
        worst_pair: worst.1,
    })
}
