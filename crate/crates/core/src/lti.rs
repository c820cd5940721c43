//! Discrete-time state-space models.
//!
//! ```text
//! x[k+1] = A x[k] + B w[k]
//!   z[k] = C x[k] + D w[k]
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{self, ComplexMatrix, Matrix};

/// A stable or unstable LTI realization `(A, B, C, D)` with `n` states,
/// `m` inputs and `p` outputs. `n = 0` describes a static gain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl StateSpaceModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        let (p, m) = d.shape();
        let check = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            }
        };
        check("A", a.shape(), (n, n))?;
        check("B", b.shape(), (n, m))?;
        check("C", c.shape(), (p, n))?;
        numkit::ensure_finite(&a, "A")?;
        numkit::ensure_finite(&b, "B")?;
        numkit::ensure_finite(&c, "C")?;
        numkit::ensure_finite(&d, "D")?;
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `z = D w`.
    pub fn static_gain(d: Matrix) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(Matrix::zeros(0, 0), Matrix::zeros(0, m), Matrix::zeros(p, 0), d)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        numkit::spectral_radius(&self.a)
    }

    /// `rho(A) < 1`. The unit circle itself counts as unstable.
    pub fn is_stable(&self) -> bool {
        self.is_stable_with_margin(0.0)
    }

    pub fn is_stable_with_margin(&self, margin: f64) -> bool {
        self.spectral_radius().is_ok_and(|r| r < 1.0 - margin)
    }

    pub(crate) fn require_stable(&self) -> Result<()> {
        let rho = self.spectral_radius()?;
        if rho < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable(rho))
        }
    }

    /// Boundary value `C (e^{iw} I - A)^{-1} B + D` of the transfer function.
    pub fn freq_response(&self, omega: f64) -> Result<ComplexMatrix> {
        let d = self.d.map(|x| Complex64::new(x, 0.0));
        let n = self.states();
        if n == 0 {
            return Ok(d);
        }
        let z = Complex64::from_polar(1.0, omega);
        let resolvent = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let b = self.b.map(|x| Complex64::new(x, 0.0));
        let lu = resolvent.lu();
        let pivot_floor = f64::EPSILON * (1.0 + self.a.norm());
        if lu.u().diagonal().iter().any(|u| u.norm() <= pivot_floor) {
            return Err(Error::SingularResolvent(omega));
        }
        let x = lu.solve(&b).ok_or(Error::SingularResolvent(omega))?;
        let c = self.c.map(|x| Complex64::new(x, 0.0));
        Ok(c * x + d)
    }

    /// Series connection: `G` drives `self`, so the result maps `G`'s input
    /// to `self`'s output. State is stacked as `[x_self; x_g]`.
    pub fn cascade(&self, g: &StateSpaceModel) -> Result<StateSpaceModel> {
        if self.inputs() != g.outputs() {
            return Err(Error::Dimension(format!(
                "cascade needs {} outputs from the driving system, it has {}",
                self.inputs(),
                g.outputs()
            )));
        }
        let (nf, ng) = (self.states(), g.states());
        let n = nf + ng;
        let m = g.inputs();
        let p = self.outputs();

        let mut a = Matrix::zeros(n, n);
        a.view_mut((0, 0), (nf, nf)).copy_from(&self.a);
        a.view_mut((0, nf), (nf, ng)).copy_from(&(&self.b * &g.c));
        a.view_mut((nf, nf), (ng, ng)).copy_from(&g.a);

        let mut b = Matrix::zeros(n, m);
        b.view_mut((0, 0), (nf, m)).copy_from(&(&self.b * &g.d));
        b.view_mut((nf, 0), (ng, m)).copy_from(&g.b);

        let mut c = Matrix::zeros(p, n);
        c.view_mut((0, 0), (p, nf)).copy_from(&self.c);
        c.view_mut((0, nf), (p, ng)).copy_from(&(&self.d * &g.c));

        StateSpaceModel::new(a, b, c, &self.d * &g.d)
    }

    /// Seeded random stable model: `A = Z * (rho / rho(Z))` with `Z` standard
    /// normal and `rho` uniform on `(0, rho_cap)`; `B`, `C`, `D` standard normal.
    pub fn random_stable(n: usize, m: usize, p: usize, seed: u64, rho_cap: f64) -> Result<Self> {
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "random_stable needs n, m, p >= 1 (got {n}, {m}, {p})"
            )));
        }
        if !(rho_cap > 0.0 && rho_cap <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho_cap must lie in (0, 1], got {rho_cap}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
        };
        loop {
            let z = normal(n, n, &mut rng);
            let rho_z = numkit::spectral_radius(&z)?;
            let target = rho_cap * rng.random::<f64>();
            if rho_z == 0.0 || target == 0.0 {
                continue;
            }
            let a = z * (target / rho_z);
            if numkit::spectral_radius(&a)? >= 1.0 {
                continue;
            }
            let b = normal(n, m, &mut rng);
            let c = normal(p, n, &mut rng);
            let d = normal(p, m, &mut rng);
            return Self::new(a, b, c, d);
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// On-disk layout: `{"A": [[..]], "B": [[..]], "C": [[..]], "D": [[..]]}`,
/// row-major, no other keys.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

impl From<&StateSpaceModel> for ModelFile {
    fn from(f: &StateSpaceModel) -> Self {
        ModelFile {
            a: numkit::matrix_to_rows(&f.a),
            b: numkit::matrix_to_rows(&f.b),
            c: numkit::matrix_to_rows(&f.c),
            d: numkit::matrix_to_rows(&f.d),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<StateSpaceModel> {
        let d = numkit::matrix_from_rows(&self.d, 0)?;
        let n = self.a.len();
        let a = numkit::matrix_from_rows(&self.a, 0)?;
        // Empty row lists carry no column count; take it from the other blocks.
        let b = numkit::matrix_from_rows(&self.b, d.ncols())?;
        let c = numkit::matrix_from_rows(&self.c, n)?;
        StateSpaceModel::new(a, b, c, d)
    }
}

/// Square stable model used as a noise-shaping filter `W = G V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingFilter {
    model: StateSpaceModel,
}

impl ShapingFilter {
    pub fn new(model: StateSpaceModel) -> Result<Self> {
        if model.inputs() != model.outputs() {
            return Err(Error::NotSquare {
                outputs: model.outputs(),
                inputs: model.inputs(),
            });
        }
        model.require_stable()?;
        Ok(Self { model })
    }

    /// Static `lambda * I_m`, an all-pass filter up to scale.
    pub fn scaled_identity(m: usize, lambda: f64) -> Self {
        let model = StateSpaceModel::static_gain(Matrix::identity(m, m) * lambda)
            .expect("static gain is well formed");
        Self { model }
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.inputs()
    }

    pub fn into_model(self) -> StateSpaceModel {
        self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceModel {
        StateSpaceModel::new(dmatrix![a], dmatrix![b], dmatrix![c], dmatrix![d]).unwrap()
    }

    #[test]
    fn stability_examples() {
        assert!(scalar(0.0, 1.0, 1.0, 0.0).is_stable());
        assert!(!scalar(1.0, 1.0, 1.0, 0.0).is_stable());
        let f = StateSpaceModel::new(
            Matrix::from_diagonal(&nalgebra::dvector![0.99, -0.5]),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(f.is_stable());
    }

    #[test]
    fn dimension_checks() {
        let err = StateSpaceModel::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(3, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        let mut a = Matrix::zeros(1, 1);
        a[(0, 0)] = f64::INFINITY;
        assert!(matches!(
            StateSpaceModel::new(a, Matrix::zeros(1, 1), Matrix::zeros(1, 1), Matrix::zeros(1, 1)),
            Err(Error::NonFinite("A"))
        ));
    }

    #[test]
    fn freq_response_examples() {
        let f = StateSpaceModel::new(
            dmatrix![0.3, 0.1; 0.0, -0.2],
            Matrix::zeros(2, 2),
            dmatrix![1.0, 2.0],
            dmatrix![4.0, -1.0],
        )
        .unwrap();
        for w in [-3.0, 0.0, 1.0, 2.5] {
            let r = f.freq_response(w).unwrap();
            assert_abs_diff_eq!(r[(0, 0)].re, 4.0);
            assert_abs_diff_eq!(r[(0, 1)].re, -1.0);
            assert_eq!(r[(0, 0)].im, 0.0);
        }

        let g = scalar(0.5, 1.0, 1.0, 0.0);
        let r = g.freq_response(0.0).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(0, 0)].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn freq_response_singular_on_unit_circle_pole() {
        let g = scalar(1.0, 1.0, 1.0, 0.0);
        assert!(matches!(g.freq_response(0.0), Err(Error::SingularResolvent(_))));
    }

    #[test]
    fn cascade_with_static_identity_preserves_response() {
        let f = StateSpaceModel::random_stable(3, 2, 2, 9, 0.9).unwrap();
        let id = StateSpaceModel::static_gain(Matrix::identity(2, 2)).unwrap();
        let fg = f.cascade(&id).unwrap();
        for k in 0..10 {
            let w = -3.0 + 0.6 * k as f64;
            let diff = fg.freq_response(w).unwrap() - f.freq_response(w).unwrap();
            assert!(diff.iter().all(|z| z.norm() <= 1e-12));
        }
    }

    #[test]
    fn cascade_of_static_gains_multiplies() {
        let d1 = dmatrix![1.0, 2.0; 0.0, 1.0; 3.0, -1.0];
        let d2 = dmatrix![0.5, 1.0, 0.0; -1.0, 2.0, 1.0];
        let f = StateSpaceModel::static_gain(d1.clone()).unwrap();
        let g = StateSpaceModel::static_gain(d2.clone()).unwrap();
        let fg = f.cascade(&g).unwrap();
        assert_eq!(fg.states(), 0);
        assert_eq!(fg.d(), &(d1 * d2));
    }

    #[test]
    fn cascade_dimension_mismatch() {
        let f = StateSpaceModel::random_stable(2, 3, 2, 1, 0.9).unwrap();
        let g = StateSpaceModel::random_stable(2, 2, 2, 2, 0.9).unwrap();
        assert!(matches!(f.cascade(&g), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_stable_is_deterministic() {
        let a = StateSpaceModel::random_stable(4, 3, 2, 42, 0.95).unwrap();
        let b = StateSpaceModel::random_stable(4, 3, 2, 42, 0.95).unwrap();
        assert_eq!(a, b);
        let c = StateSpaceModel::random_stable(4, 3, 2, 43, 0.95).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_stable_rejects_bad_arguments() {
        assert!(StateSpaceModel::random_stable(0, 1, 1, 0, 0.5).is_err());
        assert!(StateSpaceModel::random_stable(1, 1, 1, 0, 1.5).is_err());
        assert!(StateSpaceModel::random_stable(1, 1, 1, 0, 0.0).is_err());
    }

    #[test]
    fn thousand_draws_are_stable() {
        for seed in 0..1000u64 {
            let n = 1 + (seed % 8) as usize;
            let f = StateSpaceModel::random_stable(n, 2, 2, seed, 0.999).unwrap();
            assert!(f.is_stable(), "seed {seed}");
            assert!(f.spectral_radius().unwrap() < 0.999 + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_and_schema_errors() {
        let f = StateSpaceModel::random_stable(3, 2, 2, 7, 0.9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        f.save(&path).unwrap();
        assert_eq!(StateSpaceModel::load(&path).unwrap(), f);

        let missing_d = r#"{"A": [[0.5]], "B": [[1.0]], "C": [[1.0]]}"#;
        assert!(matches!(
            StateSpaceModel::from_json_str(missing_d),
            Err(Error::Schema(_))
        ));

        let extra = r#"{"A": [[0.5]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "Ts": 1}"#;
        assert!(matches!(
            StateSpaceModel::from_json_str(extra),
            Err(Error::Schema(_))
        ));

        let ragged = r#"{"A": [[0.5, 0.0], [0.1]], "B": [[1.0], [0.0]], "C": [[1.0, 0.0]], "D": [[0.0]]}"#;
        assert!(matches!(
            StateSpaceModel::from_json_str(ragged),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn static_model_from_json() {
        let text = r#"{"A": [], "B": [], "C": [[], []], "D": [[1.0, 0.0], [0.0, 0.0]]}"#;
        let f = StateSpaceModel::from_json_str(text).unwrap();
        assert_eq!((f.states(), f.inputs(), f.outputs()), (0, 2, 2));
        assert_eq!(StateSpaceModel::from_json_str(&f.to_json_string()).unwrap(), f);
    }

    #[test]
    fn shaping_filter_requires_square_stable() {
        let f = StateSpaceModel::random_stable(2, 3, 2, 1, 0.9).unwrap();
        assert!(matches!(ShapingFilter::new(f), Err(Error::NotSquare { .. })));
        let unstable = scalar(1.2, 1.0, 1.0, 1.0);
        assert!(matches!(ShapingFilter::new(unstable), Err(Error::Unstable(_))));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn freq_response_conjugate_symmetry(seed in 0u64..10_000, w in 0.0f64..std::f64::consts::PI) {
            let f = StateSpaceModel::random_stable(3, 2, 2, seed, 0.95).unwrap();
            let plus = f.freq_response(w).unwrap();
            let minus = f.freq_response(-w).unwrap();
            let scale = 1.0 + plus.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (x, y) in plus.iter().zip(minus.iter()) {
                proptest::prop_assert!((x.conj() - y).norm() <= 1e-10 * scale);
            }
        }

        #[test]
        fn cascade_response_factorizes(seed in 0u64..10_000) {
            let f = StateSpaceModel::random_stable(3, 2, 3, seed, 0.9).unwrap();
            let g = StateSpaceModel::random_stable(2, 2, 2, seed ^ 0x5555, 0.9).unwrap();
            let fg = f.cascade(&g).unwrap();
            for k in 0..32 {
                let w = -std::f64::consts::PI + (k as f64 + 0.5) * std::f64::consts::PI / 16.0;
                let prod = f.freq_response(w).unwrap() * g.freq_response(w).unwrap();
                let direct = fg.freq_response(w).unwrap();
                for (x, y) in prod.iter().zip(direct.iter()) {
                    proptest::prop_assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
                }
            }
        }
    }
}
