//! Exact Gaussian-process machinery: Cholesky factorization with a jitter
//! ladder, field simulation, the Gaussian log-likelihood, and AIC.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{build_cov_matrix, ParamField};
use crate::error::{Error, Result};
use crate::field::{Location, Region, RngSeed, SpatialField, StreamKind};

/// Diagonal jitter levels tried in order, as multiples of the mean diagonal.
const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// Lower-triangular Cholesky factor of a (possibly jittered) symmetric
/// positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Array2<f64>,
    applied_jitter: f64,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Array2<f64> {
        &self.l
    }

    /// The absolute value added to every diagonal entry before factorization
    /// succeeded (0 when no jitter was needed).
    pub fn applied_jitter(&self) -> f64 {
        self.applied_jitter
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// log |M| of the factored matrix, via the diagonal of L.
    pub fn logdet(&self) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.l[[i, i]].ln();
        }
        2.0 * acc
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let l = self.l.as_slice().expect("contiguous");
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s = dot(row, &y[..i]);
            y[i] = (y[i] - s) / l[i * n + i];
        }
        y
    }

    /// Solves `L^T x = b` by backward substitution.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let l = self.l.as_slice().expect("contiguous");
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= l[j * n + i] * x[j];
            }
            x[i] = s / l[i * n + i];
        }
        x
    }

    /// Computes `L u`.
    pub fn mul_lower(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(u.len(), n, "vector length mismatch");
        let l = self.l.as_slice().expect("contiguous");
        (0..n).map(|i| dot(&l[i * n..i * n + i + 1], &u[..i + 1])).collect()
    }
}

/// Four-way unrolled dot product; fixed association order keeps results
/// deterministic while letting the compiler vectorize.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..chunks {
        let i = k * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Row-by-row Cholesky of the buffer in place. Returns the failing pivot row
/// on breakdown. The strict upper triangle is zeroed.
fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j];
            let s = dot(&row_i[..j], row_j);
            row_i[j] = (row_i[j] - s) / done[j * n + j];
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(i);
        }
        row_i[i] = d.sqrt();
        for v in row_i[i + 1..].iter_mut() {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Cholesky factorization with an escalating diagonal jitter ladder
/// (0, 1e-10, ..., 1e-4 times the mean diagonal). The applied jitter is
/// recorded in the factor; failure after the last rung reports the failing
/// pivot.
pub fn cholesky_jittered(m: &Array2<f64>) -> Result<CholeskyFactor> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::ShapeMismatch(format!("matrix is {}x{}", n, m.ncols())));
    }
    let src = m.as_slice().ok_or_else(|| Error::ShapeMismatch("matrix not contiguous".into()))?;
    let mut max_abs = 0.0f64;
    for &v in src {
        if !v.is_finite() {
            return Err(Error::invalid("matrix", "non-finite entry"));
        }
        max_abs = max_abs.max(v.abs());
    }
    let sym_tol = 1e-12 * max_abs.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (src[i * n + j] - src[j * n + i]).abs() > sym_tol {
                return Err(Error::invalid("matrix", format!("asymmetric at ({i}, {j})")));
            }
        }
    }

    let mean_diag = (0..n).map(|i| src[i * n + i]).sum::<f64>() / n as f64;
    let mut buf = vec![0.0f64; n * n];
    let mut last_pivot = 0;
    for level in JITTER_LADDER {
        let jitter = level * mean_diag;
        buf.copy_from_slice(src);
        for i in 0..n {
            buf[i * n + i] += jitter;
        }
        match cholesky_in_place(&mut buf, n) {
            Ok(()) => {
                let l = Array2::from_shape_vec((n, n), buf).expect("square buffer");
                return Ok(CholeskyFactor { l, applied_jitter: jitter });
            }
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::NotPositiveDefinite { pivot: last_pivot, max_jitter: JITTER_LADDER[4] * mean_diag })
}

/// Simulates a zero-mean field at `locations` under the smoothed parameters
/// of `pf`: `Z = L u` with `u` i.i.d. standard normal drawn from the
/// field-noise stream of `seed`. Deterministic given the seed.
pub fn simulate(locations: &[Location], pf: &ParamField, seed: RngSeed) -> Result<SpatialField> {
    simulate_in_region(locations, None, pf, seed)
}

/// [`simulate`] with an explicit observation region (defaults to the
/// bounding box of the locations).
pub fn simulate_in_region(
    locations: &[Location],
    region: Option<Region>,
    pf: &ParamField,
    seed: RngSeed,
) -> Result<SpatialField> {
    let cov = build_cov_matrix(locations, pf);
    let chol = cholesky_jittered(&cov)?;
    let mut rng = seed.stream(StreamKind::FieldNoise, 0);
    let u: Vec<f64> = (0..locations.len()).map(|_| rng.sample(StandardNormal)).collect();
    let z = chol.mul_lower(&u);
    match region {
        Some(r) => SpatialField::new(locations.to_vec(), z, r),
        None => SpatialField::from_observations(locations.to_vec(), z),
    }
}

/// The Gaussian log-likelihood and its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikResult {
    /// log L = -(n/2) ln(2 pi) - logdet/2 - quad_form/2.
    pub loglik: f64,
    /// Number of observations.
    pub n: usize,
    /// log |Sigma|.
    pub logdet: f64,
    /// Z^T Sigma^{-1} Z.
    pub quad_form: f64,
    /// Diagonal jitter applied before the factorization succeeded.
    pub applied_jitter: f64,
}

/// Exact zero-mean Gaussian log-likelihood of `field` under the
/// nonstationary covariance induced by `pf`.
pub fn log_likelihood(field: &SpatialField, pf: &ParamField) -> Result<LogLikResult> {
    let cov = build_cov_matrix(field.locations(), pf);
    log_likelihood_with_cov(field.values(), &cov)
}

/// Log-likelihood of `values` under an explicit covariance matrix. The
/// quadratic form is computed with two triangular solves, never an explicit
/// inverse.
pub fn log_likelihood_with_cov(values: &[f64], cov: &Array2<f64>) -> Result<LogLikResult> {
    let n = values.len();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} values vs {}x{} covariance",
            n,
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cholesky_jittered(cov)?;
    let logdet = chol.logdet();
    let y = chol.solve_lower(values);
    let x = chol.solve_lower_transpose(&y);
    let quad_form = dot(values, &x);
    let loglik = -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * quad_form;
    Ok(LogLikResult { loglik, n, logdet, quad_form, applied_jitter: chol.applied_jitter() })
}

/// Akaike information criterion: `2 k - 2 loglik`.
pub fn aic(loglik: f64, k_params: usize) -> f64 {
    2.0 * k_params as f64 - 2.0 * loglik
}
