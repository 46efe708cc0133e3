//! Stationary and nonstationary Matern covariance, kernel smoothing of
//! spatially varying parameters, and covariance-matrix assembly.
//!
//! The nonstationary kernel combines per-location standard deviation,
//! anisotropy, smoothness, and nugget through averaged anisotropy and a
//! Mahalanobis distance; spatially varying parameters are represented as a
//! Gaussian-kernel mixture of the values at K anchor locations.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Location;
use crate::special::{bessel_k, gamma};

/// Parameters of the stationary isotropic Matern kernel
/// `M(h) = sigma2 / (2^{nu-1} Gamma(nu)) (h/alpha)^nu K_nu(h/alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryParams {
    /// Variance at distance zero.
    pub sigma2: f64,
    /// Range parameter.
    pub alpha: f64,
    /// Smoothness order.
    pub nu: f64,
}

impl StationaryParams {
    pub fn new(sigma2: f64, alpha: f64, nu: f64) -> Result<Self> {
        let p = StationaryParams { sigma2, alpha, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2", self.sigma2), ("alpha", self.alpha), ("nu", self.nu)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid("StationaryParams", format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Local (per-location) parameters of the nonstationary Matern kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    /// Standard deviation sigma(s).
    pub sigma: f64,
    /// First anisotropy eigenvalue.
    pub lambda1: f64,
    /// Second anisotropy eigenvalue.
    pub lambda2: f64,
    /// Rotation angle in (0, pi/2].
    pub phi: f64,
    /// Smoothness nu(s).
    pub nu: f64,
    /// Nugget standard deviation tau(s) >= 0.
    pub tau: f64,
}

impl LocalParams {
    pub fn new(sigma: f64, lambda1: f64, lambda2: f64, phi: f64, nu: f64, tau: f64) -> Result<Self> {
        let p = LocalParams { sigma, lambda1, lambda2, phi, nu, tau };
        p.validate()?;
        Ok(p)
    }

    /// Isotropic local parameters: lambda1 = lambda2 = lambda, phi = pi/2,
    /// no nugget. This is the shape the fitting layer optimizes.
    pub fn isotropic(sigma: f64, lambda: f64, nu: f64) -> Result<Self> {
        LocalParams::new(sigma, lambda, lambda, std::f64::consts::FRAC_PI_2, nu, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("nu", self.nu),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid("LocalParams", format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !self.phi.is_finite() || self.phi <= 0.0 || self.phi > std::f64::consts::FRAC_PI_2 {
            return Err(Error::invalid("LocalParams", format!("phi must lie in (0, pi/2], got {}", self.phi)));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::invalid("LocalParams", format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Spatially varying parameters defined everywhere by Gaussian-kernel mixing
/// of the values at K anchor locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamField {
    anchors: Vec<Location>,
    anchor_params: Vec<LocalParams>,
    bandwidth: f64,
}

impl ParamField {
    pub fn new(anchors: Vec<Location>, anchor_params: Vec<LocalParams>, bandwidth: f64) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("anchors", "need at least one anchor"));
        }
        if anchors.len() != anchor_params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} anchors vs {} parameter sets",
                anchors.len(),
                anchor_params.len()
            )));
        }
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::invalid("bandwidth", format!("must be finite and > 0, got {bandwidth}")));
        }
        for p in &anchor_params {
            p.validate()?;
        }
        for i in 0..anchors.len() {
            for j in (i + 1)..anchors.len() {
                if anchors[i] == anchors[j] {
                    return Err(Error::invalid("anchors", format!("anchors {i} and {j} coincide")));
                }
            }
        }
        Ok(ParamField { anchors, anchor_params, bandwidth })
    }

    /// A single-anchor field, i.e. spatially constant parameters.
    pub fn constant(anchor: Location, params: LocalParams, bandwidth: f64) -> Result<Self> {
        ParamField::new(vec![anchor], vec![params], bandwidth)
    }

    pub fn anchors(&self) -> &[Location] {
        &self.anchors
    }

    pub fn anchor_params(&self) -> &[LocalParams] {
        &self.anchor_params
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn k(&self) -> usize {
        self.anchors.len()
    }

    /// Same anchors and bandwidth, new parameter values.
    pub fn with_params(&self, anchor_params: Vec<LocalParams>) -> Result<Self> {
        ParamField::new(self.anchors.clone(), anchor_params, self.bandwidth)
    }
}

/// Stationary Matern covariance at distance `h >= 0`.
///
/// Returns `sigma2` at the origin (the continuity limit) and decays strictly
/// with distance.
pub fn matern(h: f64, p: &StationaryParams) -> f64 {
    debug_assert!(h >= 0.0, "matern distance must be nonnegative");
    if h <= 0.0 {
        return p.sigma2;
    }
    let t = h / p.alpha;
    // sigma2 * 2 (t/2)^nu K_nu(t) / Gamma(nu); the normalization makes the
    // limit at t -> 0 equal sigma2.
    match bessel_k(p.nu, t) {
        Ok(k) => p.sigma2 * 2.0 * (0.5 * t).powf(p.nu) * k / gamma(p.nu),
        Err(_) => 0.0, // K_nu underflows only for huge t where the covariance is 0
    }
}

/// Solves `M(h_eff; 1, alpha, nu) = 0.05` for the range `alpha` by bracketing
/// and bisection on `alpha in [1e-8, 1e4]`.
pub fn solve_alpha_from_effective_range(h_eff: f64, nu: f64) -> Result<f64> {
    if !h_eff.is_finite() || h_eff <= 0.0 {
        return Err(Error::domain("solve_alpha", format!("h_eff must be > 0, got {h_eff}")));
    }
    if !nu.is_finite() || nu <= 0.0 {
        return Err(Error::domain("solve_alpha", format!("nu must be > 0, got {nu}")));
    }
    const TARGET: f64 = 0.05;
    const TOL: f64 = 1e-10;
    let corr = |alpha: f64| {
        let p = StationaryParams { sigma2: 1.0, alpha, nu };
        matern(h_eff, &p)
    };

    let (mut lo, mut hi) = (1e-8, 1e4);
    if corr(lo) > TARGET || corr(hi) < TARGET {
        return Err(Error::NoConvergence {
            op: "solve_alpha",
            msg: format!("no bracket in [1e-8, 1e4] for h_eff={h_eff}, nu={nu}"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = corr(mid);
        if (v - TARGET).abs() <= TOL {
            return Ok(mid);
        }
        if v < TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        op: "solve_alpha",
        msg: format!("bisection stalled for h_eff={h_eff}, nu={nu}"),
    })
}

/// Normalized Gaussian-kernel weights `W(s, S_k)` of a parameter field at `s`.
/// The weights are nonnegative and sum to one; exponents are shifted by their
/// maximum so tiny bandwidths degrade gracefully to nearest-anchor selection.
pub fn smooth_weights(pf: &ParamField, s: &Location) -> Vec<f64> {
    let two_h = 2.0 * pf.bandwidth;
    let mut exponents: Vec<f64> = pf.anchors.iter().map(|a| -s.dist2(a) / two_h).collect();
    let max_e = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for e in exponents.iter_mut() {
        *e = (*e - max_e).exp();
        total += *e;
    }
    for e in exponents.iter_mut() {
        *e /= total;
    }
    exponents
}

/// Spatially varying parameters at `s`: the componentwise convex combination
/// of the anchor parameters under the kernel weights.
pub fn smooth_params(pf: &ParamField, s: &Location) -> LocalParams {
    let w = smooth_weights(pf, s);
    let mut out = LocalParams { sigma: 0.0, lambda1: 0.0, lambda2: 0.0, phi: 0.0, nu: 0.0, tau: 0.0 };
    for (wk, p) in w.iter().zip(&pf.anchor_params) {
        out.sigma += wk * p.sigma;
        out.lambda1 += wk * p.lambda1;
        out.lambda2 += wk * p.lambda2;
        out.phi += wk * p.phi;
        out.nu += wk * p.nu;
        out.tau += wk * p.tau;
    }
    out
}

/// The spatially varying anisotropy `Sigma = R(phi) diag(lambda1, lambda2)
/// R(phi)^T`, returned row-major. Symmetric positive definite with
/// eigenvalues {lambda1, lambda2}.
pub fn anisotropy_matrix(p: &LocalParams) -> [[f64; 2]; 2] {
    let (s, c) = p.phi.sin_cos();
    let a = p.lambda1 * c * c + p.lambda2 * s * s;
    let b = (p.lambda1 - p.lambda2) * s * c;
    let d = p.lambda1 * s * s + p.lambda2 * c * c;
    [[a, b], [b, d]]
}

/// Per-location quantities reused across all pairs of a covariance matrix.
#[derive(Debug, Clone, Copy)]
struct Site {
    sigma: f64,
    nu: f64,
    /// Anisotropy entries (symmetric 2x2).
    sxx: f64,
    sxy: f64,
    syy: f64,
    /// |Sigma|^{1/4}
    det_qrt: f64,
}

impl Site {
    fn from_params(p: &LocalParams) -> Site {
        let m = anisotropy_matrix(p);
        let det = p.lambda1 * p.lambda2;
        Site { sigma: p.sigma, nu: p.nu, sxx: m[0][0], sxy: m[0][1], syy: m[1][1], det_qrt: det.sqrt().sqrt() }
    }
}

/// The smooth (nugget-free) part of the nonstationary Matern kernel.
fn smooth_part(si: &Location, sj: &Location, a: &Site, b: &Site) -> f64 {
    let axx = 0.5 * (a.sxx + b.sxx);
    let axy = 0.5 * (a.sxy + b.sxy);
    let ayy = 0.5 * (a.syy + b.syy);
    let det_avg = axx * ayy - axy * axy;

    let dx = si.x - sj.x;
    let dy = si.y - sj.y;
    // Mahalanobis distance under the averaged anisotropy.
    let q = (ayy * dx * dx - 2.0 * axy * dx * dy + axx * dy * dy) / det_avg;

    let prefactor = a.sigma * b.sigma * a.det_qrt * b.det_qrt / det_avg.sqrt();
    if q <= 0.0 {
        // Limit of the Matern factor as the distance vanishes.
        return prefactor;
    }
    let nu_bar = 0.5 * (a.nu + b.nu);
    let t = 2.0 * (nu_bar * q).sqrt();
    match bessel_k(nu_bar, t) {
        Ok(k) => prefactor * 2.0 * (0.5 * t).powf(nu_bar) * k / gamma(nu_bar),
        Err(_) => 0.0,
    }
}

/// Nonstationary Matern covariance between two locations with their local
/// parameters. Symmetric under exchange of `(si, pi)` and `(sj, pj)`; the
/// nugget contributes `tau_i tau_j` only when the two locations coincide
/// exactly.
pub fn nonstat_cov(si: &Location, sj: &Location, pi: &LocalParams, pj: &LocalParams) -> f64 {
    let a = Site::from_params(pi);
    let b = Site::from_params(pj);
    let nugget = if si.x == sj.x && si.y == sj.y { pi.tau * pj.tau } else { 0.0 };
    nugget + smooth_part(si, sj, &a, &b)
}

/// Assembles the n x n nonstationary covariance matrix of `locations` under
/// the smoothed parameters of `pf`.
///
/// Entry (i, j) is the nonstationary kernel between locations i and j with
/// their smoothed local parameters; each pair is computed once and mirrored,
/// so the matrix is exactly symmetric. The nugget enters the diagonal only.
pub fn build_cov_matrix(locations: &[Location], pf: &ParamField) -> Array2<f64> {
    let n = locations.len();
    let params: Vec<LocalParams> = locations.iter().map(|s| smooth_params(pf, s)).collect();
    let sites: Vec<Site> = params.iter().map(Site::from_params).collect();

    let mut buf = vec![0.0f64; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        row[i] = params[i].sigma * params[i].sigma + params[i].tau * params[i].tau;
        for j in (i + 1)..n {
            row[j] = smooth_part(&locations[i], &locations[j], &sites[i], &sites[j]);
        }
    });
    // Mirror the strict upper triangle.
    for i in 0..n {
        for j in (i + 1)..n {
            buf[j * n + i] = buf[i * n + j];
        }
    }
    Array2::from_shape_vec((n, n), buf).expect("square buffer")
}

/// Stationary Matern covariance matrix (a fast path for isotropic constant
/// parameters; identical to the nonstationary matrix under the
/// `alpha = sqrt(lambda / (4 nu))` correspondence).
pub fn build_stationary_cov_matrix(locations: &[Location], p: &StationaryParams) -> Array2<f64> {
    let n = locations.len();
    let mut buf = vec![0.0f64; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        row[i] = p.sigma2;
        for j in (i + 1)..n {
            row[j] = matern(locations[i].dist(&locations[j]), p);
        }
    });
    for i in 0..n {
        for j in (i + 1)..n {
            buf[j * n + i] = buf[i * n + j];
        }
    }
    Array2::from_shape_vec((n, n), buf).expect("square buffer")
}

/// The stationary range `alpha` equivalent to an isotropic anisotropy
/// eigenvalue `lambda` at smoothness `nu`.
pub fn alpha_from_lambda(lambda: f64, nu: f64) -> f64 {
    (lambda / (4.0 * nu)).sqrt()
}

/// Inverse of [`alpha_from_lambda`].
pub fn lambda_from_alpha(alpha: f64, nu: f64) -> f64 {
    4.0 * nu * alpha * alpha
}
