//! Model parameters, spectral density, space-time covariance and the
//! classification of the (alpha, beta) exponent plane.
//!
//! The velocity field has spectral density
//! `a(|k|)/|k|^(2 alpha + d - 2) * (I - k k^T / |k|^2)` with an ultraviolet
//! cutoff `a` supported on [0, K + dK], and per-mode time correlation
//! `exp(-|k|^(2 beta) t)`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geom::{rotation_from_e1, SpatialMat, SpatialVec};
use crate::quad;
use crate::Result;

/// Surface area of the unit sphere in dimension d (length of S^1, area of S^2).
pub fn sphere_surface(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!("dim is validated to 2 or 3"),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpectrumParams {
    alpha: f64,
    beta: f64,
    dim: usize,
    drift: Vec<f64>,
    a0: f64,
    #[serde(rename = "cutoff_K")]
    cutoff_k: f64,
    #[serde(rename = "taper_dK", default)]
    taper_dk: f64,
}

/// Model parameters; the single source of truth for every spectral formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrumParams", into = "RawSpectrumParams")]
pub struct SpectrumParams {
    alpha: f64,
    beta: f64,
    dim: usize,
    drift: SpatialVec,
    a0: f64,
    cutoff_k: f64,
    taper_dk: f64,
}

impl TryFrom<RawSpectrumParams> for SpectrumParams {
    type Error = Error;
    fn try_from(r: RawSpectrumParams) -> Result<Self> {
        SpectrumParams::new(r.alpha, r.beta, r.dim, &r.drift, r.a0, r.cutoff_k, r.taper_dk)
    }
}

impl From<SpectrumParams> for RawSpectrumParams {
    fn from(p: SpectrumParams) -> Self {
        RawSpectrumParams {
            alpha: p.alpha,
            beta: p.beta,
            dim: p.dim,
            drift: p.drift.to_vec(),
            a0: p.a0,
            cutoff_k: p.cutoff_k,
            taper_dk: p.taper_dk,
        }
    }
}

impl SpectrumParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        dim: usize,
        drift: &[f64],
        a0: f64,
        cutoff_k: f64,
        taper_dk: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("alpha", alpha),
            ("beta", beta),
            ("a0", a0),
            ("cutoff_K", cutoff_k),
            ("taper_dK", taper_dk),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 1), got {alpha} \
                 (the spectral density is non-integrable for alpha >= 1)"
            )));
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
        }
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidParams(format!("dim must be 2 or 3, got {dim}")));
        }
        if drift.len() != dim {
            return Err(Error::InvalidParams(format!(
                "drift has {} components, expected {dim}",
                drift.len()
            )));
        }
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("drift must be finite".into()));
        }
        let drift = SpatialVec::from_slice(drift);
        if drift.norm() == 0.0 {
            return Err(Error::ZeroDrift);
        }
        if a0 <= 0.0 {
            return Err(Error::InvalidParams(format!("a0 must be positive, got {a0}")));
        }
        if cutoff_k <= 0.0 {
            return Err(Error::InvalidParams(format!("cutoff_K must be positive, got {cutoff_k}")));
        }
        if taper_dk < 0.0 {
            return Err(Error::InvalidParams(format!(
                "taper_dK must be nonnegative, got {taper_dk}"
            )));
        }
        Ok(Self { alpha, beta, dim, drift, a0, cutoff_k, taper_dk })
    }

    /// Parameters with the default cosine taper of width 0.1 K.
    pub fn with_default_taper(
        alpha: f64,
        beta: f64,
        dim: usize,
        drift: &[f64],
        a0: f64,
        cutoff_k: f64,
    ) -> Result<Self> {
        Self::new(alpha, beta, dim, drift, a0, cutoff_k, 0.1 * cutoff_k)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn drift(&self) -> &SpatialVec {
        &self.drift
    }
    pub fn drift_speed(&self) -> f64 {
        self.drift.norm()
    }
    pub fn a0(&self) -> f64 {
        self.a0
    }
    pub fn cutoff_k(&self) -> f64 {
        self.cutoff_k
    }
    pub fn taper_dk(&self) -> f64 {
        self.taper_dk
    }

    /// Largest wavenumber in the support of the cutoff.
    pub fn k_max(&self) -> f64 {
        self.cutoff_k + self.taper_dk
    }

    /// Rotation whose first column is the drift direction; maps drift-frame
    /// results back to world coordinates.
    pub fn drift_rotation(&self) -> SpatialMat {
        rotation_from_e1(&self.drift)
    }

    /// The ultraviolet cutoff a(r): flat at a0 on [0, K], cosine-tapered to
    /// zero on (K, K + dK], zero beyond.
    pub fn cutoff(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "cutoff argument must be nonnegative");
        if r <= self.cutoff_k {
            self.a0
        } else if self.taper_dk > 0.0 && r <= self.cutoff_k + self.taper_dk {
            let phase = std::f64::consts::PI * (r - self.cutoff_k) / self.taper_dk;
            self.a0 * 0.5 * (1.0 + phase.cos())
        } else {
            0.0
        }
    }

    /// Radial profile a(r) / r^(2 alpha + d - 2) of the spectral density.
    pub fn radial_profile(&self, r: f64) -> f64 {
        self.cutoff(r) / r.powf(2.0 * self.alpha + self.dim as f64 - 2.0)
    }

    /// Spectral density matrix at wavenumber k (singular at the origin).
    pub fn spectral_density(&self, k: &SpatialVec) -> Result<SpatialMat> {
        if k.norm_sq() == 0.0 {
            return Err(Error::Domain("spectral density is singular at k = 0".into()));
        }
        Ok(SpatialMat::projector(k).scaled(self.radial_profile(k.norm())))
    }

    /// Per-mode relaxation rate |k|^(2 beta).
    pub fn relaxation_rate(&self, r: f64) -> f64 {
        r.powf(2.0 * self.beta)
    }

    /// Spectral mass int f(k) dk over the radial band [r1, r2], where
    /// f(k) = a(|k|)/|k|^(2 alpha + d - 2). The radial density is
    /// a(r) r^(1 - 2 alpha) in both supported dimensions.
    pub fn radial_mass(&self, r1: f64, r2: f64) -> f64 {
        assert!(r1 >= 0.0 && r2 >= r1);
        let p = 2.0 - 2.0 * self.alpha;
        let surf = sphere_surface(self.dim);
        let flat_hi = r2.min(self.cutoff_k);
        let mut mass = 0.0;
        if flat_hi > r1 {
            mass += self.a0 * (flat_hi.powf(p) - r1.powf(p)) / p;
        }
        let taper_lo = r1.max(self.cutoff_k);
        let taper_hi = r2.min(self.k_max());
        if self.taper_dk > 0.0 && taper_hi > taper_lo {
            let out = quad::adaptive_scalar(
                |r| self.cutoff(r) * r.powf(1.0 - 2.0 * self.alpha),
                taper_lo,
                taper_hi,
                1e-12,
                0.0,
                200,
            );
            mass += out.value[0];
        }
        surf * mass
    }

    /// Total spectral mass int f(k) dk; equals tr R(0,0) / (d - 1).
    pub fn total_mass(&self) -> f64 {
        self.radial_mass(0.0, self.k_max())
    }

    /// Space-time covariance R(t, x) by deterministic quadrature.
    ///
    /// Fails with the achieved error estimate if the quadrature cannot
    /// reach the requested relative tolerance.
    pub fn covariance(&self, t: f64, x: &SpatialVec, rel_tol: f64) -> Result<SpatialMat> {
        let out = crate::theory::covariance_quadrature(self, t, x, rel_tol);
        if !out.converged {
            return Err(Error::QuadratureNoConvergence {
                estimate: out.error_estimate.max_abs(),
                tolerance: rel_tol * out.value.max_abs(),
            });
        }
        Ok(out.value)
    }

    /// Classify the (alpha, beta) point per the two limit theorems.
    pub fn classify(&self) -> Result<RegimeReport> {
        if self.drift.norm() == 0.0 {
            return Err(Error::ZeroDrift);
        }
        Ok(classify_exponents(self.alpha, self.beta))
    }
}

/// Scaling regime of the drift-removed tracer fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Diffusive,
    FractionalBm,
    OutOfScope,
}

/// Classification outcome with the scaling exponents of the fBM regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Time-rescaling exponent delta in (1/2, 1]; present only in the fBM regime.
    pub delta: Option<f64>,
    /// Hurst index H = 1/(2 delta); present only in the fBM regime.
    pub hurst: Option<f64>,
    /// The condition that triggered the classification.
    pub reason: String,
}

const BOUNDARY_TOL: f64 = 1e-12;

fn classify_exponents(alpha: f64, beta: f64) -> RegimeReport {
    debug_assert!(alpha > 0.0 && alpha < 1.0 && beta > 0.0);
    if alpha + 2.0 * beta >= 2.0 {
        return RegimeReport {
            regime: Regime::OutOfScope,
            delta: None,
            hurst: None,
            reason: format!(
                "alpha + 2*beta = {:.6} >= 2: outside the treated range alpha + 2*beta < 2",
                alpha + 2.0 * beta
            ),
        };
    }
    if beta < 0.5 {
        let s = alpha + beta;
        if s < 1.0 - BOUNDARY_TOL {
            return RegimeReport {
                regime: Regime::Diffusive,
                delta: None,
                hurst: None,
                reason: "alpha + beta < 1 with beta < 1/2: Taylor-Kubo integral converges".into(),
            };
        }
        // alpha + beta >= 1, beta < 1/2
        let boundary = (s - 1.0).abs() <= BOUNDARY_TOL;
        let delta = if boundary { 1.0 } else { beta / (alpha + 2.0 * beta - 1.0) };
        let hurst = 1.0 / (2.0 * delta);
        return RegimeReport {
            regime: Regime::FractionalBm,
            delta: Some(delta),
            hurst: Some(hurst),
            reason: if boundary {
                "alpha + beta = 1 with beta < 1/2: boundary of the diffusive region, \
                 assigned to the fBM regime with delta = 1"
                    .into()
            } else {
                "alpha + beta >= 1 with beta < 1/2: delta = beta/(alpha + 2*beta - 1)".into()
            },
        };
    }
    // beta >= 1/2 (and beta < 1 automatically, since alpha + 2*beta < 2 and alpha > 0)
    if alpha < 0.5 - BOUNDARY_TOL {
        return RegimeReport {
            regime: Regime::Diffusive,
            delta: None,
            hurst: None,
            reason: "alpha < 1/2 <= beta < 1: sweeping decorrelation dominates".into(),
        };
    }
    let boundary = (alpha - 0.5).abs() <= BOUNDARY_TOL;
    let delta = if boundary { 1.0 } else { 1.0 / (2.0 * alpha) };
    let hurst = 1.0 / (2.0 * delta);
    RegimeReport {
        regime: Regime::FractionalBm,
        delta: Some(delta),
        hurst: Some(hurst),
        reason: if boundary {
            "alpha = 1/2 with beta >= 1/2: boundary of the diffusive region, \
             assigned to the fBM regime with delta = 1"
                .into()
        } else {
            "alpha >= 1/2 with beta >= 1/2: delta = 1/(2*alpha)".into()
        },
    }
}
