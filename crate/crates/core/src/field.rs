//! Synthesis of the random velocity field as a finite sum of divergence-free
//! Fourier modes with exact Ornstein-Uhlenbeck amplitude dynamics.
//!
//! V(t, x) = N^{-1/2} sum_j sqrt(w_j) [ xi_j(t) cos(k_j.x) + eta_j(t) sin(k_j.x) ]
//!
//! Wavenumbers are importance-sampled from the spectral measure, stratified
//! over log-spaced radial shells; the weights w_j make mode averages unbiased
//! estimates of spectral integrals. Amplitudes live in the plane orthogonal
//! to their wavenumber, so the field is divergence-free exactly, and each
//! relaxes at rate theta_j = |k_j|^{2 beta} with the stationary law preserved
//! at every step.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::geom::{transverse_basis, SpatialMat, SpatialVec};
use crate::spectrum::SpectrumParams;
use crate::Result;

/// Default sampling floor, as a fraction of the cutoff wavenumber: log shells
/// need a positive lower edge. The spectral mass below it is recorded in
/// [`ModeSet::truncated_mass`].
pub const DEFAULT_FLOOR_FACTOR: f64 = 1e-10;

/// Frozen wavenumber sample with importance weights and relaxation rates.
#[derive(Debug, Clone)]
pub struct ModeSet {
    dim: usize,
    wavenumbers: Vec<SpatialVec>,
    weights: Vec<f64>,
    rates: Vec<f64>,
    basis: Vec<[SpatialVec; 2]>,
    /// sqrt(w_j / N), the evaluation prefactor
    sqrt_w_n: Vec<f64>,
    truncated_mass: f64,
    floor: f64,
}

impl ModeSet {
    /// Empty mode set (the field is identically zero); used for pure-drift
    /// and molecular-diffusion-only runs.
    pub fn empty(dim: usize) -> Self {
        assert!((2..=3).contains(&dim));
        Self {
            dim,
            wavenumbers: Vec::new(),
            weights: Vec::new(),
            rates: Vec::new(),
            basis: Vec::new(),
            sqrt_w_n: Vec::new(),
            truncated_mass: 0.0,
            floor: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wavenumbers(&self) -> &[SpatialVec] {
        &self.wavenumbers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// The incompressibility projector of mode j.
    pub fn projector(&self, j: usize) -> SpatialMat {
        SpatialMat::projector(&self.wavenumbers[j])
    }

    /// Orthonormal basis of the plane orthogonal to k_j (d-1 vectors).
    pub fn transverse(&self, j: usize) -> &[SpatialVec] {
        &self.basis[j][..self.dim - 1]
    }

    pub(crate) fn sqrt_w_n(&self) -> &[f64] {
        &self.sqrt_w_n
    }

    /// Spectral mass below the sampling floor (unrepresented by the sample).
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Lower edge of the sampled radial range.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.wavenumbers.iter().map(|k| k.norm()).fold(0.0, f64::max)
    }

    /// Write the mode table as CSV: k components, weight, rate.
    pub fn export_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let ks: Vec<String> = (1..=self.dim).map(|i| format!("k{i}")).collect();
        writeln!(out, "{},weight,rate", ks.join(","))?;
        for j in 0..self.len() {
            let comps: Vec<String> =
                self.wavenumbers[j].as_slice().iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{},{},{}", comps.join(","), self.weights[j], self.rates[j])?;
        }
        Ok(())
    }

    /// Read a mode table written by [`export_csv`](Self::export_csv).
    pub fn import_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mode table".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[cols.len() - 2] != "weight" || cols[cols.len() - 1] != "rate" {
            return Err(Error::Parse(format!("unexpected mode table header: {header}")));
        }
        let dim = cols.len() - 2;
        if !(2..=3).contains(&dim) {
            return Err(Error::Parse(format!("unsupported dimension {dim} in mode table")));
        }
        let mut set = ModeSet::empty(dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .trim()
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {f}"))))
                .collect::<Result<_>>()?;
            if fields.len() != dim + 2 {
                return Err(Error::Parse(format!("bad mode row: {line}")));
            }
            let k = SpatialVec::from_slice(&fields[..dim]);
            if k.norm() == 0.0 {
                return Err(Error::Parse("zero wavenumber in mode table".into()));
            }
            set.push_mode(k, fields[dim], fields[dim + 1]);
        }
        set.finalize();
        Ok(set)
    }

    fn push_mode(&mut self, k: SpatialVec, weight: f64, rate: f64) {
        self.basis.push(transverse_basis(&k));
        self.wavenumbers.push(k);
        self.weights.push(weight);
        self.rates.push(rate);
    }

    fn finalize(&mut self) {
        let n = self.len() as f64;
        self.sqrt_w_n = self.weights.iter().map(|w| (w / n).sqrt()).collect();
    }
}

/// Sample a stratified mode set: |k| from the radial density a(r) r^{1-2 alpha}
/// over log-spaced shells of (floor, K + dK], directions uniform on the sphere.
///
/// The weights satisfy E[(1/N) sum_j w_j g(k_j)] = int f(k) g(k) dk for any
/// bounded g, with f the scalar spectral profile.
pub fn sample_modes(
    params: &SpectrumParams,
    n: usize,
    strata: usize,
    rng: &mut ChaCha12Rng,
) -> Result<ModeSet> {
    sample_modes_with_floor(params, n, strata, DEFAULT_FLOOR_FACTOR, rng)
}

/// As [`sample_modes`], with an explicit sampling floor (fraction of K + dK).
pub fn sample_modes_with_floor(
    params: &SpectrumParams,
    n: usize,
    strata: usize,
    floor_factor: f64,
    rng: &mut ChaCha12Rng,
) -> Result<ModeSet> {
    if n == 0 {
        return Err(Error::InvalidParams("mode count must be positive".into()));
    }
    if strata == 0 || n < strata {
        return Err(Error::InvalidParams(format!(
            "need mode count >= strata >= 1, got n = {n}, strata = {strata}"
        )));
    }
    if !(floor_factor > 0.0 && floor_factor < 1.0) {
        return Err(Error::InvalidParams("floor factor must lie in (0, 1)".into()));
    }

    let k_max = params.k_max();
    let r_lo = k_max * floor_factor;
    let p = 2.0 - 2.0 * params.alpha();
    let log_ratio = (k_max / r_lo).ln();

    let mut set = ModeSet::empty(params.dim());
    set.floor = r_lo;
    set.truncated_mass = params.radial_mass(0.0, r_lo);

    let base = n / strata;
    let rem = n % strata;
    for s in 0..strata {
        let lo = r_lo * (log_ratio * s as f64 / strata as f64).exp();
        let hi = if s + 1 == strata {
            k_max
        } else {
            r_lo * (log_ratio * (s + 1) as f64 / strata as f64).exp()
        };
        let quota = base + usize::from(s < rem);
        if quota == 0 {
            continue;
        }
        let mass = params.radial_mass(lo, hi);
        let weight = mass * n as f64 / quota as f64;
        let lo_p = lo.powf(p);
        let hi_p = hi.powf(p);
        for _ in 0..quota {
            // radius from the shell-restricted density ~ a(r) r^{1-2 alpha}:
            // inverse CDF of the power part, thinned by a(r)/a0 in the taper
            let r = loop {
                let u: f64 = rng.gen();
                let r = (lo_p + u * (hi_p - lo_p)).powf(1.0 / p);
                if r <= params.cutoff_k() {
                    break r;
                }
                let accept: f64 = rng.gen();
                if accept * params.a0() < params.cutoff(r) {
                    break r;
                }
            };
            let dir = match params.dim() {
                2 => {
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    SpatialVec::from_slice(&[phi.cos(), phi.sin()])
                }
                3 => {
                    let mu: f64 = rng.gen_range(-1.0..1.0);
                    let psi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let s = (1.0 - mu * mu).sqrt();
                    SpatialVec::from_slice(&[mu, s * psi.cos(), s * psi.sin()])
                }
                _ => unreachable!(),
            };
            let k = dir.scaled(r);
            set.push_mode(k, weight, params.relaxation_rate(r));
        }
    }
    set.finalize();
    Ok(set)
}

/// Live Ornstein-Uhlenbeck amplitudes realizing V(t, x) for one trajectory.
///
/// Each amplitude pair (xi_j, eta_j) lies in the plane orthogonal to k_j and
/// has unit component variance under the stationary law. The state owns the
/// random stream that refreshes it, so trajectories evolve independently.
#[derive(Debug, Clone)]
pub struct FieldState {
    modes: Arc<ModeSet>,
    xi: Vec<SpatialVec>,
    eta: Vec<SpatialVec>,
    time: f64,
    rng: ChaCha12Rng,
    decay_cache: Option<(f64, Vec<(f64, f64)>)>,
}

fn projected_gaussian(modes: &ModeSet, j: usize, rng: &mut ChaCha12Rng) -> SpatialVec {
    let mut v = SpatialVec::zeros(modes.dim());
    for e in modes.transverse(j) {
        let z: f64 = rng.sample(StandardNormal);
        v.axpy(z, e);
    }
    v
}

/// Draw a stationary field state: every amplitude is a projected standard
/// Gaussian, which realizes the spectral measure exactly in distribution.
pub fn init_state(modes: Arc<ModeSet>, mut rng: ChaCha12Rng) -> FieldState {
    let n = modes.len();
    let mut xi = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for j in 0..n {
        xi.push(projected_gaussian(&modes, j, &mut rng));
        eta.push(projected_gaussian(&modes, j, &mut rng));
    }
    FieldState { modes, xi, eta, time: 0.0, rng, decay_cache: None }
}

impl FieldState {
    pub fn modes(&self) -> &Arc<ModeSet> {
        &self.modes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitudes(&self) -> (&[SpatialVec], &[SpatialVec]) {
        (&self.xi, &self.eta)
    }

    /// Overwrite the amplitudes; a diagnostics hook, deliberately unchecked so
    /// tests can construct unprojected negative controls.
    pub fn set_amplitudes(&mut self, xi: Vec<SpatialVec>, eta: Vec<SpatialVec>) {
        assert_eq!(xi.len(), self.modes.len());
        assert_eq!(eta.len(), self.modes.len());
        self.xi = xi;
        self.eta = eta;
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&ModeSet, &mut [SpatialVec], &mut [SpatialVec], &mut ChaCha12Rng, &mut f64) {
        (&self.modes, &mut self.xi, &mut self.eta, &mut self.rng, &mut self.time)
    }

    /// Exact OU step for every mode:
    /// xi <- e^{-theta dt} xi + sqrt(1 - e^{-2 theta dt}) P g_fresh,
    /// same for eta. The stationary law is preserved exactly in distribution.
    pub fn advance(&mut self, dt: f64) {
        assert!(dt > 0.0, "advance requires dt > 0");
        if self.decay_cache.as_ref().map(|(d, _)| *d) != Some(dt) {
            let coeffs = self
                .modes
                .rates()
                .iter()
                .map(|&theta| {
                    let a = (-theta * dt).exp();
                    (a, (1.0 - a * a).max(0.0).sqrt())
                })
                .collect();
            self.decay_cache = Some((dt, coeffs));
        }
        let (_, coeffs) = self.decay_cache.as_ref().unwrap();
        // split borrows: coeffs is read-only while amplitudes mutate
        let coeffs = coeffs.clone();
        for j in 0..self.modes.len() {
            let (a, b) = coeffs[j];
            let fresh = projected_gaussian(&self.modes, j, &mut self.rng);
            self.xi[j] = self.xi[j].scaled(a);
            self.xi[j].axpy(b, &fresh);
            let fresh = projected_gaussian(&self.modes, j, &mut self.rng);
            self.eta[j] = self.eta[j].scaled(a);
            self.eta[j].axpy(b, &fresh);
        }
        self.time += dt;
    }

    /// Conditional-mean propagation: amplitudes decay as e^{-theta dt} with
    /// no refresh. This is the Markov conditional expectation of the field,
    /// and doubles as a deterministic smooth field for integrator tests.
    pub fn decay(&mut self, dt: f64) {
        assert!(dt > 0.0);
        for j in 0..self.modes.len() {
            let a = (-self.modes.rates()[j] * dt).exp();
            self.xi[j] = self.xi[j].scaled(a);
            self.eta[j] = self.eta[j].scaled(a);
        }
        self.time += dt;
    }

    /// Velocity at position x.
    pub fn evaluate(&self, x: &SpatialVec) -> SpatialVec {
        let mut v = SpatialVec::zeros(self.modes.dim());
        let swn = self.modes.sqrt_w_n();
        for j in 0..self.modes.len() {
            let phase = self.modes.wavenumbers()[j].dot(x);
            let (sin, cos) = phase.sin_cos();
            v.axpy(swn[j] * cos, &self.xi[j]);
            v.axpy(swn[j] * sin, &self.eta[j]);
        }
        v
    }

    /// Analytic divergence at x; zero up to rounding because the amplitudes
    /// are orthogonal to their wavenumbers.
    pub fn evaluate_divergence(&self, x: &SpatialVec) -> f64 {
        let mut div = 0.0;
        let swn = self.modes.sqrt_w_n();
        for j in 0..self.modes.len() {
            let k = &self.modes.wavenumbers()[j];
            let phase = k.dot(x);
            let (sin, cos) = phase.sin_cos();
            div += swn[j] * (-self.xi[j].dot(k) * sin + self.eta[j].dot(k) * cos);
        }
        div
    }

    /// Scale of the field magnitude, sqrt(E|V|^2) under the mode sample;
    /// reference scale for divergence assertions.
    pub fn magnitude_scale(&self) -> f64 {
        let trp = (self.modes.dim() - 1) as f64;
        let n = self.modes.len().max(1) as f64;
        let sum: f64 = self.modes.weights().iter().sum();
        (sum * trp / n).sqrt()
    }
}
