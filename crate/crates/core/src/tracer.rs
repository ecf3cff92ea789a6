//! Trajectory integration: the full tracer ODE dx = (v + eps V) dt + sqrt(2 kappa) dB
//! and the ballistic-line process Z(T) = int_0^T V(s, v s) ds, plus the
//! diffusive / fractional rescalings of the drift-removed fluctuation.
//!
//! The integrators advance the fluctuation z = x - v t rather than x itself:
//! the two formulations are identical (the drift cancels), but z stays O(1)
//! while x grows like |v| t, so no precision is lost at long horizons.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::field::{FieldState, ModeSet};
use crate::geom::SpatialVec;
use crate::spectrum::SpectrumParams;
use crate::Result;

/// Fraction of the fastest timescale a step may cover.
const RESOLUTION_FRACTION: f64 = 0.1;
/// Cap on the per-mode step multiplier of the ballistic integrator; sampling
/// instants are aligned to this, so every stored point has all modes current.
const MAX_CLASS: usize = 64;
/// Rebuild phase rotations from sin/cos every this many class steps.
const PHASE_RESYNC: u64 = 4096;
/// Default cap on stored samples per trajectory.
const MAX_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracerMode {
    FullTrajectory,
    BallisticLine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracerConfig {
    /// Fluctuation amplitude in the dynamics dx = (v + eps V) dt.
    /// The ballistic line always runs at unit amplitude.
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Molecular diffusivity kappa >= 0 (Euler-Maruyama additive noise).
    #[serde(default)]
    pub kappa: f64,
    pub mode: TracerMode,
    /// Record every this-many steps; default keeps at most 4096 samples.
    #[serde(default)]
    pub sample_stride: Option<usize>,
}

impl TracerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::InvalidParams(format!(
                "horizon {} must be at least one step {}",
                self.horizon, self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidParams("kappa must be nonnegative".into()));
        }
        if self.sample_stride == Some(0) {
            return Err(Error::InvalidParams("sample stride must be positive".into()));
        }
        Ok(())
    }
}

/// Time-stamped tracer path with its drift-removed fluctuation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<SpatialVec>,
    pub fluctuation: Vec<SpatialVec>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.positions.first().map_or(2, |p| p.dim())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Fluctuation at time t by linear interpolation between stored samples.
    pub fn fluctuation_at(&self, t: f64) -> Result<SpatialVec> {
        let last = self.horizon();
        if t < 0.0 || t > last * (1.0 + 1e-12) {
            return Err(Error::Coverage { requested: t, coverage: last });
        }
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            return Ok(self.fluctuation[0]);
        }
        if idx >= self.times.len() {
            return Ok(*self.fluctuation.last().unwrap());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let mut z = self.fluctuation[idx - 1].scaled(1.0 - w);
        z.axpy(w, &self.fluctuation[idx]);
        Ok(z)
    }

    /// CSV export with columns t, x1..xd, z1..zd.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let xs: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        let zs: Vec<String> = (1..=d).map(|i| format!("z{i}")).collect();
        writeln!(out, "t,{},{}", xs.join(","), zs.join(","))?;
        for i in 0..self.times.len() {
            let x: Vec<String> = self.positions[i].as_slice().iter().map(|v| format!("{v}")).collect();
            let z: Vec<String> =
                self.fluctuation[i].as_slice().iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{},{},{}", self.times[i], x.join(","), z.join(","))?;
        }
        Ok(())
    }
}

/// Reject steps that under-resolve either the fastest Ornstein-Uhlenbeck
/// relaxation or the sweeping oscillation cos(k . v t).
fn resolution_guard(modes: &ModeSet, params: &SpectrumParams, dt: f64) -> Result<()> {
    if modes.is_empty() {
        return Ok(());
    }
    let theta_max = modes.max_rate();
    let sweep_max = params.drift_speed() * modes.max_wavenumber();
    let scale = (1.0 / theta_max).min(1.0 / sweep_max);
    let max_dt = RESOLUTION_FRACTION * scale;
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepResolution {
            dt,
            max_dt,
            detail: format!(
                "fastest relaxation rate {theta_max:.3e}, fastest sweeping frequency {sweep_max:.3e}"
            ),
        });
    }
    Ok(())
}

fn normal_vec(dim: usize, rng: &mut ChaCha12Rng) -> SpatialVec {
    let mut v = SpatialVec::zeros(dim);
    for i in 0..dim {
        v.set(i, rng.sample(StandardNormal));
    }
    v
}

fn build_trajectory(
    drift: &SpatialVec,
    samples: Vec<(f64, SpatialVec)>,
) -> Trajectory {
    let mut times = Vec::with_capacity(samples.len());
    let mut positions = Vec::with_capacity(samples.len());
    let mut fluctuation = Vec::with_capacity(samples.len());
    for (t, z) in samples {
        let mut pos = drift.scaled(t);
        pos = pos.add(&z);
        // recompute so fluctuation[i] == positions[i] - v t[i] holds exactly
        let fluct = pos.sub(&drift.scaled(t));
        times.push(t);
        positions.push(pos);
        fluctuation.push(fluct);
    }
    Trajectory { times, positions, fluctuation }
}

/// Integrate the full tracer ODE with Heun (explicit trapezoidal) steps for
/// the deterministic part and Euler-Maruyama for the molecular noise. The
/// field is advanced by its exact OU update to the endpoint of every step.
pub fn integrate(
    mut state: FieldState,
    params: &SpectrumParams,
    config: &TracerConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Trajectory> {
    if config.mode != TracerMode::FullTrajectory {
        return Err(Error::InvalidParams("integrate requires mode = full_trajectory".into()));
    }
    config.validate()?;
    resolution_guard(state.modes(), params, config.dt)?;

    let dt = config.dt;
    let n_steps = ((config.horizon / dt - 1e-9).ceil() as usize).max(1);
    let stride = config.sample_stride.unwrap_or_else(|| (n_steps / MAX_SAMPLES).max(1));
    let drift = *params.drift();
    let dim = params.dim();
    let eps = config.epsilon;
    let kappa_amp = (2.0 * config.kappa * dt).sqrt();

    let mut z = SpatialVec::zeros(dim);
    let mut samples = vec![(0.0, z)];
    for i in 1..=n_steps {
        let t_prev = (i - 1) as f64 * dt;
        let t_next = i as f64 * dt;
        // dz/dt = eps V(t, v t + z); the mean drift cancels in z coordinates
        let v1 = if eps != 0.0 {
            let x = drift.scaled(t_prev).add(&z);
            state.evaluate(&x).scaled(eps)
        } else {
            SpatialVec::zeros(dim)
        };
        if !state.modes().is_empty() {
            state.advance(dt);
        }
        let v2 = if eps != 0.0 {
            let x_pred = drift.scaled(t_next).add(&z).add(&v1.scaled(dt));
            state.evaluate(&x_pred).scaled(eps)
        } else {
            SpatialVec::zeros(dim)
        };
        z.axpy(0.5 * dt, &v1);
        z.axpy(0.5 * dt, &v2);
        if config.kappa > 0.0 {
            let g = normal_vec(dim, rng);
            z.axpy(kappa_amp, &g);
        }
        if i % stride == 0 || i == n_steps {
            samples.push((t_next, z));
        }
    }
    Ok(build_trajectory(&drift, samples))
}

/// Per-rate group of modes in the ballistic integrator. Modes whose
/// relaxation and sweeping timescales allow it are advanced with a larger
/// (power-of-two) multiple of the base step; the OU update composes exactly,
/// so only the trapezoidal accumulation sees the coarser rate, and it stays
/// within the same resolution fraction as the fastest modes.
struct ModeClass {
    multiple: usize,
    count: usize,
    dim: usize,
    decay: Vec<f64>,
    noise: Vec<f64>,
    rot_cos: Vec<f64>,
    rot_sin: Vec<f64>,
    phase_cos: Vec<f64>,
    phase_sin: Vec<f64>,
    sweep_freq: Vec<f64>,
    swn: Vec<f64>,
    xi: Vec<f64>,
    eta: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
    accum: SpatialVec,
    prev_value: SpatialVec,
    steps_done: u64,
    base_dt: f64,
}

impl ModeClass {
    fn value(&self) -> SpatialVec {
        let mut v = SpatialVec::zeros(self.dim);
        for j in 0..self.count {
            let c = self.swn[j] * self.phase_cos[j];
            let s = self.swn[j] * self.phase_sin[j];
            for comp in 0..self.dim {
                let idx = j * self.dim + comp;
                let add = c * self.xi[idx] + s * self.eta[idx];
                v.set(comp, v.get(comp) + add);
            }
        }
        v
    }

    fn advance(&mut self, rng: &mut ChaCha12Rng) {
        let dim = self.dim;
        let transverse = dim - 1;
        for j in 0..self.count {
            let a = self.decay[j];
            let b = self.noise[j];
            let base = j * dim;
            for amp in 0..2 {
                let arr = if amp == 0 { &mut self.xi } else { &mut self.eta };
                // fresh projected Gaussian via the transverse basis
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = if transverse == 2 { rng.sample(StandardNormal) } else { 0.0 };
                for comp in 0..dim {
                    let mut fresh = z1 * self.e1[base + comp];
                    if transverse == 2 {
                        fresh += z2 * self.e2[base + comp];
                    }
                    arr[base + comp] = a * arr[base + comp] + b * fresh;
                }
            }
            // rotate the sweeping phase
            let (c, s) = (self.phase_cos[j], self.phase_sin[j]);
            let (rc, rs) = (self.rot_cos[j], self.rot_sin[j]);
            self.phase_cos[j] = c * rc - s * rs;
            self.phase_sin[j] = s * rc + c * rs;
        }
        self.steps_done += 1;
        if self.steps_done % PHASE_RESYNC == 0 {
            let t = self.steps_done as f64 * self.class_dt();
            for j in 0..self.count {
                let (sin, cos) = (self.sweep_freq[j] * t).sin_cos();
                self.phase_cos[j] = cos;
                self.phase_sin[j] = sin;
            }
        }
    }

    fn class_dt(&self) -> f64 {
        self.base_dt * self.multiple as f64
    }
}

// base_dt is shared by all classes; stored here to keep ModeClass self-contained
impl ModeClass {
    fn new(multiple: usize, dim: usize, base_dt: f64) -> Self {
        ModeClass {
            multiple,
            count: 0,
            dim,
            decay: Vec::new(),
            noise: Vec::new(),
            rot_cos: Vec::new(),
            rot_sin: Vec::new(),
            phase_cos: Vec::new(),
            phase_sin: Vec::new(),
            sweep_freq: Vec::new(),
            swn: Vec::new(),
            xi: Vec::new(),
            eta: Vec::new(),
            e1: Vec::new(),
            e2: Vec::new(),
            accum: SpatialVec::zeros(dim),
            prev_value: SpatialVec::zeros(dim),
            steps_done: 0,
            base_dt,
        }
    }
}

/// Integrate the ballistic-line process Z(T) = int_0^T V(s, v s) ds at unit
/// amplitude by per-mode trapezoidal accumulation; positions store v t + Z.
pub fn ballistic_line(
    mut state: FieldState,
    params: &SpectrumParams,
    config: &TracerConfig,
) -> Result<Trajectory> {
    if config.mode != TracerMode::BallisticLine {
        return Err(Error::InvalidParams("ballistic_line requires mode = ballistic_line".into()));
    }
    config.validate()?;
    resolution_guard(state.modes(), params, config.dt)?;

    let dt = config.dt;
    let dim = params.dim();
    let drift = *params.drift();
    let speed = params.drift_speed();

    let n_raw = ((config.horizon / dt - 1e-9).ceil() as usize).max(1);
    let modes = state.modes().clone();

    if modes.is_empty() {
        let stride = config.sample_stride.unwrap_or_else(|| (n_raw / MAX_SAMPLES).max(1));
        let mut samples = vec![(0.0, SpatialVec::zeros(dim))];
        for i in (stride..=n_raw).step_by(stride) {
            samples.push((i as f64 * dt, SpatialVec::zeros(dim)));
        }
        if n_raw % stride != 0 {
            samples.push((n_raw as f64 * dt, SpatialVec::zeros(dim)));
        }
        return Ok(build_trajectory(&drift, samples));
    }

    // Sampling stride: as requested, or the next power of two that keeps the
    // sample count below the cap. Mode step classes divide the stride, so
    // every recorded sample has all modes current.
    let stride = config
        .sample_stride
        .unwrap_or_else(|| n_raw.div_ceil(MAX_SAMPLES).next_power_of_two());
    let mut class_cap = 1usize;
    while class_cap * 2 <= MAX_CLASS
        && stride % (class_cap * 2) == 0
        && class_cap * 2 <= n_raw
    {
        class_cap *= 2;
    }

    // group modes into power-of-two step classes within the resolution guard
    let mut class_of = vec![1usize; modes.len()];
    let mut max_class = 1usize;
    for j in 0..modes.len() {
        let theta = modes.rates()[j];
        let sweep = (speed * modes.wavenumbers()[j].norm()).abs();
        let allowed = RESOLUTION_FRACTION * (1.0 / theta).min(1.0 / sweep.max(1e-300));
        let mut m = 1usize;
        while m * 2 <= class_cap && (m * 2) as f64 * dt <= allowed {
            m *= 2;
        }
        class_of[j] = m;
        max_class = max_class.max(m);
    }

    // the final step is aligned with the coarsest class (extending the
    // horizon by at most max_class - 1 base steps)
    let n_steps = n_raw.div_ceil(max_class) * max_class;

    let (modes_ref, xi, eta, rng, _time) = state.parts_mut();
    let mut classes: Vec<ModeClass> = Vec::new();
    let mut class_index = std::collections::BTreeMap::new();
    for j in 0..modes_ref.len() {
        let m = class_of[j];
        let idx = *class_index.entry(m).or_insert_with(|| {
            classes.push(ModeClass::new(m, dim, dt));
            classes.len() - 1
        });
        let cl = &mut classes[idx];
        let step = m as f64 * dt;
        let theta = modes_ref.rates()[j];
        let a = (-theta * step).exp();
        cl.decay.push(a);
        cl.noise.push((1.0 - a * a).max(0.0).sqrt());
        let freq = modes_ref.wavenumbers()[j].dot(&drift);
        let (rs, rc) = (freq * step).sin_cos();
        cl.rot_cos.push(rc);
        cl.rot_sin.push(rs);
        cl.phase_cos.push(1.0);
        cl.phase_sin.push(0.0);
        cl.sweep_freq.push(freq);
        cl.swn.push(modes_ref.sqrt_w_n()[j]);
        for comp in 0..dim {
            cl.xi.push(xi[j].get(comp));
            cl.eta.push(eta[j].get(comp));
        }
        let basis = modes_ref.transverse(j);
        for comp in 0..dim {
            cl.e1.push(basis[0].get(comp));
        }
        for comp in 0..dim {
            cl.e2.push(if dim == 3 { basis[1].get(comp) } else { 0.0 });
        }
        cl.count += 1;
    }
    for cl in classes.iter_mut() {
        cl.prev_value = cl.value();
    }

    let mut samples = Vec::with_capacity(n_steps / stride + 2);
    samples.push((0.0, SpatialVec::zeros(dim)));
    for i in 1..=n_steps {
        for cl in classes.iter_mut() {
            if i % cl.multiple == 0 {
                cl.advance(rng);
                let v_new = cl.value();
                let half = 0.5 * cl.class_dt();
                cl.accum.axpy(half, &cl.prev_value);
                cl.accum.axpy(half, &v_new);
                cl.prev_value = v_new;
            }
        }
        if i % stride == 0 || i == n_steps {
            let mut z = SpatialVec::zeros(dim);
            for cl in classes.iter() {
                z = z.add(&cl.accum);
            }
            samples.push((i as f64 * dt, z));
        }
    }
    Ok(build_trajectory(&drift, samples))
}

/// Reindex the fluctuation under the scaling y(t) = z(t / eps^{2 delta}):
/// output sample times are the input times scaled by eps^{2 delta}. The
/// amplitude is already carried by the dynamics; no prefactor is applied.
pub fn rescale(traj: &Trajectory, epsilon: f64, delta: f64) -> Result<Trajectory> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    if !(0.0 < delta && delta <= 1.0) {
        return Err(Error::InvalidParams("delta must lie in (0, 1]".into()));
    }
    let scale = epsilon.powf(2.0 * delta);
    let drift_free = traj
        .times
        .iter()
        .zip(traj.fluctuation.iter())
        .map(|(&t, &z)| (t * scale, z))
        .collect::<Vec<_>>();
    // positions of the rescaled process follow the same convention x = v t + z;
    // reconstruct the drift from the source trajectory
    let dim = traj.dim();
    let drift = infer_drift(traj, dim);
    Ok(build_trajectory(&drift, drift_free))
}

/// Rescaled fluctuation sampled on a requested grid of target times.
pub fn rescale_to_grid(
    traj: &Trajectory,
    epsilon: f64,
    delta: f64,
    grid: &[f64],
) -> Result<Trajectory> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParams("epsilon must be positive".into()));
    }
    if !(0.0 < delta && delta <= 1.0) {
        return Err(Error::InvalidParams("delta must lie in (0, 1]".into()));
    }
    let scale = epsilon.powf(-2.0 * delta);
    let mut samples = Vec::with_capacity(grid.len());
    for &t in grid {
        let source = t * scale;
        let z = traj.fluctuation_at(source)?;
        samples.push((t, z));
    }
    let dim = traj.dim();
    let drift = infer_drift(traj, dim);
    Ok(build_trajectory(&drift, samples))
}

fn infer_drift(traj: &Trajectory, dim: usize) -> SpatialVec {
    for i in (0..traj.times.len()).rev() {
        let t = traj.times[i];
        if t > 0.0 {
            return traj.positions[i].sub(&traj.fluctuation[i]).scaled(1.0 / t);
        }
    }
    SpatialVec::zeros(dim)
}
