//! Ensemble statistics and scaling diagnostics: mean squared displacement
//! with jackknife errors, log-log exponent fits, an exact fractional-Brownian
//! sampler (circulant embedding) used as estimator oracle, aggregated-variance
//! Hurst estimation, and Gaussianity checks.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::Error;
use crate::geom::{SpatialMat, SpatialVec};
use crate::tracer::Trajectory;
use crate::Result;

/// Mean squared displacement of an ensemble on a common time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    pub stderr: Vec<f64>,
    pub sample_count: usize,
    /// Fitted log-log slope with its standard error, when a fit has been run.
    pub fitted_exponent: Option<(f64, f64)>,
    pub fit_window: Option<(f64, f64)>,
}

/// Log-spaced time grid, endpoints included.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && points >= 2);
    let l0 = t_min.ln();
    let l1 = t_max.ln();
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Ensemble mean of |z(t)|^2 with jackknife standard errors.
pub fn msd(trajectories: &[Trajectory], grid: &[f64]) -> Result<EnsembleSummary> {
    if trajectories.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "msd needs at least 2 trajectories, got {}",
            trajectories.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InsufficientData("empty msd grid".into()));
    }
    let n = trajectories.len();
    // per-trajectory squared displacements at every grid time
    let mut sq = vec![vec![0.0f64; grid.len()]; n];
    for (i, traj) in trajectories.iter().enumerate() {
        for (g, &t) in grid.iter().enumerate() {
            let z = traj.fluctuation_at(t)?;
            sq[i][g] = z.norm_sq();
        }
    }
    let mut mean = vec![0.0f64; grid.len()];
    for row in &sq {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    // jackknife over trajectories
    let mut stderr = vec![0.0f64; grid.len()];
    for g in 0..grid.len() {
        let total = mean[g] * n as f64;
        let mut ss = 0.0;
        for row in &sq {
            let loo = (total - row[g]) / (n - 1) as f64;
            let d = loo - mean[g];
            ss += d * d;
        }
        stderr[g] = (ss * (n - 1) as f64 / n as f64).sqrt();
    }
    Ok(EnsembleSummary {
        times: grid.to_vec(),
        msd: mean,
        stderr,
        sample_count: n,
        fitted_exponent: None,
        fit_window: None,
    })
}

/// Weighted least squares of log msd against log t over a time window.
/// Returns (slope, stderr).
pub fn scaling_exponent(summary: &EnsembleSummary, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let idx: Vec<usize> = summary
        .times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12))
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs >= 8 grid points in the window, got {}",
            idx.len()
        )));
    }
    if idx.iter().any(|&i| summary.msd[i] <= 0.0) {
        return Err(Error::Degenerate("nonpositive msd in fit window".into()));
    }
    let weighted = idx.iter().all(|&i| summary.stderr[i] > 0.0);
    let xs: Vec<f64> = idx.iter().map(|&i| summary.times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| summary.msd[i].ln()).collect();
    let ws: Vec<f64> = idx
        .iter()
        .map(|&i| {
            if weighted {
                let rel = summary.stderr[i] / summary.msd[i];
                1.0 / (rel * rel)
            } else {
                1.0
            }
        })
        .collect();
    let wsum: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("degenerate time window".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let intercept = ybar - slope * xbar;
        let ss_res: f64 = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum();
        let dof = (idx.len() - 2).max(1) as f64;
        (ss_res / dof / sxx).sqrt()
    };
    Ok((slope, stderr))
}

/// Ensemble estimate of the diffusivity matrix z(t) (x) z(t) / (2 t).
pub fn diffusivity_estimate(trajectories: &[Trajectory], t: f64) -> Result<SpatialMat> {
    if trajectories.is_empty() {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    if t <= 0.0 {
        return Err(Error::InvalidParams("diffusivity estimate needs t > 0".into()));
    }
    let dim = trajectories[0].dim();
    let mut acc = SpatialMat::zeros(dim);
    for traj in trajectories {
        let z = traj.fluctuation_at(t)?;
        acc = acc.add(&SpatialMat::outer(&z, &z));
    }
    Ok(acc.scaled(1.0 / (2.0 * t * trajectories.len() as f64)))
}

// ---------------------------------------------------------------------------
// exact fractional Brownian motion
// ---------------------------------------------------------------------------

/// Autocovariance of unit fractional Gaussian noise at lag j.
fn fgn_gamma(hurst: f64, j: f64) -> f64 {
    let two_h = 2.0 * hurst;
    0.5 * ((j + 1.0).powf(two_h) - 2.0 * j.powf(two_h) + (j - 1.0).abs().powf(two_h))
}

/// Exact fBM path of `n` points (starting at 0) on a grid of spacing `dt`,
/// via circulant embedding of the increment covariance; Cholesky for short
/// paths. Fails rather than truncating if the embedding is not PSD.
pub fn fbm_oracle(hurst: f64, n: usize, dt: f64, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    if !(0.0 < hurst && hurst < 1.0) {
        return Err(Error::InvalidParams(format!("Hurst index must lie in (0,1), got {hurst}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData("fbm_oracle needs n >= 2".into()));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    let n_inc = n - 1;
    let fgn = if n_inc <= 64 {
        fgn_cholesky(hurst, n_inc, rng)?
    } else {
        fgn_circulant(hurst, n_inc, rng)?
    };
    let scale = dt.powf(hurst);
    let mut path = Vec::with_capacity(n);
    path.push(0.0);
    let mut acc = 0.0;
    for g in fgn {
        acc += g * scale;
        path.push(acc);
    }
    Ok(path)
}

fn fgn_circulant(hurst: f64, n_inc: usize, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    let m = 2 * n_inc;
    // first row of the circulant: gamma(0..n_inc), then mirrored lags
    let mut row: Vec<Complex64> = Vec::with_capacity(m);
    for j in 0..=n_inc {
        row.push(Complex64::new(fgn_gamma(hurst, j as f64), 0.0));
    }
    for j in (1..n_inc).rev() {
        row.push(Complex64::new(fgn_gamma(hurst, j as f64), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let mut lambda = Vec::with_capacity(m);
    let max_l = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
    for c in &row {
        if c.re < -1e-9 * max_l {
            return Err(Error::EmbeddingNotPsd { min_eigenvalue: c.re });
        }
        lambda.push(c.re.max(0.0));
    }
    // hermitian random spectrum: V_0, V_{n} real; V_{m-k} = conj(V_k)
    let mut v = vec![Complex64::new(0.0, 0.0); m];
    let g0: f64 = rng.sample(StandardNormal);
    v[0] = Complex64::new((lambda[0] * m as f64).sqrt() * g0, 0.0);
    let gn: f64 = rng.sample(StandardNormal);
    v[n_inc] = Complex64::new((lambda[n_inc] * m as f64).sqrt() * gn, 0.0);
    for k in 1..n_inc {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let s = (lambda[k] * m as f64 / 2.0).sqrt();
        v[k] = Complex64::new(s * a, s * b);
        v[m - k] = v[k].conj();
    }
    let ifft = planner.plan_fft_inverse(m);
    ifft.process(&mut v);
    // rustfft's inverse is unnormalized; the 1/m makes E x^2 = gamma(0)
    Ok(v[..n_inc].iter().map(|c| c.re / m as f64).collect())
}

fn fgn_cholesky(hurst: f64, n_inc: usize, rng: &mut ChaCha12Rng) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; n_inc * n_inc];
    for i in 0..n_inc {
        for j in 0..=i {
            let mut s = fgn_gamma(hurst, (i as f64 - j as f64).abs());
            for k in 0..j {
                s -= l[i * n_inc + k] * l[j * n_inc + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::EmbeddingNotPsd { min_eigenvalue: s });
                }
                l[i * n_inc + i] = s.sqrt();
            } else {
                l[i * n_inc + j] = s / l[j * n_inc + j];
            }
        }
    }
    let g: Vec<f64> = (0..n_inc).map(|_| rng.sample(StandardNormal)).collect();
    Ok((0..n_inc)
        .map(|i| (0..=i).map(|k| l[i * n_inc + k] * g[k]).sum())
        .collect())
}

// ---------------------------------------------------------------------------
// Hurst estimation and Gaussianity
// ---------------------------------------------------------------------------

/// Aggregated-variance Hurst estimator on a path: the variance of block
/// means of the increments scales as m^{2H-2}. Returns (H, stderr).
pub fn hurst_estimate(series: &[f64]) -> Result<(f64, f64)> {
    if series.len() < 256 {
        return Err(Error::InsufficientData(format!(
            "hurst_estimate needs a path of length >= 256, got {}",
            series.len()
        )));
    }
    let inc: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len();
    if inc.iter().all(|&x| x == inc[0]) {
        return Err(Error::Degenerate("constant series".into()));
    }
    // geometric block sizes in [8, n/64]; block counts stay >= 64
    let m_max = n / 64;
    let mut sizes = Vec::new();
    let mut m = 8usize;
    while m <= m_max {
        sizes.push(m);
        let next = ((m as f64) * 1.6).ceil() as usize;
        m = next.max(m + 1);
    }
    if sizes.len() < 4 {
        return Err(Error::InsufficientData("path too short for block scaling".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for &m in &sizes {
        let nb = n / m;
        let mut means = Vec::with_capacity(nb);
        for b in 0..nb {
            let s: f64 = inc[b * m..(b + 1) * m].iter().sum();
            means.push(s / m as f64);
        }
        let mu = means.iter().sum::<f64>() / nb as f64;
        let var = means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (nb - 1) as f64;
        if var <= 0.0 {
            return Err(Error::Degenerate("degenerate block variance".into()));
        }
        xs.push((m as f64).ln());
        ys.push(var.ln());
        ws.push(nb as f64);
    }
    let wsum: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .zip(&ws)
        .map(|((x, y), w)| {
            let r = y - (slope * x + intercept);
            w * r * r
        })
        .sum();
    let dof = (xs.len() - 2).max(1) as f64;
    let slope_se = (ss_res / dof / sxx).sqrt();
    Ok((1.0 + slope / 2.0, slope_se / 2.0))
}

/// Excess kurtosis with its asymptotic standard error sqrt(24/n).
pub fn gaussianity_check(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "gaussianity check needs >= 100 samples, got {n}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let m2 = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if m2 <= 0.0 {
        return Err(Error::Degenerate("constant sample".into()));
    }
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
    let kurt = m4 / (m2 * m2) - 3.0;
    Ok((kurt, (24.0 / n as f64).sqrt()))
}

/// Unbiased sample covariance of d-vectors.
pub fn empirical_cov(samples: &[SpatialVec]) -> Result<SpatialMat> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("covariance needs >= 2 samples".into()));
    }
    let dim = samples[0].dim();
    let n = samples.len() as f64;
    let mut mean = SpatialVec::zeros(dim);
    for s in samples {
        mean = mean.add(s);
    }
    mean = mean.scaled(1.0 / n);
    let mut acc = SpatialMat::zeros(dim);
    for s in samples {
        let d = s.sub(&mean);
        acc = acc.add(&SpatialMat::outer(&d, &d));
    }
    Ok(acc.scaled(1.0 / (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::theory::fbm_exact_cov;

    fn const_traj(dim: usize, horizon: f64, z: &[f64]) -> Trajectory {
        let times: Vec<f64> = (0..=10).map(|i| horizon * i as f64 / 10.0).collect();
        let zv = SpatialVec::from_slice(z);
        Trajectory {
            times: times.clone(),
            positions: times.iter().map(|&t| zv.scaled(if t > 0.0 { 1.0 } else { 0.0 })).collect(),
            fluctuation: times
                .iter()
                .map(|&t| if t > 0.0 { zv } else { SpatialVec::zeros(dim) })
                .collect(),
        }
    }

    #[test]
    fn msd_zero_and_duplicated() {
        let zero = const_traj(2, 10.0, &[0.0, 0.0]);
        let grid = [1.0, 5.0, 9.0];
        let s = msd(&[zero.clone(), zero.clone()], &grid).unwrap();
        assert!(s.msd.iter().all(|&m| m == 0.0));

        let one = const_traj(2, 10.0, &[3.0, 4.0]);
        let s = msd(&[one.clone(), one.clone()], &grid).unwrap();
        for &m in &s.msd {
            assert!((m - 25.0).abs() < 1e-12);
        }
        assert!(s.stderr.iter().all(|&e| e < 1e-12));
        // fewer than two trajectories is an error
        assert!(msd(&[one], &grid).is_err());
    }

    #[test]
    fn msd_linearity_in_amplitude() {
        let a = const_traj(2, 10.0, &[1.0, 2.0]);
        let b = const_traj(2, 10.0, &[-2.0, 0.5]);
        let grid = [2.0, 8.0];
        let base = msd(&[a.clone(), b.clone()], &grid).unwrap();
        let scale = |t: &Trajectory, c: f64| Trajectory {
            times: t.times.clone(),
            positions: t.positions.iter().map(|p| p.scaled(c)).collect(),
            fluctuation: t.fluctuation.iter().map(|z| z.scaled(c)).collect(),
        };
        let scaled = msd(&[scale(&a, 3.0), scale(&b, 3.0)], &grid).unwrap();
        for (m1, m0) in scaled.msd.iter().zip(base.msd.iter()) {
            assert!((m1 - 9.0 * m0).abs() < 1e-9 * m1.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_exponent_recovers_power_laws() {
        let times = log_grid(1.0, 100.0, 24);
        let mk = |f: &dyn Fn(f64) -> f64| EnsembleSummary {
            times: times.clone(),
            msd: times.iter().map(|&t| f(t)).collect(),
            stderr: vec![0.0; times.len()],
            sample_count: 100,
            fitted_exponent: None,
            fit_window: None,
        };
        let (s, se) = scaling_exponent(&mk(&|t| t.powf(1.5)), (1.0, 100.0)).unwrap();
        assert!((s - 1.5).abs() < 1e-10, "slope {s}");
        assert!(se < 1e-10);
        let (s, _) = scaling_exponent(&mk(&|t| 7.0 * t.powf(1.5)), (1.0, 100.0)).unwrap();
        assert!((s - 1.5).abs() < 1e-10, "scale invariance broken: {s}");
        let (s, _) = scaling_exponent(&mk(&|_| 2.5), (1.0, 100.0)).unwrap();
        assert!(s.abs() < 1e-12);
        // narrow window: too few points
        assert!(scaling_exponent(&mk(&|t| t), (50.0, 60.0)).is_err());
    }

    #[test]
    fn fbm_oracle_brownian_increments_uncorrelated() {
        let mut r = rng::oracle_rng(1, 0);
        let path = fbm_oracle(0.5, 1 << 12, 1.0, &mut r).unwrap();
        let inc: Vec<f64> = path.windows(2).map(|w| w[1] - w[0]).collect();
        let n = inc.len() - 1;
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let var = inc.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / inc.len() as f64;
        let lag1: f64 = (0..n).map(|i| (inc[i] - mean) * (inc[i + 1] - mean)).sum::<f64>()
            / (n as f64 * var);
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 autocorr {lag1}");
    }

    #[test]
    fn fbm_oracle_matches_exact_covariance() {
        let hurst = 0.75;
        let n = 1 << 10;
        let paths = 1500;
        let (si, ti) = (300usize, 800usize);
        let mut cov = 0.0;
        let mut var_s = 0.0;
        for i in 0..paths {
            let mut r = rng::oracle_rng(2, i as u64);
            let p = fbm_oracle(hurst, n, 1.0, &mut r).unwrap();
            cov += p[si] * p[ti];
            var_s += p[si] * p[si];
        }
        cov /= paths as f64;
        var_s /= paths as f64;
        let d = SpatialMat::identity(2);
        let expect = fbm_exact_cov(hurst, &d, si as f64, ti as f64).unwrap().get(0, 0);
        let expect_var = fbm_exact_cov(hurst, &d, si as f64, si as f64).unwrap().get(0, 0);
        // MC error of a product of Gaussians: ~ sqrt(2/paths) relative
        let tol = 4.0 * (2.0 / paths as f64).sqrt();
        assert!((cov / expect - 1.0).abs() < tol, "cov {cov} vs {expect}");
        assert!((var_s / expect_var - 1.0).abs() < tol, "var {var_s} vs {expect_var}");
    }

    #[test]
    fn fbm_oracle_increment_variance_is_stationary() {
        let hurst = 0.7;
        let n = 1 << 11;
        let paths = 400;
        let mut head = 0.0;
        let mut tail = 0.0;
        let m = 128;
        for i in 0..paths {
            let mut r = rng::oracle_rng(3, i as u64);
            let p = fbm_oracle(hurst, n, 1.0, &mut r).unwrap();
            for j in 0..m {
                let d = p[j + 1] - p[j];
                head += d * d;
                let k = n - 2 - j;
                let d = p[k + 1] - p[k];
                tail += d * d;
            }
        }
        head /= (paths * m) as f64;
        tail /= (paths * m) as f64;
        let se = 3.0 * (2.0 / (paths * m) as f64).sqrt();
        assert!((head - 1.0).abs() < se, "head {head}");
        assert!((tail - 1.0).abs() < se, "tail {tail}");
    }

    #[test]
    fn fbm_oracle_cholesky_and_circulant_agree_in_law() {
        // short path goes through Cholesky; check the variance at the end
        let hurst = 0.6;
        let n = 48; // n-1 <= 64 -> Cholesky
        let paths = 4000;
        let mut var_end = 0.0;
        for i in 0..paths {
            let mut r = rng::oracle_rng(4, i as u64);
            let p = fbm_oracle(hurst, n, 1.0, &mut r).unwrap();
            var_end += p[n - 1] * p[n - 1];
        }
        var_end /= paths as f64;
        let expect = ((n - 1) as f64).powf(2.0 * hurst);
        assert!(
            (var_end / expect - 1.0).abs() < 4.0 * (2.0 / paths as f64).sqrt(),
            "var {var_end} vs {expect}"
        );
    }

    #[test]
    fn hurst_estimator_on_brownian_and_fbm() {
        // cumulative sum of white noise: H = 0.5
        let mut r = rng::oracle_rng(5, 0);
        let mut path = vec![0.0f64];
        for _ in 0..(1 << 14) {
            let g: f64 = r.sample(StandardNormal);
            path.push(path.last().unwrap() + g);
        }
        let (h, _) = hurst_estimate(&path).unwrap();
        assert!((h - 0.5).abs() < 0.05, "H {h}");

        let mut r = rng::oracle_rng(5, 1);
        let p = fbm_oracle(0.75, (1 << 14) + 1, 1.0, &mut r).unwrap();
        let (h, _) = hurst_estimate(&p).unwrap();
        assert!((0.70..=0.80).contains(&h), "H {h}");

        // scale invariance
        let scaled: Vec<f64> = p.iter().map(|x| -4.0 * x).collect();
        let (h2, _) = hurst_estimate(&scaled).unwrap();
        assert!((h - h2).abs() < 1e-12);

        // degenerate input
        assert!(hurst_estimate(&vec![1.0; 4096]).is_err());
        assert!(hurst_estimate(&path[..100]).is_err());
    }

    #[test]
    fn gaussianity_check_cases() {
        // Rademacher: excess kurtosis -> -2
        let rad: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (k, _) = gaussianity_check(&rad).unwrap();
        assert!((k + 2.0).abs() < 1e-9, "kurtosis {k}");

        let mut r = rng::oracle_rng(6, 0);
        let gauss: Vec<f64> = (0..10_000).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let (k, se) = gaussianity_check(&gauss).unwrap();
        assert!(k.abs() < 3.0 * se, "kurtosis {k} vs se {se}");

        // rare large jumps: detector must fire
        let mut heavy = gauss.clone();
        for i in (0..heavy.len()).step_by(211) {
            heavy[i] *= 12.0;
        }
        let (k, se) = gaussianity_check(&heavy).unwrap();
        assert!(k > 3.0 * se, "heavy-tail undetected: {k}");

        assert!(gaussianity_check(&vec![1.0; 1000]).is_err());
        assert!(gaussianity_check(&rad[..50]).is_err());
    }

    #[test]
    fn empirical_cov_identity_for_standard_gaussian() {
        let mut r = rng::oracle_rng(7, 0);
        let samples: Vec<SpatialVec> = (0..100_000)
            .map(|_| {
                SpatialVec::from_slice(&[r.sample(StandardNormal), r.sample(StandardNormal)])
            })
            .collect();
        let c = empirical_cov(&samples).unwrap();
        let se = 3.0 / (samples.len() as f64).sqrt();
        assert!((c.get(0, 0) - 1.0).abs() < se);
        assert!((c.get(1, 1) - 1.0).abs() < se);
        assert!(c.get(0, 1).abs() < se);
        assert!(c.is_symmetric(1e-14) && c.is_psd(1e-12));

        // identical samples: zero matrix
        let same = vec![SpatialVec::from_slice(&[2.0, -1.0]); 8];
        assert_eq!(empirical_cov(&same).unwrap().max_abs(), 0.0);
        assert!(empirical_cov(&same[..1]).is_err());
    }
}
