//! Pipeline stages behind the CLI subcommands: ensemble simulation, analysis,
//! and the full classify -> quadrature -> simulate -> stats report, with a
//! manifest recording stage status and outputs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use driftflow::field::{init_state, sample_modes_with_floor, ModeSet};
use driftflow::rng;
use driftflow::stats::{self, EnsembleSummary};
use driftflow::theory;
use driftflow::tracer::{self, TracerMode, Trajectory};
use driftflow::{Regime, RegimeReport};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub crate_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.field.seed,
            workers: cfg.ensemble.workers,
            stages: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn stage_ok(&mut self, name: &str) {
        self.stages.push(StageRecord { name: name.into(), status: "ok".into(), detail: None });
    }

    pub fn stage_failed(&mut self, name: &str, detail: String) {
        self.stages.push(StageRecord {
            name: name.into(),
            status: "failed".into(),
            detail: Some(detail),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("MANIFEST.json"), self)
    }
}

/// Hash of the canonical TOML serialization of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = toml::to_string(cfg).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("json serialization: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Build the experiment's frozen mode set from the config seed.
pub fn build_modes(cfg: &ExperimentConfig) -> Result<Arc<ModeSet>, CliError> {
    let mut mrng = rng::modes_rng(cfg.field.seed);
    let modes = sample_modes_with_floor(
        &cfg.spectrum,
        cfg.field.mode_count,
        cfg.field.strata,
        cfg.field.floor_factor,
        &mut mrng,
    )?;
    Ok(Arc::new(modes))
}

/// Run the trajectory ensemble on a dedicated pool. Each trajectory owns
/// streams derived from (seed, index), so the results are identical for any
/// worker count; the merge order is the trajectory index.
pub fn run_ensemble(
    cfg: &ExperimentConfig,
    modes: &Arc<ModeSet>,
    workers: usize,
) -> Result<Vec<Trajectory>, CliError> {
    let tracer_cfg = cfg.tracer_config();
    let seed = cfg.field.seed;
    let params = cfg.spectrum.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let trajectories: Result<Vec<Trajectory>, driftflow::Error> = pool.install(|| {
        (0..cfg.ensemble.path_count)
            .into_par_iter()
            .map(|i| {
                let state = init_state(modes.clone(), rng::trajectory_rng(seed, i as u64));
                match tracer_cfg.mode {
                    TracerMode::BallisticLine => {
                        tracer::ballistic_line(state, &params, &tracer_cfg)
                    }
                    TracerMode::FullTrajectory => {
                        let mut noise = rng::tracer_noise_rng(seed, i as u64);
                        tracer::integrate(state, &params, &tracer_cfg, &mut noise)
                    }
                }
            })
            .collect()
    });
    Ok(trajectories?)
}

pub fn write_msd_csv(path: &Path, summary: &EnsembleSummary) -> Result<(), CliError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "t,msd,stderr")?;
    for i in 0..summary.times.len() {
        writeln!(out, "{},{},{}", summary.times[i], summary.msd[i], summary.stderr[i])?;
    }
    Ok(())
}

pub fn read_msd_csv(path: &Path) -> Result<EnsembleSummary, CliError> {
    let text = fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut msd = Vec::new();
    let mut stderr = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "t,msd,stderr" {
                return Err(CliError::Internal(format!("unexpected msd.csv header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Internal(format!("msd.csv parse: {e}")))?;
        if fields.len() != 3 {
            return Err(CliError::Internal(format!("bad msd.csv row: {line}")));
        }
        times.push(fields[0]);
        msd.push(fields[1]);
        stderr.push(fields[2]);
    }
    Ok(EnsembleSummary {
        times,
        msd,
        stderr,
        sample_count: 0,
        fitted_exponent: None,
        fit_window: None,
    })
}

fn trajectory_metadata(cfg: &ExperimentConfig, report: &RegimeReport) -> serde_json::Value {
    json!({
        "seed": cfg.field.seed,
        "mode_count": cfg.field.mode_count,
        "dt": cfg.tracer.dt,
        "epsilon": cfg.tracer.epsilon,
        "delta": report.delta.unwrap_or(1.0),
        "mode": cfg.tracer.mode,
        "amplitude_convention": "epsilon scales the dynamics dx = (v + eps V) dt; \
the ballistic line runs at unit amplitude and scales as T^{2H}",
    })
}

/// simulate: ensemble -> msd.csv (+ modes.csv, trajectories/, metadata).
pub fn simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new(cfg);
    match simulate_stages(cfg, out_dir, &mut manifest) {
        Ok(()) => {
            manifest.write(out_dir)?;
            Ok(())
        }
        Err(e) => {
            manifest.write(out_dir)?;
            Err(e)
        }
    }
}

fn simulate_stages(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let report = cfg
        .spectrum
        .classify()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let modes = match build_modes(cfg) {
        Ok(m) => {
            manifest.stage_ok("modes");
            m
        }
        Err(e) => {
            manifest.stage_failed("modes", e.to_string());
            return Err(e);
        }
    };
    let modes_path = out_dir.join("modes.csv");
    {
        let mut f = fs::File::create(&modes_path)?;
        modes.export_csv(&mut f)?;
        manifest.outputs.push("modes.csv".into());
    }

    let trajectories = match run_ensemble(cfg, &modes, cfg.ensemble.workers) {
        Ok(t) => {
            manifest.stage_ok("ensemble");
            t
        }
        Err(e) => {
            manifest.stage_failed("ensemble", e.to_string());
            return Err(e);
        }
    };

    if cfg.output.write_trajectories {
        let dir = out_dir.join("trajectories");
        fs::create_dir_all(&dir)?;
        for (i, t) in trajectories.iter().enumerate() {
            let mut f = fs::File::create(dir.join(format!("traj_{i:05}.csv")))?;
            t.write_csv(&mut f)?;
        }
        write_json(&dir.join("metadata.json"), &trajectory_metadata(cfg, &report))?;
        manifest.outputs.push("trajectories/".into());
    }

    let grid = stats::log_grid(cfg.grid_min(), cfg.tracer.horizon, cfg.analysis.grid_points);
    let summary = match stats::msd(&trajectories, &grid) {
        Ok(s) => {
            manifest.stage_ok("msd");
            s
        }
        Err(e) => {
            manifest.stage_failed("msd", e.to_string());
            return Err(e.into());
        }
    };
    write_msd_csv(&out_dir.join("msd.csv"), &summary)?;
    manifest.outputs.push("msd.csv".into());
    Ok(())
}

/// analyze: read msd.csv, fit the scaling exponent over the window.
pub fn analyze(cfg: &ExperimentConfig, dir: &Path) -> Result<serde_json::Value, CliError> {
    let summary = read_msd_csv(&dir.join("msd.csv"))?;
    let window = (cfg.analysis.fit_window[0], cfg.analysis.fit_window[1]);
    let (slope, slope_se) = stats::scaling_exponent(&summary, window)?;
    let result = json!({
        "fit_window": [window.0, window.1],
        "slope": slope,
        "slope_stderr": slope_se,
        "points": summary.times.len(),
    });
    write_json(&dir.join("analysis.json"), &result)?;
    Ok(result)
}

/// The full experiment: classify -> quadrature -> simulate -> stats ->
/// summary.json with the theory-vs-simulation comparison.
pub fn report(cfg: &ExperimentConfig, out_dir: &Path) -> Result<serde_json::Value, CliError> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new(cfg);
    let result = report_stages(cfg, out_dir, &mut manifest);
    manifest.write(out_dir)?;
    result
}

fn report_stages(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<serde_json::Value, CliError> {
    // classification gates the rest
    let report = match cfg.spectrum.classify() {
        Ok(r) => {
            if r.regime == Regime::OutOfScope {
                manifest.stage_failed("classify", r.reason.clone());
                return Err(CliError::OutOfScope(r.reason));
            }
            manifest.stage_ok("classify");
            r
        }
        Err(e) => {
            manifest.stage_failed("classify", e.to_string());
            return Err(CliError::OutOfScope(e.to_string()));
        }
    };

    // regime-appropriate quadrature
    let tol = 1e-5;
    let theory_block = match report.regime {
        Regime::Diffusive => {
            let d = theory::taylor_kubo(&cfg.spectrum, 0.0, tol);
            if d.divergence_suspected {
                manifest.stage_failed("quadrature", "Taylor-Kubo integral diverges".into());
                return Err(CliError::Internal("Taylor-Kubo integral diverges".into()));
            }
            manifest.stage_ok("quadrature");
            json!({
                "quantity": "taylor_kubo",
                "trace": d.value.trace(),
                "matrix": d.value.to_rows(),
                "error_trace": d.error_estimate.trace(),
                "converged": d.converged,
                "evaluations": d.evaluations,
            })
        }
        Regime::FractionalBm => {
            let d = match theory::fbm_covariance(&cfg.spectrum, tol) {
                Ok(d) => d,
                Err(e) => {
                    manifest.stage_failed("quadrature", e.to_string());
                    return Err(e.into());
                }
            };
            manifest.stage_ok("quadrature");
            json!({
                "quantity": "fbm_covariance",
                "trace": d.value.trace(),
                "matrix": d.value.to_rows(),
                "error_trace": d.error_estimate.trace(),
                "converged": d.converged,
                "divergence_suspected": d.divergence_suspected,
                "evaluations": d.evaluations,
            })
        }
        Regime::OutOfScope => unreachable!(),
    };

    simulate_stages(cfg, out_dir, manifest)?;
    let summary = read_msd_csv(&out_dir.join("msd.csv"))?;

    let window = (cfg.analysis.fit_window[0], cfg.analysis.fit_window[1]);
    let (slope, slope_se) = match stats::scaling_exponent(&summary, window) {
        Ok(s) => {
            manifest.stage_ok("analysis");
            s
        }
        Err(e) => {
            manifest.stage_failed("analysis", e.to_string());
            return Err(e.into());
        }
    };

    let theory_trace = theory_block["trace"].as_f64().unwrap_or(0.0);
    let comparison = match report.regime {
        Regime::Diffusive => {
            // MSD ~ 2 tr D* t: compare the trace at the window end
            let (t_end, msd_end) = window_end_point(&summary, window);
            let ratio = msd_end / (2.0 * theory_trace * t_end);
            json!({
                "expected_slope": 1.0,
                "fitted_slope": slope,
                "slope_stderr": slope_se,
                "slope_minus_one_abs": (slope - 1.0).abs(),
                "msd_over_2t_trace": msd_end / (2.0 * t_end),
                "trd_star": theory_trace,
                "diffusivity_rel_dev": (ratio - 1.0).abs(),
            })
        }
        Regime::FractionalBm => {
            let hurst = report.hurst.unwrap_or(0.5);
            let mut ratio_min = f64::INFINITY;
            let mut ratio_max = f64::NEG_INFINITY;
            for i in 0..summary.times.len() {
                let t = summary.times[i];
                if t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12) {
                    let r = summary.msd[i] / (theory_trace * t.powf(2.0 * hurst));
                    ratio_min = ratio_min.min(r);
                    ratio_max = ratio_max.max(r);
                }
            }
            json!({
                "expected_slope": 2.0 * hurst,
                "fitted_slope": slope,
                "slope_stderr": slope_se,
                "hurst": hurst,
                "delta": report.delta,
                "tr_d_fbm": theory_trace,
                "amplitude_ratio_min": ratio_min,
                "amplitude_ratio_max": ratio_max,
            })
        }
        Regime::OutOfScope => unreachable!(),
    };

    let summary_json = json!({
        "schema_version": SCHEMA_VERSION,
        "config_sha256": manifest.config_sha256,
        "classification": {
            "regime": report.regime,
            "delta": report.delta,
            "hurst": report.hurst,
            "reason": report.reason,
        },
        "theory": theory_block,
        "simulation": {
            "path_count": cfg.ensemble.path_count,
            "mode_count": cfg.field.mode_count,
            "horizon": cfg.tracer.horizon,
            "dt": cfg.tracer.dt,
            "grid_points": summary.times.len(),
        },
        "comparison": comparison,
    });
    write_json(&out_dir.join("summary.json"), &summary_json)?;
    manifest.outputs.push("summary.json".into());
    Ok(summary_json)
}

fn window_end_point(summary: &EnsembleSummary, window: (f64, f64)) -> (f64, f64) {
    let mut best = (summary.times[0], summary.msd[0]);
    for i in 0..summary.times.len() {
        if summary.times[i] <= window.1 * (1.0 + 1e-12) {
            best = (summary.times[i], summary.msd[i]);
        }
    }
    best
}

/// corrector-scan: CSV table of the two corrector integrals over a
/// descending lambda list, plus verdict lines.
pub fn corrector_scan(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    out: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let scan = theory::corrector_scan(&cfg.spectrum, lambdas, 1e-7)?;
    writeln!(out, "lambda,corrector_variance,corrector_gradient_variance")
        .map_err(CliError::from_io)?;
    for row in &scan.rows {
        writeln!(out, "{},{},{}", row.lambda, row.variance, row.gradient_variance)
            .map_err(CliError::from_io)?;
    }
    if let Some(dec) = scan.variance_decreasing {
        let verdict = if dec { "variance -> 0 (strictly decreasing)" } else { "variance not decreasing" };
        writeln!(out, "# verdict: {verdict}").map_err(CliError::from_io)?;
    }
    if let Some(bounded) = scan.gradient_bounded {
        let verdict = if bounded {
            "gradient variance bounded (successive ratio within 1% of 1)"
        } else {
            "gradient variance still growing across the scan"
        };
        writeln!(out, "# verdict: {verdict}").map_err(CliError::from_io)?;
    }
    Ok(())
}

/// Output directory from config + CLI override.
pub fn resolve_out_dir(cfg: &ExperimentConfig, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory))
}
