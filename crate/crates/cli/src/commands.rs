//! Subcommand implementations. Each builds its inputs from the resolved
//! config, runs the corresponding library recipe, writes a CSV (floats at
//! 17 significant digits so downstream checks can round-trip them), and
//! returns a summary for the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use slowmix::estimators::{acceptance_scan, dirichlet_gap_estimate, set_measure_mc, ScanPoint};
use slowmix::experiments::{mixing_run, resonance_run, MixingConfig, ResonanceConfig};
use slowmix::identities::{run_suite, SuiteOptions};
use slowmix::kernels::KernelSpec;
use slowmix::rng::{DrawKind, Stream, StreamKey};

use crate::config::{build_target_from, ResolvedConfig};

/// Exit disposition of a command.
pub struct Outcome {
    /// 0 = pass, 1 = assertion failure; config errors are reported as `Err`
    /// before an outcome exists.
    pub exit: i32,
    pub summary: serde_json::Value,
    pub outputs: Vec<PathBuf>,
}

/// Full-precision decimal float: 17 significant digits round-trips f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_output(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn verify_identities(config: &ResolvedConfig) -> Result<Outcome, String> {
    let opts = SuiteOptions {
        k_max: config.identities.k_max,
        seed: config.master_seed,
    };
    let rows = run_suite(&opts);
    let mut csv = String::from("check,cases,max_err,tol,pass\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.name,
            row.cases,
            fmt_f64(row.max_err),
            fmt_f64(row.tol),
            row.pass
        );
    }
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    let failing: Vec<&str> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.as_str())
        .collect();
    for name in &failing {
        eprintln!("identity check failed: {name}");
    }
    Ok(Outcome {
        exit: if failing.is_empty() { 0 } else { 1 },
        summary: json!({
            "checks": rows.len(),
            "failing": failing,
            "k_max": config.identities.k_max,
        }),
        outputs: vec![path],
    })
}

pub fn scan(config: &ResolvedConfig) -> Result<Outcome, String> {
    let grid = config.grid.as_ref().ok_or("scan needs a [grid] section")?;
    let target_cfg = config
        .target
        .as_ref()
        .ok_or("scan needs a [target] section")?;
    let start_cfg = config.start.as_ref().ok_or("scan needs a [start] section")?;

    let mut points: Vec<ScanPoint> = Vec::new();
    for &h in &grid.mala_h {
        let (target, _) = build_target_from(target_cfg)?;
        let start = crate::config::build_start_from(start_cfg, &target, target_cfg)?;
        points.push(ScanPoint {
            label: format!("{}-mala", target_cfg.kind),
            kernel: KernelSpec::Mala { h },
            target,
            start,
        });
    }
    for &eta in &grid.hmc_eta {
        for &k in &grid.hmc_k {
            // resonant targets respond to the kernel's (eta, k)
            let (target, _) = if target_cfg.kind == "resonant" {
                let mut cfg = target_cfg.clone();
                cfg.eta = Some(eta);
                cfg.k = Some(k);
                build_target_from(&cfg)?
            } else {
                build_target_from(target_cfg)?
            };
            let start = crate::config::build_start_from(start_cfg, &target, target_cfg)?;
            points.push(ScanPoint {
                label: format!("{}-hmc", target_cfg.kind),
                kernel: KernelSpec::Hmc { eta, k },
                target,
                start,
            });
        }
    }
    if points.is_empty() {
        return Err("scan grid is empty".into());
    }

    let rows = acceptance_scan(&points, config.trials, config.master_seed)
        .map_err(|e| e.to_string())?;
    let mut csv = String::from(
        "label,h,eta,k,n,mean_log_accept,accept_rate,escape_rate,gap_est,gap_se,tv_lb\n",
    );
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.label,
            fmt_f64(row.h),
            fmt_f64(row.eta),
            row.k,
            row.n,
            fmt_f64(row.mean_log_accept),
            fmt_f64(row.accept_rate),
            fmt_f64(row.escape_rate),
            fmt_f64(row.gap_est),
            fmt_f64(row.gap_se),
            fmt_f64(row.tv_lb)
        );
    }
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    let grad_evals: u64 = points
        .iter()
        .map(|p| p.kernel.grad_evals_per_step() * 2 * config.trials)
        .sum();
    Ok(Outcome {
        exit: 0,
        summary: json!({
            "grid_points": rows.len(),
            "trials": config.trials,
            // one restricted-start step plus one gap step per trial
            "grad_evals": grad_evals,
        }),
        outputs: vec![path],
    })
}

pub fn mixing(config: &ResolvedConfig) -> Result<Outcome, String> {
    let target_cfg = config
        .target
        .as_ref()
        .ok_or("mixing needs a [target] section")?;
    if target_cfg.kind != "gaussian_iso" {
        return Err("the mixing experiment targets the standard Gaussian (kind = \"gaussian_iso\")".into());
    }
    if let Some(start) = &config.start {
        if start.set != "small_ball" {
            return Err("the mixing experiment starts from the small ball (set = \"small_ball\")".into());
        }
    }
    let kernel = config.build_kernel()?;
    let out = mixing_run(&MixingConfig {
        d: target_cfg.d,
        kernel,
        steps: config.steps,
        trials: config.trials,
        seed: config.master_seed,
        stationary_samples: config.mixing.stationary_samples,
    })
    .map_err(|e| e.to_string())?;

    let mut csv = String::from("step,reject_count,mean_norm_sq,omega_large_freq,tv_lb\n");
    for row in &out.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.step,
            row.reject_count,
            fmt_f64(row.mean_norm_sq),
            fmt_f64(row.omega_large_freq),
            fmt_f64(row.tv_lb)
        );
    }
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    let grad_evals = kernel.grad_evals_per_step() * config.steps * config.trials;
    let k_steps = match kernel {
        KernelSpec::Hmc { k, .. } => k as u64,
        KernelSpec::Mala { .. } => 1,
    };
    Ok(Outcome {
        exit: 0,
        summary: json!({
            "clean_trial_fraction": out.clean_trial_fraction,
            "tv_lb_final": out.tv_lb_final,
            "grad_evals": grad_evals,
            "grad_evals_per_k_step": grad_evals as f64 / k_steps as f64,
        }),
        outputs: vec![path],
    })
}

pub fn resonance(config: &ResolvedConfig) -> Result<Outcome, String> {
    let target_cfg = config
        .target
        .as_ref()
        .ok_or("resonance needs a [target] section")?;
    if target_cfg.kind != "resonant" {
        return Err("the resonance experiment needs target kind = \"resonant\"".into());
    }
    let out = resonance_run(&ResonanceConfig {
        d: target_cfg.d,
        kappa: target_cfg.kappa.ok_or("resonant target needs kappa")?,
        eta: target_cfg.eta.ok_or("resonant target needs eta")?,
        k: target_cfg.k.ok_or("resonant target needs k")?,
        steps: config.steps,
        trials: config.trials,
        seed: config.master_seed,
        start_magnitude: config.resonance.start_magnitude,
        slab_half_width: config.resonance.slab_half_width,
        lambda_perturb: config.resonance.lambda_perturb,
        stationary_samples: config.resonance.stationary_samples,
    })
    .map_err(|e| e.to_string())?;

    let mut csv = String::from("step,magnitude,max_abs_dev,tv_lb\n");
    for row in &out.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.step,
            fmt_f64(row.magnitude),
            fmt_f64(row.max_abs_dev),
            fmt_f64(row.tv_lb)
        );
    }
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    if !out.constancy_ok {
        eprintln!(
            "resonant-coordinate magnitude drifted by {:.3e} (tolerance 1e-9)",
            out.max_deviation
        );
    }
    Ok(Outcome {
        exit: if out.constancy_ok { 0 } else { 1 },
        summary: json!({
            "j": out.j,
            "lambda": out.lambda,
            "max_deviation": out.max_deviation,
            "min_tv_lb": out.min_tv_lb,
            "acceptance_rate": out.acceptance_rate,
            "constancy_ok": out.constancy_ok,
        }),
        outputs: vec![path],
    })
}

pub fn measure(config: &ResolvedConfig) -> Result<Outcome, String> {
    let target_cfg = config
        .target
        .as_ref()
        .ok_or("measure needs a [target] section")?;
    let (target, _) = build_target_from(target_cfg)?;
    let start_cfg = config
        .start
        .as_ref()
        .ok_or("measure needs a [start] section naming the set")?;
    let set = crate::config::build_start_from(start_cfg, &target, target_cfg)?;
    let mut stream = Stream::new(StreamKey {
        seed: config.master_seed,
        trial: 0,
        step: 0,
        kind: DrawKind::Stationary,
    });
    let est = set_measure_mc(&target, &set, config.measure.samples, &mut stream)
        .map_err(|e| e.to_string())?;
    let mut csv = String::from("set,factorized,hits,n,estimate,ci_lo,ci_hi\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        start_cfg.set,
        est.factorized,
        est.hits,
        est.n,
        fmt_f64(est.estimate),
        fmt_f64(est.ci_lo),
        fmt_f64(est.ci_hi)
    );
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    Ok(Outcome {
        exit: 0,
        summary: json!({
            "set": start_cfg.set,
            "estimate": est.estimate,
            "factorized": est.factorized,
        }),
        outputs: vec![path],
    })
}

pub fn gap(config: &ResolvedConfig) -> Result<Outcome, String> {
    let target_cfg = config
        .target
        .as_ref()
        .ok_or("gap needs a [target] section")?;
    let (target, _) = build_target_from(target_cfg)?;
    let kernel = config.build_kernel()?;
    let est = dirichlet_gap_estimate(&kernel, &target, config.gap.samples, config.master_seed)
        .map_err(|e| e.to_string())?;
    let (h, eta, k) = match kernel {
        KernelSpec::Mala { h } => (h, f64::NAN, 0u64),
        KernelSpec::Hmc { eta, k } => (f64::NAN, eta, k as u64),
    };
    let mut csv = String::from("h,eta,k,n,numerator,numerator_se,variance,gap_est,gap_se\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{}",
        fmt_f64(h),
        fmt_f64(eta),
        k,
        est.n,
        fmt_f64(est.numerator),
        fmt_f64(est.numerator_se),
        fmt_f64(est.variance),
        fmt_f64(est.ratio),
        fmt_f64(est.ratio_se)
    );
    let path = PathBuf::from(&config.output);
    write_output(&path, &csv)?;
    let grad_evals = kernel.grad_evals_per_step() * config.gap.samples;
    let k_steps = match kernel {
        KernelSpec::Hmc { k, .. } => k as u64,
        KernelSpec::Mala { .. } => 1,
    };
    Ok(Outcome {
        exit: 0,
        summary: json!({
            "gap_est": est.ratio,
            "gap_se": est.ratio_se,
            "grad_evals": grad_evals,
            "grad_evals_per_k_step": grad_evals as f64 / k_steps as f64,
        }),
        outputs: vec![path],
    })
}

