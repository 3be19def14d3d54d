//! Reproducible experiment recipes: the resonance trap and the warm-start
//! mixing stall.
//!
//! These produce typed row tables; the command-line frontend only formats
//! them. Trials run in parallel and every draw is addressed by
//! `(seed, trial, step, kind)`, so the tables are identical on any thread
//! count.

use rayon::prelude::*;

use crate::estimators::{
    clopper_pearson, sample_restricted_one, tv_lower_bound, MeasureEstimate, WitnessSet, CI_LEVEL,
};
use crate::kernels::{run_chain, KernelSpec, RecordPolicy};
use crate::rng::{DrawKind, Stream, StreamKey};
use crate::targets::Target;
use crate::{Error, Result};

fn frequency(hits: u64, n: u64) -> MeasureEstimate {
    let (ci_lo, ci_hi) = clopper_pearson(hits, n, CI_LEVEL);
    MeasureEstimate {
        hits,
        n,
        estimate: hits as f64 / n as f64,
        ci_lo,
        ci_hi,
        factorized: false,
    }
}

fn stationary_membership(
    target: &Target,
    set: &WitnessSet,
    n: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    let hits = (0..n)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let mut stream = Stream::new(StreamKey {
                seed,
                trial,
                step: 0,
                kind: DrawKind::Stationary,
            });
            let mut x = vec![0.0; target.dim()];
            target.sample_stationary_into(&mut stream, &mut x)?;
            set.contains(&x).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(frequency(hits, n))
}

/// Configuration of the resonance-trap experiment.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceConfig {
    pub d: usize,
    pub kappa: f64,
    pub eta: f64,
    pub k: usize,
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
    /// Starting value of the resonant coordinate.
    pub start_magnitude: f64,
    /// Half-width of the slab witness in the resonant coordinate; the start
    /// must sit outside it.
    pub slab_half_width: f64,
    /// Multiplier on the resonant eigenvalue; 1.0 is the exact trap, any
    /// other value demonstrates its sharpness.
    pub lambda_perturb: f64,
    /// Exact stationary draws for the TV reference batch.
    pub stationary_samples: u64,
}

/// One step of the resonance table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceRow {
    pub step: u64,
    /// Resonant-coordinate magnitude of trial 0 at this step.
    pub magnitude: f64,
    /// Largest deviation of the magnitude from its start, over all trials
    /// and steps up to this one.
    pub max_abs_dev: f64,
    /// TV lower bound from all states up to this step (pooled over trials)
    /// against the slab witness.
    pub tv_lb: f64,
}

/// Result of the resonance-trap experiment.
#[derive(Debug, Clone)]
pub struct ResonanceOutcome {
    pub rows: Vec<ResonanceRow>,
    /// Resonance phase index used by the target.
    pub j: usize,
    /// The (possibly perturbed) resonant eigenvalue.
    pub lambda: f64,
    pub max_deviation: f64,
    pub min_tv_lb: f64,
    /// Whether the resonant-coordinate magnitude stayed constant to 1e-9
    /// (relative to `max(1, start)`).
    pub constancy_ok: bool,
    pub acceptance_rate: f64,
}

/// Runs the resonance trap: chains on a Gaussian whose second coordinate
/// sits on a leapfrog resonance, so its magnitude cannot change no matter
/// what the velocity draws do. The TV witness is a symmetric slab around
/// zero in that coordinate, which the chain's frozen magnitude never
/// enters.
pub fn resonance_run(config: &ResonanceConfig) -> Result<ResonanceOutcome> {
    if config.trials == 0 {
        return Err(Error::Domain(
            "resonance run needs at least one trial".into(),
        ));
    }
    if config.start_magnitude.abs() <= config.slab_half_width {
        return Err(Error::Domain(
            "the start must sit outside the slab witness".into(),
        ));
    }
    let (base, j) = Target::resonant_gaussian(config.d, config.kappa, config.eta, config.k)?;
    let mut eigen = base.eigenvalues().expect("resonant target is quadratic");
    eigen[Target::RESONANT_COORD] *= config.lambda_perturb;
    let lambda = eigen[Target::RESONANT_COORD];
    let target = if config.lambda_perturb == 1.0 {
        base
    } else {
        Target::diagonal_gaussian(&eigen)?
    };
    let res = Target::RESONANT_COORD;
    let slab = WitnessSet::Slab {
        d: config.d,
        coord: res,
        half_width: config.slab_half_width,
    };

    let kernel = KernelSpec::Hmc {
        eta: config.eta,
        k: config.k,
    };
    let mut x0 = vec![0.0; config.d];
    x0[res] = config.start_magnitude;

    let policy = RecordPolicy {
        thin: 1,
        keep_records: false,
    };
    let traces = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            run_chain(
                &kernel,
                &target,
                &x0,
                config.steps,
                config.seed,
                trial,
                policy,
                None,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let stationary = stationary_membership(
        &target,
        &slab,
        config.stationary_samples,
        config.seed ^ 0x7e5,
    )?;

    let start_mag = config.start_magnitude.abs();
    let tol_scale = 1.0_f64.max(start_mag);
    let steps = config.steps as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut max_dev = 0.0f64;
    let mut slab_hits = 0u64;
    let mut min_tv = f64::INFINITY;
    for step in 0..=steps {
        let mut magnitude = f64::NAN;
        for (idx, trace) in traces.iter().enumerate() {
            let state = &trace.states[step].1;
            debug_assert_eq!(trace.states[step].0, step as u64);
            let mag = state[res].abs();
            if idx == 0 {
                magnitude = mag;
            }
            max_dev = max_dev.max((mag - start_mag).abs());
            slab_hits += u64::from(mag <= config.slab_half_width);
        }
        let pooled = frequency(slab_hits, config.trials * (step as u64 + 1));
        let tv_lb = tv_lower_bound(&pooled, &stationary);
        min_tv = min_tv.min(tv_lb);
        rows.push(ResonanceRow {
            step: step as u64,
            magnitude,
            max_abs_dev: max_dev,
            tv_lb,
        });
    }
    let accepted: u64 = traces.iter().map(|t| t.accepted).sum();
    Ok(ResonanceOutcome {
        rows,
        j,
        lambda,
        max_deviation: max_dev,
        min_tv_lb: min_tv,
        constancy_ok: max_dev <= 1e-9 * tol_scale,
        acceptance_rate: accepted as f64 / (config.trials * config.steps.max(1)) as f64,
    })
}

/// Configuration of the warm-start mixing experiment.
#[derive(Debug, Clone, Copy)]
pub struct MixingConfig {
    pub d: usize,
    pub kernel: KernelSpec,
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
    /// Exact stationary draws for the TV reference batch.
    pub stationary_samples: u64,
}

/// One step of the mixing time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRow {
    pub step: u64,
    /// Total rejections across all trials up to and including this step.
    pub reject_count: u64,
    /// Mean `||x_t||^2` across trials.
    pub mean_norm_sq: f64,
    /// Fraction of trials inside the high-measure shell at this step.
    pub omega_large_freq: f64,
    /// TV lower bound at this step: shell frequency across trials vs the
    /// stationary batch.
    pub tv_lb: f64,
}

/// Result of the warm-start mixing experiment.
#[derive(Debug, Clone)]
pub struct MixingOutcome {
    pub rows: Vec<MixingRow>,
    /// Fraction of trials that never rejected *and* kept
    /// `||x_t|| <= 0.9 sqrt(d)` throughout.
    pub clean_trial_fraction: f64,
    /// TV lower bound at the final step.
    pub tv_lb_final: f64,
}

/// Runs the warm-start stall: chains on the standard Gaussian started from
/// the small ball `||x||^2 <= d/2`. At the step sizes of interest the
/// filter essentially never rejects, the norm drifts slowly, and the chain
/// stays far (in TV) from the stationary shell for the whole run.
pub fn mixing_run(config: &MixingConfig) -> Result<MixingOutcome> {
    if config.trials == 0 {
        return Err(Error::Domain("mixing run needs at least one trial".into()));
    }
    let target = Target::isotropic_gaussian(config.d, 1.0)?;
    let ball = WitnessSet::SmallBall { d: config.d };
    let shell = WitnessSet::OmegaLarge { d: config.d };

    struct TrialSeries {
        accept_flags: Vec<bool>,
        norm_sq: Vec<f64>,
        in_shell: Vec<bool>,
    }
    let series = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialSeries> {
            let mut init = Stream::new(StreamKey {
                seed: config.seed,
                trial,
                step: 0,
                kind: DrawKind::Init,
            });
            let x0 = sample_restricted_one(&target, &ball, &mut init)?;
            let shell_pred = |x: &[f64]| shell.member(x);
            let trace = run_chain(
                &config.kernel,
                &target,
                &x0,
                config.steps,
                config.seed,
                trial,
                RecordPolicy::default(),
                Some(&shell_pred),
            )?;
            Ok(TrialSeries {
                accept_flags: trace.accept_flags,
                norm_sq: trace.norm_sq,
                in_shell: trace.witness_series.expect("witness tracking enabled"),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let stationary = stationary_membership(
        &target,
        &shell,
        config.stationary_samples,
        config.seed ^ 0x91f,
    )?;

    let steps = config.steps as usize;
    let bound_sq = 0.81 * config.d as f64; // (0.9 sqrt d)^2
    let mut rows = Vec::with_capacity(steps + 1);
    let mut rejects = 0u64;
    for step in 0..=steps {
        if step > 0 {
            rejects += series
                .iter()
                .filter(|s| !s.accept_flags[step - 1])
                .count() as u64;
        }
        let mean_norm_sq =
            series.iter().map(|s| s.norm_sq[step]).sum::<f64>() / config.trials as f64;
        let shell_hits = series.iter().filter(|s| s.in_shell[step]).count() as u64;
        let freq = frequency(shell_hits, config.trials);
        rows.push(MixingRow {
            step: step as u64,
            reject_count: rejects,
            mean_norm_sq,
            omega_large_freq: freq.estimate,
            tv_lb: tv_lower_bound(&freq, &stationary),
        });
    }
    let clean = series
        .iter()
        .filter(|s| {
            s.accept_flags.iter().all(|&a| a) && s.norm_sq.iter().all(|&n| n <= bound_sq)
        })
        .count();
    Ok(MixingOutcome {
        clean_trial_fraction: clean as f64 / config.trials as f64,
        tv_lb_final: rows.last().expect("at least the start row").tv_lb,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonance_trap_small() {
        let config = ResonanceConfig {
            d: 3,
            kappa: 100.0,
            eta: 1.0,
            k: 2,
            steps: 300,
            trials: 4,
            seed: 9,
            start_magnitude: 2.0,
            slab_half_width: 1.0,
            lambda_perturb: 1.0,
            stationary_samples: 20_000,
        };
        let out = resonance_run(&config).unwrap();
        assert_eq!(out.j, 1);
        assert!(out.constancy_ok, "max deviation {}", out.max_deviation);
        assert_eq!(out.rows.len(), 301);
        assert!(out.rows[0].magnitude == 2.0);
    }

    #[test]
    fn resonance_perturbed_lambda_breaks_constancy() {
        // A moving variant: eta at the bottom of the admissible range keeps
        // the non-resonant coordinates leapfrog-stable, so steps actually
        // accept and the perturbed coordinate drifts.
        let kappa = 100.0f64;
        let k = 2;
        let eta =
            (std::f64::consts::PI * std::f64::consts::PI / (kappa * (k * k) as f64)).sqrt();
        let base = ResonanceConfig {
            d: 3,
            kappa,
            eta,
            k,
            steps: 3000,
            trials: 4,
            seed: 11,
            start_magnitude: 2.0,
            slab_half_width: 1.0,
            lambda_perturb: 1.0,
            stationary_samples: 10_000,
        };
        let exact = resonance_run(&base).unwrap();
        assert!(exact.constancy_ok);
        assert!(
            exact.acceptance_rate > 0.2,
            "moving variant should accept, got {}",
            exact.acceptance_rate
        );
        let perturbed = resonance_run(&ResonanceConfig {
            lambda_perturb: 1.001,
            ..base
        })
        .unwrap();
        assert!(
            !perturbed.constancy_ok,
            "perturbed trap still frozen: max dev {}",
            perturbed.max_deviation
        );
    }

    #[test]
    fn resonance_rejects_start_inside_slab() {
        let config = ResonanceConfig {
            d: 3,
            kappa: 100.0,
            eta: 1.0,
            k: 2,
            steps: 10,
            trials: 1,
            seed: 1,
            start_magnitude: 0.5,
            slab_half_width: 1.0,
            lambda_perturb: 1.0,
            stationary_samples: 100,
        };
        assert!(resonance_run(&config).is_err());
    }

    #[test]
    fn mixing_small_run_shape() {
        let config = MixingConfig {
            d: 50,
            kernel: KernelSpec::Mala { h: 1e-4 },
            steps: 50,
            trials: 8,
            seed: 21,
            stationary_samples: 5_000,
        };
        let out = mixing_run(&config).unwrap();
        assert_eq!(out.rows.len(), 51);
        assert_eq!(out.rows[0].reject_count, 0);
        // started in the small ball
        assert!(out.rows[0].mean_norm_sq <= 25.0 + 1e-9);
    }

    #[test]
    fn mixing_stall_also_holds_for_small_k_hmc() {
        // the multi-step analogue of the stall: eta^2 = ln(d)/(kappa d),
        // K = 2, rejections stay rare and the chain stays near the ball
        let (d, kappa) = (200usize, 50.0);
        let eta = ((d as f64).ln() / (kappa * d as f64)).sqrt();
        let config = MixingConfig {
            d,
            kernel: KernelSpec::Hmc { eta, k: 2 },
            steps: 300,
            trials: 20,
            seed: 71,
            stationary_samples: 10_000,
        };
        let out = mixing_run(&config).unwrap();
        assert!(
            out.clean_trial_fraction >= 0.9,
            "clean fraction {}",
            out.clean_trial_fraction
        );
        assert!(out.tv_lb_final >= 0.4, "tv_lb {}", out.tv_lb_final);
    }

    #[test]
    fn tv_bound_decays_for_a_mixing_chain() {
        // With a step size large enough to actually mix, the witness TV
        // bound falls from its warm-start value toward zero.
        let config = MixingConfig {
            d: 50,
            kernel: KernelSpec::Mala { h: 5e-3 },
            steps: 800,
            trials: 60,
            seed: 33,
            stationary_samples: 20_000,
        };
        let out = mixing_run(&config).unwrap();
        let early = out.rows[0].tv_lb;
        let late = out.rows.last().unwrap().tv_lb;
        assert!(early > 0.5, "warm start should be far: {early}");
        assert!(late < 0.5 * early, "no decay: {early} -> {late}");
    }

    #[test]
    fn mixing_zero_steps_single_row() {
        let config = MixingConfig {
            d: 20,
            kernel: KernelSpec::Mala { h: 1e-4 },
            steps: 0,
            trials: 3,
            seed: 5,
            stationary_samples: 1_000,
        };
        let out = mixing_run(&config).unwrap();
        assert_eq!(out.rows.len(), 1);
    }
}
