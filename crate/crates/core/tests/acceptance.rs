//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its headline numbers and enforcing its runtime budget. Tolerances and
//! thresholds are pinned in code; run with `--nocapture` to see the table.

use std::time::Instant;

use slowmix::analysis;
use slowmix::chebyshev;
use slowmix::estimators::{
    acceptance_scan, dirichlet_gap_estimate, sample_restricted_one, ScanPoint, WitnessSet,
};
use slowmix::experiments::{mixing_run, resonance_run, MixingConfig, ResonanceConfig};
use slowmix::kernels::{leapfrog_trajectory, mala_step, KernelSpec};
use slowmix::rng::{DrawKind, StepRng, Stream, StreamKey};
use slowmix::targets::{CoordinateSpec, Target};

fn stream(seed: u64, trial: u64, kind: DrawKind) -> Stream {
    Stream::new(StreamKey {
        seed,
        trial,
        step: 0,
        kind,
    })
}

fn report(id: u32, name: &str, detail: &str, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion {id:2} ({name}): PASS [{detail}; {elapsed:.2}s / {budget_s}s budget]");
    assert!(
        elapsed < budget_s,
        "criterion {id} exceeded its {budget_s}s runtime budget: {elapsed:.2}s"
    );
}

#[test]
fn criterion_01_chebyshev_identity_suite() {
    let started = Instant::now();
    let mut max_p = 0.0f64;
    let mut max_q = 0.0f64;
    for k in 1..=64usize {
        for i in 0..1000 {
            let z = 6.0 * i as f64 / 999.0;
            let w = 1.0 - z / 2.0;
            let t = chebyshev::chebyshev_t(k, w);
            let u = chebyshev::chebyshev_u(k - 1, w);
            max_p = max_p.max((chebyshev::eval_p(k, z) - t).abs() / 1.0_f64.max(t.abs()));
            max_q = max_q.max((chebyshev::eval_q(k, z) - u).abs() / 1.0_f64.max(u.abs()));
        }
    }
    assert!(max_p <= 1e-8, "p vs T relative error {max_p}");
    assert!(max_q <= 1e-8, "q vs U relative error {max_q}");
    report(
        1,
        "chebyshev identities",
        &format!("max rel err p {max_p:.2e}, q {max_q:.2e}"),
        started,
        5.0,
    );
}

#[test]
fn criterion_02_leapfrog_polynomial_equivalence() {
    let started = Instant::now();
    let mut s = stream(101, 0, DrawKind::Init);
    let mut max_err = 0.0f64;
    for _ in 0..1000 {
        let lambda = 0.5 + 49.5 * s.uniform_open();
        let z = 5.0 * s.uniform_open();
        let eta = (z / lambda).sqrt();
        let k = 1 + (s.uniform_open() * 32.0) as usize;
        let k = k.min(32);
        let (x0, v0) = (3.0 * s.gaussian(), 3.0 * s.gaussian());
        let target = Target::isotropic_gaussian(1, lambda).unwrap();
        let sim = leapfrog_trajectory(&target, &[x0], &[v0], eta, k).positions[k][0];
        let closed = chebyshev::closed_form_hmc_map(lambda, eta, k, x0, v0);
        max_err = max_err.max((sim - closed).abs() / 1.0_f64.max(sim.abs()).max(closed.abs()));
    }
    assert!(max_err <= 1e-9, "simulated vs polynomial x_K: {max_err}");
    report(
        2,
        "leapfrog polynomial closed form",
        &format!("1000 cases, max rel err {max_err:.2e}"),
        started,
        5.0,
    );
}

#[test]
fn criterion_03_acceptance_identity_suite() {
    let started = Instant::now();
    let quad = Target::hard_quadratic(5, 19.0).unwrap();
    let eigen = quad.eigenvalues().unwrap();
    let cosine = Target::cosine_hard(5, 9.0, 0.03).unwrap();
    let mut s = stream(103, 0, DrawKind::Init);

    // Quadratic acceptance closed form vs the general identity.
    let mut err_quad = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let y: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let h = 0.005 + 0.3 * s.uniform_open();
        let a = analysis::mala_log_accept_quadratic(&eigen, &x, &y, h);
        let b = analysis::mala_log_accept_general(&quad, &x, &y, h);
        err_quad = err_quad.max((a - b).abs() / 1.0_f64.max(a.abs()));
    }
    assert!(err_quad <= 1e-9, "quadratic accept identity: {err_quad}");

    // Rearranged vs direct transition-density ratio, cosine targets too.
    let mut err_general = 0.0f64;
    for i in 0..1000 {
        let t: &Target = if i % 2 == 0 { &quad } else { &cosine };
        let x: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let y: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let h = 0.005 + 0.3 * s.uniform_open();
        let a = analysis::mala_log_accept_general(t, &x, &y, h);
        let b = analysis::mala_log_accept_direct(t, &x, &y, h);
        err_general = err_general.max((a - b).abs() / 1.0_f64.max(a.abs()));
    }
    assert!(err_general <= 1e-9, "general accept identity: {err_general}");

    // Telescoped Hamiltonian change vs direct, cosine included.
    let mut err_telescope = 0.0f64;
    for i in 0..1000 {
        let t: &Target = if i % 2 == 0 { &quad } else { &cosine };
        let x0: Vec<f64> = (0..5).map(|_| 0.5 * s.gaussian()).collect();
        let v0: Vec<f64> = (0..5).map(|_| s.gaussian()).collect();
        let eta = 0.02 + 0.1 * s.uniform_open();
        let k = 1 + (s.uniform_open() * 8.0) as usize;
        let traj = leapfrog_trajectory(t, &x0, &v0, eta, k);
        let direct = analysis::hamiltonian(t, &x0, &v0)
            - analysis::hamiltonian(t, &traj.positions[k], &traj.velocities[k]);
        let tele = analysis::hmc_telescoped_delta_h(t, &traj, eta);
        err_telescope = err_telescope.max((direct - tele).abs() / 1.0_f64.max(direct.abs()));
    }
    assert!(err_telescope <= 1e-9, "telescoped energy identity: {err_telescope}");

    // Gradient-norm energy closed form on quadratics.
    let mut err_energy = 0.0f64;
    for _ in 0..1000 {
        let x0: Vec<f64> = (0..5).map(|_| 0.5 * s.gaussian()).collect();
        let v0: Vec<f64> = (0..5).map(|_| s.gaussian()).collect();
        let eta = 0.02 + 0.1 * s.uniform_open();
        let k = 1 + (s.uniform_open() * 8.0) as usize;
        let traj = leapfrog_trajectory(&quad, &x0, &v0, eta, k);
        let direct = analysis::hamiltonian(&quad, &x0, &v0)
            - analysis::hamiltonian(&quad, &traj.positions[k], &traj.velocities[k]);
        let closed = analysis::hmc_delta_h_quadratic(&eigen, &x0, &traj.positions[k], eta);
        err_energy = err_energy.max((direct - closed).abs() / 1.0_f64.max(direct.abs()));
    }
    assert!(err_energy <= 1e-9, "quadratic energy identity: {err_energy}");

    report(
        3,
        "acceptance identities",
        &format!(
            "max rel err quad {err_quad:.1e}, general {err_general:.1e}, telescope {err_telescope:.1e}, energy {err_energy:.1e}"
        ),
        started,
        10.0,
    );
}

#[test]
fn criterion_04_resonance_trap() {
    let started = Instant::now();
    let config = ResonanceConfig {
        d: 3,
        kappa: 100.0,
        eta: 1.0,
        k: 2,
        steps: 10_000,
        trials: 20,
        seed: 104,
        start_magnitude: 2.0,
        slab_half_width: 1.0,
        lambda_perturb: 1.0,
        stationary_samples: 100_000,
    };
    let out = resonance_run(&config).unwrap();
    assert!((out.lambda - 2.0).abs() < 1e-12, "resonant eigenvalue {}", out.lambda);
    assert!(
        out.constancy_ok,
        "resonant coordinate moved by {}",
        out.max_deviation
    );
    assert!(
        out.min_tv_lb >= 0.3,
        "slab-witness TV bound dipped to {}",
        out.min_tv_lb
    );
    report(
        4,
        "resonance trap",
        &format!(
            "max |x_res| deviation {:.2e}, min tv_lb {:.3}",
            out.max_deviation, out.min_tv_lb
        ),
        started,
        10.0,
    );
}

#[test]
fn criterion_05_gaussian_bad_set_collapse() {
    let started = Instant::now();
    let (d, kappa) = (200usize, 50.0);
    let h = 4.0 * (d as f64).ln().sqrt() / (kappa * (d as f64).sqrt());
    let target = Target::hard_quadratic(d, kappa).unwrap();
    let set = WitnessSet::GaussianBad { d, kappa };
    let points: Vec<ScanPoint> = [h / 4.0, h / 2.0, h]
        .iter()
        .map(|&step| ScanPoint {
            label: format!("hq-mala-h{step:.5}"),
            kernel: KernelSpec::Mala { h: step },
            target: target.clone(),
            start: set,
        })
        .collect();
    let rows = acceptance_scan(&points, 10_000, 105).unwrap();
    assert!(
        rows[0].mean_log_accept > rows[1].mean_log_accept
            && rows[1].mean_log_accept > rows[2].mean_log_accept,
        "mean log-acceptance not monotone in h: {:?}",
        rows.iter().map(|r| r.mean_log_accept).collect::<Vec<_>>()
    );
    let at_h = &rows[2];
    assert!(
        at_h.mean_log_accept <= -10.0,
        "mean log-acceptance {} above -10",
        at_h.mean_log_accept
    );
    assert!(
        at_h.accept_rate <= 1e-3,
        "acceptance frequency {} above 1e-3",
        at_h.accept_rate
    );
    report(
        5,
        "gaussian bad-set collapse",
        &format!(
            "mean log-accept {:.1} at h={h:.4}, accept rate {:.1e}, monotone over h/4, h/2, h",
            at_h.mean_log_accept, at_h.accept_rate
        ),
        started,
        30.0,
    );
}

#[test]
fn criterion_06_cosine_drift_expectation() {
    let started = Instant::now();
    // (kappa, h, phase): x = phase * sqrt(h)
    let points: [(f64, f64, f64); 10] = [
        (3.0, 1.0, 0.0),
        (3.0, 0.01, 0.25),
        (10.0, 0.01, 0.0),
        (10.0, 1e-3, 1.0),
        (10.0, 1e-4, std::f64::consts::FRAC_PI_2),
        (100.0, 1e-4, 0.2),
        (100.0, 1e-5, std::f64::consts::PI),
        (100.0, 7e-4, 2.5),
        (30.0, 5e-3, 0.1),
        (50.0, 2e-4, 0.5),
    ];
    let n = 10_000_000u64;
    let mut details = String::new();
    for (idx, &(kappa, h, phase)) in points.iter().enumerate() {
        let x = phase * h.sqrt();
        let coord = CoordinateSpec::Cosine { kappa, h };
        let analytic = analysis::cosine_drift_expectation(kappa, h, x);
        let mut s = stream(106, idx as u64, DrawKind::Noise);
        let sqrt2h = (2.0 * h).sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let g = s.gaussian();
            let v = analysis::coordinate_log_accept_term(&coord, x, x + sqrt2h * g);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!(
            (mean - analytic).abs() <= 4.0 * se,
            "point {idx} (kappa={kappa}, h={h}, phase={phase}): \
             empirical {mean:.6e} vs analytic {analytic:.6e}, se {se:.2e}"
        );
        if phase.cos() >= 0.95 {
            assert!(
                analytic.abs() >= 0.08 * h * kappa,
                "point {idx}: analytic coefficient {:.4} h kappa below 0.08",
                analytic.abs() / (h * kappa)
            );
        }
        details.push_str(&format!("{:.1}se ", (mean - analytic).abs() / se));
    }
    report(
        6,
        "cosine drift expectation",
        &format!("10 points x 1e7 draws, |deviation| = {}", details.trim_end()),
        started,
        60.0,
    );
}

#[test]
fn criterion_07_cosine_collapse_at_scale() {
    let started = Instant::now();
    let (d, kappa, h) = (100_000usize, 100.0, 7e-4);
    // the step regime of the cosine construction
    let lo = (d as f64).ln() / (kappa * d as f64);
    let hi = 1.0 / (kappa * (d as f64).ln());
    assert!(h > lo && h < hi, "step size off regime: {lo} < {h} < {hi}");
    let target = Target::cosine_hard(d, kappa, h).unwrap();
    let set = WitnessSet::OmegaHard { d, kappa, h };
    let trials = 200u64;
    let mut sum = 0.0;
    for trial in 0..trials {
        let mut init = stream(107, trial, DrawKind::Init);
        let start = sample_restricted_one(&target, &set, &mut init).unwrap();
        let mut rng = StepRng::new(107, trial, 1);
        let record = mala_step(&target, &start, h, &mut rng).unwrap();
        sum += record.log_accept;
    }
    let mean = sum / trials as f64;
    let threshold = -0.04 * h * kappa * d as f64;
    assert!(
        mean <= threshold,
        "mean log-acceptance {mean:.1} above {threshold:.1}"
    );
    report(
        7,
        "cosine collapse at scale",
        &format!("mean log-accept {mean:.0} <= {threshold:.0} over {trials} proposals at d=1e5"),
        started,
        120.0,
    );
}

#[test]
fn criterion_08_warm_start_mixing_stall() {
    let started = Instant::now();
    let (d, kappa) = (1000usize, 100.0);
    let h = 0.5 * (d as f64).ln() / (kappa * d as f64);
    let out = mixing_run(&MixingConfig {
        d,
        kernel: KernelSpec::Mala { h },
        steps: 2000,
        trials: 100,
        seed: 108,
        stationary_samples: 20_000,
    })
    .unwrap();
    assert!(
        out.clean_trial_fraction >= 0.95,
        "only {}% of trials were rejection-free with ||x|| <= 0.9 sqrt(d)",
        100.0 * out.clean_trial_fraction
    );
    assert!(
        out.tv_lb_final >= 0.4,
        "TV lower bound at T=2000 was {}",
        out.tv_lb_final
    );
    report(
        8,
        "warm-start mixing stall",
        &format!(
            "clean trials {:.0}%, tv_lb(T=2000) = {:.3}",
            100.0 * out.clean_trial_fraction,
            out.tv_lb_final
        ),
        started,
        60.0,
    );
}

#[test]
fn criterion_09_spectral_gap_witness_bounds() {
    let started = Instant::now();
    let (d, kappa) = (10usize, 10.0);
    let target = Target::hard_quadratic(d, kappa).unwrap();
    let n = 100_000u64;
    let mut details = String::new();

    for &h in &[1e-4, 1e-3, 1e-2] {
        let est = dirichlet_gap_estimate(&KernelSpec::Mala { h }, &target, n, 109).unwrap();
        let bound = 10.0 * (h + h * h);
        assert!(
            est.ratio <= bound + 4.0 * est.ratio_se,
            "MALA h={h}: gap ratio {} above 10(h + h^2) = {bound}",
            est.ratio
        );
        details.push_str(&format!("mala h={h:.0e}: {:.2e}<={bound:.1e} ", est.ratio));
    }

    for &(h, k) in &[(1e-3, 2usize), (1e-4, 4)] {
        assert!(2.0 * h * kappa * (k * k) as f64 <= 1.0);
        let eta = (2.0 * h).sqrt();
        let est = dirichlet_gap_estimate(&KernelSpec::Hmc { eta, k }, &target, n, 110).unwrap();
        let kk = (k * k) as f64;
        let bound = 10.0 * (h * kk + h * h * kk * kk);
        assert!(
            est.ratio <= bound + 4.0 * est.ratio_se,
            "HMC h={h} K={k}: gap ratio {} above 10(hK^2 + h^2K^4) = {bound}",
            est.ratio
        );
        details.push_str(&format!("hmc h={h:.0e},K={k}: {:.2e}<={bound:.1e} ", est.ratio));
    }
    report(
        9,
        "spectral gap witness bounds",
        details.trim_end(),
        started,
        60.0,
    );
}

#[test]
fn criterion_10_drift_coefficient_budget() {
    let started = Instant::now();
    let c1 = analysis::hmc_cosine_drift_coeff(1);
    assert!(
        (c1 - (1.0 - 2.0 / std::f64::consts::E)).abs() <= 1e-12,
        "c_1 = {c1}"
    );
    let mut min_c = f64::INFINITY;
    for k in 1..=64 {
        min_c = min_c.min(analysis::hmc_cosine_drift_coeff(k));
    }
    assert!(min_c >= 0.129, "min c_K = {min_c} below 0.129");
    report(
        10,
        "multi-step drift coefficient",
        &format!("c_1 = {c1:.12}, min c_K over K<=64 = {min_c:.6}"),
        started,
        1.0,
    );
}
