//! The exact-identity check suite behind `verify-identities`.
//!
//! Every closed form in [`crate::analysis`] and [`crate::chebyshev`] has an
//! independent route to the same number: a direct transition-density
//! evaluation, a simulated trajectory, a trigonometric evaluation, a
//! quadrature. This module runs each pair against the other over
//! fixed-seed fuzzed inputs and reports one row per check with the observed
//! maximum error; the identities are exact, so fuzzing is the cheapest
//! strong check.

use crate::analysis;
use crate::chebyshev;
use crate::kernels::leapfrog_trajectory;
use crate::rng::{DrawKind, Stream, StreamKey};
use crate::targets::{CoordinateSpec, Target};

/// Result of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub cases: u64,
    pub max_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: impl Into<String>, cases: u64, max_err: f64, tol: f64) -> Self {
        CheckRow {
            name: name.into(),
            cases,
            max_err,
            tol,
            pass: max_err <= tol,
        }
    }
}

/// Suite options.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Cap on the leapfrog step counts exercised by the polynomial rows.
    pub k_max: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { k_max: 64, seed: 7 }
    }
}

fn fuzz_stream(seed: u64, salt: u64) -> Stream {
    Stream::new(StreamKey {
        seed,
        trial: salt,
        step: 0,
        kind: DrawKind::Init,
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

/// Runs the full suite.
pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckRow> {
    run_suite_with_q(opts, chebyshev::eval_q)
}

/// Runs the suite with a caller-supplied `q` evaluator, so a deliberately
/// faulted evaluator can demonstrate that the corresponding row catches it.
pub fn run_suite_with_q(opts: &SuiteOptions, q_eval: fn(usize, f64) -> f64) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    rows.push(quadratic_accept_row(opts));
    rows.push(general_accept_row(opts));
    rows.push(remainder_row(opts));
    rows.push(telescoped_row(opts));
    rows.push(quadratic_delta_h_row(opts));
    rows.push(decomposition_row(opts));
    for k in [1usize, 2, 3, 4, 8, 16, 32] {
        if k <= opts.k_max {
            rows.push(leapfrog_closed_form_row(opts, k));
        }
    }
    for k in [1usize, 2, 4, 8, 16, 24, 32, 48, 64] {
        if k <= opts.k_max {
            rows.push(chebyshev_p_row(k));
            rows.push(chebyshev_q_row(k, q_eval));
        }
    }
    rows.push(coefficient_fit_row(opts));
    rows.push(position_polynomial_row(opts));
    rows.push(resonance_completeness_row(opts));
    rows.push(alpha_beta_bracket_row());
    rows.push(cos_moment_row());
    rows.push(sin_g_moment_row());
    rows.push(drift_coefficient_row(opts));
    rows
}

fn quadratic_accept_row(opts: &SuiteOptions) -> CheckRow {
    let target = Target::hard_quadratic(5, 23.0).expect("valid target");
    let eigen = target.eigenvalues().expect("quadratic");
    let mut s = fuzz_stream(opts.seed, 1);
    let cases = 1000;
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let x: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let y: Vec<f64> = (0..5).map(|_| 0.7 * s.gaussian()).collect();
        let h = 0.005 + 0.3 * s.uniform_open();
        let a = analysis::mala_log_accept_quadratic(&eigen, &x, &y, h);
        let b = analysis::mala_log_accept_general(&target, &x, &y, h);
        max_err = max_err.max(rel_err(a, b));
    }
    CheckRow::new("quadratic_accept_closed_form", cases, max_err, 1e-10)
}

fn general_accept_row(opts: &SuiteOptions) -> CheckRow {
    let targets = [
        Target::hard_quadratic(4, 11.0).expect("valid target"),
        Target::cosine_hard(4, 9.0, 0.03).expect("valid target"),
    ];
    let mut s = fuzz_stream(opts.seed, 2);
    let cases = 1000;
    let mut max_err = 0.0f64;
    for i in 0..cases {
        let target = &targets[(i % 2) as usize];
        let x: Vec<f64> = (0..4).map(|_| 0.7 * s.gaussian()).collect();
        let y: Vec<f64> = (0..4).map(|_| 0.7 * s.gaussian()).collect();
        let h = 0.005 + 0.3 * s.uniform_open();
        let a = analysis::mala_log_accept_general(target, &x, &y, h);
        let b = analysis::mala_log_accept_direct(target, &x, &y, h);
        max_err = max_err.max(rel_err(a, b));
    }
    CheckRow::new("general_accept_rearrangement", cases, max_err, 1e-10)
}

fn remainder_row(opts: &SuiteOptions) -> CheckRow {
    let coord = CoordinateSpec::Cosine {
        kappa: 12.0,
        h: 0.02,
    };
    let mut s = fuzz_stream(opts.seed, 3);
    let cases = 200;
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let x = 0.4 * s.gaussian();
        let x_g = x + 0.25 * s.gaussian();
        let h = 0.004 + 0.05 * s.uniform_open();
        let lhs = analysis::remainder_direct(&coord, x, x_g);
        match analysis::second_order_remainder(&coord, x, x_g, h) {
            Ok(rhs) => max_err = max_err.max(rel_err(lhs, rhs)),
            Err(_) => max_err = f64::INFINITY,
        }
    }
    CheckRow::new("second_order_remainder", cases, max_err, 1e-8)
}

fn telescoped_row(opts: &SuiteOptions) -> CheckRow {
    let targets = [
        Target::hard_quadratic(3, 15.0).expect("valid target"),
        Target::cosine_hard(3, 9.0, 0.04).expect("valid target"),
    ];
    let mut s = fuzz_stream(opts.seed, 4);
    let cases = 400;
    let mut max_err = 0.0f64;
    for i in 0..cases {
        let target = &targets[(i % 2) as usize];
        let x0: Vec<f64> = (0..3).map(|_| 0.5 * s.gaussian()).collect();
        let v0: Vec<f64> = (0..3).map(|_| s.gaussian()).collect();
        let eta = 0.03 + 0.12 * s.uniform_open();
        let k = 1 + (s.uniform_open() * 8.0) as usize;
        let traj = leapfrog_trajectory(target, &x0, &v0, eta, k);
        let direct = analysis::hamiltonian(target, &x0, &v0)
            - analysis::hamiltonian(target, &traj.positions[k], &traj.velocities[k]);
        let telescoped = analysis::hmc_telescoped_delta_h(target, &traj, eta);
        max_err = max_err.max(rel_err(direct, telescoped));
    }
    CheckRow::new("hamiltonian_telescope", cases, max_err, 1e-9)
}

fn quadratic_delta_h_row(opts: &SuiteOptions) -> CheckRow {
    let target = Target::hard_quadratic(4, 18.0).expect("valid target");
    let eigen = target.eigenvalues().expect("quadratic");
    let mut s = fuzz_stream(opts.seed, 5);
    let cases = 400;
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let x0: Vec<f64> = (0..4).map(|_| 0.5 * s.gaussian()).collect();
        let v0: Vec<f64> = (0..4).map(|_| s.gaussian()).collect();
        let eta = 0.03 + 0.1 * s.uniform_open();
        let k = 1 + (s.uniform_open() * 6.0) as usize;
        let traj = leapfrog_trajectory(&target, &x0, &v0, eta, k);
        let direct = analysis::hamiltonian(&target, &x0, &v0)
            - analysis::hamiltonian(&target, &traj.positions[k], &traj.velocities[k]);
        let closed = analysis::hmc_delta_h_quadratic(&eigen, &x0, &traj.positions[k], eta);
        max_err = max_err.max(rel_err(direct, closed));
    }
    CheckRow::new("quadratic_energy_closed_form", cases, max_err, 1e-9)
}

fn decomposition_row(opts: &SuiteOptions) -> CheckRow {
    let target = Target::cosine_hard(5, 12.0, 0.015).expect("valid target");
    let mut s = fuzz_stream(opts.seed, 6);
    let cases = 400;
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let x: Vec<f64> = (0..5).map(|_| 0.3 * s.gaussian()).collect();
        let g: Vec<f64> = (0..5).map(|_| s.gaussian()).collect();
        let h = 0.001 + 0.02 * s.uniform_open();
        let parts = analysis::accept_decomposition(&target, &x, &g, h);
        let sqrt2h = (2.0 * h).sqrt();
        let grad = target.gradient(&x);
        let y: Vec<f64> = (0..5)
            .map(|i| x[i] + sqrt2h * g[i] - h * grad[i])
            .collect();
        let oracle = analysis::mala_log_accept_general(&target, &x, &y, h);
        max_err = max_err.max(rel_err(parts.total, oracle));
    }
    CheckRow::new("accept_decomposition", cases, max_err, 1e-9)
}

fn leapfrog_closed_form_row(opts: &SuiteOptions, k: usize) -> CheckRow {
    let target = Target::cosine_hard(3, 6.0, 0.05).expect("valid target");
    let mut s = fuzz_stream(opts.seed, 100 + k as u64);
    let cases = 20;
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let x0: Vec<f64> = (0..3).map(|_| 0.4 * s.gaussian()).collect();
        let v0: Vec<f64> = (0..3).map(|_| s.gaussian()).collect();
        let eta = 0.02 + 0.06 * s.uniform_open();
        let traj = leapfrog_trajectory(&target, &x0, &v0, eta, k);
        let grads: Vec<Vec<f64>> = traj.positions.iter().map(|p| target.gradient(p)).collect();
        for step in 1..=k {
            for i in 0..3 {
                let mut expect = x0[i] + eta * step as f64 * v0[i]
                    - eta * eta * step as f64 / 2.0 * grads[0][i];
                for j in 1..step {
                    expect -= eta * eta * (step - j) as f64 * grads[j][i];
                }
                max_err = max_err.max(rel_err(traj.positions[step][i], expect));
            }
        }
    }
    CheckRow::new(format!("leapfrog_iterate_closed_form_K{k}"), cases, max_err, 1e-9)
}

fn chebyshev_p_row(k: usize) -> CheckRow {
    let mut max_err = 0.0f64;
    let cases = 1000;
    for i in 0..cases {
        let z = 6.0 * i as f64 / (cases - 1) as f64;
        let p = chebyshev::eval_p(k, z);
        let t = chebyshev::chebyshev_t(k, 1.0 - z / 2.0);
        max_err = max_err.max((p - t).abs() / 1.0_f64.max(t.abs()));
    }
    CheckRow::new(format!("chebyshev_p_K{k}"), cases as u64, max_err, 1e-8)
}

fn chebyshev_q_row(k: usize, q_eval: fn(usize, f64) -> f64) -> CheckRow {
    let mut max_err = 0.0f64;
    let cases = 1000;
    for i in 0..cases {
        let z = 6.0 * i as f64 / (cases - 1) as f64;
        let q = q_eval(k, z);
        let u = if k == 0 {
            0.0
        } else {
            chebyshev::chebyshev_u(k - 1, 1.0 - z / 2.0)
        };
        max_err = max_err.max((q - u).abs() / 1.0_f64.max(u.abs()));
    }
    CheckRow::new(format!("chebyshev_q_K{k}"), cases as u64, max_err, 1e-8)
}

/// Extracts the position polynomial's coefficients from simulated leapfrog
/// runs (degree-K interpolation through K+1 curvatures) and compares them to
/// the closed-form binomial coefficients.
fn coefficient_fit_row(opts: &SuiteOptions) -> CheckRow {
    let k_cap = opts.k_max.min(12);
    let mut max_err = 0.0f64;
    let mut cases = 0;
    for k in 1..=k_cap {
        let coeffs = chebyshev::leapfrog_coeffs(k).expect("valid K");
        // simulate p_K(z) at K+1 nodes with eta = 1 so z = lambda
        let nodes: Vec<f64> = (0..=k).map(|i| 0.2 + 3.8 * i as f64 / k as f64).collect();
        let values: Vec<f64> = nodes
            .iter()
            .map(|&z| {
                let target = Target::isotropic_gaussian(1, z).expect("valid lambda");
                leapfrog_trajectory(&target, &[1.0], &[0.0], 1.0, k).positions[k][0]
            })
            .collect();
        let fitted = newton_to_monomial(&nodes, &values);
        for (&fit, &exact) in fitted.iter().zip(&coeffs.d) {
            max_err = max_err.max((fit - exact).abs() / 1.0_f64.max(exact.abs()));
            cases += 1;
        }
    }
    CheckRow::new("coefficient_interpolation_fit", cases, max_err, 1e-8)
}

/// Divided-difference interpolation, expanded to monomial coefficients.
fn newton_to_monomial(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut dd = values.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
        }
    }
    // expand prod_{j<level} (z - x_j) incrementally
    let mut coeffs = vec![0.0; n];
    let mut basis = vec![0.0; n];
    basis[0] = 1.0;
    for (level, &c) in dd.iter().enumerate() {
        for (acc, b) in coeffs.iter_mut().zip(&basis) {
            *acc += c * b;
        }
        if level + 1 < n {
            // basis *= (z - nodes[level])
            for i in (1..=level + 1).rev() {
                basis[i] = basis[i - 1] - nodes[level] * basis[i];
            }
            basis[0] *= -nodes[level];
        }
    }
    coeffs
}

fn position_polynomial_row(opts: &SuiteOptions) -> CheckRow {
    let mut s = fuzz_stream(opts.seed, 7);
    let cases = 1000;
    let k_cap = opts.k_max.min(32);
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let lambda = 0.5 + 49.5 * s.uniform_open();
        let z = 5.0 * s.uniform_open();
        let eta = (z / lambda).sqrt();
        let k = 1 + (s.uniform_open() * k_cap as f64) as usize;
        let k = k.min(k_cap);
        let (x0, v0) = (3.0 * s.gaussian(), 3.0 * s.gaussian());
        let target = Target::isotropic_gaussian(1, lambda).expect("valid lambda");
        let sim = leapfrog_trajectory(&target, &[x0], &[v0], eta, k).positions[k][0];
        let closed = chebyshev::closed_form_hmc_map(lambda, eta, k, x0, v0);
        max_err = max_err.max(rel_err(sim, closed));
    }
    CheckRow::new("eq_xk_polynomial", cases, max_err, 1e-9)
}

fn resonance_completeness_row(opts: &SuiteOptions) -> CheckRow {
    let k_cap = opts.k_max.min(16);
    let mut max_err = 0.0f64;
    let mut cases = 0;
    for k in 2..=k_cap {
        for j in 1..k {
            let z = 2.0 * (1.0 - (j as f64 * std::f64::consts::PI / k as f64).cos());
            max_err = max_err.max((chebyshev::eval_p(k, z).abs() - 1.0).abs());
            max_err = max_err.max(chebyshev::eval_q(k, z).abs());
            cases += 1;
        }
    }
    CheckRow::new("resonance_completeness", cases, max_err, 1e-9)
}

fn alpha_beta_bracket_row() -> CheckRow {
    let mut max_err = 0.0f64;
    let mut cases = 0;
    for k in [1usize, 2, 3, 5, 8, 13] {
        for exp in 1..=6 {
            let h = 10.0f64.powi(-(exp + 2));
            for lambda in [1.0, 3.0, 10.0, 100.0] {
                if 2.0 * h * lambda * (k * k) as f64 > 1.0 {
                    continue;
                }
                let c = chebyshev::hmc_alpha_beta(h, lambda, k);
                let alpha_ratio = c.alpha / (h * lambda * (k * k) as f64);
                let beta_ratio = c.beta / ((2.0 * h).sqrt() * k as f64);
                for r in [alpha_ratio, beta_ratio] {
                    max_err = max_err.max((0.8 - r).max(0.0)).max((r - 1.0).max(0.0));
                }
                cases += 1;
            }
        }
    }
    CheckRow::new("step_coefficient_bracket", cases, max_err, 1e-9)
}

/// Orthonormal Hermite polynomials (weight `exp(-x^2)`) evaluated at `x`.
fn hermite_row(n: usize, x: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    row.push(std::f64::consts::PI.powf(-0.25));
    if n >= 1 {
        row.push(std::f64::consts::SQRT_2 * x * row[0]);
    }
    for k in 1..n {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * row[k]
            - (k as f64 / (k as f64 + 1.0)).sqrt() * row[k - 1];
        row.push(next);
    }
    row
}

/// Gauss-Hermite nodes and weights for weight `exp(-x^2)`: roots by
/// interlaced bisection up the recurrence, weights from the Christoffel
/// function. Test oracle quality, not speed.
pub(crate) fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut roots: Vec<f64> = vec![];
    for k in 1..=n {
        let bound = (2.0 * k as f64 + 1.0).sqrt();
        let mut brackets = Vec::with_capacity(k + 1);
        brackets.push(-bound);
        brackets.extend(roots.iter().copied());
        brackets.push(bound);
        let mut new_roots = Vec::with_capacity(k);
        for w in brackets.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let f_lo = hermite_row(k, lo)[k];
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let f_mid = hermite_row(k, mid)[k];
                if (f_lo < 0.0) == (f_mid < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            new_roots.push(0.5 * (lo + hi));
        }
        roots = new_roots;
    }
    let weights = roots
        .iter()
        .map(|&x| {
            let row = hermite_row(n - 1, x);
            1.0 / row.iter().map(|p| p * p).sum::<f64>()
        })
        .collect();
    (roots, weights)
}

fn hermite_expectation(f: impl Fn(f64) -> f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(std::f64::consts::SQRT_2 * x);
    }
    acc / std::f64::consts::PI.sqrt()
}

fn cos_moment_row() -> CheckRow {
    let (nodes, weights) = gauss_hermite(64);
    let mut max_err = 0.0f64;
    let cases = 41;
    for i in 0..cases {
        let a = -6.0 + 12.0 * i as f64 / (cases - 1) as f64;
        let quad = hermite_expectation(
            |g| (a + std::f64::consts::SQRT_2 * g).cos(),
            &nodes,
            &weights,
        );
        max_err = max_err.max((quad - analysis::gaussian_cos_moment(a)).abs());
    }
    CheckRow::new("gaussian_cos_moment", cases as u64, max_err, 1e-12)
}

fn sin_g_moment_row() -> CheckRow {
    let (nodes, weights) = gauss_hermite(64);
    let mut max_err = 0.0f64;
    let cases = 41;
    for i in 0..cases {
        let a = -6.0 + 12.0 * i as f64 / (cases - 1) as f64;
        let quad = hermite_expectation(
            |g| g * (a + std::f64::consts::SQRT_2 * g).sin(),
            &nodes,
            &weights,
        );
        max_err = max_err.max((quad - analysis::gaussian_sin_g_moment(a)).abs());
    }
    CheckRow::new("gaussian_sin_g_moment", cases as u64, max_err, 1e-12)
}

fn drift_coefficient_row(opts: &SuiteOptions) -> CheckRow {
    let c1_err = (analysis::hmc_cosine_drift_coeff(1) - (1.0 - 2.0 / std::f64::consts::E)).abs();
    let mut min_c = f64::INFINITY;
    let k_cap = opts.k_max.max(1);
    for k in 1..=k_cap {
        min_c = min_c.min(analysis::hmc_cosine_drift_coeff(k));
    }
    // error is c1 mismatch plus any budget violation
    let budget_err = (0.129 - min_c).max(0.0);
    CheckRow::new(
        "hmc_drift_coefficient",
        k_cap as u64,
        c1_err.max(budget_err),
        1e-12,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes() {
        let rows = run_suite(&SuiteOptions::default());
        assert!(rows.len() >= 35, "expected a full table, got {}", rows.len());
        for row in &rows {
            assert!(
                row.pass,
                "{} failed: max err {} > tol {}",
                row.name, row.max_err, row.tol
            );
        }
    }

    #[test]
    fn k_max_prunes_polynomial_rows() {
        let rows = run_suite(&SuiteOptions { k_max: 8, seed: 7 });
        assert!(rows.iter().all(|r| !r.name.contains("K16")));
        assert!(rows.iter().any(|r| r.name == "chebyshev_p_K8"));
    }

    #[test]
    fn injected_q_fault_is_caught_by_name() {
        fn flipped(k: usize, z: f64) -> f64 {
            -chebyshev::eval_q(k, z)
        }
        let rows = run_suite_with_q(&SuiteOptions::default(), flipped);
        let failing: Vec<&CheckRow> = rows.iter().filter(|r| !r.pass).collect();
        assert!(!failing.is_empty());
        assert!(
            failing.iter().all(|r| r.name.starts_with("chebyshev_q")),
            "unexpected failures: {:?}",
            failing.iter().map(|r| &r.name).collect::<Vec<_>>()
        );
    }

    #[test]
    fn newton_interpolation_recovers_polynomial() {
        // p(z) = 2 - 3z + 0.5 z^3
        let nodes = [0.1, 0.9, 1.7, 2.5];
        let values: Vec<f64> = nodes.iter().map(|&z| 2.0 - 3.0 * z + 0.5 * z * z * z).collect();
        let coeffs = newton_to_monomial(&nodes, &values);
        let expect = [2.0, -3.0, 0.0, 0.5];
        for (a, b) in coeffs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
