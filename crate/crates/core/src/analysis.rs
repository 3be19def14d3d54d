//! Closed-form acceptance identities and drift expectations.
//!
//! The kernels compute log acceptance ratios directly from transition
//! densities; this module carries the algebraically rearranged forms the
//! analysis rests on, so each can be cross-checked against the other:
//!
//! * the general MALA ratio as potential differences plus a symmetrized
//!   gradient coupling and a gradient-norm correction;
//! * its quadratic specialization `(h/4)(||x||_{A^2}^2 - ||y||_{A^2}^2)`;
//! * the exact noise expectation of the quadratic ratio in terms of step
//!   coefficients `(alpha, beta)`;
//! * the telescoped Hamiltonian change of a leapfrog trajectory, whose
//!   bracketed terms vanish termwise on quadratics;
//! * the second-order integral remainder behind the cosine construction,
//!   with an adaptive-quadrature evaluator;
//! * Gaussian trigonometric moments and the per-coordinate drift
//!   expectations they produce, including the multi-step coefficient "c_K"
//!   of the small-K drift bound.
//!
//! Every function here is deterministic; the randomized checks live in the
//! identity suite and the tests.

use crate::kernels::Trajectory;
use crate::targets::{CoordinateSpec, Target};
use crate::{Error, Result};

/// `E` as in `exp(1)`.
const E: f64 = std::f64::consts::E;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// The MALA log acceptance ratio evaluated straight from the proposal
/// densities: `f(x) - f(y) + (||y - (x - h grad f(x))||^2
/// - ||x - (y - h grad f(y))||^2) / (4h)`.
pub fn mala_log_accept_direct(target: &Target, x: &[f64], y: &[f64], h: f64) -> f64 {
    let gx = target.gradient(x);
    let gy = target.gradient(y);
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for i in 0..x.len() {
        let fwd = y[i] - (x[i] - h * gx[i]);
        let rev = x[i] - (y[i] - h * gy[i]);
        forward += fwd * fwd;
        reverse += rev * rev;
    }
    target.potential(x) - target.potential(y) + (forward - reverse) / (4.0 * h)
}

/// The same ratio rearranged: `-f(y) + f(x) - (1/2) <x - y, grad f(x) +
/// grad f(y)> + (h/4)(||grad f(x)||^2 - ||grad f(y)||^2)`.
pub fn mala_log_accept_general(target: &Target, x: &[f64], y: &[f64], h: f64) -> f64 {
    let gx = target.gradient(x);
    let gy = target.gradient(y);
    let mut coupling = 0.0;
    for i in 0..x.len() {
        coupling += (x[i] - y[i]) * (gx[i] + gy[i]);
    }
    target.potential(x) - target.potential(y) - 0.5 * coupling
        + h / 4.0 * (norm_sq(&gx) - norm_sq(&gy))
}

/// Quadratic specialization: for `f(x) = (1/2) x^T A x` with `A =
/// diag(lambdas)`, the ratio collapses to `(h/4) sum_i lambda_i^2 (x_i^2 -
/// y_i^2)`.
pub fn mala_log_accept_quadratic(lambdas: &[f64], x: &[f64], y: &[f64], h: f64) -> f64 {
    debug_assert_eq!(lambdas.len(), x.len());
    h / 4.0
        * lambdas
            .iter()
            .zip(x.iter().zip(y))
            .map(|(&l, (&xi, &yi))| l * l * (xi * xi - yi * yi))
            .sum::<f64>()
}

/// MALA's step coefficients along an eigenvalue: `alpha = h lambda`,
/// `beta = sqrt(2h)`.
pub fn mala_step_coefficients(h: f64, lambda: f64) -> crate::chebyshev::StepCoefficients {
    crate::chebyshev::StepCoefficients {
        alpha: h * lambda,
        beta: (2.0 * h).sqrt(),
    }
}

/// Exact noise expectation of the quadratic log acceptance ratio from a
/// fixed `x`, for proposals `y_i = (1 - alpha_i) x_i + beta_i g_i`:
/// `sum_i (h/4) lambda_i^2 ((2 alpha_i - alpha_i^2) x_i^2 - beta_i^2)`.
pub fn expected_quadratic_log_accept(
    lambdas: &[f64],
    x: &[f64],
    coeffs: &[crate::chebyshev::StepCoefficients],
    h: f64,
) -> f64 {
    debug_assert_eq!(lambdas.len(), x.len());
    debug_assert_eq!(lambdas.len(), coeffs.len());
    let mut total = 0.0;
    for i in 0..lambdas.len() {
        let l2 = lambdas[i] * lambdas[i];
        let a = coeffs[i].alpha;
        let b = coeffs[i].beta;
        total += h / 4.0 * l2 * ((2.0 * a - a * a) * x[i] * x[i] - b * b);
    }
    total
}

/// Hamiltonian `f(x) + ||v||^2 / 2`.
pub fn hamiltonian(target: &Target, x: &[f64], v: &[f64]) -> f64 {
    target.potential(x) + 0.5 * norm_sq(v)
}

/// Hamiltonian change of `K` leapfrog steps on a quadratic, in closed form:
/// `(eta^2/8)(||grad f(x0)||^2 - ||grad f(xK)||^2)
/// = (eta^2/8) sum_i lambda_i^2 (x0_i^2 - xK_i^2)`.
pub fn hmc_delta_h_quadratic(lambdas: &[f64], x0: &[f64], xk: &[f64], eta: f64) -> f64 {
    eta * eta / 8.0
        * lambdas
            .iter()
            .zip(x0.iter().zip(xk))
            .map(|(&l, (&a, &b))| l * l * (a * a - b * b))
            .sum::<f64>()
}

/// Hamiltonian change of a leapfrog trajectory via the telescoped identity:
///
/// ```text
/// H(x0,v0) - H(xK,vK)
///   = sum_k [ f(x_k) - f(x_{k+1})
///             + (1/2) <grad f(x_k) + grad f(x_{k+1}), x_{k+1} - x_k> ]
///   + (eta^2/8) (||grad f(x0)||^2 - ||grad f(xK)||^2)
/// ```
///
/// valid for any (not necessarily quadratic) target; on quadratics the
/// bracketed terms vanish one by one.
pub fn hmc_telescoped_delta_h(target: &Target, trajectory: &Trajectory, eta: f64) -> f64 {
    let k = trajectory.positions.len() - 1;
    let grads: Vec<Vec<f64>> = trajectory
        .positions
        .iter()
        .map(|p| target.gradient(p))
        .collect();
    let mut total = 0.0;
    for step in 0..k {
        let (xa, xb) = (&trajectory.positions[step], &trajectory.positions[step + 1]);
        let (ga, gb) = (&grads[step], &grads[step + 1]);
        let mut coupling = 0.0;
        for i in 0..xa.len() {
            coupling += (ga[i] + gb[i]) * (xb[i] - xa[i]);
        }
        total += target.potential(xa) - target.potential(xb) + 0.5 * coupling;
    }
    total + eta * eta / 8.0 * (norm_sq(&grads[0]) - norm_sq(&grads[k]))
}

/// Adaptive Simpson quadrature; the integrands here are smooth mixes of
/// trigonometric and quadratic pieces.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    const MAX_DEPTH: usize = 20;
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        abs_tol: f64,
        rel_tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let err = left + right - whole;
        if err.abs() <= 15.0 * (abs_tol + rel_tol * (left + right).abs()) {
            return Ok(left + right + err / 15.0);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::Quadrature { levels: MAX_DEPTH });
        }
        let l = recurse(f, a, m, fa, flm, fm, left, abs_tol / 2.0, rel_tol, depth + 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, abs_tol / 2.0, rel_tol, depth + 1)?;
        Ok(l + r)
    }
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(&f, a, b, fa, fm, fb, whole, abs_tol, rel_tol, 0)
}

/// Left-hand side of the second-order remainder identity for a scalar
/// potential: `-f(x_g) + f(x) - (1/2)(x - x_g)(f'(x) + f'(x_g))`.
pub fn remainder_direct(coord: &CoordinateSpec, x: f64, x_g: f64) -> f64 {
    -coord.value(x_g) + coord.value(x) - 0.5 * (x - x_g) * (coord.deriv(x) + coord.deriv(x_g))
}

/// The same quantity as the weighted curvature integral
/// `-2h * integral_0^1 (1/2 - s) g^2 f''(x + s (x_g - x)) ds` with
/// `g^2 = (x_g - x)^2 / (2h)`, evaluated by adaptive quadrature.
pub fn second_order_remainder(coord: &CoordinateSpec, x: f64, x_g: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    if x == x_g {
        return Ok(0.0);
    }
    let g_sq = (x_g - x) * (x_g - x) / (2.0 * h);
    let integral = adaptive_simpson(
        |s| (0.5 - s) * coord.second_deriv(x + s * (x_g - x)),
        0.0,
        1.0,
        1e-12,
        1e-10,
    )?;
    Ok(-2.0 * h * g_sq * integral)
}

/// `E[cos(a + sqrt(2) g)] = cos(a) / e` for standard normal `g`.
pub fn gaussian_cos_moment(a: f64) -> f64 {
    a.cos() / E
}

/// `E[g sin(a + sqrt(2) g)] = sqrt(2) cos(a) / e` for standard normal `g`.
pub fn gaussian_sin_g_moment(a: f64) -> f64 {
    std::f64::consts::SQRT_2 * a.cos() / E
}

/// Per-coordinate log-acceptance contribution of one coordinate: the value
/// of the remainder at `(x_i, [x_g]_i)`, the "S" variable of the drift
/// analysis.
pub fn coordinate_log_accept_term(coord: &CoordinateSpec, x: f64, x_g: f64) -> f64 {
    remainder_direct(coord, x, x_g)
}

/// Exact expectation of the cosine coordinate's S variable over the noise,
/// when the MALA step size equals the coordinate's period parameter:
/// `(kappa h / 3)(2/e - 1) cos(x / sqrt(h))`, about `-0.088 h kappa` times
/// the cosine.
pub fn cosine_drift_expectation(kappa: f64, h: f64, x: f64) -> f64 {
    kappa * h / 3.0 * (2.0 / E - 1.0) * (x / h.sqrt()).cos()
}

/// The same expectation with the step size `h_step` decoupled from the
/// coordinate's period parameter `h_coord`:
/// `(kappa/3) cos(x / sqrt(h_coord)) [h_coord (e^{-r} - 1) + h_step e^{-r}]`
/// with `r = h_step / h_coord`. Reduces to [`cosine_drift_expectation`] at
/// `h_step = h_coord`.
pub fn cosine_drift_expectation_with_step(kappa: f64, h_coord: f64, h_step: f64, x: f64) -> f64 {
    let r = h_step / h_coord;
    let damp = (-r).exp();
    kappa / 3.0 * (x / h_coord.sqrt()).cos() * (h_coord * (damp - 1.0) + h_step * damp)
}

/// The multi-step drift coefficient
/// `c_K = sum_{j=0}^{K-1} [e^{-j^2} - e^{-(j+1)^2} - j e^{-j^2}
/// - (j+1) e^{-(j+1)^2}]`; the per-coordinate K-step drift is
/// `-(kappa eta^2 / 6) c_K cos(sqrt(2) x / eta)`.
///
/// `c_1 = 1 - 2/e` and the sequence never drops below 0.129, which is
/// asserted.
pub fn hmc_cosine_drift_coeff(k: usize) -> f64 {
    assert!(k >= 1, "step count must be at least 1");
    let mut total = 0.0;
    for j in 0..k {
        let jf = j as f64;
        let j1 = jf + 1.0;
        total += (-jf * jf).exp() - (-j1 * j1).exp() - jf * (-jf * jf).exp()
            - j1 * (-j1 * j1).exp();
    }
    assert!(total >= 0.129, "drift coefficient budget violated: c_{k} = {total}");
    total
}

/// One coordinate's measured S value next to its analytic expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateDrift {
    pub index: usize,
    /// Measured `S_i` for the given start and noise.
    pub value: f64,
    /// Analytic expectation of `S_i` over the noise at this start, for the
    /// MALA specialization of the step coefficients.
    pub expectation: f64,
}

/// Decomposition of the MALA log acceptance ratio into the stochastic
/// second-order term, the drift coupling, and the gradient-norm correction.
/// The three parts sum to [`mala_log_accept_general`] at
/// `y = x + sqrt(2h) g - h grad f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptDecomposition {
    pub total: f64,
    /// `-f(x_g) + f(x) - (1/2) <x - x_g, grad f(x) + grad f(x_g)>`, the sum
    /// of the per-coordinate S variables.
    pub stochastic: f64,
    /// Terms coupling the noise position `x_g` to the drift endpoint `y`.
    pub drift_coupling: f64,
    /// `(h/4)(||grad f(x)||^2 - ||grad f(y)||^2)`.
    pub gradient_norm: f64,
    /// Per-coordinate S values with analytic expectations.
    pub coordinates: Vec<CoordinateDrift>,
}

/// Splits the log acceptance ratio of the MALA move generated by noise `g`
/// from `x`.
pub fn accept_decomposition(target: &Target, x: &[f64], g: &[f64], h: f64) -> AcceptDecomposition {
    let sqrt2h = (2.0 * h).sqrt();
    let grad_x = target.gradient(x);
    let x_g: Vec<f64> = x.iter().zip(g).map(|(&xi, &gi)| xi + sqrt2h * gi).collect();
    let y: Vec<f64> = x_g
        .iter()
        .zip(&grad_x)
        .map(|(&xgi, &gxi)| xgi - h * gxi)
        .collect();
    let grad_xg = target.gradient(&x_g);
    let grad_y = target.gradient(&y);

    let mut coordinates = Vec::with_capacity(x.len());
    let mut stochastic = 0.0;
    for i in 0..x.len() {
        let coord = target.coord(i);
        let s = coordinate_log_accept_term(coord, x[i], x_g[i]);
        stochastic += s;
        let expectation = match *coord {
            // Quadratic coordinates cancel pathwise: the trapezoid rule is
            // exact for quadratics, so S_i = 0 identically.
            CoordinateSpec::Quadratic { .. } => 0.0,
            CoordinateSpec::Cosine { kappa, h: period } => {
                cosine_drift_expectation_with_step(kappa, period, h, x[i])
            }
        };
        coordinates.push(CoordinateDrift {
            index: i,
            value: s,
            expectation,
        });
    }

    let mut coupling = 0.0; // f(x_g) - f(y) - (1/2) <x - x_g, grad f(y) - grad f(x_g)>
    let mut third = 0.0; // -(1/2) <x_g - y, grad f(x) + grad f(y)>
    for i in 0..x.len() {
        coupling -= 0.5 * (x[i] - x_g[i]) * (grad_y[i] - grad_xg[i]);
        third -= 0.5 * (x_g[i] - y[i]) * (grad_x[i] + grad_y[i]);
    }
    let drift_coupling = target.potential(&x_g) - target.potential(&y) + coupling + third;
    let gradient_norm = h / 4.0 * (norm_sq(&grad_x) - norm_sq(&grad_y));
    AcceptDecomposition {
        total: stochastic + drift_coupling + gradient_norm,
        stochastic,
        drift_coupling,
        gradient_norm,
        coordinates,
    }
}
