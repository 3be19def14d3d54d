//! Polynomial closed form of leapfrog dynamics on quadratics.
//!
//! On a quadratic potential with curvature `lambda`, `K` leapfrog steps of
//! size `eta` act linearly on the starting pair `(x_0, v_0)`:
//!
//! ```text
//! x_K = p_K(eta^2 lambda) x_0 + eta q_K(eta^2 lambda) v_0
//! ```
//!
//! where `p_K` and `q_K` are degree-`K` and degree-`K-1` polynomials with
//! integer-indexed coefficient families `D_{j,K}` and `E_{j,K}`. The
//! identities `p_K(z) = T_K(1 - z/2)` and `q_K(z) = U_{K-1}(1 - z/2)` tie
//! them to the Chebyshev polynomials of the first and second kind, which is
//! what this module exposes: coefficient construction, stable evaluation,
//! the `(alpha, beta)` step-coefficient form used by acceptance analysis,
//! and the resonant curvatures where `|p_K| = 1` and `q_K = 0` freeze a
//! coordinate.
//!
//! Everything here is a pure function; see the `leapfrog` chapter of the
//! guide for the derivation trail.

use crate::{Error, Result};

/// Largest supported leapfrog step count.
///
/// The coefficient magnitudes grow like central binomials; past K = 64 the
/// float recurrence loses the low digits the identity suite asserts on, and
/// past K = 20 exact integer binomials would need more than the 53-bit
/// mantissa, hence the two-regime construction in [`leapfrog_coeffs`].
pub const MAX_STEPS: usize = 64;
const EXACT_STEPS: usize = 20;

/// Coefficient families `D_{j,K}` (for the position) and `E_{j,K}` (for the
/// velocity) of the leapfrog position polynomial at step count `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogCoefficients {
    /// Step count `K`.
    pub k: usize,
    /// `D_{0..=K, K}`; `p_K(z) = sum_j D_j z^j`.
    pub d: Vec<f64>,
    /// `E_{0..K, K}`; `q_K(z) = sum_j E_j z^j`.
    pub e: Vec<f64>,
}

/// One-eigenvalue step coefficients: the proposal along an eigenvector with
/// curvature `lambda` is `y = (1 - alpha) x + beta g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// Contraction coefficient, `1 - p_K(2 h lambda)` (dimensionless).
    pub alpha: f64,
    /// Noise coefficient, `sqrt(2h) q_K(2 h lambda)` (a length scale).
    pub beta: f64,
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Closed-form coefficients for `K` leapfrog steps.
///
/// For `K <= 20` the binomial forms `D_{j,K} = (-1)^j (K/(K+j)) C(K+j, 2j)`
/// and `E_{j,K} = (-1)^j C(K+j, 2j+1)` are evaluated in exact integer
/// arithmetic; beyond that the rows are grown with the float recurrence
/// `D_{j,k+1} = 2 D_{j,k} - D_{j-1,k} - D_{j,k-1}` (same for `E`), which is
/// the coefficient-level form of the Chebyshev three-term recurrence.
pub fn leapfrog_coeffs(k: usize) -> Result<LeapfrogCoefficients> {
    if k == 0 || k > MAX_STEPS {
        return Err(Error::Domain(format!(
            "leapfrog step count must be in [1, {MAX_STEPS}], got {k}"
        )));
    }
    if k <= EXACT_STEPS {
        let d = (0..=k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * k as f64 * binomial_u128(k + j, 2 * j) as f64 / (k + j) as f64
            })
            .collect();
        let e = (0..k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial_u128(k + j, 2 * j + 1) as f64
            })
            .collect();
        return Ok(LeapfrogCoefficients { k, d, e });
    }

    // Rows k-1 and k of each family, padded with zeros so indexing is uniform.
    let mut d_prev = vec![1.0]; // k = 0
    let mut d_cur = vec![1.0, -0.5]; // k = 1
    let mut e_prev = vec![0.0]; // q_0 = 0
    let mut e_cur = vec![1.0]; // q_1 = 1
    for cur_k in 1..k {
        let mut d_next = vec![0.0; cur_k + 2];
        for j in 0..=cur_k + 1 {
            let a = d_cur.get(j).copied().unwrap_or(0.0);
            let b = if j > 0 {
                d_cur.get(j - 1).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            let c = d_prev.get(j).copied().unwrap_or(0.0);
            d_next[j] = 2.0 * a - b - c;
        }
        let mut e_next = vec![0.0; cur_k + 1];
        for j in 0..=cur_k {
            let a = e_cur.get(j).copied().unwrap_or(0.0);
            let b = if j > 0 {
                e_cur.get(j - 1).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            let c = e_prev.get(j).copied().unwrap_or(0.0);
            e_next[j] = 2.0 * a - b - c;
        }
        d_prev = std::mem::replace(&mut d_cur, d_next);
        e_prev = std::mem::replace(&mut e_cur, e_next);
    }
    Ok(LeapfrogCoefficients {
        k,
        d: d_cur,
        e: e_cur,
    })
}

/// `p_K(z)` by the three-term recurrence `p_{k+1} = (2 - z) p_k - p_{k-1}`.
pub fn eval_p(k: usize, z: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 - 0.5 * z;
    for _ in 1..k {
        (prev, cur) = (cur, (2.0 - z) * cur - prev);
    }
    cur
}

/// `1 - p_K(z)`, computed without the cancellation that makes `1 - eval_p`
/// useless for small `z`. Satisfies `r_{k+1} = (2 - z) r_k - r_{k-1} - z`.
pub fn eval_one_minus_p(k: usize, z: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 0.5 * z;
    for _ in 1..k {
        (prev, cur) = (cur, (2.0 - z) * cur - prev + z);
    }
    cur
}

/// `q_K(z)` by the same recurrence with `q_0 = 0`, `q_1 = 1`.
pub fn eval_q(k: usize, z: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for _ in 1..k {
        (prev, cur) = (cur, (2.0 - z) * cur - prev);
    }
    cur
}

/// Chebyshev polynomial of the first kind, `T_k(w)`, via the trigonometric
/// branch on `|w| <= 1` and the hyperbolic branch outside.
pub fn chebyshev_t(k: usize, w: f64) -> f64 {
    let kf = k as f64;
    if w.abs() <= 1.0 {
        (kf * w.acos()).cos()
    } else if w > 1.0 {
        (kf * w.acosh()).cosh()
    } else {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * (kf * (-w).acosh()).cosh()
    }
}

/// Chebyshev polynomial of the second kind, `U_k(w)`.
pub fn chebyshev_u(k: usize, w: f64) -> f64 {
    let deg = (k + 1) as f64;
    if w == 1.0 {
        return deg;
    }
    if w == -1.0 {
        return if k % 2 == 0 { deg } else { -deg };
    }
    if w.abs() < 1.0 {
        let theta = w.acos();
        (deg * theta).sin() / theta.sin()
    } else if w > 1.0 {
        let t = w.acosh();
        (deg * t).sinh() / t.sinh()
    } else {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let t = (-w).acosh();
        sign * (deg * t).sinh() / t.sinh()
    }
}

/// Step coefficients `(alpha, beta)` for `K` leapfrog steps of size
/// `eta = sqrt(2h)` along an eigenvalue `lambda`.
///
/// In the small-step regime `2 h lambda K^2 <= 1` the first summand of each
/// coefficient dominates and the values are pinned to
/// `alpha in [0.8 h lambda K^2, h lambda K^2]`,
/// `beta in [0.8 sqrt(2h) K, sqrt(2h) K]`; this bracket is asserted.
pub fn hmc_alpha_beta(h: f64, lambda: f64, k: usize) -> StepCoefficients {
    assert!(h > 0.0 && lambda > 0.0, "h and lambda must be positive");
    let z = 2.0 * h * lambda;
    let alpha = eval_one_minus_p(k, z);
    let beta = (2.0 * h).sqrt() * eval_q(k, z);
    let kk = (k * k) as f64;
    if z * kk <= 1.0 {
        let alpha_scale = h * lambda * kk;
        let beta_scale = (2.0 * h).sqrt() * k as f64;
        let slack = 1e-6;
        assert!(
            alpha >= 0.8 * alpha_scale * (1.0 - slack) && alpha <= alpha_scale * (1.0 + slack),
            "alpha {alpha} outside [0.8, 1.0] x {alpha_scale}"
        );
        assert!(
            beta >= 0.8 * beta_scale * (1.0 - slack) && beta <= beta_scale * (1.0 + slack),
            "beta {beta} outside [0.8, 1.0] x {beta_scale}"
        );
    }
    StepCoefficients { alpha, beta }
}

/// The curvature frozen by `K`-step leapfrog at step size `eta` and phase
/// index `j`: `lambda = 2 (1 - cos(j pi / K)) / eta^2`.
pub fn resonant_lambda(eta: f64, k: usize, j: usize) -> Result<f64> {
    if eta <= 0.0 {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    if k < 2 || j == 0 || j >= k {
        return Err(Error::Domain(format!(
            "resonance index must satisfy 1 <= j <= K-1, got j={j}, K={k}"
        )));
    }
    let phase = (j as f64 * std::f64::consts::PI / k as f64).cos();
    Ok(2.0 * (1.0 - phase) / (eta * eta))
}

/// Final position of `K` leapfrog steps on a scalar quadratic, straight from
/// the polynomial closed form.
pub fn closed_form_hmc_map(lambda: f64, eta: f64, k: usize, x0: f64, v0: f64) -> f64 {
    let z = eta * eta * lambda;
    eval_p(k, z) * x0 + eta * eval_q(k, z) * v0
}
