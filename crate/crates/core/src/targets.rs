//! Adversarial target potentials.
//!
//! Every target built here is separable, has its minimizer at the origin,
//! and keeps its per-coordinate curvature inside `[1, kappa]`; the scale is
//! fixed so that step-size choices cannot be laundered through units. Two
//! coordinate kinds cover all constructions:
//!
//! * `quadratic(lambda)`: `f(c) = lambda c^2 / 2`, curvature `lambda`;
//! * `cosine(kappa, h)`: `f(c) = (kappa/3) c^2 - (kappa h / 3) cos(c / sqrt(h))`,
//!   curvature oscillating in `[kappa/3, kappa]` with period `2 pi sqrt(h)`,
//!   matched to the step scale so a typical proposal jumps a period.
//!
//! Gradients are hand-coded per kind; finite differences exist only in tests.

use crate::rng::Stream;
use crate::{Error, Result};

/// One separable coordinate of a target potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateSpec {
    /// `f(c) = lambda c^2 / 2`.
    Quadratic { lambda: f64 },
    /// `f(c) = (kappa/3) c^2 - (kappa h/3) cos(c / sqrt(h))`.
    Cosine { kappa: f64, h: f64 },
}

impl CoordinateSpec {
    /// Potential value.
    #[inline]
    pub fn value(&self, c: f64) -> f64 {
        match *self {
            CoordinateSpec::Quadratic { lambda } => 0.5 * lambda * c * c,
            CoordinateSpec::Cosine { kappa, h } => {
                kappa / 3.0 * c * c - kappa * h / 3.0 * (c / h.sqrt()).cos()
            }
        }
    }

    /// First derivative.
    #[inline]
    pub fn deriv(&self, c: f64) -> f64 {
        match *self {
            CoordinateSpec::Quadratic { lambda } => lambda * c,
            CoordinateSpec::Cosine { kappa, h } => {
                let rh = h.sqrt();
                2.0 * kappa / 3.0 * c + kappa * rh / 3.0 * (c / rh).sin()
            }
        }
    }

    /// Second derivative.
    #[inline]
    pub fn second_deriv(&self, c: f64) -> f64 {
        match *self {
            CoordinateSpec::Quadratic { lambda } => lambda,
            CoordinateSpec::Cosine { kappa, h } => {
                2.0 * kappa / 3.0 + kappa / 3.0 * (c / h.sqrt()).cos()
            }
        }
    }

    /// Exact curvature range of this coordinate.
    pub fn curvature_range(&self) -> (f64, f64) {
        match *self {
            CoordinateSpec::Quadratic { lambda } => (lambda, lambda),
            CoordinateSpec::Cosine { kappa, .. } => (kappa / 3.0, kappa),
        }
    }

    /// Exact stationary variance, when available in closed form.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            CoordinateSpec::Quadratic { lambda } => Some(1.0 / lambda),
            CoordinateSpec::Cosine { .. } => None,
        }
    }

    /// One exact draw from the normalized density `exp(-f)`.
    ///
    /// Quadratic coordinates are Gaussian. Cosine coordinates are drawn by
    /// rejection against the Gaussian envelope `exp(-kappa c^2 / 3)` with
    /// acceptance weight `exp((kappa h / 3)(cos(c / sqrt(h)) - 1))`; the
    /// weight is at least `exp(-2 kappa h / 3)`, so `kappa h / 3 <= 10` is
    /// enforced up front and the retry cap of 1e6 is an error, not a
    /// fallback.
    pub fn sample(&self, stream: &mut Stream) -> Result<f64> {
        match *self {
            CoordinateSpec::Quadratic { lambda } => Ok(stream.gaussian() / lambda.sqrt()),
            CoordinateSpec::Cosine { kappa, h } => {
                let amplitude = kappa * h / 3.0;
                if amplitude > 10.0 {
                    return Err(Error::Guard(format!(
                        "cosine rejection sampler needs kappa*h/3 <= 10, got {amplitude}"
                    )));
                }
                let sigma = (1.5 / kappa).sqrt();
                let rh = h.sqrt();
                const CAP: u64 = 1_000_000;
                for _ in 0..CAP {
                    let c = sigma * stream.gaussian();
                    let log_w = amplitude * ((c / rh).cos() - 1.0);
                    if stream.uniform_open().ln() < log_w {
                        return Ok(c);
                    }
                }
                Err(Error::Exhausted {
                    attempts: CAP,
                    context: "cosine coordinate rejection sampler".into(),
                })
            }
        }
    }
}

/// A separable target density `pi(x) ∝ exp(-f(x))` with curvature pinned to
/// a known range.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    coords: Vec<CoordinateSpec>,
    curvature_lo: f64,
    curvature_hi: f64,
}

impl Target {
    fn from_coords(coords: Vec<CoordinateSpec>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for c in &coords {
            let (a, b) = c.curvature_range();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Target {
            coords,
            curvature_lo: lo,
            curvature_hi: hi,
        }
    }

    /// The hard quadratic: eigenvalues `(1, kappa, ..., kappa)`.
    pub fn hard_quadratic(d: usize, kappa: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("hard quadratic needs d >= 2, got {d}")));
        }
        if kappa < 1.0 {
            return Err(Error::Domain(format!(
                "condition number must be >= 1, got {kappa}"
            )));
        }
        let mut coords = vec![CoordinateSpec::Quadratic { lambda: kappa }; d];
        coords[0] = CoordinateSpec::Quadratic { lambda: 1.0 };
        Ok(Target::from_coords(coords))
    }

    /// The boosted hard quadratic: eigenvalues
    /// `(1, kappa/pi^2, ..., kappa/pi^2, kappa)`.
    pub fn hqc(d: usize, kappa: f64) -> Result<Self> {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        if d < 3 {
            return Err(Error::Domain(format!("hqc needs d >= 3, got {d}")));
        }
        if kappa < pi2 {
            return Err(Error::Domain(format!(
                "hqc needs kappa >= pi^2 so the middle eigenvalue stays >= 1, got {kappa}"
            )));
        }
        let mut coords = vec![
            CoordinateSpec::Quadratic {
                lambda: kappa / pi2
            };
            d
        ];
        coords[0] = CoordinateSpec::Quadratic { lambda: 1.0 };
        coords[d - 1] = CoordinateSpec::Quadratic { lambda: kappa };
        Ok(Target::from_coords(coords))
    }

    /// A Gaussian whose second coordinate sits exactly on a leapfrog
    /// resonance for step size `eta` and step count `k`: eigenvalues
    /// `(1, lambda, kappa, ..., kappa)` with
    /// `lambda = 2 (1 - cos(j pi / k)) / eta^2` for the smallest valid `j`.
    /// Returns the target and the chosen `j`.
    pub fn resonant_gaussian(d: usize, kappa: f64, eta: f64, k: usize) -> Result<(Self, usize)> {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        if d < 3 {
            return Err(Error::Domain(format!(
                "resonant gaussian needs d >= 3, got {d}"
            )));
        }
        if k < 2 {
            return Err(Error::Domain(format!(
                "interior resonances need K >= 2, got {k}"
            )));
        }
        if kappa < pi2 {
            return Err(Error::Domain(format!(
                "resonant gaussian needs kappa >= pi^2, got {kappa}"
            )));
        }
        let mut chosen = None;
        for j in 1..k {
            let lambda = crate::chebyshev::resonant_lambda(eta, k, j)?;
            if (1.0..=kappa).contains(&lambda) {
                chosen = Some((j, lambda));
                break;
            }
        }
        let Some((j, lambda)) = chosen else {
            return Err(Error::Domain(format!(
                "no resonance index j in [1, {}] puts lambda in [1, {kappa}] at eta = {eta}; \
                 eta^2 must lie in [pi^2/(kappa K^2), 1]",
                k - 1
            )));
        };
        let mut coords = vec![CoordinateSpec::Quadratic { lambda: kappa }; d];
        coords[0] = CoordinateSpec::Quadratic { lambda: 1.0 };
        coords[1] = CoordinateSpec::Quadratic { lambda };
        Ok((Target::from_coords(coords), j))
    }

    /// Index of the resonant coordinate in [`Target::resonant_gaussian`].
    pub const RESONANT_COORD: usize = 1;

    /// The cosine-perturbed hard target: coordinate 1 is `c^2/2`, the rest
    /// oscillate with curvature in `[kappa/3, kappa]` at period scale
    /// `sqrt(h)`.
    pub fn cosine_hard(d: usize, kappa: f64, h: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("cosine target needs d >= 2, got {d}")));
        }
        if kappa < 3.0 {
            return Err(Error::Domain(format!(
                "cosine target needs kappa >= 3 so curvature stays >= 1, got {kappa}"
            )));
        }
        if !(h > 0.0) {
            return Err(Error::Domain(format!("period parameter h must be positive, got {h}")));
        }
        let mut coords = vec![CoordinateSpec::Cosine { kappa, h }; d];
        coords[0] = CoordinateSpec::Quadratic { lambda: 1.0 };
        Ok(Target::from_coords(coords))
    }

    /// Gaussian potential with the given diagonal Hessian eigenvalues.
    pub fn diagonal_gaussian(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::Domain(format!(
                "eigenvalues must be positive, got {bad}"
            )));
        }
        Ok(Target::from_coords(
            eigenvalues
                .iter()
                .map(|&lambda| CoordinateSpec::Quadratic { lambda })
                .collect(),
        ))
    }

    /// Isotropic Gaussian potential `lambda ||x||^2 / 2`.
    pub fn isotropic_gaussian(d: usize, lambda: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Target::from_coords(vec![
            CoordinateSpec::Quadratic { lambda };
            d
        ]))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordinateSpec] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &CoordinateSpec {
        &self.coords[i]
    }

    /// All targets in this crate are coordinate-separable.
    pub fn is_separable(&self) -> bool {
        true
    }

    /// `(mu, L)`: the exact curvature range over all coordinates and points.
    pub fn curvature_range(&self) -> (f64, f64) {
        (self.curvature_lo, self.curvature_hi)
    }

    /// Eigenvalues, when the target is quadratic in a diagonal matrix.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.coords
            .iter()
            .map(|c| match c {
                CoordinateSpec::Quadratic { lambda } => Some(*lambda),
                CoordinateSpec::Cosine { .. } => None,
            })
            .collect()
    }

    /// Potential `f(x)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coords.len());
        self.coords
            .iter()
            .zip(x)
            .map(|(c, &xi)| c.value(xi))
            .sum()
    }

    /// Gradient written into `out`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.coords.len());
        debug_assert_eq!(out.len(), self.coords.len());
        for ((c, &xi), o) in self.coords.iter().zip(x).zip(out.iter_mut()) {
            *o = c.deriv(xi);
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        out
    }

    /// One exact stationary draw.
    pub fn sample_stationary_into(&self, stream: &mut Stream, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.coords.len());
        for (c, o) in self.coords.iter().zip(out.iter_mut()) {
            *o = c.sample(stream)?;
        }
        Ok(())
    }

    /// `n` i.i.d. exact stationary draws.
    pub fn sample_stationary(&self, n: usize, stream: &mut Stream) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = vec![0.0; self.dim()];
            self.sample_stationary_into(stream, &mut x)?;
            out.push(x);
        }
        Ok(out)
    }
}
