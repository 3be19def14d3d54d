//! Witness sets and the estimators that quantify mixing obstructions.
//!
//! Each lower-bound phenomenon is certified by a *witness set*: a region of
//! non-trivial stationary measure from which the chain provably struggles to
//! move. This module implements those sets as exact membership predicates,
//! plus the measurement side:
//!
//! * stationary measures, by direct Monte Carlo where feasible and by
//!   per-coordinate quadrature products for the `exp(-d)`-scale product
//!   sets, which direct sampling cannot certify past a few dozen
//!   dimensions;
//! * exact stationary sampling *restricted to a set* (the experiments'
//!   starting distributions), by per-coordinate rejection for product sets
//!   and by conditional radial sampling for the ball-shaped sets;
//! * one-step escape probabilities (the conductance numerator from a
//!   restricted start);
//! * the Dirichlet-form spectral-gap witness with the first-coordinate test
//!   function;
//! * total-variation lower bounds from witness frequencies, with exact
//!   Clopper-Pearson intervals; the extreme-probability regimes here break
//!   normal approximations.

use rayon::prelude::*;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, Normal};

use crate::analysis::adaptive_simpson;
use crate::kernels::KernelSpec;
use crate::rng::{DrawKind, StepRng, Stream, StreamKey};
use crate::targets::{CoordinateSpec, Target};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Confidence level for all interval estimates.
pub const CI_LEVEL: f64 = 1e-3;

/// Regions with lower-bounded stationary measure from which chains fail to
/// escape. Membership predicates implement the defining inequalities
/// verbatim; `log d` means the natural logarithm throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WitnessSet {
    /// The whole space.
    Full { d: usize },
    /// Bad start set for MALA on the hard quadratic:
    /// `||x_{-1}||^2 <= 2d/(3 kappa)` and `x_1^2 <= 25 log d`.
    GaussianBad { d: usize, kappa: f64 },
    /// Bad start set for MALA on the cosine target: `|x_1| <= 2` and every
    /// other coordinate within `(9/20) pi sqrt(h)` of a period center
    /// `2 pi k sqrt(h)` with `|k| <= floor(5 / (pi sqrt(h kappa)))`.
    OmegaHard { d: usize, kappa: f64, h: f64 },
    /// Warm-start ball `||x||^2 <= d/2`.
    SmallBall { d: usize },
    /// High-measure shell `||x||^2 >= 0.81 d`, the mixing witness.
    OmegaLarge { d: usize },
    /// Bad start set for HMC on the boosted hard quadratic:
    /// `|x_1| <= 5 sqrt(log d)`, `||x_{2..d-1}||^2 <= 2d/(3 kappa)`,
    /// `|x_d| <= log(d) / sqrt(kappa)`.
    HmcBad { d: usize, kappa: f64 },
    /// Symmetric slab `|x_i| <= half_width` in one coordinate.
    Slab {
        d: usize,
        coord: usize,
        half_width: f64,
    },
}

impl WitnessSet {
    pub fn dim(&self) -> usize {
        match *self {
            WitnessSet::Full { d }
            | WitnessSet::GaussianBad { d, .. }
            | WitnessSet::OmegaHard { d, .. }
            | WitnessSet::SmallBall { d }
            | WitnessSet::OmegaLarge { d }
            | WitnessSet::HmcBad { d, .. }
            | WitnessSet::Slab { d, .. } => d,
        }
    }

    /// Whether membership factorizes over coordinates.
    pub fn is_product(&self) -> bool {
        matches!(
            self,
            WitnessSet::Full { .. } | WitnessSet::OmegaHard { .. } | WitnessSet::Slab { .. }
        )
    }

    /// Exact membership predicate.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.member(x))
    }

    pub(crate) fn member(&self, x: &[f64]) -> bool {
        match *self {
            WitnessSet::Full { .. } => true,
            WitnessSet::GaussianBad { d, kappa } => {
                let tail: f64 = x[1..].iter().map(|v| v * v).sum();
                x[0] * x[0] <= 25.0 * (d as f64).ln() && tail <= 2.0 * d as f64 / (3.0 * kappa)
            }
            WitnessSet::OmegaHard { kappa, h, .. } => {
                x[0].abs() <= 2.0
                    && x[1..]
                        .iter()
                        .all(|&c| omega_hard_coordinate(c, h, kappa))
            }
            WitnessSet::SmallBall { d } => {
                x.iter().map(|v| v * v).sum::<f64>() <= d as f64 / 2.0
            }
            WitnessSet::OmegaLarge { d } => {
                x.iter().map(|v| v * v).sum::<f64>() >= 0.81 * d as f64
            }
            WitnessSet::HmcBad { d, kappa } => {
                let log_d = (d as f64).ln();
                let mid: f64 = x[1..d - 1].iter().map(|v| v * v).sum();
                x[0].abs() <= 5.0 * log_d.sqrt()
                    && mid <= 2.0 * d as f64 / (3.0 * kappa)
                    && x[d - 1].abs() <= log_d / kappa.sqrt()
            }
            WitnessSet::Slab {
                coord, half_width, ..
            } => x[coord].abs() <= half_width,
        }
    }
}

/// The per-coordinate window test of the cosine bad set: resolves the
/// nearest period index and checks both the window and the index cap.
fn omega_hard_coordinate(c: f64, h: f64, kappa: f64) -> bool {
    let rh = h.sqrt();
    let period = 2.0 * PI * rh;
    let cap = (5.0 / (PI * (h * kappa).sqrt())).floor();
    let k = (c / period).round();
    k.abs() <= cap && (c - k * period).abs() <= 0.45 * PI * rh
}

/// Exact two-sided Clopper-Pearson interval at confidence `1 - level`.
pub fn clopper_pearson(hits: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0, "interval needs at least one sample");
    let (h, nf) = (hits as f64, n as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(h, nf - h + 1.0)
            .expect("valid beta parameters")
            .inverse_cdf(level / 2.0)
    };
    let hi = if hits == n {
        1.0
    } else {
        Beta::new(h + 1.0, nf - h)
            .expect("valid beta parameters")
            .inverse_cdf(1.0 - level / 2.0)
    };
    (lo, hi)
}

/// A set-measure (or frequency) estimate with its exact binomial interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureEstimate {
    pub hits: u64,
    pub n: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// True when the estimate came from the per-coordinate quadrature
    /// product rather than sampling; `hits` and `n` are then zero and the
    /// interval reflects quadrature tolerance.
    pub factorized: bool,
}

impl MeasureEstimate {
    fn from_counts(hits: u64, n: u64) -> Self {
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

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

/// Stationary measure of `set` by direct Monte Carlo: `n` exact stationary
/// draws classified by membership.
pub fn set_measure_direct_mc(
    target: &Target,
    set: &WitnessSet,
    n: u64,
    stream: &mut Stream,
) -> Result<MeasureEstimate> {
    if set.dim() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            got: set.dim(),
        });
    }
    if n == 0 {
        return Err(Error::Domain("measure estimate needs n >= 1".into()));
    }
    let mut hits = 0;
    let mut x = vec![0.0; target.dim()];
    for _ in 0..n {
        target.sample_stationary_into(stream, &mut x)?;
        if set.member(&x) {
            hits += 1;
        }
    }
    Ok(MeasureEstimate::from_counts(hits, n))
}

/// Stationary probability of one coordinate's restriction, by quadrature of
/// the unnormalized density.
fn coordinate_window_probability(
    coord: &CoordinateSpec,
    set: &WitnessSet,
    index: usize,
) -> Result<f64> {
    // quadratic coordinates with interval restrictions go through the exact
    // normal CDF; everything else through adaptive Simpson ratios
    let interval = |lo: f64, hi: f64| -> Result<f64> {
        match *coord {
            CoordinateSpec::Quadratic { lambda } => {
                let normal = Normal::new(0.0, (1.0 / lambda).sqrt()).expect("valid sigma");
                Ok(normal.cdf(hi) - normal.cdf(lo))
            }
            CoordinateSpec::Cosine { kappa, .. } => {
                let half_range = (3.0 * 710.0 / kappa).sqrt();
                let density = |c: f64| (-coord.value(c)).exp();
                let total = adaptive_simpson(density, -half_range, half_range, 1e-14, 1e-10)?;
                let part = adaptive_simpson(
                    density,
                    lo.max(-half_range),
                    hi.min(half_range),
                    1e-14,
                    1e-10,
                )?;
                Ok(part / total)
            }
        }
    };
    match *set {
        WitnessSet::Full { .. } => Ok(1.0),
        WitnessSet::Slab {
            coord: slab_coord,
            half_width,
            ..
        } => {
            if index == slab_coord {
                interval(-half_width, half_width)
            } else {
                Ok(1.0)
            }
        }
        WitnessSet::OmegaHard { kappa, h, .. } => {
            if index == 0 {
                return interval(-2.0, 2.0);
            }
            let rh = h.sqrt();
            let period = 2.0 * PI * rh;
            let cap = (5.0 / (PI * (h * kappa).sqrt())).floor() as i64;
            let width = 0.45 * PI * rh;
            let mut mass = 0.0;
            for k in -cap..=cap {
                let center = k as f64 * period;
                mass += interval(center - width, center + width)?;
            }
            Ok(mass)
        }
        _ => Err(Error::Domain(
            "factorized measure needs a coordinate-product set".into(),
        )),
    }
}

/// Stationary measure of a product set as the product of per-coordinate
/// quadrature probabilities. This is the only route to `exp(-d)`-scale
/// measures: direct sampling cannot certify them past small `d`.
pub fn set_measure_factorized(target: &Target, set: &WitnessSet) -> Result<MeasureEstimate> {
    if set.dim() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            got: set.dim(),
        });
    }
    if !set.is_product() {
        return Err(Error::Domain(format!(
            "{set:?} does not factorize over coordinates"
        )));
    }
    let mut log_measure = 0.0;
    let mut cache: Option<(CoordinateSpec, f64)> = None;
    for (i, coord) in target.coords().iter().enumerate() {
        // identical non-special coordinates share one quadrature
        let cacheable = i > 0 && !matches!(set, WitnessSet::Slab { coord: c, .. } if *c == i);
        let p = match (&cache, cacheable) {
            (Some((spec, p)), true) if spec == coord => *p,
            _ => {
                let p = coordinate_window_probability(coord, set, i)?;
                if cacheable {
                    cache = Some((*coord, p));
                }
                p
            }
        };
        if p <= 0.0 {
            return Err(Error::Guard(format!(
                "coordinate {i} has vanishing window probability"
            )));
        }
        log_measure += p.ln();
    }
    if log_measure < f64::MIN_POSITIVE.ln() {
        return Err(Error::Guard(format!(
            "factorized measure underflows: log measure = {log_measure:.3}"
        )));
    }
    let estimate = log_measure.exp();
    let band = 1e-8 * estimate;
    Ok(MeasureEstimate {
        hits: 0,
        n: 0,
        estimate,
        ci_lo: estimate - band,
        ci_hi: estimate + band,
        factorized: true,
    })
}

/// Stationary measure of `set`: quadrature product for product sets,
/// direct Monte Carlo otherwise.
pub fn set_measure_mc(
    target: &Target,
    set: &WitnessSet,
    n: u64,
    stream: &mut Stream,
) -> Result<MeasureEstimate> {
    if set.is_product() {
        set_measure_factorized(target, set)
    } else {
        set_measure_direct_mc(target, set, n, stream)
    }
}

const REJECTION_CAP: u64 = 1_000_000;

/// Draws from a 1-D coordinate's stationary law conditioned on a predicate,
/// by rejection.
fn coordinate_rejection(
    coord: &CoordinateSpec,
    stream: &mut Stream,
    keep: impl Fn(f64) -> bool,
) -> Result<f64> {
    for _ in 0..REJECTION_CAP {
        let c = coord.sample(stream)?;
        if keep(c) {
            return Ok(c);
        }
    }
    Err(Error::Exhausted {
        attempts: REJECTION_CAP,
        context: "coordinate rejection into witness window".into(),
    })
}

/// Samples `chi^2_m` conditioned on `T <= bound`.
///
/// When the truncated mass is non-trivial, plain rejection with draws built
/// from Gaussian sums. Deep in the left tail, rejection from an exponential
/// tilted at the boundary: the log-density `l(t) = (m/2 - 1) ln t - t/2` is
/// concave and increasing on `(0, bound]` there, so proposing
/// `t = bound - Exp(l'(bound))` and accepting with
/// `exp(l(t) - l(bound) + l'(bound) (bound - t))` is exact.
fn chisq_below(m: usize, bound: f64, stream: &mut Stream) -> Result<f64> {
    assert!(bound > 0.0);
    let mf = m as f64;
    let mass = ChiSquared::new(mf).expect("valid dof").cdf(bound);
    let slope = (0.5 * mf - 1.0) / bound - 0.5;
    if mass >= 0.1 || slope <= 0.0 {
        let cap = 10_000;
        for _ in 0..cap {
            let t: f64 = (0..m)
                .map(|_| {
                    let g = stream.gaussian();
                    g * g
                })
                .sum();
            if t <= bound {
                return Ok(t);
            }
        }
        return Err(Error::Exhausted {
            attempts: cap,
            context: format!("chi-square rejection below {bound} with {m} dof"),
        });
    }
    let log_density = |t: f64| (0.5 * mf - 1.0) * t.ln() - 0.5 * t;
    let at_bound = log_density(bound);
    for _ in 0..REJECTION_CAP {
        let e = -stream.uniform_open().ln() / slope;
        let t = bound - e;
        if t <= 0.0 {
            continue;
        }
        let log_ratio = log_density(t) - at_bound + slope * e;
        if stream.uniform_open().ln() < log_ratio {
            return Ok(t);
        }
    }
    Err(Error::Exhausted {
        attempts: REJECTION_CAP,
        context: "tilted chi-square tail sampler".into(),
    })
}

/// Samples `chi^2_m` conditioned on `T >= bound` by plain rejection; the
/// shells used here hold most of the mass.
fn chisq_above(m: usize, bound: f64, stream: &mut Stream) -> Result<f64> {
    let cap = 10_000;
    for _ in 0..cap {
        let t: f64 = (0..m)
            .map(|_| {
                let g = stream.gaussian();
                g * g
            })
            .sum();
        if t >= bound {
            return Ok(t);
        }
    }
    Err(Error::Exhausted {
        attempts: cap,
        context: format!("chi-square rejection above {bound} with {m} dof"),
    })
}

/// Requires a run of identical quadratic coordinates and returns the shared
/// eigenvalue.
fn uniform_lambda(target: &Target, range: std::ops::Range<usize>) -> Result<f64> {
    let mut lambda = None;
    for i in range {
        match *target.coord(i) {
            CoordinateSpec::Quadratic { lambda: l } => match lambda {
                None => lambda = Some(l),
                Some(prev) if prev == l => {}
                Some(prev) => {
                    return Err(Error::Domain(format!(
                        "ball-conditioned sampling needs equal eigenvalues, got {prev} and {l}"
                    )))
                }
            },
            CoordinateSpec::Cosine { .. } => {
                return Err(Error::Domain(
                    "ball-conditioned sampling needs quadratic coordinates".into(),
                ))
            }
        }
    }
    lambda.ok_or_else(|| Error::Domain("empty coordinate block".into()))
}

/// Fills `out[range]` with a stationary draw of an isotropic quadratic block
/// conditioned on its squared norm: `chi^2` radius conditioning plus a
/// uniform direction.
fn fill_ball_block(
    target: &Target,
    range: std::ops::Range<usize>,
    norm_sq_bound: f64,
    above: bool,
    stream: &mut Stream,
    out: &mut [f64],
) -> Result<()> {
    let m = range.len();
    let lambda = uniform_lambda(target, range.clone())?;
    let chi_bound = lambda * norm_sq_bound;
    let t = if above {
        chisq_above(m, chi_bound, stream)?
    } else {
        chisq_below(m, chi_bound, stream)?
    };
    let radius = (t / lambda).sqrt();
    let mut dir = vec![0.0; m];
    loop {
        stream.gaussian_fill(&mut dir);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (o, v) in out[range].iter_mut().zip(&dir) {
                *o = radius * v / norm;
            }
            return Ok(());
        }
    }
}

/// One exact draw from the stationary distribution conditioned on `set`.
///
/// Product sets are sampled coordinate by coordinate (rejection into the
/// window); ball-shaped blocks by conditional radial sampling, which stays
/// exact even when the ball's measure is far below rejection reach.
pub fn sample_restricted_one(
    target: &Target,
    set: &WitnessSet,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    let d = target.dim();
    if set.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: set.dim(),
        });
    }
    let mut x = vec![0.0; d];
    match *set {
        WitnessSet::Full { .. } => target.sample_stationary_into(stream, &mut x)?,
        WitnessSet::Slab {
            coord, half_width, ..
        } => {
            target.sample_stationary_into(stream, &mut x)?;
            x[coord] =
                coordinate_rejection(target.coord(coord), stream, |c| c.abs() <= half_width)?;
        }
        WitnessSet::OmegaHard { kappa, h, .. } => {
            x[0] = coordinate_rejection(target.coord(0), stream, |c| c.abs() <= 2.0)?;
            for i in 1..d {
                x[i] = coordinate_rejection(target.coord(i), stream, |c| {
                    omega_hard_coordinate(c, h, kappa)
                })?;
            }
        }
        WitnessSet::GaussianBad { d: dim, kappa } => {
            let bound = 5.0 * (dim as f64).ln().sqrt();
            x[0] = coordinate_rejection(target.coord(0), stream, |c| c.abs() <= bound)?;
            fill_ball_block(
                target,
                1..d,
                2.0 * dim as f64 / (3.0 * kappa),
                false,
                stream,
                &mut x,
            )?;
        }
        WitnessSet::SmallBall { d: dim } => {
            fill_ball_block(target, 0..d, dim as f64 / 2.0, false, stream, &mut x)?;
        }
        WitnessSet::OmegaLarge { d: dim } => {
            fill_ball_block(target, 0..d, 0.81 * dim as f64, true, stream, &mut x)?;
        }
        WitnessSet::HmcBad { d: dim, kappa } => {
            let log_d = (dim as f64).ln();
            let first = 5.0 * log_d.sqrt();
            let last = log_d / kappa.sqrt();
            x[0] = coordinate_rejection(target.coord(0), stream, |c| c.abs() <= first)?;
            x[d - 1] = coordinate_rejection(target.coord(d - 1), stream, |c| c.abs() <= last)?;
            fill_ball_block(
                target,
                1..d - 1,
                2.0 * dim as f64 / (3.0 * kappa),
                false,
                stream,
                &mut x,
            )?;
        }
    }
    debug_assert!(set.member(&x), "restricted sampler left the set");
    Ok(x)
}

/// `n` draws from the stationary distribution conditioned on `set`.
pub fn sample_restricted(
    target: &Target,
    set: &WitnessSet,
    n: usize,
    stream: &mut Stream,
) -> Result<Vec<Vec<f64>>> {
    (0..n)
        .map(|_| sample_restricted_one(target, set, stream))
        .collect()
}

/// Probability that one kernel step from a stationary-restricted start is
/// accepted *and* leaves the set: the conductance numerator seen from
/// inside the witness.
pub fn escape_probability(
    kernel: &KernelSpec,
    target: &Target,
    set: &WitnessSet,
    n: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    kernel.validate()?;
    let escapes = (0..n)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let mut init = Stream::new(StreamKey {
                seed,
                trial,
                step: 0,
                kind: DrawKind::Init,
            });
            let start = sample_restricted_one(target, set, &mut init)?;
            let mut rng = StepRng::new(seed, trial, 1);
            let record = kernel.step(target, &start, &mut rng)?;
            Ok(u64::from(
                record.accepted && !set.member(record.next_state()),
            ))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(MeasureEstimate::from_counts(escapes, n))
}

/// A Dirichlet-form ratio estimate for the first-coordinate test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    /// Estimated Dirichlet form `E(g, g)` for `g(x) = x_1`.
    pub numerator: f64,
    /// Exact stationary variance of `x_1`.
    pub variance: f64,
    /// `numerator / variance`, an upper-bound witness for the spectral gap.
    pub ratio: f64,
    pub numerator_se: f64,
    pub ratio_se: f64,
    pub n: u64,
}

/// Dirichlet-form estimate with a caller-supplied transition. `transition`
/// must return the post-filter state (the start again on rejection).
pub fn dirichlet_gap_estimate_with<F>(
    target: &Target,
    transition: F,
    n: u64,
    seed: u64,
) -> Result<GapEstimate>
where
    F: Fn(&[f64], &mut StepRng) -> Result<Vec<f64>> + Sync,
{
    let variance = target
        .coord(0)
        .variance()
        .ok_or_else(|| Error::Domain("gap witness needs a quadratic first coordinate".into()))?;
    let (sum, sum_sq) = (0..n)
        .into_par_iter()
        .map(|trial| -> Result<(f64, f64)> {
            let mut init = Stream::new(StreamKey {
                seed,
                trial,
                step: 0,
                kind: DrawKind::Stationary,
            });
            let mut x = vec![0.0; target.dim()];
            target.sample_stationary_into(&mut init, &mut x)?;
            let mut rng = StepRng::new(seed, trial, 1);
            let next = transition(&x, &mut rng)?;
            let diff = x[0] - next[0];
            let v = 0.5 * diff * diff;
            Ok((v, v * v))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let nf = n as f64;
    let numerator = sum / nf;
    let var_of_v = (sum_sq / nf - numerator * numerator).max(0.0);
    let numerator_se = (var_of_v / nf).sqrt();
    Ok(GapEstimate {
        numerator,
        variance,
        ratio: numerator / variance,
        numerator_se,
        ratio_se: numerator_se / variance,
        n,
    })
}

/// Dirichlet-form spectral-gap witness for a kernel: starts are exact
/// stationary draws, one transition each, `g(x) = x_1`.
pub fn dirichlet_gap_estimate(
    kernel: &KernelSpec,
    target: &Target,
    n: u64,
    seed: u64,
) -> Result<GapEstimate> {
    kernel.validate()?;
    dirichlet_gap_estimate_with(
        target,
        |x, rng| Ok(kernel.step(target, x, rng)?.next_state().to_vec()),
        n,
        seed,
    )
}

/// Conservative TV lower bound from two witness-frequency estimates:
/// `max(0, |p_stationary - p_chain| - both CI half-widths)`.
pub fn tv_lower_bound(chain: &MeasureEstimate, stationary: &MeasureEstimate) -> f64 {
    ((stationary.estimate - chain.estimate).abs()
        - chain.ci_half_width()
        - stationary.ci_half_width())
    .max(0.0)
}

/// TV lower bound between a batch of chain states and a batch of exact
/// stationary samples, witnessed by `set` membership.
pub fn tv_witness_gap(
    chain_states: &[Vec<f64>],
    stationary_states: &[Vec<f64>],
    set: &WitnessSet,
) -> Result<f64> {
    if chain_states.is_empty() || stationary_states.is_empty() {
        return Err(Error::Domain(
            "TV witness gap needs non-empty batches".into(),
        ));
    }
    let mut chain_hits = 0;
    for x in chain_states {
        chain_hits += u64::from(set.contains(x)?);
    }
    let mut stat_hits = 0;
    for x in stationary_states {
        stat_hits += u64::from(set.contains(x)?);
    }
    let chain = MeasureEstimate::from_counts(chain_hits, chain_states.len() as u64);
    let stationary = MeasureEstimate::from_counts(stat_hits, stationary_states.len() as u64);
    Ok(tv_lower_bound(&chain, &stationary))
}

/// One grid point of an acceptance scan.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub label: String,
    pub kernel: KernelSpec,
    pub target: Target,
    pub start: WitnessSet,
}

/// One row of the scan table. Kernel parameters not applicable to the row's
/// kernel are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub label: String,
    pub h: f64,
    pub eta: f64,
    pub k: u64,
    pub n: u64,
    pub mean_log_accept: f64,
    pub accept_rate: f64,
    pub escape_rate: f64,
    pub gap_est: f64,
    pub gap_se: f64,
    pub tv_lb: f64,
}

#[derive(Default)]
struct ScanAccumulator {
    log_accept_sum: f64,
    accepts: u64,
    escapes: u64,
    end_in_set: u64,
    stat_in_set: u64,
}

/// Runs every grid point: `trials` one-step proposals from the restricted
/// start (mean log-acceptance, acceptance and escape frequencies), a
/// Dirichlet gap estimate from stationary starts, and a one-step TV witness
/// bound against the start set.
pub fn acceptance_scan(points: &[ScanPoint], trials: u64, seed: u64) -> Result<Vec<ScanRow>> {
    if points.is_empty() {
        return Err(Error::Domain("scan grid is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("scan needs at least one trial".into()));
    }
    let mut rows = Vec::with_capacity(points.len());
    for point in points {
        point.kernel.validate()?;
        let acc = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<ScanAccumulator> {
                let mut init = Stream::new(StreamKey {
                    seed,
                    trial,
                    step: 0,
                    kind: DrawKind::Init,
                });
                let start = sample_restricted_one(&point.target, &point.start, &mut init)?;
                let mut rng = StepRng::new(seed, trial, 1);
                let record = point.kernel.step(&point.target, &start, &mut rng)?;
                let end_in_set = point.start.member(record.next_state());

                let mut stat = Stream::new(StreamKey {
                    seed,
                    trial,
                    step: 2,
                    kind: DrawKind::Stationary,
                });
                let mut reference = vec![0.0; point.target.dim()];
                point
                    .target
                    .sample_stationary_into(&mut stat, &mut reference)?;
                Ok(ScanAccumulator {
                    log_accept_sum: record.log_accept,
                    accepts: u64::from(record.accepted),
                    escapes: u64::from(record.accepted && !end_in_set),
                    end_in_set: u64::from(end_in_set),
                    stat_in_set: u64::from(point.start.member(&reference)),
                })
            })
            .try_reduce(ScanAccumulator::default, |a, b| {
                Ok(ScanAccumulator {
                    log_accept_sum: a.log_accept_sum + b.log_accept_sum,
                    accepts: a.accepts + b.accepts,
                    escapes: a.escapes + b.escapes,
                    end_in_set: a.end_in_set + b.end_in_set,
                    stat_in_set: a.stat_in_set + b.stat_in_set,
                })
            })?;
        let gap = dirichlet_gap_estimate(&point.kernel, &point.target, trials, seed ^ 0x5caa)?;
        let chain = MeasureEstimate::from_counts(acc.end_in_set, trials);
        let stationary = MeasureEstimate::from_counts(acc.stat_in_set, trials);
        let (h, eta, k) = match point.kernel {
            KernelSpec::Mala { h } => (h, f64::NAN, 0),
            KernelSpec::Hmc { eta, k } => (f64::NAN, eta, k as u64),
        };
        rows.push(ScanRow {
            label: point.label.clone(),
            h,
            eta,
            k,
            n: trials,
            mean_log_accept: acc.log_accept_sum / trials as f64,
            accept_rate: acc.accepts as f64 / trials as f64,
            escape_rate: acc.escapes as f64 / trials as f64,
            gap_est: gap.ratio,
            gap_se: gap.ratio_se,
            tv_lb: tv_lower_bound(&chain, &stationary),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64) -> Stream {
        Stream::new(StreamKey {
            seed,
            trial: 0,
            step: 0,
            kind: DrawKind::Stationary,
        })
    }

    #[test]
    fn membership_basics() {
        let small = WitnessSet::SmallBall { d: 4 };
        assert!(small.contains(&[0.0; 4]).unwrap());
        assert!(small.contains(&[0.0; 3]).is_err());

        let large = WitnessSet::OmegaLarge { d: 100 };
        let mut x = vec![0.0; 100];
        x[0] = 9.0; // ||x||^2 = 81 = 0.81 * 100, boundary inclusive
        assert!(large.contains(&x).unwrap());
        x[0] = 8.9;
        assert!(!large.contains(&x).unwrap());
    }

    #[test]
    fn omega_hard_window_edges() {
        let (kappa, h) = (100.0, 1e-5);
        let set = WitnessSet::OmegaHard { d: 2, kappa, h };
        let rh = f64::sqrt(h);
        // window center at k = 1
        assert!(set.contains(&[0.0, 2.0 * PI * rh]).unwrap());
        // half period: k ties resolve away from the window
        assert!(!set.contains(&[0.0, PI * rh]).unwrap());
        // first coordinate bound
        assert!(!set.contains(&[2.1, 0.0]).unwrap());
    }

    #[test]
    fn omega_hard_period_shift_invariance() {
        let (kappa, h) = (50.0, 2e-5);
        let set = WitnessSet::OmegaHard { d: 2, kappa, h };
        let period = 2.0 * PI * f64::sqrt(h);
        let cap = (5.0 / (PI * f64::sqrt(h * kappa))).floor() as i64;
        let mut s = stream(3);
        for _ in 0..500 {
            let c = 0.4 * PI * f64::sqrt(h) * s.gaussian();
            for k in [-cap, -1, 0, 1, cap] {
                let a = set.contains(&[0.0, c + k as f64 * period]).unwrap();
                let b = set.contains(&[0.0, c]).unwrap();
                assert_eq!(a, b, "shift by {k} periods changed membership");
            }
        }
    }

    #[test]
    fn clopper_pearson_contains_estimate() {
        for (hits, n) in [(0u64, 50u64), (50, 50), (7, 50), (1, 1000)] {
            let (lo, hi) = clopper_pearson(hits, n, CI_LEVEL);
            let p = hits as f64 / n as f64;
            assert!(
                (lo..=hi).contains(&p),
                "({hits}, {n}): {p} not in [{lo}, {hi}]"
            );
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn measure_full_space_is_one() {
        let t = Target::hard_quadratic(3, 5.0).unwrap();
        let mut s = stream(11);
        let m = set_measure_mc(&t, &WitnessSet::Full { d: 3 }, 10, &mut s).unwrap();
        assert_eq!(m.estimate, 1.0);
    }

    #[test]
    fn small_ball_measure_matches_chi_square() {
        // d = 2 under the isotropic Gaussian: P[chi^2_2 <= 1] = 1 - e^{-1/2}
        let t = Target::isotropic_gaussian(2, 1.0).unwrap();
        let set = WitnessSet::SmallBall { d: 2 };
        let mut s = stream(13);
        let m = set_measure_direct_mc(&t, &set, 200_000, &mut s).unwrap();
        let expect = 1.0 - (-0.5f64).exp();
        assert!(
            (m.ci_lo..=m.ci_hi).contains(&expect),
            "{expect} outside [{}, {}]",
            m.ci_lo,
            m.ci_hi
        );
    }

    #[test]
    fn factorized_matches_direct_mc_at_d2() {
        let (kappa, h) = (30.0, 1e-4);
        let t = Target::cosine_hard(2, kappa, h).unwrap();
        let set = WitnessSet::OmegaHard { d: 2, kappa, h };
        let fact = set_measure_factorized(&t, &set).unwrap();
        let mut s = stream(17);
        let direct = set_measure_direct_mc(&t, &set, 200_000, &mut s).unwrap();
        let se = (direct.estimate * (1.0 - direct.estimate) / direct.n as f64).sqrt();
        assert!(
            (fact.estimate - direct.estimate).abs() <= 4.0 * se,
            "factorized {} vs direct {} (se {se})",
            fact.estimate,
            direct.estimate
        );
    }

    #[test]
    fn factorized_omega_hard_beats_exp_minus_d() {
        let (d, kappa) = (6, 100.0);
        let h = 1.0 / (10000.0 * PI * PI * kappa);
        let t = Target::cosine_hard(d, kappa, h).unwrap();
        let set = WitnessSet::OmegaHard { d, kappa, h };
        let m = set_measure_factorized(&t, &set).unwrap();
        assert!(
            m.estimate >= (-(d as f64)).exp(),
            "measure {} below exp(-d)",
            m.estimate
        );
    }

    #[test]
    fn restricted_sampler_lands_in_set_and_matches_conditional_law() {
        let d = 30;
        let kappa = 25.0;
        let t = Target::hard_quadratic(d, kappa).unwrap();
        let set = WitnessSet::GaussianBad { d, kappa };
        let mut s = stream(19);
        let samples = sample_restricted(&t, &set, 2000, &mut s).unwrap();
        for x in &samples {
            assert!(set.contains(x).unwrap());
        }
        // The tail-norm law should match plain rejection sampling.
        let mut rej = stream(23);
        let mut rejected: Vec<f64> = Vec::new();
        while rejected.len() < 2000 {
            let x = t.sample_stationary(1, &mut rej).unwrap().pop().unwrap();
            if set.contains(&x).unwrap() {
                rejected.push(x[1..].iter().map(|v| v * v).sum());
            }
        }
        let radial: Vec<f64> = samples
            .iter()
            .map(|x| x[1..].iter().map(|v| v * v).sum())
            .collect();
        let mean_a = radial.iter().sum::<f64>() / radial.len() as f64;
        let mean_b = rejected.iter().sum::<f64>() / rejected.len() as f64;
        let var_a =
            radial.iter().map(|v| (v - mean_a).powi(2)).sum::<f64>() / radial.len() as f64;
        let var_b =
            rejected.iter().map(|v| (v - mean_b).powi(2)).sum::<f64>() / rejected.len() as f64;
        let se = ((var_a + var_b) / 2000.0).sqrt();
        assert!(
            (mean_a - mean_b).abs() <= 4.0 * se,
            "radial means differ: {mean_a} vs {mean_b} (se {se})"
        );
    }

    #[test]
    fn deep_tail_radial_sampler() {
        // stationary mass of the small ball at d = 400 is ~ e^{-38}; the
        // conditional sampler must still produce in-set draws
        let d = 400;
        let t = Target::isotropic_gaussian(d, 1.0).unwrap();
        let set = WitnessSet::SmallBall { d };
        let mut s = stream(29);
        for _ in 0..50 {
            let x = sample_restricted_one(&t, &set, &mut s).unwrap();
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            assert!(norm_sq <= d as f64 / 2.0);
        }
    }

    #[test]
    fn escape_probability_zero_at_exact_resonance() {
        // The slab in the resonant coordinate can never be left: the
        // magnitude is invariant whether or not steps accept.
        let (target, _) = Target::resonant_gaussian(3, 100.0, 1.0, 2).unwrap();
        let set = WitnessSet::Slab {
            d: 3,
            coord: Target::RESONANT_COORD,
            half_width: 1.0,
        };
        let kernel = KernelSpec::Hmc { eta: 1.0, k: 2 };
        let est = escape_probability(&kernel, &target, &set, 1000, 61).unwrap();
        assert_eq!(est.hits, 0, "escaped a resonant slab: {}", est.estimate);
    }

    #[test]
    fn small_ball_rate_report() {
        // The exact large-deviation rate of P[chi^2_n <= n/2] is
        // (1/2)(1/2 - 1 - ln(1/2)) ~ 0.0966 per dof; finite-n rates sit
        // below it (log prefactor) and converge upward, and all are steeper
        // than the 1/12 sometimes quoted. Report, and pin the convergence.
        let asymptote = -0.5 * (0.5 - 1.0 - 0.5f64.ln());
        let mut last_gap = f64::INFINITY;
        for n in [50u64, 100, 200] {
            let dist = ChiSquared::new(n as f64).unwrap();
            let rate = dist.cdf(n as f64 / 2.0).ln() / n as f64;
            println!(
                "small-ball rate at n = {n}: {rate:.4} (vs -1/12 = {:.4}, asymptote {asymptote:.4})",
                -1.0 / 12.0
            );
            assert!(rate < 0.0);
            assert!(
                rate < -1.0 / 12.0,
                "measured decay {rate} slower than the quoted -1/12"
            );
            let gap = (rate - asymptote).abs();
            assert!(gap < last_gap, "rates must converge to the asymptote");
            last_gap = gap;
        }
    }

    #[test]
    fn escape_probability_degenerate_step() {
        // h -> 0: everything accepted, nothing leaves a fat set
        let d = 10;
        let t = Target::isotropic_gaussian(d, 1.0).unwrap();
        let set = WitnessSet::SmallBall { d };
        let kernel = KernelSpec::Mala { h: 1e-10 };
        let est = escape_probability(&kernel, &t, &set, 2000, 31).unwrap();
        assert_eq!(est.hits, 0, "escape rate should be 0, got {}", est.estimate);
    }

    #[test]
    fn dirichlet_estimate_flip_kernel_oracle() {
        // deterministic flip proposal y = -x, always accepted by symmetry:
        // E(g,g) = (1/2) E[(2 x_1)^2] = 2 Var, so the ratio is exactly 2
        let t = Target::isotropic_gaussian(3, 4.0).unwrap();
        let est = dirichlet_gap_estimate_with(
            &t,
            |x, _| Ok(x.iter().map(|v| -v).collect()),
            100_000,
            37,
        )
        .unwrap();
        assert!(
            (est.ratio - 2.0).abs() <= 4.0 * est.ratio_se,
            "ratio {} vs 2.0 (se {})",
            est.ratio,
            est.ratio_se
        );
    }

    #[test]
    fn dirichlet_estimate_never_accepting_kernel() {
        let t = Target::isotropic_gaussian(3, 1.0).unwrap();
        let est = dirichlet_gap_estimate_with(&t, |x, _| Ok(x.to_vec()), 1000, 41).unwrap();
        assert_eq!(est.numerator, 0.0);
        assert_eq!(est.ratio, 0.0);
    }

    #[test]
    fn tv_gap_of_stationary_batches_is_small() {
        let d = 20;
        let t = Target::isotropic_gaussian(d, 1.0).unwrap();
        let set = WitnessSet::OmegaLarge { d };
        let mut s = stream(43);
        let a = t.sample_stationary(20_000, &mut s).unwrap();
        let b = t.sample_stationary(20_000, &mut s).unwrap();
        let gap = tv_witness_gap(&a, &b, &set).unwrap();
        assert!(gap <= 0.02, "stationary-vs-stationary gap {gap}");
    }

    #[test]
    fn tv_gap_of_frozen_chain_is_large() {
        // The shell's stationary mass crosses 0.99 around d = 270; at
        // d = 300 a chain frozen at the origin certifies a TV gap ~ 0.99.
        let d = 300;
        let t = Target::isotropic_gaussian(d, 1.0).unwrap();
        let set = WitnessSet::OmegaLarge { d };
        let mut s = stream(47);
        let stationary = t.sample_stationary(20_000, &mut s).unwrap();
        let frozen = vec![vec![0.0; d]; 1000];
        let gap = tv_witness_gap(&frozen, &stationary, &set).unwrap();
        assert!(gap >= 0.97, "frozen-chain gap {gap}");
    }

    #[test]
    fn scan_rejects_empty_grid() {
        assert!(acceptance_scan(&[], 10, 1).is_err());
    }

    #[test]
    fn scan_single_point_row() {
        let d = 10;
        let t = Target::isotropic_gaussian(d, 1.0).unwrap();
        let points = vec![ScanPoint {
            label: "toy".into(),
            kernel: KernelSpec::Mala { h: 1e-3 },
            target: t,
            start: WitnessSet::SmallBall { d },
        }];
        let rows = acceptance_scan(&points, 500, 53).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.n, 500);
        assert!(
            row.accept_rate > 0.9,
            "tiny h should accept, got {}",
            row.accept_rate
        );
        assert!(row.gap_est <= 10.0 * (1e-3 + 1e-6));
    }
}
