//! The MALA and K-step leapfrog HMC Markov kernels, and chain execution.
//!
//! Both kernels are Metropolis-adjusted: a proposal is drawn, the log
//! acceptance ratio is computed exactly, and the move is kept iff
//! `log u < min(0, log_accept)`. The test is always done in log space; the
//! regimes studied here routinely produce log-acceptances around `-1e3`,
//! which would silently flush to zero if exponentiated.
//!
//! MALA proposes `y = x - h grad f(x) + sqrt(2h) g` and accepts with the
//! ratio of forward and reverse Gaussian transition densities times the
//! density ratio. HMC draws a fresh velocity, runs `K` leapfrog steps of
//! size `eta`, and accepts on the Hamiltonian change; with `K = 1` and
//! `h = eta^2 / 2` it reproduces MALA draw for draw.
//!
//! A kernel step is a pure function of `(state, streams for that step)`, so
//! chains parallelize over trials without any shared state and a trace is
//! reproducible from `(master seed, trial)` alone.

use crate::rng::StepRng;
use crate::targets::Target;
use crate::{Error, Result};

/// Which kernel to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// MALA with step size `h`.
    Mala { h: f64 },
    /// Leapfrog HMC with step size `eta` and `k` leapfrog steps.
    Hmc { eta: f64, k: usize },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Mala { h } if h > 0.0 => Ok(()),
            KernelSpec::Mala { h } => Err(Error::Domain(format!(
                "MALA step size must be positive, got {h}"
            ))),
            KernelSpec::Hmc { eta, k } if eta > 0.0 && k >= 1 => Ok(()),
            KernelSpec::Hmc { eta, k } => Err(Error::Domain(format!(
                "HMC needs eta > 0 and K >= 1, got eta = {eta}, K = {k}"
            ))),
        }
    }

    /// Gradient evaluations one step of this kernel performs.
    pub fn grad_evals_per_step(&self) -> u64 {
        match *self {
            KernelSpec::Mala { .. } => 2,
            KernelSpec::Hmc { k, .. } => k as u64 + 1,
        }
    }

    /// One transition from `x`.
    pub fn step(&self, target: &Target, x: &[f64], rng: &mut StepRng) -> Result<TransitionRecord> {
        match *self {
            KernelSpec::Mala { h } => mala_step(target, x, h, rng),
            KernelSpec::Hmc { eta, k } => hmc_step(target, x, eta, k, rng, false),
        }
    }
}

/// The sub-iterates of one leapfrog integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Positions `x_0 ..= x_K`.
    pub positions: Vec<Vec<f64>>,
    /// Half-step velocities `v_{1/2} ..= v_{K - 1/2}`.
    pub half_velocities: Vec<Vec<f64>>,
    /// Full-step velocities `v_0 ..= v_K`.
    pub velocities: Vec<Vec<f64>>,
}

/// Everything one Metropolis transition did.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub start: Vec<f64>,
    /// The standard normal vector: proposal noise `g` (MALA) or `v_0` (HMC).
    pub noise: Vec<f64>,
    pub proposal: Vec<f64>,
    /// Leapfrog sub-iterates; stored only on request.
    pub trajectory: Option<Trajectory>,
    /// Unclamped log acceptance ratio.
    pub log_accept: f64,
    /// The uniform draw in (0, 1) used by the filter.
    pub uniform: f64,
    pub accepted: bool,
}

impl TransitionRecord {
    /// The chain state after the transition: the proposal if accepted,
    /// otherwise the start.
    pub fn next_state(&self) -> &[f64] {
        if self.accepted {
            &self.proposal
        } else {
            &self.start
        }
    }
}

fn check_finite(value: f64, context: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step: 0,
            context: context.into(),
        })
    }
}

fn filter(log_accept: f64, uniform: f64) -> bool {
    uniform.ln() < log_accept.min(0.0)
}

/// One MALA transition with the noise and uniform drawn from `rng`.
pub fn mala_step(target: &Target, x: &[f64], h: f64, rng: &mut StepRng) -> Result<TransitionRecord> {
    let g = rng.noise().gaussian_vec(x.len());
    let u = rng.accept().uniform_open();
    mala_step_given(target, x, h, g, u)
}

/// One MALA transition with the randomness supplied by the caller. This is
/// the deterministic core: the coupling tests and the oracle comparisons
/// feed it hand-picked draws.
pub fn mala_step_given(
    target: &Target,
    x: &[f64],
    h: f64,
    noise: Vec<f64>,
    uniform: f64,
) -> Result<TransitionRecord> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("MALA step size must be positive, got {h}")));
    }
    let d = target.dim();
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    let sqrt2h = (2.0 * h).sqrt();
    let grad_x = target.gradient(x);
    let proposal: Vec<f64> = x
        .iter()
        .zip(&grad_x)
        .zip(&noise)
        .map(|((&xi, &gi), &ni)| xi - h * gi + sqrt2h * ni)
        .collect();
    let f_x = target.potential(x);
    let f_y = target.potential(&proposal);
    check_finite(f_y, "potential at MALA proposal")?;
    let grad_y = target.gradient(&proposal);
    let mut forward = 0.0; // ||y - (x - h grad f(x))||^2
    let mut reverse = 0.0; // ||x - (y - h grad f(y))||^2
    for i in 0..d {
        let fwd = proposal[i] - (x[i] - h * grad_x[i]);
        let rev = x[i] - (proposal[i] - h * grad_y[i]);
        forward += fwd * fwd;
        reverse += rev * rev;
    }
    let log_accept = f_x - f_y + (forward - reverse) / (4.0 * h);
    check_finite(log_accept, "MALA log acceptance")?;
    let accepted = filter(log_accept, uniform);
    Ok(TransitionRecord {
        start: x.to_vec(),
        noise,
        proposal,
        trajectory: None,
        log_accept,
        uniform,
        accepted,
    })
}

/// `K` leapfrog steps of size `eta` from `(x0, v0)`, keeping every
/// sub-iterate.
pub fn leapfrog_trajectory(
    target: &Target,
    x0: &[f64],
    v0: &[f64],
    eta: f64,
    k: usize,
) -> Trajectory {
    let d = target.dim();
    debug_assert_eq!(x0.len(), d);
    debug_assert_eq!(v0.len(), d);
    let mut positions = Vec::with_capacity(k + 1);
    let mut half_velocities = Vec::with_capacity(k);
    let mut velocities = Vec::with_capacity(k + 1);
    positions.push(x0.to_vec());
    velocities.push(v0.to_vec());

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut grad = target.gradient(&x);
    for _ in 0..k {
        let half: Vec<f64> = v
            .iter()
            .zip(&grad)
            .map(|(&vi, &gi)| vi - 0.5 * eta * gi)
            .collect();
        for (xi, hi) in x.iter_mut().zip(&half) {
            *xi += eta * hi;
        }
        target.gradient_into(&x, &mut grad);
        v = half
            .iter()
            .zip(&grad)
            .map(|(&hi, &gi)| hi - 0.5 * eta * gi)
            .collect();
        half_velocities.push(half);
        positions.push(x.clone());
        velocities.push(v.clone());
    }
    Trajectory {
        positions,
        half_velocities,
        velocities,
    }
}

/// One HMC transition with randomness drawn from `rng`. Set
/// `keep_trajectory` to retain the sub-iterates in the record; the default
/// chain runner does not.
pub fn hmc_step(
    target: &Target,
    x: &[f64],
    eta: f64,
    k: usize,
    rng: &mut StepRng,
    keep_trajectory: bool,
) -> Result<TransitionRecord> {
    let v0 = rng.noise().gaussian_vec(x.len());
    let u = rng.accept().uniform_open();
    hmc_step_given(target, x, eta, k, v0, u, keep_trajectory)
}

/// One HMC transition with the randomness supplied by the caller.
pub fn hmc_step_given(
    target: &Target,
    x: &[f64],
    eta: f64,
    k: usize,
    v0: Vec<f64>,
    uniform: f64,
    keep_trajectory: bool,
) -> Result<TransitionRecord> {
    if !(eta > 0.0) || k == 0 {
        return Err(Error::Domain(format!(
            "HMC needs eta > 0 and K >= 1, got eta = {eta}, K = {k}"
        )));
    }
    let d = target.dim();
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    // Inline leapfrog, retaining sub-iterates only on request.
    let mut positions = keep_trajectory.then(|| vec![x.to_vec()]);
    let mut halves = keep_trajectory.then(Vec::new);
    let mut fulls = keep_trajectory.then(|| vec![v0.clone()]);

    let mut pos = x.to_vec();
    let mut vel = v0.clone();
    let mut grad = target.gradient(&pos);
    let mut half = vec![0.0; d];
    for _ in 0..k {
        for i in 0..d {
            half[i] = vel[i] - 0.5 * eta * grad[i];
            pos[i] += eta * half[i];
        }
        target.gradient_into(&pos, &mut grad);
        for i in 0..d {
            vel[i] = half[i] - 0.5 * eta * grad[i];
        }
        if let (Some(ps), Some(hs), Some(vs)) =
            (positions.as_mut(), halves.as_mut(), fulls.as_mut())
        {
            ps.push(pos.clone());
            hs.push(half.clone());
            vs.push(vel.clone());
        }
    }

    let kinetic = |v: &[f64]| 0.5 * v.iter().map(|vi| vi * vi).sum::<f64>();
    let h_start = target.potential(x) + kinetic(&v0);
    let h_end = target.potential(&pos) + kinetic(&vel);
    check_finite(h_end, "Hamiltonian at HMC proposal")?;
    let log_accept = h_start - h_end;
    check_finite(log_accept, "HMC log acceptance")?;
    let accepted = filter(log_accept, uniform);
    Ok(TransitionRecord {
        start: x.to_vec(),
        noise: v0,
        proposal: pos,
        trajectory: positions.map(|p| Trajectory {
            positions: p,
            half_velocities: halves.unwrap(),
            velocities: fulls.unwrap(),
        }),
        log_accept,
        uniform,
        accepted,
    })
}

/// What a chain run retains beyond its accumulators. The default keeps only
/// the start and the final state and no per-step records.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecordPolicy {
    /// Keep every `thin`-th state (1 = all states). 0 keeps only the start
    /// and the final state.
    pub thin: usize,
    /// Retain full per-step transition records.
    pub keep_records: bool,
}

/// Streaming per-coordinate mean and variance (Welford), mergeable across
/// trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    pub n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        RunningMoments {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per coordinate.
    pub fn variance(&self) -> Vec<f64> {
        if self.n == 0 {
            return vec![f64::NAN; self.mean.len()];
        }
        self.m2.iter().map(|m| m / self.n as f64).collect()
    }
}

/// The product of a chain run.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `(step, state)` snapshots per the record policy; always contains the
    /// start (step 0) and the final state (step T).
    pub states: Vec<(u64, Vec<f64>)>,
    /// Per-step acceptance flags, length T.
    pub accept_flags: Vec<bool>,
    /// Per-step unclamped log acceptance ratios, length T.
    pub log_accepts: Vec<f64>,
    /// `||x_t||^2` for t = 0..=T.
    pub norm_sq: Vec<f64>,
    /// Full transition records when requested.
    pub records: Option<Vec<TransitionRecord>>,
    /// Membership of `x_t` in the tracked witness set, t = 0..=T.
    pub witness_series: Option<Vec<bool>>,
    pub accepted: u64,
    pub steps: u64,
    /// Moments over all T+1 visited states.
    pub moments: RunningMoments,
    /// Witness hits over all T+1 visited states.
    pub witness_hits: Option<u64>,
}

impl Trace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.steps as f64
    }

    pub fn final_state(&self) -> &[f64] {
        &self.states.last().expect("trace always holds the final state").1
    }
}

/// Runs `t_steps` transitions of `kernel` from `x0`.
///
/// Randomness is addressed by `(seed, trial, step)`, step indices starting
/// at 1, so the trace is a pure function of those values: same seed, same
/// trace, bit for bit, on any thread count. `witness` is an optional
/// membership predicate evaluated at every visited state.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    kernel: &KernelSpec,
    target: &Target,
    x0: &[f64],
    t_steps: u64,
    seed: u64,
    trial: u64,
    policy: RecordPolicy,
    witness: Option<&(dyn Fn(&[f64]) -> bool + Sync)>,
) -> Result<Trace> {
    kernel.validate()?;
    if x0.len() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            context: "starting point".into(),
        });
    }

    let norm_sq_of = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut moments = RunningMoments::new(x0.len());
    moments.update(x0);
    let mut witness_hits = witness.map(|w| u64::from(w(x0)));
    let mut witness_series = witness.map(|w| {
        let mut s = Vec::with_capacity(t_steps as usize + 1);
        s.push(w(x0));
        s
    });

    let mut trace = Trace {
        states: vec![(0, x0.to_vec())],
        accept_flags: Vec::with_capacity(t_steps as usize),
        log_accepts: Vec::with_capacity(t_steps as usize),
        norm_sq: {
            let mut v = Vec::with_capacity(t_steps as usize + 1);
            v.push(norm_sq_of(x0));
            v
        },
        records: policy.keep_records.then(Vec::new),
        witness_series: None,
        accepted: 0,
        steps: t_steps,
        moments: RunningMoments::new(x0.len()),
        witness_hits: None,
    };

    let mut x = x0.to_vec();
    for step in 1..=t_steps {
        let mut rng = StepRng::new(seed, trial, step);
        let record = kernel.step(target, &x, &mut rng).map_err(|e| match e {
            Error::NonFinite { context, .. } => Error::NonFinite { step, context },
            other => other,
        })?;
        if record.accepted {
            x.copy_from_slice(&record.proposal);
            trace.accepted += 1;
        }
        trace.accept_flags.push(record.accepted);
        trace.log_accepts.push(record.log_accept);
        trace.norm_sq.push(norm_sq_of(&x));
        moments.update(&x);
        if let (Some(hits), Some(w)) = (witness_hits.as_mut(), witness) {
            let m = w(&x);
            *hits += u64::from(m);
            if let Some(series) = witness_series.as_mut() {
                series.push(m);
            }
        }
        let keep_state = match policy.thin {
            0 => step == t_steps,
            thin => step == t_steps || step % thin as u64 == 0,
        };
        if keep_state && step != trace.states.last().map_or(u64::MAX, |s| s.0) {
            trace.states.push((step, x.clone()));
        }
        if let Some(records) = trace.records.as_mut() {
            records.push(record);
        }
    }
    trace.moments = moments;
    trace.witness_hits = witness_hits;
    trace.witness_series = witness_series;
    Ok(trace)
}
