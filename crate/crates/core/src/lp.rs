//! Projection-based solver for the strict system
//! `y(x) (<x, h> + d) > 0` for all `x` in a constraint set, plus its
//! lattice-discretized variant.
//!
//! Each progress step projects the origin onto the segment between the
//! current `(h, d)` and the augmented point of the most violated constraint.
//! The potential `|(h, d)|^-2` grows by at least `|y(x)(x, 1)|^-2 >= 1/2`
//! per step while it stays below `4 / gamma^2` on any linearly
//! gamma-separable input, so the norm dropping under `gamma / 2` certifies
//! that no gamma-separating halfspace exists.

use serde::{Deserialize, Serialize};

use crate::dual::{projection_alpha, DualState, LabeledPoint, Sample};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Constraint caches are rebuilt from the Gram matrix this often.
const RESYNC_EVERY: usize = 32;

/// Relative slack for the per-step reciprocal-Pythagorean check.
const GAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// A state strictly satisfying every constraint.
    Feasible(DualState),
    /// The norm fell under the certification threshold.
    NotGammaSeparable,
    /// The progress-step cap was exceeded.
    InternalOverflow { iterations: usize },
}

impl LpOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            LpOutcome::Feasible(_) => "feasible",
            LpOutcome::NotGammaSeparable => "not_gamma_separable",
            LpOutcome::InternalOverflow { .. } => "internal_overflow",
        }
    }

    pub fn state(&self) -> Option<&DualState> {
        match self {
            LpOutcome::Feasible(s) => Some(s),
            _ => None,
        }
    }
}

/// Per-solve counters. Only the first four fields are part of the JSON
/// record; the rest are diagnostics for tests and tree telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpTelemetry {
    pub iterations: usize,
    pub progress_steps: usize,
    pub final_norm: f64,
    pub outcome: String,
    /// Smallest norm of any non-empty iterate, including the final one.
    #[serde(skip)]
    pub min_norm: f64,
    /// Smallest potential increase over the progress steps (`inf` if none).
    #[serde(skip)]
    pub min_potential_gain: f64,
    /// Progress steps whose gain fell short of `|y(x)(x, 1)|^-2`.
    #[serde(skip)]
    pub gain_shortfalls: usize,
}

impl LpTelemetry {
    fn new() -> Self {
        LpTelemetry {
            iterations: 0,
            progress_steps: 0,
            final_norm: 0.0,
            outcome: String::new(),
            min_norm: f64::INFINITY,
            min_potential_gain: f64::INFINITY,
            gain_shortfalls: 0,
        }
    }

    fn observe(&mut self, state: &DualState) {
        self.min_norm = self.min_norm.min(state.norm());
    }
}

#[derive(Debug, Clone)]
pub struct LpRun {
    pub outcome: LpOutcome,
    pub telemetry: LpTelemetry,
}

impl LpRun {
    fn finish(outcome: LpOutcome, mut telemetry: LpTelemetry, final_norm: f64) -> LpRun {
        telemetry.final_norm = final_norm;
        telemetry.outcome = outcome.label().to_string();
        LpRun { outcome, telemetry }
    }
}

/// Hard cap on progress steps of the exact solver: `ceil(8 / gamma^2)`.
pub fn exact_step_cap(gamma: f64) -> usize {
    (8.0 / (gamma * gamma)).ceil() as usize
}

/// Hard cap on progress steps of the discretized solver: the potential stays
/// below `16 / gamma^2` (abort at `gamma / 4`) and grows by `1/8` per step.
pub fn discretized_step_cap(gamma: f64) -> usize {
    (128.0 / (gamma * gamma)).ceil() as usize
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Input(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// Margins of `constraints` under `state`, evaluated exactly.
fn exact_margins(state: &DualState, sample: &Sample, constraints: &[usize]) -> Vec<f64> {
    constraints.iter().map(|&c| state.inner_with_atom(sample, c)).collect()
}

/// Position of the minimum margin; ties go to the earliest (lowest-index)
/// constraint since `constraints` is sorted.
fn most_violated(margins: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (k, &m) in margins.iter().enumerate().skip(1) {
        if m < margins[best] {
            best = k;
        }
    }
    (best, margins[best])
}

fn sorted_constraints(sample: &Sample, constraints: &[usize]) -> Result<Vec<usize>> {
    if constraints.is_empty() {
        return Err(Error::Input("empty constraint set".into()));
    }
    let mut c = constraints.to_vec();
    c.sort_unstable();
    c.dedup();
    if *c.last().unwrap() >= sample.len() {
        return Err(Error::Contract("constraint index outside the sample".into()));
    }
    Ok(c)
}

fn check_compatible(start: &DualState, allowed: impl Fn(usize) -> bool) -> Result<()> {
    if let Some(e) = start.support().iter().find(|e| !allowed(e.index)) {
        return Err(Error::Contract(format!("start state uses point {} outside the constraint set", e.index)));
    }
    Ok(())
}

/// Solves the system over all points of `sample` starting from `start`.
pub fn lp_solve_all(sample: &Sample, start: &DualState, gamma: f64) -> Result<LpRun> {
    let all: Vec<usize> = (0..sample.len()).collect();
    lp_solve(sample, &all, start, gamma)
}

/// Exact solver over the constraint subset `constraints` of `sample`.
///
/// `start` must be empty or a convex combination of atoms in `constraints`.
/// Returns `Feasible` only for states that satisfy every constraint strictly
/// (a margin of exactly zero counts as violated).
pub fn lp_solve(sample: &Sample, constraints: &[usize], start: &DualState, gamma: f64) -> Result<LpRun> {
    check_gamma(gamma)?;
    let constraints = sorted_constraints(sample, constraints)?;
    check_compatible(start, |i| constraints.binary_search(&i).is_ok())?;

    let half = gamma / 2.0;
    let cap = exact_step_cap(gamma);
    let mut tel = LpTelemetry::new();

    let mut state = start.clone();
    if state.is_empty() {
        state = DualState::vertex(sample, constraints[0]);
        tel.iterations += 1;
    }
    tel.observe(&state);
    let mut margins = exact_margins(&state, sample, &constraints);
    let mut since_sync = 0;

    loop {
        let (mut pos, mut worst) = most_violated(&margins);
        if worst > 0.0 && since_sync > 0 {
            margins = exact_margins(&state, sample, &constraints);
            since_sync = 0;
            (pos, worst) = most_violated(&margins);
        }
        if worst > 0.0 {
            debug_assert!(state.norm_drift(sample) < 1e-7);
            let norm = state.norm();
            return Ok(LpRun::finish(LpOutcome::Feasible(state), tel, norm));
        }
        if state.norm() < half {
            let norm = state.norm();
            return Ok(LpRun::finish(LpOutcome::NotGammaSeparable, tel, norm));
        }
        if tel.progress_steps >= cap {
            let norm = state.norm();
            let iterations = tel.iterations;
            return Ok(LpRun::finish(LpOutcome::InternalOverflow { iterations }, tel, norm));
        }

        let p = constraints[pos];
        let inner = state.inner_with_atom(sample, p);
        let before = crate::dual::potential(&state);
        let (next, alpha) = crate::dual::project_with_inner(&state, sample, p, inner);
        state = next;
        tel.iterations += 1;
        tel.progress_steps += 1;
        tel.observe(&state);

        let gain = crate::dual::potential(&state) - before;
        tel.min_potential_gain = tel.min_potential_gain.min(gain);
        let required = 1.0 / sample.augmented_sq_norm(p);
        if crate::dual::potential(&state) < (before + required) * (1.0 - GAIN_SLACK) {
            tel.gain_shortfalls += 1;
        }

        if state.norm() < half {
            let norm = state.norm();
            return Ok(LpRun::finish(LpOutcome::NotGammaSeparable, tel, norm));
        }

        since_sync += 1;
        if since_sync >= RESYNC_EVERY {
            margins = exact_margins(&state, sample, &constraints);
            since_sync = 0;
        } else {
            let beta = 1.0 - alpha;
            for (m, &c) in margins.iter_mut().zip(&constraints) {
                *m = alpha * *m + beta * sample.augmented_inner(p, c);
            }
        }
    }
}

/// Parameters of the lattice discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub gamma: f64,
    pub dim: usize,
    pub lipschitz: f64,
    pub beta: f64,
}

impl DiscretizationConfig {
    pub fn new(gamma: f64, dim: usize, lipschitz: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if dim == 0 {
            return Err(Error::Input("dimension must be >= 1".into()));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::Input(format!("Lipschitz bound must be positive, got {lipschitz}")));
        }
        Ok(DiscretizationConfig { gamma, dim, lipschitz, beta: lattice_step(gamma, dim, lipschitz) })
    }
}

/// Lattice step `min{gamma^2 / sqrt(544), gamma / (2 sqrt(s) L)}`.
///
/// The first term keeps the rounding loss of a progress step below
/// `gamma^2 / 136`, which leaves a potential gain of at least `1/8`; the
/// second keeps rounded feature vectors within `gamma / 2` of the originals.
pub fn lattice_step(gamma: f64, dim: usize, lipschitz: f64) -> f64 {
    let progress = gamma * gamma / (4.0f64 * 8.0 * 17.0).sqrt();
    let closeness = gamma / (2.0 * (dim as f64).sqrt() * lipschitz);
    progress.min(closeness)
}

/// Nearest point of the lattice `beta * Z^s`.
pub fn lattice_round(omega: &[f64], beta: f64) -> Vec<f64> {
    omega.iter().map(|&w| beta * (w / beta).round()).collect()
}

/// The sample augmented with the ball-projected lattice images of its points.
///
/// Atom `i < n` is original point `i`; atom `n + i` is
/// `proj_B(phi(round(omega_i)))`, carried as `round(omega_i)` with feature
/// multiplier `mu = min(1, K(w, w)^-1/2)` and the label of point `i`.
#[derive(Debug, Clone)]
pub struct DiscretizedSample {
    sample: Sample,
    n: usize,
}

impl DiscretizedSample {
    pub fn new(kernel: KernelSpec, points: Vec<LabeledPoint>, cfg: &DiscretizationConfig) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Input("empty sample".into()));
        }
        let mut atoms = points.clone();
        let mut scales = vec![1.0; n];
        for p in &points {
            crate::error::check_dim(cfg.dim, p.encoding.len())?;
            let lattice = lattice_round(&p.encoding, cfg.beta);
            let k = kernel.eval(&lattice, &lattice);
            let mu = if k > 1.0 { (1.0 / k.sqrt()).min(1.0) } else { 1.0 };
            atoms.push(LabeledPoint::new(lattice, p.label));
            scales.push(mu);
        }
        let sample = Sample::with_scales(kernel, atoms, scales)?;
        Ok(DiscretizedSample { sample, n })
    }

    /// Number of original points.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    /// Atom index of the rounded image of original point `i`.
    pub fn rounded_atom(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn lattice_point(&self, i: usize) -> &[f64] {
        &self.sample.point(self.n + i).encoding
    }

    pub fn ball_scale(&self, i: usize) -> f64 {
        self.sample.scale(self.n + i)
    }
}

/// Convenience wrapper: discretize `points` and solve from the empty state.
pub fn lp_solve_discretized_points(
    points: Vec<LabeledPoint>,
    cfg: &DiscretizationConfig,
    kernel: KernelSpec,
) -> Result<(DiscretizedSample, LpRun)> {
    let ds = DiscretizedSample::new(kernel, points, cfg)?;
    let run = lp_solve_discretized(&ds, &DualState::empty(), cfg)?;
    Ok((ds, run))
}

/// Discretized solver.
///
/// Constraints are the original points; every progress step projects onto
/// the segment towards the rounded image of the violated point, with the
/// coefficient of the old state rounded down to the lattice `beta * Z`.
/// The solver aborts with `NotGammaSeparable` once the exact projection has
/// norm at most `gamma / 4` (the rounded sample is then not
/// `gamma/2`-separable, hence the original is not `gamma`-separable).
pub fn lp_solve_discretized(ds: &DiscretizedSample, start: &DualState, cfg: &DiscretizationConfig) -> Result<LpRun> {
    check_gamma(cfg.gamma)?;
    let sample = &ds.sample;
    let n = ds.n;
    check_compatible(start, |i| i >= n && i < 2 * n)?;

    let quarter = cfg.gamma / 4.0;
    let beta = cfg.beta;
    let cap = discretized_step_cap(cfg.gamma);
    let constraints: Vec<usize> = (0..n).collect();
    let mut tel = LpTelemetry::new();

    let mut state = start.clone();
    if state.is_empty() {
        state = DualState::vertex(sample, ds.rounded_atom(0));
        tel.iterations += 1;
    }
    tel.observe(&state);
    let mut margins = exact_margins(&state, sample, &constraints);
    let mut since_sync = 0;

    loop {
        let (mut pos, mut worst) = most_violated(&margins);
        if worst > 0.0 && since_sync > 0 {
            margins = exact_margins(&state, sample, &constraints);
            since_sync = 0;
            (pos, worst) = most_violated(&margins);
        }
        if worst > 0.0 {
            debug_assert!(state.norm_drift(sample) < 1e-7);
            let norm = state.norm();
            return Ok(LpRun::finish(LpOutcome::Feasible(state), tel, norm));
        }
        if state.norm() <= quarter {
            let norm = state.norm();
            return Ok(LpRun::finish(LpOutcome::NotGammaSeparable, tel, norm));
        }
        if tel.progress_steps >= cap {
            let norm = state.norm();
            let iterations = tel.iterations;
            return Ok(LpRun::finish(LpOutcome::InternalOverflow { iterations }, tel, norm));
        }

        let b = ds.rounded_atom(constraints[pos]);
        let inner = state.inner_with_atom(sample, b);
        let a_sq = state.norm_sq();
        let b_sq = sample.augmented_sq_norm(b);
        let alpha = projection_alpha(a_sq, b_sq, inner).unwrap_or(1.0);
        let hat_sq = alpha * alpha * a_sq + 2.0 * alpha * (1.0 - alpha) * inner + (1.0 - alpha) * (1.0 - alpha) * b_sq;
        if hat_sq.max(0.0).sqrt() <= quarter {
            return Ok(LpRun::finish(LpOutcome::NotGammaSeparable, tel, hat_sq.max(0.0).sqrt()));
        }

        let rounded = beta * (alpha / beta).floor();
        debug_assert!((0.0..=alpha).contains(&rounded));
        let before = crate::dual::potential(&state);
        state = state.convex_step(sample, b, rounded, inner);
        tel.iterations += 1;
        tel.progress_steps += 1;
        tel.observe(&state);
        let gain = crate::dual::potential(&state) - before;
        tel.min_potential_gain = tel.min_potential_gain.min(gain);

        since_sync += 1;
        if since_sync >= RESYNC_EVERY {
            margins = exact_margins(&state, sample, &constraints);
            since_sync = 0;
        } else {
            let keep = 1.0 - rounded;
            for (m, &c) in margins.iter_mut().zip(&constraints) {
                *m = rounded * *m + keep * sample.augmented_inner(b, c);
            }
        }
    }
}
