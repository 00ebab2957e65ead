//! Efficient global optimization over a distribution-parameter box: a
//! Kriging surrogate of the conditional failure probability guides
//! expected-improvement proposals toward the minimizer and maximizer.
//!
//! The surrogate is fitted on log10 of the (floored) failure probabilities by
//! default: conditional probabilities span orders of magnitude and Gaussian
//! residuals behave far better in log space. The acquisition and its
//! stopping threshold stay on the raw probability scale — the predictive
//! distribution is lognormal there, and the improvement expectation has a
//! closed form. An absolute threshold like `eps_ei = 1e-5` is meaningful for
//! probabilities, not for their logarithms.

use crate::dist::{std_normal_cdf, std_normal_pdf};
use crate::kriging::{ExperimentalDesign, KrigingError, KrigingModel};
use crate::sampling::{lhs, substream};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EgoError {
    #[error("invalid EGO configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error("conditional evaluator failed at theta={theta:?}: {message}")]
    Evaluator { theta: Vec<f64>, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoMode {
    Separate,
    Joint,
}

/// Response transform for the theta-space surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfTransform {
    Log10,
    Raw,
}

#[derive(Debug, Clone)]
pub struct EgoConfig {
    /// Initial design size over the parameter box.
    pub n_initial: usize,
    /// Stopping threshold on the expected improvement (raw probability
    /// scale).
    pub eps_ei: f64,
    pub mode: EgoMode,
    /// Cap on added proposals per direction run (per run in Separate mode,
    /// total additions in Joint mode).
    pub max_added: usize,
    pub pf_transform: PfTransform,
    /// Floor applied to probabilities before the log transform (match it to
    /// the reciprocal Monte Carlo pool size).
    pub pf_floor: f64,
}

impl Default for EgoConfig {
    fn default() -> Self {
        Self {
            n_initial: 4,
            eps_ei: 1e-5,
            mode: EgoMode::Separate,
            max_added: 100,
            pf_transform: PfTransform::Log10,
            pf_floor: 1e-12,
        }
    }
}

impl EgoConfig {
    pub fn validate(&self) -> Result<(), EgoError> {
        if self.n_initial < 2 {
            return Err(EgoError::InvalidConfig(format!(
                "n_initial must be at least 2, got {}",
                self.n_initial
            )));
        }
        if !(self.eps_ei > 0.0) {
            return Err(EgoError::InvalidConfig(format!(
                "eps_ei must be positive, got {}",
                self.eps_ei
            )));
        }
        if !(self.pf_floor > 0.0) {
            return Err(EgoError::InvalidConfig(format!(
                "pf_floor must be positive, got {}",
                self.pf_floor
            )));
        }
        Ok(())
    }
}

/// One conditional failure-probability evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PfEval {
    pub pf: f64,
    /// Whether the inner analysis converged; unconverged estimates still
    /// enter the design but are recorded.
    pub converged: bool,
}

pub type EvalError = Box<dyn std::error::Error + Send + Sync>;

/// Expected improvement below the incumbent minimum for a Gaussian
/// prediction `(mu, sd)`.
pub fn expected_improvement_min(mu: f64, sd: f64, p_min: f64) -> f64 {
    if sd <= 0.0 {
        return (p_min - mu).max(0.0);
    }
    let z = (p_min - mu) / sd;
    ((p_min - mu) * std_normal_cdf(z) + sd * std_normal_pdf(z)).max(0.0)
}

/// Expected improvement above the incumbent maximum; the algebraic mirror of
/// [`expected_improvement_min`] under `mu -> -mu`, `p -> -p`.
pub fn expected_improvement_max(mu: f64, sd: f64, p_max: f64) -> f64 {
    if sd <= 0.0 {
        return (mu - p_max).max(0.0);
    }
    let z = (mu - p_max) / sd;
    ((mu - p_max) * std_normal_cdf(z) + sd * std_normal_pdf(z)).max(0.0)
}

const LN10: f64 = std::f64::consts::LN_10;

/// Raw-scale expected improvement when the surrogate predicts log10(pf):
/// the predictive distribution of pf is lognormal and the improvement
/// expectation has the usual closed form.
fn lognormal_ei(mu_log10: f64, sd_log10: f64, incumbent: f64, direction: Direction) -> f64 {
    let a = mu_log10 * LN10;
    let b = sd_log10 * LN10;
    let k = incumbent;
    if b <= 1e-12 {
        let point = a.exp();
        return match direction {
            Direction::Min => (k - point).max(0.0),
            Direction::Max => (point - k).max(0.0),
        };
    }
    let d = (k.ln() - a) / b;
    let mean = (a + 0.5 * b * b).exp();
    let ei = match direction {
        Direction::Min => k * std_normal_cdf(d) - mean * std_normal_cdf(d - b),
        Direction::Max => mean * std_normal_cdf(b - d) - k * std_normal_cdf(-d),
    };
    ei.max(0.0)
}

/// Design state of one EGO run: evaluated parameter points, their raw
/// conditional failure probabilities and the surrogate over theta-space.
pub struct EgoState {
    pub t: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub inner_converged: Vec<bool>,
    pub surrogate: KrigingModel,
    transform: PfTransform,
    floor: f64,
}

impl EgoState {
    /// Fits the theta surrogate on the transformed responses.
    pub fn fit(
        t: &[Vec<f64>],
        p: &[f64],
        inner_converged: &[bool],
        cfg: &EgoConfig,
        warm_rho: Option<&[f64]>,
    ) -> Result<Self, EgoError> {
        let d = t.first().map(|v| v.len()).unwrap_or(0);
        let mut ed = ExperimentalDesign::new(d);
        for (theta, &pf) in t.iter().zip(p) {
            let y = match cfg.pf_transform {
                PfTransform::Log10 => pf.max(cfg.pf_floor).log10(),
                PfTransform::Raw => pf,
            };
            ed.push(theta, y)?;
        }
        let surrogate = KrigingModel::fit_warm(&ed, warm_rho)?;
        Ok(Self {
            t: t.to_vec(),
            p: p.to_vec(),
            inner_converged: inner_converged.to_vec(),
            surrogate,
            transform: cfg.pf_transform,
            floor: cfg.pf_floor,
        })
    }

    /// Incumbent raw value for a direction.
    pub fn incumbent(&self, direction: Direction) -> f64 {
        let it = self.p.iter().copied();
        match direction {
            Direction::Min => it.fold(f64::INFINITY, f64::min).max(self.floor),
            Direction::Max => it.fold(f64::NEG_INFINITY, f64::max).max(self.floor),
        }
    }

    /// Acquisition value (raw probability scale) at a parameter point.
    pub fn acquisition(&self, theta: &[f64], direction: Direction) -> f64 {
        let (mu, var) = self
            .surrogate
            .predict_one(theta)
            .expect("dimension fixed by the design");
        let sd = var.sqrt();
        let inc = self.incumbent(direction);
        match self.transform {
            PfTransform::Raw => match direction {
                Direction::Min => expected_improvement_min(mu, sd, inc),
                Direction::Max => expected_improvement_max(mu, sd, inc),
            },
            PfTransform::Log10 => lognormal_ei(mu, sd, inc, direction),
        }
    }

    fn too_close(&self, theta: &[f64], widths: &[f64]) -> bool {
        self.t.iter().any(|t| {
            t.iter()
                .zip(theta)
                .zip(widths)
                .map(|((a, b), w)| ((a - b) / w).powi(2))
                .sum::<f64>()
                .sqrt()
                < 1e-9
        })
    }
}

const FIRST_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn halton_point(index: u64, d: usize, bounds: &[(f64, f64)]) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let u = halton(index + 1, FIRST_PRIMES[k % FIRST_PRIMES.len()]);
            bounds[k].0 + u * (bounds[k].1 - bounds[k].0)
        })
        .collect()
}

const SCAN_POINTS: u64 = 512;
const POLISH_TOP: usize = 5;
const MAX_FULL_CORNERS: u32 = 12;

/// Proposes the next parameter point: the acquisition is scanned over the
/// box corners (all of them in low dimension, otherwise the two synchronized
/// ones), the center and a quasi-random Halton set, then the best candidates
/// are polished by projected coordinate ascent. Ties keep the
/// earliest-scanned candidate; points indistinguishable from already
/// evaluated ones are excluded.
pub fn propose_next(
    state: &EgoState,
    bounds: &[(f64, f64)],
    direction: Direction,
) -> (Vec<f64>, f64) {
    let d = bounds.len();
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo).max(1e-300)).collect();

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if (d as u32) <= MAX_FULL_CORNERS {
        for mask in 0..(1usize << d) {
            candidates.push(
                bounds
                    .iter()
                    .enumerate()
                    .map(|(k, &(lo, hi))| if mask >> k & 1 == 0 { lo } else { hi })
                    .collect(),
            );
        }
    } else {
        candidates.push(bounds.iter().map(|&(lo, _)| lo).collect());
        candidates.push(bounds.iter().map(|&(_, hi)| hi).collect());
    }
    candidates.push(bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect());
    for i in 0..SCAN_POINTS {
        candidates.push(halton_point(i, d, bounds));
    }

    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        if state.too_close(c, &widths) {
            continue;
        }
        scored.push((i, state.acquisition(c, direction)));
    }
    // order preserved for ties: stable selection of the best few
    let mut top: Vec<(usize, f64)> = Vec::new();
    for &(i, v) in &scored {
        if top.len() < POLISH_TOP {
            top.push((i, v));
            top.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        } else if v > top.last().unwrap().1 {
            top.pop();
            top.push((i, v));
            top.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        }
    }

    let mut best_point: Option<Vec<f64>> = None;
    let mut best_val = f64::NEG_INFINITY;
    for &(i, v0) in &top {
        let mut point = candidates[i].clone();
        let mut value = v0;
        for _ in 0..2 {
            let before = value;
            for k in 0..d {
                if widths[k] <= 1e-300 {
                    continue;
                }
                let (xk, fx) = golden_max(
                    |t| {
                        let mut q = point.clone();
                        q[k] = t;
                        if state.too_close(&q, &widths) {
                            f64::NEG_INFINITY
                        } else {
                            state.acquisition(&q, direction)
                        }
                    },
                    bounds[k].0,
                    bounds[k].1,
                    16,
                );
                if fx > value {
                    point[k] = xk;
                    value = fx;
                }
            }
            if value - before <= 1e-14 {
                break;
            }
        }
        if value > best_val {
            best_val = value;
            best_point = Some(point);
        }
    }

    match best_point {
        Some(p) => (p, best_val.max(0.0)),
        // every candidate duplicated an evaluated point: the box is
        // exhausted, report zero improvement at the first corner
        None => (candidates[0].clone(), 0.0),
    }
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One proposal/evaluation record.
#[derive(Debug, Clone)]
pub struct EgoIteration {
    pub direction: Direction,
    pub theta: Vec<f64>,
    pub ei: f64,
    /// Evaluated conditional pf when the proposal was added to the design.
    pub pf: Option<f64>,
}

/// Outcome of one optimization direction.
#[derive(Debug)]
pub struct EgoRunResult {
    pub best_pf: f64,
    pub best_theta: Vec<f64>,
    pub t: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub inner_converged: Vec<bool>,
    pub history: Vec<EgoIteration>,
    pub converged: bool,
}

impl EgoRunResult {
    pub fn n_evals(&self) -> usize {
        self.t.len()
    }
}

fn eval_at(
    eval: &mut dyn FnMut(&[f64]) -> Result<PfEval, EvalError>,
    theta: &[f64],
) -> Result<PfEval, EgoError> {
    eval(theta).map_err(|e| EgoError::Evaluator { theta: theta.to_vec(), message: e.to_string() })
}

fn initial_design(
    eval: &mut dyn FnMut(&[f64]) -> Result<PfEval, EvalError>,
    bounds: &[(f64, f64)],
    n: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<bool>), EgoError> {
    let d = bounds.len();
    let design = lhs(n, d, seed)
        .map_err(|e| EgoError::InvalidConfig(format!("initial design: {e}")))?;
    let mut t = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for row in design.rows() {
        let theta: Vec<f64> = row
            .iter()
            .zip(bounds)
            .map(|(u, &(lo, hi))| lo + u * (hi - lo))
            .collect();
        let r = eval_at(eval, &theta)?;
        t.push(theta);
        p.push(r.pf);
        flags.push(r.converged);
    }
    Ok((t, p, flags))
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<(), EgoError> {
    if bounds.is_empty() {
        return Err(EgoError::InvalidConfig("empty parameter box".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(EgoError::InvalidConfig(format!(
                "degenerate or invalid interval [{lo}, {hi}] in parameter box"
            )));
        }
    }
    Ok(())
}

/// Optimizes one direction to the expected-improvement stopping criterion.
pub fn run_direction(
    eval: &mut dyn FnMut(&[f64]) -> Result<PfEval, EvalError>,
    bounds: &[(f64, f64)],
    cfg: &EgoConfig,
    seed: u64,
    direction: Direction,
) -> Result<EgoRunResult, EgoError> {
    cfg.validate()?;
    check_bounds(bounds)?;
    let label = match direction {
        Direction::Min => "ego-init-min",
        Direction::Max => "ego-init-max",
    };
    let (mut t, mut p, mut flags) =
        initial_design(eval, bounds, cfg.n_initial, substream(seed, label, 0))?;

    let mut history = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut converged = false;
    loop {
        let state = EgoState::fit(&t, &p, &flags, cfg, warm.as_deref())?;
        warm = Some(state.surrogate.rho.clone());
        let (theta_star, ei) = propose_next(&state, bounds, direction);
        history.push(EgoIteration { direction, theta: theta_star.clone(), ei, pf: None });
        if ei <= cfg.eps_ei {
            converged = true;
            break;
        }
        if t.len() - cfg.n_initial >= cfg.max_added {
            break;
        }
        let r = eval_at(eval, &theta_star)?;
        history.last_mut().unwrap().pf = Some(r.pf);
        t.push(theta_star);
        p.push(r.pf);
        flags.push(r.converged);
    }

    let (best_idx, best_pf) = match direction {
        Direction::Min => p
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, v)| (i, *v))
            .expect("nonempty design"),
        Direction::Max => p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, v)| (i, *v))
            .expect("nonempty design"),
    };
    Ok(EgoRunResult {
        best_pf,
        best_theta: t[best_idx].clone(),
        t,
        p,
        inner_converged: flags,
        history,
        converged,
    })
}

/// Joint optimization: one shared design serves both directions. While a
/// direction's criterion is unmet its proposal is added each iteration; once
/// met, that direction is latched and only the other keeps enriching.
pub fn run_joint(
    eval: &mut dyn FnMut(&[f64]) -> Result<PfEval, EvalError>,
    bounds: &[(f64, f64)],
    cfg: &EgoConfig,
    seed: u64,
) -> Result<(EgoRunResult, EgoRunResult), EgoError> {
    cfg.validate()?;
    check_bounds(bounds)?;
    let (mut t, mut p, mut flags) =
        initial_design(eval, bounds, cfg.n_initial, substream(seed, "ego-init-joint", 0))?;

    let mut history = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut min_done = false;
    let mut max_done = false;
    let mut added = 0usize;
    let mut capped = false;
    loop {
        let state = EgoState::fit(&t, &p, &flags, cfg, warm.as_deref())?;
        warm = Some(state.surrogate.rho.clone());

        let mut proposals: Vec<(Direction, Vec<f64>, f64)> = Vec::new();
        for (dir, done) in [(Direction::Min, min_done), (Direction::Max, max_done)] {
            if done {
                continue;
            }
            let (theta, ei) = propose_next(&state, bounds, dir);
            history.push(EgoIteration { direction: dir, theta: theta.clone(), ei, pf: None });
            if ei <= cfg.eps_ei {
                match dir {
                    Direction::Min => min_done = true,
                    Direction::Max => max_done = true,
                }
            } else {
                proposals.push((dir, theta, ei));
            }
        }
        if min_done && max_done {
            break;
        }
        if added >= cfg.max_added {
            capped = true;
            break;
        }
        for (dir, theta, _) in proposals {
            if t.iter().any(|q| q == &theta) {
                continue;
            }
            let r = eval_at(eval, &theta)?;
            for h in history.iter_mut().rev() {
                if h.direction == dir && h.pf.is_none() && h.theta == theta {
                    h.pf = Some(r.pf);
                    break;
                }
            }
            t.push(theta);
            p.push(r.pf);
            flags.push(r.converged);
            added += 1;
        }
    }

    let split = |direction: Direction| -> EgoRunResult {
        let (best_idx, best_pf) = match direction {
            Direction::Min => p
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, v)| (i, *v))
                .unwrap(),
            Direction::Max => p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, v)| (i, *v))
                .unwrap(),
        };
        EgoRunResult {
            best_pf,
            best_theta: t[best_idx].clone(),
            t: t.clone(),
            p: p.clone(),
            inner_converged: flags.clone(),
            history: history
                .iter()
                .filter(|h| h.direction == direction)
                .cloned()
                .collect(),
            converged: !capped,
        }
    };
    Ok((split(Direction::Min), split(Direction::Max)))
}

/// Runs the configured mode with a single evaluator: Separate performs two
/// independent optimizations (nothing shared between them), Joint one
/// simultaneous optimization.
pub fn run_ego(
    eval: &mut dyn FnMut(&[f64]) -> Result<PfEval, EvalError>,
    bounds: &[(f64, f64)],
    cfg: &EgoConfig,
    seed: u64,
) -> Result<(EgoRunResult, EgoRunResult), EgoError> {
    match cfg.mode {
        EgoMode::Separate => {
            let min = run_direction(eval, bounds, cfg, seed, Direction::Min)?;
            let max = run_direction(eval, bounds, cfg, seed, Direction::Max)?;
            Ok((min, max))
        }
        EgoMode::Joint => run_joint(eval, bounds, cfg, seed),
    }
}
