//! Adaptive Kriging Monte Carlo simulation: enrich an experimental design at
//! the pool point most likely to be misclassified until the failure
//! probability bracket `[pf-, pf+]` stabilizes relative to the estimate.
//!
//! The Monte Carlo pool is drawn once per run and held fixed: the bracket
//! criterion compares classifications of one population across refits.

use crate::dist::std_normal_cdf;
use crate::kriging::{ExperimentalDesign, KrigingError, KrigingModel};
use crate::limit_state::{LimitState, LimitStateError};
use crate::sampling::{substream, InputModel, PfEstimate, SampleSet, SamplingError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AkmcsError {
    #[error("invalid AK-MCS configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error(transparent)]
    LimitState(#[from] LimitStateError),
}

/// Tuning of one adaptive run.
#[derive(Debug, Clone)]
pub struct AkmcsConfig {
    /// Size of the initial experimental design (ignored when a warm-start
    /// design with at least 2 points is supplied).
    pub n_initial: usize,
    /// Monte Carlo pool size.
    pub pool_size: usize,
    /// Confidence multiplier on the predictive standard deviation.
    pub k: f64,
    /// Relative bracket tolerance `(pf+ - pf-)/pf`.
    pub eps_pf: f64,
    /// Cap on enrichment points added per run.
    pub max_added: usize,
}

impl Default for AkmcsConfig {
    fn default() -> Self {
        Self { n_initial: 12, pool_size: 1_000_000, k: 2.0, eps_pf: 0.05, max_added: 200 }
    }
}

impl AkmcsConfig {
    pub fn validate(&self) -> Result<(), AkmcsError> {
        if self.n_initial < 2 {
            return Err(AkmcsError::InvalidConfig(format!(
                "n_initial must be at least 2, got {}",
                self.n_initial
            )));
        }
        if self.pool_size < 100 {
            return Err(AkmcsError::InvalidConfig(format!(
                "pool_size must be at least 100, got {}",
                self.pool_size
            )));
        }
        if !(self.k > 0.0) {
            return Err(AkmcsError::InvalidConfig(format!("k must be positive, got {}", self.k)));
        }
        if !(self.eps_pf > 0.0 && self.eps_pf < 1.0) {
            return Err(AkmcsError::InvalidConfig(format!(
                "eps_pf must lie in (0, 1), got {}",
                self.eps_pf
            )));
        }
        Ok(())
    }
}

/// Why the adaptive loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Bracket tolerance met (the convergence criterion).
    BracketTolerance,
    /// Largest misclassification probability fell below the floor with a
    /// stable nonzero estimate: the surrogate separates the pool.
    MisclassificationFloor,
    /// The surrogate classifies the whole pool as safe and no candidate has
    /// meaningful misclassification probability.
    PoolSeparatedAtZero,
    /// Iteration cap reached.
    MaxAddedReached,
}

/// One enrichment iteration: design size, estimates and the chosen point
/// (absent on the terminating entry).
#[derive(Debug, Clone)]
pub struct AkmcsIteration {
    pub n: usize,
    pub pf: f64,
    pub pf_plus: f64,
    pub pf_minus: f64,
    pub chosen: Option<Vec<f64>>,
}

#[derive(Debug)]
pub struct AkmcsResult {
    pub model: KrigingModel,
    pub pf: PfEstimate,
    pub pf_plus: f64,
    pub pf_minus: f64,
    pub history: Vec<AkmcsIteration>,
    pub converged: bool,
    pub stop: StopReason,
    /// True-model evaluations performed by this run (warm-start points are
    /// reused, never re-evaluated).
    pub n_new_calls: u64,
    /// Final experimental design (warm-start points first, in order).
    pub ed: ExperimentalDesign,
    /// How many leading rows of `ed` came from the warm start.
    pub warm_len: usize,
}

/// Probability that the surrogate misclassifies the sign at a point with
/// predictive mean and standard deviation. In `[0, 0.5]`.
pub fn misclassification_prob(mean: f64, sd: f64) -> f64 {
    debug_assert!(sd >= 0.0);
    if sd <= 0.0 {
        if mean == 0.0 {
            0.5
        } else {
            0.0
        }
    } else {
        std_normal_cdf(-mean.abs() / sd)
    }
}

/// Candidate P_m floor: below it the surrogate already separates the pool.
const PM_FLOOR: f64 = 1e-12;
/// Enrichment candidates closer than this (standardized) to an existing
/// design point are rejected to keep the correlation matrix nonsingular.
const DUP_GUARD: f64 = 1e-9;

/// Runs the adaptive loop. `g` must be deterministic; `input` supplies both
/// the Monte Carlo pool and the quantile transform for the initial design.
pub fn run_akmcs(
    g: &dyn LimitState,
    input: &InputModel,
    cfg: &AkmcsConfig,
    seed: u64,
    warm_start: Option<&ExperimentalDesign>,
) -> Result<AkmcsResult, AkmcsError> {
    cfg.validate()?;
    let m = input.dim();
    let pool: SampleSet = input.draw(cfg.pool_size, substream(seed, "akmcs-pool", 0))?;

    let mut n_new_calls: u64 = 0;
    let mut ed = ExperimentalDesign::new(m);
    let mut warm_len = 0;
    if let Some(w) = warm_start {
        for i in 0..w.len() {
            ed.push(w.row(i), w.response(i))?;
        }
        warm_len = w.len();
    }
    if ed.len() < 2 {
        let init = input.lhs_physical(cfg.n_initial, substream(seed, "akmcs-init", 0))?;
        for row in init.rows() {
            let y = g.eval(row)?;
            n_new_calls += 1;
            ed.push(row, y)?;
        }
    }

    let n_pool = pool.len();
    let mut mean = vec![0.0; n_pool];
    let mut var = vec![0.0; n_pool];
    let mut history: Vec<AkmcsIteration> = Vec::new();
    let mut prev_rho: Option<Vec<f64>> = None;
    let mut prev_pf: Option<f64> = None;
    let mut added = 0usize;

    loop {
        let model = KrigingModel::fit_warm(&ed, prev_rho.as_deref())?;
        prev_rho = Some(model.rho.clone());
        model.predict_into(pool.as_slice(), &mut mean, &mut var);

        let mut n_fail = 0usize;
        let mut n_plus = 0usize;
        let mut n_minus = 0usize;
        for i in 0..n_pool {
            let sd = var[i].sqrt();
            if mean[i] <= 0.0 {
                n_fail += 1;
            }
            if mean[i] - cfg.k * sd <= 0.0 {
                n_plus += 1;
            }
            if mean[i] + cfg.k * sd <= 0.0 {
                n_minus += 1;
            }
        }
        let pf = n_fail as f64 / n_pool as f64;
        let pf_plus = n_plus as f64 / n_pool as f64;
        let pf_minus = n_minus as f64 / n_pool as f64;

        let mut entry = AkmcsIteration { n: ed.len(), pf, pf_plus, pf_minus, chosen: None };

        // Eq.-style bracket criterion, only defined for a nonzero estimate.
        if pf > 0.0 && (pf_plus - pf_minus) / pf <= cfg.eps_pf {
            history.push(entry);
            return Ok(finish(
                model, pf, n_fail, n_pool, pf_plus, pf_minus, history, true,
                StopReason::BracketTolerance, n_new_calls, ed, warm_len,
            ));
        }

        // Best candidate by misclassification probability; ties keep the
        // lowest pool index, near-duplicates of design points are skipped.
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n_pool {
            let pm = misclassification_prob(mean[i], var[i].sqrt());
            if best.is_none_or(|(bp, _)| pm > bp) {
                if model.min_standardized_distance(pool.row(i)) < DUP_GUARD {
                    continue;
                }
                best = Some((pm, i));
            }
        }

        let (max_pm, chosen_idx) = match best {
            Some(b) => b,
            None => {
                history.push(entry);
                let stop = if pf == 0.0 {
                    StopReason::PoolSeparatedAtZero
                } else {
                    StopReason::MisclassificationFloor
                };
                let conv = stop == StopReason::MisclassificationFloor;
                return Ok(finish(
                    model, pf, n_fail, n_pool, pf_plus, pf_minus, history, conv, stop,
                    n_new_calls, ed, warm_len,
                ));
            }
        };

        if max_pm < PM_FLOOR {
            if pf == 0.0 {
                history.push(entry);
                return Ok(finish(
                    model, pf, n_fail, n_pool, pf_plus, pf_minus, history, false,
                    StopReason::PoolSeparatedAtZero, n_new_calls, ed, warm_len,
                ));
            }
            if prev_pf == Some(pf) {
                history.push(entry);
                return Ok(finish(
                    model, pf, n_fail, n_pool, pf_plus, pf_minus, history, true,
                    StopReason::MisclassificationFloor, n_new_calls, ed, warm_len,
                ));
            }
        }

        if added >= cfg.max_added {
            history.push(entry);
            return Ok(finish(
                model, pf, n_fail, n_pool, pf_plus, pf_minus, history, false,
                StopReason::MaxAddedReached, n_new_calls, ed, warm_len,
            ));
        }

        let point = pool.row(chosen_idx).to_vec();
        let y = g.eval(&point)?;
        n_new_calls += 1;
        ed.push(&point, y)?;
        added += 1;
        prev_pf = Some(pf);
        entry.chosen = Some(point);
        history.push(entry);
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: KrigingModel,
    pf: f64,
    n_fail: usize,
    n_pool: usize,
    pf_plus: f64,
    pf_minus: f64,
    history: Vec<AkmcsIteration>,
    converged: bool,
    stop: StopReason,
    n_new_calls: u64,
    ed: ExperimentalDesign,
    warm_len: usize,
) -> AkmcsResult {
    debug_assert!(pf_minus <= pf && pf <= pf_plus);
    let pf_est = PfEstimate::from_counts(n_fail, n_pool).expect("nonempty pool");
    debug_assert_eq!(pf_est.pf, pf);
    AkmcsResult {
        model,
        pf: pf_est,
        pf_plus,
        pf_minus,
        history,
        converged,
        stop,
        n_new_calls,
        ed,
        warm_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{std_normal_quantile, Distribution};
    use crate::limit_state::FnLimitState;

    fn std_normal_input() -> InputModel {
        InputModel::precise(vec![Distribution::gaussian(0.0, 1.0).unwrap()])
    }

    #[test]
    fn misclassification_reference_values() {
        assert_eq!(misclassification_prob(0.0, 1.0), 0.5);
        let p = misclassification_prob(2.0, 1.0);
        assert!((p - std_normal_cdf(-2.0)).abs() < 1e-15);
        assert!((p - 0.02275).abs() < 1e-5);
        assert_eq!(misclassification_prob(1.0, 0.0), 0.0);
        assert_eq!(misclassification_prob(-3.0, 1.0), misclassification_prob(3.0, 1.0));
    }

    #[test]
    fn linear_gaussian_recovers_analytic_pf() {
        let threshold = std_normal_quantile(1e-2);
        let g = FnLimitState::new(1, move |x| Ok(x[0] - threshold));
        let cfg = AkmcsConfig { n_initial: 8, pool_size: 200_000, ..Default::default() };
        let res = run_akmcs(&g, &std_normal_input(), &cfg, 42, None).unwrap();
        assert!(res.converged, "stopped with {:?}", res.stop);
        let cov = res.pf.cov.unwrap();
        assert!(
            (res.pf.pf - 1e-2).abs() <= 3.0 * cov * 1e-2,
            "pf {} vs analytic 1e-2 (cov {cov})",
            res.pf.pf
        );
        for it in &res.history {
            assert!(it.pf_minus <= it.pf && it.pf <= it.pf_plus);
        }
        // interpolation of the final design
        for i in 0..res.ed.len() {
            let (mu, _) = res.model.predict_one(res.ed.row(i)).unwrap();
            assert!((mu - res.ed.response(i)).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_responses_terminate_immediately() {
        let safe = FnLimitState::new(1, |_| Ok(5.0));
        let cfg = AkmcsConfig { n_initial: 4, pool_size: 1000, ..Default::default() };
        let res = run_akmcs(&safe, &std_normal_input(), &cfg, 7, None).unwrap();
        assert_eq!(res.pf.pf, 0.0);
        assert!(!res.converged);
        assert_eq!(res.stop, StopReason::PoolSeparatedAtZero);
        assert_eq!(res.n_new_calls, 4);

        let failed = FnLimitState::new(1, |_| Ok(-1.0));
        let res = run_akmcs(&failed, &std_normal_input(), &cfg, 7, None).unwrap();
        assert_eq!(res.pf.pf, 1.0);
        assert!(res.converged);
        assert_eq!(res.stop, StopReason::BracketTolerance);
    }

    #[test]
    fn warm_start_absorbs_previous_design() {
        let threshold = std_normal_quantile(5e-2);
        let g = FnLimitState::new(1, move |x| Ok(x[0] - threshold));
        let cfg = AkmcsConfig { n_initial: 6, pool_size: 50_000, ..Default::default() };
        let first = run_akmcs(&g, &std_normal_input(), &cfg, 3, None).unwrap();
        assert!(first.converged);
        let second = run_akmcs(&g, &std_normal_input(), &cfg, 3, Some(&first.ed)).unwrap();
        assert_eq!(second.n_new_calls, 0, "warm start re-evaluated the model");
        assert_eq!(second.pf.pf, first.pf.pf);
        assert_eq!(second.warm_len, first.ed.len());
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let g = FnLimitState::new(1, |x| Ok(x[0] - 1.3));
        let cfg = AkmcsConfig {
            n_initial: 3,
            pool_size: 10_000,
            eps_pf: 1e-6,
            max_added: 1,
            ..Default::default()
        };
        let res = run_akmcs(&g, &std_normal_input(), &cfg, 11, None).unwrap();
        if !res.converged {
            assert_eq!(res.stop, StopReason::MaxAddedReached);
            assert!(res.history.len() <= 2 + 1);
        }
    }

    #[test]
    fn config_validation() {
        let bad = AkmcsConfig { eps_pf: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AkmcsConfig { n_initial: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AkmcsConfig { k: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
