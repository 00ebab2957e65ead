//! Nested pipeline for parametric p-boxes: expected-improvement optimization
//! over the distribution-parameter box drives conditional reliability
//! analyses, all of which recycle one growing experimental design of
//! true-model evaluations.
//!
//! The first conditional analysis pays for most of the design; later ones
//! warm-start from the shared store and typically converge after zero or a
//! handful of new calls, because conditional populations overlap heavily.

use crate::akmcs::{run_akmcs, AkmcsConfig, AkmcsError, AkmcsResult};
use crate::dist::Distribution;
use crate::ego::{
    run_direction, run_joint, Direction, EgoConfig, EgoError, EgoMode, EgoRunResult, PfEval,
};
use crate::kriging::ExperimentalDesign;
use crate::limit_state::LimitState;
use crate::pbox::{PBoxError, PBoxVariable};
use crate::sampling::{substream, InputModel, PfEstimate};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamIsraError {
    #[error("problem has {vars} variables but the evaluator expects {dim}")]
    DimensionMismatch { vars: usize, dim: usize },
    #[error("parametric pipeline requires at least one parametric variable")]
    NoParametricVariable,
    #[error(transparent)]
    Akmcs(#[from] AkmcsError),
    #[error(transparent)]
    PBox(#[from] PBoxError),
    #[error(transparent)]
    Ego(#[from] EgoError),
}

/// How one scalar of a variable's parameter vector is produced from the
/// global optimization point.
#[derive(Debug, Clone, Copy)]
enum ParamSource {
    Global(usize),
    Fixed(f64),
}

/// Maps the global theta vector (one component per non-degenerate interval)
/// onto per-variable `(param1, param2)` vectors.
#[derive(Debug, Clone)]
pub struct ThetaLayout {
    per_var: Vec<Option<[ParamSource; 2]>>,
    bounds: Vec<(f64, f64)>,
}

impl ThetaLayout {
    pub fn build(variables: &[PBoxVariable]) -> Result<Self, ParamIsraError> {
        let mut per_var = Vec::with_capacity(variables.len());
        let mut bounds = Vec::new();
        for v in variables {
            match v {
                PBoxVariable::Parametric(p) => {
                    let mut sources = [ParamSource::Fixed(0.0), ParamSource::Fixed(0.0)];
                    for (k, &(lo, hi)) in p.theta_box().iter().enumerate() {
                        sources[k] = if hi > lo {
                            bounds.push((lo, hi));
                            ParamSource::Global(bounds.len() - 1)
                        } else {
                            ParamSource::Fixed(lo)
                        };
                    }
                    per_var.push(Some(sources));
                }
                _ => per_var.push(None),
            }
        }
        if per_var.iter().all(|s| s.is_none()) {
            return Err(ParamIsraError::NoParametricVariable);
        }
        Ok(Self { per_var, bounds })
    }

    /// The global optimization box (empty when every interval is a point).
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Expands a global point into the per-variable full parameter vectors
    /// and builds the conditional input model.
    pub fn conditional_input(
        &self,
        variables: &[PBoxVariable],
        theta: &[f64],
    ) -> Result<InputModel, PBoxError> {
        let mut dists: Vec<Distribution> = Vec::with_capacity(variables.len());
        for (v, sources) in variables.iter().zip(&self.per_var) {
            match (v, sources) {
                (PBoxVariable::Parametric(p), Some(sources)) => {
                    let full: Vec<f64> = sources
                        .iter()
                        .map(|s| match *s {
                            ParamSource::Global(i) => theta[i],
                            ParamSource::Fixed(v) => v,
                        })
                        .collect();
                    dists.push(p.conditional(&full)?);
                }
                (PBoxVariable::Precise(d), _) => dists.push(d.clone()),
                (PBoxVariable::Free(_), _) => {
                    return Err(PBoxError::UnsupportedVariant {
                        op: "conditional_input",
                        variant: "free",
                    })
                }
                (PBoxVariable::Parametric(_), None) => unreachable!("layout covers parametrics"),
            }
        }
        Ok(InputModel::precise(dists))
    }
}

/// Append-only store of true-model evaluations shared across conditional
/// analyses. Every point is evaluated exactly once.
#[derive(Debug)]
pub struct SharedDesignStore {
    ed: ExperimentalDesign,
    n_calls: u64,
}

impl SharedDesignStore {
    pub fn new(dim: usize) -> Self {
        Self { ed: ExperimentalDesign::new(dim), n_calls: 0 }
    }

    pub fn len(&self) -> usize {
        self.ed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ed.is_empty()
    }

    pub fn n_calls(&self) -> u64 {
        self.n_calls
    }

    pub fn design(&self) -> &ExperimentalDesign {
        &self.ed
    }

    fn warm(&self) -> Option<&ExperimentalDesign> {
        if self.ed.is_empty() {
            None
        } else {
            Some(&self.ed)
        }
    }

    /// Absorbs the new evaluations of a finished conditional run (everything
    /// past its warm-start prefix).
    fn absorb(&mut self, result: &AkmcsResult) {
        for i in result.warm_len..result.ed.len() {
            self.ed
                .push(result.ed.row(i), result.ed.response(i))
                .expect("store rows mirror a valid design");
        }
        self.n_calls += result.n_new_calls;
    }
}

/// Conditional failure-probability estimate.
#[derive(Debug, Clone, Copy)]
pub struct CondPf {
    pub estimate: PfEstimate,
    pub converged: bool,
    pub n_new_calls: u64,
}

/// One conditional evaluation as seen by the optimizer, with the cumulative
/// true-model budget after it.
#[derive(Debug, Clone)]
pub struct CondEvalRecord {
    pub theta: Vec<f64>,
    pub estimate: PfEstimate,
    pub converged: bool,
    pub n1_after: u64,
}

pub struct ParamIsraProblem<'a> {
    pub g: &'a dyn LimitState,
    pub variables: &'a [PBoxVariable],
    pub akmcs: AkmcsConfig,
    pub ego: EgoConfig,
}

/// Estimates `P(G(X_theta) <= 0)` by an adaptive analysis warm-started from
/// the shared store; new true-model calls are appended to the store.
///
/// The Monte Carlo pool uses common random numbers: one uniform stream,
/// shared by every theta and pushed through the conditional quantiles. The
/// optimizer then compares conditional probabilities with the resampling
/// noise cancelled, so ties at insensitive parameters resolve by the true
/// distributional effect (and the conditional populations overlap heavily,
/// which is what makes the design recycling effective).
pub fn conditional_pf(
    theta: &[f64],
    store: &mut SharedDesignStore,
    problem: &ParamIsraProblem,
    layout: &ThetaLayout,
    seed: u64,
) -> Result<CondPf, ParamIsraError> {
    let input = layout.conditional_input(problem.variables, theta)?;
    let cond_seed = substream(seed, "conditional", 0);
    let result = run_akmcs(problem.g, &input, &problem.akmcs, cond_seed, store.warm())?;
    store.absorb(&result);
    Ok(CondPf {
        estimate: result.pf,
        converged: result.converged,
        n_new_calls: result.n_new_calls,
    })
}

/// Interval bounds with the diagnostics of both optimization runs.
#[derive(Debug)]
pub struct ParamIsraResult {
    pub pf_lower: f64,
    pub pf_upper: f64,
    pub est_lower: PfEstimate,
    pub est_upper: PfEstimate,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    pub ego_lower: EgoRunResult,
    pub ego_upper: EgoRunResult,
    /// True-model calls: per bound run and the reported headline figure
    /// (the maximum across runs in Separate mode; runs share nothing).
    pub n1_lower: u64,
    pub n1_upper: u64,
    pub n1: u64,
    pub n2_lower: usize,
    pub n2_upper: usize,
    pub converged: bool,
    /// Conditional evaluations in call order (shared between bounds in
    /// Joint mode).
    pub log_lower: Vec<CondEvalRecord>,
    pub log_upper: Vec<CondEvalRecord>,
}

type EvalLog = Vec<CondEvalRecord>;

fn find_estimate(log: &EvalLog, theta: &[f64]) -> PfEstimate {
    log.iter()
        .find(|r| r.theta.as_slice() == theta)
        .map(|r| r.estimate)
        .expect("optimum theta was evaluated")
}

/// Runs the nested analysis per the configured optimization mode.
pub fn run_param_isra(problem: &ParamIsraProblem, seed: u64) -> Result<ParamIsraResult, ParamIsraError> {
    let m = problem.variables.len();
    if problem.g.dim() != m {
        return Err(ParamIsraError::DimensionMismatch { vars: m, dim: problem.g.dim() });
    }
    let layout = ThetaLayout::build(problem.variables)?;
    let mut ego_cfg = problem.ego.clone();
    ego_cfg.pf_floor = 1.0 / problem.akmcs.pool_size as f64;

    if layout.bounds().is_empty() {
        // point box: both bounds collapse onto the single conditional value
        let mut store = SharedDesignStore::new(m);
        let cond = conditional_pf(&[], &mut store, problem, &layout, seed)?;
        let run = EgoRunResult {
            best_pf: cond.estimate.pf,
            best_theta: vec![],
            t: vec![vec![]],
            p: vec![cond.estimate.pf],
            inner_converged: vec![cond.converged],
            history: vec![],
            converged: cond.converged,
        };
        let n1 = store.n_calls();
        let record = CondEvalRecord {
            theta: vec![],
            estimate: cond.estimate,
            converged: cond.converged,
            n1_after: n1,
        };
        return Ok(ParamIsraResult {
            pf_lower: cond.estimate.pf,
            pf_upper: cond.estimate.pf,
            est_lower: cond.estimate,
            est_upper: cond.estimate,
            theta_lower: vec![],
            theta_upper: vec![],
            ego_lower: run_clone(&run),
            ego_upper: run,
            n1_lower: n1,
            n1_upper: n1,
            n1,
            n2_lower: 1,
            n2_upper: 1,
            converged: cond.converged,
            log_lower: vec![record.clone()],
            log_upper: vec![record],
        });
    }

    match ego_cfg.mode {
        EgoMode::Separate => {
            // independent runs: separate stores, separate designs, nothing
            // shared between the two optimizations
            let run_one = |direction: Direction| -> Result<(EgoRunResult, u64, EvalLog), ParamIsraError> {
                let mut store = SharedDesignStore::new(m);
                let mut log: EvalLog = Vec::new();
                let ego = {
                    let mut eval = |theta: &[f64]| -> Result<PfEval, crate::ego::EvalError> {
                        let cond = conditional_pf(theta, &mut store, problem, &layout, seed)
                            .map_err(Box::new)?;
                        log.push(CondEvalRecord {
                            theta: theta.to_vec(),
                            estimate: cond.estimate,
                            converged: cond.converged,
                            n1_after: store.n_calls(),
                        });
                        Ok(PfEval { pf: cond.estimate.pf, converged: cond.converged })
                    };
                    run_direction(&mut eval, layout.bounds(), &ego_cfg, seed, direction)?
                };
                Ok((ego, store.n_calls(), log))
            };
            let (ego_lower, n1_lower, log_lower) = run_one(Direction::Min)?;
            let (ego_upper, n1_upper, log_upper) = run_one(Direction::Max)?;
            let est_lower = find_estimate(&log_lower, &ego_lower.best_theta);
            let est_upper = find_estimate(&log_upper, &ego_upper.best_theta);
            let converged = ego_lower.converged && ego_upper.converged;
            Ok(ParamIsraResult {
                pf_lower: ego_lower.best_pf,
                pf_upper: ego_upper.best_pf,
                est_lower,
                est_upper,
                theta_lower: ego_lower.best_theta.clone(),
                theta_upper: ego_upper.best_theta.clone(),
                n1: n1_lower.max(n1_upper),
                n1_lower,
                n1_upper,
                n2_lower: ego_lower.n_evals(),
                n2_upper: ego_upper.n_evals(),
                ego_lower,
                ego_upper,
                converged,
                log_lower,
                log_upper,
            })
        }
        EgoMode::Joint => {
            let mut store = SharedDesignStore::new(m);
            let mut log: EvalLog = Vec::new();
            let (ego_lower, ego_upper) = {
                let mut eval = |theta: &[f64]| -> Result<PfEval, crate::ego::EvalError> {
                    let cond = conditional_pf(theta, &mut store, problem, &layout, seed)
                        .map_err(Box::new)?;
                    log.push(CondEvalRecord {
                        theta: theta.to_vec(),
                        estimate: cond.estimate,
                        converged: cond.converged,
                        n1_after: store.n_calls(),
                    });
                    Ok(PfEval { pf: cond.estimate.pf, converged: cond.converged })
                };
                run_joint(&mut eval, layout.bounds(), &ego_cfg, seed)?
            };
            let est_lower = find_estimate(&log, &ego_lower.best_theta);
            let est_upper = find_estimate(&log, &ego_upper.best_theta);
            let n1 = store.n_calls();
            let converged = ego_lower.converged && ego_upper.converged;
            Ok(ParamIsraResult {
                pf_lower: ego_lower.best_pf,
                pf_upper: ego_upper.best_pf,
                est_lower,
                est_upper,
                theta_lower: ego_lower.best_theta.clone(),
                theta_upper: ego_upper.best_theta.clone(),
                n1,
                n1_lower: n1,
                n1_upper: n1,
                n2_lower: ego_lower.n_evals(),
                n2_upper: ego_upper.n_evals(),
                ego_lower,
                ego_upper,
                converged,
                log_lower: log.clone(),
                log_upper: log,
            })
        }
    }
}

fn run_clone(r: &EgoRunResult) -> EgoRunResult {
    EgoRunResult {
        best_pf: r.best_pf,
        best_theta: r.best_theta.clone(),
        t: r.t.clone(),
        p: r.p.clone(),
        inner_converged: r.inner_converged.clone(),
        history: r.history.clone(),
        converged: r.converged,
    }
}
