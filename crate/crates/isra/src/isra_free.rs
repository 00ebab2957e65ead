//! Two-level pipeline for free p-boxes: a first-level surrogate of the
//! limit-state function is trained on a condensed auxiliary input, converted
//! into lower/upper limit-states by box-constrained optimization of its
//! mean, and each failure-probability bound is estimated by an independent
//! second-level adaptive run.
//!
//! Level 2 never calls the true model: its "limit states" are optimizations
//! of the frozen level-1 surrogate over the interval boxes induced by each
//! CDF level.

use crate::akmcs::{run_akmcs, AkmcsConfig, AkmcsError, AkmcsResult};
use crate::dist::Distribution;
use crate::kriging::{KrigingError, KrigingModel};
use crate::limit_state::{CountingLimitState, LimitState, LimitStateError};
use crate::pbox::{PBoxError, PBoxVariable};
use crate::sampling::{substream, InputDist, InputModel, PfEstimate};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IsraFreeError {
    #[error("problem has {vars} variables but the evaluator expects {dim}")]
    DimensionMismatch { vars: usize, dim: usize },
    #[error("free pipeline cannot handle parametric variable at index {0}; use the parametric pipeline")]
    ParametricVariable(usize),
    #[error("level-1 analysis did not converge ({0} true-model calls spent)")]
    Level1Unconverged(u64),
    #[error(transparent)]
    Akmcs(#[from] AkmcsError),
    #[error(transparent)]
    PBox(#[from] PBoxError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
}

/// Space in which the second-level analyses run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Level2Space {
    /// The auxiliary physical variables mapped through the isoprobabilistic
    /// transform (suited to unbounded p-boxes).
    #[default]
    Auxiliary,
    /// Raw uniform coordinates on the unit hypercube.
    UnitC,
}

#[derive(Debug, Clone)]
pub struct FreeIsraConfig {
    /// Level-1 adaptive run (on the true model).
    pub level1: AkmcsConfig,
    /// Level-2 adaptive runs (one per bound, on the converted surrogates).
    pub level2: AkmcsConfig,
    pub level2_space: Level2Space,
}

pub struct FreeIsraProblem<'a> {
    pub g: &'a dyn LimitState,
    pub variables: &'a [PBoxVariable],
    /// Per-variable auxiliary distribution override; `None` falls back to the
    /// envelope-average condensation (precise variables are their own
    /// auxiliary input).
    pub aux_overrides: &'a [Option<Distribution>],
    pub cfg: FreeIsraConfig,
}

#[derive(Debug)]
pub struct FreeIsraResult {
    pub pf_lower: PfEstimate,
    pub pf_upper: PfEstimate,
    pub level1: AkmcsResult,
    pub level2_lower: AkmcsResult,
    pub level2_upper: AkmcsResult,
    /// True-model calls (all made by level 1).
    pub n1: u64,
    pub n2_lower: usize,
    pub n2_upper: usize,
    pub converged: bool,
}

/// Extrema of a function over an axis-aligned box, with their locations.
#[derive(Debug, Clone)]
pub struct BoxExtrema {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

const INTERIOR_PER_DIM: usize = 64;
const POLISH_BEST: usize = 3;
const MAX_FULL_CORNERS: u32 = 12;

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

/// Deterministic search for the extrema of `f` over a box: corner
/// enumeration (over non-degenerate dimensions), the center, a quasi-random
/// interior set, then projected coordinate descent from the best candidates
/// of each sign. For a function monotone in every coordinate the corner set
/// already contains both extrema exactly.
pub fn box_optimize_fn(f: &dyn Fn(&[f64]) -> f64, bounds: &[(f64, f64)]) -> BoxExtrema {
    let m = bounds.len();
    let free: Vec<usize> = (0..m).filter(|&k| bounds[k].1 > bounds[k].0).collect();
    let base: Vec<f64> = bounds.iter().map(|&(lo, _)| lo).collect();
    if free.is_empty() {
        let v = f(&base);
        return BoxExtrema { min: v, max: v, argmin: base.clone(), argmax: base };
    }

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if (free.len() as u32) <= MAX_FULL_CORNERS {
        for mask in 0..(1usize << free.len()) {
            let mut p = base.clone();
            for (bit, &k) in free.iter().enumerate() {
                p[k] = if mask >> bit & 1 == 0 { bounds[k].0 } else { bounds[k].1 };
            }
            candidates.push(p);
        }
    } else {
        candidates.push(base.clone());
        let mut hi = base.clone();
        for &k in &free {
            hi[k] = bounds[k].1;
        }
        candidates.push(hi);
    }
    let mut center = base.clone();
    for &k in &free {
        center[k] = 0.5 * (bounds[k].0 + bounds[k].1);
    }
    candidates.push(center);
    for i in 0..(INTERIOR_PER_DIM * m) as u64 {
        let mut p = base.clone();
        for (j, &k) in free.iter().enumerate() {
            let u = halton(i + 1, FIRST_PRIMES[j % FIRST_PRIMES.len()]);
            p[k] = bounds[k].0 + u * (bounds[k].1 - bounds[k].0);
        }
        candidates.push(p);
    }

    let values: Vec<f64> = candidates.iter().map(|p| f(p)).collect();

    let polish = |maximize: bool| -> (f64, Vec<f64>) {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (values[a], values[b]);
            if maximize {
                y.partial_cmp(&x).unwrap().then(a.cmp(&b))
            } else {
                x.partial_cmp(&y).unwrap().then(a.cmp(&b))
            }
        });
        let mut best_val = values[order[0]];
        let mut best_point = candidates[order[0]].clone();
        for &idx in order.iter().take(POLISH_BEST) {
            let mut point = candidates[idx].clone();
            let mut value = values[idx];
            for _ in 0..2 {
                let before = value;
                for &k in &free {
                    let (xk, fx) = golden_extremum(
                        |t| {
                            let mut q = point.clone();
                            q[k] = t;
                            f(&q)
                        },
                        bounds[k].0,
                        bounds[k].1,
                        20,
                        maximize,
                    );
                    let better = if maximize { fx > value } else { fx < value };
                    if better {
                        point[k] = xk;
                        value = fx;
                    }
                }
                if (value - before).abs() <= 1e-14 * value.abs().max(1.0) {
                    break;
                }
            }
            let better = if maximize { value > best_val } else { value < best_val };
            if better {
                best_val = value;
                best_point = point;
            }
        }
        (best_val, best_point)
    };

    let (max, argmax) = polish(true);
    let (min, argmin) = polish(false);
    BoxExtrema { min, max, argmin, argmax }
}

fn golden_extremum(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
    maximize: bool,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = sign * f(c);
    let mut fd = sign * f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = sign * f(d);
        }
    }
    if fc < fd {
        (c, sign * fc)
    } else {
        (d, sign * fd)
    }
}

/// Extrema of the surrogate mean over a box (no true-model calls).
pub fn box_optimize(model: &KrigingModel, bounds: &[(f64, f64)]) -> Result<BoxExtrema, KrigingError> {
    if bounds.len() != model.dim() {
        return Err(KrigingError::DimensionMismatch { expected: model.dim(), got: bounds.len() });
    }
    let f = |x: &[f64]| model.predict_mean_one(x).expect("dimension checked");
    Ok(box_optimize_fn(&f, bounds))
}

/// Which bound a converted limit-state evaluator serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    /// `G_upper(c) = max over the box` — drives the lower failure bound.
    UpperEnvelope,
    /// `G_lower(c) = min over the box` — drives the upper failure bound.
    LowerEnvelope,
}

/// Second-level limit state: maps a point to its CDF levels, builds the
/// per-variable interval box and optimizes the level-1 surrogate mean over
/// it. Pure; never touches the true model.
pub struct BoundEvaluator<'a> {
    model: &'a KrigingModel,
    variables: &'a [PBoxVariable],
    /// Transform from evaluator coordinates to CDF levels; `None` means the
    /// coordinates already are CDF levels.
    transform: Option<&'a InputModel>,
    side: BoundSide,
}

impl<'a> BoundEvaluator<'a> {
    pub fn new(
        model: &'a KrigingModel,
        variables: &'a [PBoxVariable],
        transform: Option<&'a InputModel>,
        side: BoundSide,
    ) -> Self {
        Self { model, variables, transform, side }
    }

    fn c_levels(&self, x: &[f64]) -> Result<Vec<f64>, LimitStateError> {
        let mut c = Vec::with_capacity(x.len());
        for (i, &xi) in x.iter().enumerate() {
            let ci = match self.transform {
                Some(model) => model.marginal(i).cdf(xi),
                None => xi,
            };
            if !(ci > 0.0 && ci < 1.0) {
                return Err(LimitStateError::Domain(format!(
                    "CDF level {ci} for component {i} outside (0, 1)"
                )));
            }
            c.push(ci);
        }
        Ok(c)
    }

    /// The interval box in physical space induced by the CDF levels.
    pub fn interval_box(&self, x: &[f64]) -> Result<Vec<(f64, f64)>, LimitStateError> {
        let c = self.c_levels(x)?;
        self.variables
            .iter()
            .zip(&c)
            .map(|(v, &ci)| {
                v.interval_from_c(ci)
                    .map_err(|e| LimitStateError::Domain(e.to_string()))
            })
            .collect()
    }
}

impl LimitState for BoundEvaluator<'_> {
    fn dim(&self) -> usize {
        self.variables.len()
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != self.variables.len() {
            return Err(LimitStateError::DimensionMismatch {
                expected: self.variables.len(),
                got: x.len(),
            });
        }
        let bounds = self.interval_box(x)?;
        let ext = box_optimize(self.model, &bounds)
            .map_err(|e| LimitStateError::Domain(e.to_string()))?;
        Ok(match self.side {
            BoundSide::UpperEnvelope => ext.max,
            BoundSide::LowerEnvelope => ext.min,
        })
    }
}

/// Builds both converted limit states from a frozen first-level surrogate:
/// the upper-envelope evaluator (box maximum, driving the lower failure
/// bound) and the lower-envelope one (box minimum, driving the upper bound).
pub fn lower_upper_limit_states<'a>(
    model: &'a KrigingModel,
    variables: &'a [PBoxVariable],
    transform: Option<&'a InputModel>,
) -> (BoundEvaluator<'a>, BoundEvaluator<'a>) {
    (
        BoundEvaluator::new(model, variables, transform, BoundSide::UpperEnvelope),
        BoundEvaluator::new(model, variables, transform, BoundSide::LowerEnvelope),
    )
}

/// Builds the auxiliary input model: overrides where given, otherwise the
/// envelope-average condensation; precise variables are their own auxiliary
/// distribution.
pub fn aux_input_model(
    variables: &[PBoxVariable],
    aux_overrides: &[Option<Distribution>],
) -> Result<InputModel, IsraFreeError> {
    let mut marginals = Vec::with_capacity(variables.len());
    for (i, v) in variables.iter().enumerate() {
        let override_i = aux_overrides.get(i).and_then(|o| o.clone());
        let dist = match (v, override_i) {
            (_, Some(d)) => InputDist::Parametric(d),
            (PBoxVariable::Precise(d), None) => InputDist::Parametric(d.clone()),
            (PBoxVariable::Free(f), None) => InputDist::Condensed(f.condense()),
            (PBoxVariable::Parametric(_), None) => {
                return Err(IsraFreeError::ParametricVariable(i))
            }
        };
        marginals.push(dist);
    }
    Ok(InputModel::new(marginals))
}

/// Runs the two-level analysis. Level 1 spends the only true-model calls;
/// each bound then comes from an independent second-level run on the
/// converted surrogate.
pub fn run_free_isra(p: &FreeIsraProblem, seed: u64) -> Result<FreeIsraResult, IsraFreeError> {
    let m = p.variables.len();
    if p.g.dim() != m {
        return Err(IsraFreeError::DimensionMismatch { vars: m, dim: p.g.dim() });
    }
    for (i, v) in p.variables.iter().enumerate() {
        if matches!(v, PBoxVariable::Parametric(_)) {
            return Err(IsraFreeError::ParametricVariable(i));
        }
    }

    let aux = aux_input_model(p.variables, p.aux_overrides)?;
    let counted = CountingLimitState::new(p.g);
    let level1 = run_akmcs(&counted, &aux, &p.cfg.level1, substream(seed, "level1", 0), None)?;
    let n1 = counted.calls();
    if !level1.converged {
        return Err(IsraFreeError::Level1Unconverged(n1));
    }

    let (level2_input, transform) = match p.cfg.level2_space {
        Level2Space::Auxiliary => (aux.clone(), Some(&aux)),
        Level2Space::UnitC => (InputModel::unit(m), None),
    };

    let g_upper = BoundEvaluator::new(&level1.model, p.variables, transform, BoundSide::UpperEnvelope);
    let level2_lower = run_akmcs(
        &g_upper,
        &level2_input,
        &p.cfg.level2,
        substream(seed, "level2-lower", 0),
        None,
    )?;
    let g_lower = BoundEvaluator::new(&level1.model, p.variables, transform, BoundSide::LowerEnvelope);
    let level2_upper = run_akmcs(
        &g_lower,
        &level2_input,
        &p.cfg.level2,
        substream(seed, "level2-upper", 0),
        None,
    )?;
    debug_assert_eq!(counted.calls(), n1, "level 2 must not touch the true model");

    let converged = level1.converged && level2_lower.converged && level2_upper.converged;
    Ok(FreeIsraResult {
        pf_lower: level2_lower.pf,
        pf_upper: level2_upper.pf,
        n1,
        n2_lower: level2_lower.ed.len(),
        n2_upper: level2_upper.ed.len(),
        level1,
        level2_lower,
        level2_upper,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::std_normal_quantile;
    use crate::limit_state::FnLimitState;
    use crate::pbox::FreePBox;

    fn toy_variables() -> Vec<PBoxVariable> {
        (0..2)
            .map(|_| {
                PBoxVariable::Free(
                    FreePBox::new(
                        Distribution::gaussian(2.5, 1.0).unwrap(),
                        Distribution::gaussian(1.5, 1.0).unwrap(),
                    )
                    .unwrap(),
                )
            })
            .collect()
    }

    fn toy_aux() -> Vec<Option<Distribution>> {
        vec![Some(Distribution::gaussian(2.0, 1.0).unwrap()); 2]
    }

    fn g_toy_fn() -> FnLimitState<impl Fn(&[f64]) -> Result<f64, LimitStateError> + Sync> {
        FnLimitState::new(2, |x| Ok(x[0] - x[1] * x[1]))
    }

    #[test]
    fn box_optimize_monotone_matches_corners() {
        let f = |x: &[f64]| 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2];
        let bounds = [(0.0, 1.0), (-1.0, 2.0), (5.0, 6.0)];
        let ext = box_optimize_fn(&f, &bounds);
        let mut corner_min = f64::INFINITY;
        let mut corner_max = f64::NEG_INFINITY;
        for mask in 0..8 {
            let p: Vec<f64> = (0..3)
                .map(|k| if mask >> k & 1 == 0 { bounds[k].0 } else { bounds[k].1 })
                .collect();
            corner_min = corner_min.min(f(&p));
            corner_max = corner_max.max(f(&p));
        }
        assert_eq!(ext.min, corner_min);
        assert_eq!(ext.max, corner_max);
    }

    #[test]
    fn box_optimize_toy_true_function() {
        let f = |x: &[f64]| x[0] - x[1] * x[1];
        let bounds = [(1.5, 2.5), (1.5, 2.5)];
        let ext = box_optimize_fn(&f, &bounds);
        assert!((ext.min - (1.5 - 2.5 * 2.5)).abs() < 1e-12, "min {}", ext.min);
        assert!((ext.max - (2.5 - 1.5 * 1.5)).abs() < 1e-12, "max {}", ext.max);
        assert!((ext.argmin[0] - 1.5).abs() < 1e-9 && (ext.argmin[1] - 2.5).abs() < 1e-9);
        assert!((ext.argmax[0] - 2.5).abs() < 1e-9 && (ext.argmax[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn box_optimize_interior_optimum() {
        // non-monotone in x2: interval straddles zero, interior minimum of x2^2
        let f = |x: &[f64]| x[0] - x[1] * x[1];
        let bounds = [(0.0, 0.0), (-0.5, 1.0)];
        let ext = box_optimize_fn(&f, &bounds);
        assert!((ext.max - 0.0).abs() < 1e-8, "interior max {}", ext.max);
        assert!((ext.min - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_box_returns_point_prediction() {
        let f = |x: &[f64]| x[0] * 2.0 + x[1];
        let ext = box_optimize_fn(&f, &[(1.0, 1.0), (3.0, 3.0)]);
        assert_eq!(ext.min, 5.0);
        assert_eq!(ext.max, 5.0);
    }

    #[test]
    fn bound_evaluators_order_and_domain() {
        // converged level-1 surrogate of the toy function
        let aux = aux_input_model(&toy_variables(), &toy_aux()).unwrap();
        let g = g_toy_fn();
        let cfg = AkmcsConfig { n_initial: 12, pool_size: 50_000, ..Default::default() };
        let level1 = run_akmcs(&g, &aux, &cfg, 5, None).unwrap();
        let vars = toy_variables();
        let upper = BoundEvaluator::new(&level1.model, &vars, Some(&aux), BoundSide::UpperEnvelope);
        let lower = BoundEvaluator::new(&level1.model, &vars, Some(&aux), BoundSide::LowerEnvelope);
        for point in [[2.0, 2.0], [1.2, 2.9], [2.8, 1.1]] {
            let up = upper.eval(&point).unwrap();
            let lo = lower.eval(&point).unwrap();
            assert!(up >= lo, "envelope order violated: {up} < {lo}");
        }
        // toy at c = (0.5, 0.5): boxes [1.5, 2.5]^2, true extrema (-4.75, 0.25)
        let up = upper.eval(&[2.0, 2.0]).unwrap();
        let lo = lower.eval(&[2.0, 2.0]).unwrap();
        assert!((up - 0.25).abs() < 0.3, "surrogate box max {up}");
        assert!((lo - (-4.75)).abs() < 0.8, "surrogate box min {lo}");
    }

    #[test]
    fn precise_only_problem_collapses() {
        let threshold = std_normal_quantile(2e-2);
        let g = FnLimitState::new(1, move |x: &[f64]| Ok(x[0] - threshold));
        let vars = vec![PBoxVariable::Precise(Distribution::gaussian(0.0, 1.0).unwrap())];
        let cfg = FreeIsraConfig {
            level1: AkmcsConfig { n_initial: 8, pool_size: 100_000, ..Default::default() },
            level2: AkmcsConfig { n_initial: 4, pool_size: 100_000, ..Default::default() },
            level2_space: Level2Space::Auxiliary,
        };
        let problem = FreeIsraProblem { g: &g, variables: &vars, aux_overrides: &[None], cfg };
        let res = run_free_isra(&problem, 17).unwrap();
        assert!(res.converged);
        // degenerate p-box: both bounds equal the plain estimate
        let plain = run_akmcs(
            &g,
            &InputModel::precise(vec![Distribution::gaussian(0.0, 1.0).unwrap()]),
            &AkmcsConfig { n_initial: 8, pool_size: 100_000, ..Default::default() },
            999,
            None,
        )
        .unwrap();
        let tol = 4.0 * plain.pf.std_error();
        assert!((res.pf_lower.pf - plain.pf.pf).abs() <= tol);
        assert!((res.pf_upper.pf - plain.pf.pf).abs() <= tol);
        assert!((res.pf_lower.pf - res.pf_upper.pf).abs() <= tol);
    }

    #[test]
    fn toy_free_pipeline_brackets_the_condensed_estimate() {
        let g = g_toy_fn();
        let vars = toy_variables();
        let aux = toy_aux();
        let cfg = FreeIsraConfig {
            level1: AkmcsConfig { n_initial: 12, pool_size: 200_000, ..Default::default() },
            level2: AkmcsConfig { n_initial: 4, pool_size: 200_000, ..Default::default() },
            level2_space: Level2Space::Auxiliary,
        };
        let problem = FreeIsraProblem { g: &g, variables: &vars, aux_overrides: &aux, cfg };
        let res = run_free_isra(&problem, 4).unwrap();
        let pf_tilde = res.level1.pf.pf;
        assert!(
            res.pf_lower.pf <= pf_tilde && pf_tilde <= res.pf_upper.pf,
            "bracket violated: {} / {pf_tilde} / {}",
            res.pf_lower.pf,
            res.pf_upper.pf
        );
        // double-loop Monte Carlo reference values for this problem:
        // P_tilde = 0.7242, bounds (0.4827, 0.8963)
        assert!((pf_tilde - 0.7242).abs() < 0.01, "condensed pf {pf_tilde}");
        assert!((res.pf_lower.pf - 0.4827).abs() < 0.015, "lower {}", res.pf_lower.pf);
        assert!((res.pf_upper.pf - 0.8963).abs() < 0.015, "upper {}", res.pf_upper.pf);
        // level 2 made zero true-model calls: N1 equals the level-1 design
        assert_eq!(res.n1 as usize, res.level1.ed.len());
        assert!(res.n1 < 40, "N1 blew up: {}", res.n1);
    }
}
