//! Built-in application problems: an analytical two-dimensional function, a
//! nonlinear undamped single-degree-of-freedom oscillator, a 23-bar planar
//! truss served by the embedded finite-element model, and a linear-Gaussian
//! problem with a closed-form failure probability.

pub mod truss;

use crate::dist::{Distribution, Family};
use crate::limit_state::{LimitState, LimitStateError};
use crate::pbox::{FreePBox, PBoxError, PBoxVariable, ParametricPBox};
use thiserror::Error;
use truss::{TrussError, TrussGeometry, TrussModel};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown builtin problem `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Truss(#[from] TrussError),
    #[error(transparent)]
    PBox(#[from] PBoxError),
}

/// `g(x) = x1 - x2^2`.
pub fn g_toy(x1: f64, x2: f64) -> f64 {
    x1 - x2 * x2
}

/// Nonlinear undamped SDOF oscillator: `g = 3r - |2 F1 / (m w0^2) * sin(w0 t1 / 2)|`
/// with `w0 = sqrt((k1 + k2)/m)`.
pub fn g_sdof(r: f64, f1: f64, t1: f64, k1: f64, k2: f64, m: f64) -> Result<f64, LimitStateError> {
    if m <= 0.0 {
        return Err(LimitStateError::Domain(format!("mass must be positive, got {m}")));
    }
    if k1 + k2 <= 0.0 {
        return Err(LimitStateError::Domain(format!(
            "total stiffness must be positive, got {}",
            k1 + k2
        )));
    }
    let w0 = ((k1 + k2) / m).sqrt();
    Ok(3.0 * r - (2.0 * f1 / (m * w0 * w0) * (w0 * t1 / 2.0).sin()).abs())
}

struct ToyFn;

impl LimitState for ToyFn {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != 2 {
            return Err(LimitStateError::DimensionMismatch { expected: 2, got: x.len() });
        }
        Ok(g_toy(x[0], x[1]))
    }
}

struct SdofFn;

impl LimitState for SdofFn {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != 6 {
            return Err(LimitStateError::DimensionMismatch { expected: 6, got: x.len() });
        }
        g_sdof(x[0], x[1], x[2], x[3], x[4], x[5])
    }
}

/// Truss limit state over loads in kN: `g(p) = 0.029 m - u4(p)`.
pub struct TrussFn {
    model: TrussModel,
}

impl TrussFn {
    pub fn new(model: TrussModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &TrussModel {
        &self.model
    }
}

impl LimitState for TrussFn {
    fn dim(&self) -> usize {
        self.model.influence.len()
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        let loads_n: Vec<f64> = x.iter().map(|p| p * 1e3).collect();
        let u4 = self
            .model
            .solve(&loads_n)
            .map_err(|e| LimitStateError::Domain(e.to_string()))?;
        Ok(DEFLECTION_LIMIT - u4)
    }
}

/// Midspan deflection threshold of the truss limit state (m).
pub const DEFLECTION_LIMIT: f64 = 0.029;

/// `g(x) = beta * sqrt(M) - sum(x_i)` with standard normal inputs:
/// `P(g <= 0) = Phi(-beta)` exactly.
struct LinearGaussianFn {
    beta: f64,
    dim: usize,
}

impl LimitState for LinearGaussianFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != self.dim {
            return Err(LimitStateError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.beta * (self.dim as f64).sqrt() - x.iter().sum::<f64>())
    }
}

/// Problem-specific defaults for the adaptive analyses (overridable from the
/// run configuration).
#[derive(Debug, Clone, Copy)]
pub struct ProblemDefaults {
    /// Initial design size of the first-level analysis.
    pub n1_initial: usize,
    /// Initial design size of the second-level adaptive runs (free mode).
    pub n2_akmcs_initial: usize,
    /// Initial design size of the parameter-space optimization.
    pub n2_ego_initial: usize,
}

/// A built-in benchmark: evaluator plus both input descriptions. The free
/// and parametric variants share identical envelope curves.
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub evaluator: Box<dyn LimitState + Send + Sync>,
    pub variables_free: Vec<PBoxVariable>,
    pub variables_param: Vec<PBoxVariable>,
    pub aux_overrides: Vec<Option<Distribution>>,
    pub defaults: ProblemDefaults,
}

const TRUSS_GEOMETRY: &str = include_str!("../../data/truss23.geom");

/// The embedded 23-bar truss geometry.
pub fn truss_geometry() -> TrussGeometry {
    TrussGeometry::parse(TRUSS_GEOMETRY).expect("embedded geometry parses")
}

/// Two-dimensional analytical function with Gaussian p-boxes.
pub fn toy() -> BenchmarkProblem {
    let free: Vec<PBoxVariable> = (0..2)
        .map(|_| {
            PBoxVariable::Free(
                FreePBox::new(
                    Distribution::gaussian(2.5, 1.0).unwrap(),
                    Distribution::gaussian(1.5, 1.0).unwrap(),
                )
                .unwrap(),
            )
        })
        .collect();
    let param: Vec<PBoxVariable> = (0..2)
        .map(|_| {
            PBoxVariable::Parametric(
                ParametricPBox::new(Family::Gaussian, vec![(1.5, 2.5), (1.0, 1.0)]).unwrap(),
            )
        })
        .collect();
    BenchmarkProblem {
        name: "toy",
        evaluator: Box::new(ToyFn),
        variables_free: free,
        variables_param: param,
        aux_overrides: vec![Some(Distribution::gaussian(2.0, 1.0).unwrap()); 2],
        defaults: ProblemDefaults { n1_initial: 12, n2_akmcs_initial: 4, n2_ego_initial: 4 },
    }
}

/// SDOF oscillator: three p-box inputs (yield displacement, force amplitude,
/// load duration) and three precise ones (stiffnesses, mass).
pub fn oscillator() -> BenchmarkProblem {
    let pbox_row = |lo: f64, hi: f64, sd: f64| -> (PBoxVariable, PBoxVariable) {
        let free = PBoxVariable::Free(
            FreePBox::new(
                Distribution::gaussian(hi, sd).unwrap(),
                Distribution::gaussian(lo, sd).unwrap(),
            )
            .unwrap(),
        );
        let param = PBoxVariable::Parametric(
            ParametricPBox::new(Family::Gaussian, vec![(lo, hi), (sd, sd)]).unwrap(),
        );
        (free, param)
    };
    let (r_free, r_param) = pbox_row(0.49, 0.51, 0.05);
    let (f1_free, f1_param) = pbox_row(-0.2, 0.2, 0.5);
    let (t1_free, t1_param) = pbox_row(0.95, 1.05, 0.2);
    let precise = [
        Distribution::gaussian(1.0, 0.1).unwrap(),
        Distribution::gaussian(0.1, 0.01).unwrap(),
        Distribution::gaussian(1.0, 0.05).unwrap(),
    ];
    let tail = |v: &[Distribution]| -> Vec<PBoxVariable> {
        v.iter().map(|d| PBoxVariable::Precise(d.clone())).collect()
    };
    let mut variables_free = vec![r_free, f1_free, t1_free];
    variables_free.extend(tail(&precise));
    let mut variables_param = vec![r_param, f1_param, t1_param];
    variables_param.extend(tail(&precise));
    BenchmarkProblem {
        name: "oscillator",
        evaluator: Box::new(SdofFn),
        variables_free,
        variables_param,
        aux_overrides: vec![
            Some(Distribution::gaussian(0.5, 0.05).unwrap()),
            Some(Distribution::gaussian(0.0, 0.5).unwrap()),
            Some(Distribution::gaussian(1.0, 0.2).unwrap()),
            None,
            None,
            None,
        ],
        defaults: ProblemDefaults { n1_initial: 12, n2_akmcs_initial: 12, n2_ego_initial: 6 },
    }
}

/// 23-bar truss with seven lognormal load p-boxes (kN).
pub fn truss() -> Result<BenchmarkProblem, BenchmarkError> {
    let model = TrussModel::new(truss_geometry())?;
    let n_loads = model.influence.len();
    let param_box = ParametricPBox::new(Family::Lognormal, vec![(95.0, 105.0), (13.0, 17.0)])?;
    let variables_param: Vec<PBoxVariable> = (0..n_loads)
        .map(|_| PBoxVariable::Parametric(param_box.clone()))
        .collect();
    let variables_free: Vec<PBoxVariable> = (0..n_loads)
        .map(|_| Ok(PBoxVariable::Free(FreePBox::from_parametric(&param_box)?)))
        .collect::<Result<_, PBoxError>>()?;
    Ok(BenchmarkProblem {
        name: "truss",
        evaluator: Box::new(TrussFn::new(model)),
        variables_free,
        variables_param,
        aux_overrides: vec![Some(Distribution::lognormal(100.0, 15.0).unwrap()); n_loads],
        defaults: ProblemDefaults { n1_initial: 12, n2_akmcs_initial: 12, n2_ego_initial: 12 },
    })
}

/// Linear-Gaussian synthetic with `P_f = Phi(-beta)`; all inputs precise.
pub fn linear_gaussian(beta: f64, dim: usize) -> BenchmarkProblem {
    let variables: Vec<PBoxVariable> = (0..dim)
        .map(|_| PBoxVariable::Precise(Distribution::gaussian(0.0, 1.0).unwrap()))
        .collect();
    BenchmarkProblem {
        name: "linear_gaussian",
        evaluator: Box::new(LinearGaussianFn { beta, dim }),
        variables_free: variables.clone(),
        variables_param: variables,
        aux_overrides: vec![None; dim],
        defaults: ProblemDefaults { n1_initial: 12, n2_akmcs_initial: 4, n2_ego_initial: 4 },
    }
}

/// Looks up a builtin by name. `beta`/`dim` feed the linear-Gaussian
/// problem and are ignored elsewhere.
pub fn builtin(name: &str, beta: f64, dim: usize) -> Result<BenchmarkProblem, BenchmarkError> {
    match name {
        "toy" => Ok(toy()),
        "oscillator" => Ok(oscillator()),
        "truss" => truss(),
        "linear_gaussian" => Ok(linear_gaussian(beta, dim)),
        other => Err(BenchmarkError::Unknown(other.to_string())),
    }
}
