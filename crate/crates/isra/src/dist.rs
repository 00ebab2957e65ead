//! Univariate distributions and isoprobabilistic transforms.
//!
//! Quantiles sit on every hot path of the reliability pipelines (pool
//! generation, interval mapping, experimental-design seeding), so the
//! standard-normal kernels are implemented directly: Cody's rational
//! approximations for erf/erfc (relative error below 1e-15) and Acklam's
//! inverse normal CDF polished with one Halley step.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
}

/// Distribution families supported by the p-box machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Lognormal,
    Uniform,
}

/// A univariate parametric distribution with evaluable CDF, PDF and quantile.
///
/// Lognormal is parameterized by the mean and standard deviation of the
/// physical variable and converted to log-space parameters on construction:
/// `zeta^2 = ln(1 + sigma^2/mu^2)`, `lambda = ln(mu) - zeta^2/2`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Gaussian {
        mean: f64,
        std: f64,
    },
    Lognormal {
        mean: f64,
        std: f64,
        log_mean: f64,
        log_std: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
}

impl Distribution {
    pub fn gaussian(mean: f64, std: f64) -> Result<Self, DistError> {
        if !mean.is_finite() || !std.is_finite() || std <= 0.0 {
            return Err(DistError::InvalidParameters(format!(
                "Gaussian requires finite mean and std > 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self::Gaussian { mean, std })
    }

    pub fn lognormal(mean: f64, std: f64) -> Result<Self, DistError> {
        if !mean.is_finite() || !std.is_finite() || std <= 0.0 || mean <= 0.0 {
            return Err(DistError::InvalidParameters(format!(
                "Lognormal requires mean > 0 and std > 0, got mean={mean}, std={std}"
            )));
        }
        let zeta2 = (1.0 + (std / mean).powi(2)).ln();
        let log_mean = mean.ln() - 0.5 * zeta2;
        Ok(Self::Lognormal {
            mean,
            std,
            log_mean,
            log_std: zeta2.sqrt(),
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self, DistError> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(DistError::InvalidParameters(format!(
                "Uniform requires lower < upper, got lower={lower}, upper={upper}"
            )));
        }
        Ok(Self::Uniform { lower, upper })
    }

    /// Builds a distribution of `family` from `(param1, param2)` as laid out
    /// in the config grammar (Gaussian/Lognormal: mean, std; Uniform: bounds).
    pub fn from_family(family: Family, param1: f64, param2: f64) -> Result<Self, DistError> {
        match family {
            Family::Gaussian => Self::gaussian(param1, param2),
            Family::Lognormal => Self::lognormal(param1, param2),
            Family::Uniform => Self::uniform(param1, param2),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Gaussian { .. } => Family::Gaussian,
            Self::Lognormal { .. } => Family::Lognormal,
            Self::Uniform { .. } => Family::Uniform,
        }
    }

    /// F(x) = P(X <= x), in [0, 1] and nondecreasing in x.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => std_normal_cdf((x - mean) / std),
            Self::Lognormal {
                log_mean, log_std, ..
            } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - log_mean) / log_std)
                }
            }
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
        }
    }

    /// Density f(x) = dF/dx.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => std_normal_pdf((x - mean) / std) / std,
            Self::Lognormal {
                log_mean, log_std, ..
            } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - log_mean) / log_std) / (x * log_std)
                }
            }
            Self::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse CDF for p in the open interval (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::ProbabilityOutOfRange(p));
        }
        Ok(match *self {
            Self::Gaussian { mean, std } => mean + std * std_normal_quantile(p),
            Self::Lognormal {
                log_mean, log_std, ..
            } => (log_mean + log_std * std_normal_quantile(p)).exp(),
            Self::Uniform { lower, upper } => lower + p * (upper - lower),
        })
    }

    /// Isoprobabilistic transform to the unit hypercube coordinate.
    pub fn to_uniform(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// Inverse isoprobabilistic transform; errors when c is outside (0, 1).
    pub fn from_uniform(&self, c: f64) -> Result<f64, DistError> {
        self.quantile(c)
    }

    /// A rough support window `[q(eps), q(1-eps)]` used for grid checks and
    /// bisection brackets.
    pub fn support_window(&self, eps: f64) -> (f64, f64) {
        let lo = self.quantile(eps).expect("eps inside (0,1)");
        let hi = self.quantile(1.0 - eps).expect("eps inside (0,1)");
        (lo, hi)
    }
}

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via erfc.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

// Cody-style rational approximations for erf/erfc (SPECFUN CALERF).

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

fn erf_core(y: f64) -> f64 {
    // |y| <= 0.46875, returns erf(y)/y * y = erf(y)
    let z = y * y;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    y * (num + ERF_A[3]) / (den + ERF_B[3])
}

fn erfc_mid(y: f64) -> f64 {
    // 0.46875 <= y <= 4, returns erfc(y)
    let mut num = ERF_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERF_C[i]) * y;
        den = (den + ERF_D[i]) * y;
    }
    let r = (num + ERF_C[7]) / (den + ERF_D[7]);
    scale_by_exp_neg_sq(y, r)
}

fn erfc_tail(y: f64) -> f64 {
    // y > 4
    if y >= 26.543 {
        return 0.0;
    }
    let z = 1.0 / (y * y);
    let mut num = ERF_P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + ERF_P[i]) * z;
        den = (den + ERF_Q[i]) * z;
    }
    let mut r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
    r = (0.564_189_583_547_756_3 - r) / y;
    scale_by_exp_neg_sq(y, r)
}

/// Multiplies by exp(-y^2) with the split-argument trick that preserves
/// relative accuracy deep in the tail.
fn scale_by_exp_neg_sq(y: f64, r: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let v = if y <= 0.46875 {
        return 1.0 - erf_core(x);
    } else if y <= 4.0 {
        erfc_mid(y)
    } else {
        erfc_tail(y)
    };
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() <= 0.46875 {
        erf_core(x)
    } else {
        1.0 - erfc(x)
    }
}

// Acklam's rational approximation to the standard normal quantile.

const NQ_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const NQ_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const NQ_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const NQ_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Standard normal quantile for p in (0, 1); accurate to ~1e-13 after the
/// Halley polish step.
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const P_LOW: f64 = 0.02425;
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((NQ_C[0] * q + NQ_C[1]) * q + NQ_C[2]) * q + NQ_C[3]) * q + NQ_C[4]) * q + NQ_C[5])
            / ((((NQ_D[0] * q + NQ_D[1]) * q + NQ_D[2]) * q + NQ_D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((NQ_A[0] * r + NQ_A[1]) * r + NQ_A[2]) * r + NQ_A[3]) * r + NQ_A[4]) * r + NQ_A[5]) * q
            / (((((NQ_B[0] * r + NQ_B[1]) * r + NQ_B[2]) * r + NQ_B[3]) * r + NQ_B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((NQ_C[0] * q + NQ_C[1]) * q + NQ_C[2]) * q + NQ_C[3]) * q + NQ_C[4]) * q + NQ_C[5])
            / ((((NQ_D[0] * q + NQ_D[1]) * q + NQ_D[2]) * q + NQ_D[3]) * q + 1.0))
    };
    // One Halley step against the high-accuracy CDF.
    let e = std_normal_cdf(x) - p;
    let u = e * (0.5 * x * x).exp() / INV_SQRT_2PI;
    x -= u / (1.0 + 0.5 * x * u);
    x
}
