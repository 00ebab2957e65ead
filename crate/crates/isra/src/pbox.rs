//! Probability-boxes: free (two CDF envelopes), parametric (a distribution
//! family with interval parameters) and precise (degenerate) variables.
//!
//! Envelope curves are either a single distribution or the pointwise
//! extremum over the corners of a parameter box. For the location/scale
//! families used here the CDF is monotone in each parameter on each side of
//! the envelope crossing, so corner enumeration yields the exact extrema and
//! envelope inversion reduces to the extremum of the member quantiles.

use crate::dist::{DistError, Distribution, Family};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PBoxError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("envelope ordering violated at x={x}: lower={lower} > upper={upper}")]
    EnvelopeOrdering { x: f64, lower: f64, upper: f64 },
    #[error("operation `{op}` is not supported for the {variant} variant")]
    UnsupportedVariant { op: &'static str, variant: &'static str },
    #[error("parametric p-boxes support Gaussian and Lognormal families, got {0:?}")]
    UnsupportedFamily(Family),
    #[error("theta component {dim} = {value} outside [{lo}, {hi}]")]
    ThetaOutsideBox { dim: usize, value: f64, lo: f64, hi: f64 },
    #[error("theta vector has length {got}, expected {expected}")]
    ThetaLength { got: usize, expected: usize },
}

/// Which pointwise extremum an envelope realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Lower envelope: pointwise minimum of member CDFs.
    Lower,
    /// Upper envelope: pointwise maximum of member CDFs.
    Upper,
}

/// An evaluable CDF envelope.
#[derive(Debug, Clone)]
pub enum EnvelopeCdf {
    Single(Distribution),
    /// Pointwise min/max over member CDFs (one per parameter-box corner).
    CornerExtremum { members: Vec<Distribution>, side: Side },
}

impl EnvelopeCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Single(d) => d.cdf(x),
            Self::CornerExtremum { members, side } => {
                let it = members.iter().map(|d| d.cdf(x));
                match side {
                    Side::Lower => it.fold(f64::INFINITY, f64::min),
                    Side::Upper => it.fold(f64::NEG_INFINITY, f64::max),
                }
            }
        }
    }

    /// Exact inverse: the extremum of the member quantiles. For a pointwise
    /// minimum of CDFs the inverse is the maximum of the member inverses,
    /// and vice versa.
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        match self {
            Self::Single(d) => d.quantile(p),
            Self::CornerExtremum { members, side } => {
                let mut ext = match side {
                    Side::Lower => f64::NEG_INFINITY,
                    Side::Upper => f64::INFINITY,
                };
                for d in members {
                    let q = d.quantile(p)?;
                    ext = match side {
                        Side::Lower => ext.max(q),
                        Side::Upper => ext.min(q),
                    };
                }
                Ok(ext)
            }
        }
    }

    fn support_window(&self, eps: f64) -> (f64, f64) {
        match self {
            Self::Single(d) => d.support_window(eps),
            Self::CornerExtremum { members, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for d in members {
                    let (a, b) = d.support_window(eps);
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                (lo, hi)
            }
        }
    }
}

/// Free p-box: the true CDF is only known to lie between two envelopes.
#[derive(Debug, Clone)]
pub struct FreePBox {
    /// Realizes the lower CDF bound (the right-shifted curve).
    lower: EnvelopeCdf,
    /// Realizes the upper CDF bound.
    upper: EnvelopeCdf,
}

impl FreePBox {
    /// Builds a free p-box from two envelope distributions and verifies the
    /// ordering `upper(x) >= lower(x)` on a 1000-point grid.
    pub fn new(lower_cdf: Distribution, upper_cdf: Distribution) -> Result<Self, PBoxError> {
        Self::from_envelopes(EnvelopeCdf::Single(lower_cdf), EnvelopeCdf::Single(upper_cdf))
    }

    /// Builds the free p-box sharing the envelope curves of a parametric one.
    pub fn from_parametric(p: &ParametricPBox) -> Result<Self, PBoxError> {
        let members = p.corner_distributions()?;
        Self::from_envelopes(
            EnvelopeCdf::CornerExtremum {
                members: members.clone(),
                side: Side::Lower,
            },
            EnvelopeCdf::CornerExtremum {
                members,
                side: Side::Upper,
            },
        )
    }

    pub fn from_envelopes(lower: EnvelopeCdf, upper: EnvelopeCdf) -> Result<Self, PBoxError> {
        let (mut a, mut b) = lower.support_window(1e-6);
        let (a2, b2) = upper.support_window(1e-6);
        a = a.min(a2);
        b = b.max(b2);
        for k in 0..1000 {
            let x = a + (b - a) * k as f64 / 999.0;
            let lo = lower.cdf(x);
            let hi = upper.cdf(x);
            if lo > hi + 1e-12 {
                return Err(PBoxError::EnvelopeOrdering { x, lower: lo, upper: hi });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &EnvelopeCdf {
        &self.lower
    }

    pub fn upper(&self) -> &EnvelopeCdf {
        &self.upper
    }

    pub fn envelope_cdf(&self, x: f64) -> (f64, f64) {
        (self.lower.cdf(x), self.upper.cdf(x))
    }

    /// Maps a CDF level to the interval of physical values admissible at
    /// that level: `[upper^-1(c), lower^-1(c)]`.
    pub fn interval_from_c(&self, c: f64) -> Result<(f64, f64), DistError> {
        let x_lo = self.upper.quantile(c)?;
        let x_hi = self.lower.quantile(c)?;
        Ok((x_lo, x_hi))
    }

    /// Condenses the p-box into the average of its envelopes.
    pub fn condense(&self) -> CondensedCdf {
        CondensedCdf { pbox: self.clone() }
    }
}

/// Auxiliary distribution obtained by averaging the envelope curves of a
/// free p-box. Quantiles are found by bisection between the envelope
/// inverses.
#[derive(Debug, Clone)]
pub struct CondensedCdf {
    pbox: FreePBox,
}

impl CondensedCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.pbox.envelope_cdf(x);
        0.5 * (lo + hi)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::ProbabilityOutOfRange(p));
        }
        // F_upper >= F_avg >= F_lower, so the root is bracketed by the
        // envelope inverses.
        let mut a = self.pbox.upper.quantile(p)?;
        let mut b = self.pbox.lower.quantile(p)?;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        for _ in 0..200 {
            if (b - a).abs() <= 1e-12 * b.abs().max(a.abs()).max(1.0) {
                break;
            }
            let mid = 0.5 * (a + b);
            if self.cdf(mid) < p {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Parametric (distributional) p-box: a family whose parameters live in a
/// hyper-rectangle.
#[derive(Debug, Clone)]
pub struct ParametricPBox {
    family: Family,
    /// One `(lower, upper)` interval per distribution parameter; degenerate
    /// intervals pin a parameter.
    theta_box: Vec<(f64, f64)>,
}

impl ParametricPBox {
    pub fn new(family: Family, theta_box: Vec<(f64, f64)>) -> Result<Self, PBoxError> {
        if !matches!(family, Family::Gaussian | Family::Lognormal) {
            return Err(PBoxError::UnsupportedFamily(family));
        }
        if theta_box.len() != 2 {
            return Err(PBoxError::ThetaLength { got: theta_box.len(), expected: 2 });
        }
        for (dim, &(lo, hi)) in theta_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(PBoxError::ThetaOutsideBox { dim, value: lo, lo, hi });
            }
        }
        let pbox = Self { family, theta_box };
        // positivity etc. must hold at every corner
        pbox.corner_distributions()?;
        Ok(pbox)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta_box(&self) -> &[(f64, f64)] {
        &self.theta_box
    }

    /// Enumerates the corners of the parameter box (duplicates from
    /// degenerate intervals removed, order preserved).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let k = self.theta_box.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(1 << k);
        for mask in 0..(1usize << k) {
            let corner: Vec<f64> = self
                .theta_box
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| if mask >> i & 1 == 0 { lo } else { hi })
                .collect();
            if !out.contains(&corner) {
                out.push(corner);
            }
        }
        out
    }

    fn corner_distributions(&self) -> Result<Vec<Distribution>, PBoxError> {
        self.corners()
            .iter()
            .map(|c| Distribution::from_family(self.family, c[0], c[1]).map_err(PBoxError::from))
            .collect()
    }

    pub fn envelope_cdf(&self, x: f64) -> (f64, f64) {
        let members = self
            .corner_distributions()
            .expect("corner validity checked at construction");
        let lo = members.iter().map(|d| d.cdf(x)).fold(f64::INFINITY, f64::min);
        let hi = members
            .iter()
            .map(|d| d.cdf(x))
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// The conditional distribution at a fixed parameter vector.
    pub fn conditional(&self, theta: &[f64]) -> Result<Distribution, PBoxError> {
        if theta.len() != self.theta_box.len() {
            return Err(PBoxError::ThetaLength {
                got: theta.len(),
                expected: self.theta_box.len(),
            });
        }
        for (dim, (&v, &(lo, hi))) in theta.iter().zip(&self.theta_box).enumerate() {
            let tol = 1e-12 * (hi - lo).abs().max(lo.abs()).max(1.0);
            if v < lo - tol || v > hi + tol {
                return Err(PBoxError::ThetaOutsideBox { dim, value: v, lo, hi });
            }
        }
        Ok(Distribution::from_family(self.family, theta[0], theta[1])?)
    }
}

/// A condensed variable: an evaluable auxiliary CDF.
#[derive(Debug, Clone)]
pub enum CondensedVariable {
    Averaged(CondensedCdf),
    Precise(Distribution),
}

impl CondensedVariable {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Averaged(c) => c.cdf(x),
            Self::Precise(d) => d.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        match self {
            Self::Averaged(c) => c.quantile(p),
            Self::Precise(d) => d.quantile(p),
        }
    }
}

/// An input variable of the reliability problem.
#[derive(Debug, Clone)]
pub enum PBoxVariable {
    Free(FreePBox),
    Parametric(ParametricPBox),
    Precise(Distribution),
}

impl PBoxVariable {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Free(_) => "free",
            Self::Parametric(_) => "parametric",
            Self::Precise(_) => "precise",
        }
    }

    /// Lower/upper CDF envelope values at `x`.
    pub fn envelope_cdf(&self, x: f64) -> (f64, f64) {
        match self {
            Self::Free(f) => f.envelope_cdf(x),
            Self::Parametric(p) => p.envelope_cdf(x),
            Self::Precise(d) => {
                let c = d.cdf(x);
                (c, c)
            }
        }
    }

    /// Condenses the variable into an evaluable CDF: the envelope average
    /// for free p-boxes, the distribution itself for precise variables.
    /// Parametric variables live in the nested pipeline and are rejected.
    pub fn condense(&self) -> Result<CondensedVariable, PBoxError> {
        match self {
            Self::Free(f) => Ok(CondensedVariable::Averaged(f.condense())),
            Self::Precise(d) => Ok(CondensedVariable::Precise(d.clone())),
            Self::Parametric(_) => Err(PBoxError::UnsupportedVariant {
                op: "condense",
                variant: "parametric",
            }),
        }
    }

    /// Physical-value interval at CDF level `c`. Precise variables return a
    /// degenerate interval; the parametric pipeline never maps through
    /// c-space, so that variant is rejected.
    pub fn interval_from_c(&self, c: f64) -> Result<(f64, f64), PBoxError> {
        match self {
            Self::Free(f) => Ok(f.interval_from_c(c)?),
            Self::Precise(d) => {
                let x = d.quantile(c)?;
                Ok((x, x))
            }
            Self::Parametric(_) => Err(PBoxError::UnsupportedVariant {
                op: "interval_from_c",
                variant: "parametric",
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_free() -> FreePBox {
        FreePBox::new(
            Distribution::gaussian(2.5, 1.0).unwrap(),
            Distribution::gaussian(1.5, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn toy_parametric() -> ParametricPBox {
        ParametricPBox::new(Family::Gaussian, vec![(1.5, 2.5), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn envelope_cdf_toy_values() {
        let std = Distribution::gaussian(0.0, 1.0).unwrap();
        let phi_neg_half = std.cdf(-0.5);
        let phi_half = std.cdf(0.5);
        let (lo, hi) = toy_free().envelope_cdf(2.0);
        assert!((lo - phi_neg_half).abs() < 1e-12);
        assert!((hi - phi_half).abs() < 1e-12);
        assert!((lo - 0.308538).abs() < 1e-6);
        assert!((hi - 0.691462).abs() < 1e-6);

        // parametric variant shares the same boundary curves
        let (plo, phi) = toy_parametric().envelope_cdf(2.0);
        assert!((plo - lo).abs() < 1e-12);
        assert!((phi - hi).abs() < 1e-12);

        let precise = PBoxVariable::Precise(Distribution::gaussian(0.0, 1.0).unwrap());
        let (a, b) = precise.envelope_cdf(0.0);
        assert_eq!(a, b);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interval_from_c_toy_values() {
        let pbox = toy_free();
        let (lo, hi) = pbox.interval_from_c(0.5).unwrap();
        assert!((lo - 1.5).abs() < 1e-9);
        assert!((hi - 2.5).abs() < 1e-9);

        let c1 = Distribution::gaussian(0.0, 1.0).unwrap().cdf(1.0);
        let (lo, hi) = pbox.interval_from_c(c1).unwrap();
        assert!((lo - 2.5).abs() < 1e-9);
        assert!((hi - 3.5).abs() < 1e-9);

        // postcondition: envelope CDF recovers c at the endpoints
        for c in [0.05, 0.3, 0.5, 0.9] {
            let (a, b) = pbox.interval_from_c(c).unwrap();
            assert!(a <= b);
            assert!((pbox.upper().cdf(a) - c).abs() < 1e-8);
            assert!((pbox.lower().cdf(b) - c).abs() < 1e-8);
        }

        let precise = PBoxVariable::Precise(Distribution::gaussian(0.0, 1.0).unwrap());
        let (a, b) = precise.interval_from_c(0.5).unwrap();
        assert!((a - 0.0).abs() < 1e-12 && (b - 0.0).abs() < 1e-12);
    }

    #[test]
    fn interval_from_c_rejects_parametric() {
        let v = PBoxVariable::Parametric(toy_parametric());
        assert!(matches!(
            v.interval_from_c(0.5),
            Err(PBoxError::UnsupportedVariant { .. })
        ));
    }

    #[test]
    fn variable_condense_dispatch() {
        let precise = PBoxVariable::Precise(Distribution::gaussian(0.0, 1.0).unwrap());
        match precise.condense().unwrap() {
            CondensedVariable::Precise(d) => {
                assert_eq!(d, Distribution::gaussian(0.0, 1.0).unwrap())
            }
            other => panic!("expected the unchanged distribution, got {other:?}"),
        }
        let free = PBoxVariable::Free(toy_free());
        let cond = free.condense().unwrap();
        assert!((cond.cdf(2.0) - 0.5).abs() < 1e-12);
        assert!(matches!(
            PBoxVariable::Parametric(toy_parametric()).condense(),
            Err(PBoxError::UnsupportedVariant { .. })
        ));
    }

    #[test]
    fn condense_averages_envelopes() {
        let pbox = toy_free();
        let cond = pbox.condense();
        assert!((cond.cdf(2.0) - 0.5).abs() < 1e-12);
        // median of the symmetric envelope average
        assert!((cond.quantile(0.5).unwrap() - 2.0).abs() < 1e-9);
        // condensed CDF lies between the envelopes on a grid
        for k in 0..200 {
            let x = -2.0 + 8.0 * k as f64 / 199.0;
            let (lo, hi) = pbox.envelope_cdf(x);
            let c = cond.cdf(x);
            assert!(lo - 1e-12 <= c && c <= hi + 1e-12);
        }
    }

    #[test]
    fn conditional_distribution() {
        let p = toy_parametric();
        let d = p.conditional(&[1.5, 1.0]).unwrap();
        assert_eq!(d, Distribution::gaussian(1.5, 1.0).unwrap());
        let mid = p.conditional(&[2.0, 1.0]).unwrap();
        assert_eq!(mid, Distribution::gaussian(2.0, 1.0).unwrap());

        let truss = ParametricPBox::new(Family::Lognormal, vec![(95.0, 105.0), (13.0, 17.0)]).unwrap();
        let d = truss.conditional(&[105.0, 17.0]).unwrap();
        assert_eq!(d, Distribution::lognormal(105.0, 17.0).unwrap());

        assert!(matches!(
            p.conditional(&[3.0, 1.0]),
            Err(PBoxError::ThetaOutsideBox { .. })
        ));
    }

    #[test]
    fn construction_rejects_bad_envelopes() {
        // swapped envelopes violate the ordering
        let err = FreePBox::new(
            Distribution::gaussian(1.5, 1.0).unwrap(),
            Distribution::gaussian(2.5, 1.0).unwrap(),
        );
        assert!(matches!(err, Err(PBoxError::EnvelopeOrdering { .. })));
        assert!(ParametricPBox::new(Family::Uniform, vec![(0.0, 1.0), (2.0, 3.0)]).is_err());
        // lognormal corner with nonpositive mean is rejected
        assert!(ParametricPBox::new(Family::Lognormal, vec![(-1.0, 105.0), (13.0, 17.0)]).is_err());
    }

    #[test]
    fn degenerate_theta_box_collapses_envelopes() {
        let p = ParametricPBox::new(Family::Gaussian, vec![(2.0, 2.0), (1.0, 1.0)]).unwrap();
        for x in [-1.0, 0.5, 2.0, 4.0] {
            let (lo, hi) = p.envelope_cdf(x);
            assert_eq!(lo, hi);
        }
    }

    #[test]
    fn gaussian_interval_mean_envelopes_are_shifted_cdfs() {
        let p = toy_parametric();
        let lo_dist = Distribution::gaussian(2.5, 1.0).unwrap();
        let hi_dist = Distribution::gaussian(1.5, 1.0).unwrap();
        for k in 0..50 {
            let x = -1.0 + 6.0 * k as f64 / 49.0;
            let (lo, hi) = p.envelope_cdf(x);
            assert!((lo - lo_dist.cdf(x)).abs() < 1e-14);
            assert!((hi - hi_dist.cdf(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn truss_style_two_parameter_envelope_is_composite() {
        // with both mean and std intervals, each envelope switches corners at
        // the crossing point, so a single member cannot realize it everywhere
        let p = ParametricPBox::new(Family::Lognormal, vec![(95.0, 105.0), (13.0, 17.0)]).unwrap();
        let free = FreePBox::from_parametric(&p).unwrap();
        for x in [60.0, 80.0, 100.0, 120.0, 160.0] {
            let (plo, phi) = p.envelope_cdf(x);
            let (flo, fhi) = free.envelope_cdf(x);
            assert!((plo - flo).abs() < 1e-14);
            assert!((phi - fhi).abs() < 1e-14);
        }
        // lower envelope uses sigma=13 in the left tail and sigma=17 in the
        // right tail (both at mean 105)
        let left = Distribution::lognormal(105.0, 13.0).unwrap();
        let right = Distribution::lognormal(105.0, 17.0).unwrap();
        assert!((free.lower().cdf(70.0) - left.cdf(70.0)).abs() < 1e-14);
        assert!((free.lower().cdf(150.0) - right.cdf(150.0)).abs() < 1e-14);
    }
}
