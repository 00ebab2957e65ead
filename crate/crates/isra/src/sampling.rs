//! Seeded sampling: substream derivation, Latin-hypercube designs, Monte
//! Carlo pools drawn from independent marginals, and the plain
//! failure-probability estimator.
//!
//! Every random quantity in the library is a pure function of a 64-bit seed.
//! Purpose-specific substreams are derived by hashing `(seed, label, index)`
//! so that replications and pipeline stages stay independent yet exactly
//! reproducible.

use crate::dist::{DistError, Distribution};
use crate::pbox::CondensedCdf;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("sample count and dimension must be at least 1 (n={n}, m={m})")]
    EmptyDesign { n: usize, m: usize },
    #[error("indicator list is empty")]
    EmptyIndicator,
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Derives a substream seed from `(seed, label, index)` with an FNV-1a pass
/// and a splitmix64 finalizer. Stable across platforms and releases.
pub fn substream(seed: u64, label: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for &b in seed
        .to_le_bytes()
        .iter()
        .chain(label.as_bytes())
        .chain(index.to_le_bytes().iter())
    {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 avalanche
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Hashes a parameter vector into a substream index (used to key per-theta
/// Monte Carlo pools).
pub fn hash_point(x: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Which space the rows of a [`SampleSet`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    UnitHypercube,
    Physical,
    CSpace,
}

/// A dense n-by-m sample matrix (row-major).
#[derive(Debug, Clone)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    m: usize,
    pub space: SpaceTag,
    pub seed: u64,
}

impl SampleSet {
    pub fn from_rows(data: Vec<f64>, n: usize, m: usize, space: SpaceTag, seed: u64) -> Self {
        assert_eq!(data.len(), n * m);
        Self { data, n, m, space, seed }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Latin-hypercube design in the open unit hypercube: each column places
/// exactly one point in each stratum `((k-1)/n, k/n)`, jittered uniformly
/// within the stratum.
pub fn lhs(n: usize, m: usize, seed: u64) -> Result<SampleSet, SamplingError> {
    if n == 0 || m == 0 {
        return Err(SamplingError::EmptyDesign { n, m });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * m];
    for j in 0..m {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for i in 0..n {
            let u: f64 = rng.random::<f64>() * (1.0 - 1e-9) + 0.5e-9;
            data[i * m + j] = (strata[i] as f64 + u) / n as f64;
        }
    }
    Ok(SampleSet::from_rows(data, n, m, SpaceTag::UnitHypercube, seed))
}

/// One independent marginal of an input model.
#[derive(Debug, Clone)]
pub enum InputDist {
    Parametric(Distribution),
    Condensed(CondensedCdf),
    /// Standard uniform on (0, 1); used by the raw c-space mode.
    Unit,
}

impl InputDist {
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        match self {
            Self::Parametric(d) => d.quantile(p),
            Self::Condensed(c) => c.quantile(p),
            Self::Unit => {
                if p > 0.0 && p < 1.0 {
                    Ok(p)
                } else {
                    Err(DistError::ProbabilityOutOfRange(p))
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Parametric(d) => d.cdf(x),
            Self::Condensed(c) => c.cdf(x),
            Self::Unit => x.clamp(0.0, 1.0),
        }
    }
}

/// A vector of independent marginals: the sampling source for pools and
/// experimental designs, and the isoprobabilistic transform between the
/// physical space and the unit hypercube.
#[derive(Debug, Clone)]
pub struct InputModel {
    marginals: Vec<InputDist>,
}

impl InputModel {
    pub fn new(marginals: Vec<InputDist>) -> Self {
        Self { marginals }
    }

    pub fn precise(dists: Vec<Distribution>) -> Self {
        Self::new(dists.into_iter().map(InputDist::Parametric).collect())
    }

    /// M independent standard uniforms (the raw c-space model).
    pub fn unit(m: usize) -> Self {
        Self::new(vec![InputDist::Unit; m])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, i: usize) -> &InputDist {
        &self.marginals[i]
    }

    /// Transforms a physical point to unit-hypercube coordinates.
    pub fn to_uniform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.marginals)
            .map(|(&xi, d)| d.cdf(xi))
            .collect()
    }

    /// Monte Carlo draw by inverse transform of a seeded uniform stream.
    pub fn draw(&self, n: usize, seed: u64) -> Result<SampleSet, SamplingError> {
        let m = self.dim();
        if n == 0 || m == 0 {
            return Err(SamplingError::EmptyDesign { n, m });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut data = vec![0.0; n * m];
        for row in data.chunks_exact_mut(m) {
            for (j, slot) in row.iter_mut().enumerate() {
                let u: f64 = rng.random::<f64>() * (1.0 - 1e-9) + 0.5e-9;
                *slot = self.marginals[j].quantile(u)?;
            }
        }
        Ok(SampleSet::from_rows(data, n, m, SpaceTag::Physical, seed))
    }

    /// Latin-hypercube design mapped through the marginal quantiles.
    pub fn lhs_physical(&self, n: usize, seed: u64) -> Result<SampleSet, SamplingError> {
        let unit = lhs(n, self.dim(), seed)?;
        let m = self.dim();
        let mut data = vec![0.0; n * m];
        for (i, row) in unit.rows().enumerate() {
            for j in 0..m {
                data[i * m + j] = self.marginals[j].quantile(row[j])?;
            }
        }
        Ok(SampleSet::from_rows(data, n, m, SpaceTag::Physical, seed))
    }
}

/// Monte Carlo draw from explicit distributions.
pub fn draw_mc(dists: &[Distribution], n: usize, seed: u64) -> Result<SampleSet, SamplingError> {
    InputModel::precise(dists.to_vec()).draw(n, seed)
}

/// Plain Monte Carlo failure-probability estimate with its coefficient of
/// variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfEstimate {
    pub pf: f64,
    pub n_fail: usize,
    pub n: usize,
    /// `sqrt((1 - pf) / (n * pf))`; undefined when no failures were observed.
    pub cov: Option<f64>,
}

impl PfEstimate {
    pub fn from_counts(n_fail: usize, n: usize) -> Result<Self, SamplingError> {
        if n == 0 {
            return Err(SamplingError::EmptyIndicator);
        }
        let pf = n_fail as f64 / n as f64;
        let cov = if n_fail > 0 {
            Some(((1.0 - pf) / (n as f64 * pf)).sqrt())
        } else {
            None
        };
        Ok(Self { pf, n_fail, n, cov })
    }

    /// Monte Carlo standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        (self.pf * (1.0 - self.pf) / self.n as f64).sqrt()
    }
}

/// Estimator from an explicit indicator list.
pub fn estimate_pf(indicator: &[bool]) -> Result<PfEstimate, SamplingError> {
    if indicator.is_empty() {
        return Err(SamplingError::EmptyIndicator);
    }
    let n_fail = indicator.iter().filter(|&&b| b).count();
    PfEstimate::from_counts(n_fail, indicator.len())
}
