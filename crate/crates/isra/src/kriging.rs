//! Ordinary Kriging with a Gaussian (squared-exponential) anisotropic
//! correlation, generalized-least-squares trend/variance and correlation
//! lengths estimated by profiled maximum likelihood.
//!
//! Inputs are standardized per dimension before kernel evaluation and the
//! correlation lengths are searched in log space over a fixed box, so one
//! search configuration serves problems of any scale. Because the kernel
//! only sees coordinate differences, predictions fold the standardization
//! into effective raw-space lengths and never touch the training data again.

use crate::linalg::Cholesky;
use crate::sampling::lhs;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KrigingError {
    #[error("experimental design needs at least 2 points, got {0}")]
    DesignTooSmall(usize),
    #[error("point has dimension {got}, design has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate design point: rows {i} and {j} are {distance:.3e} apart")]
    DuplicatePoint { i: usize, j: usize, distance: f64 },
    #[error(
        "correlation matrix stayed non-positive-definite after nugget escalation; \
         closest design points are rows {i} and {j} ({distance:.3e} apart)"
    )]
    IllConditioned { i: usize, j: usize, distance: f64 },
}

/// Paired input points and limit-state responses; append-only during
/// enrichment. Duplicate rows within 1e-12 Euclidean distance are rejected.
#[derive(Debug, Clone)]
pub struct ExperimentalDesign {
    x: Vec<f64>,
    y: Vec<f64>,
    m: usize,
}

impl ExperimentalDesign {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "dimension must be at least 1");
        Self { x: Vec::new(), y: Vec::new(), m }
    }

    pub fn push(&mut self, point: &[f64], y: f64) -> Result<(), KrigingError> {
        if point.len() != self.m {
            return Err(KrigingError::DimensionMismatch { expected: self.m, got: point.len() });
        }
        for (i, row) in self.rows().enumerate() {
            let d2: f64 = row.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() < 1e-12 {
                return Err(KrigingError::DuplicatePoint { i, j: self.len(), distance: d2.sqrt() });
            }
        }
        self.x.extend_from_slice(point);
        self.y.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.m)
    }

    pub fn response(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Closest pair of design rows (used in conditioning diagnostics).
    fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d2: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 < best.2 {
                    best = (i, j, d2);
                }
            }
        }
        (best.0, best.1, best.2.sqrt())
    }
}

/// Search box for log10 correlation lengths in standardized coordinates.
/// The upper limit keeps the correlation matrix factorizable with small
/// nuggets: lengths an order of magnitude beyond the standardized data range
/// already behave polynomially, and larger ones only degrade conditioning.
const LOG_RHO_LO: f64 = -2.0;
const LOG_RHO_HI: f64 = 1.3;
/// Diagonal regularization ladder tried until the Cholesky succeeds.
const NUGGETS: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];
/// Fixed seed for the multi-start designs: the starts are coverage of the
/// search box, not a stochastic quantity of the analysis.
const MLE_SEED: u64 = 0x6b72_6967;
const GOLDEN_ITERS: usize = 18;
const LANES: usize = 8;

/// Correlations below exp(-46) ~ 1e-20 are indistinguishable from zero in
/// every downstream f64 sum; skipping the exp call halves the kernel cost on
/// large pools.
#[inline]
fn kernel_exp(d2: f64) -> f64 {
    if d2 > 46.0 {
        0.0
    } else {
        (-d2).exp()
    }
}
const POLISH_SWEEPS: usize = 3;

/// Fitted ordinary-Kriging surrogate.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    x: Vec<f64>,
    /// Training coordinates pre-divided by the effective lengths (hot-path
    /// kernel evaluation then needs no divisions).
    x_scaled: Vec<f64>,
    n: usize,
    m: usize,
    /// Constant trend coefficient.
    pub beta: f64,
    /// Process variance.
    pub sigma2: f64,
    /// Correlation lengths in standardized coordinates.
    pub rho: Vec<f64>,
    /// Per-dimension (mean, std) used for standardization.
    pub scaling: Vec<(f64, f64)>,
    /// Effective raw-space lengths `rho[k] * std[k]`.
    raw_len: Vec<f64>,
    chol: Cholesky,
    /// `R^-1 (y - beta 1)`.
    alpha: Vec<f64>,
    /// `L^-1 1`.
    g: Vec<f64>,
    /// `1' R^-1 1`.
    one_rinv_one: f64,
    /// Reciprocals of the Cholesky diagonal (prediction hot path).
    inv_diag: Vec<f64>,
    /// Nugget that made the factorization succeed.
    pub nugget: f64,
}

struct NllResult {
    nll: f64,
    nugget: f64,
    chol: Cholesky,
    beta: f64,
    sigma2: f64,
}

/// Profiled negative log-likelihood workspace over precomputed per-dimension
/// squared distances.
struct FitWorkspace<'a> {
    n: usize,
    m: usize,
    /// `d2[(i*(i-1)/2 + j) * m + k] = (z_ik - z_jk)^2` for i > j.
    d2: Vec<f64>,
    y: &'a [f64],
}

impl<'a> FitWorkspace<'a> {
    fn new(z: &[f64], y: &'a [f64], n: usize, m: usize) -> Self {
        let mut d2 = vec![0.0; n * (n - 1) / 2 * m];
        let mut idx = 0;
        for i in 0..n {
            for j in 0..i {
                for k in 0..m {
                    let d = z[i * m + k] - z[j * m + k];
                    d2[idx * m + k] = d * d;
                }
                idx += 1;
            }
        }
        Self { n, m, d2, y }
    }

    /// Builds R for weights `w_k = 1/rho_k^2`, escalates the nugget until the
    /// Cholesky succeeds, and evaluates the profiled likelihood.
    fn evaluate(&self, log_rho: &[f64]) -> Option<NllResult> {
        let n = self.n;
        let m = self.m;
        let w: Vec<f64> = log_rho.iter().map(|lr| 10f64.powf(-2.0 * lr)).collect();
        let mut r = vec![0.0; n * n];
        let mut idx = 0;
        for i in 0..n {
            for j in 0..i {
                let row = &self.d2[idx * m..(idx + 1) * m];
                let s: f64 = row.iter().zip(&w).map(|(d, wk)| d * wk).sum();
                let v = (-s).exp();
                r[i * n + j] = v;
                r[j * n + i] = v;
                idx += 1;
            }
        }
        for tau in NUGGETS {
            for i in 0..n {
                r[i * n + i] = 1.0 + tau;
            }
            if let Some(chol) = Cholesky::decompose(&r, n) {
                let ones = vec![1.0; n];
                let rinv_one = chol.solve(&ones);
                let rinv_y = chol.solve(self.y);
                let denom: f64 = rinv_one.iter().sum();
                let beta = rinv_y.iter().sum::<f64>() / denom;
                let mut s2 = 0.0;
                for i in 0..n {
                    s2 += (self.y[i] - beta) * (rinv_y[i] - beta * rinv_one[i]);
                }
                let sigma2 = (s2 / n as f64).max(0.0);
                let nll = n as f64 * sigma2.max(f64::MIN_POSITIVE).ln() + chol.log_det();
                return Some(NllResult { nll, nugget: tau, chol, beta, sigma2 });
            }
        }
        None
    }
}

fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
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
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

impl KrigingModel {
    /// Fits the surrogate with the default multi-start search.
    pub fn fit(ed: &ExperimentalDesign) -> Result<Self, KrigingError> {
        Self::fit_warm(ed, None)
    }

    /// Fits with an optional warm start at a previous `rho` (standardized
    /// coordinates). Warm refits use fewer fresh starts: enrichment moves the
    /// likelihood optimum slowly.
    pub fn fit_warm(ed: &ExperimentalDesign, warm_rho: Option<&[f64]>) -> Result<Self, KrigingError> {
        let n = ed.len();
        let m = ed.dim();
        if n < 2 {
            return Err(KrigingError::DesignTooSmall(n));
        }

        let mut scaling = Vec::with_capacity(m);
        for k in 0..m {
            let mean: f64 = ed.rows().map(|r| r[k]).sum::<f64>() / n as f64;
            let var: f64 = ed.rows().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
            scaling.push((mean, std));
        }
        let mut z = vec![0.0; n * m];
        for (i, row) in ed.rows().enumerate() {
            for k in 0..m {
                z[i * m + k] = (row[k] - scaling[k].0) / scaling[k].1;
            }
        }

        let ws = FitWorkspace::new(&z, ed.responses(), n, m);

        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(rho) = warm_rho {
            let clamped: Vec<f64> = rho
                .iter()
                .map(|r| r.log10().clamp(LOG_RHO_LO, LOG_RHO_HI))
                .collect();
            starts.push(clamped);
        }
        let n_fresh = if warm_rho.is_some() { 2 } else { 10 };
        let design = lhs(n_fresh, m, MLE_SEED).expect("nonzero start design");
        for row in design.rows() {
            starts.push(
                row.iter()
                    .map(|u| LOG_RHO_LO + u * (LOG_RHO_HI - LOG_RHO_LO))
                    .collect(),
            );
        }

        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in &starts {
            let mut point = start.clone();
            let mut value = match ws.evaluate(&point) {
                Some(r) => r.nll,
                None => continue,
            };
            for _ in 0..POLISH_SWEEPS {
                let before = value;
                for k in 0..m {
                    let (vk, fv) = golden_min(
                        |t| {
                            let mut p = point.clone();
                            p[k] = t;
                            ws.evaluate(&p).map_or(f64::INFINITY, |r| r.nll)
                        },
                        LOG_RHO_LO,
                        LOG_RHO_HI,
                        GOLDEN_ITERS,
                    );
                    if fv < value {
                        point[k] = vk;
                        value = fv;
                    }
                }
                if before - value < 1e-8 {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(_, bv)| value < *bv) {
                best = Some((point, value));
            }
        }

        let (log_rho, _) = best.ok_or_else(|| {
            let (i, j, distance) = ed.closest_pair();
            KrigingError::IllConditioned { i, j, distance }
        })?;
        let fitted = ws.evaluate(&log_rho).ok_or_else(|| {
            let (i, j, distance) = ed.closest_pair();
            KrigingError::IllConditioned { i, j, distance }
        })?;

        let rho: Vec<f64> = log_rho.iter().map(|lr| 10f64.powf(*lr)).collect();
        let raw_len: Vec<f64> = rho.iter().zip(&scaling).map(|(r, (_, s))| r * s).collect();

        let ones = vec![1.0; n];
        let resid: Vec<f64> = ed.responses().iter().map(|y| y - fitted.beta).collect();
        let alpha = fitted.chol.solve(&resid);
        let g = fitted.chol.forward(&ones);
        let one_rinv_one: f64 = g.iter().map(|v| v * v).sum();

        let x: Vec<f64> = ed.rows().flatten().copied().collect();
        let x_scaled: Vec<f64> = x
            .chunks_exact(m)
            .flat_map(|row| row.iter().zip(&raw_len).map(|(v, l)| v / l))
            .collect();
        let factor = fitted.chol.factor();
        let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / factor[i * n + i]).collect();
        Ok(Self {
            x,
            x_scaled,
            n,
            m,
            beta: fitted.beta,
            sigma2: fitted.sigma2,
            rho,
            scaling,
            raw_len,
            chol: fitted.chol,
            alpha,
            g,
            one_rinv_one,
            inv_diag,
            nugget: fitted.nugget,
        })
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

    /// Profiled negative log-likelihood at given standardized-space `rho`
    /// for the design this model was fitted on (oracle checks).
    pub fn profiled_nll(ed: &ExperimentalDesign, rho: &[f64]) -> Option<f64> {
        let n = ed.len();
        let m = ed.dim();
        let mut scaling = Vec::with_capacity(m);
        for k in 0..m {
            let mean: f64 = ed.rows().map(|r| r[k]).sum::<f64>() / n as f64;
            let var: f64 = ed.rows().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = if var.sqrt() > 0.0 { var.sqrt() } else { 1.0 };
            scaling.push((mean, std));
        }
        let mut z = vec![0.0; n * m];
        for (i, row) in ed.rows().enumerate() {
            for k in 0..m {
                z[i * m + k] = (row[k] - scaling[k].0) / scaling[k].1;
            }
        }
        let ws = FitWorkspace::new(&z, ed.responses(), n, m);
        let log_rho: Vec<f64> = rho.iter().map(|r| r.log10()).collect();
        ws.evaluate(&log_rho).map(|r| r.nll)
    }

    #[inline]
    fn scale_query(&self, x: &[f64], q: &mut Vec<f64>) {
        q.clear();
        q.extend(x.iter().zip(&self.raw_len).map(|(v, l)| v / l));
    }

    #[inline]
    fn kernel_scaled_into(&self, q: &[f64], r: &mut [f64]) {
        for (i, slot) in r.iter_mut().enumerate() {
            let row = &self.x_scaled[i * self.m..(i + 1) * self.m];
            let mut s = 0.0;
            for k in 0..self.m {
                let h = q[k] - row[k];
                s += h * h;
            }
            *slot = kernel_exp(s);
        }
    }

    #[inline]
    fn kernel_into(&self, x: &[f64], r: &mut [f64]) {
        let mut q = Vec::with_capacity(self.m);
        self.scale_query(x, &mut q);
        self.kernel_scaled_into(&q, r);
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), KrigingError> {
        if x.len() != self.m {
            return Err(KrigingError::DimensionMismatch { expected: self.m, got: x.len() });
        }
        Ok(())
    }

    /// Predictive mean and variance at one point.
    pub fn predict_one(&self, x: &[f64]) -> Result<(f64, f64), KrigingError> {
        self.check_dim(x)?;
        let mut r = vec![0.0; self.n];
        Ok(self.mean_var_core(x, &mut r))
    }

    /// Predictive mean only (skips the variance solve).
    pub fn predict_mean_one(&self, x: &[f64]) -> Result<f64, KrigingError> {
        self.check_dim(x)?;
        let mut r = vec![0.0; self.n];
        self.kernel_into(x, &mut r);
        Ok(self.beta + dot(&r, &self.alpha))
    }

    fn mean_var_core(&self, x: &[f64], r: &mut [f64]) -> (f64, f64) {
        self.kernel_into(x, r);
        let mean = self.beta + dot(r, &self.alpha);
        // forward substitution with the cached reciprocal diagonal; the lane
        // path performs the identical operations
        let n = self.n;
        let l = self.chol.factor();
        for i in 0..n {
            let (head, tail) = r.split_at_mut(i);
            let mut s = tail[0];
            for (k, &lik) in l[i * n..i * n + i].iter().enumerate() {
                s -= lik * head[k];
            }
            tail[0] = s * self.inv_diag[i];
        }
        let rtr = dot(r, r);
        let u = dot(&self.g, r) - 1.0;
        let var = self.sigma2 * (1.0 - rtr + u * u / self.one_rinv_one);
        (mean, var.max(0.0))
    }

    /// Batch prediction over row-major points; parallelized over chunks and
    /// blocked over eight points at a time so the triangular solve
    /// vectorizes. Output order matches input order regardless of thread
    /// count, and each point sees the same operation sequence as
    /// [`Self::predict_one`].
    pub fn predict_into(&self, rows: &[f64], mean: &mut [f64], var: &mut [f64]) {
        let m = self.m;
        assert_eq!(rows.len() % m, 0, "row data not divisible by dimension");
        let n_pts = rows.len() / m;
        assert_eq!(mean.len(), n_pts);
        assert_eq!(var.len(), n_pts);
        const CHUNK: usize = 4096;
        mean.par_chunks_mut(CHUNK)
            .zip(var.par_chunks_mut(CHUNK))
            .zip(rows.par_chunks(CHUNK * m))
            .for_each(|((mc, vc), rc)| {
                let mut lanes = vec![0.0; self.n * LANES];
                let mut q = Vec::with_capacity(m);
                let mut blocks = rc.chunks_exact(m * LANES);
                let mut offset = 0;
                for block in blocks.by_ref() {
                    self.mean_var_lanes(
                        block,
                        &mut mc[offset..offset + LANES],
                        &mut vc[offset..offset + LANES],
                        &mut lanes,
                        &mut q,
                    );
                    offset += LANES;
                }
                let mut scratch = vec![0.0; self.n];
                for pt in blocks.remainder().chunks_exact(m) {
                    let (mu, s2) = self.mean_var_core(pt, &mut scratch);
                    mc[offset] = mu;
                    vc[offset] = s2;
                    offset += 1;
                }
            });
    }

    /// Eight-point blocked kernel: one pass over the Cholesky factor serves
    /// eight independent forward substitutions; the per-lane arithmetic
    /// matches the scalar path exactly.
    fn mean_var_lanes(
        &self,
        pts: &[f64],
        mean: &mut [f64],
        var: &mut [f64],
        lanes: &mut [f64],
        q: &mut Vec<f64>,
    ) {
        let n = self.n;
        let m = self.m;
        debug_assert_eq!(pts.len(), m * LANES);
        debug_assert_eq!(lanes.len(), n * LANES);
        // correlation vectors, lane-interleaved: lanes[i*LANES + lane]
        for (lane, pt) in pts.chunks_exact(m).enumerate() {
            self.scale_query(pt, q);
            for i in 0..n {
                let row = &self.x_scaled[i * m..(i + 1) * m];
                let mut s = 0.0;
                for k in 0..m {
                    let h = q[k] - row[k];
                    s += h * h;
                }
                lanes[i * LANES + lane] = kernel_exp(s);
            }
        }
        let mut mu = [0.0f64; LANES];
        {
            let (blocks, _) = lanes.as_chunks::<LANES>();
            for (r, &a) in blocks.iter().zip(&self.alpha) {
                for lane in 0..LANES {
                    mu[lane] += r[lane] * a;
                }
            }
        }
        // forward substitution on all lanes at once
        let l = self.chol.factor();
        for i in 0..n {
            let (head, tail) = lanes.split_at_mut(i * LANES);
            let vi: &mut [f64; LANES] = (&mut tail[..LANES]).try_into().expect("lane block");
            let (vk_blocks, _) = head.as_chunks::<LANES>();
            let row = &l[i * n..i * n + i];
            for (&lik, vk) in row.iter().zip(vk_blocks) {
                for lane in 0..LANES {
                    vi[lane] -= lik * vk[lane];
                }
            }
            let inv = self.inv_diag[i];
            for lane in vi.iter_mut() {
                *lane *= inv;
            }
        }
        let mut vtv = [0.0f64; LANES];
        let mut u = [0.0f64; LANES];
        {
            let (blocks, _) = lanes.as_chunks::<LANES>();
            for (v, &gi) in blocks.iter().zip(&self.g) {
                for lane in 0..LANES {
                    vtv[lane] += v[lane] * v[lane];
                    u[lane] += gi * v[lane];
                }
            }
        }
        for lane in 0..LANES {
            mean[lane] = self.beta + mu[lane];
            let du = u[lane] - 1.0;
            var[lane] = (self.sigma2 * (1.0 - vtv[lane] + du * du / self.one_rinv_one)).max(0.0);
        }
    }

    /// Batch mean-only prediction.
    pub fn predict_mean_into(&self, rows: &[f64], mean: &mut [f64]) {
        let m = self.m;
        assert_eq!(rows.len() % m, 0);
        const CHUNK: usize = 4096;
        mean.par_chunks_mut(CHUNK)
            .zip(rows.par_chunks(CHUNK * m))
            .for_each(|(mc, rc)| {
                let mut r = vec![0.0; self.n];
                for (i, pt) in rc.chunks_exact(m).enumerate() {
                    self.kernel_into(pt, &mut r);
                    mc[i] = self.beta + dot(&r, &self.alpha);
                }
            });
    }

    /// Standardized distance from `x` to the nearest training point
    /// (duplicate guard for enrichment candidates).
    pub fn min_standardized_distance(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for row in self.x.chunks_exact(self.m) {
            let d2: f64 = row
                .iter()
                .zip(x)
                .zip(&self.scaling)
                .map(|((a, b), (_, s))| ((a - b) / s).powi(2))
                .sum();
            best = best.min(d2);
        }
        best.sqrt()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
