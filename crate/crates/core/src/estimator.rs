//! The FEPLS estimator family.
//!
//! For a threshold `y`, the direction estimate is the normalized empirical
//! tail moment
//!
//! ```text
//! v(y) = (1/n) sum_i X_i phi(Y_i) 1{Y_i >= y},     beta_hat(y) = v(y) / ||v(y)||,
//! ```
//!
//! with `phi(y) = y^tau`, evaluated at the random threshold `Y_{n-k+1,n}`.
//! [`FeplsPath`] sorts the responses once and accumulates the tail moments
//! for every `k`, so whole curves over `k` cost one pass.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::func_space::{dot_raw, normalize, FunctionSample};
use crate::synth::Dataset;

/// Test function `phi(y) = y^tau`, defined for `y > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFunction {
    pub tau: f64,
}

impl TestFunction {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::domain("test-function exponent must be finite"));
        }
        Ok(Self { tau })
    }

    /// `None` outside the domain `y > 0`.
    #[inline]
    pub fn eval(&self, y: f64) -> Option<f64> {
        (y > 0.0).then(|| y.powf(self.tau))
    }
}

/// `(1/n) sum_i W_i 1{Y_i >= y}`.
pub fn tail_moment_scalar(w: &[f64], ys: &[f64], y: f64) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::domain("empty input"));
    }
    if w.len() != ys.len() {
        return Err(Error::domain(format!("{} weights for {} responses", w.len(), ys.len())));
    }
    let s: f64 = w.iter().zip(ys).filter(|(_, &yi)| yi >= y).map(|(wi, _)| wi).sum();
    Ok(s / w.len() as f64)
}

/// Pointwise `(1/n) sum_i X_i w_i 1{Y_i >= y}`.
pub fn tail_moment_functional(
    xs: &[FunctionSample],
    weights: &[f64],
    ys: &[f64],
    y: f64,
) -> Result<FunctionSample> {
    let first = xs.first().ok_or_else(|| Error::domain("empty input"))?;
    if xs.len() != weights.len() || xs.len() != ys.len() {
        return Err(Error::domain("covariates, weights and responses differ in length"));
    }
    let mut acc = FunctionSample::zeros(first.grid());
    for ((x, &w), &yi) in xs.iter().zip(weights).zip(ys) {
        if yi >= y {
            acc = acc.add_scaled(w, x)?;
        }
    }
    Ok(acc.scaled(1.0 / xs.len() as f64))
}

/// `delta_{n,k} = (g (k/n)^(1/q))^-1`.
pub fn rate_delta(g_eval: f64, k: usize, n: usize, q: f64) -> Result<f64> {
    if !(g_eval > 0.0) || !g_eval.is_finite() {
        return Err(Error::domain(format!("link value must be positive, got {g_eval}")));
    }
    if k == 0 || k > n {
        return Err(Error::domain(format!("k must lie in [1, n={n}], got {k}")));
    }
    if !(q > 2.0) {
        return Err(Error::domain(format!("integrability order must exceed 2, got {q}")));
    }
    Ok(1.0 / (g_eval * (k as f64 / n as f64).powf(1.0 / q)))
}

/// Rate-reporting settings for [`FeplsFit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateOptions {
    /// Noise integrability order.
    pub q: f64,
    /// Link exponent; the rate is not reported when unknown.
    pub kappa: Option<f64>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { q: 4.0, kappa: None }
    }
}

/// An estimated FEPLS direction at threshold `Y_{n-k+1,n}`.
#[derive(Clone, Debug)]
pub struct FeplsFit {
    pub direction: FunctionSample,
    pub k: usize,
    pub threshold: f64,
    pub tau: f64,
    /// `||v_hat||` before normalization.
    pub raw_norm: f64,
    /// Number of `i` with `Y_i >= threshold` (exceeds `k` only under ties).
    pub exceedances: usize,
    pub q: f64,
    /// `delta_{n,k}` with the observed threshold plugged in for `y_{n,k}`.
    pub rate: Option<f64>,
}

/// Sorted view of a dataset with cumulative tail moments for all `k`.
#[derive(Clone, Debug)]
pub struct FeplsPath<'a> {
    data: &'a Dataset,
    phi: TestFunction,
    /// Indices by decreasing response; ties keep the earliest index first.
    order: Vec<usize>,
    /// `block_end[j]`: one past the last position tied with position `j`.
    block_end: Vec<usize>,
    /// Row `m` holds `sum_{j < m} X_{order[j]} phi(Y_{order[j]})`.
    prefix: Vec<f64>,
    dropped: usize,
}

impl<'a> FeplsPath<'a> {
    pub fn new(data: &'a Dataset, phi: TestFunction) -> Result<Self> {
        let n = data.len();
        let d = data.grid().len();
        let ys = data.y();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]));

        let mut block_end = vec![n; n];
        for j in (0..n.saturating_sub(1)).rev() {
            block_end[j] = if ys[order[j]] == ys[order[j + 1]] {
                block_end[j + 1]
            } else {
                j + 1
            };
        }

        let mut prefix = vec![0.0; (n + 1) * d];
        let mut dropped = 0;
        for (j, &i) in order.iter().enumerate() {
            let (done, rest) = prefix.split_at_mut((j + 1) * d);
            let prev = &done[j * d..];
            let next = &mut rest[..d];
            match phi.eval(ys[i]) {
                Some(w) => {
                    for ((nx, px), xv) in next.iter_mut().zip(prev).zip(data.x()[i].values()) {
                        *nx = px + w * xv;
                    }
                }
                None => {
                    next.copy_from_slice(prev);
                    dropped += 1;
                }
            }
        }
        Ok(Self {
            data,
            phi,
            order,
            block_end,
            prefix,
            dropped,
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn tau(&self) -> f64 {
        self.phi.tau
    }

    /// Indices sorted by decreasing response.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `Y_{n-k+1,n}`.
    pub fn threshold(&self, k: usize) -> f64 {
        self.data.y()[self.order[k - 1]]
    }

    /// The concomitant `X_{(n-i+1,n)}` of the `i`-th largest response.
    pub fn concomitant(&self, i: usize) -> &FunctionSample {
        &self.data.x()[self.order[i - 1]]
    }

    fn check_k(&self, k: usize) -> Result<()> {
        let n = self.data.len();
        if k == 0 || k > n {
            return Err(Error::domain(format!("k must lie in [1, {n}], got {k}")));
        }
        Ok(())
    }

    /// `v_hat(Y_{n-k+1,n})` and the number of exceedances.
    pub fn tail_moment(&self, k: usize) -> Result<(FunctionSample, usize)> {
        self.check_k(k)?;
        let d = self.data.grid().len();
        let m = self.block_end[k - 1];
        let tail_pos = self.order[..m].iter().filter(|&&i| self.data.y()[i] > 0.0).count();
        if tail_pos == 0 {
            return Err(Error::domain(format!(
                "no positive response among the top {k}; the test function is undefined there"
            )));
        }
        if tail_pos < m && self.dropped > 0 {
            log::warn!("{} non-positive tail responses dropped from the tail moment", m - tail_pos);
        }
        let n = self.data.len() as f64;
        let values = self.prefix[m * d..(m + 1) * d].iter().map(|v| v / n).collect();
        Ok((FunctionSample::new(self.data.grid().clone(), values)?, m))
    }

    pub fn fit(&self, k: usize, rate: RateOptions) -> Result<FeplsFit> {
        let (v, exceedances) = self.tail_moment(k)?;
        let raw_norm = v.norm();
        let direction = normalize(&v)?;
        let threshold = self.threshold(k);
        let n = self.data.len();
        let rate_value = match rate.kappa {
            Some(kappa) if threshold > 0.0 => Some(rate_delta(threshold.powf(kappa), k, n, rate.q)?),
            _ => None,
        };
        Ok(FeplsFit {
            direction,
            k,
            threshold,
            tau: self.phi.tau,
            raw_norm,
            exceedances,
            q: rate.q,
            rate: rate_value,
        })
    }

    pub fn direction(&self, k: usize) -> Result<FunctionSample> {
        let (v, _) = self.tail_moment(k)?;
        normalize(&v)
    }

    /// Empirical covariance between the top-`k` responses and the
    /// projections of their concomitants on `beta_hat(Y_{n-k+1,n})`.
    pub fn correlation(&self, k: usize) -> Result<f64> {
        let dir = self.direction(k)?;
        let d = self.data.grid().len() as f64;
        let ys = self.data.y();
        let (mut sy, mut sp, mut syp) = (0.0, 0.0, 0.0);
        for &i in &self.order[..k] {
            let p = dot_raw(dir.values(), self.data.x()[i].values()) / d;
            sy += ys[i];
            sp += p;
            syp += ys[i] * p;
        }
        let kf = k as f64;
        Ok(syp / kf - (sy / kf) * (sp / kf))
    }

    /// `r(k)` over `ks`, evaluated in parallel.
    pub fn correlation_curve(&self, ks: RangeInclusive<usize>) -> Result<Vec<(usize, f64)>> {
        let n = self.data.len();
        if *ks.start() < 2 || *ks.end() > n || ks.is_empty() {
            return Err(Error::domain(format!(
                "k range {}..={} must lie within [2, {n}]",
                ks.start(),
                ks.end()
            )));
        }
        ks.into_par_iter().map(|k| Ok((k, self.correlation(k)?))).collect()
    }
}

/// FEPLS direction at `Y_{n-k+1,n}`.
pub fn fepls_direction(data: &Dataset, phi: TestFunction, k: usize, rate: RateOptions) -> Result<FeplsFit> {
    FeplsPath::new(data, phi)?.fit(k, rate)
}

/// Normalized empirical covariance direction
/// `F_bar(y) m_XY(y) - m_X(y) m_Y(y)`.
pub fn cov_direction(data: &Dataset, y: f64) -> Result<FunctionSample> {
    let ys = data.y();
    let count = ys.iter().filter(|&&v| v >= y).count();
    if count < 2 {
        return Err(Error::insufficient(format!("{count} exceedances above {y}; need 2")));
    }
    let n = data.len() as f64;
    let survival = count as f64 / n;
    let m_y = tail_moment_scalar(ys, ys, y)?;
    let m_x = tail_moment_functional(data.x(), &vec![1.0; ys.len()], ys, y)?;
    let m_xy = tail_moment_functional(data.x(), ys, ys, y)?;
    let v = m_xy.scaled(survival).add_scaled(-m_y, &m_x)?;
    normalize(&v)
}

/// `r(k)` for each `k` in the range.
pub fn correlation_curve(
    data: &Dataset,
    phi: TestFunction,
    ks: RangeInclusive<usize>,
) -> Result<Vec<(usize, f64)>> {
    FeplsPath::new(data, phi)?.correlation_curve(ks)
}

/// How `r(k)` is scored when selecting `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Signed `r(k)`.
    Simulation,
    /// `|r(k)|`.
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelectionOptions {
    pub k_min: usize,
    /// Defaults to `floor(n/5)`.
    pub k_max: Option<usize>,
    pub mode: SelectionMode,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            k_min: 5,
            k_max: None,
            mode: SelectionMode::Simulation,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub k: usize,
    pub curve: Vec<(usize, f64)>,
}

/// Argmax of the (possibly absolute) curve; ties go to the smallest `k`.
pub fn argmax_curve(curve: &[(usize, f64)], mode: SelectionMode) -> Option<usize> {
    let score = |r: f64| match mode {
        SelectionMode::Simulation => r,
        SelectionMode::Data => r.abs(),
    };
    let mut best: Option<(usize, f64)> = None;
    for &(k, r) in curve {
        let s = score(r);
        if s.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k)
}

impl FeplsPath<'_> {
    pub fn select_k(&self, opts: SelectionOptions) -> Result<Selection> {
        let n = self.data.len();
        if n < 25 {
            return Err(Error::insufficient(format!("threshold selection needs n >= 25, got {n}")));
        }
        let k_min = opts.k_min.max(2);
        let k_max = opts.k_max.unwrap_or(n / 5).min(n);
        if k_min > k_max {
            return Err(Error::domain(format!("empty k range {k_min}..={k_max}")));
        }
        let curve = self.correlation_curve(k_min..=k_max)?;
        let k = argmax_curve(&curve, opts.mode)
            .ok_or_else(|| Error::Numerical("correlation curve is entirely NaN".into()))?;
        Ok(Selection { k, curve })
    }
}

/// Data-driven `k` maximizing `r(k)` over `[k_min, k_max]`.
pub fn select_k(data: &Dataset, phi: TestFunction, opts: SelectionOptions) -> Result<Selection> {
    FeplsPath::new(data, phi)?.select_k(opts)
}
