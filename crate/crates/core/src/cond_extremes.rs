//! Kernel estimators of the conditional law of `Y` given a covariate that is
//! either the whole curve `X` or a projection `<X, beta_tilde>`.
//!
//! The Nadaraya-Watson conditional cdf uses the Gaussian profile
//! `K(u) = exp(-u^2/2)`:
//!
//! ```text
//! F(y | z) = sum_i K(|Z_i - z| / h) 1{Y_i <= y} / sum_i K(|Z_i - z| / h)
//! ```
//!
//! Quantiles are exact generalized inverses of that step function, and the
//! conditional tail index is the log-quantile-spacing estimator
//!
//! ```text
//! gamma(alpha | z) = (1 / log J!) sum_{j=1..J} log q(1 - (1 - alpha)/j) - log q(alpha).
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::func_space::{inner_product, FunctionSample};
use crate::stats::BoxplotSummary;
use crate::synth::Dataset;

/// Fixed bandwidth used for the projected VaR scatter curves.
pub const SCATTER_BANDWIDTH: f64 = 5e-5;

/// Default number of quantile levels in the tail-index estimator.
pub const DEFAULT_J: usize = 9;

/// How covariates are compared to the evaluation point.
#[derive(Clone, Debug)]
pub enum CovariateView {
    /// `||X_i - z||` in the discrete L2 norm.
    Functional,
    /// `|<X_i, beta_tilde> - t|` for a unit-norm `beta_tilde`.
    Projected(FunctionSample),
}

impl CovariateView {
    pub fn projected(direction: FunctionSample) -> Result<Self> {
        check_unit(&direction)?;
        Ok(Self::Projected(direction))
    }
}

fn check_unit(direction: &FunctionSample) -> Result<()> {
    if (direction.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!(
            "projection direction must have unit norm, got {}",
            direction.norm()
        )));
    }
    Ok(())
}

/// Evaluation point: a curve for the functional view, a scalar for the
/// projected view.
#[derive(Clone, Debug)]
pub enum Location {
    Curve(FunctionSample),
    Scalar(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Smallest window holding `floor(n/5)` covariates, see [`adaptive_bandwidth`].
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
}

impl KernelConfig {
    pub fn fixed(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self {
            bandwidth: Bandwidth::Fixed(h),
        })
    }

    pub fn adaptive() -> Self {
        Self {
            bandwidth: Bandwidth::Adaptive,
        }
    }
}

/// Distances from every covariate to `z` under `view`.
pub fn distances(data: &Dataset, view: &CovariateView, z: &Location) -> Result<Vec<f64>> {
    match (view, z) {
        (CovariateView::Functional, Location::Curve(c)) => {
            data.x().iter().map(|x| x.distance(c)).collect()
        }
        (CovariateView::Projected(dir), Location::Scalar(t)) => data
            .x()
            .iter()
            .map(|x| Ok((inner_product(x, dir)? - t).abs()))
            .collect(),
        (CovariateView::Functional, Location::Scalar(_)) => {
            Err(Error::domain("functional view needs a curve as evaluation point"))
        }
        (CovariateView::Projected(_), Location::Curve(_)) => {
            Err(Error::domain("projected view needs a scalar evaluation point"))
        }
    }
}

/// `h*`: the `m`-th smallest distance (`m = floor(n/5)`) nudged up by
/// `1e-12 (1 + d_(m))`, so that exactly `m` distances fall strictly inside
/// when distances are distinct.
pub fn bandwidth_from_distances(dists: &[f64]) -> Result<f64> {
    let n = dists.len();
    if n < 5 {
        return Err(Error::insufficient(format!("adaptive bandwidth needs n >= 5, got {n}")));
    }
    let m = n / 5;
    let mut sorted = dists.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let dm = sorted[m - 1];
    if !dm.is_finite() {
        return Err(Error::Numerical("non-finite covariate distance".into()));
    }
    let h = dm + 1e-12 * (1.0 + dm);
    let inside = sorted.iter().filter(|&&d| d < h).count();
    if inside != m {
        log::debug!("adaptive bandwidth window holds {inside} points instead of {m} (ties)");
    }
    Ok(h)
}

pub fn adaptive_bandwidth(data: &Dataset, view: &CovariateView, z: &Location) -> Result<f64> {
    bandwidth_from_distances(&distances(data, view, z)?)
}

/// Kernel-weighted empirical law of `Y` at one evaluation point.
#[derive(Clone, Debug)]
pub struct ConditionalLaw {
    /// Distinct response values, ascending.
    support: Vec<f64>,
    /// `F(support[j])`; the last entry is exactly 1.
    cdf: Vec<f64>,
}

impl ConditionalLaw {
    pub fn new(ys: &[f64], dists: &[f64], h: f64) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::insufficient("empty dataset"));
        }
        if ys.len() != dists.len() {
            return Err(Error::domain("responses and distances differ in length"));
        }
        if !(h > 0.0) {
            return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
        }
        // Shifting every exponent by the smallest one leaves the ratio
        // unchanged and keeps the largest weight at exactly 1.
        let u2: Vec<f64> = dists.iter().map(|d| (d / h) * (d / h)).collect();
        let u2_min = u2.iter().copied().fold(f64::INFINITY, f64::min);
        if !u2_min.is_finite() {
            return Err(Error::Numerical("non-finite kernel argument".into()));
        }
        let mut pairs: Vec<(f64, f64)> = ys
            .iter()
            .zip(&u2)
            .map(|(&y, &u)| (y, (-(u - u2_min) / 2.0).exp()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut support = Vec::new();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for (j, &(y, w)) in pairs.iter().enumerate() {
            acc += w;
            if j + 1 == pairs.len() || pairs[j + 1].0 != y {
                support.push(y);
                cum.push(acc);
            }
        }
        let total = acc;
        let cdf = cum.iter().map(|c| c / total).collect();
        Ok(Self { support, cdf })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Right-continuous step cdf.
    pub fn cdf(&self, y: f64) -> f64 {
        let j = self.support.partition_point(|&s| s <= y);
        if j == 0 {
            0.0
        } else {
            self.cdf[j - 1]
        }
    }

    /// `inf { y > 0 : F(y) >= alpha }`, returned as an observed response:
    /// the generalized inverse when it is positive, otherwise the smallest
    /// positive response.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {alpha}")));
        }
        let j = self.cdf.partition_point(|&f| f < alpha).min(self.support.len() - 1);
        let q = self.support[j];
        if q > 0.0 {
            return Ok(q);
        }
        self.support
            .iter()
            .copied()
            .find(|&s| s > 0.0)
            .ok_or_else(|| Error::domain("no positive response: quantile over y > 0 is undefined"))
    }
}

fn resolve_bandwidth(cfg: &KernelConfig, dists: &[f64]) -> Result<f64> {
    match cfg.bandwidth {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::Adaptive => bandwidth_from_distances(dists),
    }
}

/// The kernel-weighted conditional law at `z`.
pub fn conditional_law(
    data: &Dataset,
    view: &CovariateView,
    z: &Location,
    cfg: &KernelConfig,
) -> Result<ConditionalLaw> {
    let dists = distances(data, view, z)?;
    let h = resolve_bandwidth(cfg, &dists)?;
    ConditionalLaw::new(data.y(), &dists, h)
}

pub fn conditional_cdf(
    data: &Dataset,
    view: &CovariateView,
    z: &Location,
    cfg: &KernelConfig,
    y: f64,
) -> Result<f64> {
    Ok(conditional_law(data, view, z, cfg)?.cdf(y))
}

pub fn conditional_quantile(
    data: &Dataset,
    view: &CovariateView,
    z: &Location,
    cfg: &KernelConfig,
    alpha: f64,
) -> Result<f64> {
    conditional_law(data, view, z, cfg)?.quantile(alpha)
}

/// Log-quantile-spacing tail index for an arbitrary quantile function.
pub fn hill_from_quantiles(
    quantile: impl Fn(f64) -> Result<f64>,
    alpha: f64,
    big_j: usize,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("level must lie in (0,1), got {alpha}")));
    }
    if big_j < 2 {
        return Err(Error::domain(format!("J must be at least 2, got {big_j}")));
    }
    let log_q = |level: f64| -> Result<f64> {
        let q = quantile(level)?;
        if !(q > 0.0) {
            return Err(Error::domain(format!("quantile at level {level} is {q}, not positive")));
        }
        Ok(q.ln())
    };
    let base = log_q(alpha)?;
    let mut sum = 0.0;
    let mut log_fact = 0.0;
    for j in 1..=big_j {
        let jf = j as f64;
        sum += log_q(1.0 - (1.0 - alpha) / jf)? - base;
        log_fact += jf.ln();
    }
    Ok(sum / log_fact)
}

pub fn functional_hill(
    data: &Dataset,
    view: &CovariateView,
    z: &Location,
    cfg: &KernelConfig,
    alpha: f64,
    big_j: usize,
) -> Result<f64> {
    let law = conditional_law(data, view, z, cfg)?;
    hill_from_quantiles(|a| law.quantile(a), alpha, big_j)
}

/// Target of a relative-error comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    Quantile,
    TailIndex { big_j: usize },
}

impl Functional {
    fn evaluate(&self, law: &ConditionalLaw, alpha: f64) -> Result<f64> {
        match *self {
            Functional::Quantile => law.quantile(alpha),
            Functional::TailIndex { big_j } => hill_from_quantiles(|a| law.quantile(a), alpha, big_j),
        }
    }
}

/// Equispaced grid over the projected data range `<X_i, x>`.
pub fn projection_grid(data: &Dataset, x_dir: &FunctionSample, grid_size: usize) -> Result<Vec<f64>> {
    if grid_size == 0 {
        return Err(Error::domain("grid size must be positive"));
    }
    let proj: Vec<f64> = data.x().iter().map(|x| inner_product(x, x_dir)).collect::<Result<_>>()?;
    let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if grid_size == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|l| if l + 1 == grid_size { hi } else { lo + step * l as f64 })
        .collect())
}

/// `psi(Y | X = s x)` with adaptive bandwidth for each `s`.
pub fn functional_curve(
    data: &Dataset,
    x_dir: &FunctionSample,
    s_grid: &[f64],
    alpha: f64,
    psi: Functional,
) -> Vec<Result<f64>> {
    s_grid
        .par_iter()
        .map(|&s| {
            let z = Location::Curve(x_dir.scaled(s));
            let law = conditional_law(data, &CovariateView::Functional, &z, &KernelConfig::adaptive())?;
            psi.evaluate(&law, alpha)
        })
        .collect()
}

/// `psi(Y | <X, b> = s <x, b>)` with adaptive bandwidth for each `s`.
pub fn projected_curve(
    data: &Dataset,
    x_dir: &FunctionSample,
    tilde_beta: &FunctionSample,
    s_grid: &[f64],
    alpha: f64,
    psi: Functional,
) -> Result<Vec<Result<f64>>> {
    check_unit(tilde_beta)?;
    let xb = inner_product(x_dir, tilde_beta)?;
    let proj: Vec<f64> = data
        .x()
        .iter()
        .map(|x| inner_product(x, tilde_beta))
        .collect::<Result<_>>()?;
    Ok(s_grid
        .par_iter()
        .map(|&s| {
            let t = s * xb;
            let dists: Vec<f64> = proj.iter().map(|p| (p - t).abs()).collect();
            let h = bandwidth_from_distances(&dists)?;
            let law = ConditionalLaw::new(data.y(), &dists, h)?;
            psi.evaluate(&law, alpha)
        })
        .collect())
}

/// Pointwise relative errors (in percent) of the projected estimator
/// against the functional one.
#[derive(Clone, Debug)]
pub struct RelativeErrorCurve {
    pub s: Vec<f64>,
    /// `None` where the projected value is zero or either estimate failed.
    pub delta: Vec<Option<f64>>,
    pub excluded: usize,
    pub summary: Option<BoxplotSummary>,
}

impl RelativeErrorCurve {
    pub fn from_estimates(s: Vec<f64>, functional: &[Result<f64>], projected: &[Result<f64>]) -> Self {
        let delta: Vec<Option<f64>> = functional
            .iter()
            .zip(projected)
            .map(|(f, p)| match (f, p) {
                (Ok(f), Ok(p)) if *p != 0.0 => {
                    let d = 100.0 * ((f - p) / p).abs();
                    d.is_finite().then_some(d)
                }
                _ => None,
            })
            .collect();
        let kept: Vec<f64> = delta.iter().flatten().copied().collect();
        let excluded = delta.len() - kept.len();
        if excluded > 0 {
            log::warn!("{excluded} grid points excluded from the relative-error curve");
        }
        let summary = BoxplotSummary::from_values(&kept, excluded);
        Self {
            s,
            delta,
            excluded,
            summary,
        }
    }
}

pub fn relative_error_curve(
    data: &Dataset,
    x_dir: &FunctionSample,
    tilde_beta: &FunctionSample,
    alpha: f64,
    psi: Functional,
    grid_size: usize,
) -> Result<RelativeErrorCurve> {
    let s = projection_grid(data, x_dir, grid_size)?;
    let f = functional_curve(data, x_dir, &s, alpha, psi);
    let p = projected_curve(data, x_dir, tilde_beta, &s, alpha, psi)?;
    Ok(RelativeErrorCurve::from_estimates(s, &f, &p))
}
