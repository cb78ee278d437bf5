//! Monte Carlo experiments on the synthetic model and executable oracles
//! for the order-statistic identities the estimator relies on.

mod oracles;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use oracles::{
    conditional_tail_moment_mc, conditional_tail_moment_oracle, joint_cell_probability, joint_histogram,
    joint_mass, ln_factorial, marginal_over_t, order_stat_density, order_stat_joint_density, Cell,
    ConditionalMc, JointDensity, TailMomentOracle,
};

use crate::error::{Error, Result};
use crate::estimator::{rate_delta, FeplsPath, SelectionOptions, TestFunction};
use crate::func_space::{inner_product, FunctionSample};
use crate::seeding::derive_seed;
use crate::stats::{median, ols, quantile_sorted};
use crate::synth::{draw_range, ModelSpec};

/// How replication seeds are derived from the plan seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStrategy {
    /// Replication `r` uses `derive_seed(seed, r)`.
    Split,
    /// Every replication reuses the plan seed.
    Repeat,
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub spec: ModelSpec,
    pub replications: usize,
    pub k_values: Vec<usize>,
    pub tau_values: Vec<f64>,
    pub seed: u64,
    pub selection: SelectionOptions,
    pub seeds: SeedStrategy,
}

impl ExperimentPlan {
    /// Curves over `k = 5..=n/5` for the model's own `tau`.
    pub fn new(spec: ModelSpec, replications: usize, seed: u64) -> Self {
        let k_max = (spec.n / 5).max(5);
        Self {
            k_values: (5..=k_max).collect(),
            tau_values: vec![spec.tau],
            spec,
            replications,
            seed,
            selection: SelectionOptions::default(),
            seeds: SeedStrategy::Split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.replications < 2 {
            return Err(Error::domain(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.k_values.is_empty() {
            return Err(Error::domain("no k values requested"));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > self.spec.n) {
            return Err(Error::domain(format!("k = {k} outside [1, {}]", self.spec.n)));
        }
        if self.tau_values.is_empty() {
            return Err(Error::domain("no test-function exponents requested"));
        }
        for &tau in &self.tau_values {
            TestFunction::new(tau)?;
        }
        Ok(())
    }

    /// `(tau, admissible)` for each requested exponent.
    pub fn admissibility(&self) -> Vec<(f64, bool)> {
        self.tau_values
            .iter()
            .map(|&tau| (tau, tau_admissible(self.spec.kappa, tau, self.spec.law.gamma())))
            .collect()
    }

    fn replication_seed(&self, r: usize) -> u64 {
        match self.seeds {
            SeedStrategy::Split => derive_seed(self.seed, r as u64),
            SeedStrategy::Repeat => self.seed,
        }
    }
}

/// `0 < 2 (kappa + tau) gamma < 1`.
/// Test exponents used for each cell of the nine-cell simulation design.
///
/// `None` when `(kappa, gamma)` is not one of the design cells.
pub fn design_tau_values(kappa: f64, gamma: f64) -> Option<[f64; 3]> {
    let is = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let kappa_row = [1.0, 1.5, 2.0].iter().position(|&k| is(k, kappa))?;
    let gamma_col = [1.0 / 3.0, 0.5, 0.9].iter().position(|&g| is(g, gamma))?;
    Some(match (kappa_row, gamma_col) {
        (0, 0) => [0.0, -1.0, -2.0],
        (0, _) | (1, _) | (2, 0) => [-1.0, -2.0, -3.0],
        _ => [-2.0, -3.0, -4.0],
    })
}

pub fn tau_admissible(kappa: f64, tau: f64, gamma: f64) -> bool {
    let c = 2.0 * (kappa + tau) * gamma;
    c > 0.0 && c < 1.0
}

/// Pointwise band of the selected direction over replications.
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub lower: Vec<f64>,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TauResult {
    pub tau: f64,
    pub admissible: bool,
    /// Average `<beta_hat(Y_{n-k+1,n}), beta>` for each requested `k`.
    pub mean_inner: Vec<f64>,
    /// Average `r(k)` for each requested `k`.
    pub mean_correlation: Vec<f64>,
    /// 5%-95% band of `beta_hat` at the selected threshold.
    pub band: Option<Band>,
    pub selected_k: BTreeMap<usize, usize>,
    /// `<beta_hat(Y_{n-k_hat+1,n}), beta>` per replication.
    pub selected_inner: Vec<Option<f64>>,
    /// `||beta_hat(Y_{n-k_hat+1,n}) - beta||` per replication.
    pub errors: Vec<Option<f64>>,
    pub failures: Vec<(usize, String)>,
}

impl TauResult {
    pub fn mean_selected_inner(&self) -> Option<f64> {
        let v: Vec<f64> = self.selected_inner.iter().flatten().copied().collect();
        crate::stats::mean(&v)
    }

    pub fn successes(&self) -> usize {
        self.selected_inner.len() - self.failures.len()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub k_values: Vec<usize>,
    pub replications: usize,
    pub per_tau: Vec<TauResult>,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.per_tau.iter().map(|t| t.failures.len()).sum()
    }
}

struct Replication {
    inner: Vec<f64>,
    correlation: Vec<f64>,
    selected_k: usize,
    direction: FunctionSample,
    selected_inner: f64,
    error: f64,
}

fn replicate(plan: &ExperimentPlan, data: &crate::synth::Dataset, tau: f64) -> Result<Replication> {
    let beta = &plan.spec.index;
    let path = FeplsPath::new(data, TestFunction::new(tau)?)?;
    let mut inner = Vec::with_capacity(plan.k_values.len());
    let mut correlation = Vec::with_capacity(plan.k_values.len());
    for &k in &plan.k_values {
        inner.push(inner_product(&path.direction(k)?, beta)?);
        correlation.push(path.correlation(k)?);
    }
    let selected_k = path.select_k(plan.selection)?.k;
    let direction = path.direction(selected_k)?;
    let selected_inner = inner_product(&direction, beta)?;
    let error = direction.distance(beta)?;
    Ok(Replication {
        inner,
        correlation,
        selected_k,
        direction,
        selected_inner,
        error,
    })
}

/// Runs all replications in parallel and aggregates them in replication
/// order, so the result does not depend on the worker count.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    for (tau, ok) in plan.admissibility() {
        if !ok {
            log::warn!("tau = {tau} violates 0 < 2(kappa + tau) gamma < 1 for this design");
        }
    }
    let outcomes: Vec<Vec<Result<Replication>>> = (0..plan.replications)
        .into_par_iter()
        .map(|r| match draw_range(&plan.spec, plan.replication_seed(r), 0..plan.spec.n) {
            Ok(data) => plan.tau_values.iter().map(|&tau| replicate(plan, &data, tau)).collect(),
            Err(e) => {
                let msg = e.to_string();
                plan.tau_values
                    .iter()
                    .map(|_| Err(Error::Numerical(format!("generation failed: {msg}"))))
                    .collect()
            }
        })
        .collect();

    let per_tau = plan
        .tau_values
        .iter()
        .enumerate()
        .map(|(j, &tau)| aggregate(plan, tau, outcomes.iter().map(|o| &o[j])))
        .collect();
    Ok(ExperimentResult {
        k_values: plan.k_values.clone(),
        replications: plan.replications,
        per_tau,
    })
}

fn aggregate<'a>(
    plan: &ExperimentPlan,
    tau: f64,
    reps: impl Iterator<Item = &'a Result<Replication>>,
) -> TauResult {
    let nk = plan.k_values.len();
    let mut sum_inner = vec![0.0; nk];
    let mut sum_corr = vec![0.0; nk];
    let mut directions: Vec<&FunctionSample> = Vec::new();
    let mut selected_k = BTreeMap::new();
    let mut selected_inner = Vec::new();
    let mut errors = Vec::new();
    let mut failures = Vec::new();
    for (r, rep) in reps.enumerate() {
        match rep {
            Ok(rep) => {
                for (s, v) in sum_inner.iter_mut().zip(&rep.inner) {
                    *s += v;
                }
                for (s, v) in sum_corr.iter_mut().zip(&rep.correlation) {
                    *s += v;
                }
                *selected_k.entry(rep.selected_k).or_insert(0) += 1;
                directions.push(&rep.direction);
                selected_inner.push(Some(rep.selected_inner));
                errors.push(Some(rep.error));
            }
            Err(e) => {
                failures.push((r, e.to_string()));
                selected_inner.push(None);
                errors.push(None);
            }
        }
    }
    let ok = directions.len() as f64;
    let avg = |s: Vec<f64>| -> Vec<f64> { s.into_iter().map(|v| v / ok).collect() };
    TauResult {
        tau,
        admissible: tau_admissible(plan.spec.kappa, tau, plan.spec.law.gamma()),
        mean_inner: avg(sum_inner),
        mean_correlation: avg(sum_corr),
        band: pointwise_band(&directions, 0.05, 0.95),
        selected_k,
        selected_inner,
        errors,
        failures,
    }
}

/// Pointwise `lo`/`hi` quantiles and mean of a set of curves.
pub fn pointwise_band(curves: &[&FunctionSample], lo: f64, hi: f64) -> Option<Band> {
    let first = curves.first()?;
    let d = first.len();
    let mut band = Band {
        lower: Vec::with_capacity(d),
        mean: Vec::with_capacity(d),
        upper: Vec::with_capacity(d),
    };
    let mut column = vec![0.0; curves.len()];
    for t in 0..d {
        for (c, curve) in column.iter_mut().zip(curves) {
            *c = curve.values()[t];
        }
        band.mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(|a, b| a.total_cmp(b));
        band.lower.push(quantile_sorted(&column, lo));
        band.upper.push(quantile_sorted(&column, hi));
    }
    Some(band)
}

/// How the threshold `k` grows with `n` in a rate study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KRule {
    /// `k = ceil(n^a)`.
    Power(f64),
    Fixed(usize),
}

impl KRule {
    pub fn k(&self, n: usize) -> usize {
        match *self {
            KRule::Power(a) => (n as f64).powf(a).ceil() as usize,
            KRule::Fixed(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub median_error: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateOutcome {
    pub points: Vec<RatePoint>,
    /// Slope of `log(median error)` on `log(delta)`; `None` when every
    /// error is at round-off level and the fit is exact.
    pub slope: Option<f64>,
    pub exact_fit: bool,
}

impl RateOutcome {
    /// Errors shrink no slower than about `delta`.
    pub fn consistent(&self) -> bool {
        self.exact_fit || self.slope.is_some_and(|s| (0.5..=1.5).contains(&s))
    }
}

/// Empirical decay of the median estimation error against the theoretical
/// rate `delta_{n,k}` evaluated at the deterministic threshold `U(n/k)`.
pub fn rate_regression(
    spec: &ModelSpec,
    n_values: &[usize],
    k_rule: KRule,
    replications: usize,
    seed: u64,
    q: f64,
) -> Result<RateOutcome> {
    if n_values.len() < 3 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("need at least 3 strictly increasing sample sizes"));
    }
    if replications == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    let phi = TestFunction::new(spec.tau)?;
    let mut points = Vec::with_capacity(n_values.len());
    for (j, &n) in n_values.iter().enumerate() {
        let k = k_rule.k(n);
        if k == 0 || k >= n {
            return Err(Error::domain(format!("k = {k} invalid for n = {n}")));
        }
        let mut s = spec.clone();
        s.n = n;
        let y_nk = s.law.tail_quantile(n as f64 / k as f64)?;
        let delta = rate_delta(s.link(y_nk), k, n, q)?;
        let level_seed = derive_seed(seed, j as u64);
        let errs: Vec<Result<f64>> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let data = draw_range(&s, derive_seed(level_seed, r as u64), 0..s.n)?;
                let dir = FeplsPath::new(&data, phi)?.direction(k)?;
                dir.distance(&s.index)
            })
            .collect();
        let ok: Vec<f64> = errs.iter().filter_map(|e| e.as_ref().ok().copied()).collect();
        let failures = errs.len() - ok.len();
        let median_error = median(&ok)
            .ok_or_else(|| Error::Numerical(format!("every replication failed at n = {n}")))?;
        points.push(RatePoint {
            n,
            k,
            delta,
            median_error,
            failures,
        });
    }
    let scale = points.iter().map(|p| p.delta).fold(0.0, f64::max);
    if points.iter().all(|p| p.median_error <= 1e-12 * scale.max(1.0)) {
        return Ok(RateOutcome {
            points,
            slope: None,
            exact_fit: true,
        });
    }
    let lx: Vec<f64> = points.iter().map(|p| p.delta.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.median_error.ln()).collect();
    if ly.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("zero median error at some sample size".into()));
    }
    let (slope, _) = ols(&lx, &ly)?;
    Ok(RateOutcome {
        points,
        slope: Some(slope),
        exact_fit: false,
    })
}
