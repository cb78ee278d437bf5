//! Synthetic data from the inverse single-index model
//! `X = g(Y) beta + eps`, with a Burr response, power link `g(y) = y^kappa`
//! and conditional fractional Brownian motion noise
//! `eps | Y = y  ~  sigma(y) B^H + mu`.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::func_space::{normalize, FunctionSample, Grid};
use crate::heavy_tails::BurrLaw;
use crate::seeding::stream_rng;

/// Covariance of `sigma B^H` at `(s, t)`:
/// `(sigma^2 / 2) (t^2H + s^2H - |t - s|^2H)`.
pub fn fbm_covariance(hurst: f64, sigma: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("noise scale must be >= 0, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("fBm time arguments must lie in [0,1], got ({s}, {t})")));
    }
    Ok(sigma * sigma * unit_fbm_cov(hurst, s, t))
}

fn unit_fbm_cov(hurst: f64, s: f64, t: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::domain(format!("Hurst parameter must lie in (0,1), got {hurst}")));
    }
    Ok(())
}

/// In-place lower Cholesky factor of a packed row-major `m x m` matrix.
/// Returns the pivots (squared diagonal entries) or the failing index.
fn cholesky(a: &mut [f64], m: usize) -> std::result::Result<Vec<f64>, usize> {
    let mut pivots = Vec::with_capacity(m);
    for j in 0..m {
        let mut diag = a[j * m + j];
        for p in 0..j {
            diag -= a[j * m + p] * a[j * m + p];
        }
        if !(diag > 0.0) {
            return Err(j);
        }
        pivots.push(diag);
        let ljj = diag.sqrt();
        a[j * m + j] = ljj;
        for i in (j + 1)..m {
            let mut v = a[i * m + j];
            for p in 0..j {
                v -= a[i * m + p] * a[j * m + p];
            }
            a[i * m + j] = v / ljj;
        }
        for i in 0..j {
            a[i * m + j] = 0.0;
        }
    }
    Ok(pivots)
}

/// Unit-scale fBm sampler on a fixed grid. The value at `t = 0` is pinned.
#[derive(Clone, Debug)]
pub struct FbmSampler {
    grid: Grid,
    hurst: f64,
    /// Lower Cholesky factor over the grid points `> 0`.
    factor: Vec<f64>,
    pivots: Vec<f64>,
    jitter: f64,
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: &Grid) -> Result<Self> {
        check_hurst(hurst)?;
        let pts = &grid.points()[1..];
        let m = pts.len();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] = unit_fbm_cov(hurst, pts[i], pts[j]);
            }
        }
        let max_diag = (0..m).map(|i| cov[i * m + i]).fold(0.0, f64::max);

        // Plain factorization first, then jitter 1e-12 * max(diag) escalated
        // by x10 at most three times.
        let mut jitter = 0.0;
        for attempt in 0..5 {
            let mut a = cov.clone();
            for i in 0..m {
                a[i * m + i] += jitter;
            }
            match cholesky(&mut a, m) {
                Ok(pivots) => {
                    if jitter > 0.0 {
                        log::debug!("fBm covariance factorized with jitter {jitter:e}");
                    }
                    return Ok(Self {
                        grid: grid.clone(),
                        hurst,
                        factor: a,
                        pivots,
                        jitter,
                    });
                }
                Err(_) if attempt < 4 => {
                    jitter = if jitter == 0.0 { 1e-12 * max_diag } else { jitter * 10.0 };
                }
                Err(j) => {
                    return Err(Error::Numerical(format!(
                        "fBm covariance not positive definite at pivot {j} (H={hurst}, d={})",
                        grid.len()
                    )))
                }
            }
        }
        unreachable!()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Cholesky pivots of the (possibly jittered) covariance.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// One path of `sigma B^H + mu` on the grid.
    pub fn draw<R: Rng + ?Sized>(&self, sigma: f64, mu: f64, rng: &mut R) -> Result<FunctionSample> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("noise scale must be >= 0, got {sigma}")));
        }
        let m = self.grid.len() - 1;
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = Vec::with_capacity(m + 1);
        values.push(mu);
        for i in 0..m {
            let row = &self.factor[i * m..i * m + i + 1];
            let lz: f64 = row.iter().zip(&z).map(|(l, z)| l * z).sum();
            values.push(mu + sigma * lz);
        }
        FunctionSample::new(self.grid.clone(), values)
    }
}

/// Draws one fBm path with mean `mu` and scale `sigma`.
pub fn sample_fbm(hurst: f64, sigma: f64, mu: f64, grid: &Grid, seed: u64) -> Result<FunctionSample> {
    FbmSampler::new(hurst, grid)?.draw(sigma, mu, &mut stream_rng(seed, 0))
}

/// `t -> sqrt(2) sin(2 pi t)`, as sampled on the grid.
pub fn default_index_raw(grid: &Grid) -> FunctionSample {
    FunctionSample::from_fn(grid, |t| std::f64::consts::SQRT_2 * (2.0 * std::f64::consts::PI * t).sin())
        .expect("finite by construction")
}

/// The sine index renormalized to unit discrete norm.
pub fn default_index(grid: &Grid) -> Result<FunctionSample> {
    normalize(&default_index_raw(grid))
}

/// Conditional noise scale `sigma(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaRule {
    /// `sigma(y) = c g(y)`.
    LinkFraction(f64),
    Constant(f64),
}

impl SigmaRule {
    pub fn eval(&self, link_value: f64) -> f64 {
        match *self {
            SigmaRule::LinkFraction(c) => c * link_value,
            SigmaRule::Constant(c) => c,
        }
    }
}

impl Default for SigmaRule {
    fn default() -> Self {
        SigmaRule::LinkFraction(0.1)
    }
}

/// Generative model configuration.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub law: BurrLaw,
    pub kappa: f64,
    /// Test-function exponent the model is meant to be fitted with; only used
    /// for the admissibility report.
    pub tau: f64,
    pub index: FunctionSample,
    pub hurst: f64,
    pub mu: f64,
    pub sigma_rule: SigmaRule,
    pub grid: Grid,
    pub n: usize,
}

impl ModelSpec {
    /// Simulation defaults: sine index, `H = 1/3`, `mu = 200`,
    /// `sigma = g/10`, `tau = -2`, `d = 101`, `n = 500`.
    pub fn new(law: BurrLaw, kappa: f64) -> Result<Self> {
        let grid = Grid::new(101)?;
        Ok(Self {
            law,
            kappa,
            tau: -2.0,
            index: default_index(&grid)?,
            hurst: 1.0 / 3.0,
            mu: 200.0,
            sigma_rule: SigmaRule::default(),
            grid,
            n: 500,
        })
    }

    /// Replaces the grid and re-evaluates the default sine index on it.
    pub fn with_grid_size(mut self, d: usize) -> Result<Self> {
        self.grid = Grid::new(d)?;
        self.index = default_index(&self.grid)?;
        Ok(self)
    }

    /// No noise at all: `sigma = 0`, `mu = 0`.
    pub fn noiseless(mut self) -> Self {
        self.sigma_rule = SigmaRule::Constant(0.0);
        self.mu = 0.0;
        self
    }

    #[inline]
    pub fn link(&self, y: f64) -> f64 {
        y.powf(self.kappa)
    }

    /// `0 < 2 (kappa + tau) gamma < 1`.
    pub fn admissible(&self) -> bool {
        let c = 2.0 * (self.kappa + self.tau) * self.law.gamma();
        c > 0.0 && c < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::domain(format!("link exponent must be positive, got {}", self.kappa)));
        }
        check_hurst(self.hurst)?;
        if self.index.grid() != &self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.len(),
                right: self.index.len(),
            });
        }
        if (self.index.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "index must have unit norm, got {}",
                self.index.norm()
            )));
        }
        if self.n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("noise mean must be finite"));
        }
        Ok(())
    }
}

/// Where a synthetic dataset came from.
#[derive(Clone, Debug)]
pub struct Origin {
    pub spec: ModelSpec,
    pub seed: u64,
    /// The noise draws `eps_i`.
    pub noise: Vec<FunctionSample>,
}

/// Paired sample `(X_i, Y_i)`.
#[derive(Clone, Debug)]
pub struct Dataset {
    grid: Grid,
    x: Vec<FunctionSample>,
    y: Vec<f64>,
    origin: Option<Box<Origin>>,
}

impl Dataset {
    pub fn new(x: Vec<FunctionSample>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain(format!(
                "{} covariates but {} responses",
                x.len(),
                y.len()
            )));
        }
        let grid = x
            .first()
            .map(|f| f.grid().clone())
            .ok_or_else(|| Error::insufficient("empty dataset"))?;
        if let Some(bad) = x.iter().find(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch {
                left: grid.len(),
                right: bad.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("response {i} is not finite")));
        }
        Ok(Self {
            grid,
            x,
            y,
            origin: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &[FunctionSample] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn origin(&self) -> Option<&Origin> {
        self.origin.as_deref()
    }

    /// Applies `f` to every covariate curve.
    pub fn map_x(&self, f: impl Fn(&FunctionSample) -> FunctionSample) -> Result<Self> {
        Self::new(self.x.iter().map(f).collect(), self.y.clone())
    }
}

/// Draws the full dataset; observation `i` uses stream `i` of `seed`.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<Dataset> {
    generate_range(spec, seed, 0..spec.n)
}

/// Observations `range` of the stream that [`generate`] draws from.
pub fn generate_range(spec: &ModelSpec, seed: u64, range: Range<usize>) -> Result<Dataset> {
    if !spec.admissible() {
        log::warn!(
            "2(kappa + tau) gamma = {} lies outside (0, 1)",
            2.0 * (spec.kappa + spec.tau) * spec.law.gamma()
        );
    }
    draw_range(spec, seed, range)
}

/// Same stream as [`generate_range`], without the admissibility warning.
pub(crate) fn draw_range(spec: &ModelSpec, seed: u64, range: Range<usize>) -> Result<Dataset> {
    spec.validate()?;
    if range.is_empty() {
        return Err(Error::domain("empty observation range"));
    }
    let sampler = FbmSampler::new(spec.hurst, &spec.grid)?;
    let draws: Vec<(f64, FunctionSample, FunctionSample)> = range
        .into_par_iter()
        .map(|i| draw_observation(spec, &sampler, &mut stream_rng(seed, i as u64)))
        .collect::<Result<_>>()?;

    let mut x = Vec::with_capacity(draws.len());
    let mut y = Vec::with_capacity(draws.len());
    let mut noise = Vec::with_capacity(draws.len());
    for (yi, xi, ei) in draws {
        y.push(yi);
        x.push(xi);
        noise.push(ei);
    }
    let mut data = Dataset::new(x, y)?;
    data.origin = Some(Box::new(Origin {
        spec: spec.clone(),
        seed,
        noise,
    }));
    Ok(data)
}

fn draw_observation(
    spec: &ModelSpec,
    sampler: &FbmSampler,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, FunctionSample, FunctionSample)> {
    let y = spec.law.draw(rng);
    let g = spec.link(y);
    let eps = sampler.draw(spec.sigma_rule.eval(g), spec.mu, rng)?;
    let x = compose(g, &spec.index, &eps)?;
    Ok((y, x, eps))
}

/// `g beta + eps`.
pub fn compose(g: f64, index: &FunctionSample, eps: &FunctionSample) -> Result<FunctionSample> {
    eps.add_scaled(g, index)
}
