//! Closed forms for the joint law of a response and the random threshold
//! `Y_{n-k+1,n}`, with quadrature and Monte Carlo counterparts.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heavy_tails::BurrLaw;
use crate::integrate;
use crate::seeding::stream_rng;

const QUAD_TOL: f64 = 1e-14;

/// `ln(m!)`.
pub fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

fn ln_density(law: &BurrLaw, y: f64) -> f64 {
    let a = -law.rho() / law.gamma();
    (a - 1.0) * y.ln() + (1.0 / law.rho() - 1.0) * y.powf(a).ln_1p() - law.gamma().ln()
}

fn ln_survival(law: &BurrLaw, y: f64) -> f64 {
    let a = -law.rho() / law.gamma();
    y.powf(a).ln_1p() / law.rho()
}

fn ln_cdf(law: &BurrLaw, y: f64) -> f64 {
    (-ln_survival(law, y).exp_m1()).ln()
}

/// `e * ln(x)` with the convention `0 * ln(0) = 0`.
fn pow_term(e: usize, ln_x: f64) -> f64 {
    if e == 0 {
        0.0
    } else {
        e as f64 * ln_x
    }
}

/// Value of the joint density; `in_support` is false when `y > t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointDensity {
    pub value: f64,
    pub in_support: bool,
}

/// Density of `(Y_i, Y_{n-k+1,n})` on `{y < t}`:
/// `f(t) f(y) (n-1)!/((n-k)!(k-2)!) F(y)^(n-k) F_bar(y)^(k-2)`.
///
/// This is the continuous part of the joint law. It carries mass
/// `(k-1)/n`; the rest sits on the diagonal (`Y_i` is the threshold) and
/// below it.
pub fn order_stat_joint_density(law: &BurrLaw, n: usize, k: usize, t: f64, y: f64) -> Result<JointDensity> {
    if !(k >= 2 && k < n) {
        return Err(Error::domain(format!("joint density needs 2 <= k < n, got n = {n}, k = {k}")));
    }
    if y.is_nan() || t.is_nan() {
        return Err(Error::domain("joint density evaluated at NaN"));
    }
    if y > t {
        return Ok(JointDensity {
            value: 0.0,
            in_support: false,
        });
    }
    if !(y > 0.0) || !t.is_finite() {
        return Ok(JointDensity {
            value: 0.0,
            in_support: true,
        });
    }
    let ln_c = ln_factorial(n - 1) - ln_factorial(n - k) - ln_factorial(k - 2);
    let ln_v = ln_density(law, t)
        + ln_density(law, y)
        + ln_c
        + pow_term(n - k, ln_cdf(law, y))
        + pow_term(k - 2, ln_survival(law, y));
    Ok(JointDensity {
        value: ln_v.exp(),
        in_support: true,
    })
}

/// Density of `Y_{n-k+1,n}`:
/// `f(y) n!/((n-k)!(k-1)!) F(y)^(n-k) F_bar(y)^(k-1)`.
pub fn order_stat_density(law: &BurrLaw, n: usize, k: usize, y: f64) -> Result<f64> {
    if !(k >= 1 && k <= n) {
        return Err(Error::domain(format!("order statistic needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    if !(y > 0.0) || !y.is_finite() {
        return Ok(0.0);
    }
    let ln_c = ln_factorial(n) - ln_factorial(n - k) - ln_factorial(k - 1);
    Ok((ln_density(law, y) + ln_c + pow_term(n - k, ln_cdf(law, y)) + pow_term(k - 1, ln_survival(law, y)))
        .exp())
}

/// `int_y^inf f_{n,k}(t, y) dt` by quadrature.
pub fn marginal_over_t(law: &BurrLaw, n: usize, k: usize, y: f64) -> Result<f64> {
    order_stat_joint_density(law, n, k, y, y)?;
    if !(y > 0.0) {
        return Ok(0.0);
    }
    let decay = 1.0 + 1.0 / law.gamma();
    let i = integrate::upper_tail(
        |t| order_stat_joint_density(law, n, k, t, y).map_or(f64::NAN, |j| j.value),
        y,
        decay,
        QUAD_TOL,
    )?;
    Ok(i.value)
}

/// Total mass of the joint density over `{0 < y <= t}` by nested
/// quadrature.
pub fn joint_mass(law: &BurrLaw, n: usize, k: usize) -> Result<f64> {
    order_stat_joint_density(law, n, k, 1.0, 1.0)?;
    // The marginal in y decays like y^-(1 + k/gamma) and behaves like a
    // power of y at the origin.
    let a = -law.rho() / law.gamma();
    let p = 1.0 / (a * (n - k + 1) as f64);
    let head = integrate::finite(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let y = w.powf(p);
            marginal_over_t(law, n, k, y).unwrap_or(f64::NAN) * p * y / w
        },
        0.0,
        1.0,
        2,
        QUAD_TOL,
    );
    let tail = integrate::upper_tail(
        |y| marginal_over_t(law, n, k, y).unwrap_or(f64::NAN),
        1.0,
        1.0 + k as f64 / law.gamma(),
        QUAD_TOL,
    )?;
    Ok(head.value + tail.value)
}

/// Rectangle `[t_lo, t_hi) x [y_lo, y_hi)` in the `(Y_i, threshold)` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub t_lo: f64,
    pub t_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Cell {
    fn contains(&self, t: f64, y: f64) -> bool {
        t >= self.t_lo && t < self.t_hi && y >= self.y_lo && y < self.y_hi
    }
}

/// Mass of the joint density inside `cell`, restricted to `y <= t`.
pub fn joint_cell_probability(law: &BurrLaw, n: usize, k: usize, cell: &Cell) -> Result<f64> {
    order_stat_joint_density(law, n, k, 1.0, 1.0)?;
    if !(cell.t_lo < cell.t_hi && cell.y_lo < cell.y_hi && cell.y_lo >= 0.0) {
        return Err(Error::domain(format!("malformed cell {cell:?}")));
    }
    let inner = |y: f64| {
        let lo = cell.t_lo.max(y);
        if lo >= cell.t_hi {
            return 0.0;
        }
        integrate::finite(
            |t| order_stat_joint_density(law, n, k, t, y).map_or(f64::NAN, |j| j.value),
            lo,
            cell.t_hi,
            1,
            QUAD_TOL,
        )
        .value
    };
    // Split the outer range where the inner limit stops being clamped.
    let kink = cell.t_lo.clamp(cell.y_lo, cell.y_hi);
    let mut total = 0.0;
    for (a, b) in [(cell.y_lo, kink), (kink, cell.y_hi.min(cell.t_hi))] {
        if b > a {
            total += integrate::finite(inner, a, b, 1, QUAD_TOL).value;
        }
    }
    Ok(total)
}

const CHUNK: u64 = 1 << 16;

/// Index of the `k`-th largest response among `v`, expressed through the
/// survival draws: large responses are small `v`.
fn kth_smallest(v: &mut [f64], k: usize) -> f64 {
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    *kth
}

/// Counts, per cell, the draws where `Y_1` strictly exceeds
/// `Y_{n-k+1,n}` and `(Y_1, Y_{n-k+1,n})` falls in the cell.
pub fn joint_histogram(law: &BurrLaw, n: usize, k: usize, draws: u64, seed: u64, cells: &[Cell]) -> Result<Vec<u64>> {
    order_stat_joint_density(law, n, k, 1.0, 1.0)?;
    let chunks = draws.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let mut v = vec![0.0; n];
            let mut counts = vec![0u64; cells.len()];
            let m = CHUNK.min(draws - c * CHUNK);
            for _ in 0..m {
                for x in v.iter_mut() {
                    *x = rng.sample(Open01);
                }
                let v1 = v[0];
                let vk = kth_smallest(&mut v, k);
                if v1 >= vk {
                    continue;
                }
                let t = law.quantile_of_survival(v1);
                let y = law.quantile_of_survival(vk);
                for (cnt, cell) in counts.iter_mut().zip(cells) {
                    if cell.contains(t, y) {
                        *cnt += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; cells.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts)
}

/// Exact and first-order values of
/// `E(h(Y_i) 1{Y_i > Y_{n-k+1,n}} | Y_{n-k+1,n} = y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailMomentOracle {
    /// `((k-1)/n) F_bar(y)^-1 int_y^inf h f`.
    pub exact: f64,
    /// `((k-1)/n) h(y) / (1 - tau_h gamma)`.
    pub asymptotic: f64,
    pub error_estimate: f64,
}

/// `h` is regularly varying with index `h_index`; the integral diverges
/// unless `h_index * gamma < 1`.
pub fn conditional_tail_moment_oracle(
    law: &BurrLaw,
    h: impl Fn(f64) -> f64,
    h_index: f64,
    n: usize,
    k: usize,
    y: f64,
) -> Result<TailMomentOracle> {
    if !(k >= 2 && k <= n) {
        return Err(Error::domain(format!("need 2 <= k <= n, got n = {n}, k = {k}")));
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("conditioning value must be finite and >= 0, got {y}")));
    }
    let g = law.gamma();
    if !(h_index * g < 1.0) {
        return Err(Error::domain(format!(
            "int h f diverges: index {h_index} times gamma {g} is not below 1"
        )));
    }
    let integrand = |t: f64| if t > 0.0 { h(t) * law.density(t).unwrap_or(0.0) } else { 0.0 };
    let decay = 1.0 + 1.0 / g - h_index;
    let integral = if y > 0.0 {
        integrate::upper_tail(integrand, y, decay, QUAD_TOL)?
    } else {
        // The density near 0 behaves like t^(a-1); t = w^(1/a) removes it.
        let a = -law.rho() / g;
        let head = integrate::finite(
            |w| {
                if w <= 0.0 {
                    return 0.0;
                }
                let t = w.powf(1.0 / a);
                integrand(t) * t / (a * w)
            },
            0.0,
            1.0,
            2,
            QUAD_TOL,
        );
        head + integrate::upper_tail(integrand, 1.0, decay, QUAD_TOL)?
    };
    if !integral.value.is_finite() {
        return Err(Error::domain("tail integral of h f did not converge"));
    }
    let ratio = (k - 1) as f64 / n as f64;
    let surv = law.survival(y)?;
    Ok(TailMomentOracle {
        exact: ratio * integral.value / surv,
        asymptotic: ratio * h(y) / (1.0 - h_index * g),
        error_estimate: ratio * integral.error_estimate / surv,
    })
}

/// Conditional Monte Carlo estimate of the tail moment given a threshold in
/// `[y, y + 0.05 y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMc {
    pub mean: f64,
    pub std_error: f64,
    pub hits: usize,
    pub trials: u64,
    /// Threshold value of each conditioned trial, in trial order.
    pub thresholds: Vec<f64>,
}

const MC_BATCH: u64 = 4096;

pub fn conditional_tail_moment_mc(
    law: &BurrLaw,
    h: impl Fn(f64) -> f64 + Sync,
    n: usize,
    k: usize,
    y: f64,
    min_hits: usize,
    seed: u64,
) -> Result<ConditionalMc> {
    if !(k >= 2 && k <= n) {
        return Err(Error::domain(format!("need 2 <= k <= n, got n = {n}, k = {k}")));
    }
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("conditioning value must be finite and > 0, got {y}")));
    }
    let hi = y * 1.05;
    let max_batches: u64 = 1 << 20;
    let mut values: Vec<f64> = Vec::new();
    let mut thresholds: Vec<f64> = Vec::new();
    let mut next = 0u64;
    let mut round = 8u64;
    while values.len() < min_hits.max(2) {
        if next >= max_batches {
            return Err(Error::insufficient(format!(
                "only {} conditioned hits after {} trials",
                values.len(),
                next * MC_BATCH
            )));
        }
        let batches: Vec<Vec<(f64, f64)>> = (next..(next + round).min(max_batches))
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, b);
                let mut v = vec![0.0; n];
                let mut hits = Vec::new();
                for _ in 0..MC_BATCH {
                    for x in v.iter_mut() {
                        *x = rng.sample(Open01);
                    }
                    let v1 = v[0];
                    let vk = kth_smallest(&mut v, k);
                    let thr = law.quantile_of_survival(vk);
                    if thr >= y && thr <= hi {
                        let val = if v1 < vk { h(law.quantile_of_survival(v1)) } else { 0.0 };
                        hits.push((thr, val));
                    }
                }
                hits
            })
            .collect();
        next = (next + round).min(max_batches);
        round *= 2;
        for (thr, val) in batches.into_iter().flatten() {
            thresholds.push(thr);
            values.push(val);
        }
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    Ok(ConditionalMc {
        mean,
        std_error: (var / m).sqrt(),
        hits: values.len(),
        trials: next * MC_BATCH,
        thresholds,
    })
}
