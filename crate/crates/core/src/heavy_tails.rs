//! Burr response law and univariate tail diagnostics.
//!
//! The Burr law used here has survival function
//!
//! ```text
//! S(y) = (1 + y^(-rho/gamma))^(1/rho),   y >= 0,
//! ```
//!
//! tail index `gamma` and second-order parameter `rho < 0`. Its tail quantile
//! function is `U(t) = (t^(-rho) - 1)^(-gamma/rho)`.

use rand::Rng;
use rand::distr::Open01;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurrLaw {
    gamma: f64,
    rho: f64,
}

impl BurrLaw {
    pub fn new(gamma: f64, rho: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::domain(format!("tail index must lie in (0,1), got {gamma}")));
        }
        if !(rho < 0.0) || !rho.is_finite() {
            return Err(Error::domain(format!("second-order parameter must be negative, got {rho}")));
        }
        Ok(Self { gamma, rho })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Exponent `-rho/gamma` of the survival function.
    #[inline]
    fn a(&self) -> f64 {
        -self.rho / self.gamma
    }

    pub fn survival(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::domain(format!("survival needs y >= 0, got {y}")));
        }
        Ok(self.survival_unchecked(y))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, y: f64) -> f64 {
        (y.powf(self.a()).ln_1p() / self.rho).exp()
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::domain(format!("cdf needs y >= 0, got {y}")));
        }
        Ok(self.cdf_unchecked(y))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, y: f64) -> f64 {
        -(y.powf(self.a()).ln_1p() / self.rho).exp_m1()
    }

    /// `f(y) = (1/gamma) y^(a-1) (1 + y^a)^(1/rho - 1)` with `a = -rho/gamma`.
    pub fn density(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("density needs y > 0, got {y}")));
        }
        Ok(self.density_unchecked(y))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, y: f64) -> f64 {
        let a = self.a();
        let ya = y.powf(a);
        (a - 1.0).mul_add(y.ln(), (1.0 / self.rho - 1.0) * ya.ln_1p()).exp() / self.gamma
    }

    /// `U(t) = F^-(1 - 1/t)` for `t > 1`.
    pub fn tail_quantile(&self, t: f64) -> Result<f64> {
        if !(t > 1.0) {
            return Err(Error::domain(format!("tail quantile needs t > 1, got {t}")));
        }
        Ok(self.tail_quantile_unchecked(t))
    }

    #[inline]
    fn tail_quantile_unchecked(&self, t: f64) -> f64 {
        // t^(-rho) - 1 without cancellation near t = 1.
        let base = (-self.rho * t.ln()).exp_m1();
        base.powf(-self.gamma / self.rho)
    }

    /// Quantile at level `p` in `(0, 1)`, i.e. `U(1/(1-p))`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {p}")));
        }
        Ok(self.quantile_of_survival(1.0 - p))
    }

    /// `U(1/v)` for `v` in `(0, 1)`.
    #[inline]
    pub(crate) fn quantile_of_survival(&self, v: f64) -> f64 {
        (self.rho * v.ln()).exp_m1().powf(-self.gamma / self.rho)
    }

    /// Auxiliary function `A(t) = gamma t^rho / (1 - t^rho)`.
    pub fn auxiliary(&self, t: f64) -> Result<f64> {
        if !(t > 1.0) {
            return Err(Error::domain(format!("auxiliary function needs t > 1, got {t}")));
        }
        let s = t.powf(self.rho);
        Ok(self.gamma * s / (1.0 - s))
    }

    /// Inverse-transform draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v: f64 = rng.sample(Open01);
        self.quantile_of_survival(v)
    }

    /// `n` i.i.d. draws from one seeded stream, in draw order.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        let mut rng = stream_rng(seed, 0);
        Ok((0..n).map(|_| self.draw(&mut rng)).collect())
    }

    /// For each `t`, `(U(ty)/U(t) - y^gamma) / A(t)`, which tends to
    /// `y^gamma (y^rho - 1)/rho` as `t` grows.
    pub fn second_order_check(&self, y: f64, t_values: &[f64]) -> Result<Vec<f64>> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("second-order check needs y > 0, got {y}")));
        }
        t_values
            .iter()
            .map(|&t| {
                let a_t = self.auxiliary(t)?;
                // log(U(ty)/U(t)) = gamma log y - (gamma/rho)(log1p(-s y^rho) - log1p(-s)),
                // with s = t^rho; evaluated this way to avoid cancellation.
                let s = t.powf(self.rho);
                let corr = -(self.gamma / self.rho)
                    * ((-s * y.powf(self.rho)).ln_1p() - (-s).ln_1p());
                let diff = y.powf(self.gamma) * corr.exp_m1();
                Ok(diff / a_t)
            })
            .collect()
    }

    /// Limit of [`BurrLaw::second_order_check`]: `y^gamma (y^rho - 1)/rho`.
    pub fn second_order_limit(&self, y: f64) -> f64 {
        y.powf(self.gamma) * (y.powf(self.rho) - 1.0) / self.rho
    }
}

/// Order statistics `Y_{1,n} <= ... <= Y_{n,n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Sorts ascending; ties keep their input order.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::insufficient("empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("sample contains NaN"));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Y_{i,n}` with 1-based `i`.
    pub fn order_stat(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// `Y_{n-i+1,n}`, the `i`-th largest value.
    pub fn top(&self, i: usize) -> f64 {
        self.values[self.values.len() - i]
    }

    fn check_k(&self, k: usize) -> Result<f64> {
        let n = self.len();
        if k == 0 || k >= n {
            return Err(Error::domain(format!("k must lie in [1, {}], got {k}", n - 1)));
        }
        let base = self.top(k + 1);
        if !(base > 0.0) {
            return Err(Error::domain(format!(
                "threshold Y_(n-k,n) = {base} must be positive"
            )));
        }
        Ok(base)
    }
}

/// Hill estimator: mean log-excess of the top `k` values over `Y_{n-k,n}`.
pub fn hill(sorted: &SortedSample, k: usize) -> Result<f64> {
    let base = sorted.check_k(k)?.ln();
    let sum: f64 = (1..=k).map(|i| sorted.top(i).ln() - base).sum();
    Ok(sum / k as f64)
}

/// Hill plot over a range of `k`.
pub fn hill_curve(
    sorted: &SortedSample,
    ks: impl IntoIterator<Item = usize>,
) -> Result<Vec<(usize, f64)>> {
    ks.into_iter().map(|k| Ok((k, hill(sorted, k)?))).collect()
}

/// Exponential QQ-plot of the log-excesses with its through-origin slope.
#[derive(Clone, Debug, PartialEq)]
pub struct QqPlot {
    /// `(log((k+1)/i), log(Y_{n-i+1,n}/Y_{n-k,n}))` for `i = 1..=k`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

pub fn qq_plot_data(sorted: &SortedSample, k: usize) -> Result<QqPlot> {
    let base = sorted.check_k(k)?;
    let kp1 = (k + 1) as f64;
    let points: Vec<(f64, f64)> = (1..=k)
        .map(|i| ((kp1 / i as f64).ln(), (sorted.top(i) / base).ln()))
        .collect();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    Ok(QqPlot {
        points,
        slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> BurrLaw {
        BurrLaw::new(0.5, -1.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BurrLaw::new(1.0, -1.0).is_err());
        assert!(BurrLaw::new(0.0, -1.0).is_err());
        assert!(BurrLaw::new(0.5, 0.0).is_err());
    }

    #[test]
    fn survival_values() {
        for (g, r) in [(0.5, -1.0), (0.9, -0.45), (1.0 / 3.0, -2.0 / 3.0)] {
            assert_eq!(BurrLaw::new(g, r).unwrap().survival(0.0).unwrap(), 1.0);
        }
        // (1 + y^2)^-1 for gamma = 1/2, rho = -1.
        assert!((law().survival(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((law().survival(3.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(law().survival(-1.0).is_err());
    }

    #[test]
    fn density_values() {
        // 2y/(1+y^2)^2 at y = 1.
        assert!((law().density(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(law().density(0.0).is_err());

        for l in [law(), BurrLaw::new(0.9, -0.45).unwrap(), BurrLaw::new(0.3, -2.0).unwrap()] {
            let y = 2.0;
            let h = 1e-5;
            let fd = (l.cdf(y + h).unwrap() - l.cdf(y - h).unwrap()) / (2.0 * h);
            let f = l.density(y).unwrap();
            assert!(((fd - f) / f).abs() < 1e-6, "{fd} vs {f}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for l in [law(), BurrLaw::new(0.9, -1.8).unwrap(), BurrLaw::new(1.0 / 3.0, -1.0 / 6.0).unwrap()] {
            let f = |y: f64| if y > 0.0 { l.density(y).unwrap() } else { 0.0 };
            // Near 0 the density behaves like y^(a-1); y = w^(1/a) removes it.
            let a = -l.rho() / l.gamma();
            let head = crate::integrate::finite(|w| f(w.powf(1.0 / a)) * w.powf(1.0 / a - 1.0) / a, 0.0, 1.0, 2, 1e-14);
            let tail = crate::integrate::upper_tail(f, 1.0, 1.0 + 1.0 / l.gamma(), 1e-14).unwrap();
            let total = head.value + tail.value;
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn tail_quantile_values() {
        assert!((law().tail_quantile(2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((law().tail_quantile(5.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(law().tail_quantile(1.0).is_err());
        for t in [1.5, 10.0, 1e4] {
            let s = law().survival(law().tail_quantile(t).unwrap()).unwrap();
            assert!((s * t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling() {
        let a = law().sample(10, 42).unwrap();
        assert_eq!(a, law().sample(10, 42).unwrap());
        assert!(law().sample(0, 1).is_err());

        let n = 100_000;
        let ys = law().sample(n, 3).unwrap();
        let u10 = law().tail_quantile(10.0).unwrap();
        let frac = ys.iter().filter(|&&y| y > u10).count() as f64 / n as f64;
        assert!((frac - 0.1).abs() < 3.0 * (0.09f64 / n as f64).sqrt());

        let sorted = SortedSample::new(ys).unwrap();
        let median = 0.5 * (sorted.order_stat(n / 2) + sorted.order_stat(n / 2 + 1));
        assert!((median - 1.0).abs() < 0.02);
    }

    #[test]
    fn second_order() {
        let l = law();
        assert!(l
            .second_order_check(1.0, &[10.0, 1e3, 1e6])
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-15));
        let v = l.second_order_check(2.0, &[1e6]).unwrap()[0];
        let limit = 2f64.sqrt() * 0.5;
        assert!((v - limit).abs() < 1e-3);
        assert!((l.second_order_limit(2.0) - limit).abs() < 1e-15);
        let e = l.second_order_check(2.0, &[1e4, 1e8]).unwrap();
        assert!((e[1] - limit).abs() < (e[0] - limit).abs());
        assert!(l.second_order_check(2.0, &[1.0]).is_err());
    }

    #[test]
    fn hill_cases() {
        let flat = SortedSample::new(vec![0.5, 3.0, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!(hill(&flat, 3).unwrap(), 0.0);

        let s = SortedSample::new(vec![8.0, 1.0, 4.0, 2.0]).unwrap();
        assert!((hill(&s, 3).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);

        let n = 10_000;
        let grid = SortedSample::new((1..=n).map(|i| (n as f64 / i as f64).sqrt()).collect()).unwrap();
        assert!((hill(&grid, 100).unwrap() - 0.5).abs() < 0.05);

        assert!(hill(&s, 0).is_err());
        assert!(hill(&s, 4).is_err());
        let neg = SortedSample::new(vec![-1.0, 2.0, 3.0]).unwrap();
        assert!(hill(&neg, 2).is_err());
    }

    #[test]
    fn qq_cases() {
        let n = 10_000;
        let grid = SortedSample::new((1..=n).map(|i| (n as f64 / i as f64).powf(0.35)).collect()).unwrap();
        assert!((qq_plot_data(&grid, 200).unwrap().slope - 0.35).abs() < 0.02);

        let flat = SortedSample::new(vec![2.0; 6]).unwrap();
        assert!(qq_plot_data(&flat, 4).unwrap().points.iter().all(|p| p.1 == 0.0));

        let q = qq_plot_data(&grid, 1).unwrap();
        assert_eq!(q.points.len(), 1);
        assert!((q.points[0].0 - 2f64.ln()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantile_round_trip(g in 0.05f64..0.95, r in -3.0f64..-0.05, lt in -13.8f64..23.0) {
                let l = BurrLaw::new(g, r).unwrap();
                let t = 1.0 + lt.exp().min(1e10);
                let s = l.survival(l.tail_quantile(t).unwrap()).unwrap();
                prop_assert!((s * t - 1.0).abs() < 1e-12);
            }

            #[test]
            fn cdf_monotone(g in 0.05f64..0.95, r in -3.0f64..-0.05, y in 0.0f64..1e3, dy in 0.0f64..10.0) {
                let l = BurrLaw::new(g, r).unwrap();
                prop_assert!(l.cdf(y).unwrap() <= l.cdf(y + dy).unwrap());
                if y > 0.0 {
                    prop_assert!(l.density(y).unwrap() >= 0.0);
                }
            }

            #[test]
            fn hill_scale_invariant(mut v in prop::collection::vec(0.1f64..100.0, 12), c in 0.01f64..100.0, k in 1usize..11) {
                let base = hill(&SortedSample::new(v.clone()).unwrap(), k).unwrap();
                let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
                let hs = hill(&SortedSample::new(scaled).unwrap(), k).unwrap();
                prop_assert!((base - hs).abs() <= 1e-12 * (1.0 + base.abs()));

                // Shrinking everything below Y_(n-k,n) leaves the estimate alone.
                v.sort_by(|a, b| a.total_cmp(b));
                let n = v.len();
                for x in v.iter_mut().take(n - k - 1) {
                    *x *= 0.5;
                }
                prop_assert_eq!(base, hill(&SortedSample::new(v).unwrap(), k).unwrap());
            }
        }
    }
}
