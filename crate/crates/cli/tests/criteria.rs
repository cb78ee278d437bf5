//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS or FAIL line.
//!
//! `cargo test -p fepls-cli --test criteria` runs all twelve; numbers after
//! `--` select a subset (`-- 3 8`). The process exits non-zero when any
//! selected criterion fails.
//!
//! Criterion 11 runs on synthetic minute prices unless both
//! `FEPLS_COVARIATE_PRICES` and `FEPLS_RESPONSE_PRICES` name real files.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

use fepls::cond_extremes::{conditional_law, hill_from_quantiles, CovariateView, KernelConfig, Location, DEFAULT_J};
use fepls::heavy_tails::hill;
use fepls::mc::{
    conditional_tail_moment_oracle, design_tau_values, joint_cell_probability, joint_histogram, marginal_over_t,
    order_stat_density, rate_regression, run_experiment, Cell, ExperimentPlan, KRule,
};
use fepls::seeding::stream_rng;
use fepls::stats::median;
use fepls::synth::{fbm_covariance, FbmSampler};
use fepls::{cov_direction, generate, BurrLaw, Dataset, FeplsPath, FunctionSample, Grid, ModelSpec, SortedSample, TestFunction};

const BIN: &str = env!("CARGO_BIN_EXE_fepls");
const KAPPAS: [f64; 3] = [1.0, 1.5, 2.0];
const GAMMAS: [f64; 3] = [1.0 / 3.0, 0.5, 0.9];

type Check = Result<Verdict, Box<dyn StdError>>;
type Criterion = (usize, &'static str, fn() -> Check);

struct Verdict {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 12] = [
        (1, "noiseless exactness", noiseless_exactness),
        (2, "closed-form direction vs exhaustive scan", closed_form_direction),
        (3, "constant-h tail-moment identity", constant_tail_moment),
        (4, "joint density marginalization", joint_density),
        (5, "simulation study at desk scale", simulation_study),
        (6, "rate check", rate_check),
        (7, "Hill estimator", hill_estimator),
        (8, "functional Hill identity", functional_hill_identity),
        (9, "fBm sampler covariance", fbm_sampler),
        (10, "conditional cdf and quantile oracles", conditional_oracles),
        (11, "real-data pipeline structure", real_data_pipeline),
        (12, "determinism of seeded commands", determinism),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = run().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {tag} {title}: {} [{:.1} s]",
            verdict.summary,
            start.elapsed().as_secs_f64()
        );
        for n in &verdict.notes {
            println!("      {n}");
        }
        if !verdict.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}

fn design_spec(kappa: f64, gamma: f64) -> Result<ModelSpec, Box<dyn StdError>> {
    Ok(ModelSpec::new(BurrLaw::new(gamma, -2.0 * gamma)?, kappa)?)
}

fn noiseless_exactness() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut fits = 0;
    for kappa in KAPPAS {
        for gamma in GAMMAS {
            let spec = design_spec(kappa, gamma)?.noiseless();
            let data = generate(&spec, 1)?;
            for tau in design_tau_values(kappa, gamma).ok_or("cell outside the design")? {
                let path = FeplsPath::new(&data, TestFunction::new(tau)?)?;
                for k in 5..=spec.n / 5 {
                    worst = worst.max((path.direction(k)?.inner(&spec.index)? - 1.0).abs());
                    fits += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        worst <= 1e-12 && secs < 5.0,
        format!("max |<beta_hat, beta> - 1| = {worst:.2e} over {fits} fits, {secs:.2} s (limit 1e-12, 5 s)"),
    ))
}

/// Point `j` of `m` spread evenly over the unit circle or sphere.
fn unit_direction(d: usize, j: usize, m: usize) -> Vec<f64> {
    if d == 2 {
        let a = std::f64::consts::TAU * j as f64 / m as f64;
        return vec![a.cos(), a.sin()];
    }
    let z = 1.0 - (2 * j + 1) as f64 / m as f64;
    let r = (1.0 - z * z).sqrt();
    let phi = j as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
    vec![r * phi.cos(), r * phi.sin(), z]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn closed_form_direction() -> Check {
    const DIRECTIONS: usize = 100_000;
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = stream_rng(2, inst);
        let d = 2 + (inst % 2) as usize;
        let n = 5 + ((inst / 2) % 4) as usize;
        let grid = Grid::new(d)?;
        let x = (0..n)
            .map(|_| FunctionSample::new(grid.clone(), (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let data = Dataset::new(x, y.clone())?;
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = sorted[n - 2 - (inst % 3) as usize];
        let v = cov_direction(&data, threshold)?;

        // Conditional covariance of Y and the projection among exceedances.
        let tail: Vec<(f64, &[f64])> = y
            .iter()
            .zip(data.x())
            .filter(|(yi, _)| **yi >= threshold)
            .map(|(yi, xi)| (*yi, xi.values()))
            .collect();
        let m = tail.len() as f64;
        let my = tail.iter().map(|t| t.0).sum::<f64>() / m;
        let objective = |u: &[f64]| {
            let proj: Vec<f64> = tail.iter().map(|(_, xv)| dot(u, xv)).collect();
            let mp = proj.iter().sum::<f64>() / m;
            tail.iter().zip(&proj).map(|((yi, _), p)| (yi - my) * (p - mp)).sum::<f64>() / m
        };
        let (best, _) = (0..DIRECTIONS)
            .map(|j| {
                let u = unit_direction(d, j, DIRECTIONS);
                let o = objective(&u);
                (u, o)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or("empty scan")?;
        let vn = dot(v.values(), v.values()).sqrt();
        let cos = dot(v.values(), &best) / vn;
        worst = worst.max(cos.clamp(-1.0, 1.0).acos());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Verdict::new(
        worst <= 1e-2 && secs < 30.0,
        format!("max angle to the scan optimum = {worst:.2e} rad over 20 instances, {secs:.1} s (limit 1e-2 rad, 30 s)"),
    ))
}

fn constant_tail_moment() -> Check {
    let mut worst_dev = 0.0f64;
    let mut worst_err = 0.0f64;
    let mut evals = 0;
    for gamma in GAMMAS {
        let law = BurrLaw::new(gamma, -2.0 * gamma)?;
        for (n, k) in [(10, 3), (100, 20), (500, 51)] {
            let target = (k - 1) as f64 / n as f64;
            let y0 = law.tail_quantile(n as f64 / k as f64)?;
            for y in [0.0, 0.5 * y0, y0, 4.0 * y0] {
                let o = conditional_tail_moment_oracle(&law, |_| 1.0, 0.0, n, k, y)?;
                worst_dev = worst_dev.max((o.exact - target).abs());
                worst_err = worst_err.max(o.error_estimate);
                evals += 1;
            }
        }
    }
    Ok(Verdict::new(
        worst_dev < 1e-10 && worst_err < 1e-10,
        format!("max |oracle - (k-1)/n| = {worst_dev:.2e}, max quadrature error estimate = {worst_err:.2e} over {evals} evaluations (limit 1e-10)"),
    ))
}

fn joint_density() -> Check {
    const DRAWS: u64 = 10_000_000;
    let start = Instant::now();
    let law = BurrLaw::new(0.5, -1.0)?;
    let mut worst_rel = 0.0f64;
    let mut ratio_dev = 0.0f64;
    let mut worst_z = 0.0f64;
    for (n, k) in [(5usize, 3usize), (10, 4)] {
        let share = (k - 1) as f64 / n as f64;
        for p in [0.2, 0.4, 0.6, 0.8, 0.95] {
            let y = law.quantile(p)?;
            let ratio = marginal_over_t(&law, n, k, y)? / order_stat_density(&law, n, k, y)?;
            worst_rel = worst_rel.max((ratio - 1.0).abs());
            ratio_dev = ratio_dev.max((ratio / share - 1.0).abs());
        }

        let y0 = law.tail_quantile(n as f64 / k as f64)?;
        let cell = |y_lo: f64, y_hi: f64, t_lo: f64, t_hi: f64| Cell {
            t_lo: t_lo * y0,
            t_hi: t_hi * y0,
            y_lo: y_lo * y0,
            y_hi: y_hi * y0,
        };
        let cells = [
            cell(0.5, 1.0, 1.0, 2.0),
            cell(0.5, 1.0, 2.0, 5.0),
            cell(1.0, 2.0, 1.0, 2.0),
            cell(1.0, 2.0, 2.0, 6.0),
            cell(0.5, 2.0, 0.5, 1.5),
        ];
        let counts = joint_histogram(&law, n, k, DRAWS, 4 + n as u64, &cells)?;
        for (c, &count) in cells.iter().zip(&counts) {
            let p = joint_cell_probability(&law, n, k, c)?;
            let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
            worst_z = worst_z.max((count as f64 / DRAWS as f64 - p).abs() / se);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let marginal_ok = worst_rel <= 1e-6;
    let histogram_ok = worst_z <= 3.0;
    Ok(Verdict::new(
        marginal_ok && histogram_ok && secs < 120.0,
        format!(
            "max relative gap between int_t f(t, y) dt and the order-statistic density = {worst_rel:.3e} (limit 1e-6); \
             histogram max |z| = {worst_z:.2} over 10 cells (limit 3); {secs:.1} s"
        ),
    )
    .note(format!(
        "marginal / order-statistic density equals (k-1)/n within {ratio_dev:.1e} relative at every probe"
    ))
    .note(format!(
        "marginalization half {}, histogram half {}",
        if marginal_ok { "passes" } else { "fails" },
        if histogram_ok { "passes" } else { "fails" }
    )))
}

fn selected_mean(spec: ModelSpec, replications: usize, seed: u64) -> Result<(f64, usize), Box<dyn StdError>> {
    let result = run_experiment(&ExperimentPlan::new(spec, replications, seed))?;
    let t = &result.per_tau[0];
    Ok((t.mean_selected_inner().ok_or("no successful replication")?, t.failures.len()))
}

fn simulation_study() -> Check {
    const N: usize = 100;
    let mut secs = 0.0;
    let mut pass = true;
    let mut worst_margin = f64::INFINITY;
    let mut notes = Vec::new();
    for kappa in KAPPAS {
        for gamma in GAMMAS {
            let floor = if kappa >= 1.5 && gamma >= 0.5 { 0.95 } else { 0.85 };
            let spec = design_spec(kappa, gamma)?;
            let start = Instant::now();
            let (mean, failures) = selected_mean(spec.clone(), N, 2024)?;
            secs += start.elapsed().as_secs_f64();
            let mut centred = spec;
            centred.mu = 0.0;
            let (mean0, _) = selected_mean(centred, N, 2024)?;
            pass &= mean >= floor;
            worst_margin = worst_margin.min(mean - floor);
            notes.push(format!(
                "kappa = {kappa}, gamma = {gamma:.3}: mean <beta_hat, beta> = {mean:.4} (floor {floor}, {failures} failed fits); with mu = 0 it is {mean0:.4}"
            ));
        }
    }
    let mut v = Verdict::new(
        pass && secs < 900.0,
        format!("worst cell margin over its floor = {worst_margin:+.4}; {secs:.1} s for the nine cells (limit 900 s)"),
    );
    v.notes = notes;
    Ok(v)
}

fn rate_check() -> Check {
    let ns = [250, 500, 1000, 2000];
    let spec = ModelSpec::new(BurrLaw::new(0.5, -1.0)?, 1.5)?;
    let start = Instant::now();
    let out = rate_regression(&spec, &ns, KRule::Power(0.6), 50, 7, 4.0)?;
    let secs = start.elapsed().as_secs_f64();
    let slope = out.slope.ok_or("errors are at round-off level; no slope to report")?;
    let mut centred = spec;
    centred.mu = 0.0;
    let out0 = rate_regression(&centred, &ns, KRule::Power(0.6), 50, 7, 4.0)?;
    let mut v = Verdict::new(
        (0.5..=1.5).contains(&slope) && secs < 1200.0,
        format!("log-log slope = {slope:.3} (range [0.5, 1.5]); {secs:.1} s"),
    );
    for p in &out.points {
        v = v.note(format!(
            "n = {}, k = {}, delta = {:.4e}, median error = {:.4}",
            p.n, p.k, p.delta, p.median_error
        ));
    }
    let slope0 = out0.slope.map_or("none".to_string(), |s| format!("{s:.3}"));
    Ok(v.note(format!("with mu = 0 the slope is {slope0}")))
}

fn hill_estimator() -> Check {
    let n = 10_000;
    let pareto: Vec<f64> = (1..=n)
        .map(|i| (1.0 - i as f64 / (n + 1) as f64).powf(-0.35))
        .collect();
    let exact = hill(&SortedSample::new(pareto)?, 200)?;
    let law = BurrLaw::new(0.5, -1.0)?;
    let burr = (0..50u64)
        .map(|s| hill(&SortedSample::new(law.sample(n, s)?)?, 100))
        .collect::<Result<Vec<_>, _>>()?;
    let med = median(&burr).ok_or("no estimates")?;
    Ok(Verdict::new(
        (exact - 0.35).abs() <= 0.02 && (med - 0.5).abs() <= 0.1,
        format!("Pareto quantiles: {exact:.4} (target 0.35 +/- 0.02); Burr median over 50 seeds: {med:.4} (target 0.5 +/- 0.1)"),
    ))
}

fn functional_hill_identity() -> Check {
    let mut worst = 0.0f64;
    for gamma in [0.1, 1.0 / 3.0, 0.5, 0.9, 1.7] {
        for alpha in [0.5, 0.7, 0.9, 0.95, 0.99] {
            let est = hill_from_quantiles(|p| Ok((1.0 - p).powf(-gamma)), alpha, DEFAULT_J)?;
            worst = worst.max((est - gamma).abs());
        }
    }
    Ok(Verdict::new(
        worst <= 1e-12,
        format!("max |gamma_hat - gamma| = {worst:.2e} over 25 (gamma, alpha) pairs with J = {DEFAULT_J} (limit 1e-12)"),
    ))
}

fn fbm_sampler() -> Check {
    const REPS: u64 = 50_000;
    let grid = Grid::new(21)?;
    let t = grid.points().to_vec();
    let d = t.len();
    let mut worst_z = 0.0f64;
    let mut beyond = 0;
    let mut worst_diag = 0.0f64;
    for (hurst, seed) in [(1.0 / 3.0, 31), (0.5, 32)] {
        let sampler = FbmSampler::new(hurst, &grid)?;
        let mut sum = vec![0.0; d * d];
        let mut sum_sq = vec![0.0; d * d];
        for r in 0..REPS {
            let x = sampler.draw(1.0, 0.0, &mut stream_rng(seed, r))?;
            let v = x.values();
            for i in 0..d {
                for j in i..d {
                    let p = v[i] * v[j];
                    sum[i * d + j] += p;
                    sum_sq[i * d + j] += p * p;
                }
            }
        }
        let reps = REPS as f64;
        for i in 0..d {
            for j in i..d {
                let mean = sum[i * d + j] / reps;
                let se = ((sum_sq[i * d + j] / reps - mean * mean).max(0.0) / reps).sqrt();
                let exact = fbm_covariance(hurst, 1.0, t[i], t[j])?;
                let gap = (mean - exact).abs();
                let z = if se > 0.0 {
                    gap / se
                } else if gap == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst_z = worst_z.max(z);
                beyond += usize::from(z > 3.0);
                if hurst == 0.5 && i == j && t[i] > 0.0 {
                    worst_diag = worst_diag.max((mean / t[i] - 1.0).abs());
                }
            }
        }
    }
    Ok(Verdict::new(
        beyond == 0 && worst_diag <= 0.05,
        format!(
            "max |z| = {worst_z:.2} with {beyond} of {} entries beyond 3 standard errors; H = 1/2 diagonal within {:.2}% of t",
            d * (d + 1),
            100.0 * worst_diag
        ),
    ))
}

fn conditional_oracles() -> Check {
    let wide = KernelConfig::fixed(1e9)?;
    let levels = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];
    let mut worst_cdf = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut galois_checks = 0;
    let mut galois_violations = 0;
    for ds in 0..20u64 {
        let law = BurrLaw::new(0.3 + 0.03 * ds as f64, -1.0)?;
        let mut spec = ModelSpec::new(law, 1.5)?.with_grid_size(11)?;
        spec.n = 30 + 5 * ds as usize;
        let data = generate(&spec, 100 + ds)?;
        let n = data.len();
        let z = Location::Curve(data.x()[ds as usize % n].clone());
        let mut ys = data.y().to_vec();
        ys.sort_by(f64::total_cmp);

        let cond = conditional_law(&data, &CovariateView::Functional, &z, &wide)?;
        let mut probes = ys.clone();
        probes.extend(ys.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        probes.push(0.5 * ys[0]);
        for &y in &probes {
            let emp = ys.partition_point(|&v| v <= y) as f64 / n as f64;
            worst_cdf = worst_cdf.max((cond.cdf(y) - emp).abs());
        }
        let mut alphas = levels.to_vec();
        alphas.extend((1..n).map(|i| i as f64 / n as f64));
        for &alpha in &alphas {
            let i = (0..n).find(|&i| (i + 1) as f64 / n as f64 >= alpha).ok_or("level above 1")?;
            worst_q = worst_q.max((cond.quantile(alpha)? - ys[i]).abs());
        }

        let projected = CovariateView::projected(spec.index.clone())?;
        let laws = [
            cond,
            conditional_law(&data, &CovariateView::Functional, &z, &KernelConfig::adaptive())?,
            conditional_law(&data, &projected, &Location::Scalar(ys[n / 2].ln()), &KernelConfig::fixed(0.5)?)?,
        ];
        for law in &laws {
            for &alpha in &alphas {
                let q = law.quantile(alpha)?;
                for &y in law.support() {
                    galois_checks += 1;
                    galois_violations += usize::from((law.cdf(y) >= alpha) != (y >= q));
                }
            }
        }
    }
    Ok(Verdict::new(
        worst_cdf <= 1e-10 && worst_q <= 1e-10 && galois_violations == 0,
        format!(
            "bandwidth 1e9 vs empirical: max cdf gap {worst_cdf:.1e}, max quantile gap {worst_q:.1e} (limit 1e-10); \
             Galois property violated {galois_violations} times in {galois_checks} checks"
        ),
    ))
}

/// Writes `minutes` one-minute prices starting 2019-01-07, skipping the
/// same hour every Saturday in both files so that the blocks span gaps.
fn write_prices(path: &Path, minutes: usize, heavy: bool, seed: u64) -> std::io::Result<()> {
    let mut rng = stream_rng(seed, 0);
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "timestamp,price")?;
    let start = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut log_price = 8.0f64;
    let mut offset = 0i64;
    for _ in 0..minutes {
        let mut ts = start + Duration::minutes(offset);
        while ts.format("%u %H").to_string() == "6 12" {
            offset += 1;
            ts = start + Duration::minutes(offset);
        }
        writeln!(out, "{},{:.6}", ts.format("%Y-%m-%d %H:%M:%S"), log_price.exp())?;
        let z: f64 = rng.sample(StandardNormal);
        log_price += if heavy {
            2e-4 * z / rng.random::<f64>().powf(1.0 / 3.0)
        } else {
            1e-4 * z
        };
        offset += 1;
    }
    out.flush()
}

fn run_cli(dir: &Path, args: &[&str], threads: Option<&str>) -> Result<String, Box<dyn StdError>> {
    let mut cmd = Command::new(BIN);
    cmd.args(args).current_dir(dir).env("RUST_LOG", "off");
    match threads {
        Some(t) => cmd.env("FEPLS_NUM_THREADS", t),
        None => cmd.env_remove("FEPLS_NUM_THREADS"),
    };
    let out = cmd.output()?;
    if !out.status.success() {
        return Err(format!("fepls {args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()).into());
    }
    Ok(String::from_utf8(out.stdout)?)
}

fn manifest(path: &Path) -> Result<BTreeMap<String, String>, Box<dyn StdError>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, Box<dyn StdError>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn real_data_pipeline() -> Check {
    let tmp = TempDir::new()?;
    let dir = tmp.path();
    let (cov, resp, source) = match (
        std::env::var_os("FEPLS_COVARIATE_PRICES"),
        std::env::var_os("FEPLS_RESPONSE_PRICES"),
    ) {
        (Some(c), Some(r)) => (PathBuf::from(c), PathBuf::from(r), "user-supplied files"),
        _ => {
            let minutes = 682 * 1440 + 1;
            let (c, r) = (dir.join("covariate.csv"), dir.join("response.csv"));
            write_prices(&c, minutes, false, 11)?;
            write_prices(&r, minutes, true, 12)?;
            (c, r, "synthetic prices, 682 blocks of 1440 minutes")
        }
    };
    let (cov, resp) = (cov.to_string_lossy().into_owned(), resp.to_string_lossy().into_owned());
    run_cli(dir, &["ingest", "--covariate", &cov, "--response", &resp, "--out", "ingest"], None)?;
    let m = manifest(&dir.join("ingest/manifest.txt"))?;
    let before: usize = m.get("n_before").ok_or("no n_before")?.parse()?;
    let after: usize = m.get("n_after").ok_or("no n_after")?.parse()?;
    let mut problems = Vec::new();
    if (before, after) != (341, 339) {
        problems.push(format!("pairs {before} -> {after}, expected 341 -> 339"));
    }

    let data = "ingest/dataset.csv";
    run_cli(dir, &["fit", "--input", data, "--mode", "data", "--out", "fit"], None)?;
    let k_hat: usize = manifest(&dir.join("fit/manifest.txt"))?
        .get("k_hat")
        .ok_or("fit reported no k_hat")?
        .parse()?;
    if !(5..=after / 5).contains(&k_hat) {
        problems.push(format!("k_hat = {k_hat} outside [5, n/5]"));
    }

    run_cli(dir, &["var", "--input", data, "--mode", "data", "--out", "var"], None)?;
    let rows = csv_rows(&dir.join("var/var_curves.csv"))?;
    if rows[0] != ["s", "q_0.98", "q_0.995"] {
        problems.push(format!("unexpected VaR header {:?}", rows[0]));
    }
    let mut compared = 0;
    for r in &rows[1..] {
        if let (Ok(lo), Ok(hi)) = (r[1].parse::<f64>(), r[2].parse::<f64>()) {
            compared += 1;
            if hi < lo {
                problems.push(format!("VaR at 0.995 below VaR at 0.98 at s = {}", r[0]));
                break;
            }
        }
    }
    if compared == 0 {
        problems.push("no VaR grid point has both levels".into());
    }

    run_cli(dir, &["compare", "--input", data, "--mode", "data", "--out", "compare"], None)?;
    let grid_size: usize = manifest(&dir.join("compare/manifest.txt"))?
        .get("config.grid-size")
        .ok_or("compare did not echo grid-size")?
        .parse()?;
    let mut medians = Vec::new();
    for target in ["quantile", "tail_index"] {
        let rows = csv_rows(&dir.join(format!("compare/boxplots_{target}.csv")))?;
        let labels: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
        if labels != ["FEPLS", "Beta", "Beta v2", "Ortho"] {
            problems.push(format!("{target} labels {labels:?}"));
        }
        for r in &rows[1..] {
            let count: usize = r[8].parse()?;
            let excluded: usize = r[9].parse()?;
            if count + excluded != grid_size {
                problems.push(format!("{target} {}: {count} + {excluded} != {grid_size}", r[0]));
            }
            medians.push(format!("{target}/{}: {}", r[0], if r[3].is_empty() { "-" } else { &r[3] }));
        }
    }
    let summary = if problems.is_empty() {
        format!("{before} -> {after} pairs, k_hat = {k_hat}, four labelled summaries per target, VaR monotone in alpha on {compared} points")
    } else {
        problems.join("; ")
    };
    Ok(Verdict::new(problems.is_empty(), summary)
        .note(format!("input: {source}"))
        .note(format!("median relative errors (%): {}", medians.join(", "))))
}

fn collect_outputs(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_outputs(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "csv" || e == "txt" || e == "slope") {
            let mut bytes = fs::read(&path)?;
            if path.file_name().is_some_and(|n| n == "manifest.txt") {
                let text = String::from_utf8_lossy(&bytes);
                bytes = text
                    .lines()
                    .filter(|l| !l.starts_with("wall_time_seconds"))
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let tmp = TempDir::new()?;
    let shared = tmp.path();
    write_prices(&shared.join("a.csv"), 14 * 60 * 24 + 1, false, 3)?;
    write_prices(&shared.join("b.csv"), 14 * 60 * 24 + 1, true, 4)?;
    let runs: [&[&str]; 7] = [
        &["simulate", "--n", "300", "--seed", "9", "--out", "sim"],
        &["experiment", "--n", "150", "--replications", "6", "--seed", "4", "--rate-n", "100,200,400", "--out", "exp"],
        &["fit", "--input", "sim/dataset.csv", "--out", "fit"],
        &["tail", "--input", "sim/dataset.csv", "--out", "tail"],
        &["var", "--input", "sim/dataset.csv", "--grid-size", "60", "--out", "var"],
        &["compare", "--input", "sim/dataset.csv", "--grid-size", "60", "--out", "compare"],
        &["ingest", "--covariate", "../a.csv", "--response", "../b.csv", "--d", "1440", "--remove-top", "1", "--out", "ingest"],
    ];
    let mut outputs = Vec::new();
    for (name, threads) in [("first", None), ("second", Some("3"))] {
        let dir = shared.join(name);
        fs::create_dir(&dir)?;
        for args in runs {
            run_cli(&dir, args, threads)?;
        }
        let mut files = BTreeMap::new();
        collect_outputs(&dir, &dir, &mut files)?;
        outputs.push(files);
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    let differing: Vec<String> = a
        .iter()
        .filter(|(p, bytes)| b.get(*p) != Some(bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let same_set = a.keys().eq(b.keys());
    Ok(Verdict::new(
        same_set && differing.is_empty() && !a.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical across two runs (second run on 3 worker threads)", a.len())
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    ))
}
