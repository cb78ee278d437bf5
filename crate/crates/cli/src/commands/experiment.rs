use std::path::Path;
use std::time::Instant;

use fepls::io::{Manifest, Table};
use fepls::mc::{rate_regression, run_experiment, ExperimentPlan, ExperimentResult, KRule};
use fepls::ModelSpec;

use super::{cell, finish, model_spec, selection, setup, write_table};
use crate::args::{ExperimentArgs, Mode, Preset};
use crate::config::Resolver;
use crate::error::{CliError, Validate};

const KAPPAS: [f64; 3] = [1.0, 1.5, 2.0];
const GAMMAS: [f64; 3] = [1.0 / 3.0, 0.5, 0.9];

pub fn run(a: ExperimentArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("experiment", &a.common)?;
    let preset = r.pick("preset", a.preset, f.preset, Preset::Steep);
    let replications = r.pick("replications", a.replications, f.replications, 100);
    let seed = r.pick("seed", a.model.seed, f.seed, 0);
    let tau_values = match r.pick_opt("tau-values", a.tau_values.clone(), f.tau_values.clone()) {
        Some(v) => v,
        None => vec![r.pick("tau", a.select.tau, f.tau, -2.0)],
    };
    let opts = selection(&mut r, &a.select, &f, Mode::Sim);
    let sweep = r.flag("sweep", a.sweep, f.sweep);
    let rate_n = r.pick_opt("rate-n", a.rate_n.clone(), f.rate_n.clone());
    let q = r.pick("q", a.q, f.q, 4.0);

    let cells: Vec<Option<(f64, f64)>> = if sweep {
        KAPPAS.iter().flat_map(|&k| GAMMAS.iter().map(move |&g| Some((k, g)))).collect()
    } else {
        vec![None]
    };
    let mut summary = Table::new(["kappa", "gamma", "rho", "tau", "admissible", "mean_selected_inner", "successes", "failures"]);
    let mut manifest = Manifest::new();
    for kg in cells {
        let mut cell_r = Resolver::new("experiment");
        let resolver = if kg.is_some() { &mut cell_r } else { &mut r };
        let spec = model_spec(resolver, &a.model, &f, preset, kg)?;
        let mut plan = ExperimentPlan::new(spec.clone(), replications, seed);
        plan.tau_values = tau_values.clone();
        plan.selection = opts;
        plan.validate().invalid()?;
        let dir = match kg {
            Some((k, g)) => out.join(format!("kappa={k}_gamma={g:.4}")),
            None => out.clone(),
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(e.into()))?;
        let res = run_experiment(&plan)?;
        write_result(&dir, &plan, &res)?;
        for t in &res.per_tau {
            summary.push([
                spec.kappa.to_string(),
                spec.law.gamma().to_string(),
                spec.law.rho().to_string(),
                t.tau.to_string(),
                t.admissible.to_string(),
                cell(t.mean_selected_inner()),
                t.successes().to_string(),
                t.failures.len().to_string(),
            ]);
            let tag = match kg {
                Some((k, g)) => format!("kappa={k}.gamma={g:.4}.tau={}", t.tau),
                None => format!("tau={}", t.tau),
            };
            manifest.set(format!("result.{tag}.mean_selected_inner"), cell(t.mean_selected_inner()));
            manifest.set(format!("result.{tag}.failures"), t.failures.len());
        }
        if let (Some(ns), None) = (&rate_n, kg) {
            rate(&dir, &spec, ns, replications, seed, q, &mut manifest)?;
        }
    }
    write_table(&out, "summary.csv", &summary)?;
    for (k, v) in r.echo.entries() {
        manifest.set(k, v);
    }
    finish(&out, manifest, started)
}

fn write_result(dir: &Path, plan: &ExperimentPlan, res: &ExperimentResult) -> Result<(), CliError> {
    let taus: Vec<String> = res.per_tau.iter().map(|t| format!("tau={}", t.tau)).collect();
    let header = || std::iter::once("k".to_string()).chain(taus.iter().cloned());
    let mut inner = Table::new(header());
    let mut corr = Table::new(header());
    for (j, k) in res.k_values.iter().enumerate() {
        inner.push(std::iter::once(k.to_string()).chain(res.per_tau.iter().map(|t| t.mean_inner[j].to_string())));
        corr.push(std::iter::once(k.to_string()).chain(res.per_tau.iter().map(|t| t.mean_correlation[j].to_string())));
    }
    write_table(dir, "inner_curve.csv", &inner)?;
    write_table(dir, "correlation_curve.csv", &corr)?;

    let mut hist = Table::new(["tau", "k", "count"]);
    let mut reps = Table::new(["tau", "replication", "status", "selected_inner", "error"]);
    for t in &res.per_tau {
        for (k, c) in &t.selected_k {
            hist.push([t.tau.to_string(), k.to_string(), c.to_string()]);
        }
        for (i, (inner, err)) in t.selected_inner.iter().zip(&t.errors).enumerate() {
            let status = if inner.is_some() { "ok" } else { "failed" };
            reps.push([t.tau.to_string(), i.to_string(), status.to_string(), cell(*inner), cell(*err)]);
        }
        if let Some(band) = &t.band {
            let mut b = Table::new(["t", "lower", "mean", "upper", "beta"]);
            let grid = plan.spec.grid.points();
            for (j, t_) in grid.iter().enumerate() {
                b.push([*t_, band.lower[j], band.mean[j], band.upper[j], plan.spec.index.values()[j]]);
            }
            write_table(dir, &format!("band_tau={}.csv", t.tau), &b)?;
        }
    }
    write_table(dir, "selected_k.csv", &hist)?;
    write_table(dir, "replications.csv", &reps)?;
    Ok(())
}

fn rate(
    dir: &Path,
    spec: &ModelSpec,
    ns: &[usize],
    replications: usize,
    seed: u64,
    q: f64,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    if ns.len() < 3 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::validation("--rate-n needs at least 3 strictly increasing sizes"));
    }
    let outcome = rate_regression(spec, ns, KRule::Power(0.6), replications, seed, q)?;
    let mut t = Table::new(["n", "k", "delta", "median_error", "failures"]);
    for p in &outcome.points {
        t.push([p.n.to_string(), p.k.to_string(), p.delta.to_string(), p.median_error.to_string(), p.failures.to_string()]);
    }
    write_table(dir, "rate.csv", &t)?;
    match outcome.slope {
        Some(s) => manifest.set("rate.slope", s),
        None => manifest.set("rate.slope", "exact-fit"),
    };
    manifest.set("rate.consistent", outcome.consistent());
    Ok(())
}
