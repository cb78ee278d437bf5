mod compare;
mod experiment;
mod fit;
mod ingest;
mod simulate;
mod tail;
mod var;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fepls::io::{read_dataset, read_function, Manifest, Table};
use fepls::synth::SigmaRule;
use fepls::{BurrLaw, Dataset, FeplsPath, FunctionSample, ModelSpec, SelectionMode, SelectionOptions, TestFunction};

use crate::args::{Cli, Command, Common, CondArgs, FileConfig, Mode, ModelArgs, Preset, SelectArgs};
use crate::config::{self, Resolver};
use crate::error::{CliError, Validate};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    match cli.command {
        Command::Simulate(a) => simulate::run(a, started),
        Command::Experiment(a) => experiment::run(a, started),
        Command::Fit(a) => fit::run(a, started),
        Command::Tail(a) => tail::run(a, started),
        Command::Var(a) => var::run(a, started),
        Command::Compare(a) => compare::run(a, started),
        Command::Ingest(a) => ingest::run(a, started),
    }
}

/// Loads the config file and prepares the output directory.
pub(crate) fn setup(command: &str, common: &Common) -> Result<(FileConfig, Resolver, PathBuf), CliError> {
    let file = config::load(common.config.as_deref())?;
    let mut r = Resolver::new(command);
    if let Some(path) = &common.config {
        r.echo.set("config_file", path.display());
    }
    let out = r.pick("out", common.out.clone(), file.out.clone(), PathBuf::from(format!("fepls-{command}")));
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(e.into()))?;
    Ok((file, r, out))
}

pub(crate) fn write_table(out: &Path, name: &str, table: &Table) -> Result<(), CliError> {
    table.write(&out.join(name))?;
    Ok(())
}

pub(crate) fn finish(out: &Path, mut manifest: Manifest, started: Instant) -> Result<(), CliError> {
    manifest.set("wall_time_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.write(&out.join("manifest.txt"))?;
    println!("results written to {}", out.display());
    Ok(())
}

pub(crate) fn resolve_rho(r: &mut Resolver, cli: Option<f64>, file: Option<f64>, gamma: f64, preset: Preset) -> f64 {
    let default = match preset {
        Preset::Steep => -2.0 * gamma,
        Preset::Shallow => -gamma / 2.0,
    };
    r.pick("rho", cli, file, default)
}

pub(crate) fn model_spec(
    r: &mut Resolver,
    m: &ModelArgs,
    f: &FileConfig,
    preset: Preset,
    kappa_gamma: Option<(f64, f64)>,
) -> Result<ModelSpec, CliError> {
    let (kappa, gamma) = match kappa_gamma {
        Some(kg) => kg,
        None => (
            r.pick("kappa", m.kappa, f.kappa, 1.5),
            r.pick("gamma", m.gamma, f.gamma, 0.5),
        ),
    };
    let rho = resolve_rho(r, m.rho, f.rho, gamma, preset);
    let law = BurrLaw::new(gamma, rho).invalid()?;
    let d = r.pick("d", m.d, f.d, 101);
    let mut spec = ModelSpec::new(law, kappa).invalid()?.with_grid_size(d).invalid()?;
    spec.n = r.pick("n", m.n, f.n, spec.n);
    spec.hurst = r.pick("hurst", m.hurst, f.hurst, spec.hurst);
    spec.mu = r.pick("mu", m.mu, f.mu, spec.mu);
    let frac = r.pick("sigma-fraction", m.sigma_fraction, f.sigma_fraction, 0.1);
    spec.sigma_rule = SigmaRule::LinkFraction(frac);
    if r.flag("noiseless", m.noiseless, f.noiseless) {
        spec = spec.noiseless();
    }
    if !(frac >= 0.0) {
        return Err(CliError::validation(format!("--sigma-fraction must be >= 0, got {frac}")));
    }
    spec.validate().invalid()?;
    Ok(spec)
}

pub(crate) fn tau(r: &mut Resolver, s: &SelectArgs, f: &FileConfig) -> Result<TestFunction, CliError> {
    TestFunction::new(r.pick("tau", s.tau, f.tau, -2.0)).invalid()
}

pub(crate) fn selection(r: &mut Resolver, s: &SelectArgs, f: &FileConfig, default_mode: Mode) -> SelectionOptions {
    let mode = r.pick("mode", s.mode, f.mode, default_mode);
    SelectionOptions {
        k_min: r.pick("k-min", s.k_min, f.k_min, 5),
        k_max: r.pick_opt("k-max", s.k_max, f.k_max),
        mode: match mode {
            Mode::Sim => SelectionMode::Simulation,
            Mode::Data => SelectionMode::Data,
        },
    }
}

pub(crate) fn input_dataset(r: &mut Resolver, cli: &Option<PathBuf>, f: &FileConfig) -> Result<(PathBuf, Dataset), CliError> {
    let path = r.require("input", cli.clone(), f.input.clone())?;
    let data = read_dataset(&path).map_err(|e| match e {
        fepls::Error::Io(io) => CliError::validation(format!("cannot read {}: {io}", path.display())),
        e => CliError::from(e),
    })?;
    Ok((path, data))
}

/// The direction from `--direction`, or a FEPLS fit at the selected `k`.
pub(crate) fn projection_direction(
    r: &mut Resolver,
    cond: &CondArgs,
    select: &SelectArgs,
    f: &FileConfig,
    data: &Dataset,
    manifest: &mut Manifest,
) -> Result<FunctionSample, CliError> {
    if let Some(path) = r.pick_opt("direction", cond.direction.clone(), f.direction.clone()) {
        let dir = read_function(&path)?;
        if dir.grid() != data.grid() {
            return Err(CliError::validation(format!(
                "direction has {} points but the covariates have {}",
                dir.len(),
                data.grid().len()
            )));
        }
        return fepls::normalize(&dir).invalid();
    }
    let phi = tau(r, select, f)?;
    let opts = selection(r, select, f, Mode::Data);
    let path = FeplsPath::new(data, phi)?;
    let sel = path.select_k(opts)?;
    manifest.set("k_hat", sel.k);
    manifest.set("threshold", path.threshold(sel.k));
    Ok(path.direction(sel.k)?)
}

/// Empty cell for a failed estimate.
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}
