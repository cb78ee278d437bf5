use std::time::Instant;

use fepls::cond_extremes::{functional_curve, projected_curve, projection_grid, Functional, RelativeErrorCurve, DEFAULT_J};
use fepls::io::{Manifest, Table};
use fepls::synth::default_index;
use fepls::{normalize, orthogonalize, FunctionSample};

use super::{cell, finish, input_dataset, projection_direction, setup, write_table};
use crate::args::{CompareArgs, Target};
use crate::error::{CliError, Validate};

pub const LABELS: [&str; 4] = ["FEPLS", "Beta", "Beta v2", "Ortho"];

pub fn run(a: CompareArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("compare", &a.common)?;
    let (_, data) = input_dataset(&mut r, &a.cond.input, &f)?;
    let target = r.pick_opt("target", a.target, f.target);
    let alpha = r.pick_opt("alpha", a.cond.alpha.clone(), f.alpha.clone());
    let big_j = r.pick("big-j", a.big_j, f.big_j, DEFAULT_J);
    let grid_size = r.pick("grid-size", a.cond.grid_size, f.grid_size, 1001);
    if grid_size == 0 {
        return Err(CliError::validation("--grid-size must be positive"));
    }
    let level = |default: f64| -> Result<f64, CliError> {
        let al = alpha.as_ref().and_then(|v| v.first().copied()).unwrap_or(default);
        if al > 0.0 && al < 1.0 {
            Ok(al)
        } else {
            Err(CliError::validation(format!("risk level {al} outside (0, 1)")))
        }
    };
    let mut jobs = Vec::new();
    if target != Some(Target::TailIndex) {
        jobs.push(("quantile", Functional::Quantile, level(0.95)?));
    }
    if target != Some(Target::Quantile) {
        jobs.push(("tail_index", Functional::TailIndex { big_j }, level(0.7)?));
    }

    let mut fitted = Manifest::new();
    let beta_hat = projection_direction(&mut r, &a.cond, &a.select, &f, &data, &mut fitted)?;
    let mut m = r.echo;
    for (k, v) in fitted.entries() {
        m.set(k, v);
    }
    let grid = data.grid();
    let x = default_index(grid)?;
    let beta2 = normalize(&FunctionSample::from_fn(grid, |t| (-t * t + t).exp())?).invalid()?;
    let ortho = orthogonalize(&x, &beta_hat).or_else(|_| orthogonalize(&beta2, &beta_hat))?;
    let directions = [beta_hat, x.clone(), beta2, ortho];

    let s = projection_grid(&data, &x, grid_size)?;
    for (name, psi, al) in jobs {
        let functional = functional_curve(&data, &x, &s, al, psi);
        let mut curves = Vec::with_capacity(4);
        for dir in &directions {
            let projected = projected_curve(&data, &x, dir, &s, al, psi)?;
            curves.push(RelativeErrorCurve::from_estimates(s.clone(), &functional, &projected));
        }
        let mut header = vec!["s".to_string()];
        header.extend(LABELS.iter().map(|l| l.to_string()));
        let mut t = Table::new(header);
        for (l, s_l) in s.iter().enumerate() {
            t.push(std::iter::once(s_l.to_string()).chain(curves.iter().map(|c| cell(c.delta[l]))));
        }
        write_table(&out, &format!("errors_{name}.csv"), &t)?;

        let mut b = Table::new([
            "label", "min", "q1", "median", "q3", "max", "lower_whisker", "upper_whisker", "count", "excluded",
        ]);
        for (label, c) in LABELS.iter().zip(&curves) {
            match &c.summary {
                Some(sm) => b.push([
                    label.to_string(),
                    sm.min.to_string(),
                    sm.q1.to_string(),
                    sm.median.to_string(),
                    sm.q3.to_string(),
                    sm.max.to_string(),
                    sm.lower_whisker.to_string(),
                    sm.upper_whisker.to_string(),
                    sm.count.to_string(),
                    sm.excluded.to_string(),
                ]),
                None => {
                    let mut row = vec![label.to_string()];
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("0".into());
                    row.push(c.excluded.to_string());
                    b.push(row);
                }
            }
            if let Some(sm) = &c.summary {
                println!("{name} {label:>8}: median {:.4}%  [{} of {} points excluded]", sm.median, c.excluded, s.len());
            }
        }
        write_table(&out, &format!("boxplots_{name}.csv"), &b)?;
        m.set(format!("{name}.alpha"), al);
    }
    m.set("n", data.len());
    finish(&out, m, started)
}
