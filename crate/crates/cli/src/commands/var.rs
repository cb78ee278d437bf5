use std::time::Instant;

use fepls::cond_extremes::{conditional_quantile, projection_grid, CovariateView, KernelConfig, Location, SCATTER_BANDWIDTH};
use fepls::io::{Manifest, Table};
use rayon::prelude::*;

use super::{cell, finish, input_dataset, projection_direction, setup, write_table};
use crate::args::VarArgs;
use crate::error::{CliError, Validate};

pub fn run(a: VarArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("var", &a.common)?;
    let (_, data) = input_dataset(&mut r, &a.cond.input, &f)?;
    let alphas = r.pick("alpha", a.cond.alpha.clone(), f.alpha.clone(), vec![0.98, 0.995]);
    if let Some(bad) = alphas.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(CliError::validation(format!("risk level {bad} outside (0, 1)")));
    }
    let grid_size = r.pick("grid-size", a.cond.grid_size, f.grid_size, 1001);
    let h = r.pick("bandwidth", a.bandwidth, f.bandwidth, SCATTER_BANDWIDTH);
    let kernel = KernelConfig::fixed(h).invalid()?;
    let mut fitted = Manifest::new();
    let dir = projection_direction(&mut r, &a.cond, &a.select, &f, &data, &mut fitted)?;
    let mut m = r.echo;
    for (k, v) in fitted.entries() {
        m.set(k, v);
    }

    let proj: Vec<f64> = data.x().iter().map(|x| fepls::inner_product(x, &dir)).collect::<Result<_, _>>()?;
    let top = m.get("k_hat").and_then(|k| k.parse::<usize>().ok());
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&i, &j| data.y()[j].total_cmp(&data.y()[i]));
    let mut is_top = vec![false; data.len()];
    for &i in order.iter().take(top.unwrap_or(0)) {
        is_top[i] = true;
    }
    let mut scatter = Table::new(["projection", "y", "top"]);
    for i in 0..data.len() {
        scatter.push([proj[i].to_string(), data.y()[i].to_string(), (is_top[i] as u8).to_string()]);
    }
    write_table(&out, "scatter.csv", &scatter)?;

    let s_grid = projection_grid(&data, &dir, grid_size)?;
    let view = CovariateView::projected(dir).invalid()?;
    let curves: Vec<Vec<Option<f64>>> = s_grid
        .par_iter()
        .map(|&s| {
            alphas
                .iter()
                .map(|&al| conditional_quantile(&data, &view, &Location::Scalar(s), &kernel, al).ok())
                .collect()
        })
        .collect();
    let mut header = vec!["s".to_string()];
    header.extend(alphas.iter().map(|al| format!("q_{al}")));
    let mut t = Table::new(header);
    let mut excluded = 0;
    for (s, row) in s_grid.iter().zip(&curves) {
        excluded += row.iter().filter(|v| v.is_none()).count();
        t.push(std::iter::once(s.to_string()).chain(row.iter().map(|v| cell(*v))));
    }
    write_table(&out, "var_curves.csv", &t)?;
    m.set("n", data.len()).set("excluded", excluded);
    finish(&out, m, started)
}
