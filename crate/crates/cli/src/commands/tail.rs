use std::time::Instant;

use fepls::heavy_tails::{hill, qq_plot_data};
use fepls::io::Table;
use fepls::SortedSample;

use super::{finish, setup, write_table};
use crate::args::TailArgs;
use crate::error::{CliError, Validate};

pub fn run(a: TailArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("tail", &a.common)?;
    let input = r.require("input", a.input.clone(), f.input.clone())?;
    let ys = Table::read(&input)
        .map_err(|e| CliError::validation(format!("{}: {e}", input.display())))?
        .column("y")?;
    let sorted = SortedSample::new(ys).invalid()?;
    let n = sorted.len();
    if n < 2 {
        return Err(CliError::validation("tail analysis needs at least 2 responses"));
    }
    let k_min = r.pick("k-min", a.k_min, f.k_min, 1);
    let k_max = r.pick("k-max", a.k_max, f.k_max, n - 1);
    if k_min == 0 || k_min > k_max || k_max >= n {
        return Err(CliError::validation(format!("k range {k_min}..={k_max} must lie in [1, {}]", n - 1)));
    }
    let k_qq = r.pick("k", a.k, f.k, (n / 10).max(1));

    let mut table = Table::new(["k", "gamma_hat"]);
    for k in k_min..=k_max {
        table.push([k.to_string(), super::cell(hill(&sorted, k).ok())]);
    }
    write_table(&out, "hill.csv", &table)?;

    let qq = qq_plot_data(&sorted, k_qq).invalid()?;
    let mut t = Table::new(["quantile", "log_excess"]);
    for (x, y) in &qq.points {
        t.push([x, y]);
    }
    write_table(&out, "qq.csv", &t)?;
    let mut m = r.echo;
    m.set("n", n).set("qq_slope", qq.slope);
    println!("QQ slope at k = {k_qq}: {}", qq.slope);
    finish(&out, m, started)
}
