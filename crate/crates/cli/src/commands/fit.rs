use std::time::Instant;

use fepls::io::{function_table, read_function, Table};
use fepls::{FeplsPath, RateOptions};

use super::{finish, input_dataset, selection, setup, tau, write_table};
use crate::args::{FitArgs, Mode};
use crate::error::{CliError, Validate};

pub fn run(a: FitArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("fit", &a.common)?;
    let (input, data) = input_dataset(&mut r, &a.input, &f)?;
    let phi = tau(&mut r, &a.select, &f)?;
    let opts = selection(&mut r, &a.select, &f, Mode::Sim);
    let fixed_k = r.pick_opt("k", a.k, f.k);
    let rate = RateOptions {
        q: r.pick("q", a.q, f.q, 4.0),
        kappa: r.pick_opt("kappa", a.kappa, f.kappa),
    };
    let sibling = input.with_file_name("index.csv");
    let index_path = r.pick_opt("index", a.index.clone(), f.index.clone()).or_else(|| sibling.exists().then_some(sibling));

    let path = FeplsPath::new(&data, phi)?;
    let mut m = r.echo;
    let k = match fixed_k {
        Some(k) => {
            if k == 0 || k > data.len() {
                return Err(CliError::validation(format!("--k must lie in [1, {}]", data.len())));
            }
            k
        }
        None => {
            let sel = path.select_k(opts)?;
            let mut t = Table::new(["k", "r"]);
            for (k, v) in &sel.curve {
                t.push([k.to_string(), v.to_string()]);
            }
            write_table(&out, "correlation.csv", &t)?;
            sel.k
        }
    };
    let fit = path.fit(k, rate)?;
    write_table(&out, "direction.csv", &function_table(&fit.direction, "beta_hat"))?;

    m.set("n", data.len())
        .set("d", data.grid().len())
        .set("k_hat", fit.k)
        .set("threshold", fit.threshold)
        .set("exceedances", fit.exceedances)
        .set("raw_norm", fit.raw_norm);
    if let Some(rate) = fit.rate {
        m.set("rate_delta", rate);
    }
    println!("k = {}  threshold = {}", fit.k, fit.threshold);
    if let Some(p) = index_path {
        let beta = read_function(&p)?;
        let ip = fepls::inner_product(&fit.direction, &beta).invalid()?;
        m.set("index_file", p.display()).set("inner_with_index", ip);
        println!("<beta_hat, beta> = {ip}");
    }
    finish(&out, m, started)
}
