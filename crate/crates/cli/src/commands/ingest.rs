use std::time::Instant;

use fepls::io::{write_dataset, Table};
use fepls::pipeline::{align_and_block, remove_top_outliers, PriceSeries};

use super::{finish, setup, write_table};
use crate::args::IngestArgs;
use crate::error::{CliError, Validate};

pub fn run(a: IngestArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("ingest", &a.common)?;
    let cov_path = r.require("covariate", a.covariate.clone(), f.covariate.clone())?;
    let resp_path = r.require("response", a.response.clone(), f.response.clone())?;
    let swap = r.flag("swap-roles", a.swap_roles, f.swap_roles);
    let d = r.pick("d", a.d, f.d, 1440);
    let m_out = r.pick("remove-top", a.remove_top, f.remove_top, 2);

    let read = |p: &std::path::Path, label: &str| {
        PriceSeries::read(label, p).map_err(|e| match e {
            fepls::Error::Io(io) => CliError::validation(format!("cannot read {}: {io}", p.display())),
            fepls::Error::Parse { line, message } => CliError::Validation {
                kind: "parse",
                message: format!("{}:{line}: {message}", p.display()),
            },
            e => CliError::Validation {
                kind: e.kind(),
                message: format!("{}: {e}", p.display()),
            },
        })
    };
    let mut covariate = read(&cov_path, "covariate")?;
    let mut response = read(&resp_path, "response")?;
    if swap {
        std::mem::swap(&mut covariate, &mut response);
    }
    let blocks = align_and_block(&covariate, &response, d).invalid()?;
    let before = blocks.len();
    let kept = remove_top_outliers(&blocks, m_out).invalid()?;

    write_dataset(&out.join("dataset.csv"), &kept.data)?;
    let mut days = Table::new(["observation", "pair"]);
    for (i, day) in kept.days.iter().enumerate() {
        days.push([i, *day]);
    }
    write_table(&out, "days.csv", &days)?;
    println!("n = {before} pairs before outlier removal, {} after", kept.len());
    let mut m = r.echo;
    m.set("n_before", before).set("n_after", kept.len()).set("block_len", d);
    finish(&out, m, started)
}
