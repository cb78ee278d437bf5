use std::time::Instant;

use fepls::io::{write_dataset, write_function};

use super::{finish, model_spec, setup};
use crate::args::{Preset, SimulateArgs};
use crate::error::CliError;

pub fn run(a: SimulateArgs, started: Instant) -> Result<(), CliError> {
    let (f, mut r, out) = setup("simulate", &a.common)?;
    let preset = r.pick("preset", a.preset, f.preset, Preset::Steep);
    let spec = model_spec(&mut r, &a.model, &f, preset, None)?;
    let seed = r.pick("seed", a.model.seed, f.seed, 0);
    let data = fepls::generate(&spec, seed)?;
    write_dataset(&out.join("dataset.csv"), &data)?;
    write_function(&out.join("index.csv"), &spec.index, "beta")?;
    let mut m = r.echo;
    m.set("n", data.len()).set("d", data.grid().len());
    finish(&out, m, started)
}
