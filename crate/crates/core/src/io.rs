//! Plain-text CSV tables and key-value manifests.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so reading a file back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::func_space::{FunctionSample, Grid};
use crate::synth::Dataset;

/// A header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<D: Display>(&mut self, row: impl IntoIterator<Item = D>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some((_, l)) => l.split(',').map(|c| c.trim().to_string()).collect(),
            None => return Err(Error::Parse { line: 1, message: "empty table".into() }),
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Column `name` parsed as numbers.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })?;
        self.rows.iter().enumerate().map(|(i, r)| parse_number(&r[j], i + 2)).collect()
    }
}

fn parse_number(cell: &str, line: usize) -> Result<f64> {
    cell.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{cell}` is not a number"),
    })
}

/// Dataset as `y,x_1,...,x_d`, one observation per row.
pub fn dataset_table(data: &Dataset) -> Table {
    let d = data.grid().len();
    let mut t = Table::new(std::iter::once("y".to_string()).chain((1..=d).map(|k| format!("x_{k}"))));
    for (x, &y) in data.x().iter().zip(data.y()) {
        t.push(std::iter::once(y).chain(x.values().iter().copied()));
    }
    t
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    dataset_table(data).write(path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let t = Table::read(path)?;
    if t.header.first().map(String::as_str) != Some("y") || t.header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `y,x_1,...,x_d`".into(),
        });
    }
    if t.rows.is_empty() {
        return Err(Error::insufficient("dataset file has no observations"));
    }
    let grid = Grid::new(t.header.len() - 1)?;
    let mut x = Vec::with_capacity(t.rows.len());
    let mut y = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let vals = row.iter().map(|c| parse_number(c, i + 2)).collect::<Result<Vec<f64>>>()?;
        y.push(vals[0]);
        x.push(FunctionSample::new(grid.clone(), vals[1..].to_vec()).map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Dataset::new(x, y)
}

/// Function as `t,<name>` rows over its grid.
pub fn function_table(f: &FunctionSample, name: &str) -> Table {
    let mut t = Table::new(["t", name]);
    for (p, v) in f.grid().points().iter().zip(f.values()) {
        t.push([p, v]);
    }
    t
}

pub fn write_function(path: &Path, f: &FunctionSample, name: &str) -> Result<()> {
    function_table(f, name).write(path)
}

/// Reads the second column of a `t,<name>` file.
pub fn read_function(path: &Path) -> Result<FunctionSample> {
    let t = Table::read(path)?;
    if t.header.len() != 2 || t.header[0] != "t" {
        return Err(Error::Parse {
            line: 1,
            message: "expected a two-column `t,<name>` header".into(),
        });
    }
    let name = t.header[1].clone();
    FunctionSample::from_values(t.column(&name)?)
}

/// Key-value text written in sorted key order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let value = value.to_string().replace('\n', " ");
        self.entries.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            m.set(k.trim(), v);
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}
