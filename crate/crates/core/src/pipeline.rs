//! Minute-price ingestion and the block construction that turns two price
//! series into functional observations.
//!
//! After aligning the two return series on their common timestamps, the
//! surviving minutes are cut into consecutive blocks of `d` minutes. Block
//! `2i` of the covariate returns becomes the curve `X_i`, and the maximum of
//! block `2i + 1` of the response returns becomes `Y_i`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::func_space::{FunctionSample, Grid};
use crate::synth::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    pub label: String,
    timestamps: Vec<NaiveDateTime>,
    prices: Vec<f64>,
}

const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

/// ISO-8601 date-time; an explicit offset is converted to UTC.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

impl PriceSeries {
    pub fn new(label: impl Into<String>, timestamps: Vec<NaiveDateTime>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::domain(format!(
                "{} timestamps for {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "timestamps not strictly increasing at row {}",
                i + 1
            )));
        }
        if let Some(i) = prices.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::domain(format!("price at row {i} is not a positive number")));
        }
        Ok(Self {
            label: label.into(),
            timestamps,
            prices,
        })
    }

    /// Reads `timestamp,price` rows after a header line. Errors carry the
    /// 1-based line number.
    pub fn parse_csv(label: impl Into<String>, reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(Error::Parse { line: 1, message: "empty input".into() }),
        };
        let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
        if cols != ["timestamp", "price"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `timestamp,price`, found `{}`", header.trim()),
            });
        }
        let mut timestamps = Vec::new();
        let mut prices = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            let mut fields = line.split(',');
            let ts = fields.next().unwrap_or("");
            let price = fields.next().map(str::trim).unwrap_or("");
            if fields.next().is_some() {
                return Err(parse_err("expected exactly two fields".into()));
            }
            let ts = parse_timestamp(ts).ok_or_else(|| parse_err(format!("invalid timestamp `{}`", ts.trim())))?;
            if price.is_empty() {
                return Err(parse_err("missing price".into()));
            }
            let p: f64 = price.parse().map_err(|_| parse_err(format!("invalid price `{price}`")))?;
            if !(p > 0.0) || !p.is_finite() {
                return Err(parse_err(format!("price must be positive, got {price}")));
            }
            if let Some(last) = timestamps.last() {
                if ts <= *last {
                    return Err(parse_err(format!("timestamp {ts} does not increase")));
                }
            }
            timestamps.push(ts);
            prices.push(p);
        }
        Self::new(label, timestamps, prices)
    }

    pub fn read(label: impl Into<String>, path: &Path) -> Result<Self> {
        Self::parse_csv(label, BufReader::new(File::open(path)?))
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Log-returns stamped with the later of the two instants.
#[derive(Clone, Debug, PartialEq)]
pub struct Returns {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

pub fn log_returns(series: &PriceSeries) -> Result<Returns> {
    if series.len() < 2 {
        return Err(Error::insufficient(format!(
            "log-returns need at least 2 prices, {} has {}",
            series.label,
            series.len()
        )));
    }
    let values = series.prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(Returns {
        timestamps: series.timestamps[1..].to_vec(),
        values,
    })
}

/// Paired sample built from two aligned series.
#[derive(Clone, Debug)]
pub struct BlockSample {
    pub data: Dataset,
    /// Pair number of each observation in the original block sequence;
    /// pair `i` uses blocks `2i` and `2i + 1`.
    pub days: Vec<usize>,
    pub block_len: usize,
}

impl BlockSample {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Returns of both series restricted to their common timestamps.
pub fn intersect(a: &Returns, b: &Returns) -> (Vec<f64>, Vec<f64>) {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    while i < a.timestamps.len() && j < b.timestamps.len() {
        match a.timestamps[i].cmp(&b.timestamps[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ra.push(a.values[i]);
                rb.push(b.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    (ra, rb)
}

pub fn align_and_block(covariate: &PriceSeries, response: &PriceSeries, d: usize) -> Result<BlockSample> {
    if d == 0 {
        return Err(Error::domain("block length must be positive"));
    }
    let (xs, ys) = intersect(&log_returns(covariate)?, &log_returns(response)?);
    let pairs = xs.len() / (2 * d);
    if pairs == 0 {
        return Err(Error::insufficient(format!(
            "{} common minutes; need at least {} for one pair of blocks",
            xs.len(),
            2 * d
        )));
    }
    let grid = Grid::new(d)?;
    let mut x = Vec::with_capacity(pairs);
    let mut y = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let cov = &xs[2 * i * d..(2 * i + 1) * d];
        let resp = &ys[(2 * i + 1) * d..(2 * i + 2) * d];
        x.push(FunctionSample::new(grid.clone(), cov.to_vec())?);
        y.push(resp.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    log::info!("built {pairs} block pairs of length {d} from {} common minutes", xs.len());
    Ok(BlockSample {
        data: Dataset::new(x, y)?,
        days: (0..pairs).collect(),
        block_len: d,
    })
}

/// Drops the `m` pairs with the largest responses; among tied responses the
/// later pair is dropped first. Pairing and order are preserved.
pub fn remove_top_outliers(sample: &BlockSample, m: usize) -> Result<BlockSample> {
    let n = sample.len();
    if m >= n {
        return Err(Error::domain(format!("cannot remove {m} of {n} pairs")));
    }
    let ys = sample.data.y();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(b.cmp(&a)));
    let mut keep = vec![true; n];
    for &i in &order[..m] {
        keep[i] = false;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let x = kept.iter().map(|&i| sample.data.x()[i].clone()).collect();
    let y = kept.iter().map(|&i| ys[i]).collect();
    Ok(BlockSample {
        data: Dataset::new(x, y)?,
        days: kept.iter().map(|&i| sample.days[i]).collect(),
        block_len: sample.block_len,
    })
}
