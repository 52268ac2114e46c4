use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS: usize = 24;

/// One hour of market and forecast data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub hour: usize,
    /// Wholesale electricity price, currency per MW.
    pub x_we: f64,
    /// Wholesale gas price, currency per MW.
    pub x_wg: f64,
    /// Forecast wind output, MW.
    pub wt_mw: f64,
    /// Forecast PV output, MW.
    pub pv_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayData {
    rows: Vec<DayRow>,
}

impl DayData {
    pub fn new(rows: Vec<DayRow>) -> Result<Self> {
        if rows.len() != HOURS {
            return Err(Error::data(
                "day data",
                rows.len(),
                format!("expected {HOURS} rows, found {}", rows.len()),
            ));
        }
        for (i, r) in rows.iter().enumerate() {
            let row = i + 1;
            if r.hour != i {
                return Err(Error::data(
                    "day data",
                    row,
                    format!("expected hour {i}, found {}", r.hour),
                ));
            }
            for (name, v) in [
                ("x_we", r.x_we),
                ("x_wg", r.x_wg),
                ("wt_mw", r.wt_mw),
                ("pv_mw", r.pv_mw),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::data(
                        "day data",
                        row,
                        format!("{name} must be finite and nonnegative, found {v}"),
                    ));
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[DayRow] {
        &self.rows
    }

    pub fn row(&self, hour: usize) -> Result<&DayRow> {
        self.rows
            .get(hour)
            .ok_or_else(|| Error::data("day data", hour + 1, "missing row"))
    }

    pub fn max_x_we(&self) -> f64 {
        self.rows.iter().map(|r| r.x_we).fold(0.0, f64::max)
    }

    pub fn max_x_wg(&self) -> f64 {
        self.rows.iter().map(|r| r.x_wg).fold(0.0, f64::max)
    }

    /// Parses CSV with header `hour,x_we,x_wg,wt_mw,pv_mw`.
    pub fn from_reader<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::data(source_name, 0, e.to_string()))?
            .clone();
        let expected = ["hour", "x_we", "x_wg", "wt_mw", "pv_mw"];
        if headers.iter().ne(expected) {
            return Err(Error::data(
                source_name,
                0,
                format!("header must be {}", expected.join(",")),
            ));
        }
        let mut rows = Vec::with_capacity(HOURS);
        for (i, record) in csv.deserialize::<DayRow>().enumerate() {
            let row = record.map_err(|e| Error::data(source_name, i + 1, e.to_string()))?;
            rows.push(row);
        }
        DayData::new(rows).map_err(|e| match e {
            Error::Data { row, message, .. } => Error::data(source_name, row, message),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }
}

pub fn load_day(path: &Path) -> Result<DayData> {
    DayData::load(path)
}
