//! Series CSV reading and writing, and the pure parts of the ECB SDMX
//! client (key validation, URL construction, `csvdata` parsing).

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;

use crate::error::{Result, TobitError};
use crate::model::Series;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReadOptions {
    /// Take natural logarithms of the values.
    pub log: bool,
    /// Lower bound on the analysis scale (after the log, if any).
    pub bound: Option<f64>,
    /// Lower bound on the raw scale; logged together with the values.
    pub bound_raw: Option<f64>,
}

impl ReadOptions {
    fn resolved_bound(&self) -> Result<f64> {
        match (self.bound, self.bound_raw) {
            (Some(_), Some(_)) => Err(TobitError::invalid("give either a bound or a raw-scale bound, not both")),
            (Some(b), None) => Ok(b),
            (None, Some(b)) if self.log => {
                if b > 0.0 {
                    Ok(b.ln())
                } else {
                    Err(TobitError::invalid(format!("raw bound {b} has no logarithm")))
                }
            }
            (None, Some(b)) => Ok(b),
            (None, None) => Ok(0.0),
        }
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Reads a one-column (`value`) or two-column (`date,value`) CSV, with or
/// without a header line. Dates are ISO-8601 (`YYYY-MM-DD`).
pub fn read_series_csv(path: &Path, opts: &ReadOptions) -> Result<Series> {
    let text = std::fs::read_to_string(path)?;
    parse_series_csv(&text, path, opts)
}

pub fn parse_series_csv(text: &str, path: &Path, opts: &ReadOptions) -> Result<Series> {
    let bound = opts.resolved_bound()?;
    let err = |line: usize, message: String| TobitError::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut dates = Vec::new();
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = rec.len();
        if w > 2 {
            return Err(err(line, format!("expected 1 or 2 columns, found {w}")));
        }
        let value_field = &rec[w - 1];
        let value = match value_field.parse::<f64>() {
            Ok(v) => v,
            // A non-numeric first line is a header.
            Err(_) if values.is_empty() && width.is_none() => {
                width = Some(w);
                continue;
            }
            Err(e) => return Err(err(line, format!("cannot parse {value_field:?} as a number: {e}"))),
        };
        match width {
            Some(prev) if prev != w => return Err(err(line, format!("expected {prev} columns, found {w}"))),
            _ => width = Some(w),
        }
        if !value.is_finite() {
            return Err(err(line, format!("non-finite value {value_field:?}")));
        }
        if w == 2 {
            let d = parse_date(&rec[0]).ok_or_else(|| err(line, format!("cannot parse {:?} as an ISO date", &rec[0])))?;
            dates.push(d);
        }
        let value = if opts.log {
            if value <= 0.0 {
                return Err(err(line, format!("cannot take the logarithm of {value}")));
            }
            value.ln()
        } else {
            value
        };
        values.push(value);
    }
    if values.is_empty() {
        return Err(err(0, "no observations".into()));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(err(0, "dates must be strictly increasing".into()));
    }
    if values.iter().any(|v| *v < bound) {
        warn!("{}: some observations lie below the declared bound {bound}", path.display());
    }
    let dates = if dates.is_empty() { None } else { Some(dates) };
    let series = Series { values, dates, lower_bound: bound };
    series.validate()?;
    Ok(series)
}

/// CSV with header `value` or `date,value`; values are written with 17
/// significant digits, which round-trips every `f64`.
pub fn series_to_csv(series: &Series) -> String {
    let mut s = String::new();
    match &series.dates {
        Some(dates) => {
            s.push_str("date,value\n");
            for (d, v) in dates.iter().zip(&series.values) {
                writeln!(s, "{},{:.16e}", d.format("%Y-%m-%d"), v).unwrap();
            }
        }
        None => {
            s.push_str("value\n");
            for v in &series.values {
                writeln!(s, "{v:.16e}").unwrap();
            }
        }
    }
    s
}

pub fn write_series_csv(series: &Series, path: &Path) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub const ECB_BASE_URL: &str = "https://data-api.ecb.europa.eu/service/data";

/// The series cited for the CHF/EUR floor period.
pub const CHF_EUR_KEY: &str = "EXR.D.CHF.EUR.SP00.A";

/// Checks `FLOW.DIM1.DIM2...`: at least one dimension, every part
/// nonempty and made of ASCII letters, digits or underscores.
pub fn validate_series_key(key: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let ok = parts.len() >= 2
        && parts.iter().all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
    if ok {
        Ok(())
    } else {
        Err(TobitError::InvalidSeriesKey(key.to_string()))
    }
}

pub fn check_date_range(start: NaiveDate, end: NaiveDate) -> Result<()> {
    if start > end {
        return Err(TobitError::EmptyDateRange { start: start.to_string(), end: end.to_string() });
    }
    Ok(())
}

/// SDMX-REST request URL for `key` over `[start, end]` in `csvdata` format.
pub fn ecb_url(key: &str, start: NaiveDate, end: NaiveDate) -> Result<String> {
    validate_series_key(key)?;
    check_date_range(start, end)?;
    let (flow, rest) = key.split_once('.').expect("validated key has a dot");
    Ok(format!(
        "{ECB_BASE_URL}/{flow}/{rest}?startPeriod={}&endPeriod={}&format=csvdata",
        start.format("%Y-%m-%d"),
        end.format("%Y-%m-%d")
    ))
}

/// Parses an SDMX `csvdata` payload into date-ordered observations,
/// skipping missing values.
pub fn parse_ecb_csv(text: &str, url: &str) -> Result<Vec<(NaiveDate, f64)>> {
    if text.trim().is_empty() {
        return Err(TobitError::EmptyPayload { url: url.to_string() });
    }
    let malformed = |message: String| TobitError::MalformedCsv { url: url.to_string(), message };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| malformed(format!("missing column {name}")))
    };
    let (ti, vi) = (col("TIME_PERIOD")?, col("OBS_VALUE")?);
    let mut obs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        let line = i + 2;
        let raw = rec.get(vi).unwrap_or("").trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            continue;
        }
        let value: f64 = raw.parse().map_err(|e| malformed(format!("line {line}: OBS_VALUE {raw:?}: {e}")))?;
        let date_raw = rec.get(ti).unwrap_or("").trim();
        let date = parse_date(date_raw).ok_or_else(|| malformed(format!("line {line}: TIME_PERIOD {date_raw:?}")))?;
        obs.push((date, value));
    }
    if obs.is_empty() {
        return Err(TobitError::EmptyPayload { url: url.to_string() });
    }
    obs.sort_by_key(|o| o.0);
    if obs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(malformed("duplicate TIME_PERIOD".into()));
    }
    Ok(obs)
}

/// Builds a series from parsed observations.
pub fn observations_to_series(obs: Vec<(NaiveDate, f64)>, opts: &ReadOptions) -> Result<Series> {
    let bound = opts.resolved_bound()?;
    let mut dates = Vec::with_capacity(obs.len());
    let mut values = Vec::with_capacity(obs.len());
    for (d, v) in obs {
        let v = if opts.log {
            if v <= 0.0 {
                return Err(TobitError::invalid(format!("cannot take the logarithm of {v} on {d}")));
            }
            v.ln()
        } else {
            v
        };
        dates.push(d);
        values.push(v);
    }
    Series::with_dates(values, dates, bound)
}
