//! Critical-value tables indexed by the nuisance ratio `b0 * phi(1) / sigma`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TobitError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "1%")]
    One,
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "10%")]
    Ten,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::One, Level::Five, Level::Ten];

    pub fn from_percent(p: f64) -> Result<Level> {
        match p {
            p if p == 1.0 => Ok(Level::One),
            p if p == 5.0 => Ok(Level::Five),
            p if p == 10.0 => Ok(Level::Ten),
            _ => Err(TobitError::LevelNotTabulated(p)),
        }
    }

    pub fn probability(&self) -> f64 {
        match self {
            Level::One => 0.01,
            Level::Five => 0.05,
            Level::Ten => 0.10,
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Level::One => 0,
            Level::Five => 1,
            Level::Ten => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub ratio: f64,
    /// Quantiles at 1%, 5% and 10%.
    pub q: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Sample length of the simulated paths.
    pub t: usize,
    pub replications: u64,
    /// Grid size for limit-process tables; `None` for finite-sample tables.
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub innovation_law: String,
    pub source: String,
    /// Draws discarded per row because the regression was degenerate.
    #[serde(default)]
    pub degenerate_draws: Vec<u64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    pub adf_row: [f64; 3],
    pub provenance: Provenance,
}

/// Row selected by [`CvTable::row_for`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowChoice {
    /// Tabulated ratio of the chosen row; `None` for the ADF fallback.
    pub ratio: Option<f64>,
    pub q: [f64; 3],
    /// The input ratio was negative and replaced by zero.
    pub clamped: bool,
}

impl RowChoice {
    pub fn cv(&self, level: Level) -> f64 {
        self.q[level.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PBound {
    /// Interpolated between tabulated levels.
    Interpolated,
    /// Statistic below the 1% quantile: p is at most the reported value.
    AtMost,
    /// Statistic above the 10% quantile: p is at least the reported value.
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TablePValue {
    pub value: f64,
    pub bound: PBound,
}

#[allow(clippy::approx_constant)] // -3.14 is a critical value
const REFERENCE: [(f64, [f64; 3]); 22] = [
    (0.0, [-4.69, -3.77, -3.34]),
    (0.1, [-4.58, -3.66, -3.22]),
    (0.2, [-4.49, -3.57, -3.14]),
    (0.3, [-4.38, -3.49, -3.07]),
    (0.4, [-4.25, -3.40, -3.00]),
    (0.5, [-4.11, -3.31, -2.93]),
    (0.6, [-3.97, -3.22, -2.87]),
    (0.7, [-3.85, -3.15, -2.81]),
    (0.8, [-3.75, -3.08, -2.75]),
    (0.9, [-3.67, -3.03, -2.71]),
    (1.0, [-3.60, -2.99, -2.68]),
    (1.1, [-3.56, -2.96, -2.65]),
    (1.2, [-3.52, -2.94, -2.63]),
    (1.3, [-3.50, -2.92, -2.62]),
    (1.4, [-3.48, -2.90, -2.61]),
    (1.5, [-3.47, -2.89, -2.60]),
    (1.6, [-3.46, -2.89, -2.59]),
    (1.7, [-3.45, -2.88, -2.58]),
    (1.8, [-3.45, -2.87, -2.58]),
    (1.9, [-3.44, -2.87, -2.58]),
    (2.0, [-3.44, -2.87, -2.57]),
    (2.5, [-3.43, -2.86, -2.57]),
];

/// Conventional ADF quantiles (constant, no trend).
pub const ADF_ROW: [f64; 3] = [-3.43, -2.86, -2.57];

impl CvTable {
    /// Validates ratio ordering and within-row quantile ordering.
    pub fn new(rows: Vec<CvRow>, adf_row: [f64; 3], provenance: Provenance) -> Result<CvTable> {
        if rows.is_empty() {
            return Err(TobitError::InvalidTable("no rows".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].ratio > w[0].ratio) {
                return Err(TobitError::InvalidTable(format!(
                    "ratios must be strictly increasing ({} then {})",
                    w[0].ratio, w[1].ratio
                )));
            }
        }
        for row in rows.iter().map(|r| (Some(r.ratio), r.q)).chain(std::iter::once((None, adf_row))) {
            let (ratio, q) = row;
            if q.iter().any(|v| !v.is_finite()) || !(q[0] < q[1] && q[1] < q[2]) {
                return Err(TobitError::InvalidTable(format!(
                    "quantiles must satisfy q01 < q05 < q10 (row {ratio:?}: {q:?})"
                )));
            }
        }
        if rows[0].ratio < 0.0 {
            return Err(TobitError::InvalidTable("ratios must be >= 0".into()));
        }
        Ok(CvTable { rows, adf_row, provenance })
    }

    /// The published 22-row table and ADF row (T = 1e5, R = 1e7, Gaussian).
    pub fn reference() -> CvTable {
        let rows = REFERENCE.iter().map(|&(ratio, q)| CvRow { ratio, q }).collect();
        let provenance = Provenance {
            t: 100_000,
            replications: 10_000_000,
            grid: None,
            seed: None,
            innovation_law: "gaussian".into(),
            source: "reference".into(),
            degenerate_draws: Vec::new(),
            notes: Vec::new(),
        };
        CvTable::new(rows, ADF_ROW, provenance).expect("reference table is valid")
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.last().map(|r| r.ratio).unwrap_or(0.0)
    }

    /// Nearest tabulated row; exact midpoints go to the smaller ratio, ratios
    /// above the largest tabulated one use the ADF row, negative ratios are
    /// clamped to zero.
    pub fn row_for(&self, ratio: f64) -> RowChoice {
        let clamped = ratio < 0.0;
        if clamped {
            warn!("negative nuisance ratio {ratio} clamped to 0");
        }
        let r = if clamped || ratio.is_nan() { 0.0 } else { ratio };
        if r > self.max_ratio() {
            return RowChoice { ratio: None, q: self.adf_row, clamped };
        }
        let mut best = &self.rows[0];
        let mut best_dist = (r - best.ratio).abs();
        for row in &self.rows[1..] {
            let d = (r - row.ratio).abs();
            // Strict improvement beyond rounding noise; ties keep the smaller ratio.
            if d < best_dist - 1e-12 {
                best = row;
                best_dist = d;
            }
        }
        RowChoice { ratio: Some(best.ratio), q: best.q, clamped }
    }

    pub fn lookup(&self, ratio: f64, level: Level) -> f64 {
        self.row_for(ratio).cv(level)
    }

    /// Monotone (piecewise linear) interpolation of the p-value through the
    /// three tabulated quantiles of the selected row.
    pub fn p_value(&self, t_beta: f64, ratio: f64) -> TablePValue {
        let q = self.row_for(ratio).q;
        let p = [0.01, 0.05, 0.10];
        if t_beta <= q[0] {
            return TablePValue { value: p[0], bound: PBound::AtMost };
        }
        if t_beta >= q[2] {
            return TablePValue { value: p[2], bound: PBound::AtLeast };
        }
        let i = if t_beta <= q[1] { 0 } else { 1 };
        let w = (t_beta - q[i]) / (q[i + 1] - q[i]);
        TablePValue { value: p[i] + w * (p[i + 1] - p[i]), bound: PBound::Interpolated }
    }

    /// Places where a quantile column decreases in the ratio, or where the
    /// ADF row sits below the last tabulated row.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        // Paths that never touch the bound give the same statistic up to
        // rounding, whatever the origin; ignore differences at that level.
        let below = |a: f64, b: f64| a < b - 1e-9 * b.abs().max(1.0);
        let mut out = Vec::new();
        let names = ["q01", "q05", "q10"];
        for w in self.rows.windows(2) {
            for (j, name) in names.iter().enumerate() {
                if below(w[1].q[j], w[0].q[j]) {
                    out.push(format!(
                        "{name} decreases from ratio {} ({}) to {} ({})",
                        w[0].ratio, w[0].q[j], w[1].ratio, w[1].q[j]
                    ));
                }
            }
        }
        let last = self.rows.last().expect("nonempty");
        for (j, name) in names.iter().enumerate() {
            if below(self.adf_row[j], last.q[j]) {
                out.push(format!("{name} of the ADF row ({}) is below ratio {} ({})", self.adf_row[j], last.ratio, last.q[j]));
            }
        }
        out
    }

    /// CSV with header `ratio,q01,q05,q10`; the ADF row is written last with
    /// ratio `inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ratio,q01,q05,q10\n");
        for row in &self.rows {
            writeln!(s, "{},{},{},{}", row.ratio, row.q[0], row.q[1], row.q[2]).unwrap();
        }
        writeln!(s, "inf,{},{},{}", self.adf_row[0], self.adf_row[1], self.adf_row[2]).unwrap();
        s
    }

    pub fn from_csv(text: &str, provenance: Provenance) -> Result<CvTable> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["ratio", "q01", "q05", "q10"] {
            return Err(TobitError::InvalidTable(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        let mut adf = None;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|e| {
                    TobitError::InvalidTable(format!("line {}: column {}: {e}", i + 2, j + 1))
                })
            };
            let ratio = parse(0)?;
            let q = [parse(1)?, parse(2)?, parse(3)?];
            if ratio.is_infinite() {
                adf = Some(q);
            } else {
                rows.push(CvRow { ratio, q });
            }
        }
        let adf = adf.ok_or_else(|| TobitError::InvalidTable("missing ADF row (ratio inf)".into()))?;
        CvTable::new(rows, adf, provenance)
    }

    /// Writes `<stem>.csv` and the `<stem>.json` provenance sidecar.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv())?;
        fs::write(csv_path.with_extension("json"), serde_json::to_string_pretty(&self.provenance)? + "\n")?;
        Ok(())
    }

    pub fn read(csv_path: &Path) -> Result<CvTable> {
        let text = fs::read_to_string(csv_path)?;
        let provenance: Provenance = serde_json::from_str(&fs::read_to_string(csv_path.with_extension("json"))?)?;
        CvTable::from_csv(&text, provenance)
    }
}
