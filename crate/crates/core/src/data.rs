//! Daily case-report ingestion and S/I/R series derivation.
//!
//! The raw table carries cumulative and daily counts of cases, deaths and
//! tests. [`derive_sir`] turns it into aligned susceptible, infected and
//! recovered series using an incubation + test-turnaround cutoff for
//! susceptibles, a rolling infectious window for infecteds, and a recovery
//! fraction applied to cases older than that window.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    Schema(String),
    #[error("table has no data rows")]
    Empty,
    #[error("line {line}: cannot parse {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("line {line}: {column} is negative")]
    NegativeCount { line: u64, column: String },
    #[error("dates not strictly increasing at {date}")]
    Unordered { date: NaiveDate },
    #[error("date gap: {after} is followed by {next}")]
    Gap { after: NaiveDate, next: NaiveDate },
    #[error("cumulative column {column} decreases on {date}")]
    Monotonicity { column: String, date: NaiveDate },
    #[error("{column} on {date} disagrees with the day-over-day change of its cumulative column")]
    Inconsistent { column: String, date: NaiveDate },
    #[error("series of length {len} is too short; need more than {required} rows")]
    Window { len: usize, required: usize },
    #[error("series is empty")]
    EmptySeries,
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("non-finite value in series {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl DataError {
    /// Short machine-readable category token.
    pub fn category(&self) -> &'static str {
        match self {
            DataError::Csv(_) | DataError::Parse { .. } => "ParseError",
            DataError::Schema(_) => "SchemaError",
            DataError::Empty => "EmptyTable",
            DataError::NegativeCount { .. } => "NegativeCount",
            DataError::Unordered { .. } | DataError::Gap { .. } => "GapError",
            DataError::Monotonicity { .. } => "MonotonicityError",
            DataError::Inconsistent { .. } => "ConsistencyError",
            DataError::Window { .. } => "WindowError",
            DataError::EmptySeries => "EmptySeries",
            DataError::LengthMismatch | DataError::NonFinite(_) => "SeriesError",
            DataError::Io(_) => "IoError",
        }
    }
}

/// One day of the raw report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub date: NaiveDate,
    pub total_cases: u64,
    pub new_cases: u64,
    pub total_deaths: u64,
    pub new_deaths: u64,
    pub total_tested: u64,
}

const RAW_COLUMNS: [&str; 6] = [
    "date",
    "total_cases",
    "new_cases",
    "total_deaths",
    "new_deaths",
    "total_tested",
];

/// Validated daily case table: contiguous dates, nondecreasing cumulative
/// columns and daily columns that match their cumulative increments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCaseTable {
    rows: Vec<CaseRecord>,
}

impl RawCaseTable {
    pub fn new(rows: Vec<CaseRecord>) -> Result<Self, DataError> {
        validate_rows(&rows)?;
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[CaseRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate_rows(rows: &[CaseRecord]) -> Result<(), DataError> {
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    for pair in rows.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.date <= prev.date {
            return Err(DataError::Unordered { date: cur.date });
        }
        if cur.date != prev.date + Duration::days(1) {
            return Err(DataError::Gap {
                after: prev.date,
                next: cur.date,
            });
        }
        let cumulative = [
            ("total_cases", prev.total_cases, cur.total_cases),
            ("total_deaths", prev.total_deaths, cur.total_deaths),
            ("total_tested", prev.total_tested, cur.total_tested),
        ];
        for (column, a, b) in cumulative {
            if b < a {
                return Err(DataError::Monotonicity {
                    column: column.into(),
                    date: cur.date,
                });
            }
        }
        if cur.new_cases != cur.total_cases - prev.total_cases {
            return Err(DataError::Inconsistent {
                column: "new_cases".into(),
                date: cur.date,
            });
        }
        if cur.new_deaths != cur.total_deaths - prev.total_deaths {
            return Err(DataError::Inconsistent {
                column: "new_deaths".into(),
                date: cur.date,
            });
        }
    }
    Ok(())
}

fn parse_count(field: &str, line: u64, column: &str) -> Result<u64, DataError> {
    let value: i64 = field.trim().parse().map_err(|e: std::num::ParseIntError| {
        DataError::Parse {
            line,
            column: column.into(),
            message: e.to_string(),
        }
    })?;
    u64::try_from(value).map_err(|_| DataError::NegativeCount {
        line,
        column: column.into(),
    })
}

fn parse_date(field: &str, line: u64) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d").map_err(|e| DataError::Parse {
        line,
        column: "date".into(),
        message: e.to_string(),
    })
}

fn header_index(
    headers: &csv::StringRecord,
    wanted: &[&str],
) -> Result<HashMap<String, usize>, DataError> {
    let lookup: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect();
    wanted
        .iter()
        .map(|&name| {
            lookup
                .get(name)
                .map(|&i| (name.to_string(), i))
                .ok_or_else(|| DataError::Schema(name.into()))
        })
        .collect()
}

/// Parses a raw case CSV. Columns may appear in any order; extra columns are
/// ignored. Dates are ISO-8601 (`YYYY-MM-DD`).
pub fn parse_raw(csv_bytes: &[u8]) -> Result<RawCaseTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_bytes);
    let idx = header_index(reader.headers()?, &RAW_COLUMNS)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &str| record.get(idx[name]).unwrap_or("");
        rows.push(CaseRecord {
            date: parse_date(field("date"), line)?,
            total_cases: parse_count(field("total_cases"), line, "total_cases")?,
            new_cases: parse_count(field("new_cases"), line, "new_cases")?,
            total_deaths: parse_count(field("total_deaths"), line, "total_deaths")?,
            new_deaths: parse_count(field("new_deaths"), line, "new_deaths")?,
            total_tested: parse_count(field("total_tested"), line, "total_tested")?,
        });
    }
    RawCaseTable::new(rows)
}

/// Aligned daily susceptible / infected / recovered observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTriple {
    dates: Vec<NaiveDate>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
}

impl TimeSeriesTriple {
    /// Builds a triple on consecutive days starting at `start`.
    pub fn from_start(
        start: NaiveDate,
        susceptible: Vec<f64>,
        infected: Vec<f64>,
        recovered: Vec<f64>,
    ) -> Result<Self, DataError> {
        let dates = (0..susceptible.len())
            .map(|d| start + Duration::days(d as i64))
            .collect();
        Self::new(dates, susceptible, infected, recovered)
    }

    /// Values must be finite; dates must be consecutive days. Negative values
    /// are accepted here (synthetic data with added noise can dip below zero);
    /// use [`TimeSeriesTriple::is_nonnegative`] to check.
    pub fn new(
        dates: Vec<NaiveDate>,
        susceptible: Vec<f64>,
        infected: Vec<f64>,
        recovered: Vec<f64>,
    ) -> Result<Self, DataError> {
        let n = dates.len();
        if susceptible.len() != n || infected.len() != n || recovered.len() != n {
            return Err(DataError::LengthMismatch);
        }
        for (name, v) in [
            ("susceptible", &susceptible),
            ("infected", &infected),
            ("recovered", &recovered),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(DataError::NonFinite(name.into()));
            }
        }
        for pair in dates.windows(2) {
            if pair[1] <= pair[0] {
                return Err(DataError::Unordered { date: pair[1] });
            }
            if pair[1] != pair[0] + Duration::days(1) {
                return Err(DataError::Gap {
                    after: pair[0],
                    next: pair[1],
                });
            }
        }
        Ok(Self {
            dates,
            susceptible,
            infected,
            recovered,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Days since the first row: `0, 1, ..., n-1`.
    pub fn days(&self) -> Vec<f64> {
        (0..self.len()).map(|d| d as f64).collect()
    }

    /// Compartment series by index (`0 = S, 1 = I, 2 = R`).
    pub fn compartment(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.susceptible,
            1 => &self.infected,
            2 => &self.recovered,
            _ => panic!("compartment index {k} out of range"),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        [&self.susceptible, &self.infected, &self.recovered]
            .iter()
            .all(|v| v.iter().all(|&x| x >= 0.0))
    }

    pub fn first_state(&self) -> Option<[f64; 3]> {
        (!self.is_empty()).then(|| [self.susceptible[0], self.infected[0], self.recovered[0]])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRIPLE_COLUMNS)?;
        for k in 0..self.len() {
            w.write_record([
                self.dates[k].format("%Y-%m-%d").to_string(),
                format_value(self.susceptible[k]),
                format_value(self.infected[k]),
                format_value(self.recovered[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const TRIPLE_COLUMNS: [&str; 4] = ["date", "susceptible", "infected", "recovered"];

/// Shortest representation that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Parses a `date,susceptible,infected,recovered` CSV.
pub fn parse_triple(csv_bytes: &[u8]) -> Result<TimeSeriesTriple, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_bytes);
    let idx = header_index(reader.headers()?, &TRIPLE_COLUMNS)?;
    let (mut dates, mut s, mut i, mut r) = (vec![], vec![], vec![], vec![]);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |name: &str| -> Result<f64, DataError> {
            record
                .get(idx[name])
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| DataError::Parse {
                    line,
                    column: name.into(),
                    message: e.to_string(),
                })
        };
        dates.push(parse_date(record.get(idx["date"]).unwrap_or(""), line)?);
        s.push(num("susceptible")?);
        i.push(num("infected")?);
        r.push(num("recovered")?);
    }
    if dates.is_empty() {
        return Err(DataError::Empty);
    }
    TimeSeriesTriple::new(dates, s, i, r)
}

/// Writes the triple as CSV to `path`.
pub fn export_triple(series: &TimeSeriesTriple, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    series.write_csv(std::io::BufWriter::new(file))
}

/// How the susceptible cutoff treats the boundary day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffBoundary {
    /// A case reported on day `d` counts as susceptible on day `t` iff
    /// `d > t + incubation + turnaround`.
    Strict,
    /// ... iff `d >= t + incubation + turnaround`.
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveConfig {
    pub incubation_days: usize,
    pub test_turnaround_days: usize,
    pub infectious_days: usize,
    pub recovery_fraction: f64,
    pub cutoff: CutoffBoundary,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        Self {
            incubation_days: 5,
            test_turnaround_days: 1,
            infectious_days: 14,
            recovery_fraction: 0.97,
            cutoff: CutoffBoundary::Strict,
        }
    }
}

impl DeriveConfig {
    fn lead(&self) -> usize {
        self.incubation_days + self.test_turnaround_days
    }
}

/// Derives S, I and R from a raw case table.
///
/// With `new(d)` the daily new cases and `L = incubation + turnaround`:
///
/// * `I(t) = Σ new(d)` over the `infectious_days` days ending at `t`
/// * `S(t) = Σ_{d > t + L} new(d) + (total_tested(t) - total_cases(t))`
/// * `R(t) = recovery_fraction · Σ_{d <= t - infectious_days} new(d)`
///
/// The negative-test term is clamped at zero when a table reports fewer tests
/// than cases.
pub fn derive_sir(raw: &RawCaseTable, config: &DeriveConfig) -> Result<TimeSeriesTriple, DataError> {
    let n = raw.len();
    if n <= config.lead() {
        return Err(DataError::Window {
            len: n,
            required: config.lead(),
        });
    }
    let rows = raw.rows();
    // prefix[k] = Σ_{d < k} new(d)
    let mut prefix = vec![0u64; n + 1];
    for (k, row) in rows.iter().enumerate() {
        prefix[k + 1] = prefix[k] + row.new_cases;
    }
    let total = prefix[n];
    let window = config.infectious_days;

    let mut s = Vec::with_capacity(n);
    let mut i = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for (t, row) in rows.iter().enumerate() {
        let lo = (t + 1).saturating_sub(window);
        i.push((prefix[t + 1] - prefix[lo]) as f64);

        let first_future = match config.cutoff {
            CutoffBoundary::Strict => t + config.lead() + 1,
            CutoffBoundary::Inclusive => t + config.lead(),
        }
        .min(n);
        let future = total - prefix[first_future];
        let negatives = row.total_tested.saturating_sub(row.total_cases);
        s.push((future + negatives) as f64);

        let recovered = if t >= window { prefix[t - window + 1] } else { 0 };
        r.push(config.recovery_fraction * recovered as f64);
    }
    let dates = rows.iter().map(|row| row.date).collect();
    TimeSeriesTriple::new(dates, s, i, r)
}

/// Summary statistics of one series. `standard_deviation` uses the
/// population (divide-by-n) convention; the median of an even-length series
/// is the mean of its two middle values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub standard_deviation: f64,
    pub range: f64,
}

pub fn describe_series(values: &[f64]) -> Result<SeriesStats, DataError> {
    if values.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SeriesStats {
        min,
        max,
        mean,
        median,
        standard_deviation: var.sqrt(),
        range: max - min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub susceptible: SeriesStats,
    pub infected: SeriesStats,
    pub recovered: SeriesStats,
    pub std_convention: String,
}

pub fn describe(series: &TimeSeriesTriple) -> Result<DescriptiveStats, DataError> {
    Ok(DescriptiveStats {
        susceptible: describe_series(&series.susceptible)?,
        infected: describe_series(&series.infected)?,
        recovered: describe_series(&series.recovered)?,
        std_convention: "population".into(),
    })
}

impl DescriptiveStats {
    /// Renders the statistics with one row per statistic and one column per
    /// compartment.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["statistic", "susceptible", "infected", "recovered"])?;
        let cols = [&self.susceptible, &self.infected, &self.recovered];
        let rows: [(&str, fn(&SeriesStats) -> f64); 6] = [
            ("minimum", |s| s.min),
            ("maximum", |s| s.max),
            ("mean", |s| s.mean),
            ("median", |s| s.median),
            ("standard_deviation", |s| s.standard_deviation),
            ("range", |s| s.range),
        ];
        for (name, get) in rows {
            let mut rec = vec![name.to_string()];
            rec.extend(cols.iter().map(|s| format_value(get(s))));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(k: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, 14).unwrap() + Duration::days(k)
    }

    /// Builds a consistent table from daily new cases and daily negatives.
    fn table(new: &[u64], negatives: &[u64]) -> RawCaseTable {
        let mut cases = 0;
        let mut tested = 0;
        let rows = new
            .iter()
            .zip(negatives)
            .enumerate()
            .map(|(k, (&n, &neg))| {
                cases += n;
                tested += n + neg;
                CaseRecord {
                    date: day(k as i64),
                    total_cases: cases,
                    new_cases: n,
                    total_deaths: 0,
                    new_deaths: 0,
                    total_tested: tested,
                }
            })
            .collect();
        RawCaseTable::new(rows).unwrap()
    }

    fn to_csv(t: &RawCaseTable) -> Vec<u8> {
        let mut buf = vec![];
        t.write_csv(&mut buf).unwrap();
        buf
    }

    #[test]
    fn parses_212_days_any_column_order() {
        let t = table(&vec![3; 212], &vec![1; 212]);
        let text = String::from_utf8(to_csv(&t)).unwrap();
        assert!(text.starts_with("date,total_cases"));
        assert_eq!(parse_raw(text.as_bytes()).unwrap(), t);

        let mut lines = text.lines();
        lines.next();
        let mut shuffled =
            String::from("total_tested,new_deaths,date,new_cases,total_deaths,total_cases\n");
        for line in lines {
            let f: Vec<_> = line.split(',').collect();
            shuffled.push_str(&format!("{},{},{},{},{},{}\n", f[5], f[4], f[0], f[2], f[3], f[1]));
        }
        let parsed = parse_raw(shuffled.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 212);
        assert_eq!(parsed, t);
    }

    #[test]
    fn header_only_is_rejected() {
        let err = parse_raw(b"date,total_cases,new_cases,total_deaths,new_deaths,total_tested\n")
            .unwrap_err();
        assert!(matches!(err, DataError::Empty));
        let err = parse_raw(b"date,total_cases\n2020-03-14,1\n").unwrap_err();
        assert!(matches!(err, DataError::Schema(ref c) if c == "new_cases"));
    }

    #[test]
    fn decreasing_total_is_rejected() {
        let csv = "date,total_cases,new_cases,total_deaths,new_deaths,total_tested\n\
                   2020-03-14,5,5,0,0,10\n\
                   2020-03-15,4,0,0,0,10\n";
        assert!(matches!(
            parse_raw(csv.as_bytes()).unwrap_err(),
            DataError::Monotonicity { ref column, .. } if column == "total_cases"
        ));
    }

    #[test]
    fn gaps_and_disorder_are_rejected() {
        let csv = "date,total_cases,new_cases,total_deaths,new_deaths,total_tested\n\
                   2020-03-14,5,5,0,0,10\n\
                   2020-03-16,6,1,0,0,12\n";
        let err = parse_raw(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Gap { .. }));
        assert_eq!(err.category(), "GapError");
        let csv = "date,total_cases,new_cases,total_deaths,new_deaths,total_tested\n\
                   2020-03-14,5,5,0,0,10\n\
                   2020-03-14,6,1,0,0,12\n";
        assert!(matches!(parse_raw(csv.as_bytes()).unwrap_err(), DataError::Unordered { .. }));
    }

    #[test]
    fn bad_fields_are_rejected() {
        let head = "date,total_cases,new_cases,total_deaths,new_deaths,total_tested\n";
        let neg = format!("{head}2020-03-14,5,-1,0,0,10\n");
        assert!(matches!(parse_raw(neg.as_bytes()).unwrap_err(), DataError::NegativeCount { .. }));
        let date = format!("{head}14/03/2020,5,5,0,0,10\n");
        assert!(matches!(parse_raw(date.as_bytes()).unwrap_err(), DataError::Parse { .. }));
        let inc = format!("{head}2020-03-14,5,5,0,0,10\n2020-03-15,7,1,0,0,12\n");
        assert!(matches!(parse_raw(inc.as_bytes()).unwrap_err(), DataError::Inconsistent { .. }));
    }

    #[test]
    fn no_cases_gives_tested_as_susceptible() {
        let negatives: Vec<u64> = (0..30).map(|k| k % 4).collect();
        let t = table(&[0; 30], &negatives);
        let d = derive_sir(&t, &DeriveConfig::default()).unwrap();
        assert!(d.infected.iter().all(|&v| v == 0.0));
        assert!(d.recovered.iter().all(|&v| v == 0.0));
        for (k, row) in t.rows().iter().enumerate() {
            assert_eq!(d.susceptible[k], row.total_tested as f64);
        }
    }

    #[test]
    fn unit_impulse_hand_trace() {
        let mut new = vec![0u64; 40];
        new[10] = 1;
        let t = table(&new, &[0; 40]);
        let d = derive_sir(&t, &DeriveConfig::default()).unwrap();
        for k in 0..40 {
            let i = if (10..=23).contains(&k) { 1.0 } else { 0.0 };
            let r = if k >= 24 { 0.97 } else { 0.0 };
            let s = if k <= 3 { 1.0 } else { 0.0 };
            assert_eq!(d.infected[k], i, "I day {k}");
            assert_eq!(d.recovered[k], r, "R day {k}");
            assert_eq!(d.susceptible[k], s, "S day {k}");
        }
        let inclusive = DeriveConfig {
            cutoff: CutoffBoundary::Inclusive,
            ..Default::default()
        };
        let d = derive_sir(&t, &inclusive).unwrap();
        assert_eq!(d.susceptible[4], 1.0);
        assert_eq!(d.susceptible[5], 0.0);
    }

    #[test]
    fn short_tables_hit_window_error() {
        let t = table(&[1; 6], &[0; 6]);
        assert!(matches!(
            derive_sir(&t, &DeriveConfig::default()),
            Err(DataError::Window { len: 6, required: 6 })
        ));
        assert!(derive_sir(&table(&[1; 7], &[0; 7]), &DeriveConfig::default()).is_ok());
    }

    #[test]
    fn describe_small_cases() {
        let s = describe_series(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median, s.range), (1.0, 3.0, 2.0, 2.0, 2.0));
        let c = describe_series(&[4.5; 7]).unwrap();
        assert_eq!((c.standard_deviation, c.range), (0.0, 0.0));
        assert_eq!(describe_series(&[1.0, 2.0, 3.0, 10.0]).unwrap().median, 2.5);
        assert!(matches!(describe_series(&[]), Err(DataError::EmptySeries)));
    }

    #[test]
    fn triple_round_trip_and_line_count() {
        let n = 212;
        let s: Vec<f64> = (0..n).map(|k| 12615.0 - 57.3 * k as f64).collect();
        let i: Vec<f64> = (0..n).map(|k| (k as f64 * 0.1).sin().abs() * 175.0).collect();
        let r: Vec<f64> = (0..n).map(|k| 0.97 * k as f64 * 13.1).collect();
        let tri = TimeSeriesTriple::from_start(day(0), s, i, r).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("triple.csv");
        export_triple(&tri, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 213);
        assert_eq!(parse_triple(text.as_bytes()).unwrap(), tri);
        assert!(matches!(export_triple(&tri, Path::new("")), Err(DataError::Io(_))));
    }

    fn brute_force(new: &[u64], neg: &[u64], cfg: &DeriveConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = new.len();
        let (mut s, mut i, mut r) = (vec![], vec![], vec![]);
        let lead = (cfg.incubation_days + cfg.test_turnaround_days) as i64;
        for t in 0..n as i64 {
            let mut inf = 0u64;
            let mut fut = 0u64;
            let mut rec = 0u64;
            for d in 0..n as i64 {
                let v = new[d as usize];
                if d <= t && d > t - cfg.infectious_days as i64 {
                    inf += v;
                }
                if d > t + lead {
                    fut += v;
                }
                if d <= t - cfg.infectious_days as i64 {
                    rec += v;
                }
            }
            let negs: u64 = neg[..=t as usize].iter().sum();
            s.push((fut + negs) as f64);
            i.push(inf as f64);
            r.push(cfg.recovery_fraction * rec as f64);
        }
        (s, i, r)
    }

    proptest! {
        #[test]
        fn derive_matches_day_loop(
            data in (7usize..=60).prop_flat_map(|n| (
                proptest::collection::vec(0u64..200, n),
                proptest::collection::vec(0u64..50, n),
            ))
        ) {
            let (new, neg) = data;
            let cfg = DeriveConfig::default();
            let d = derive_sir(&table(&new, &neg), &cfg).unwrap();
            let (s, i, r) = brute_force(&new, &neg, &cfg);
            prop_assert_eq!(&d.infected, &i);
            prop_assert_eq!(&d.susceptible, &s);
            prop_assert_eq!(&d.recovered, &r);
        }

        #[test]
        fn describe_matches_naive(values in proptest::collection::vec(-1e4..1e4f64, 1..80)) {
            let st = describe_series(&values).unwrap();
            let mut v = values.clone();
            // insertion sort as an independent ordering
            for a in 1..v.len() {
                let mut b = a;
                while b > 0 && v[b - 1] > v[b] { v.swap(b - 1, b); b -= 1; }
            }
            let n = v.len();
            let med = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
            let mut mean = 0.0;
            for x in &values { mean += x; }
            mean /= n as f64;
            let mut ss = 0.0;
            for x in &values { ss += (x - mean) * (x - mean); }
            let sd = (ss / n as f64).sqrt();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
            prop_assert_eq!(st.min, v[0]);
            prop_assert_eq!(st.max, v[n - 1]);
            prop_assert!(close(st.median, med));
            prop_assert!(close(st.mean, mean));
            prop_assert!(close(st.standard_deviation, sd));
            prop_assert!(st.min <= st.median && st.median <= st.max);
        }

        #[test]
        fn triple_csv_round_trip(values in proptest::collection::vec((0.0..1e6f64, 0.0..1e3f64, 0.0..1e6f64), 1..50)) {
            let s = values.iter().map(|v| v.0).collect();
            let i = values.iter().map(|v| v.1).collect();
            let r = values.iter().map(|v| v.2).collect();
            let tri = TimeSeriesTriple::from_start(day(0), s, i, r).unwrap();
            let mut buf = vec![];
            tri.write_csv(&mut buf).unwrap();
            prop_assert_eq!(parse_triple(&buf).unwrap(), tri);
        }
    }
}
