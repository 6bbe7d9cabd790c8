//! Goodness-of-fit metrics and the standard-vs-extended comparison table.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{format_value, TimeSeriesTriple};
use crate::models::ModelKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooShort,
    #[error("observed data are constant (zero total sum of squares)")]
    DegenerateData,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fits were made against different data ({0})")]
    MismatchedData(String),
}

fn check_lengths(data: &[f64], model: &[f64]) -> Result<(), MetricError> {
    if data.len() != model.len() {
        return Err(MetricError::LengthMismatch(data.len(), model.len()));
    }
    Ok(())
}

/// Sum of squared differences.
pub fn sse(data: &[f64], model: &[f64]) -> Result<f64, MetricError> {
    check_lengths(data, model)?;
    Ok(data.iter().zip(model).map(|(d, m)| (d - m).powi(2)).sum())
}

/// Total sum of squares about the data mean.
pub fn sst(data: &[f64]) -> f64 {
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    data.iter().map(|d| (d - mean).powi(2)).sum()
}

/// `1 - SSE/SST`. Negative when the model does worse than the data mean.
pub fn r_squared(data: &[f64], model: &[f64]) -> Result<f64, MetricError> {
    check_lengths(data, model)?;
    if data.len() < 2 {
        return Err(MetricError::TooShort);
    }
    let total = sst(data);
    if total == 0.0 {
        return Err(MetricError::DegenerateData);
    }
    Ok(1.0 - sse(data, model)? / total)
}

/// Gaussian-likelihood AIC in SSE form: `n·ln(SSE/n) + 2k`.
pub fn aic(sse: f64, n_obs: usize, k_params: usize) -> Result<f64, MetricError> {
    if !(sse > 0.0 && sse.is_finite()) {
        return Err(MetricError::Domain(format!("AIC needs 0 < SSE < inf, got {sse}")));
    }
    if n_obs == 0 {
        return Err(MetricError::Domain("AIC needs n_obs > 0".into()));
    }
    let n = n_obs as f64;
    Ok(n * (sse / n).ln() + 2.0 * k_params as f64)
}

/// Small-sample corrected AIC: `AIC + 2k(k+1)/(n-k-1)`.
pub fn aicc(sse: f64, n_obs: usize, k_params: usize) -> Result<f64, MetricError> {
    if n_obs <= k_params + 1 {
        return Err(MetricError::Domain(format!(
            "AICc needs n_obs > k_params + 1 (n = {n_obs}, k = {k_params})"
        )));
    }
    let k = k_params as f64;
    Ok(aic(sse, n_obs, k_params)? + 2.0 * k * (k + 1.0) / (n_obs as f64 - k - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentFit {
    pub sse: f64,
    pub r_squared: f64,
}

/// Fit quality of one model against one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub model: ModelKind,
    pub susceptible: CompartmentFit,
    pub infected: CompartmentFit,
    pub recovered: CompartmentFit,
    pub sse_total: f64,
    /// `None` when the pooled SSE is exactly zero.
    pub aic: Option<f64>,
    pub aicc: Option<f64>,
    pub n_obs: usize,
    pub k_params: usize,
    pub convention: String,
    pub data_fingerprint: String,
}

pub const AIC_CONVENTION: &str =
    "AIC = n*ln(SSE/n) + 2k; AICc = AIC + 2k(k+1)/(n-k-1); n = 3 x days (S, I, R pooled), unweighted SSE";

impl FitnessReport {
    pub fn compartment(&self, k: usize) -> &CompartmentFit {
        match k {
            0 => &self.susceptible,
            1 => &self.infected,
            2 => &self.recovered,
            _ => panic!("compartment index {k} out of range"),
        }
    }
}

/// Order-sensitive fingerprint of a data set (FNV-1a over the value bits),
/// used to detect comparisons across different data.
pub fn data_fingerprint(data: &TimeSeriesTriple) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for date in data.dates() {
        feed(date.to_string().as_bytes());
    }
    for k in 0..3 {
        for v in data.compartment(k) {
            feed(&v.to_bits().to_le_bytes());
        }
    }
    format!("{hash:016x}")
}

/// Scores `model` (one series per compartment) against `data`.
pub fn fitness(
    kind: ModelKind,
    data: &TimeSeriesTriple,
    model: [&[f64]; 3],
) -> Result<FitnessReport, MetricError> {
    let mut fits = [CompartmentFit {
        sse: 0.0,
        r_squared: 0.0,
    }; 3];
    for (k, fit) in fits.iter_mut().enumerate() {
        let observed = data.compartment(k);
        fit.sse = sse(observed, model[k])?;
        fit.r_squared = r_squared(observed, model[k])?;
    }
    let sse_total: f64 = fits.iter().map(|f| f.sse).sum();
    let n_obs = 3 * data.len();
    let k_params = kind.parameter_count();
    Ok(FitnessReport {
        model: kind,
        susceptible: fits[0],
        infected: fits[1],
        recovered: fits[2],
        sse_total,
        aic: aic(sse_total, n_obs, k_params).ok(),
        aicc: aicc(sse_total, n_obs, k_params).ok(),
        n_obs,
        k_params,
        convention: AIC_CONVENTION.into(),
        data_fingerprint: data_fingerprint(data),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Left,
    Right,
    Tie,
    /// AICc unavailable for at least one model.
    Undetermined,
}

/// Side-by-side fitness of two models; the one with lower AICc is preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub left_label: String,
    pub right_label: String,
    pub left: FitnessReport,
    pub right: FitnessReport,
    pub preferred: Preference,
}

pub fn compare(
    left_label: &str,
    left: &FitnessReport,
    right_label: &str,
    right: &FitnessReport,
) -> Result<Comparison, MetricError> {
    if left.n_obs != right.n_obs {
        return Err(MetricError::MismatchedData(format!(
            "n_obs {} vs {}",
            left.n_obs, right.n_obs
        )));
    }
    if left.data_fingerprint != right.data_fingerprint {
        return Err(MetricError::MismatchedData(format!(
            "fingerprint {} vs {}",
            left.data_fingerprint, right.data_fingerprint
        )));
    }
    let preferred = match (left.aicc, right.aicc) {
        (Some(a), Some(b)) if a < b => Preference::Left,
        (Some(a), Some(b)) if b < a => Preference::Right,
        (Some(_), Some(_)) => Preference::Tie,
        _ => Preference::Undetermined,
    };
    Ok(Comparison {
        left_label: left_label.into(),
        right_label: right_label.into(),
        left: left.clone(),
        right: right.clone(),
        preferred,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_else(|| "NA".into())
}

impl Comparison {
    pub fn preferred_label(&self) -> &str {
        match self.preferred {
            Preference::Left => &self.left_label,
            Preference::Right => &self.right_label,
            Preference::Tie => "tie",
            Preference::Undetermined => "undetermined",
        }
    }

    fn rows(&self) -> Vec<(String, String, String)> {
        let (a, b) = (&self.left, &self.right);
        let mut rows = vec![
            ("Corrected AIC".to_string(), opt(a.aicc), opt(b.aicc)),
            ("AIC".to_string(), opt(a.aic), opt(b.aic)),
        ];
        for (k, name) in ["S", "I", "R"].iter().enumerate() {
            let (fa, fb) = (a.compartment(k), b.compartment(k));
            rows.push((format!("SSR for {name}"), format_value(fa.sse), format_value(fb.sse)));
            rows.push((
                format!("R^2 for {name}"),
                format_value(fa.r_squared),
                format_value(fb.r_squared),
            ));
        }
        rows.push(("n_obs".into(), a.n_obs.to_string(), b.n_obs.to_string()));
        rows.push(("k_params".into(), a.k_params.to_string(), b.k_params.to_string()));
        rows
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fitness", &self.left_label, &self.right_label])?;
        for (name, a, b) in self.rows() {
            w.write_record([name, a, b])?;
        }
        w.write_record(["preferred", self.preferred_label(), ""])?;
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = |f: fn(&(String, String, String)) -> &String, head: &str| {
            rows.iter().map(|r| f(r).len()).max().unwrap_or(0).max(head.len())
        };
        let w0 = width(|r| &r.0, "Fitness");
        let w1 = width(|r| &r.1, &self.left_label);
        let w2 = width(|r| &r.2, &self.right_label);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}",
            "Fitness", self.left_label, self.right_label
        );
        let _ = writeln!(out, "{}", "-".repeat(w0 + w1 + w2 + 4));
        for (name, a, b) in &rows {
            let _ = writeln!(out, "{name:<w0$}  {a:>w1$}  {b:>w2$}");
        }
        let _ = writeln!(out, "preferred (lower AICc): {}", self.preferred_label());
        let _ = writeln!(out, "convention: {}", self.left.convention);
        out
    }
}
