//! Regenerates the bundled synthetic sample in `sample/`.
//!
//! Daily new cases are Poisson draws around a slowly rising baseline plus a
//! sinusoid with the second-wave frequency `b2` of the reference estimates,
//! so the derived infected series shows two waves over 212 days starting on
//! 2020-03-14. The raw table is passed through the default derivation to
//! produce the S/I/R series.
//!
//! ```text
//! cargo run -p episir-cli --example generate_sample [-- <out_dir>]
//! ```

use std::fs::File;
use std::path::PathBuf;

use chrono::{Days, NaiveDate};
use episir::models::reference;
use episir::{derive_sir, CaseRecord, DeriveConfig, RawCaseTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

const SEED: u64 = 20200314;
const DAYS: u64 = 212;

fn daily_mean(t: f64) -> f64 {
    let wave = 4.0 + 0.02 * t + 3.5 * (reference::GLOBAL.b2 * t + 1.027).sin();
    (wave * (1.0 - (-t / 3.0).exp())).max(0.05)
}

fn draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("sample"));
    std::fs::create_dir_all(&out_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = NaiveDate::from_ymd_opt(2020, 3, 14).expect("valid date");
    let (mut cases, mut deaths, mut tested) = (0u64, 0u64, 0u64);
    let mut rows = Vec::with_capacity(DAYS as usize);
    for day in 0..DAYS {
        let mu = daily_mean(day as f64);
        let mut new_cases = draw(&mut rng, mu);
        if day == 0 {
            // The series starts on the first reported case.
            new_cases = new_cases.max(1);
        }
        let new_deaths = draw(&mut rng, 0.015 * mu);
        let negatives = draw(&mut rng, 0.5);
        cases += new_cases;
        deaths += new_deaths;
        tested += new_cases + negatives;
        rows.push(CaseRecord {
            date: start + Days::new(day),
            total_cases: cases,
            new_cases,
            total_deaths: deaths,
            new_deaths,
            total_tested: tested,
        });
    }
    let raw = RawCaseTable::new(rows)?;
    raw.write_csv(File::create(out_dir.join("raw_cases.csv"))?)?;
    let series = derive_sir(&raw, &DeriveConfig::default())?;
    series.write_csv(File::create(out_dir.join("sir_series.csv"))?)?;
    println!("wrote {} days to {}", series.len(), out_dir.display());
    Ok(())
}
