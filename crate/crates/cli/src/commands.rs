use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use episir::data::format_value;
use episir::models::reference;
use episir::{
    compare, day_grid, derive_sir, describe, model_series, parse_raw, parse_triple, simulate,
    Comparison, ExtendedParams, FitConfig, FitResult, InitialState, ModelKind,
    SirParams, TimeSeriesTriple,
};
use serde::{Deserialize, Serialize};

use crate::config::{ParamsFile, RunConfig};
use crate::error::CliError;

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub verbose: bool,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[episir] {}", msg.as_ref());
        }
    }

    fn output(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

#[derive(Debug, Default)]
pub struct PreprocessArgs {
    pub raw: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub incubation_days: Option<usize>,
    pub turnaround_days: Option<usize>,
    pub infectious_days: Option<usize>,
    pub recovery_fraction: Option<f64>,
    pub inclusive_cutoff: bool,
}

pub fn preprocess(ctx: &Context, args: PreprocessArgs) -> Result<(), CliError> {
    let raw_path = args
        .raw
        .or_else(|| ctx.config.data.raw.clone())
        .ok_or_else(|| CliError::Usage("no raw case table given (argument or data.raw)".into()))?;
    let mut derive = ctx.config.derive;
    if let Some(v) = args.incubation_days {
        derive.incubation_days = v;
    }
    if let Some(v) = args.turnaround_days {
        derive.test_turnaround_days = v;
    }
    if let Some(v) = args.infectious_days {
        derive.infectious_days = v;
    }
    if let Some(v) = args.recovery_fraction {
        derive.recovery_fraction = v;
    }
    if args.inclusive_cutoff {
        derive.cutoff = episir::data::CutoffBoundary::Inclusive;
    }
    let raw = parse_raw(&read(&raw_path)?)?;
    let series = derive_sir(&raw, &derive)?;
    let stats = describe(&series)?;
    ctx.log(format!("{} days from {}", series.len(), raw_path.display()));

    let out = match args.out {
        Some(p) => p,
        None => ctx.output("sir_series.csv")?,
    };
    let stats_path = match args.stats {
        Some(p) => p,
        None => ctx.output("descriptive_stats.csv")?,
    };
    series.write_csv(create(&out)?)?;
    stats.write_csv(create(&stats_path)?)?;
    ctx.log(format!("wrote {} and {}", out.display(), stats_path.display()));
    Ok(())
}

/// JSON report written by `fit` for each model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub seed: u64,
    pub series: String,
    pub fit_config: FitConfig,
    pub result: FitResult,
}

fn write_trajectory(
    path: &Path,
    data: &TimeSeriesTriple,
    model: &[Vec<f64>; 3],
    with_data: bool,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: &[&str] = if with_data {
        &[
            "date",
            "t",
            "susceptible_data",
            "susceptible_model",
            "infected_data",
            "infected_model",
            "recovered_data",
            "recovered_model",
        ]
    } else {
        &["date", "t", "susceptible", "infected", "recovered"]
    };
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for (day, date) in data.dates().iter().enumerate() {
        let mut row = vec![date.to_string(), day.to_string()];
        for k in 0..3 {
            if with_data {
                row.push(format_value(data.compartment(k)[day]));
            }
            row.push(format_value(model[k][day]));
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn comparison_label(result: &FitResult, fallback: &str, other: &FitResult) -> String {
    if result.model == other.model {
        fallback.to_string()
    } else {
        result.model.to_string()
    }
}

fn write_comparison(ctx: &Context, cmp: &Comparison, out: Option<PathBuf>) -> Result<(), CliError> {
    let csv_path = match out {
        Some(p) => p,
        None => ctx.output("comparison.csv")?,
    };
    cmp.write_csv(create(&csv_path)?).map_err(|e| csv_error(&csv_path, e))?;
    write_text(&csv_path.with_extension("txt"), &cmp.to_text())?;
    Ok(())
}

pub fn fit(ctx: &Context, series: Option<PathBuf>) -> Result<(), CliError> {
    let path = series
        .or_else(|| ctx.config.data.series.clone())
        .ok_or_else(|| CliError::Usage("no S/I/R series given (argument or data.series)".into()))?;
    let data = parse_triple(&read(&path)?)?;
    let mut fit_config = ctx.config.fit;
    fit_config.seed = ctx.config.seed;
    ctx.log(format!("fitting {} days from {}", data.len(), path.display()));
    let fits = episir::two_step_fit(&data, &fit_config)?;

    for fit in [&fits.standard, &fits.extended] {
        let name = fit.model.to_string();
        ctx.log(format!(
            "{name}: sse {:.6e}, converged {}, {} evaluations",
            fit.sse_total, fit.converged, fit.evaluations
        ));
        let report = FitReport {
            tool: concat!("episir ", env!("CARGO_PKG_VERSION")).into(),
            seed: ctx.config.seed,
            series: path.display().to_string(),
            fit_config,
            result: fit.clone(),
        };
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_text(&ctx.output(&format!("fit_{name}.json"))?, &json)?;
        write_text(
            &ctx.output(&format!("params_{name}.toml"))?,
            &ParamsFile::new(fit.model, &fit.params, fit.y0).to_toml(),
        )?;
        let model = model_series(&fit.params, &fit.y0, data.len(), &ctx.config.integrator)?;
        write_trajectory(&ctx.output(&format!("trajectory_{name}.csv"))?, &data, &model, false)?;
        let figure = match fit.model {
            ModelKind::Extended => "fig3_extended_fit.csv",
            ModelKind::Standard => "fig4_standard_fit.csv",
        };
        write_trajectory(&ctx.output(figure)?, &data, &model, true)?;
    }

    let (std_fit, ext_fit) = (&fits.standard, &fits.extended);
    if let (Some(a), Some(b)) = (&std_fit.fitness, &ext_fit.fitness) {
        let cmp = compare("standard", a, "extended", b)?;
        write_comparison(ctx, &cmp, None)?;
        ctx.log(format!("preferred: {}", cmp.preferred_label()));
    } else {
        ctx.log("comparison skipped: a data compartment is constant, R² undefined");
    }

    let unconverged: Vec<String> = [std_fit, ext_fit]
        .iter()
        .filter(|f| !f.converged)
        .map(|f| f.model.to_string())
        .collect();
    if !unconverged.is_empty() {
        return Err(CliError::NoConvergence(format!(
            "{} fit stopped at max_evals without meeting obj_tol; reports written",
            unconverged.join(" and ")
        )));
    }
    Ok(())
}

#[derive(Debug, Default)]
pub struct SimulateArgs {
    pub model: Option<ModelKind>,
    pub params: Option<PathBuf>,
    pub days: Option<usize>,
    pub s0: Option<f64>,
    pub i0: Option<f64>,
    pub r0: Option<f64>,
    pub out: Option<PathBuf>,
    pub fig1: bool,
}

/// `(beta, gamma)` for the three standard-model panels, with y0 = (990, 10, 0).
pub const FIG1_PANELS: [(&str, f64, f64); 3] = [
    ("fig1a_standard_sir.csv", 0.0003, 0.1),
    ("fig1b_standard_sir.csv", 0.0006, 0.1),
    ("fig1c_standard_sir.csv", 0.001, 0.25),
];

fn write_simulation(
    path: &Path,
    kind: ModelKind,
    params: &ExtendedParams,
    y0: &InitialState,
    days: usize,
    ctx: &Context,
) -> Result<(), CliError> {
    let rows: Vec<[f64; 4]> = if days == 0 {
        vec![[0.0, y0.s0, y0.i0, y0.r0]]
    } else {
        let sim = simulate(kind, params, y0, &day_grid(days), &ctx.config.integrator)?;
        if !sim.nonnegative {
            ctx.log("warning: a compartment goes negative");
        }
        sim.trajectory
            .times()
            .iter()
            .zip(sim.trajectory.states())
            .map(|(&t, s)| [t, s[0], s[1], s[2]])
            .collect()
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "susceptible", "infected", "recovered"])
        .map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.map(format_value)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn simulate_cmd(ctx: &Context, args: SimulateArgs) -> Result<(), CliError> {
    if args.fig1 {
        let y0 = InitialState::new(990.0, 10.0, 0.0);
        for (name, beta, gamma) in FIG1_PANELS {
            let p = ExtendedParams::standard(SirParams::new(beta, gamma));
            write_simulation(&ctx.output(name)?, ModelKind::Standard, &p, &y0, 160, ctx)?;
        }
        return Ok(());
    }
    let sim_cfg = &ctx.config.simulate;
    let file = match args.params.or_else(|| sim_cfg.params.clone()) {
        Some(p) => Some(ParamsFile::load(&p)?),
        None => None,
    };
    let kind = args
        .model
        .or(file.as_ref().and_then(|f| f.model))
        .unwrap_or(sim_cfg.model);
    let params = match &file {
        Some(f) => f.params(kind)?,
        None => match kind {
            ModelKind::Extended => reference::extended(),
            ModelKind::Standard => ExtendedParams::standard(reference::STEP1),
        },
    };
    let base = file.as_ref().and_then(|f| f.y0).unwrap_or(sim_cfg.y0);
    let y0 = InitialState::new(
        args.s0.unwrap_or(base.s0),
        args.i0.unwrap_or(base.i0),
        args.r0.unwrap_or(base.r0),
    );
    let days = args.days.unwrap_or(sim_cfg.days);
    let out = match args.out {
        Some(p) => p,
        None => ctx.output(&format!("simulation_{kind}.csv"))?,
    };
    ctx.log(format!("simulating {kind} model for {days} days"));
    write_simulation(&out, kind, &params, &y0, days, ctx)
}

pub fn compare_cmd(ctx: &Context, a: &Path, b: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let load = |p: &Path| -> Result<FitReport, CliError> {
        serde_json::from_slice(&read(p)?)
            .map_err(|e| CliError::Config(format!("{}: not a fit report: {e}", p.display())))
    };
    let (ra, rb) = (load(a)?, load(b)?);
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut la = comparison_label(&ra.result, &stem(a), &rb.result);
    let lb = comparison_label(&rb.result, &stem(b), &ra.result);
    if la == lb {
        la = format!("{la} (a)");
    }
    let missing = || CliError::Config("report has no fitness section (constant data compartment)".into());
    let fa = ra.result.fitness.as_ref().ok_or_else(missing)?;
    let fb = rb.result.fitness.as_ref().ok_or_else(missing)?;
    let cmp = compare(&la, fa, &lb, fb)?;
    print!("{}", cmp.to_text());
    write_comparison(ctx, &cmp, out)
}
