//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::common::YearRange;
use crate::forecast_engine::ForecastResult;

use super::config::{load_config, ConfigError};
use super::csv_io::{self, num, CsvError};
use super::golden::{golden_check, read_golden, GoldenCell};
use super::pipeline::{
    fit_projection, load_model, run_fit, LoadedModel, PipelineError, ScenarioRun,
};
use super::report::{
    penetration_cells, render_text, scenario_cells, summary_tables, table_cells, Cells,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_GOLDEN: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "urbancast",
    version,
    about = "Hourly urban mobile traffic and control-plane forecasts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Scenario to run; repeatable. Defaults to every configured scenario.
    #[arg(long)]
    pub scenario: Vec<String>,
    /// Year range such as 2018-2030; defaults to the configured horizon.
    #[arg(long)]
    pub years: Option<YearRange>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Bass curves to the configured adoption histories.
    FitBass {
        #[command(flatten)]
        common: CommonArgs,
        /// Only fit this device.
        #[arg(long)]
        device: Option<String>,
    },
    /// Write hourly urban density profiles.
    Density(CommonArgs),
    /// Run the forecast and write volume and density tensors.
    Forecast(CommonArgs),
    /// Write attachment and handover indicators.
    Control(CommonArgs),
    /// Write capacity crossing years.
    Capacity(CommonArgs),
    /// Write every output plus the summary tables.
    Report(CommonArgs),
    /// Compare results against golden tables.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Golden CSV files; defaults to the configured fixtures.
        #[arg(long)]
        golden: Vec<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Golden(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Golden(_) => EXIT_GOLDEN,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Golden(m) | CliError::Io(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        PipelineError::from(e).into()
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::FitBass { common, device } => fit_bass(common, device.as_deref()),
        Command::Density(c) => density(c),
        Command::Forecast(c) => {
            let (_, runs) = prepare(c)?;
            write_forecast_outputs(&c.out, &runs)?;
            print_totals(&runs);
            Ok(())
        }
        Command::Control(c) => {
            let (model, runs) = prepare(c)?;
            let series: Vec<_> = runs.iter().map(|r| r.control.clone()).collect();
            csv_io::write_control(&c.out.join("control.csv"), &series)?;
            for s in &series {
                let (Some(base), Some(last)) = (s.get(model.config.baseline_year), s.years.last())
                else {
                    continue;
                };
                println!(
                    "{}: attachment {:.1} -> {:.1} /min/km2 (x{:.2}), handover {:.0} -> {:.0} /h/km2 (x{:.2}), {}-{}",
                    s.scenario,
                    base.attachment.total,
                    last.attachment.total,
                    last.attachment.total / base.attachment.total,
                    base.handover.total,
                    last.handover.total,
                    last.handover.total / base.handover.total,
                    base.year,
                    last.year
                );
            }
            Ok(())
        }
        Command::Capacity(c) => {
            let (_, runs) = prepare(c)?;
            let reports: Vec<_> = runs.iter().map(|r| r.capacity.clone()).collect();
            csv_io::write_capacity(&c.out.join("capacity.csv"), &reports)?;
            for r in &reports {
                for x in &r.crossings {
                    let year = x.year.map_or("not reached".to_string(), |y| y.to_string());
                    println!(
                        "{}: {} (x{}) -> {}",
                        r.scenario, x.assumption, x.multiplier, year
                    );
                }
            }
            Ok(())
        }
        Command::Report(c) => {
            let (model, runs) = prepare(c)?;
            write_forecast_outputs(&c.out, &runs)?;
            let series: Vec<_> = runs.iter().map(|r| r.control.clone()).collect();
            csv_io::write_control(&c.out.join("control.csv"), &series)?;
            let reports: Vec<_> = runs.iter().map(|r| r.capacity.clone()).collect();
            csv_io::write_capacity(&c.out.join("capacity.csv"), &reports)?;
            csv_io::write_densities(&c.out.join("densities.csv"), &model.inputs.densities)?;
            let results: Vec<ForecastResult> = runs.iter().map(|r| r.result.clone()).collect();
            let end = results
                .first()
                .and_then(|r| r.years.last().copied())
                .unwrap_or(model.config.baseline_year);
            let tables = summary_tables(&results, model.config.baseline_year, end)
                .map_err(PipelineError::from)?;
            let text = render_text(&tables);
            write_text(&c.out.join("summary.txt"), &text)?;
            let cells = table_cells(&tables);
            csv_io::write_csv(
                &c.out.join("summary.csv"),
                &["table", "row", "column", "value"],
                cells
                    .iter()
                    .map(|((t, r, col), v)| vec![t.clone(), r.clone(), col.clone(), num(*v)]),
            )?;
            print!("{text}");
            Ok(())
        }
        Command::Check { common, golden } => check(common, golden),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn load(c: &CommonArgs) -> Result<LoadedModel, CliError> {
    let config = load_config(&c.config)?;
    Ok(load_model(config)?)
}

fn scenario_names(model: &LoadedModel, c: &CommonArgs) -> Vec<String> {
    if c.scenario.is_empty() {
        model.config.scenario_names()
    } else {
        c.scenario.clone()
    }
}

/// Loads the model, runs the requested scenarios and creates the output
/// directory.
pub fn prepare(c: &CommonArgs) -> Result<(LoadedModel, Vec<ScenarioRun>), CliError> {
    let model = load(c)?;
    let mut runs = Vec::new();
    for name in scenario_names(&model, c) {
        runs.push(model.run(&name, c.years)?);
    }
    ensure_dir(&c.out)?;
    Ok((model, runs))
}

fn write_forecast_outputs(out: &Path, runs: &[ScenarioRun]) -> Result<(), CliError> {
    let results: Vec<ForecastResult> = runs.iter().map(|r| r.result.clone()).collect();
    csv_io::write_forecast(&out.join("forecast.csv"), &results)?;
    csv_io::write_penetration(&out.join("penetration.csv"), &results)?;
    for r in runs {
        csv_io::write_plot(
            &out.join(format!("plot_{}.csv", r.scenario.name)),
            &r.result,
        )?;
        let echo = toml::to_string(&r.resolved).map_err(|e| {
            CliError::Validation(format!("cannot serialize resolved parameters: {e}"))
        })?;
        write_text(
            &out.join(format!("resolved_{}.toml", r.scenario.name)),
            &echo,
        )?;
    }
    Ok(())
}

fn print_totals(runs: &[ScenarioRun]) {
    for r in runs {
        println!("scenario {}", r.scenario.name);
        println!(
            "{:>6} {:>14} {:>6} {:>10}",
            "year", "total_gb_km2", "peak", "peak_share"
        );
        for &y in &r.result.years {
            let total = r.result.daily_total(y).unwrap_or(0.0);
            let (hour, share) = r
                .result
                .peak_hour(y)
                .map_or((0, 0.0), |p| (p.hour, p.share));
            println!("{y:>6} {total:>14.0} {hour:>6} {:>9.2}%", share * 100.0);
        }
    }
}

fn density(c: &CommonArgs) -> Result<(), CliError> {
    let model = load(c)?;
    ensure_dir(&c.out)?;
    csv_io::write_densities(&c.out.join("densities.csv"), &model.inputs.densities)?;
    for (b, p) in &model.inputs.densities {
        println!(
            "{:<24} median {:>10.1} max {:>10.1}",
            b.as_str(),
            p.median(),
            p.max()
        );
    }
    Ok(())
}

fn fit_bass(c: &CommonArgs, device: Option<&str>) -> Result<(), CliError> {
    let config = load_config(&c.config)?;
    let years = c.years.unwrap_or(config.horizon);
    let specs: Vec<_> = config
        .fits
        .iter()
        .filter(|f| device.is_none_or(|d| f.device == d))
        .collect();
    if specs.is_empty() {
        return Err(CliError::Validation(match device {
            Some(d) => format!("no fit configured for device `{d}`"),
            None => "no fits configured".into(),
        }));
    }
    ensure_dir(&c.out)?;
    let mut params = Vec::new();
    let mut projections = Vec::new();
    for spec in specs {
        let outcome = run_fit(&config, spec)?;
        let p = &outcome.fit.params;
        println!(
            "{}: p={:.6} q={:.6} m={:.6} t0={:.3} residual={:.3e} iterations={} converged={}",
            outcome.device,
            p.p,
            p.q,
            p.m,
            p.t0,
            outcome.fit.residual_norm,
            outcome.fit.iterations,
            outcome.fit.converged
        );
        params.push(vec![
            outcome.device.clone(),
            num(p.p),
            num(p.q),
            num(p.m),
            num(p.t0),
            num(outcome.fit.residual_norm),
            outcome.fit.iterations.to_string(),
            outcome.fit.converged.to_string(),
        ]);
        let first = outcome
            .history
            .keys()
            .next()
            .copied()
            .unwrap_or(years.start)
            .min(years.start);
        let span = YearRange::new(first, years.end.max(first)).unwrap_or(years);
        for (y, v) in fit_projection(&outcome, span)? {
            let h = outcome.history.get(&y).map(|v| num(*v)).unwrap_or_default();
            projections.push(vec![outcome.device.clone(), y.to_string(), h, num(v)]);
        }
    }
    csv_io::write_csv(
        &c.out.join("bass_fits.csv"),
        &[
            "device",
            "p",
            "q",
            "m",
            "t0",
            "residual_norm",
            "iterations",
            "converged",
        ],
        params,
    )?;
    csv_io::write_csv(
        &c.out.join("bass_projection.csv"),
        &["device", "year", "history", "fitted"],
        projections,
    )?;
    Ok(())
}

/// Every cell a golden table can reference.
pub fn result_cells(model: &LoadedModel, runs: &[ScenarioRun]) -> Result<Cells, PipelineError> {
    let results: Vec<ForecastResult> = runs.iter().map(|r| r.result.clone()).collect();
    let years = results
        .first()
        .map(|r| YearRange::new(*r.years.first().unwrap(), *r.years.last().unwrap()).unwrap());
    let mut cells = penetration_cells(&model.config, years.unwrap_or(model.config.horizon));
    if let Some(y) = years {
        let tables = summary_tables(&results, model.config.baseline_year, y.end)?;
        cells.extend(table_cells(&tables));
        cells.extend(scenario_cells(&results)?);
    }
    Ok(cells)
}

fn check(c: &CommonArgs, golden: &[PathBuf]) -> Result<(), CliError> {
    let (model, runs) = prepare(c)?;
    let paths: Vec<PathBuf> = if golden.is_empty() {
        model
            .config
            .fixtures
            .golden
            .iter()
            .map(|p| model.config.resolve_path(p))
            .collect()
    } else {
        golden.to_vec()
    };
    if paths.is_empty() {
        return Err(CliError::Validation("no golden tables configured".into()));
    }
    let mut cells: Vec<GoldenCell> = Vec::new();
    for p in &paths {
        cells.extend(read_golden(p)?);
    }
    let computed = result_cells(&model, &runs)?;
    let report = golden_check(&computed, &cells);
    for d in &report.info {
        println!("info  {d}");
    }
    for d in &report.failures {
        println!("FAIL  {d}");
    }
    println!(
        "{} cells checked, {} gate failures, {} informational mismatches",
        report.checked,
        report.failures.len(),
        report.info.len()
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Golden(format!(
            "{} golden cells out of tolerance",
            report.failures.len()
        )))
    }
}
