//! Orchestration: `run`, `refine_sweep` and `emit_plots`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use ricci_lab_core::flow::step_rk4;
use ricci_lab_core::functionals::{f_quantity, i_n_direct_with, integral_check, s_rate_oracle, s_tensor};
use ricci_lab_core::{FVariant, FlowConfig, FlowState, LabError, ScalarField};

use crate::checks::{evaluate, initial_state, Evaluation};
use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::report::{series_csv, ConvergenceTable, ResidualReport, SeriesRow};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub evaluations: Vec<Evaluation>,
    pub report: ResidualReport,
    /// Time series with the stated `∂S/∂t`.
    pub series: Vec<SeriesRow>,
    /// Same series with `∂S/∂t` replaced by the flow-direction oracle.
    pub series_oracle: Vec<SeriesRow>,
}

/// Worker count from `RICCI_LAB_THREADS`; unset or 0 means automatic.
pub fn thread_count_from_env() -> Result<usize, HarnessError> {
    match std::env::var("RICCI_LAB_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("RICCI_LAB_THREADS must be a nonnegative integer, got `{v}`"))),
    }
}

/// Installs the global worker pool; a no-op if one is already running.
pub fn configure_threads(threads: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

fn evaluate_all(cfg: &ExperimentConfig, levels: usize) -> Result<Vec<Evaluation>, HarnessError> {
    cfg.checks.par_iter().map(|&c| evaluate(c, cfg, levels)).collect()
}

fn min_max(f: &ScalarField) -> (f64, f64) {
    (f.min(), f.max())
}

fn series_row(state: &FlowState, flow: &FlowConfig, s_rate: Option<&ScalarField>) -> Result<SeriesRow, LabError> {
    let mut integrals = [(0.0, 0.0); 3];
    for (slot, n) in integrals.iter_mut().zip([3, 5, 7]) {
        *slot = match flow.f_variant {
            FVariant::Laplacian => {
                let c = integral_check(state, flow, n, s_rate)?;
                (c.direct, c.expression.total)
            }
            // no integrated-by-parts form exists for this variant
            FVariant::Linear => (i_n_direct_with(state, flow, n, s_rate)?, f64::NAN),
        };
    }
    Ok(SeriesRow {
        t: state.t,
        integrals,
        f_range: min_max(&f_quantity(state, flow)?),
        s_range: min_max(&s_tensor(state)?.scalar),
    })
}

/// Steps the configured flow on the base grid and records both series.
pub fn time_series(cfg: &ExperimentConfig) -> Result<(Vec<SeriesRow>, Vec<SeriesRow>), HarnessError> {
    let named = |source| HarnessError::Check { check: "time-series".into(), source };
    let grid = cfg.grid.grid(0)?;
    let start = initial_state(cfg, grid).map_err(named)?;
    let flow = cfg.flow.config_for(&start);
    let mut state = start;
    let mut plain = Vec::new();
    let mut oracle = Vec::new();
    for step in 0..=cfg.flow.steps {
        let rate = s_rate_oracle(&state).map_err(named)?;
        plain.push(series_row(&state, &flow, None).map_err(named)?);
        oracle.push(series_row(&state, &flow, Some(&rate)).map_err(named)?);
        if step < cfg.flow.steps {
            state = step_rk4(&state, &flow).map_err(named)?;
        }
    }
    Ok((plain, oracle))
}

/// Runs every configured check on `cfg.levels` grids and records the time
/// series.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let (evals, series) = rayon::join(|| evaluate_all(cfg, cfg.levels), || time_series(cfg));
    let evaluations = evals?;
    let (series, series_oracle) = series?;
    let report = ResidualReport::from_evaluations(&evaluations);
    Ok(RunOutput { evaluations, report, series, series_oracle })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::Io(path.to_path_buf(), e))
}

/// Writes the report and both CSVs; returns their paths.
pub fn write_run(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Vec<PathBuf>, HarnessError> {
    let files = [
        (cfg.output.report_path(), out.report.to_json()?),
        (cfg.output.csv_path(), series_csv(&out.series)),
        (cfg.output.csv_oracle_path(), series_csv(&out.series_oracle)),
    ];
    for (path, text) in &files {
        write(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Reruns the checks on `levels` grids `h, h/2, ..` and tabulates orders.
pub fn refine_sweep(cfg: &ExperimentConfig, levels: usize) -> Result<(ConvergenceTable, Vec<Evaluation>), HarnessError> {
    if levels < 2 {
        return Err(HarnessError::Config("a refinement sweep needs at least two levels".into()));
    }
    let evals = evaluate_all(cfg, levels)?;
    Ok((ConvergenceTable::from_evaluations(&evals), evals))
}

/// Writes the sweep table as JSON and as long-format CSV next to it.
pub fn write_sweep(cfg: &ExperimentConfig, table: &ConvergenceTable) -> Result<Vec<PathBuf>, HarnessError> {
    let json = cfg.output.sweep_path();
    let csv = json.with_extension("csv");
    write(&json, &table.to_json()?)?;
    write(&csv, &table.to_csv())?;
    Ok(vec![json, csv])
}

/// Writes `<csv>.gp`, a gnuplot script plotting `I_n(t)` from the series
/// CSV, and residual against `n` on log-log axes when a sweep CSV sits in
/// the same directory.
pub fn emit_plots(csv_path: &Path) -> Result<PathBuf, HarnessError> {
    let text = fs::read_to_string(csv_path).map_err(|e| HarnessError::Io(csv_path.to_path_buf(), e))?;
    if text.lines().next() != Some(crate::report::CSV_HEADER) {
        return Err(HarnessError::Config(format!("{} is not a time-series CSV", csv_path.display())));
    }
    let name = csv_path.file_name().and_then(|s| s.to_str()).unwrap_or("series.csv");
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    let mut gp = format!(
        "# plots for {name}\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1000,700\n\
         set output '{stem}_integrals.png'\n\
         set xlabel 't'\n\
         set multiplot layout 3,1\n"
    );
    for (k, n) in [3, 5, 7].iter().enumerate() {
        let direct = 2 + 2 * k;
        gp.push_str(&format!(
            "set ylabel 'I{n}'\nplot '{name}' using 1:{direct} with lines, '' using 1:{} with points\n",
            direct + 1
        ));
    }
    gp.push_str("unset multiplot\n");
    let sweep = csv_path.with_file_name("sweep.csv");
    if let Ok(table) = fs::read_to_string(&sweep) {
        let mut checks: Vec<&str> = table.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
        checks.dedup();
        if !checks.is_empty() {
            gp.push_str(
                "\nset output 'sweep_orders.png'\n\
                 set logscale xy\n\
                 set xlabel 'n'\n\
                 set ylabel 'residual'\n",
            );
            let curves: Vec<String> = checks
                .iter()
                .map(|c| format!("'sweep.csv' using 2:(strcol(1) eq '{c}' ? $3 : 1/0) with linespoints title '{c}'"))
                .collect();
            gp.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
        }
    }
    let out = csv_path.with_extension("gp");
    write(&out, &gp)?;
    Ok(out)
}
