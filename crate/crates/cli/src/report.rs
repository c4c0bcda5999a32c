//! Aggregation of finished runs into plot-ready tables.
//!
//! Every mode writes `<mode>.csv` and a whitespace-separated `<mode>.dat`
//! with a `#` header line, which gnuplot reads directly.

use std::fs;
use std::path::{Path, PathBuf};

use bossal::harness::{self, mean_se, pick_frequencies, read_curves_csv, LearningCurve, Regime, Summary};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Mean accuracy and standard error per cycle.
    Curves,
    /// Accuracy minus the mean curve of the random run.
    Relative,
    /// AULC per budget regime.
    Aulc,
    /// Fraction of repetitions in which each strategy won, per cycle.
    Picks,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Curves => "curves",
            Mode::Relative => "relative",
            Mode::Aulc => "aulc",
            Mode::Picks => "picks",
        }
    }
}

struct Run {
    label: String,
    summary: Summary,
    curves: Vec<LearningCurve>,
}

fn load_run(dir: &Path) -> Result<Run> {
    let summary_path = dir.join("summary.json");
    let summary = Summary::read(&summary_path).map_err(|e| match e {
        bossal::Error::Io(source) => CliError::Read {
            path: summary_path.clone(),
            source,
        },
        e => e.into(),
    })?;
    let curves_path = dir.join("curves.csv");
    let bytes = fs::read(&curves_path).map_err(|source| CliError::Read {
        path: curves_path,
        source,
    })?;
    let curves = read_curves_csv(bytes.as_slice())?;
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(Run {
        label,
        summary,
        curves,
    })
}

/// A rectangular table that renders both as CSV and as gnuplot data.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    fn dat(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| if c.parse::<f64>().is_ok() { c.clone() } else { format!("\"{c}\"") })
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Writes the report for `mode` into `out` and returns the written paths.
pub fn report(mode: Mode, dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if dirs.is_empty() {
        return Err(CliError::config("report needs at least one run directory"));
    }
    let runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    let first = &runs[0].summary;
    for run in &runs[1..] {
        let s = &run.summary;
        if (s.cycles, s.batch_size) != (first.cycles, first.batch_size) {
            return Err(CliError::config(format!(
                "runs disagree on cycles/batch size: {} has A={}, b={} but {} has A={}, b={}",
                runs[0].label, first.cycles, first.batch_size, run.label, s.cycles, s.batch_size
            )));
        }
    }
    let table = match mode {
        Mode::Curves => curves_table(&runs),
        Mode::Relative => relative_table(&runs)?,
        Mode::Aulc => aulc_table(&runs)?,
        Mode::Picks => picks_table(&runs)?,
    };
    fs::create_dir_all(out)?;
    let csv_path = out.join(format!("{}.csv", mode.as_str()));
    let dat_path = out.join(format!("{}.dat", mode.as_str()));
    fs::write(&csv_path, table.csv())?;
    fs::write(&dat_path, table.dat())?;
    Ok(vec![csv_path, dat_path])
}

fn per_cycle_header(runs: &[Run]) -> Vec<String> {
    let mut header = vec!["cycle".to_owned(), "labeled_size".to_owned()];
    for run in runs {
        header.push(format!("{}_mean", run.label));
        header.push(format!("{}_se", run.label));
    }
    header
}

/// One row per cycle with the mean and standard error of each run's
/// accuracies, the mean shifted down by `baseline(cycle)`.
fn per_cycle_table(runs: &[Run], baseline: impl Fn(usize) -> f64) -> Table {
    let cycles = runs[0].summary.cycles;
    let b = runs[0].summary.batch_size;
    let rows = (0..=cycles)
        .map(|a| {
            let mut row = vec![a.to_string(), (b * (a + 1)).to_string()];
            for run in runs {
                let values: Vec<f64> = run.curves.iter().map(|c| c.records[a].accuracy).collect();
                let stat = mean_se(&values);
                row.push(fmt(stat.mean - baseline(a)));
                row.push(fmt(stat.se));
            }
            row
        })
        .collect();
    Table {
        header: per_cycle_header(runs),
        rows,
    }
}

fn curves_table(runs: &[Run]) -> Table {
    per_cycle_table(runs, |_| 0.0)
}

fn relative_table(runs: &[Run]) -> Result<Table> {
    let random = runs
        .iter()
        .find(|r| r.summary.selector == "random")
        .ok_or_else(|| CliError::config("relative mode needs a run with selector = random"))?;
    let baseline = random.summary.mean_curve.clone();
    Ok(per_cycle_table(runs, |a| baseline[a]))
}

fn aulc_table(runs: &[Run]) -> Result<Table> {
    let tables = runs
        .iter()
        .map(|r| harness::aulc_table(&r.curves))
        .collect::<Result<Vec<_>, _>>()?;
    let regimes: Vec<Regime> = tables[0].keys().copied().collect();
    let mut header = vec!["run".to_owned(), "selector".to_owned()];
    for regime in &regimes {
        header.push(format!("{}_mean", regime.as_str()));
        header.push(format!("{}_se", regime.as_str()));
    }
    let rows = runs
        .iter()
        .zip(&tables)
        .map(|(run, table)| {
            let mut row = vec![run.label.clone(), run.summary.selector.clone()];
            for stat in table.values() {
                row.push(fmt(stat.mean));
                row.push(fmt(stat.se));
            }
            row
        })
        .collect();
    Ok(Table { header, rows })
}

fn picks_table(runs: &[Run]) -> Result<Table> {
    let mut header = vec!["run".to_owned(), "cycle".to_owned()];
    let mut rows = Vec::new();
    for run in runs {
        let picks = pick_frequencies(&run.curves)?;
        if header.len() == 2 {
            header.extend(picks.strategies.iter().map(|s| s.as_str().to_owned()));
        }
        for (i, freqs) in picks.rows.iter().enumerate() {
            let mut row = vec![run.label.clone(), (i + 1).to_string()];
            row.extend(freqs.iter().map(|&f| fmt(f)));
            rows.push(row);
        }
    }
    Ok(Table { header, rows })
}

fn fmt(x: f64) -> String {
    x.to_string()
}
