//! Gnuplot-ready data from a finished run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::io::{number, read_csv, CsvTable};
use super::report::ComparisonReport;
use crate::error::{Error, Result};

/// Writes `plot/*.dat` and `plot/plot.gp` under `run_dir` and returns the
/// paths written. Fails with [`Error::MissingArtifact`] if an input is absent.
pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let report_path = run_dir.join("report.json");
    if !report_path.exists() {
        return Err(Error::MissingArtifact(report_path));
    }
    let report = ComparisonReport::from_json(&std::fs::read_to_string(&report_path)?)?;
    let plot_dir = run_dir.join("plot");
    std::fs::create_dir_all(&plot_dir)?;

    let mut kinds = vec!["wigner", "husimi"];
    if report.trajectories.is_some() {
        kinds.push("bohmian");
    }
    let mut written = Vec::new();
    let mut script = String::from("set terminal pngcairo size 900,700\nset view map\nset xlabel 'x (nm)'\n");
    for (k, snapshot) in report.snapshots.iter().enumerate() {
        for kind in &kinds {
            let table = read_csv(&run_dir.join(format!("{kind}_{k}.csv")))?;
            let name = format!("{kind}_{k}.dat");
            std::fs::write(plot_dir.join(&name), surface_text(&table))?;
            written.push(plot_dir.join(&name));
            let _ = writeln!(
                script,
                "set output '{kind}_{k}.png'\nset ylabel 'p (eV fs/nm)'\nset title '{kind} t = {} fs'\n\
                 splot '{name}' using 1:2:3 with pm3d notitle",
                snapshot.time
            );
        }
        let table = read_csv(&run_dir.join(format!("marginals_{k}.csv")))?;
        let name = format!("marginals_{k}.dat");
        std::fs::write(plot_dir.join(&name), columns_text(&table))?;
        written.push(plot_dir.join(&name));
        let curves: Vec<String> = table
            .header
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, h)| h.starts_with("q_"))
            .map(|(c, h)| format!("'{name}' using 1:{} with lines title '{h}'", c + 1))
            .collect();
        let _ = writeln!(
            script,
            "set output 'marginals_{k}.png'\nset ylabel 'Q (1/nm)'\nset title 'position marginals t = {} fs'\nplot {}",
            snapshot.time,
            curves.join(", ")
        );
    }
    let script_path = plot_dir.join("plot.gp");
    std::fs::write(&script_path, script)?;
    written.push(script_path);
    Ok(written)
}

/// `x p value` lines with a blank line between x rows, as pm3d expects.
fn surface_text(table: &CsvTable) -> String {
    let mut out = String::from("# x p value\n");
    let mut last_x = None;
    for row in &table.rows {
        if last_x.is_some_and(|x| x != row[0]) {
            out.push('\n');
        }
        last_x = Some(row[0]);
        let _ = writeln!(out, "{} {} {}", number(row[0]), number(row[1]), number(row[2]));
    }
    out
}

fn columns_text(table: &CsvTable) -> String {
    let mut out = format!("# {}\n", table.header.join(" "));
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|v| number(*v)).collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}
