//! CSV artifacts. Every file starts with one `# key=value ...` metadata line,
//! followed by a header row and data rows. Numbers are written in `{:.10e}`
//! form so that identical inputs give identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::PhaseSpaceField;
use crate::wave::WaveFunction;

pub(crate) fn number(v: f64) -> String {
    format!("{v:.10e}")
}

fn writer(path: &Path, metadata: &[(&str, String)]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    let meta: Vec<String> = metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(file, "# {}", meta.join(" "))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::MalformedArtifact { path: path.to_path_buf(), reason: e.to_string() }
}

pub fn write_wave_csv(path: &Path, time: f64, psi: &WaveFunction) -> Result<()> {
    let grid = psi.grid();
    let mut w = writer(
        path,
        &[
            ("kind", "psi".into()),
            ("t_fs", number(time)),
            ("x_unit", "nm".into()),
            ("psi_unit", "nm^-1/2".into()),
            ("n", grid.len().to_string()),
        ],
    )?;
    w.write_record(["x", "re", "im", "density"]).map_err(|e| csv_error(path, e))?;
    for (x, c) in grid.points().zip(psi.values()) {
        w.write_record([number(x), number(c.re), number(c.im), number(c.norm_sqr())])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format (x, p, F) rows of every `x_stride`-th row and `p_stride`-th
/// column inside `[p_min, p_max]`.
pub fn write_field_csv(
    path: &Path,
    time: f64,
    field: &PhaseSpaceField,
    x_stride: usize,
    p_stride: usize,
    p_window: (f64, f64),
) -> Result<()> {
    let xgrid = field.xgrid();
    let pgrid = field.pgrid();
    let rows: Vec<usize> = (0..xgrid.len()).step_by(x_stride.max(1)).collect();
    let cols: Vec<usize> = (0..pgrid.len())
        .step_by(p_stride.max(1))
        .filter(|&j| (p_window.0..=p_window.1).contains(&pgrid.p(j)))
        .collect();
    let mut w = writer(
        path,
        &[
            ("kind", field.kind().name().into()),
            ("t_fs", number(time)),
            ("x_unit", "nm".into()),
            ("p_unit", "eV*fs/nm".into()),
            ("value_unit", "(nm*eV*fs/nm)^-1".into()),
            ("nx", rows.len().to_string()),
            ("np", cols.len().to_string()),
            ("dx", number(xgrid.dx())),
            ("dp", number(pgrid.dp())),
        ],
    )?;
    w.write_record(["x", "p", "value"]).map_err(|e| csv_error(path, e))?;
    for &i in &rows {
        let x = number(xgrid.x(i));
        for &j in &cols {
            w.write_record([x.as_str(), &number(pgrid.p(j)), &number(field.values()[[i, j]])])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns of equal length sampled on `x`.
pub fn write_columns_csv(path: &Path, time: f64, x: &[f64], columns: &[(&str, &[f64])]) -> Result<()> {
    let metadata = [
        ("kind", "marginals".into()),
        ("t_fs", number(time)),
        ("x_unit", "nm".into()),
        ("q_unit", "nm^-1".into()),
        ("j_unit", "fs^-1".into()),
    ];
    write_table_csv(path, &metadata, "x", x, columns)
}

pub(crate) fn write_table_csv(
    path: &Path,
    metadata: &[(&str, String)],
    first: &str,
    x: &[f64],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let mut w = writer(path, metadata)?;
    let mut header = vec![first];
    header.extend(columns.iter().map(|(name, _)| *name));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, xi) in x.iter().enumerate() {
        let mut record = vec![number(*xi)];
        record.extend(columns.iter().map(|(_, c)| number(c[i])));
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed artifact: metadata line, header and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let malformed = |reason: String| Error::MalformedArtifact { path: path.to_path_buf(), reason };
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let Some(meta) = first.trim_end().strip_prefix("# ") else {
        return Err(malformed("missing metadata line".into()));
    };
    let metadata = meta
        .split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| malformed(format!("bad metadata entry {kv}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv_reader = csv::Reader::from_reader(reader);
    let header = csv_reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| malformed(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { metadata, header, rows })
}
