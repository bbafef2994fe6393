//! CSV tables and simulator grids. Errors carry the file and line number.

use crate::error::{from_mixing, ingestion, validation, CliError};
use rpbart::mixing::ModelOutputGrid;
use std::path::Path;

type Result<T> = std::result::Result<T, CliError>;

/// File contents without blank and `#` comment lines, and the file line
/// number of each kept line.
struct Source {
    text: String,
    lines: Vec<u64>,
}

impl Source {
    fn read(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| ingestion(format!("cannot read {}: {e}", path.display())))?;
        let mut text = String::with_capacity(raw.len());
        let mut lines = Vec::new();
        for (i, l) in raw.lines().enumerate() {
            let t = l.trim_start();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            text.push_str(l);
            text.push('\n');
            lines.push(i as u64 + 1);
        }
        Ok(Source { text, lines })
    }

    /// File line of a csv position line (1-based over the kept lines).
    fn line(&self, csv_line: u64) -> u64 {
        self.lines.get(csv_line.saturating_sub(1) as usize).copied().unwrap_or(csv_line)
    }

    fn reader(&self, builder: &mut csv::ReaderBuilder) -> csv::Reader<&[u8]> {
        builder.from_reader(self.text.as_bytes())
    }
}

/// A CSV file with a header row. Lines starting with `#` are skipped.
#[derive(Debug, Clone)]
pub struct Table {
    pub source: String,
    pub headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let source = path.display().to_string();
        let file = Source::read(path)?;
        let mut reader = file.reader(csv::ReaderBuilder::new().trim(csv::Trim::All));
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| ingestion(format!("{source}: bad header row: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(ingestion(format!("{source}: missing header row")));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| format!(":{}", file.line(p.line()))).unwrap_or_default();
                ingestion(format!("{source}{line}: {e}"))
            })?;
            let line = file.line(record.position().map_or(0, |p| p.line()));
            rows.push((line, record.iter().map(str::to_string).collect()));
        }
        Ok(Table { source, headers, rows })
    }

    /// Indices of `names`, or an error listing every missing column.
    pub fn indices(&self, names: &[String]) -> Result<Vec<usize>> {
        let missing: Vec<&str> = names
            .iter()
            .filter(|n| !self.headers.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(ingestion(format!(
                "{}: missing column(s): {}",
                self.source,
                missing.join(", ")
            )));
        }
        Ok(names
            .iter()
            .map(|n| self.headers.iter().position(|h| h == n).expect("checked above"))
            .collect())
    }

    /// One numeric row per record over the named columns. With
    /// `allow_missing`, empty cells and `NaN` become `NaN`; otherwise every
    /// value must be finite.
    pub fn numeric(&self, names: &[String], allow_missing: bool) -> Result<Vec<Vec<f64>>> {
        let idx = self.indices(names)?;
        self.rows
            .iter()
            .map(|(line, cells)| {
                idx.iter()
                    .zip(names)
                    .map(|(&i, name)| {
                        let cell = cells.get(i).map(String::as_str).unwrap_or("");
                        let value = if cell.is_empty() && allow_missing {
                            f64::NAN
                        } else {
                            cell.parse::<f64>().map_err(|_| {
                                ingestion(format!("{}:{line}: column {name}: cannot parse {cell:?} as a number", self.source))
                            })?
                        };
                        if !value.is_finite() && !(allow_missing && value.is_nan()) {
                            return Err(ingestion(format!(
                                "{}:{line}: column {name}: value {cell:?} is not finite",
                                self.source
                            )));
                        }
                        Ok(value)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn column(&self, name: &str, allow_missing: bool) -> Result<Vec<f64>> {
        Ok(self
            .numeric(&[name.to_string()], allow_missing)?
            .into_iter()
            .map(|r| r[0])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    /// Header row, then `axis0, axis1, value` rows.
    Triples,
    /// First row: a label cell then the axis-1 nodes; every further row: the
    /// axis-0 node then its values.
    Matrix,
}

impl std::str::FromStr for GridFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "triples" => Ok(GridFormat::Triples),
            "matrix" => Ok(GridFormat::Matrix),
            other => Err(format!("unknown grid format {other:?} (expected triples or matrix)")),
        }
    }
}

fn number(source: &str, line: u64, cell: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| ingestion(format!("{source}:{line}: cannot parse {cell:?} as a number")))
}

pub fn read_grid(path: &Path, id: &str, format: GridFormat) -> Result<ModelOutputGrid> {
    let source = path.display().to_string();
    let file = Source::read(path)?;
    let mut reader = file.reader(
        csv::ReaderBuilder::new()
            .has_headers(format == GridFormat::Triples)
            .flexible(true)
            .trim(csv::Trim::All),
    );
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ingestion(format!("{source}: {e}")))?;
        let line = file.line(record.position().map_or(0, |p| p.line()));
        rows.push((line, record.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    let with_source = |e| match from_mixing(e) {
        CliError::Ingestion(m) => ingestion(format!("{source}: {m}")),
        other => other,
    };
    match format {
        GridFormat::Triples => {
            let triples = rows
                .iter()
                .map(|(line, cells)| {
                    if cells.len() != 3 {
                        return Err(ingestion(format!("{source}:{line}: expected 3 columns, got {}", cells.len())));
                    }
                    Ok((
                        number(&source, *line, &cells[0])?,
                        number(&source, *line, &cells[1])?,
                        number(&source, *line, &cells[2])?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            ModelOutputGrid::from_triples(id, &triples).map_err(with_source)
        }
        GridFormat::Matrix => {
            let Some(((_, head), body)) = rows.split_first() else {
                return Err(ingestion(format!("{source}: empty grid file")));
            };
            let head_line = file.line(1);
            let axis1 = head[1..]
                .iter()
                .map(|c| number(&source, head_line, c))
                .collect::<Result<Vec<_>>>()?;
            let mut axis0 = Vec::with_capacity(body.len());
            let mut values = Vec::with_capacity(body.len() * axis1.len());
            for (line, cells) in body {
                if cells.len() != axis1.len() + 1 {
                    return Err(ingestion(format!(
                        "{source}:{line}: expected {} columns, got {}",
                        axis1.len() + 1,
                        cells.len()
                    )));
                }
                axis0.push(number(&source, *line, &cells[0])?);
                for c in &cells[1..] {
                    values.push(number(&source, *line, c)?);
                }
            }
            ModelOutputGrid::new(id, axis0, axis1, values).map_err(with_source)
        }
    }
}

/// Grid identifier from a file name: its stem.
pub fn grid_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Check that identifiers are unique.
pub fn unique_ids(ids: &[String]) -> Result<()> {
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(validation(format!("model identifier {id:?} is used twice")));
        }
    }
    Ok(())
}
