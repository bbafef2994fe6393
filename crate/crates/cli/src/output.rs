//! Output tables: a `# rpbart-table v1 ...` comment line, then CSV.

use crate::error::{runtime, CliError};
use std::io::Write;
use std::path::Path;

pub const TABLE_VERSION: u32 = 1;

/// Header comment fields besides the version.
pub struct Meta<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub extra: Vec<(String, String)>,
}

impl Meta<'_> {
    pub fn line(&self) -> String {
        let mut s = format!(
            "# rpbart-table v{TABLE_VERSION} command={} config_hash={}",
            self.command, self.config_hash
        );
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

pub fn write_table(path: &Path, meta: &Meta, headers: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let io = |e: std::io::Error| runtime(format!("cannot write {}: {e}", path.display()));
    let csv_err = |e: csv::Error| runtime(format!("cannot write {}: {e}", path.display()));
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(file, "{}", meta.line()).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let meta = Meta {
            command: "predict",
            config_hash: "abc",
            extra: vec![("temperature".into(), "0.5".into())],
        };
        write_table(&path, &meta, &["x".into(), "mean".into()], &[vec![0.1, 2.0]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# rpbart-table v1 command=predict config_hash=abc temperature=0.5\nx,mean\n0.1,2\n"
        );
    }
}
