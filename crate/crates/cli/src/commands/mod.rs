pub mod fit;
pub mod predict;
pub mod project;
pub mod regrid;
pub mod semivariogram;

use crate::config::Config;
use crate::error::{from_mixing, ingestion, validation, CliError};
use crate::ingest::{grid_id, read_grid, unique_ids, GridFormat, Table};
use crate::output::Meta;
use rpbart::archive::read_archive;
use rpbart::mixing::{bilinear_regrid, ModelOutputGrid};
use rpbart::sampler::Posterior;
use rpbart::stats::Summary;
use std::path::PathBuf;

type Result<T> = std::result::Result<T, CliError>;

pub const COMMON_KEYS: &[&str] = &["seed", "out"];

/// Ways to supply simulator outputs at a table's rows.
pub const MODEL_KEYS: &[&str] = &[
    "model_columns",
    "model_grids",
    "model_ids",
    "grid_format",
    "grid_inputs",
    "grid_period0",
    "grid_period1",
];

/// Everything a command needs besides its own keys.
pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub out: PathBuf,
    pub hash: String,
}

impl Context {
    pub fn meta(&self, command: &'static str, extra: Vec<(String, String)>) -> Meta<'_> {
        Meta { command, config_hash: &self.hash, extra }
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn load_archive(cfg: &Config) -> Result<Posterior> {
    let path = cfg.path("archive")?;
    let file = std::fs::File::open(&path).map_err(|e| ingestion(format!("cannot read {}: {e}", path.display())))?;
    read_archive(std::io::BufReader::new(file)).map_err(|e| ingestion(format!("{}: {e}", path.display())))
}

/// Grids named by `model_grids`, with identifiers and periodic axes applied.
pub fn load_grids(cfg: &Config) -> Result<Vec<ModelOutputGrid>> {
    let paths = cfg.path_list("model_grids").unwrap_or_default();
    if paths.is_empty() {
        return Err(validation("model_grids lists no files"));
    }
    let ids = match cfg.list("model_ids") {
        Some(ids) if ids.len() != paths.len() => {
            return Err(validation(format!(
                "model_ids has {} entries for {} grids",
                ids.len(),
                paths.len()
            )))
        }
        Some(ids) => ids,
        None => paths.iter().map(|p| grid_id(p)).collect(),
    };
    unique_ids(&ids)?;
    let format: GridFormat = cfg.parse_or("grid_format", GridFormat::Triples)?;
    let periods = [cfg.parse_opt::<f64>("grid_period0")?, cfg.parse_opt::<f64>("grid_period1")?];
    paths
        .iter()
        .zip(&ids)
        .map(|(path, id)| {
            let mut grid = read_grid(path, id, format)?;
            for (axis, period) in periods.iter().enumerate() {
                if let Some(p) = period {
                    grid = grid.with_period(axis, *p).map_err(|e| validation(e.to_string()))?;
                }
            }
            Ok(grid)
        })
        .collect()
}

/// Simulator outputs at every row of `table`: model columns of the table
/// itself, or grids interpolated at the `grid_inputs` columns (by default
/// the first two covariates). `None` when neither is configured.
#[allow(clippy::type_complexity)]
pub fn model_values(cfg: &Config, table: &Table, covariates: &[String]) -> Result<Option<(Vec<String>, Vec<Vec<f64>>)>> {
    match (cfg.list("model_columns"), cfg.has("model_grids")) {
        (Some(_), true) => Err(validation("set either model_columns or model_grids, not both")),
        (Some(cols), false) => {
            if cols.is_empty() {
                return Err(validation("model_columns lists no columns"));
            }
            let ids = cfg.list("model_ids").unwrap_or_else(|| cols.clone());
            if ids.len() != cols.len() {
                return Err(validation(format!("model_ids has {} entries for {} columns", ids.len(), cols.len())));
            }
            unique_ids(&ids)?;
            Ok(Some((ids, table.numeric(&cols, true)?)))
        }
        (None, true) => {
            let grids = load_grids(cfg)?;
            let inputs = match cfg.list("grid_inputs") {
                Some(cols) => cols,
                None if covariates.len() >= 2 => covariates[..2].to_vec(),
                None => return Err(validation("grid_inputs is required with fewer than two covariates")),
            };
            if inputs.len() != 2 {
                return Err(validation(format!("grid_inputs needs two columns, got {}", inputs.len())));
            }
            let points: Vec<[f64; 2]> = table.numeric(&inputs, false)?.iter().map(|r| [r[0], r[1]]).collect();
            let fhat = bilinear_regrid(&grids, &points).map_err(|e| match from_mixing(e) {
                CliError::Ingestion(m) => ingestion(format!("{}: {m}", table.source)),
                other => other,
            })?;
            Ok(Some((grids.iter().map(|g| g.id().to_string()).collect(), fhat)))
        }
        (None, false) => Ok(None),
    }
}

/// `mean, lower95, upper95` column names for a quantity.
pub fn summary_headers(name: &str) -> [String; 3] {
    [format!("{name}_mean"), format!("{name}_lower95"), format!("{name}_upper95")]
}

pub fn summary_cells(s: &Summary) -> [f64; 3] {
    [s.mean, s.lower, s.upper]
}
