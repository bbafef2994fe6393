use super::{load_grids, Context, COMMON_KEYS};
use crate::error::{from_mixing, ingestion, validation, CliError};
use crate::ingest::Table;
use crate::output::write_table;
use rpbart::mixing::bilinear_regrid;

const KEYS: &[&str] = &[
    "targets",
    "target_columns",
    "model_grids",
    "model_ids",
    "grid_format",
    "grid_period0",
    "grid_period1",
];

pub const OUTPUT: &str = "regrid.csv";

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    cfg.check_keys("regrid", &[COMMON_KEYS, KEYS])?;
    cfg.required("model_grids")?;
    let grids = load_grids(cfg)?;
    let table = Table::read(&cfg.path("targets")?)?;
    let columns = match cfg.list("target_columns") {
        Some(c) if c.len() == 2 => c,
        Some(c) => return Err(validation(format!("target_columns needs two columns, got {}", c.len()))),
        None if table.headers.len() >= 2 => table.headers[..2].to_vec(),
        None => return Err(ingestion(format!("{}: needs two coordinate columns", table.source))),
    };
    let points: Vec<[f64; 2]> = table.numeric(&columns, false)?.iter().map(|r| [r[0], r[1]]).collect();
    let values = bilinear_regrid(&grids, &points).map_err(|e| match from_mixing(e) {
        CliError::Ingestion(m) => ingestion(format!("{}: {m}", table.source)),
        other => other,
    })?;
    let mut headers = columns;
    headers.extend(grids.iter().map(|g| g.id().to_string()));
    let rows: Vec<Vec<f64>> = points
        .iter()
        .zip(values)
        .map(|(p, v)| {
            let mut row = p.to_vec();
            row.extend(v);
            row
        })
        .collect();
    write_table(&ctx.out_path(OUTPUT), &ctx.meta("regrid", vec![]), &headers, &rows)
}
