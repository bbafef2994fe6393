use super::predict::archive_model_values;
use super::{load_archive, summary_cells, summary_headers, Context, COMMON_KEYS, MODEL_KEYS};
use crate::config::Config;
use crate::error::{from_mixing, validation, CliError};
use crate::ingest::Table;
use crate::output::write_table;
use rpbart::mixing::{sum_of_weights, weights_at};
use rpbart::projection::{
    default_sparsegen_grid, discrepancy, project_draws, select_temperature, ProjectionError, ProjectionKind,
};
use rpbart::sampler::{Mode, Posterior};

type Result<T> = std::result::Result<T, CliError>;

const KEYS: &[&str] = &["archive", "query", "kind", "temperature", "temperatures", "validation"];

pub const OUTPUT: &str = "projection.csv";
pub const OBJECTIVES: &str = "temperature_objectives.csv";

fn proj_err(e: ProjectionError) -> CliError {
    validation(e.to_string())
}

/// 50 log-spaced softmax temperatures on `[0.01, 10]`.
fn default_softmax_grid() -> Vec<f64> {
    (0..50).map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 49.0)).collect()
}

fn candidates(cfg: &Config, kind: ProjectionKind) -> Result<Vec<f64>> {
    match (cfg.parse_opt::<f64>("temperature")?, cfg.number_list("temperatures")?) {
        (Some(_), Some(_)) => Err(validation("set either temperature or temperatures, not both")),
        (Some(t), None) => Ok(vec![t]),
        (None, Some(list)) if list.is_empty() => Err(validation("temperatures lists no values")),
        (None, Some(list)) => Ok(list),
        (None, None) => Ok(match kind {
            ProjectionKind::Softmax => default_softmax_grid(),
            ProjectionKind::Sparsegen => default_sparsegen_grid(),
        }),
    }
}

#[allow(clippy::type_complexity)]
fn points_and_models(cfg: &Config, post: &Posterior, table: &Table) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let x = table.numeric(&post.labels.covariates, false)?;
    let fhat = archive_model_values(cfg, post, table)?;
    Ok((x, fhat))
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    cfg.check_keys("project", &[COMMON_KEYS, KEYS, MODEL_KEYS])?;
    let kind = match cfg.get("kind").unwrap_or("sparsegen") {
        "sparsegen" => ProjectionKind::Sparsegen,
        "softmax" => ProjectionKind::Softmax,
        other => return Err(validation(format!("kind must be softmax or sparsegen, got {other:?}"))),
    };
    let grid = candidates(cfg, kind)?;
    for &t in &grid {
        kind.check_temperature(t).map_err(proj_err)?;
    }
    let post = load_archive(cfg)?;
    if post.mode == Mode::Regression {
        return Err(validation("project needs a mixing archive; this archive has mode regression"));
    }
    let table = Table::read(&cfg.path("query")?)?;
    let (x, fhat) = points_and_models(cfg, &post, &table)?;
    let weights = weights_at(&post, &x).map_err(from_mixing)?;

    let temperature = if grid.len() == 1 {
        grid[0]
    } else {
        let (vx, vf, vw);
        let (sel_w, sel_f) = if cfg.has("validation") {
            let vt = Table::read(&cfg.path("validation")?)?;
            (vx, vf) = points_and_models(cfg, &post, &vt)?;
            vw = weights_at(&post, &vx).map_err(from_mixing)?;
            (&vw, &vf)
        } else {
            (&weights, &fhat)
        };
        let (t, objectives) = select_temperature(&grid, sel_w, sel_f, kind).map_err(proj_err)?;
        let rows: Vec<Vec<f64>> = grid.iter().zip(&objectives).map(|(t, o)| vec![*t, *o]).collect();
        let meta = ctx.meta("project", vec![("kind".into(), kind.name().into())]);
        write_table(&ctx.out_path(OBJECTIVES), &meta, &["temperature".into(), "objective".into()], &rows)?;
        t
    };

    let projected = project_draws(&weights, kind, temperature).map_err(proj_err)?;
    let delta = discrepancy(&weights, &projected, &fhat).map_err(proj_err)?;
    let sums = sum_of_weights(&weights);
    let u: Vec<_> = (0..weights.k()).map(|l| projected.draws.summaries(l)).collect();

    let mut headers = post.labels.covariates.clone();
    for m in &post.labels.models {
        headers.extend(summary_headers(&format!("u_{m}")));
    }
    headers.extend(summary_headers("delta"));
    headers.extend(summary_headers("w_sum"));
    let rows: Vec<Vec<f64>> = (0..x.len())
        .map(|i| {
            let mut row = x[i].clone();
            for ul in &u {
                row.extend(summary_cells(&ul[i]));
            }
            row.extend(summary_cells(&delta.summaries[i]));
            row.extend(summary_cells(&sums[i]));
            row
        })
        .collect();
    let meta = ctx.meta(
        "project",
        vec![("kind".into(), kind.name().into()), ("temperature".into(), temperature.to_string())],
    );
    write_table(&ctx.out_path(OUTPUT), &meta, &headers, &rows)
}
