use super::{load_archive, model_values, Context, COMMON_KEYS, MODEL_KEYS};
use crate::config::Config;
use crate::error::{from_mixing, from_sampler, validation, CliError};
use crate::ingest::Table;
use crate::output::write_table;
use rpbart::mixing::{mixed_prediction, sum_of_weights, weights_at};
use rpbart::sampler::{Mode, Posterior};

type Result<T> = std::result::Result<T, CliError>;

const KEYS: &[&str] = &["archive", "query"];

pub const OUTPUT: &str = "predictions.csv";

/// Simulator outputs at the query rows, ordered like the archive's models.
pub fn archive_model_values(cfg: &Config, post: &Posterior, table: &Table) -> Result<Vec<Vec<f64>>> {
    let (ids, fhat) = model_values(cfg, table, &post.labels.covariates)?
        .ok_or_else(|| validation("a mixing archive needs model_columns or model_grids for the query points"))?;
    let order = post
        .labels
        .models
        .iter()
        .map(|m| {
            ids.iter()
                .position(|id| id == m)
                .ok_or_else(|| validation(format!("model {m:?} from the archive is not among the supplied models {ids:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if ids.len() != order.len() {
        return Err(validation(format!(
            "supplied models {ids:?} do not match the archive's {:?}",
            post.labels.models
        )));
    }
    Ok(fhat.iter().map(|row| order.iter().map(|&j| row[j]).collect()).collect())
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    cfg.check_keys("predict", &[COMMON_KEYS, KEYS, MODEL_KEYS])?;
    let post = load_archive(cfg)?;
    let table = Table::read(&cfg.path("query")?)?;
    let covariates = post.labels.covariates.clone();
    let x = table.numeric(&covariates, false)?;

    let mut headers = covariates.clone();
    headers.extend(["mean", "lower95", "upper95"].map(String::from));
    let rows: Vec<Vec<f64>> = match post.mode {
        Mode::Regression => {
            if cfg.has("model_columns") || cfg.has("model_grids") {
                return Err(validation("model outputs are only used with a mixing archive"));
            }
            let pred = post.predict(&x).map_err(from_sampler)?;
            x.iter()
                .zip(&pred.summaries)
                .map(|(xi, s)| {
                    let mut row = xi.clone();
                    row.extend([s.mean, s.lower, s.upper]);
                    row
                })
                .collect()
        }
        Mode::Mixing { .. } => {
            let fhat = archive_model_values(cfg, &post, &table)?;
            let w = weights_at(&post, &x).map_err(from_mixing)?;
            let pred = mixed_prediction(&w, &fhat).map_err(from_mixing)?;
            let sums = sum_of_weights(&w);
            headers.extend(post.labels.models.iter().map(|m| format!("w_{m}")));
            headers.push("w_sum".to_string());
            let means: Vec<Vec<f64>> = (0..w.k()).map(|l| w.draws.summaries(l).iter().map(|s| s.mean).collect()).collect();
            (0..x.len())
                .map(|i| {
                    let s = &pred.summaries[i];
                    let mut row = x[i].clone();
                    row.extend([s.mean, s.lower, s.upper]);
                    row.extend(means.iter().map(|m| m[i]));
                    row.push(sums[i].mean);
                    row
                })
                .collect()
        }
    };
    write_table(&ctx.out_path(OUTPUT), &ctx.meta("predict", vec![]), &headers, &rows)
}
