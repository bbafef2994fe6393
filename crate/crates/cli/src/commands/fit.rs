use super::{model_values, Context, COMMON_KEYS, MODEL_KEYS};
use crate::config::HYPER_KEYS;
use crate::error::{from_mixing, from_sampler, ingestion, runtime, validation, CliError};
use crate::ingest::Table;
use rpbart::archive::write_archive;
use rpbart::data::{Scaling, TrainingData};
use rpbart::mixing::fit_mix;
use rpbart::sampler::{run_mcmc, Mode, Posterior};
use rpbart::stats::summarize;
use std::fmt::Write as _;
use std::io::Write as _;

const KEYS: &[&str] = &["data", "covariates", "response", "mode", "lower", "upper"];

pub const ARCHIVE: &str = "posterior.rpbart";
pub const REPORT: &str = "fit_report.txt";

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    cfg.check_keys("fit", &[COMMON_KEYS, KEYS, MODEL_KEYS, HYPER_KEYS])?;
    let hyper = cfg.hyperparameters()?;
    let mode = cfg.get("mode").unwrap_or("regression");
    if mode != "regression" && mode != "mixing" {
        return Err(validation(format!("mode must be regression or mixing, got {mode:?}")));
    }
    let covariates = cfg
        .list("covariates")
        .filter(|c| !c.is_empty())
        .ok_or_else(|| validation("missing required key \"covariates\""))?;
    let response = cfg.required("response")?.to_string();
    let scaling = match (cfg.number_list("lower")?, cfg.number_list("upper")?) {
        (Some(lo), Some(hi)) => Some(Scaling::new(lo, hi).map_err(|e| validation(format!("lower/upper: {e}")))?),
        (None, None) => None,
        _ => return Err(validation("lower and upper must be given together")),
    };

    let table = Table::read(&cfg.path("data")?)?;
    let x = table.numeric(&covariates, false)?;
    let y = table.column(&response, false)?;
    let models = model_values(cfg, &table, &covariates)?;

    let mut post = match (mode, models) {
        ("regression", None) => {
            let data = TrainingData::new(&x, y, None, scaling).map_err(|e| ingestion(format!("{}: {e}", table.source)))?;
            run_mcmc(&data, &hyper, ctx.seed).map_err(from_sampler)?
        }
        ("regression", Some(_)) => return Err(validation("model outputs are only used with mode = mixing")),
        (_, None) => return Err(validation("mode = mixing needs model_columns or model_grids")),
        (_, Some((ids, fhat))) => fit_mix(&x, y, &fhat, &ids, &hyper, scaling, ctx.seed).map_err(from_mixing)?,
    };
    post.labels.covariates = covariates;

    let path = ctx.out_path(ARCHIVE);
    let io = |e: std::io::Error| runtime(format!("cannot write {}: {e}", path.display()));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    write_archive(&post, &mut out).map_err(runtime)?;
    out.flush().map_err(io)?;

    let report_path = ctx.out_path(REPORT);
    std::fs::write(&report_path, report(&post, ctx))
        .map_err(|e| runtime(format!("cannot write {}: {e}", report_path.display())))?;
    Ok(())
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Regression => "regression",
        Mode::Mixing { .. } => "mixing",
    }
}

fn report(post: &Posterior, ctx: &Context) -> String {
    let mv = &post.diagnostics.moves;
    let sigma2: Vec<f64> = post.draws.iter().map(|d| d.sigma2).collect();
    let trace = &post.diagnostics.sigma2_trace;
    let mut s = String::new();
    let _ = writeln!(s, "# rpbart fit report config_hash={}", ctx.hash);
    let _ = writeln!(s, "mode = {}", mode_name(post.mode));
    let _ = writeln!(s, "seed = {}", post.seed);
    let _ = writeln!(s, "trees = {}", post.hyper.m);
    let _ = writeln!(s, "retained_draws = {}", post.draws.len());
    let _ = writeln!(s, "birth_acceptance = {:.4} ({} of {})", mv.birth_rate(), mv.birth_accepted, mv.birth_proposed);
    let _ = writeln!(s, "death_acceptance = {:.4} ({} of {})", mv.death_rate(), mv.death_accepted, mv.death_proposed);
    let _ = writeln!(s, "births_without_valid_split = {}", mv.no_valid_move);
    let _ = writeln!(s, "bandwidth_acceptance = {:.4} ({} of {})", mv.gamma_rate(), mv.gamma_accepted, mv.gamma_proposed);
    if !sigma2.is_empty() {
        let sm = summarize(&sigma2);
        let _ = writeln!(s, "sigma2_mean = {}", sm.mean);
        let _ = writeln!(s, "sigma2_lower95 = {}", sm.lower);
        let _ = writeln!(s, "sigma2_upper95 = {}", sm.upper);
    }
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        let _ = writeln!(s, "sigma2_trace_first = {first}");
        let _ = writeln!(s, "sigma2_trace_last = {last}");
        let _ = writeln!(s, "sigma2_trace_length = {}", trace.len());
    }
    let _ = writeln!(s, "runtime_seconds = {:.3}", post.diagnostics.seconds);
    s
}
