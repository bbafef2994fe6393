use super::{load_grids, Context, COMMON_KEYS, MODEL_KEYS};
use crate::config::{Config, HYPER_KEYS};
use crate::error::{from_sampler, ingestion, runtime, validation, CliError};
use crate::ingest::Table;
use crate::output::write_table;
use rpbart::data::Scaling;
use rpbart::semivariogram::{
    empirical_semivariogram, equal_width_bins, fit_squared_exponential, mixing_nu_bar, nu_bar, EmulatorKernelSpec,
    Integration, KernelRegistry, PriorProcess, SemivariogramCurve, SemivariogramError,
};

type Result<T> = std::result::Result<T, CliError>;

const KEYS: &[&str] = &[
    "mode",
    "p",
    "y_min",
    "y_max",
    "sigma2",
    "lower",
    "upper",
    "distances",
    "max_distance",
    "n_distances",
    "points",
    "directions",
    "tree_draws",
    "data",
    "covariates",
    "response",
    "bins",
    "kernels",
    "kernel_means",
];

pub const OUTPUT: &str = "semivariogram.csv";

fn semi_err(e: SemivariogramError) -> CliError {
    match e {
        SemivariogramError::Prior(s) => from_sampler(s),
        SemivariogramError::Kernel(_) | SemivariogramError::Distances | SemivariogramError::Dimension { .. } => {
            validation(e.to_string())
        }
        other => runtime(other),
    }
}

fn domain(cfg: &Config) -> Result<Scaling> {
    let p: Option<usize> = cfg.parse_opt("p")?;
    let (lower, upper) = match (cfg.number_list("lower")?, cfg.number_list("upper")?) {
        (Some(lo), Some(hi)) => (lo, hi),
        (None, None) => {
            let p = p.ok_or_else(|| validation("set p, or lower and upper"))?;
            (vec![0.0; p], vec![1.0; p])
        }
        _ => return Err(validation("lower and upper must be given together")),
    };
    if let Some(p) = p {
        if lower.len() != p {
            return Err(validation(format!("lower/upper have {} entries but p = {p}", lower.len())));
        }
    }
    Scaling::new(lower, upper).map_err(|e| validation(format!("lower/upper: {e}")))
}

fn diagonal(lower: &[f64], upper: &[f64]) -> f64 {
    lower.iter().zip(upper).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
}

/// Explicit `distances`, or `n_distances` equal steps up to `max_distance`
/// (default: half the domain diagonal).
fn distances(cfg: &Config, domain: &Scaling) -> Result<Vec<f64>> {
    if let Some(d) = cfg.number_list("distances")? {
        return Ok(d);
    }
    let max = cfg.parse_or("max_distance", 0.5 * diagonal(domain.lower(), domain.upper()))?;
    let n: usize = cfg.parse_or("n_distances", 20)?;
    if n == 0 || !(max > 0.0) {
        return Err(validation("n_distances and max_distance must be positive"));
    }
    Ok((1..=n).map(|i| max * i as f64 / n as f64).collect())
}

fn integration(cfg: &Config) -> Result<Integration> {
    let d = Integration::default();
    Ok(Integration {
        points: cfg.parse_or("points", d.points)?,
        directions: cfg.parse_or("directions", d.directions)?,
        draws: cfg.parse_or("tree_draws", d.draws)?,
    })
}

/// `kernels = family p1 p2; family p1` with `kernel_means`, or one fitted
/// squared-exponential kernel per simulator grid.
fn kernels(cfg: &Config) -> Result<Vec<EmulatorKernelSpec>> {
    if cfg.has("model_grids") {
        if cfg.has("kernels") {
            return Err(validation("set either kernels or model_grids, not both"));
        }
        let bins: usize = cfg.parse_or("bins", 20)?;
        return load_grids(cfg)?
            .iter()
            .map(|g| {
                let (a0, a1) = (g.axis(0), g.axis(1));
                let mut points = Vec::with_capacity(a0.len() * a1.len());
                let mut values = Vec::with_capacity(a0.len() * a1.len());
                for (i, &u) in a0.iter().enumerate() {
                    for (j, &v) in a1.iter().enumerate() {
                        points.push(vec![u, v]);
                        values.push(g.value(i, j));
                    }
                }
                let span = 0.5 * diagonal(&[a0[0], a1[0]], &[a0[a0.len() - 1], a1[a1.len() - 1]]);
                fit_squared_exponential(&points, &values, &equal_width_bins(span, bins))
                    .map_err(|e| ingestion(format!("grid {}: {e}", g.id())))
            })
            .collect();
    }
    let text = cfg
        .get("kernels")
        .ok_or_else(|| validation("mode = mixing needs kernels (with kernel_means) or model_grids"))?;
    let registry = KernelRegistry::with_builtins();
    let specs: Vec<&str> = text.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    let means = cfg.number_list("kernel_means")?.unwrap_or_else(|| vec![0.0; specs.len()]);
    if means.len() != specs.len() {
        return Err(validation(format!("kernel_means has {} entries for {} kernels", means.len(), specs.len())));
    }
    specs
        .iter()
        .zip(means)
        .map(|(spec, mean)| {
            let mut parts = spec.split_whitespace();
            let family = parts.next().expect("nonempty spec");
            let params = parts
                .map(|s| s.parse::<f64>().map_err(|_| validation(format!("kernel {spec:?}: cannot parse {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let kernel = registry
                .build(family, &params)
                .map_err(|e| validation(format!("kernel {spec:?}: {e}; known families: {}", registry.names().join(", "))))?;
            Ok(EmulatorKernelSpec { mean, kernel })
        })
        .collect()
}

pub fn run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    cfg.check_keys("semivariogram", &[COMMON_KEYS, KEYS, MODEL_KEYS, HYPER_KEYS])?;
    let mode = cfg.get("mode").unwrap_or("theoretical");
    let (curve, third) = match mode {
        "theoretical" | "mixing" => {
            let hyper = cfg.hyperparameters()?;
            let domain = domain(cfg)?;
            let distances = distances(cfg, &domain)?;
            let sigma2: f64 = cfg.parse_or("sigma2", 0.0)?;
            if !(sigma2 >= 0.0) {
                return Err(validation("sigma2 must be nonnegative"));
            }
            let settings = integration(cfg)?;
            let p = domain.dims();
            let curve = if mode == "theoretical" {
                let range = (cfg.parse_required::<f64>("y_min")?, cfg.parse_required::<f64>("y_max")?);
                let prior = PriorProcess::regression(&hyper, p, range).map_err(semi_err)?;
                nu_bar(&prior, sigma2, &domain, &distances, settings, ctx.seed).map_err(semi_err)?
            } else {
                let kernels = kernels(cfg)?;
                let prior = PriorProcess::mixing(&hyper, p, kernels.len()).map_err(semi_err)?;
                mixing_nu_bar(&prior, sigma2, &kernels, &domain, &distances, settings, ctx.seed).map_err(semi_err)?
            };
            (curve, "se")
        }
        "empirical" => (empirical(cfg)?, "pairs"),
        other => return Err(validation(format!("mode must be theoretical, empirical or mixing, got {other:?}"))),
    };
    let headers = ["distance", "value", third].map(String::from);
    let rows: Vec<Vec<f64>> = (0..curve.distances.len())
        .map(|i| vec![curve.distances[i], curve.values[i], curve.uncertainty[i]])
        .collect();
    let meta = ctx.meta("semivariogram", vec![("mode".into(), mode.into())]);
    write_table(&ctx.out_path(OUTPUT), &meta, &headers, &rows)
}

fn empirical(cfg: &Config) -> Result<SemivariogramCurve> {
    let covariates = cfg
        .list("covariates")
        .filter(|c| !c.is_empty())
        .ok_or_else(|| validation("missing required key \"covariates\""))?;
    let table = Table::read(&cfg.path("data")?)?;
    let x = table.numeric(&covariates, false)?;
    let y = table.column(cfg.required("response")?, false)?;
    let max = match cfg.parse_opt::<f64>("max_distance")? {
        Some(m) => m,
        None => {
            let lower: Vec<f64> = (0..covariates.len()).map(|j| x.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
            let upper: Vec<f64> = (0..covariates.len()).map(|j| x.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
            0.5 * diagonal(&lower, &upper)
        }
    };
    let bins: usize = cfg.parse_or("bins", 20)?;
    if bins == 0 || !(max > 0.0) {
        return Err(validation("bins and max_distance must be positive"));
    }
    let (curve, _) = empirical_semivariogram(&x, &y, &equal_width_bins(max, bins)).map_err(|e| match e {
        SemivariogramError::TooFewPoints => ingestion(format!("{}: {e}", table.source)),
        other => semi_err(other),
    })?;
    Ok(curve)
}
