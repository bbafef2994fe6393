//! Line-oriented text archive of a fitted posterior.
//!
//! ```text
//! rpbart-archive 1
//! mode mixing 2            (or `mode regression`)
//! p 2
//! lower -3.14 -3.14
//! upper 3.14 3.14
//! covariate x1             (one line per input column)
//! model f1                 (one line per mixed model)
//! hyper m 10               (one line per hyperparameter)
//! seed 7
//! response_shift 0
//! tau 0.158
//! prior_mean 0.05 0.05
//! draws 1000
//! draw 0 0.0123            (index, sigma^2)
//! tree 0.07 3              (gamma, node count)
//! S 0 57                   (split: variable, cutpoint index)
//! L 0.1 -0.2               (leaf: K values)
//! L 0.3 0.0
//! end
//! ```
//!
//! Trees are stored in preorder. Floats use the shortest representation that
//! parses back to the same bits.

use crate::data::Scaling;
use crate::sampler::{
    Diagnostics, DrawTree, Hyperparameters, Labels, Mode, Posterior, PosteriorDraw,
};
use crate::tree::{CutpointGrid, SplitRule, Tree};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rpbart-archive";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unsupported archive version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("label {0:?} contains a line break")]
    Label(String),
}

type Result<T> = std::result::Result<T, ArchiveError>;

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn hyper_fields(h: &Hyperparameters) -> Vec<(&'static str, String)> {
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
    vec![
        ("m", h.m.to_string()),
        ("k", h.k.to_string()),
        ("alpha", h.alpha.to_string()),
        ("beta", h.beta.to_string()),
        ("alpha1", h.alpha1.to_string()),
        ("alpha2", h.alpha2.to_string()),
        ("q", h.q.to_string()),
        ("nu", h.nu.to_string()),
        ("lambda", opt(h.lambda)),
        ("sigma2_hat", opt(h.sigma2_hat)),
        ("n_cut", h.n_cut.to_string()),
        ("burn_in", h.schedule.burn_in.to_string()),
        ("draws", h.schedule.draws.to_string()),
        ("thin", h.schedule.thin.to_string()),
        ("adaptation", h.schedule.adaptation.to_string()),
    ]
}

pub fn write_archive<W: Write>(post: &Posterior, out: &mut W) -> Result<()> {
    let k = post.dim();
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    match post.mode {
        Mode::Regression => writeln!(out, "mode regression")?,
        Mode::Mixing { models } => writeln!(out, "mode mixing {models}")?,
    }
    writeln!(out, "p {}", post.p())?;
    writeln!(out, "lower {}", join(post.scaling.lower()))?;
    writeln!(out, "upper {}", join(post.scaling.upper()))?;
    for (tag, names) in [("covariate", &post.labels.covariates), ("model", &post.labels.models)] {
        for name in names {
            if name.contains(['\n', '\r']) {
                return Err(ArchiveError::Label(name.clone()));
            }
            writeln!(out, "{tag} {name}")?;
        }
    }
    for (key, value) in hyper_fields(&post.hyper) {
        writeln!(out, "hyper {key} {value}")?;
    }
    writeln!(out, "seed {}", post.seed)?;
    writeln!(out, "response_shift {}", post.response_shift)?;
    writeln!(out, "tau {}", post.tau)?;
    writeln!(out, "prior_mean {}", join(&post.prior_mean))?;
    writeln!(out, "draws {}", post.draws.len())?;
    for draw in &post.draws {
        writeln!(out, "draw {} {}", draw.index, draw.sigma2)?;
        for t in &draw.trees {
            let records = t.tree.to_preorder();
            writeln!(out, "tree {} {}", t.gamma, records.len())?;
            let mut leaf = 0;
            for rec in records {
                match rec {
                    Some(rule) => writeln!(out, "S {} {}", rule.var, rule.cut)?,
                    None => {
                        writeln!(out, "L {}", join(&t.leaf_values[leaf * k..(leaf + 1) * k]))?;
                        leaf += 1;
                    }
                }
            }
        }
    }
    writeln!(out, "end")?;
    Ok(())
}

pub fn archive_to_string(post: &Posterior) -> Result<String> {
    let mut buf = Vec::new();
    write_archive(post, &mut buf)?;
    Ok(String::from_utf8(buf).expect("archive text is UTF-8"))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, reason: impl Into<String>) -> ArchiveError {
        ArchiveError::Parse {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of archive")),
        }
    }

    /// Next line, which must start with `tag`; returns the remainder.
    fn tagged(&mut self, tag: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((t, rest)) if t == tag => Ok(rest.to_string()),
            _ if line == tag => Ok(String::new()),
            _ => Err(self.err(format!("expected `{tag}`, found {line:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad {what} {s:?}")))
    }

    fn floats(&self, s: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
        let v = s
            .split_whitespace()
            .map(|t| self.parse::<f64>(t, what))
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != expected {
            return Err(self.err(format!("{what}: expected {expected} values, got {}", v.len())));
        }
        Ok(v)
    }
}

pub fn read_archive<R: BufRead>(input: R) -> Result<Posterior> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let version = lines.tagged(MAGIC)?;
    if version != FORMAT_VERSION.to_string() {
        return Err(ArchiveError::Version { found: version });
    }
    let mode_line = lines.tagged("mode")?;
    let mode = match mode_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["regression"] => Mode::Regression,
        ["mixing", k] => Mode::Mixing {
            models: lines.parse(k, "model count")?,
        },
        _ => return Err(lines.err(format!("bad mode {mode_line:?}"))),
    };
    let k = mode.dim();
    let p: usize = {
        let s = lines.tagged("p")?;
        lines.parse(&s, "dimension")?
    };
    let lower = {
        let s = lines.tagged("lower")?;
        lines.floats(&s, p, "lower bounds")?
    };
    let upper = {
        let s = lines.tagged("upper")?;
        lines.floats(&s, p, "upper bounds")?
    };
    let scaling = Scaling::new(lower, upper).map_err(|e| lines.err(e.to_string()))?;
    let mut labels = Labels {
        covariates: Vec::new(),
        models: Vec::new(),
    };
    for _ in 0..p {
        labels.covariates.push(lines.tagged("covariate")?);
    }
    if let Mode::Mixing { models } = mode {
        for _ in 0..models {
            labels.models.push(lines.tagged("model")?);
        }
    }
    let mut hyper = Hyperparameters::default();
    for (key, _) in hyper_fields(&hyper.clone()) {
        let rest = lines.tagged("hyper")?;
        let value = match rest.split_once(' ') {
            Some((kname, v)) if kname == key => v.to_string(),
            _ => return Err(lines.err(format!("expected hyperparameter {key}, found {rest:?}"))),
        };
        let opt = |v: &str| -> Result<Option<f64>> {
            if v == "none" {
                Ok(None)
            } else {
                lines.parse(v, key).map(Some)
            }
        };
        match key {
            "m" => hyper.m = lines.parse(&value, key)?,
            "k" => hyper.k = lines.parse(&value, key)?,
            "alpha" => hyper.alpha = lines.parse(&value, key)?,
            "beta" => hyper.beta = lines.parse(&value, key)?,
            "alpha1" => hyper.alpha1 = lines.parse(&value, key)?,
            "alpha2" => hyper.alpha2 = lines.parse(&value, key)?,
            "q" => hyper.q = lines.parse(&value, key)?,
            "nu" => hyper.nu = lines.parse(&value, key)?,
            "lambda" => hyper.lambda = opt(&value)?,
            "sigma2_hat" => hyper.sigma2_hat = opt(&value)?,
            "n_cut" => hyper.n_cut = lines.parse(&value, key)?,
            "burn_in" => hyper.schedule.burn_in = lines.parse(&value, key)?,
            "draws" => hyper.schedule.draws = lines.parse(&value, key)?,
            "thin" => hyper.schedule.thin = lines.parse(&value, key)?,
            "adaptation" => hyper.schedule.adaptation = lines.parse(&value, key)?,
            _ => unreachable!("hyper_fields lists only known keys"),
        }
    }
    hyper.validate().map_err(|e| lines.err(e.to_string()))?;
    let grid = CutpointGrid::uniform(p, hyper.n_cut).map_err(|e| lines.err(e.to_string()))?;
    let seed = {
        let s = lines.tagged("seed")?;
        lines.parse(&s, "seed")?
    };
    let response_shift = {
        let s = lines.tagged("response_shift")?;
        lines.parse(&s, "response shift")?
    };
    let tau = {
        let s = lines.tagged("tau")?;
        lines.parse(&s, "tau")?
    };
    let prior_mean = {
        let s = lines.tagged("prior_mean")?;
        lines.floats(&s, k, "prior mean")?
    };
    let n_draws: usize = {
        let s = lines.tagged("draws")?;
        lines.parse(&s, "draw count")?
    };
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let header = lines.tagged("draw")?;
        let (index, sigma2) = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [i, s] => (lines.parse(i, "draw index")?, lines.parse(s, "sigma2")?),
            _ => return Err(lines.err(format!("bad draw header {header:?}"))),
        };
        let mut trees = Vec::with_capacity(hyper.m);
        for _ in 0..hyper.m {
            let header = lines.tagged("tree")?;
            let (gamma, count): (f64, usize) = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
                [g, c] => (lines.parse(g, "bandwidth")?, lines.parse(c, "node count")?),
                _ => return Err(lines.err(format!("bad tree header {header:?}"))),
            };
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(lines.err(format!("bandwidth {gamma} outside (0, 1)")));
            }
            let mut records = Vec::with_capacity(count);
            let mut leaf_values = Vec::new();
            for _ in 0..count {
                let line = lines.next_line()?;
                match line.split_once(' ') {
                    Some(("S", rest)) => match rest.split_whitespace().collect::<Vec<_>>().as_slice() {
                        [v, c] => records.push(Some(SplitRule {
                            var: lines.parse(v, "split variable")?,
                            cut: lines.parse(c, "cutpoint index")?,
                        })),
                        _ => return Err(lines.err(format!("bad split record {line:?}"))),
                    },
                    Some(("L", rest)) => {
                        records.push(None);
                        leaf_values.extend(lines.floats(rest, k, "leaf values")?);
                    }
                    _ => return Err(lines.err(format!("bad node record {line:?}"))),
                }
            }
            let tree = Tree::from_preorder(&records).map_err(|e| lines.err(e.to_string()))?;
            tree.validate(&grid).map_err(|e| lines.err(e.to_string()))?;
            trees.push(DrawTree { tree, gamma, leaf_values });
        }
        draws.push(PosteriorDraw { index, sigma2, trees });
    }
    lines.tagged("end")?;
    Ok(Posterior {
        mode,
        scaling,
        grid,
        hyper,
        tau,
        prior_mean,
        response_shift,
        seed,
        labels,
        draws,
        diagnostics: Diagnostics::default(),
    })
}

pub fn archive_from_str(text: &str) -> Result<Posterior> {
    read_archive(text.as_bytes())
}
