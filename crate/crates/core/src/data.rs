//! Training data validation and the affine map onto the unit hypercube.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("no observations")]
    Empty,
    #[error("row {row}: expected {expected} values, got {got}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {col}: non-finite value")]
    NonFinite { row: usize, col: usize },
    #[error("response has {got} entries for {expected} rows")]
    ResponseLength { expected: usize, got: usize },
    #[error("response row {0} is not finite")]
    NonFiniteResponse(usize),
    #[error("model outputs missing or non-finite at rows {0:?}")]
    MissingModelValues(Vec<usize>),
    #[error("dimension {dim}: lower bound {lower} is not below upper bound {upper}")]
    Bounds { dim: usize, lower: f64, upper: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Per-dimension affine map `x -> (x - lower) / (upper - lower)`.
///
/// Points outside `[lower, upper]` map outside `[0, 1]` and are clamped,
/// which routes them exactly like the nearest boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Scaling {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DataError> {
        if lower.len() != upper.len() {
            return Err(DataError::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (dim, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(DataError::Bounds { dim, lower: lo, upper: hi });
            }
        }
        Ok(Scaling { lower, upper })
    }

    /// Bounds from the observed range of each column. A constant column gets
    /// a unit-width window centred on its value.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let p = check_rows(rows)?;
        let mut lower = vec![f64::INFINITY; p];
        let mut upper = vec![f64::NEG_INFINITY; p];
        for row in rows {
            for (v, &x) in row.iter().enumerate() {
                lower[v] = lower[v].min(x);
                upper[v] = upper[v].max(x);
            }
        }
        for v in 0..p {
            if lower[v] == upper[v] {
                lower[v] -= 0.5;
                upper[v] += 0.5;
            }
        }
        Scaling::new(lower, upper)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DataError> {
        if x.len() != self.dims() {
            return Err(DataError::Dimension {
                expected: self.dims(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect())
    }

    pub fn invert(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| lo + v * (hi - lo))
            .collect()
    }
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, DataError> {
    let p = rows.first().ok_or(DataError::Empty)?.len();
    for (row, values) in rows.iter().enumerate() {
        if values.len() != p {
            return Err(DataError::RowLength {
                row,
                expected: p,
                got: values.len(),
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { row, col });
        }
    }
    Ok(p)
}

/// Validated training set with inputs mapped to `[0, 1]^p`.
#[derive(Debug, Clone)]
pub struct TrainingData {
    scaling: Scaling,
    x: Vec<f64>,
    y: Vec<f64>,
    fhat: Option<Vec<f64>>,
    n: usize,
    p: usize,
    k: usize,
}

impl TrainingData {
    /// `fhat`, when present, holds one row of `K` model outputs per
    /// observation. `scaling` defaults to the observed input ranges.
    pub fn new(
        x_rows: &[Vec<f64>],
        y: Vec<f64>,
        fhat: Option<&[Vec<f64>]>,
        scaling: Option<Scaling>,
    ) -> Result<Self, DataError> {
        let p = check_rows(x_rows)?;
        let n = x_rows.len();
        if y.len() != n {
            return Err(DataError::ResponseLength { expected: n, got: y.len() });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteResponse(i));
        }
        let scaling = match scaling {
            Some(s) => s,
            None => Scaling::from_rows(x_rows)?,
        };
        let mut x = Vec::with_capacity(n * p);
        for row in x_rows {
            x.extend(scaling.apply(row)?);
        }
        let (fhat, k) = match fhat {
            None => (None, 1),
            Some(rows) => {
                if rows.len() != n {
                    return Err(DataError::ResponseLength { expected: n, got: rows.len() });
                }
                let k = rows.first().map_or(0, |r| r.len());
                let bad: Vec<usize> = rows
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| k == 0 || r.len() != k || r.iter().any(|v| !v.is_finite()))
                    .map(|(i, _)| i)
                    .collect();
                if !bad.is_empty() {
                    return Err(DataError::MissingModelValues(bad));
                }
                (Some(rows.concat()), k)
            }
        };
        Ok(TrainingData { scaling, x, y, fhat, n, p, k })
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of mixed models; 1 for regression.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_mixing(&self) -> bool {
        self.fhat.is_some()
    }

    /// Scaled input row `i`.
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Model outputs at observation `i`, if mixing.
    pub fn fhat(&self, i: usize) -> Option<&[f64]> {
        self.fhat.as_ref().map(|f| &f[i * self.k..(i + 1) * self.k])
    }

    pub(crate) fn y_mut(&mut self) -> &mut Vec<f64> {
        &mut self.y
    }
}
