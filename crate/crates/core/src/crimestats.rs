//! Per-cell crime trends and the criminal power field.
//!
//! Each cell gets a least-squares polynomial fitted to its yearly counts
//! (degree capped at 2 and at the number of observations minus one). The
//! extrapolated count for the target year, clamped at zero, is the cell's
//! predicted attractiveness; the fit's RMSE quantifies how unstable that
//! cell's history is. A per-cell noise factor alpha in [-1, 1] mixes the two
//! into the dimensionless power field that scales offending probability.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geodata::CellYearSeries;

/// Fitted yearly trend of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTrend {
    /// Predicted count for the target year, clamped at zero.
    pub prediction: f64,
    /// Root-mean-square of the fit residuals.
    pub error: f64,
}

/// Least-squares polynomial fit via Householder QR. Returns coefficients in
/// ascending degree order. Requires `xs.len() >= degree + 1`.
fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let n = xs.len();
    let k = degree + 1;
    debug_assert!(n >= k, "need at least {k} points for degree {degree}");

    // Row-major n x k Vandermonde design matrix.
    let mut a = vec![0.0; n * k];
    for i in 0..n {
        let mut p = 1.0;
        for j in 0..k {
            a[i * k + j] = p;
            p *= xs[i];
        }
    }
    let mut y = ys.to_vec();

    for j in 0..k {
        let norm = (j..n).map(|i| a[i * k + j] * a[i * k + j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j * k + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[i * k + j]).collect();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        if vtv == 0.0 {
            continue;
        }
        for col in j..k {
            let dot: f64 = (j..n).map(|i| v[i - j] * a[i * k + col]).sum();
            let f = 2.0 * dot / vtv;
            for i in j..n {
                a[i * k + col] -= f * v[i - j];
            }
        }
        let dot: f64 = (j..n).map(|i| v[i - j] * y[i]).sum();
        let f = 2.0 * dot / vtv;
        for i in j..n {
            y[i] -= f * v[i - j];
        }
        a[j * k + j] = alpha;
        for i in (j + 1)..n {
            a[i * k + j] = 0.0;
        }
    }

    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = y[j];
        for m in (j + 1)..k {
            s -= a[j * k + m] * beta[m];
        }
        beta[j] = if a[j * k + j] != 0.0 { s / a[j * k + j] } else { 0.0 };
    }
    beta
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Fits one cell's yearly counts and extrapolates to `target_year`.
///
/// Years must be strictly ascending and aligned with `counts`; at least one
/// observation is required. Fitting is done in shifted coordinates
/// `x = year - years[0]` to keep the design matrix well conditioned. With n
/// observations the polynomial degree is `min(2, n - 1)`, so one point gives
/// a constant and two give a line. A negative extrapolation clamps to zero.
pub fn fit_cell_trend(counts: &[u32], years: &[i32], target_year: i32) -> CellTrend {
    assert_eq!(counts.len(), years.len(), "counts and years must align");
    assert!(!counts.is_empty(), "need at least one observation");
    debug_assert!(years.windows(2).all(|w| w[0] < w[1]), "years must be strictly ascending");

    let x0 = years[0];
    let xs: Vec<f64> = years.iter().map(|&y| (y - x0) as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let degree = 2.min(counts.len() - 1);
    let coeffs = polyfit(&xs, &ys, degree);

    let prediction = poly_eval(&coeffs, (target_year - x0) as f64).max(0.0);
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - poly_eval(&coeffs, x);
            r * r
        })
        .sum();
    let error = (sse / counts.len() as f64).sqrt();
    CellTrend { prediction, error }
}

/// Fits every cell of a yearly series on the years strictly before
/// `target_year`, extrapolating to it. Errors when no training year exists.
pub fn fit_trends(series: &CellYearSeries, target_year: i32) -> Result<Vec<CellTrend>> {
    let years: Vec<i32> = series.years().filter(|&y| y < target_year).collect();
    if years.is_empty() {
        return Err(Error::Config(format!(
            "no observed years before target year {target_year} (data covers {}..={})",
            series.year_start, series.year_end
        )));
    }
    let n_train = years.len();
    let mut trends = Vec::with_capacity(series.n_cells);
    for cell in 0..series.n_cells {
        let counts = &series.counts_for(cell)[..n_train];
        trends.push(fit_cell_trend(counts, &years, target_year));
    }
    Ok(trends)
}

/// Per-cell noise factors, each in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaField(Vec<f64>);

impl AlphaField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < -1.0 || *v > 1.0) {
            return Err(Error::Config("alpha values must lie in [-1, 1]".into()));
        }
        Ok(AlphaField(values))
    }

    pub fn zeros(n: usize) -> Self {
        AlphaField(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws a fresh alpha value for every cell, uniform on [-1, 1], in cell
/// (row-major) order. Consumes exactly `n_cells` draws from `rng`.
pub fn redraw_alpha(n_cells: usize, rng: &mut impl Rng) -> AlphaField {
    AlphaField((0..n_cells).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

/// Turns fitted trends and the current alpha field into criminal power.
///
/// Per cell the raw attractiveness is `prediction + alpha * error`; the
/// power is `max(raw, 1)` divided by the city-wide mean of raw values, so
/// the field is dimensionless and averages near one. A mean that is not
/// meaningfully positive (below 1e-9, e.g. a city with no crime history)
/// cannot be normalized and is an error.
pub fn compute_criminal_power(trends: &[CellTrend], alpha: &AlphaField) -> Result<Vec<f64>> {
    assert_eq!(trends.len(), alpha.len(), "trends and alpha must align");
    let raw: Vec<f64> = trends
        .iter()
        .zip(alpha.values())
        .map(|(t, &a)| t.prediction + a * t.error.abs())
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if !(mean > 1e-9) {
        return Err(Error::DegenerateCrimeField(mean));
    }
    Ok(raw.into_iter().map(|r| r.max(1.0) / mean).collect())
}
