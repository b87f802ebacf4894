//! Rank and location statistics used to compare simulated and observed
//! district totals: Spearman correlation, paired t-test, Wilcoxon
//! signed-rank test. All p-values are two-sided.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    2.0 * dist.cdf(-t.abs())
}

/// Spearman rank correlation with average ranks for ties.
///
/// The p-value uses the t approximation `t = rho * sqrt((n-2)/(1-rho^2))`
/// with n-2 degrees of freedom. A perfect correlation (|rho| = 1) reports
/// p = 0, standing for "below 1e-15". Needs at least 3 pairs and
/// non-constant inputs.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Metric(format!(
            "spearman needs two equal-length vectors of at least 3 values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(Error::Metric("rank correlation undefined on a constant vector".into()));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    // Exact branches keep perfect (anti-)alignment free of rounding noise.
    let top = xs.len() as f64 + 1.0;
    let rho = if rx == ry {
        1.0
    } else if rx.iter().zip(&ry).all(|(&a, &b)| a + b == top) {
        -1.0
    } else {
        pearson(&rx, &ry).clamp(-1.0, 1.0)
    };
    let n = xs.len() as f64;
    let denom = 1.0 - rho * rho;
    let p = if denom < 1e-15 {
        0.0
    } else {
        t_two_sided_p(rho * ((n - 2.0) / denom).sqrt(), n - 2.0)
    };
    Ok((rho, p))
}

/// Paired Student's t-test on differences `ys[i] - xs[i]`.
/// Returns (t, degrees of freedom, p). The sample standard deviation uses
/// the n-1 denominator. Identical differences have zero variance and are an
/// error.
pub fn paired_t(xs: &[f64], ys: &[f64]) -> Result<(f64, usize, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Metric(format!(
            "paired t-test needs two equal-length vectors of at least 2 values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    let d: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - x).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Metric("paired t-test undefined: differences have zero variance".into()));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = n - 1;
    Ok((t, df, t_two_sided_p(t, df as f64)))
}

/// Wilcoxon signed-rank test on differences `ys[i] - xs[i]`.
///
/// Zero differences are dropped; |d| is ranked with average ranks; W is the
/// sum of ranks of positive differences. The z statistic uses the normal
/// approximation with the tie correction `sum(t^3 - t)/48` and no
/// continuity correction. Errors when every difference is zero.
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Metric("wilcoxon needs two equal-length vectors".into()));
    }
    let d: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - x).filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::Metric("wilcoxon undefined: all differences are zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w: f64 = d.iter().zip(&ranks).filter(|(&v, _)| v > 0.0).map(|(_, &r)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    // Tie groups over |d|.
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    debug_assert!(var > 0.0);
    let z = (w - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let p = 2.0 * normal.cdf(-z.abs());
    Ok((w, z, p.min(1.0)))
}
