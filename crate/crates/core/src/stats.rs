//! Small statistics helpers shared by the experiment modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|x| (x - m) * (x - m)));
    (ss / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (the usual "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median with first and third quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Ordinary least squares fit of `y ≈ X β`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

/// Solves least squares through an SVD; fails when the design is rank deficient.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(LabError::DegenerateGrid(format!(
            "{rows} observations for {cols} coefficients"
        )));
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(LabError::DegenerateGrid(
            "regressors are collinear".to_string(),
        ));
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|e| LabError::Numerical(e.to_string()))?;
    let fitted = design * &beta;
    let ybar = y.mean();
    let ss_res = compensated_sum((y - &fitted).iter().map(|r| r * r));
    let ss_tot = compensated_sum(y.iter().map(|v| (v - ybar) * (v - ybar)));
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LeastSquares {
        coefficients: beta.iter().copied().collect(),
        r_squared,
    })
}
