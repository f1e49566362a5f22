//! Sample-splitting estimates of `E L(P, P̂ⁿ)`, log–log rate fits and
//! sample-size prediction.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::empirical::{self, EmpiricalSample};
use crate::error::{LabError, Result};
use crate::gauss::{gauss_w2, GaussianModel};
use crate::rng;
use crate::stats::{self, Summary};

/// A pseudometric between equal-size empirical samples.
pub trait SampleDistance: Sync {
    fn distance(&self, a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64>;
    fn name(&self) -> &'static str;
}

/// W̃₂: W2 between the Gaussian moment fits of the two samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentW2;

impl SampleDistance for MomentW2 {
    fn distance(&self, a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
        gauss_w2(
            &empirical::sample_moments(a)?,
            &empirical::sample_moments(b)?,
        )
    }

    fn name(&self) -> &'static str {
        "moment-w2"
    }
}

/// Exact W2 between the empirical laws via optimal assignment.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssignmentW2;

impl SampleDistance for AssignmentW2 {
    fn distance(&self, a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
        empirical::w2_assignment(a, b)
    }

    fn name(&self) -> &'static str {
        "assignment-w2"
    }
}

/// Where the `2n` points come from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Sample(&'a EmpiricalSample),
    Gaussian(&'a GaussianModel),
}

/// Two disjoint halves of size `n`: a seeded shuffle, then the first `n` and next `n` rows.
pub fn split_halves(
    source: Source<'_>,
    n: usize,
    seed: u64,
) -> Result<(EmpiricalSample, EmpiricalSample)> {
    if n == 0 {
        return Err(LabError::InvalidInput("half size must be positive".into()));
    }
    let mut r = rng::stream(seed, 0);
    let pool = match source {
        Source::Sample(s) => {
            if s.n() < 2 * n {
                return Err(LabError::InsufficientSamples {
                    needed: 2 * n,
                    available: s.n(),
                });
            }
            s.clone()
        }
        Source::Gaussian(m) => EmpiricalSample::draw_gaussian(m, 2 * n, &mut r)?,
    };
    let mut idx: Vec<usize> = (0..pool.n()).collect();
    idx.shuffle(&mut r);
    Ok((pool.select(&idx[..n])?, pool.select(&idx[n..2 * n])?))
}

/// `L(P̂₁, P̂₂)` as a proxy for `E L(P, P̂ⁿ)`.
pub fn matching_proxy(
    source: Source<'_>,
    n: usize,
    distance: &dyn SampleDistance,
    seed: u64,
) -> Result<f64> {
    let (a, b) = split_halves(source, n, seed)?;
    distance.distance(&a, &b)
}

/// `W̃₂(P, P̂ⁿ)` for `n` fresh draws from a known Gaussian.
pub fn direct_moment_w2(truth: &GaussianModel, n: usize, seed: u64) -> Result<f64> {
    let mut r = rng::stream(seed, 0);
    let s = EmpiricalSample::draw_gaussian(truth, n, &mut r)?;
    gauss_w2(truth, &empirical::sample_moments(&s)?)
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub summary: Summary,
}

/// Replicate outputs of one `(n, d)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValues<T> {
    pub n: usize,
    pub d: usize,
    pub values: Vec<T>,
}

/// Evaluates `f(n, d, replicate_seed)` for every `(n, d, rep)`, in parallel.
/// Replicate seeds are derived from `(seed, cell index, rep)`, so results do
/// not depend on scheduling. Cells come back ordered by `(d, n)`; a failure is
/// reported as [`LabError::CellFailed`] naming the cell and replicate.
pub fn run_cells<T, F>(
    ns: &[usize],
    ds: &[usize],
    reps: usize,
    seed: u64,
    f: F,
) -> Result<Vec<CellValues<T>>>
where
    T: Send,
    F: Fn(usize, usize, u64) -> Result<T> + Sync,
{
    if ns.is_empty() || ds.is_empty() || reps == 0 {
        return Err(LabError::DegenerateGrid("empty grid".into()));
    }
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &d in ds {
        for &n in ns {
            cells.push((n, d));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let mut values: Vec<T> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let (n, d) = cells[c];
            let s = rng::derive_seed(rng::derive_seed(seed, c as u64), r as u64);
            f(n, d, s).map_err(|e| LabError::CellFailed {
                cell: format!("n = {n}, d = {d}, rep = {r}"),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(cells.len());
    for &(n, d) in cells.iter().rev() {
        let rest = values.split_off(values.len() - reps);
        out.push(CellValues { n, d, values: rest });
    }
    out.reverse();
    Ok(out)
}

/// [`run_cells`] for scalar outputs, with per-cell summaries.
pub fn run_grid<F>(
    ns: &[usize],
    ds: &[usize],
    reps: usize,
    seed: u64,
    f: F,
) -> Result<Vec<GridCell>>
where
    F: Fn(usize, usize, u64) -> Result<f64> + Sync,
{
    Ok(run_cells(ns, ds, reps, seed, f)?
        .into_iter()
        .map(|c| GridCell {
            n: c.n,
            d: c.d,
            summary: Summary::of(&c.values),
            values: c.values,
        })
        .collect())
}

/// Matching-proxy grid with sources `N(0, I_d)`.
pub fn matching_grid(
    ns: &[usize],
    ds: &[usize],
    reps: usize,
    distance: &dyn SampleDistance,
    seed: u64,
) -> Result<Vec<GridCell>> {
    run_grid(ns, ds, reps, seed, |n, d, s| {
        let model = GaussianModel::standard(d);
        matching_proxy(Source::Gaussian(&model), n, distance, s)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `value = C·d^β·n^α`.
    PowerLaw,
    /// `value = C·d^β·n^{γ/d}`.
    DimScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub d: usize,
    pub median: f64,
    pub iqr: f64,
}

impl From<&GridCell> for GridPoint {
    fn from(c: &GridCell) -> Self {
        GridPoint {
            n: c.n,
            d: c.d,
            median: c.summary.median,
            iqr: c.summary.iqr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    /// `α` for the power law, `γ` for the dimension-scaled law.
    pub n_exponent: f64,
    /// `β`; absent when the grid has a single dimension.
    pub d_exponent: Option<f64>,
    /// `log C`.
    pub intercept: f64,
    pub r_squared: f64,
    pub grid: Vec<GridPoint>,
}

impl RateFit {
    /// Fitted value at `(n, d)`.
    pub fn predict(&self, n: f64, d: usize) -> f64 {
        let df = d as f64;
        let beta = self.d_exponent.unwrap_or(0.0);
        let slope = match self.model {
            RateModel::PowerLaw => self.n_exponent,
            RateModel::DimScaled => self.n_exponent / df,
        };
        (self.intercept + beta * df.ln() + slope * n.ln()).exp()
    }
}

/// Least squares on log medians; aggregation over replicates is by median.
pub fn fit_rate(grid: &[GridPoint], model: RateModel) -> Result<RateFit> {
    if grid.is_empty() {
        return Err(LabError::DegenerateGrid("empty grid".into()));
    }
    let mut ds: Vec<usize> = grid.iter().map(|g| g.d).collect();
    ds.sort_unstable();
    ds.dedup();
    for &d in &ds {
        let mut ns: Vec<usize> = grid.iter().filter(|g| g.d == d).map(|g| g.n).collect();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < 3 {
            return Err(LabError::DegenerateGrid(format!(
                "d = {d} has {} distinct n values, need 3",
                ns.len()
            )));
        }
    }
    if let Some(bad) = grid
        .iter()
        .find(|g| !(g.median > 0.0) || !g.median.is_finite())
    {
        return Err(LabError::DegenerateGrid(format!(
            "non-positive median {} at n = {}, d = {}",
            bad.median, bad.n, bad.d
        )));
    }
    let with_d = ds.len() > 1;
    let cols = if with_d { 3 } else { 2 };
    let mut x = DMatrix::zeros(grid.len(), cols);
    let y = DVector::from_iterator(grid.len(), grid.iter().map(|g| g.median.ln()));
    for (i, g) in grid.iter().enumerate() {
        let (n, d) = (g.n as f64, g.d as f64);
        let rn = match model {
            RateModel::PowerLaw => n.ln(),
            RateModel::DimScaled => n.ln() / d,
        };
        x[(i, 0)] = 1.0;
        if with_d {
            x[(i, 1)] = d.ln();
            x[(i, 2)] = rn;
        } else {
            x[(i, 1)] = rn;
        }
    }
    let fit = stats::least_squares(&x, &y)?;
    let c = &fit.coefficients;
    Ok(RateFit {
        model,
        n_exponent: c[cols - 1],
        d_exponent: if with_d { Some(c[1]) } else { None },
        intercept: c[0],
        r_squared: fit.r_squared,
        grid: grid.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePrediction {
    /// Power of two at or above the inverted fit, floored at the smallest grid `n`.
    pub n_required: u64,
    /// Unrounded solution of `fit(n, d) = ε`.
    pub n_exact: f64,
    /// True when `n_required` exceeds the largest grid `n`.
    pub extrapolated: bool,
}

/// Inverts a decreasing rate fit for the `n` achieving error `target_eps` at dimension `d`.
pub fn predict_sample_size(fit: &RateFit, target_eps: f64, d: usize) -> Result<SamplePrediction> {
    if !(target_eps > 0.0) || d == 0 {
        return Err(LabError::InvalidInput(
            "need target_eps > 0 and d >= 1".into(),
        ));
    }
    if fit.n_exponent >= 0.0 {
        return Err(LabError::NonDecreasingFit(fit.n_exponent));
    }
    let df = d as f64;
    let slope = match fit.model {
        RateModel::PowerLaw => fit.n_exponent,
        RateModel::DimScaled => fit.n_exponent / df,
    };
    let beta = fit.d_exponent.unwrap_or(0.0);
    let log_n = (target_eps.ln() - fit.intercept - beta * df.ln()) / slope;
    let n_exact = log_n.exp();
    let n_min = fit.grid.iter().map(|g| g.n).min().unwrap_or(1) as u64;
    let n_max = fit.grid.iter().map(|g| g.n).max().unwrap_or(1) as u64;
    let n_required = if n_exact <= n_min as f64 {
        n_min
    } else {
        let k = (n_exact.log2() - 1e-9).ceil();
        if k >= 63.0 {
            u64::MAX
        } else {
            (1u64 << k as u32).max(n_min)
        }
    };
    Ok(SamplePrediction {
        n_required,
        n_exact,
        extrapolated: n_required > n_max,
    })
}

/// Median nearest-neighbour distance grid for `N(0, I_d)` samples.
pub fn nn_grid(
    ns: &[usize],
    ds: &[usize],
    reps: usize,
    probes: usize,
    seed: u64,
) -> Result<Vec<GridCell>> {
    run_grid(ns, ds, reps, seed, |n, d, s| {
        let mut r = rng::stream(s, 0);
        let sample = EmpiricalSample::standard_normal(n, d, &mut r)?;
        empirical::nn_distance_mean(&sample, probes, rng::derive_seed(s, 1))
    })
}
