//! Wasserstein-2 machinery for empirical (discrete) distributions.

pub mod assignment;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::gauss::GaussianModel;
use crate::rng::{self, LabRng};
use crate::stats::{self, compensated_sum};

/// Upper bound on the exact assignment size.
pub const MAX_ASSIGNMENT: usize = 4096;

/// `n` points in `R^d` with uniform weights, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl EmpiricalSample {
    pub fn from_row_major(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(LabError::InvalidInput(format!(
                "empirical sample needs n, d >= 1 (got n = {n}, d = {d})"
            )));
        }
        if data.len() != n * d {
            return Err(LabError::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LabError::InvalidInput("non-finite sample entry".into()));
        }
        Ok(EmpiricalSample { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(LabError::InvalidInput("ragged rows".into()));
        }
        Self::from_row_major(rows.concat(), n, d)
    }

    /// One-dimensional sample from a slice of values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::from_row_major(values.to_vec(), values.len(), 1)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let data = (0..n)
            .flat_map(|i| (0..d).map(move |j| m[(i, j)]))
            .collect();
        Self::from_row_major(data, n, d)
    }

    /// `n` i.i.d. draws from a Gaussian model.
    pub fn draw_gaussian(model: &GaussianModel, n: usize, rng: &mut LabRng) -> Result<Self> {
        let d = model.dim();
        let dec = crate::gauss::SpectralDecomp::of_psd(model.cov())?;
        let factor = dec.reconstruct_with(f64::sqrt);
        let mut data = Vec::with_capacity(n * d);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            for zi in z.iter_mut() {
                *zi = rng::standard_normal(rng);
            }
            for r in 0..d {
                let mut acc = model.mean()[r];
                for c in 0..d {
                    acc += factor[(r, c)] * z[c];
                }
                data.push(acc);
            }
        }
        Self::from_row_major(data, n, d)
    }

    /// `n` i.i.d. draws from `N(0, I_d)`.
    pub fn standard_normal(n: usize, d: usize, rng: &mut LabRng) -> Result<Self> {
        Self::from_row_major(rng::standard_normal_matrix(rng, n, d), n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_row_major(data, idx.len(), self.d)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_row_major(self.data.iter().map(|x| x * s).collect(), self.n, self.d)
    }

    /// Copy with the column means subtracted.
    pub fn centered(&self) -> Self {
        let mean = self.mean();
        let data = self
            .rows()
            .flat_map(|r| r.iter().zip(mean.iter()).map(|(x, m)| x - m))
            .collect();
        EmpiricalSample {
            data,
            n: self.n,
            d: self.d,
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |j, _| {
            compensated_sum(self.rows().map(|r| r[j])) / self.n as f64
        })
    }

    /// Appends rows of another sample of the same dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.d != self.d {
            return Err(LabError::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::from_row_major(data, self.n + other.n, self.d)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_pair(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<()> {
    if a.d != b.d {
        return Err(LabError::DimensionMismatch {
            expected: a.d,
            found: b.d,
        });
    }
    if a.n != b.n {
        return Err(LabError::SizeMismatch {
            left: a.n,
            right: b.n,
        });
    }
    if a.n > MAX_ASSIGNMENT {
        return Err(LabError::TooLarge {
            size: a.n,
            limit: MAX_ASSIGNMENT,
        });
    }
    Ok(())
}

/// Exact W2 between two equal-size uniform samples via optimal assignment.
pub fn w2_assignment(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.n;
    let mut cost = vec![0.0; n * n];
    for (i, ra) in a.rows().enumerate() {
        for (j, rb) in b.rows().enumerate() {
            cost[i * n + j] = squared_distance(ra, rb);
        }
    }
    let sol = assignment::solve(&cost, n)?;
    // Sorting the matched costs makes the sum independent of argument order.
    let mut matched: Vec<f64> = (0..n).map(|i| cost[i * n + sol.row_to_col[i]]).collect();
    matched.sort_by(f64::total_cmp);
    Ok((compensated_sum(matched) / n as f64).max(0.0).sqrt())
}

/// A finitely supported law on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist1D {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDist1D {
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(LabError::InvalidInput(
                "atoms and probabilities must be non-empty and of equal length".into(),
            ));
        }
        if atoms.windows(2).any(|w| !(w[0] < w[1])) || atoms.iter().any(|a| !a.is_finite()) {
            return Err(LabError::InvalidInput(
                "atoms must be finite and strictly increasing".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(LabError::InvalidInput("negative probability".into()));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(DiscreteDist1D { atoms, probs })
    }

    /// Uniform weights on the given values; duplicates are merged.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(LabError::InvalidInput("empty support".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / sorted.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            if atoms.last() == Some(&x) {
                *counts.last_mut().expect("non-empty") += 1;
            } else {
                atoms.push(x);
                counts.push(1);
            }
        }
        let probs = counts.iter().map(|&c| c as f64 * w).collect();
        Self::new(atoms, probs)
    }

    pub fn from_sample(sample: &EmpiricalSample) -> Result<Self> {
        if sample.d() != 1 {
            return Err(LabError::DimensionNot1D(sample.d()));
        }
        Self::uniform(sample.as_row_major())
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cumulative probabilities with the last entry pinned to exactly 1.
    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut comp = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|&p| {
                let y = p - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
                acc
            })
            .collect();
        *out.last_mut().expect("non-empty support") = 1.0;
        out
    }

    pub fn second_moment(&self) -> f64 {
        compensated_sum(self.atoms.iter().zip(&self.probs).map(|(a, p)| a * a * p))
    }
}

/// Exact W2 on the line through the quantile coupling, integrated over the
/// common refinement of the two CDF breakpoint sets.
pub fn w2_quantile_1d(a: &DiscreteDist1D, b: &DiscreteDist1D) -> f64 {
    let ca = a.cumulative();
    let cb = b.cumulative();
    let mut levels: Vec<f64> = ca.iter().chain(cb.iter()).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let quantile = |cum: &[f64], atoms: &[f64], u: f64| {
        let k = cum.partition_point(|&c| c < u).min(atoms.len() - 1);
        atoms[k]
    };
    let mut prev = 0.0;
    let mut terms = Vec::with_capacity(levels.len());
    for &level in &levels {
        if level > prev {
            let mid = 0.5 * (prev + level);
            let gap = quantile(&ca, &a.atoms, mid) - quantile(&cb, &b.atoms, mid);
            terms.push((level - prev) * gap * gap);
            prev = level;
        }
    }
    compensated_sum(terms).max(0.0).sqrt()
}

/// `w2_quantile_1d` for one-dimensional empirical samples.
pub fn w2_quantile_samples(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    let da = DiscreteDist1D::from_sample(a)?;
    let db = DiscreteDist1D::from_sample(b)?;
    Ok(w2_quantile_1d(&da, &db))
}

/// Resamples `m` rows uniformly with replacement.
pub fn resample(sample: &EmpiricalSample, m: usize, rng: &mut LabRng) -> Result<EmpiricalSample> {
    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..sample.n())).collect();
    sample.select(&idx)
}

fn coupling_rho_once(sample: &EmpiricalSample, m: usize, seed: u64, rep: u64) -> Result<f64> {
    let d = sample.d();
    let mut rng = rng::stream(seed, rep);
    let z = rng::standard_normal_matrix(&mut rng, m, d);
    let x = if m == sample.n() {
        sample.clone()
    } else {
        resample(sample, m, &mut rng)?
    };
    let mut cost = vec![0.0; m * m];
    for i in 0..m {
        let zi = &z[i * d..(i + 1) * d];
        for (j, xj) in x.rows().enumerate() {
            cost[i * m + j] = -zi.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let sol = assignment::solve(&cost, m)?;
    Ok(-sol.total_cost / m as f64)
}

/// Estimates `ρ = sup_π E[Zᵀ X̂]` between `N(0, I_d)` and the empirical law:
/// `m` Gaussian draws matched to the (resampled) support, averaged over `reps`.
pub fn gauss_coupling_rho(
    sample: &EmpiricalSample,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if m == 0 || reps == 0 {
        return Err(LabError::InvalidInput("m and reps must be positive".into()));
    }
    if m > MAX_ASSIGNMENT {
        return Err(LabError::TooLarge {
            size: m,
            limit: MAX_ASSIGNMENT,
        });
    }
    let values = (0..reps as u64)
        .into_par_iter()
        .map(|rep| coupling_rho_once(sample, m, seed, rep))
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats::mean(&values))
}

/// Mean and standard error of the nearest-neighbour distance from fresh
/// Gaussian probes to the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestNeighbor {
    pub mean: f64,
    pub std_err: f64,
}

pub fn nn_distance_stats(
    sample: &EmpiricalSample,
    probes: usize,
    seed: u64,
) -> Result<NearestNeighbor> {
    if probes == 0 {
        return Err(LabError::InvalidInput("probes must be positive".into()));
    }
    let d = sample.d();
    let mut rng = rng::stream(seed, 0);
    let z = rng::standard_normal_matrix(&mut rng, probes, d);
    let dists: Vec<f64> = z
        .par_chunks_exact(d)
        .map(|p| {
            sample
                .rows()
                .map(|x| squared_distance(p, x))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let std_err = stats::std_dev(&dists) / (probes as f64).sqrt();
    Ok(NearestNeighbor {
        mean: stats::mean(&dists),
        std_err,
    })
}

/// Monte-Carlo `E_{X∼N(0,I)} min_i ‖X - X_i‖`.
pub fn nn_distance_mean(sample: &EmpiricalSample, probes: usize, seed: u64) -> Result<f64> {
    nn_distance_stats(sample, probes, seed).map(|s| s.mean)
}

/// Empirical mean and `1/n` covariance as a Gaussian model.
pub fn sample_moments(sample: &EmpiricalSample) -> Result<GaussianModel> {
    let n = sample.n();
    let d = sample.d();
    let mean = sample.mean();
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for r in sample.rows() {
        for j in 0..d {
            centered[j] = r[j] - mean[j];
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    GaussianModel::new(mean, cov)
}
