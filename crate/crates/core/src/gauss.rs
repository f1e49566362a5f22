//! Gaussian models, symmetric square roots, rank-r truncation and closed-form
//! distances between Gaussians.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::function::erf;

use crate::error::{LabError, Result};

/// Relative tolerance used for symmetry checks and the PSD eigenvalue clamp.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Absolute floor for squared W2 values lost to cancellation.
pub const W2_CLAMP: f64 = 1e-9;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Inverse of the upper tail: returns `x` with `1 - Φ(x) = p`.
pub fn normal_sf_inverse(p: f64) -> f64 {
    SQRT_2 * erf::erfc_inv(2.0 * p)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Checks symmetry within `1e-10 · max|entry|` and returns `(S + Sᵀ)/2`.
pub fn symmetrize_checked(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(LabError::DimensionMismatch {
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    let tolerance = PSD_TOLERANCE * max_abs(s);
    let mut asymmetry = 0.0_f64;
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asymmetry > tolerance {
        return Err(LabError::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    Ok(symmetrize(s))
}

pub(crate) fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: DVector<f64>,
    /// Columns are the orthonormal eigenvectors, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    /// Decomposes a symmetric matrix. No PSD requirement.
    pub fn of_symmetric(s: &DMatrix<f64>) -> Result<Self> {
        let sym = symmetrize_checked(s)?;
        Ok(Self::of_symmetrized(sym))
    }

    fn of_symmetrized(sym: DMatrix<f64>) -> Self {
        let n = sym.nrows();
        if n == 0 {
            return SpectralDecomp {
                eigenvalues: DVector::zeros(0),
                eigenvectors: DMatrix::zeros(0, 0),
            };
        }
        if is_diagonal(&sym) {
            // Exact path: avoids rotation round-off on already diagonal input.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sym[(b, b)].total_cmp(&sym[(a, a)]).then(a.cmp(&b)));
            let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| sym[(i, i)]));
            let mut eigenvectors = DMatrix::zeros(n, n);
            for (col, &i) in order.iter().enumerate() {
                eigenvectors[(i, col)] = 1.0;
            }
            return SpectralDecomp {
                eigenvalues,
                eigenvectors,
            };
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(Ordering::Equal)
        });
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(i));
        }
        SpectralDecomp {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Decomposes a PSD matrix, clamping eigenvalues in `[-1e-10 λ_max, 0)` to zero.
    pub fn of_psd(s: &DMatrix<f64>) -> Result<Self> {
        let mut dec = Self::of_symmetric(s)?;
        dec.clamp_psd()?;
        Ok(dec)
    }

    fn clamp_psd(&mut self) -> Result<()> {
        let lmax = self.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
        let threshold = -PSD_TOLERANCE * lmax;
        for lam in self.eigenvalues.iter_mut() {
            if *lam < 0.0 {
                if *lam < threshold {
                    return Err(LabError::NegativeEigenvalue {
                        eigenvalue: *lam,
                        threshold,
                    });
                }
                *lam = 0.0;
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q · diag(f(λ)) · Qᵀ`.
    pub fn reconstruct_with<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..n {
            let w = f(self.eigenvalues[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        symmetrize(&(scaled * self.eigenvectors.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|x| x)
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Symmetric PSD square root `R` with `R · R = S`.
pub fn matrix_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dec = SpectralDecomp::of_psd(s)?;
    Ok(dec.reconstruct_with(f64::sqrt))
}

/// A Gaussian law `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianModel {
    /// Validates dimensions, symmetry and PSD-ness. Small negative eigenvalues
    /// are clamped to zero and the covariance rebuilt from the clamped spectrum.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(LabError::DimensionMismatch {
                expected: mean.len(),
                found: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(LabError::InvalidInput(
                "non-finite Gaussian parameter".into(),
            ));
        }
        let sym = symmetrize_checked(&cov)?;
        let mut dec = SpectralDecomp::of_symmetrized(sym.clone());
        let needs_clamp = dec.eigenvalues.iter().any(|&l| l < 0.0);
        let cov = if needs_clamp {
            dec.clamp_psd()?;
            dec.reconstruct()
        } else {
            sym
        };
        Ok(GaussianModel { mean, cov })
    }

    /// `N(mean, I)`.
    pub fn isotropic(mean: DVector<f64>) -> Self {
        let d = mean.len();
        GaussianModel {
            mean,
            cov: DMatrix::identity(d, d),
        }
    }

    pub fn standard(d: usize) -> Self {
        Self::isotropic(DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn has_identity_cov(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                (self.cov[(i, j)] - target).abs() <= 1e-12
            })
        })
    }

    /// Lexicographic order on (mean, cov) used to make binary distances
    /// bit-exactly symmetric.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.mean
            .iter()
            .chain(self.cov.iter())
            .zip(other.mean.iter().chain(other.cov.iter()))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

fn check_same_dim(p: &GaussianModel, q: &GaussianModel) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(LabError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

/// Squared W2 between two Gaussians via the trace formula.
pub fn gauss_w2_squared(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    check_same_dim(p, q)?;
    let (p, q) = if p.canonical_cmp(q) == Ordering::Greater {
        (q, p)
    } else {
        (p, q)
    };
    if p == q {
        return Ok(0.0);
    }
    let mean_term = (p.mean() - q.mean()).norm_squared();
    let root_p = matrix_sqrt(p.cov())?;
    let inner = symmetrize(&(&root_p * q.cov() * &root_p));
    let cross = SpectralDecomp::of_psd(&inner)?
        .eigenvalues
        .iter()
        .map(|&l| l.sqrt())
        .sum::<f64>();
    let traces = p.cov().trace() + q.cov().trace();
    let w2sq = mean_term + traces - 2.0 * cross;
    if w2sq < 0.0 {
        let floor = W2_CLAMP * traces.max(1.0);
        if w2sq < -floor {
            return Err(LabError::Numerical(format!(
                "squared W2 {w2sq:e} below cancellation floor {floor:e}"
            )));
        }
        return Ok(0.0);
    }
    Ok(w2sq)
}

/// W2 distance between Gaussians (the Bures–Wasserstein metric).
pub fn gauss_w2(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    gauss_w2_squared(p, q).map(f64::sqrt)
}

/// Best rank-r PSD approximation in Frobenius norm.
#[derive(Debug, Clone)]
pub struct RankTruncation {
    pub cov: DMatrix<f64>,
    /// `‖S^{1/2} - Σ_r^{1/2}‖_F = sqrt(Σ_{i>r} λ_i)`.
    pub pca_error: f64,
    /// `d × r` matrix of leading eigenvectors.
    pub components: DMatrix<f64>,
    /// Leading `r` eigenvalues, descending.
    pub variances: Vec<f64>,
}

pub fn pca_truncate(s: &DMatrix<f64>, r: usize) -> Result<RankTruncation> {
    let d = s.nrows();
    if r == 0 || r > d {
        return Err(LabError::RankOutOfRange { rank: r, dim: d });
    }
    let dec = SpectralDecomp::of_psd(s)?;
    let components = dec.eigenvectors.columns(0, r).into_owned();
    let variances: Vec<f64> = dec.eigenvalues.iter().take(r).copied().collect();
    let cov = if r == d {
        symmetrize(s)
    } else {
        let mut scaled = components.clone();
        for (j, &lam) in variances.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        symmetrize(&(scaled * components.transpose()))
    };
    let tail: f64 = dec.eigenvalues.iter().skip(r).sum();
    Ok(RankTruncation {
        cov,
        pca_error: tail.max(0.0).sqrt(),
        components,
        variances,
    })
}

fn identity_pair_gap(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    check_same_dim(p, q)?;
    if !p.has_identity_cov() || !q.has_identity_cov() {
        return Err(LabError::NonIdentityCovariance);
    }
    Ok((p.mean() - q.mean()).norm())
}

/// Total variation between `N(μ_p, I)` and `N(μ_q, I)`: `2Φ(‖Δμ‖/2) - 1`.
pub fn gauss_tv(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    let gap = identity_pair_gap(p, q)?;
    Ok(libm::erf(gap / (2.0 * SQRT_2)))
}

/// Tukey halfspace distance between identity-covariance Gaussians: `Φ(‖Δμ‖) - 1/2`.
pub fn gauss_tukey(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    let gap = identity_pair_gap(p, q)?;
    Ok(0.5 * libm::erf(gap / SQRT_2))
}
