//! C ABI over `ganlab`.
//!
//! Every fallible function returns a [`GanlabStatus`] and writes results
//! through out-pointers. On failure a message is available from
//! [`ganlab_last_error`] on the calling thread. Matrices are dense row-major
//! `double` arrays. Handles are opaque and must be released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use ganlab::dynamics::{self, FlowConfig, NaiveFlowState, SharedFlowState};
use ganlab::empirical::{self, EmpiricalSample};
use ganlab::gauss::{self, GaussianModel};
use ganlab::w2_gan;
use ganlab::LabError;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPositiveSemidefinite = 4,
    NotSymmetric = 5,
    TooLarge = 6,
    Singular = 7,
    Blowup = 8,
    Numerical = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &LabError) -> GanlabStatus {
    match e {
        LabError::NotSymmetric { .. } => GanlabStatus::NotSymmetric,
        LabError::NegativeEigenvalue { .. } => GanlabStatus::NotPositiveSemidefinite,
        LabError::DimensionMismatch { .. } | LabError::SizeMismatch { .. } => {
            GanlabStatus::DimensionMismatch
        }
        LabError::TooLarge { .. } => GanlabStatus::TooLarge,
        LabError::SingularA(_) => GanlabStatus::Singular,
        LabError::StepBlowup { .. } => GanlabStatus::Blowup,
        LabError::Numerical(_) | LabError::OptimizerFailed(_) => GanlabStatus::Numerical,
        LabError::CellFailed { source, .. } => status_of(source),
        _ => GanlabStatus::InvalidArgument,
    }
}

struct Fail(GanlabStatus, String);

impl From<LabError> for Fail {
    fn from(e: LabError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GanlabStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GanlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GanlabStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GanlabStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn store<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    *p = v;
    Ok(())
}

unsafe fn square(d: usize, p: *const f64, what: &str) -> Result<DMatrix<f64>, Fail> {
    if d == 0 {
        return Err(Fail(
            GanlabStatus::InvalidArgument,
            "dimension must be positive".into(),
        ));
    }
    Ok(DMatrix::from_row_slice(d, d, input(p, d * d, what)?))
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..d {
            out[i * d + j] = m[(i, j)];
        }
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ganlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ganlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque Gaussian law `N(mean, cov)`.
pub struct GanlabGaussian {
    inner: GaussianModel,
}

/// Creates `N(mean, cov)` from a length-`dim` mean and a `dim × dim` covariance.
///
/// # Safety
/// `mean` and `cov` must point to `dim` and `dim * dim` readable doubles and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ganlab_gaussian_new(
    dim: usize,
    mean: *const f64,
    cov: *const f64,
    out: *mut *mut GanlabGaussian,
) -> GanlabStatus {
    guard(|| {
        let cov = square(dim, cov, "cov")?;
        let mean = DVector::from_column_slice(input(mean, dim, "mean")?);
        let model = GaussianModel::new(mean, cov)?;
        store(
            out,
            Box::into_raw(Box::new(GanlabGaussian { inner: model })),
            "out",
        )
    })
}

/// # Safety
/// `g` must come from [`ganlab_gaussian_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ganlab_gaussian_free(g: *mut GanlabGaussian) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Dimension of the law, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ganlab_gaussian_dim(g: *const GanlabGaussian) -> usize {
    g.as_ref().map_or(0, |g| g.inner.dim())
}

unsafe fn pair<'a>(
    p: *const GanlabGaussian,
    q: *const GanlabGaussian,
) -> Result<(&'a GaussianModel, &'a GaussianModel), Fail> {
    let p = p.as_ref().ok_or_else(|| null("p"))?;
    let q = q.as_ref().ok_or_else(|| null("q"))?;
    Ok((&p.inner, &q.inner))
}

/// Closed-form W2 distance.
///
/// # Safety
/// `p`, `q` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_gauss_w2(
    p: *const GanlabGaussian,
    q: *const GanlabGaussian,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let (p, q) = pair(p, q)?;
        store(out, gauss::gauss_w2(p, q)?, "out")
    })
}

/// Total variation between laws sharing the identity covariance.
///
/// # Safety
/// As [`ganlab_gauss_w2`].
#[no_mangle]
pub unsafe extern "C" fn ganlab_gauss_tv(
    p: *const GanlabGaussian,
    q: *const GanlabGaussian,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let (p, q) = pair(p, q)?;
        store(out, gauss::gauss_tv(p, q)?, "out")
    })
}

/// Halfspace (Tukey) distance between laws sharing the identity covariance.
///
/// # Safety
/// As [`ganlab_gauss_w2`].
#[no_mangle]
pub unsafe extern "C" fn ganlab_gauss_tukey(
    p: *const GanlabGaussian,
    q: *const GanlabGaussian,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let (p, q) = pair(p, q)?;
        store(out, gauss::gauss_tukey(p, q)?, "out")
    })
}

/// PSD square root of a symmetric `d × d` matrix.
///
/// # Safety
/// `s` and `out` must each hold `d * d` doubles.
#[no_mangle]
pub unsafe extern "C" fn ganlab_matrix_sqrt(
    d: usize,
    s: *const f64,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let root = gauss::matrix_sqrt(&square(d, s, "s")?)?;
        write_matrix(&root, output(out, d * d, "out")?);
        Ok(())
    })
}

/// Rank-`r` spectral truncation of a PSD matrix, with the Frobenius
/// error of the square roots.
///
/// # Safety
/// `s` and `out_cov` must hold `d * d` doubles; `out_error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_pca_truncate(
    d: usize,
    s: *const f64,
    r: usize,
    out_cov: *mut f64,
    out_error: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let t = gauss::pca_truncate(&square(d, s, "s")?, r)?;
        write_matrix(&t.cov, output(out_cov, d * d, "out_cov")?);
        store(out_error, t.pca_error, "out_error")
    })
}

/// Exact W2 between two uniform empirical laws of `n` points in `R^d`.
///
/// # Safety
/// `a` and `b` must hold `n * d` doubles (row-major) and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_w2_assignment(
    n: usize,
    d: usize,
    a: *const f64,
    b: *const f64,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let sa = EmpiricalSample::from_row_major(input(a, n * d, "a")?.to_vec(), n, d)?;
        let sb = EmpiricalSample::from_row_major(input(b, n * d, "b")?.to_vec(), n, d)?;
        store(out, empirical::w2_assignment(&sa, &sb)?, "out")
    })
}

/// Minimax value `Tr(K) - Σ_{i≤r} λ_i` of the naive game.
///
/// # Safety
/// `k` must hold `d * d` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_minimax_value(
    d: usize,
    k: *const f64,
    r: usize,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| store(out, dynamics::minimax_value(&square(d, k, "k")?, r)?, "out"))
}

/// Maximin value of the naive game over a grid of discriminators (`d ≤ 3`).
///
/// # Safety
/// As [`ganlab_minimax_value`].
#[no_mangle]
pub unsafe extern "C" fn ganlab_maximin_value(
    d: usize,
    k: *const f64,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        store(
            out,
            dynamics::maximin_value_numeric(&square(d, k, "k")?)?,
            "out",
        )
    })
}

/// `ρ_a` and the W2 ratio `√(2/(1+ρ_a))` for the two-point scale mixture `Q_a`.
///
/// # Safety
/// `out_rho` and `out_ratio` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_qa_ratio(
    a: f64,
    out_rho: *mut f64,
    out_ratio: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let q = w2_gan::qa_ratio(a)?;
        store(out_rho, q.rho, "out_rho")?;
        store(out_ratio, q.ratio, "out_ratio")
    })
}

/// Opaque recorded trajectory of either flow.
///
/// Naive-flow states are `A` (row-major, `d²` values) followed by `v`;
/// shared-flow states are `v` followed by `b` and `λ`.
pub struct GanlabTrajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    objective: Vec<f64>,
    lyapunov: Vec<f64>,
    max_lyapunov_increase: f64,
}

fn flow_cfg(h: f64, t_end: f64, record_every: usize) -> Result<FlowConfig, Fail> {
    Ok(FlowConfig::new(h, t_end)?.recording_every(record_every))
}

/// RK4 run of the naive flow from `(A0, v0)`.
///
/// # Safety
/// `k` and `a0` must hold `d * d` doubles, `v0` `d` doubles, `out` one pointer.
#[no_mangle]
pub unsafe extern "C" fn ganlab_naive_flow_run(
    d: usize,
    k: *const f64,
    a0: *const f64,
    v0: *const f64,
    h: f64,
    t_end: f64,
    record_every: usize,
    out: *mut *mut GanlabTrajectory,
) -> GanlabStatus {
    guard(|| {
        let k = square(d, k, "k")?;
        let a = square(d, a0, "a0")?;
        let v = DVector::from_column_slice(input(v0, d, "v0")?);
        let init = NaiveFlowState::new(a, v)?;
        let tr = dynamics::naive_flow_run(&init, &k, &flow_cfg(h, t_end, record_every)?)?;
        let states = tr
            .states
            .iter()
            .map(|s| {
                let mut flat = vec![0.0; d * d];
                write_matrix(&s.a, &mut flat);
                flat.extend(s.v.iter());
                flat
            })
            .collect();
        let handle = GanlabTrajectory {
            times: tr.states.iter().map(|s| s.t).collect(),
            states,
            objective: tr.objective,
            lyapunov: Vec::new(),
            max_lyapunov_increase: f64::NAN,
        };
        store(out, Box::into_raw(Box::new(handle)), "out")
    })
}

/// RK4 run of the shared-parameter flow from `(v0, b0, λ0)`; `v0` must be a unit vector.
///
/// # Safety
/// `k` must hold `d * d` doubles, `v0` `d` doubles, `out` one pointer.
#[no_mangle]
pub unsafe extern "C" fn ganlab_shared_flow_run(
    d: usize,
    k: *const f64,
    v0: *const f64,
    b0: f64,
    lambda0: f64,
    h: f64,
    t_end: f64,
    record_every: usize,
    out: *mut *mut GanlabTrajectory,
) -> GanlabStatus {
    guard(|| {
        let k = square(d, k, "k")?;
        let v = DVector::from_column_slice(input(v0, d, "v0")?);
        let init = SharedFlowState::new(v, b0, lambda0)?;
        let tr = dynamics::shared_flow_run(&init, &k, &flow_cfg(h, t_end, record_every)?)?;
        let states = tr
            .states
            .iter()
            .map(|s| {
                let mut flat: Vec<f64> = s.v.iter().copied().collect();
                flat.push(s.b);
                flat.push(s.lambda);
                flat
            })
            .collect();
        let handle = GanlabTrajectory {
            times: tr.states.iter().map(|s| s.t).collect(),
            states,
            objective: tr.objective,
            lyapunov: tr.lyapunov,
            max_lyapunov_increase: tr.max_lyapunov_increase,
        };
        store(out, Box::into_raw(Box::new(handle)), "out")
    })
}

/// # Safety
/// `tr` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ganlab_trajectory_free(tr: *mut GanlabTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of recorded states, or 0 for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ganlab_trajectory_len(tr: *const GanlabTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.states.len())
}

/// Number of doubles per recorded state, or 0 for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ganlab_trajectory_state_len(tr: *const GanlabTrajectory) -> usize {
    tr.as_ref()
        .and_then(|t| t.states.first())
        .map_or(0, Vec::len)
}

/// Worst one-step Lyapunov increase (NaN for the naive flow).
///
/// # Safety
/// `tr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_trajectory_max_lyapunov_increase(
    tr: *const GanlabTrajectory,
    out: *mut f64,
) -> GanlabStatus {
    guard(|| {
        let t = tr.as_ref().ok_or_else(|| null("tr"))?;
        store(out, t.max_lyapunov_increase, "out")
    })
}

/// Time, objective and Lyapunov value (NaN for the naive flow) of state `i`,
/// and the state itself copied into `state` (`state_len` doubles).
///
/// # Safety
/// `tr` must be a live handle; `state` must hold `state_len` doubles; the
/// scalar out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ganlab_trajectory_get(
    tr: *const GanlabTrajectory,
    i: usize,
    out_t: *mut f64,
    out_objective: *mut f64,
    out_lyapunov: *mut f64,
    state: *mut f64,
    state_len: usize,
) -> GanlabStatus {
    guard(|| {
        let t = tr.as_ref().ok_or_else(|| null("tr"))?;
        let s = t.states.get(i).ok_or_else(|| {
            Fail(
                GanlabStatus::InvalidArgument,
                format!("index {i} out of range 0..{}", t.states.len()),
            )
        })?;
        if state_len != s.len() {
            return Err(Fail(
                GanlabStatus::DimensionMismatch,
                format!(
                    "state buffer holds {state_len} values, state has {}",
                    s.len()
                ),
            ));
        }
        output(state, state_len, "state")?.copy_from_slice(s);
        store(out_t, t.times[i], "out_t")?;
        store(out_objective, t.objective[i], "out_objective")?;
        store(
            out_lyapunov,
            t.lyapunov.get(i).copied().unwrap_or(f64::NAN),
            "out_lyapunov",
        )
    })
}
