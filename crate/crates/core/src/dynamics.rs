//! Gradient flows of the quadratic W2 minimax game for rank-1 PCA.
//!
//! Two parameterizations of `min_U sup_A Tr((I - A)K + (I - A⁻¹)U)`:
//! the naive one with `U = vvᵀ` and a free symmetric discriminator `A`, and
//! the shared one with `A = λvvᵀ`, `U = bvvᵀ`, `‖v‖ = 1`. Also the closed-form
//! minimax and maximin values of the naive game.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::gauss::{symmetrize_checked, SpectralDecomp};

/// Pseudo-inverse cutoff relative to the largest `|eigenvalue|` of `A`.
pub const PINV_TOLERANCE: f64 = 1e-10;
/// State norm beyond which a run is declared divergent.
pub const BLOWUP_NORM: f64 = 1e6;
/// Floor for the shared-game discriminator scale.
pub const LAMBDA_FLOOR: f64 = 1e-8;

fn spectrum(k: &DMatrix<f64>) -> Result<SpectralDecomp> {
    SpectralDecomp::of_psd(k)
}

/// `Tr(K) - Σ_{i≤r} λ_i(K)`, the value of the naive game at rank `r`.
pub fn minimax_value(k: &DMatrix<f64>, r: usize) -> Result<f64> {
    let d = k.nrows();
    if r == 0 || r > d {
        return Err(LabError::RankOutOfRange { rank: r, dim: d });
    }
    let dec = spectrum(k)?;
    let tail: f64 = dec.eigenvalues.iter().skip(r).sum();
    Ok(tail)
}

/// Sup over a family of positive definite `A` of the inner infimum over
/// rank-1 `U = b vvᵀ`. The inner infimum is `-∞` unless `A ⪰ I`, in which case
/// it equals `Tr((I - A)K)` (attained at `b = 0`). The family is the `d ≤ 3`
/// diagonal grid on `{0.25, 0.5, ..., 3}` together with `αI` for `α ∈ [0.5, 3]`,
/// both containing `A = I`.
pub fn maximin_value_numeric(k: &DMatrix<f64>) -> Result<f64> {
    let d = k.nrows();
    if d > 3 {
        return Err(LabError::TooLarge { size: d, limit: 3 });
    }
    spectrum(k)?;
    let levels: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
    let inner = |diag: &[f64]| -> f64 {
        if diag.iter().any(|&a| a < 1.0) {
            return f64::NEG_INFINITY;
        }
        (0..d).map(|i| (1.0 - diag[i]) * k[(i, i)]).sum()
    };
    let mut best = f64::NEG_INFINITY;
    let total = levels.len().pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let diag: Vec<f64> = (0..d)
            .map(|_| {
                let a = levels[c % levels.len()];
                c /= levels.len();
                a
            })
            .collect();
        best = best.max(inner(&diag));
    }
    for i in 0..=250 {
        let alpha = 0.5 + 0.01 * i as f64;
        best = best.max(inner(&vec![alpha; d]));
    }
    Ok(best)
}

/// State of the naive flow: symmetric discriminator `A`, generator `U = vvᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveFlowState {
    pub a: DMatrix<f64>,
    pub v: DVector<f64>,
    pub t: f64,
}

impl NaiveFlowState {
    pub fn new(a: DMatrix<f64>, v: DVector<f64>) -> Result<Self> {
        if a.nrows() != v.len() {
            return Err(LabError::DimensionMismatch {
                expected: v.len(),
                found: a.nrows(),
            });
        }
        let a = symmetrize_checked(&a)?;
        if a.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(LabError::InvalidInput("non-finite flow state".into()));
        }
        Ok(NaiveFlowState { a, v, t: 0.0 })
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + self.v.norm_squared()).sqrt()
    }
}

/// `A⁺v`, via the explicit 2×2 inverse when well conditioned, else an
/// eigen-based pseudo-inverse. A (near-)null direction of `A` that `v` does not
/// avoid has no meaningful inverse and is reported as singular.
fn pinv_apply(a: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let d = v.len();
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if d == 2 {
        let (a11, a12, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 1)]);
        let det = a11 * a22 - a12 * a12;
        if det.abs() > PINV_TOLERANCE * scale * scale {
            return Ok(DVector::from_vec(vec![
                (a22 * v[0] - a12 * v[1]) / det,
                (a11 * v[1] - a12 * v[0]) / det,
            ]));
        }
    }
    let dec = SpectralDecomp::of_symmetric(a)?;
    let lmax = dec.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let cutoff = PINV_TOLERANCE * lmax;
    let mut out = DVector::zeros(d);
    let vnorm = v.norm();
    for j in 0..d {
        let q = dec.eigenvectors.column(j);
        let coef = q.dot(v);
        let lam = dec.eigenvalues[j];
        if lam.abs() <= cutoff {
            if coef.abs() > PINV_TOLERANCE * (1.0 + vnorm) {
                return Err(LabError::SingularA(lam));
            }
            continue;
        }
        out += q * (coef / lam);
    }
    Ok(out)
}

/// `(dA/dt, dv/dt) = (-K + wwᵀ, -2(v - w))` with `w = A⁻¹v`.
pub fn naive_field(
    a: &DMatrix<f64>,
    v: &DVector<f64>,
    k: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let w = pinv_apply(a, v)?;
    let da = &w * w.transpose() - k;
    let da = (&da + da.transpose()) * 0.5;
    let dv = (&w - v) * 2.0;
    Ok((da, dv))
}

/// `Tr((I - A)K) + vᵀv - vᵀA⁻¹v`.
pub fn naive_objective(a: &DMatrix<f64>, v: &DVector<f64>, k: &DMatrix<f64>) -> Result<f64> {
    let d = v.len();
    let w = pinv_apply(a, v)?;
    let ima = DMatrix::<f64>::identity(d, d) - a;
    Ok((ima * k).trace() + v.dot(v) - v.dot(&w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub h: f64,
    pub t_end: f64,
    /// Keep every `record_every`-th state (the initial and final states are always kept).
    pub record_every: usize,
}

impl FlowConfig {
    pub fn new(h: f64, t_end: f64) -> Result<Self> {
        if !(h > 0.0) || !(t_end >= 0.0) || !h.is_finite() || !t_end.is_finite() {
            return Err(LabError::InvalidInput(format!(
                "bad step {h} or horizon {t_end}"
            )));
        }
        Ok(FlowConfig {
            h,
            t_end,
            record_every: 1,
        })
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn steps(&self) -> usize {
        (self.t_end / self.h - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub states: Vec<S>,
    /// Game objective at each recorded state.
    pub objective: Vec<f64>,
    /// Lyapunov value at each recorded state (empty for the naive flow).
    pub lyapunov: Vec<f64>,
    /// Largest one-step increase of the Lyapunov value over every step taken,
    /// recorded or not (zero for the naive flow).
    pub max_lyapunov_increase: f64,
    pub h: f64,
    pub integrator: &'static str,
    pub steps: usize,
}

fn naive_rk4(state: &NaiveFlowState, k: &DMatrix<f64>, h: f64) -> Result<NaiveFlowState> {
    let f = |a: &DMatrix<f64>, v: &DVector<f64>| naive_field(a, v, k);
    let (a0, v0) = (&state.a, &state.v);
    let (ka1, kv1) = f(a0, v0)?;
    let (ka2, kv2) = f(&(a0 + &ka1 * (h / 2.0)), &(v0 + &kv1 * (h / 2.0)))?;
    let (ka3, kv3) = f(&(a0 + &ka2 * (h / 2.0)), &(v0 + &kv2 * (h / 2.0)))?;
    let (ka4, kv4) = f(&(a0 + &ka3 * h), &(v0 + &kv3 * h))?;
    let a = a0 + (ka1 + ka2 * 2.0 + ka3 * 2.0 + ka4) * (h / 6.0);
    let v = v0 + (kv1 + kv2 * 2.0 + kv3 * 2.0 + kv4) * (h / 6.0);
    let next = NaiveFlowState {
        a: (&a + a.transpose()) * 0.5,
        v,
        t: state.t + h,
    };
    check_blowup(next.norm(), next.t)?;
    Ok(next)
}

fn check_blowup(norm: f64, t: f64) -> Result<()> {
    if !norm.is_finite() || norm > BLOWUP_NORM {
        return Err(LabError::StepBlowup { norm, t });
    }
    Ok(())
}

/// One RK4 step of the naive flow.
pub fn naive_flow_step(state: &NaiveFlowState, k: &DMatrix<f64>, h: f64) -> Result<NaiveFlowState> {
    check_naive_dims(state, k)?;
    naive_rk4(state, k, h)
}

fn check_naive_dims(state: &NaiveFlowState, k: &DMatrix<f64>) -> Result<()> {
    if k.nrows() != state.v.len() || k.ncols() != state.v.len() {
        return Err(LabError::DimensionMismatch {
            expected: state.v.len(),
            found: k.nrows(),
        });
    }
    Ok(())
}

/// RK4 integration of the naive flow over `[0, t_end]`.
pub fn naive_flow_run(
    init: &NaiveFlowState,
    k: &DMatrix<f64>,
    cfg: &FlowConfig,
) -> Result<Trajectory<NaiveFlowState>> {
    check_naive_dims(init, k)?;
    let k = symmetrize_checked(k)?;
    let steps = cfg.steps();
    let mut state = init.clone();
    let mut states = vec![state.clone()];
    let mut objective = vec![naive_objective(&state.a, &state.v, &k)?];
    for s in 1..=steps {
        state = naive_rk4(&state, &k, cfg.h)?;
        state.t = init.t + s as f64 * cfg.h;
        if s % cfg.record_every == 0 || s == steps {
            objective.push(naive_objective(&state.a, &state.v, &k)?);
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        states,
        objective,
        lyapunov: Vec::new(),
        max_lyapunov_increase: 0.0,
        h: cfg.h,
        integrator: "rk4",
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgdReport {
    pub trajectory: Trajectory<NaiveFlowState>,
    /// Iteration at which the state left the finite region, if it did.
    pub diverged_at: Option<usize>,
}

/// Discrete alternating gradient steps: ascent in `A` with rate `eta_a`, then
/// descent in `v` against the updated `A` with rate `eta_v`. Divergence is
/// reported, not raised.
pub fn naive_agd_run(
    init: &NaiveFlowState,
    k: &DMatrix<f64>,
    eta_a: f64,
    eta_v: f64,
    iterations: usize,
    record_every: usize,
) -> Result<AgdReport> {
    check_naive_dims(init, k)?;
    if !(eta_a > 0.0) || !(eta_v > 0.0) {
        return Err(LabError::InvalidInput("step sizes must be positive".into()));
    }
    let record_every = record_every.max(1);
    let mut state = init.clone();
    let mut states = vec![state.clone()];
    let mut objective = vec![naive_objective(&state.a, &state.v, k).unwrap_or(f64::NAN)];
    let mut diverged_at = None;
    for it in 1..=iterations {
        let step = (|| -> Result<NaiveFlowState> {
            let (da, _) = naive_field(&state.a, &state.v, k)?;
            let a = &state.a + da * eta_a;
            let (_, dv) = naive_field(&a, &state.v, k)?;
            let next = NaiveFlowState {
                v: &state.v + dv * eta_v,
                a,
                t: it as f64,
            };
            check_blowup(next.norm(), next.t)?;
            Ok(next)
        })();
        match step {
            Ok(next) => state = next,
            Err(_) => {
                diverged_at = Some(it);
                break;
            }
        }
        if it % record_every == 0 || it == iterations {
            objective.push(naive_objective(&state.a, &state.v, k).unwrap_or(f64::NAN));
            states.push(state.clone());
        }
    }
    Ok(AgdReport {
        trajectory: Trajectory {
            steps: states.len() - 1,
            states,
            objective,
            lyapunov: Vec::new(),
            max_lyapunov_increase: 0.0,
            h: eta_a,
            integrator: "euler-agd",
        },
        diverged_at,
    })
}

/// Shared-parameter state: `A = λvvᵀ`, `U = bvvᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedFlowState {
    pub v: DVector<f64>,
    pub b: f64,
    pub lambda: f64,
    pub t: f64,
}

impl SharedFlowState {
    /// Validates `‖v‖ = 1` (within 1e-9), `b ≥ 0` and `λ > 0`.
    pub fn new(v: DVector<f64>, b: f64, lambda: f64) -> Result<Self> {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidInput(format!(
                "v must be a unit vector (norm {})",
                v.norm()
            )));
        }
        if !(b >= 0.0) || !(lambda > 0.0) || !b.is_finite() || !lambda.is_finite() {
            return Err(LabError::InvalidInput(format!(
                "need b >= 0 and lambda > 0 (got {b}, {lambda})"
            )));
        }
        Ok(SharedFlowState {
            v,
            b,
            lambda,
            t: 0.0,
        })
    }
}

/// `K` with its top eigenpair, precomputed for the shared game.
#[derive(Debug, Clone)]
pub struct SharedGame {
    k: DMatrix<f64>,
    lambda1: f64,
    v1: DVector<f64>,
    trace: f64,
}

impl SharedGame {
    pub fn new(k: &DMatrix<f64>) -> Result<Self> {
        let dec = spectrum(k)?;
        let k = symmetrize_checked(k)?;
        Ok(SharedGame {
            trace: k.trace(),
            lambda1: dec.eigenvalues[0],
            v1: dec.eigenvectors.column(0).into_owned(),
            k,
        })
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn v1(&self) -> &DVector<f64> {
        &self.v1
    }

    /// `Tr(K) - λ₁`, the value of the shared game (minimax and maximin alike).
    pub fn value(&self) -> f64 {
        self.trace - self.lambda1
    }

    /// `Tr(K) - λvᵀKv + b - b/λ`.
    pub fn objective(&self, s: &SharedFlowState) -> f64 {
        let q = s.v.dot(&(&self.k * &s.v));
        self.trace - s.lambda * q + s.b - s.b / s.lambda
    }

    /// Flow field with one-sided rules on the boundaries `b = 0`, `λ = floor`.
    pub fn field(&self, v: &DVector<f64>, b: f64, lambda: f64) -> (DVector<f64>, f64, f64) {
        let kv = &self.k * v;
        let q = v.dot(&kv);
        let dv = (kv - v * q) * (2.0 * lambda);
        let mut db = 1.0 / lambda - 1.0;
        if b <= 0.0 {
            db = db.max(0.0);
        }
        let mut dl = -q + b / (lambda * lambda);
        if lambda <= LAMBDA_FLOOR {
            dl = dl.max(0.0);
        }
        (dv, db, dl)
    }

    /// The five summands of the Lyapunov function, in order.
    pub fn lyapunov_terms(&self, s: &SharedFlowState) -> Result<[f64; 5]> {
        let overlap = s.v.dot(&self.v1).abs();
        if overlap < 1e-12 {
            return Err(LabError::OrthogonalV);
        }
        let q = s.v.dot(&(&self.k * &s.v));
        let l1 = self.lambda1;
        Ok([
            (0.125 + l1 * l1) * (1.0 / overlap).ln(),
            0.5 * (s.b - l1).powi(2),
            0.5 * (s.lambda - 1.0).powi(2),
            0.125 * (1.0 / s.lambda - 1.0).powi(2),
            0.125 * (s.b / (s.lambda * s.lambda) - q).powi(2),
        ])
    }

    pub fn lyapunov(&self, s: &SharedFlowState) -> Result<f64> {
        Ok(self.lyapunov_terms(s)?.iter().sum())
    }

    fn rk4(&self, s: &SharedFlowState, h: f64) -> Result<SharedFlowState> {
        let clamp = |v: DVector<f64>, b: f64, l: f64| (v, b.max(0.0), l.max(LAMBDA_FLOOR));
        let (v0, b0, l0) = (&s.v, s.b, s.lambda);
        let (v1, b1, l1) = self.field(v0, b0, l0);
        let (sv, sb, sl) = clamp(v0 + &v1 * (h / 2.0), b0 + b1 * h / 2.0, l0 + l1 * h / 2.0);
        let (v2, b2, l2) = self.field(&sv, sb, sl);
        let (sv, sb, sl) = clamp(v0 + &v2 * (h / 2.0), b0 + b2 * h / 2.0, l0 + l2 * h / 2.0);
        let (v3, b3, l3) = self.field(&sv, sb, sl);
        let (sv, sb, sl) = clamp(v0 + &v3 * h, b0 + b3 * h, l0 + l3 * h);
        let (v4, b4, l4) = self.field(&sv, sb, sl);
        let v = v0 + (v1 + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
        let b = b0 + (b1 + 2.0 * b2 + 2.0 * b3 + b4) * h / 6.0;
        let l = l0 + (l1 + 2.0 * l2 + 2.0 * l3 + l4) * h / 6.0;
        let norm = v.norm();
        let t = s.t + h;
        check_blowup((norm * norm + b * b + l * l).sqrt(), t)?;
        Ok(SharedFlowState {
            v: v / norm,
            b: b.max(0.0),
            lambda: l.max(LAMBDA_FLOOR),
            t,
        })
    }
}

/// `L(v, b, λ)` for the shared game defined by `K`.
pub fn lyapunov_value(state: &SharedFlowState, k: &DMatrix<f64>) -> Result<f64> {
    SharedGame::new(k)?.lyapunov(state)
}

/// RK4 integration of the shared flow with renormalized `v` and clamped `b`, `λ`.
pub fn shared_flow_run(
    init: &SharedFlowState,
    k: &DMatrix<f64>,
    cfg: &FlowConfig,
) -> Result<Trajectory<SharedFlowState>> {
    let game = SharedGame::new(k)?;
    shared_flow_run_game(init, &game, cfg)
}

pub fn shared_flow_run_game(
    init: &SharedFlowState,
    game: &SharedGame,
    cfg: &FlowConfig,
) -> Result<Trajectory<SharedFlowState>> {
    if init.v.len() != game.k.nrows() {
        return Err(LabError::DimensionMismatch {
            expected: game.k.nrows(),
            found: init.v.len(),
        });
    }
    let overlap = init.v.dot(&game.v1).abs();
    if overlap < 1e-12 {
        return Err(LabError::BadInit(overlap));
    }
    let steps = cfg.steps();
    let mut state = init.clone();
    let mut lyap = game.lyapunov(&state)?;
    let mut states = vec![state.clone()];
    let mut objective = vec![game.objective(&state)];
    let mut lyapunov = vec![lyap];
    let mut max_inc = f64::NEG_INFINITY;
    for s in 1..=steps {
        state = game.rk4(&state, cfg.h)?;
        state.t = init.t + s as f64 * cfg.h;
        let next = game.lyapunov(&state)?;
        max_inc = max_inc.max(next - lyap);
        lyap = next;
        if s % cfg.record_every == 0 || s == steps {
            states.push(state.clone());
            objective.push(game.objective(&state));
            lyapunov.push(lyap);
        }
    }
    Ok(Trajectory {
        states,
        objective,
        lyapunov,
        max_lyapunov_increase: if steps == 0 { 0.0 } else { max_inc },
        h: cfg.h,
        integrator: "rk4",
        steps,
    })
}

/// Distance of a shared state from the saddle `(±v₁, λ₁, 1)`:
/// `max(min ‖v ∓ v₁‖, |b - λ₁|, |λ - 1|)`.
pub fn saddle_distance(state: &SharedFlowState, game: &SharedGame) -> f64 {
    let dv = (&state.v - &game.v1)
        .norm()
        .min((&state.v + &game.v1).norm());
    dv.max((state.b - game.lambda1).abs())
        .max((state.lambda - 1.0).abs())
}

/// Runs many shared-flow trajectories in parallel and returns their final
/// saddle distances and worst Lyapunov increases.
pub fn shared_flow_batch(
    inits: &[SharedFlowState],
    game: &SharedGame,
    cfg: &FlowConfig,
) -> Result<Vec<(f64, f64)>> {
    inits
        .par_iter()
        .map(|s| {
            let tr = shared_flow_run_game(s, game, cfg)?;
            let last = tr.states.last().expect("non-empty trajectory");
            Ok((saddle_distance(last, game), tr.max_lyapunov_increase))
        })
        .collect()
}
