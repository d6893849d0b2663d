//! Fitting `(E, rho, alpha)` to a target mesh sequence.
//!
//! Each iteration rolls the simulator out at the current parameters and at
//! three one-sided perturbations, forms a forward-difference gradient of the
//! vertex L2 loss and takes an Adam step.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::ElasticParams;
use crate::error::{ConstitutiveError, FitError};
use crate::geometry::{MeshSequence, TriMesh};
use crate::mpm::{rest_frames, simulate_sequence, SimConfig};
use crate::Real;

/// Parameter floors applied after each step; both must stay positive.
const MIN_DENSITY: Real = 1e-6;
const MIN_YOUNGS: Real = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub elastic: ElasticParams,
    /// Mass per unit rest area.
    pub density: Real,
    /// Rest-shape factor in `[0, 1]`; 1 keeps the input mesh as rest shape.
    pub alpha: Real,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            elastic: ElasticParams::default(),
            density: 1.0,
            alpha: 1.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        self.elastic.validate()?;
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(ConstitutiveError::InvalidParam {
                name: "rho",
                value: self.density,
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConstitutiveError::InvalidParam {
                name: "alpha",
                value: self.alpha,
            });
        }
        Ok(())
    }

    /// The fitted coordinates `(rho, E, alpha)`.
    pub fn fitted(&self) -> [Real; 3] {
        [self.density, self.elastic.youngs, self.alpha]
    }

    pub fn with_fitted(&self, [rho, e, alpha]: [Real; 3]) -> Self {
        let mut p = *self;
        p.density = rho;
        p.elastic.youngs = e;
        p.alpha = alpha;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub iterations: usize,
    pub delta_rho: Real,
    pub delta_e: Real,
    pub delta_alpha: Real,
    pub lr_rho: Real,
    pub lr_e: Real,
    pub lr_alpha: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub init_rho: Real,
    pub init_e: Real,
    pub init_alpha: Real,
    pub poisson: Real,
    pub shear: Real,
    pub normal: Real,
    /// Frames compared, including the shared first frame. Defaults to the
    /// target length.
    pub horizon: Option<usize>,
    /// Run the four rollouts of an iteration concurrently.
    pub parallel_rollouts: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            delta_rho: 0.05,
            delta_e: 5.0,
            delta_alpha: 0.005,
            lr_rho: 0.01,
            lr_e: 0.3,
            lr_alpha: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            init_rho: 1.0,
            init_e: 100.0,
            init_alpha: 1.0,
            poisson: 0.3,
            shear: 500.0,
            normal: 500.0,
            horizon: None,
            parallel_rollouts: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: String| Err(FitError::Config(m));
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        for (name, v) in [
            ("delta_rho", self.delta_rho),
            ("delta_e", self.delta_e),
            ("delta_alpha", self.delta_alpha),
            ("lr_rho", self.lr_rho),
            ("lr_e", self.lr_e),
            ("lr_alpha", self.lr_alpha),
            ("eps", self.eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.delta_alpha >= 1.0 {
            return bad(format!("delta_alpha must be below 1, got {}", self.delta_alpha));
        }
        if self.horizon.is_some_and(|t| t < 2) {
            return bad("horizon must be at least 2 frames".into());
        }
        self.initial_params()
            .validate()
            .map_err(|e| FitError::Config(format!("initial parameters: {e}")))
    }

    pub fn initial_params(&self) -> PhysParams {
        PhysParams {
            elastic: ElasticParams {
                youngs: self.init_e,
                poisson: self.poisson,
                shear: self.shear,
                normal: self.normal,
            },
            density: self.init_rho,
            alpha: self.init_alpha,
        }
    }

    fn deltas(&self) -> [Real; 3] {
        [self.delta_rho, self.delta_e, self.delta_alpha]
    }

    fn learning_rates(&self) -> [Real; 3] {
        [self.lr_rho, self.lr_e, self.lr_alpha]
    }
}

/// Sum over frames `2..T` of squared vertex distances.
pub fn phys_loss(simulated: &MeshSequence, target: &MeshSequence) -> Result<Real, FitError> {
    if simulated.len() != target.len() {
        return Err(FitError::Shape(format!(
            "{} simulated frames, {} target frames",
            simulated.len(),
            target.len()
        )));
    }
    if simulated.vertex_count() != target.vertex_count() || simulated.faces() != target.faces() {
        return Err(FitError::Shape("simulated and target topology differ".into()));
    }
    Ok(simulated
        .frames()
        .iter()
        .zip(target.frames())
        .skip(1)
        .flat_map(|(a, b)| a.iter().zip(b))
        .map(|(a, b)| (a - b).norm_squared())
        .sum())
}

/// Loss at the base point and its forward-difference gradient over `(rho, E, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiff {
    pub loss: Real,
    pub grad: [Real; 3],
}

/// A loss evaluation that failed, with the parameters it was evaluated at.
#[derive(Debug)]
pub struct EvalFailure<E> {
    pub params: PhysParams,
    pub error: E,
}

/// Evaluates `loss_fn` exactly four times: at `p` and with each of `rho`, `E`,
/// `alpha` perturbed upward. Near `alpha = 1` the alpha step is taken downward.
pub fn finite_diff_grad<E, F>(
    loss_fn: F,
    p: &PhysParams,
    cfg: &OptimConfig,
) -> Result<FiniteDiff, EvalFailure<E>>
where
    E: Send,
    F: Fn(&PhysParams) -> Result<Real, E> + Sync,
{
    let base = p.fitted();
    let mut steps = cfg.deltas();
    if base[2] + steps[2] > 1.0 {
        steps[2] = -steps[2];
    }
    let points: Vec<PhysParams> = std::iter::once(*p)
        .chain((0..3).map(|k| {
            let mut q = base;
            q[k] += steps[k];
            p.with_fitted(q)
        }))
        .collect();
    let eval = |q: &PhysParams| loss_fn(q).map_err(|error| EvalFailure { params: *q, error });
    let losses: Vec<Real> = if cfg.parallel_rollouts {
        points.par_iter().map(eval).collect::<Result<_, _>>()?
    } else {
        points.iter().map(eval).collect::<Result<_, _>>()?
    };
    let grad = std::array::from_fn(|k| (losses[k + 1] - losses[0]) / steps[k]);
    Ok(FiniteDiff {
        loss: losses[0],
        grad,
    })
}

/// First and second moment estimates over `(rho, E, alpha)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: [Real; 3],
    pub v: [Real; 3],
}

/// One Adam update at 1-based iteration `iter`. Leaves `state` untouched on error.
pub fn adam_step(
    p: &PhysParams,
    grad: &[Real; 3],
    state: &mut AdamState,
    iter: usize,
    cfg: &OptimConfig,
) -> Result<PhysParams, FitError> {
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(FitError::NonFiniteGradient(*grad));
    }
    if iter < 1 {
        return Err(FitError::Config("Adam iteration index starts at 1".into()));
    }
    let lr = cfg.learning_rates();
    let t = iter as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut x = p.fitted();
    for k in 0..3 {
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grad[k];
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        x[k] -= lr[k] * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    x[0] = x[0].max(MIN_DENSITY);
    x[1] = x[1].max(MIN_YOUNGS);
    x[2] = x[2].clamp(0.0, 1.0);
    Ok(p.with_fitted(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Parameters with the lowest loss seen.
    pub params: PhysParams,
    pub best_loss: Real,
    /// Loss at the start of each iteration.
    pub loss_history: Vec<Real>,
    /// `(rho, E, alpha)` at the start of each iteration.
    pub trajectory: Vec<[Real; 3]>,
    pub rollouts: usize,
    pub wall_seconds: Real,
}

/// Fits `(E, rho, alpha)` of `cloth0` so that its rollout matches `target`.
/// `target` frame 0 is taken as the shared initial state.
pub fn fit_parameters(
    cloth0: &TriMesh,
    colliders: Option<&MeshSequence>,
    target: &MeshSequence,
    cfg: &OptimConfig,
    sim_cfg: &SimConfig,
) -> Result<FitResult, FitError> {
    cfg.validate()?;
    sim_cfg
        .validate()
        .map_err(|e| FitError::Config(e.to_string()))?;
    let horizon = cfg.horizon.unwrap_or(target.len());
    if horizon < 2 || horizon > target.len() {
        return Err(FitError::Shape(format!(
            "horizon {horizon} needs between 2 and {} target frames",
            target.len()
        )));
    }
    if target.faces() != cloth0.faces.as_slice() || target.vertex_count() != cloth0.vertex_count() {
        return Err(FitError::Shape("target topology differs from the cloth mesh".into()));
    }
    let target = target.truncated(horizon);
    let frames = horizon - 1;
    let started = Instant::now();
    let rollouts = AtomicUsize::new(0);

    let loss_fn = |q: &PhysParams| -> Result<Real, String> {
        rollouts.fetch_add(1, Ordering::Relaxed);
        let rest = rest_frames(cloth0, q.alpha, &sim_cfg.gravity).map_err(|e| e.to_string())?;
        let sim = simulate_sequence(cloth0, &rest, colliders, q, sim_cfg, frames)
            .map_err(|e| e.to_string())?;
        phys_loss(&sim, &target).map_err(|e| e.to_string())
    };

    let mut p = cfg.initial_params();
    let mut adam = AdamState::default();
    let mut best = (Real::INFINITY, p);
    let mut loss_history = Vec::with_capacity(cfg.iterations);
    let mut trajectory = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let fd = finite_diff_grad(loss_fn, &p, cfg).map_err(|f| FitError::Rollout {
            iteration: it,
            e: f.params.elastic.youngs,
            rho: f.params.density,
            alpha: f.params.alpha,
            message: f.error,
        })?;
        loss_history.push(fd.loss);
        trajectory.push(p.fitted());
        if fd.loss < best.0 {
            best = (fd.loss, p);
        }
        log::info!(
            "iteration {it}: loss {:.6e} rho {:.5} E {:.4} alpha {:.5} grad {:?}",
            fd.loss,
            p.density,
            p.elastic.youngs,
            p.alpha,
            fd.grad
        );
        p = adam_step(&p, &fd.grad, &mut adam, it + 1, cfg)?;
    }
    Ok(FitResult {
        params: best.1,
        best_loss: best.0,
        loss_history,
        trajectory,
        rollouts: rollouts.into_inner(),
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
