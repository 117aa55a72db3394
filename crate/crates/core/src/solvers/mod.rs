//! Accelerated proximal-gradient machinery. One FISTA engine drives every
//! sparse-coding step in the toolkit; the proximal operators cover plain and
//! non-negative l1, tube-l2 and group-l2 penalties.

mod lasso;
mod omp;

pub use lasso::{lasso_code, lasso_code_with_report, LassoConfig};
pub use omp::{omp_batch, OmpOutcome};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::mat::{soft_threshold, BlockPartition, Mat};
use crate::tensor3::Tensor3;

/// Structured penalty selector for `prox_apply` and `fista_solve`.
#[derive(Debug, Clone)]
pub struct ProxKind {
    pub penalty: PenaltyKind,
    /// Compose with the indicator of the non-negative orthant.
    pub nonneg: bool,
}

#[derive(Debug, Clone)]
pub enum PenaltyKind {
    /// Sum of absolute values of all entries.
    L1,
    /// Sum over tubes (one dictionary column across channels) of tube l2 norms.
    TubeL2,
    /// Sum over row groups of group l2 norms, per column.
    GroupL2(BlockPartition),
}

impl ProxKind {
    pub fn l1() -> Self {
        Self {
            penalty: PenaltyKind::L1,
            nonneg: false,
        }
    }

    pub fn l1_nonneg() -> Self {
        Self {
            penalty: PenaltyKind::L1,
            nonneg: true,
        }
    }

    pub fn tube_l2() -> Self {
        Self {
            penalty: PenaltyKind::TubeL2,
            nonneg: false,
        }
    }

    pub fn group_l2(p: BlockPartition) -> Self {
        Self {
            penalty: PenaltyKind::GroupL2(p),
            nonneg: false,
        }
    }

    pub fn with_nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }
}

/// Value space a proximal-gradient solver can iterate over. Implemented for
/// matrix codes and channel-stacked tensor codes.
pub trait CodeSpace: Clone {
    fn frob_norm(&self) -> f64;
    fn penalty_value(&self, kind: &ProxKind) -> Result<f64>;
    /// `ca·self + cb·other`, elementwise.
    fn combine(&self, ca: f64, other: &Self, cb: f64) -> Self;
    fn all_finite(&self) -> bool;
    fn prox(&self, eta: f64, kind: &ProxKind) -> Result<Self>;
}

fn group_scale(norm: f64, eta: f64) -> f64 {
    if norm > eta {
        1.0 - eta / norm
    } else {
        0.0
    }
}

impl CodeSpace for Mat {
    fn frob_norm(&self) -> f64 {
        crate::mat::fro_norm(self)
    }

    fn penalty_value(&self, kind: &ProxKind) -> Result<f64> {
        match &kind.penalty {
            // a 1-channel tube is a single entry, so tube-l2 equals l1 here
            PenaltyKind::L1 | PenaltyKind::TubeL2 => Ok(crate::mat::l1_norm(self)),
            PenaltyKind::GroupL2(p) => {
                p_check(p, self.nrows())?;
                let mut total = 0.0;
                for col in self.columns() {
                    for g in group_ranges(p) {
                        let seg = col.slice(ndarray::s![g]);
                        total += seg.dot(&seg).sqrt();
                    }
                }
                Ok(total)
            }
        }
    }

    fn combine(&self, ca: f64, other: &Self, cb: f64) -> Self {
        let mut out = self * ca;
        out.scaled_add(cb, other);
        out
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn prox(&self, eta: f64, kind: &ProxKind) -> Result<Self> {
        let base = if kind.nonneg {
            self.mapv(|v| v.max(0.0))
        } else {
            self.clone()
        };
        match &kind.penalty {
            PenaltyKind::L1 | PenaltyKind::TubeL2 => Ok(if kind.nonneg {
                base.mapv(|v| (v - eta).max(0.0))
            } else {
                soft_threshold(&base, eta)
            }),
            PenaltyKind::GroupL2(p) => {
                p_check(p, self.nrows())?;
                let mut out = base;
                for mut col in out.columns_mut() {
                    for g in group_ranges(p) {
                        let mut seg = col.slice_mut(ndarray::s![g]);
                        let norm = seg.dot(&seg).sqrt();
                        let s = group_scale(norm, eta);
                        seg.mapv_inplace(|v| v * s);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn p_check(p: &BlockPartition, len: usize) -> Result<()> {
    if p.total() != len {
        return Err(Error::PartitionMismatch(format!(
            "group partition covers {} rows, code has {len}",
            p.total()
        )));
    }
    Ok(())
}

fn group_ranges(p: &BlockPartition) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
    (0..p.num_classes())
        .map(|c| p.class_range(c))
        .chain((p.shared_size() > 0).then(|| p.shared_range()))
}

impl CodeSpace for Tensor3 {
    fn frob_norm(&self) -> f64 {
        Tensor3::fro_norm(self)
    }

    fn penalty_value(&self, kind: &ProxKind) -> Result<f64> {
        match &kind.penalty {
            PenaltyKind::L1 => Ok(self.l1_norm()),
            PenaltyKind::TubeL2 => {
                let mut total = 0.0;
                for k in 0..self.rows() {
                    for n in 0..self.cols() {
                        let sq: f64 = (0..self.num_channels())
                            .map(|t| {
                                let v = self.channel(t)[[k, n]];
                                v * v
                            })
                            .sum();
                        total += sq.sqrt();
                    }
                }
                Ok(total)
            }
            PenaltyKind::GroupL2(p) => {
                p_check(p, self.rows())?;
                let mut total = 0.0;
                for n in 0..self.cols() {
                    for g in group_ranges(p) {
                        let sq: f64 = self
                            .channels()
                            .iter()
                            .map(|ch| {
                                g.clone()
                                    .map(|k| {
                                        let v = ch[[k, n]];
                                        v * v
                                    })
                                    .sum::<f64>()
                            })
                            .sum();
                        total += sq.sqrt();
                    }
                }
                Ok(total)
            }
        }
    }

    fn combine(&self, ca: f64, other: &Self, cb: f64) -> Self {
        Tensor3::combine(self, ca, other, cb)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }

    fn prox(&self, eta: f64, kind: &ProxKind) -> Result<Self> {
        let mut base = self.clone();
        if kind.nonneg {
            for t in 0..base.num_channels() {
                base.channel_mut(t).mapv_inplace(|v| v.max(0.0));
            }
        }
        match &kind.penalty {
            PenaltyKind::L1 => {
                for t in 0..base.num_channels() {
                    let thresholded = if kind.nonneg {
                        base.channel(t).mapv(|v| (v - eta).max(0.0))
                    } else {
                        soft_threshold(base.channel(t), eta)
                    };
                    *base.channel_mut(t) = thresholded;
                }
                Ok(base)
            }
            PenaltyKind::TubeL2 => {
                let nch = base.num_channels();
                for k in 0..base.rows() {
                    for n in 0..base.cols() {
                        let sq: f64 = (0..nch)
                            .map(|t| {
                                let v = base.channel(t)[[k, n]];
                                v * v
                            })
                            .sum();
                        let s = group_scale(sq.sqrt(), eta);
                        for t in 0..nch {
                            base.channel_mut(t)[[k, n]] *= s;
                        }
                    }
                }
                Ok(base)
            }
            PenaltyKind::GroupL2(p) => {
                p_check(p, self.rows())?;
                let nch = base.num_channels();
                for n in 0..base.cols() {
                    for g in group_ranges(p) {
                        let sq: f64 = (0..nch)
                            .map(|t| {
                                g.clone()
                                    .map(|k| {
                                        let v = base.channel(t)[[k, n]];
                                        v * v
                                    })
                                    .sum::<f64>()
                            })
                            .sum();
                        let s = group_scale(sq.sqrt(), eta);
                        for t in 0..nch {
                            for k in g.clone() {
                                base.channel_mut(t)[[k, n]] *= s;
                            }
                        }
                    }
                }
                Ok(base)
            }
        }
    }
}

/// Exact minimizer of `½‖x − u‖² + eta · penalty(x)` (plus the non-negative
/// orthant indicator when the kind requests it).
pub fn prox_apply<C: CodeSpace>(u: &C, eta: f64, kind: &ProxKind) -> Result<C> {
    if eta < 0.0 {
        return Err(Error::InvalidArgument("prox step must be >= 0".into()));
    }
    u.prox(eta, kind)
}

/// One accelerated proximal-gradient problem instance.
pub struct FistaProblem<'a, C> {
    /// Gradient of the smooth part at the current iterate.
    pub grad: Box<dyn Fn(&C) -> C + 'a>,
    /// Upper bound on the Lipschitz constant of the gradient.
    pub lipschitz: f64,
    /// Weight on the nonsmooth penalty.
    pub lambda: f64,
    pub prox: ProxKind,
    pub init: C,
    pub max_iter: usize,
    /// Convergence threshold on ‖x_k − x_{k−1}‖_F / max(1, ‖x_k‖_F).
    pub tol: f64,
    /// Full objective (smooth + penalty). When present the solver records a
    /// history and restarts momentum whenever a step would increase it, so
    /// the returned iterate never scores worse than the initial one.
    pub objective: Option<Box<dyn Fn(&C) -> f64 + 'a>>,
}

impl<'a, C: CodeSpace> FistaProblem<'a, C> {
    pub fn new(grad: impl Fn(&C) -> C + 'a, lipschitz: f64, lambda: f64, prox: ProxKind, init: C) -> Self {
        Self {
            grad: Box::new(grad),
            lipschitz,
            lambda,
            prox,
            init,
            max_iter: 300,
            tol: 1e-6,
            objective: None,
        }
    }

    pub fn with_objective(mut self, obj: impl Fn(&C) -> f64 + 'a) -> Self {
        self.objective = Some(Box::new(obj));
        self
    }

    pub fn with_iters(mut self, max_iter: usize, tol: f64) -> Self {
        self.max_iter = max_iter;
        self.tol = tol;
        self
    }
}

/// Convergence report for a single solve.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: std::time::Duration,
}

/// Momentum recurrence `t_{k+1} = (1 + √(1 + 4 t_k²)) / 2`.
pub fn fista_momentum_next(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// Accelerated proximal gradient descent on
/// `f(x) + lambda · penalty(x)` given `∇f` and a Lipschitz bound.
pub fn fista_solve<C: CodeSpace>(p: &FistaProblem<'_, C>) -> Result<(C, FitReport)> {
    if p.lipschitz <= 0.0 {
        return Err(Error::InvalidArgument(
            "Lipschitz bound must be positive".into(),
        ));
    }
    if p.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    let start = Instant::now();
    let lip = p.lipschitz;
    let eta = p.lambda / lip;

    let mut x = p.init.clone();
    let mut w = p.init.clone();
    let mut t = 1.0f64;
    let mut history = Vec::new();
    let mut best_obj = p.objective.as_ref().map(|f| f(&p.init));
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..p.max_iter {
        iterations += 1;
        let g = (p.grad)(&w);
        if !g.all_finite() {
            return Err(Error::NonFinite("fista gradient"));
        }
        // forward step then prox
        let u = w.combine(1.0, &g, -1.0 / lip);
        let mut z = prox_apply(&u, eta, &p.prox)?;
        let mut restarted = false;
        if let Some(obj) = &p.objective {
            let val = obj(&z);
            if val > best_obj.unwrap() {
                // adaptive restart: fall back to the last accepted iterate
                z = x.clone();
                t = 1.0;
                restarted = true;
            } else {
                best_obj = Some(val);
            }
            history.push(best_obj.unwrap());
        }

        let delta = z.combine(1.0, &x, -1.0).frob_norm();
        let denom = z.frob_norm().max(1.0);

        let t_next = fista_momentum_next(t);
        let beta = (t - 1.0) / t_next;
        w = z.combine(1.0 + beta, &x, -beta);
        t = t_next;
        x = z;

        if !restarted && delta / denom < p.tol {
            converged = true;
            break;
        }
    }

    Ok((
        x,
        FitReport {
            iterations,
            objective_history: history,
            converged,
            wall_time: start.elapsed(),
        },
    ))
}
