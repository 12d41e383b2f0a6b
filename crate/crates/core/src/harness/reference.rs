//! High-accuracy reference solutions, each certified by a duality gap.
//!
//! Strategies, chosen by problem structure:
//!
//! * squared loss + l2: dense linear solve on the smaller normal system;
//! * other squared-loss problems: accelerated proximal gradient with
//!   gradient-based restarts;
//! * hinge loss with a strongly convex regularizer: exact dual coordinate ascent;
//! * hinge loss + l1: the primal and dual linear programs, solved by simplex.
//!
//! Whatever the strategy, the returned point is accepted only if
//! `P(x) − D(y) ≤ accuracy·(1 + |P(x)|)` for a dual point `y` built
//! independently of how `x` was found.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::problem::CompositeProblem;
use crate::prox::{LossKind, RegKind};

/// Largest `min(n, d)` solved densely.
const DIRECT_MAX_DIM: usize = 3000;
const DIRECT_MAX_ENTRIES: usize = 40_000_000;
const GRADIENT_MAX_ITER: usize = 500_000;
const COORDINATE_MAX_EPOCHS: usize = 50_000;
const CHECK_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    LinearSolve,
    AcceleratedGradient,
    DualCoordinateAscent,
    LinearProgram,
}

impl ReferenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceMethod::LinearSolve => "linear_solve",
            ReferenceMethod::AcceleratedGradient => "accelerated_gradient",
            ReferenceMethod::DualCoordinateAscent => "dual_coordinate_ascent",
            ReferenceMethod::LinearProgram => "linear_program",
        }
    }

    /// The strategy [`compute_reference`] uses for `problem`, if any applies.
    pub fn for_problem(problem: &CompositeProblem) -> Option<Self> {
        let reg = &problem.reg().kind;
        match problem.loss().kind {
            LossKind::Squared => {
                let (n, d) = (problem.n(), problem.d());
                let small = n.min(d) <= DIRECT_MAX_DIM && n.saturating_mul(d) <= DIRECT_MAX_ENTRIES;
                Some(match reg {
                    RegKind::L2 { lambda } if small && (*lambda > 0.0 || n >= d) => ReferenceMethod::LinearSolve,
                    _ => ReferenceMethod::AcceleratedGradient,
                })
            }
            LossKind::Hinge => match reg {
                _ if problem.reg().base_mu() > 0.0 => Some(ReferenceMethod::DualCoordinateAscent),
                RegKind::L1 { .. } | RegKind::ElasticNet { .. } => Some(ReferenceMethod::LinearProgram),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub x: Vec<f64>,
    /// Unperturbed objective at `x`.
    pub p_star: f64,
    /// Certified duality gap; an upper bound on `P(x) − P*`.
    pub gap: f64,
    pub method: ReferenceMethod,
    pub iterations: usize,
}

/// Solves the unperturbed version of `problem` to relative accuracy `accuracy`.
pub fn compute_reference(problem: &CompositeProblem, accuracy: f64) -> Result<Reference> {
    let method = ReferenceMethod::for_problem(problem).ok_or_else(|| {
        Error::Certification(format!(
            "no certified strategy for {:?} loss with {:?}",
            problem.loss().kind,
            problem.reg().kind
        ))
    })?;
    compute_reference_with(problem, accuracy, method)
}

/// [`compute_reference`] with an explicit strategy.
pub fn compute_reference_with(problem: &CompositeProblem, accuracy: f64, method: ReferenceMethod) -> Result<Reference> {
    if !(accuracy > 0.0 && accuracy.is_finite()) {
        return Err(Error::config(format!(
            "reference accuracy must be positive, got {accuracy}"
        )));
    }
    let problem = problem.unperturbed();
    let applicable = match method {
        ReferenceMethod::LinearSolve => {
            problem.loss().kind == LossKind::Squared && matches!(problem.reg().kind, RegKind::L2 { .. })
        }
        ReferenceMethod::AcceleratedGradient => problem.loss().kind == LossKind::Squared,
        ReferenceMethod::DualCoordinateAscent => {
            problem.loss().kind == LossKind::Hinge && problem.reg().base_mu() > 0.0
        }
        ReferenceMethod::LinearProgram => {
            problem.loss().kind == LossKind::Hinge
                && matches!(
                    problem.reg().kind,
                    RegKind::L1 { .. } | RegKind::ElasticNet { l2: 0.0, .. }
                )
        }
    };
    if !applicable {
        return Err(Error::config(format!(
            "{} does not apply to {:?} loss with {:?}",
            method.name(),
            problem.loss().kind,
            problem.reg().kind
        )));
    }
    match method {
        ReferenceMethod::LinearSolve => linear_solve(&problem, accuracy),
        ReferenceMethod::AcceleratedGradient => accelerated_gradient(&problem, accuracy),
        ReferenceMethod::DualCoordinateAscent => dual_coordinate_ascent(&problem, accuracy),
        ReferenceMethod::LinearProgram => linear_program(&problem, accuracy),
    }
}

fn tolerance(p: f64, accuracy: f64) -> f64 {
    accuracy * (1.0 + p.abs())
}

fn certify(
    problem: &CompositeProblem,
    x: Vec<f64>,
    y: &[f64],
    accuracy: f64,
    method: ReferenceMethod,
    iterations: usize,
) -> Result<Reference> {
    let p = problem.primal_value(&x);
    let gap = problem.duality_gap(&x, y);
    if !(p.is_finite() && gap <= tolerance(p, accuracy)) {
        return Err(Error::Certification(format!(
            "{} reached gap {gap:e} at P = {p}, need ≤ {:e}",
            method.name(),
            tolerance(p, accuracy)
        )));
    }
    if gap < -tolerance(p, accuracy.max(1e-9)) {
        return Err(Error::Certification(format!(
            "negative duality gap {gap:e}: primal and dual evaluations disagree"
        )));
    }
    Ok(Reference {
        x,
        p_star: p,
        gap: gap.max(0.0),
        method,
        iterations,
    })
}

fn linear_solve(problem: &CompositeProblem, accuracy: f64) -> Result<Reference> {
    let RegKind::L2 { lambda } = problem.reg().kind else {
        unreachable!("checked by caller")
    };
    let (n, d) = (problem.n(), problem.d());
    let c = problem.loss_scale();
    let dense = problem.matrix().to_dense();
    let a = DMatrix::from_fn(n, d, |i, j| dense[i][j]);
    let b = DVector::from_column_slice(&problem.loss().targets);
    // (cAᵀA + λI)x = cAᵀb, or through the n×n system x = Aᵀw, (cAAᵀ + λI)w = cb
    let x = if d <= n {
        let m = a.transpose() * &a * c + DMatrix::identity(d, d) * lambda;
        let rhs = a.transpose() * &b * c;
        m.cholesky().map(|ch| ch.solve(&rhs))
    } else {
        let m = &a * a.transpose() * c + DMatrix::identity(n, n) * lambda;
        m.cholesky().map(|ch| a.transpose() * ch.solve(&(&b * c)))
    }
    .ok_or_else(|| Error::Certification("normal equations are not positive definite".into()))?;
    let x: Vec<f64> = x.iter().copied().collect();
    let y = problem.dual_from_primal(&x);
    certify(problem, x, &y, accuracy, ReferenceMethod::LinearSolve, 1)
}

/// FISTA with the O'Donoghue–Candès gradient restart, step `1/L`, `L = R²/γ`.
fn accelerated_gradient(problem: &CompositeProblem, accuracy: f64) -> Result<Reference> {
    let consts = problem.constants();
    let smooth = consts.r * consts.r / problem.gamma_deterministic();
    let step = 1.0 / smooth;
    let reg = problem.reg();
    let d = problem.d();
    let mut x = vec![0.0; d];
    if let RegKind::Kl { weights } = &reg.kind {
        // start inside the domain
        x.clone_from(weights);
    }
    let mut z = x.clone();
    let mut x_new = vec![0.0; d];
    let mut t = 1.0f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 1..=GRADIENT_MAX_ITER {
        let g = problem.loss_gradient(&z);
        for j in 0..d {
            x_new[j] = reg.prox_step(j, step, z[j] - step * g[j]);
        }
        let restart = z
            .iter()
            .zip(&x_new)
            .zip(&x)
            .map(|((zj, xn), xo)| (zj - xn) * (xn - xo))
            .sum::<f64>()
            > 0.0;
        if restart {
            t = 1.0;
            z.copy_from_slice(&x_new);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let m = (t - 1.0) / t_next;
            for j in 0..d {
                z[j] = x_new[j] + m * (x_new[j] - x[j]);
            }
            t = t_next;
        }
        std::mem::swap(&mut x, &mut x_new);
        if k % CHECK_EVERY == 0 {
            let y = problem.dual_from_primal(&x);
            let p = problem.primal_value(&x);
            let gap = problem.duality_gap(&x, &y);
            if gap <= tolerance(p, accuracy) {
                return certify(problem, x, &y, accuracy, ReferenceMethod::AcceleratedGradient, k);
            }
            // conjugate outside its domain (KL): fall back to the prox-gradient residual
            if !gap.is_finite() && problem.gradient_mapping_norm(&x, step) <= accuracy {
                return Ok(Reference {
                    p_star: p,
                    x,
                    gap: f64::NAN,
                    method: ReferenceMethod::AcceleratedGradient,
                    iterations: k,
                });
            }
            if best.as_ref().is_none_or(|(bg, _)| gap < *bg) {
                best = Some((gap, x.clone()));
            }
        }
    }
    let gap = best.map_or(f64::INFINITY, |(g, _)| g);
    Err(Error::Certification(format!(
        "accelerated gradient stopped after {GRADIENT_MAX_ITER} iterations at gap {gap:e}"
    )))
}

/// Exact coordinate maximization of the hinge dual `c·Σα_i − g*(c·Σα_i a_i)`, `α ∈ [0,1]ⁿ`.
///
/// Each step maximizes the quadratic minorant given by the `1/μ` smoothness
/// of `g*`, so the dual objective never decreases.
fn dual_coordinate_ascent(problem: &CompositeProblem, accuracy: f64) -> Result<Reference> {
    let (n, d) = (problem.n(), problem.d());
    let c = problem.loss_scale();
    let mu = problem.reg().base_mu();
    let reg = problem.reg();
    let a = problem.matrix();
    let norms: Vec<f64> = (0..n).map(|i| a.row(i).norm_squared()).collect();
    let mut alpha = vec![0.0; n];
    let mut z = vec![0.0; d];
    let mut x: Vec<f64> = (0..d).map(|j| reg.prox_precision(j, 0.0, 0.0)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut last_gap = f64::INFINITY;
    for epoch in 1..=COORDINATE_MAX_EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            if norms[i] == 0.0 {
                // constant loss term: the dual optimum puts α_i at 1
                alpha[i] = 1.0;
                continue;
            }
            let row = a.row(i);
            let margin = row.dot(&x);
            let next = (alpha[i] + (1.0 - margin) * mu / (c * norms[i])).clamp(0.0, 1.0);
            let delta = next - alpha[i];
            if delta == 0.0 {
                continue;
            }
            alpha[i] = next;
            for (j, aij) in row.iter() {
                z[j] += c * delta * aij;
                x[j] = reg.prox_precision(j, 0.0, z[j]);
            }
        }
        if epoch % 5 == 0 {
            // refresh z against drift before evaluating
            let y: Vec<f64> = alpha.iter().map(|al| -c * al).collect();
            let fresh = a.matvec(&y, true)?;
            for j in 0..d {
                z[j] = -fresh[j];
                x[j] = reg.prox_precision(j, 0.0, z[j]);
            }
            let p = problem.primal_value(&x);
            last_gap = problem.duality_gap(&x, &y);
            if last_gap <= tolerance(p, accuracy) {
                return certify(problem, x, &y, accuracy, ReferenceMethod::DualCoordinateAscent, epoch);
            }
        }
    }
    Err(Error::Certification(format!(
        "dual coordinate ascent stopped after {COORDINATE_MAX_EPOCHS} epochs at gap {last_gap:e}"
    )))
}

/// Hinge + l1 as a pair of linear programs.
///
/// Primal: `min c·Σξ_i + λ·Σ(p_j + q_j)` over `p, q, ξ ≥ 0` with
/// `ξ_i + ⟨a_i, p − q⟩ ≥ 1`. Dual: `max c·Σα_i` over `α ∈ [0,1]ⁿ` with
/// `|c·Σ_i α_i a_ij| ≤ λ`. Each is solved independently and the gap is
/// evaluated with the problem's own objective functions.
fn linear_program(problem: &CompositeProblem, accuracy: f64) -> Result<Reference> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    let lambda = match problem.reg().kind {
        RegKind::L1 { lambda } | RegKind::ElasticNet { l1: lambda, .. } => lambda,
        _ => unreachable!("checked by caller"),
    };
    let (n, d) = (problem.n(), problem.d());
    let c = problem.loss_scale();
    let a = problem.matrix();
    let lp_err = |e: microlp::Error| Error::Certification(format!("linear program: {e:?}"));

    let mut primal = Problem::new(OptimizationDirection::Minimize);
    let p: Vec<_> = (0..d).map(|_| primal.add_var(lambda, (0.0, f64::INFINITY))).collect();
    let q: Vec<_> = (0..d).map(|_| primal.add_var(lambda, (0.0, f64::INFINITY))).collect();
    let xi: Vec<_> = (0..n).map(|_| primal.add_var(c, (0.0, f64::INFINITY))).collect();
    for (i, &slack) in xi.iter().enumerate() {
        let mut terms = vec![(slack, 1.0)];
        for (j, aij) in a.row(i).iter() {
            terms.push((p[j], aij));
            terms.push((q[j], -aij));
        }
        primal.add_constraint(terms, ComparisonOp::Ge, 1.0);
    }
    let sol = primal.solve().map_err(lp_err)?;
    let x: Vec<f64> = (0..d).map(|j| sol[p[j]] - sol[q[j]]).collect();

    let mut dual = Problem::new(OptimizationDirection::Maximize);
    let alpha: Vec<_> = (0..n).map(|_| dual.add_var(c, (0.0, 1.0))).collect();
    let mut columns: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); d];
    for (i, &al) in alpha.iter().enumerate() {
        for (j, aij) in a.row(i).iter() {
            columns[j].push((al, c * aij));
        }
    }
    for col in columns.into_iter().filter(|col| !col.is_empty()) {
        dual.add_constraint(col.clone(), ComparisonOp::Le, lambda);
        dual.add_constraint(col, ComparisonOp::Ge, -lambda);
    }
    let sol = dual.solve().map_err(lp_err)?;
    let y: Vec<f64> = alpha.iter().map(|&al| -c * sol[al].clamp(0.0, 1.0)).collect();
    debug_assert!(dot(&y, &y).is_finite());
    certify(problem, x, &y, accuracy, ReferenceMethod::LinearProgram, 1)
}
