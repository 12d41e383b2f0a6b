//! The composite problem `min_x c·Σ_i f_i(⟨a_i, x⟩) + g(x)` and its saddle form.
//!
//! Two scalings are supported. [`Scaling::Deterministic`] uses `c = 1`
//! (`P(x) = f(Ax) + g(x)`), [`Scaling::FiniteSum`] uses `c = 1/n`
//! (`P̃(x) = (1/n)Σ f_i + g`). Solvers see the problem through one of two
//! dual conventions:
//!
//! * deterministic: `F(x, y) = ⟨y, Ax⟩ + g(x) − Σ_i c·f_i*(y_i / c)`, used by
//!   DAPD, PDHG and the reference certificates;
//! * stochastic: `F̃(x, y) = (1/n)⟨y, Ax⟩ + g(x) − (1/n)Σ_i φ_i*(y_i)` with
//!   `φ_i = k·f_i`, `k = n·c`, used by SDAPD and SPDC.
//!
//! The two dual variables are related by `y_stochastic = n·y_deterministic`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, MatrixStats, SparseRowMatrix};
use crate::prox::{LossFamily, LossKind, Regularizer};

/// Multiplier on `R` when power iteration did not converge.
pub const SPECTRAL_SAFETY: f64 = 0.99;

/// Default proportionality constants between target accuracy and perturbation.
pub const DEFAULT_PERTURBATION_C1: f64 = 0.1;
pub const DEFAULT_PERTURBATION_C2: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `P(x) = Σ f_i(⟨a_i, x⟩) + g(x)`.
    Deterministic,
    /// `P̃(x) = (1/n) Σ f_i(⟨a_i, x⟩) + g(x)`.
    #[default]
    FiniteSum,
}

/// Regularity constants after perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Per-sample `γ + δ₁`: each perturbed `f_i` is `(1/γ)`-smooth.
    pub gamma: f64,
    /// `μ + δ₂`.
    pub mu: f64,
    /// Lipschitz constant of the scaled loss `c·Σ f_i` on the relevant region, if known.
    pub lipschitz: Option<f64>,
    /// `R = ‖A‖₂`, already divided by [`SPECTRAL_SAFETY`] if the estimate did not converge.
    pub r: f64,
    /// `R̄ = max_i ‖a_i‖₂`.
    pub r_bar: f64,
    pub density: f64,
    pub spectral_converged: bool,
}

#[derive(Debug, Clone)]
pub struct CompositeProblem {
    matrix: SparseRowMatrix,
    loss: LossFamily,
    reg: Regularizer,
    scaling: Scaling,
    stats: MatrixStats,
    lipschitz_override: Option<f64>,
}

impl CompositeProblem {
    /// Assembles and validates a problem. Hinge labels are folded into the rows
    /// here, so row `i` of [`Self::matrix`] is `b_i·a_i`.
    pub fn new(mut matrix: SparseRowMatrix, loss: LossFamily, reg: Regularizer, scaling: Scaling) -> Result<Self> {
        if loss.len() != matrix.n_rows() {
            return Err(Error::structural(format!(
                "{} targets for {} rows",
                loss.len(),
                matrix.n_rows()
            )));
        }
        if matrix.n_rows() == 0 || matrix.n_cols() == 0 {
            return Err(Error::structural("problem needs at least one row and one column"));
        }
        if !(loss.dual_perturbation >= 0.0 && loss.dual_perturbation.is_finite()) {
            return Err(Error::config(format!(
                "dual perturbation must be finite and nonnegative, got {}",
                loss.dual_perturbation
            )));
        }
        if loss.targets.iter().any(|b| !b.is_finite()) {
            return Err(Error::structural("non-finite target"));
        }
        reg.validate(matrix.n_cols())?;
        if loss.kind == LossKind::Hinge {
            if let Some(b) = loss.targets.iter().find(|&&b| b != 1.0 && b != -1.0) {
                return Err(Error::structural(format!("hinge labels must be ±1, got {b}")));
            }
            matrix.scale_rows(&loss.targets)?;
        }
        let stats = matrix.stats();
        Ok(Self {
            matrix,
            loss,
            reg,
            scaling,
            stats,
            lipschitz_override: None,
        })
    }

    /// Supplies the Lipschitz constant of the scaled loss explicitly.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz_override = Some(lipschitz);
        self
    }

    pub fn matrix(&self) -> &SparseRowMatrix {
        &self.matrix
    }

    pub fn loss(&self) -> &LossFamily {
        &self.loss
    }

    pub fn reg(&self) -> &Regularizer {
        &self.reg
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn stats(&self) -> MatrixStats {
        self.stats
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn d(&self) -> usize {
        self.matrix.n_cols()
    }

    /// `c` in `c·Σ f_i`.
    pub fn loss_scale(&self) -> f64 {
        match self.scaling {
            Scaling::Deterministic => 1.0,
            Scaling::FiniteSum => 1.0 / self.n() as f64,
        }
    }

    /// `k = n·c`, the weight on each `f_i` in the stochastic convention.
    pub fn sample_scale(&self) -> f64 {
        self.n() as f64 * self.loss_scale()
    }

    pub fn constants(&self) -> ProblemConstants {
        let r = if self.stats.spectral_converged {
            self.stats.spectral_norm
        } else {
            self.stats.spectral_norm / SPECTRAL_SAFETY
        };
        ProblemConstants {
            gamma: self.loss.effective_gamma(),
            mu: self.reg.effective_mu(),
            lipschitz: self.lipschitz_override.or_else(|| self.default_lipschitz()),
            r,
            r_bar: self.stats.max_row_norm,
            density: self.stats.density,
            spectral_converged: self.stats.spectral_converged,
        }
    }

    /// `γ` of the full loss `f = c·Σ f_i` seen by the deterministic solvers.
    pub fn gamma_deterministic(&self) -> f64 {
        self.loss.effective_gamma() / self.loss_scale()
    }

    /// `γ` of each `φ_i = k·f_i` seen by the stochastic solvers.
    pub fn gamma_stochastic(&self) -> f64 {
        self.loss.effective_gamma() / self.sample_scale()
    }

    fn default_lipschitz(&self) -> Option<f64> {
        let c = self.loss_scale();
        match self.loss.kind {
            // |f_i'| ≤ 1 in every coordinate
            LossKind::Hinge => Some(c * (self.n() as f64).sqrt()),
            // ‖∇f‖ = c‖Ax − b‖ ≤ c‖b‖ on the sublevel set {P ≤ P(0)} when g ≥ 0 = g(0)
            LossKind::Squared => {
                let nonneg = !matches!(self.reg.kind, crate::prox::RegKind::Kl { .. });
                nonneg.then(|| c * dot(&self.loss.targets, &self.loss.targets).sqrt())
            }
        }
    }

    /// `Ax`.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d(), "primal vector length");
        let mut u = vec![0.0; self.n()];
        self.matrix.mul_into(x, &mut u);
        u
    }

    /// Objective including active perturbations.
    pub fn primal_value(&self, x: &[f64]) -> f64 {
        let u = self.margins(x);
        let f: f64 = u.iter().enumerate().map(|(i, &ui)| self.loss.value(i, ui)).sum();
        self.loss_scale() * f + self.reg.value(x)
    }

    /// Objective of the original problem, ignoring `δ₁` and `δ₂`.
    pub fn primal_value_unperturbed(&self, x: &[f64]) -> f64 {
        let u = self.margins(x);
        let f: f64 = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| self.loss.value_unperturbed(i, ui))
            .sum();
        self.loss_scale() * f + self.reg.value_unperturbed(x)
    }

    /// `Σ_i c·f̃_i*(y_i / c)` for a deterministic-convention dual vector.
    pub fn loss_conjugate(&self, y: &[f64]) -> f64 {
        let c = self.loss_scale();
        y.iter()
            .enumerate()
            .map(|(i, &yi)| c * self.loss.conjugate(i, yi / c))
            .sum()
    }

    /// `F(x, y) = ⟨y, Ax⟩ + g̃(x) − Σ c·f̃_i*(y_i/c)`.
    pub fn saddle_value(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.n(), "dual vector length");
        let u = self.margins(x);
        dot(y, &u) + self.reg.value(x) - self.loss_conjugate(y)
    }

    /// `F̃(x, y)` for a stochastic-convention dual vector.
    pub fn saddle_value_stochastic(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n() as f64;
        let yd: Vec<f64> = y.iter().map(|v| v / n).collect();
        self.saddle_value(x, &yd)
    }

    /// Dual objective `D(y) = −Σ c·f̃_i*(y_i/c) − Σ_j g̃_j*(−(Aᵀy)_j)`.
    pub fn dual_value(&self, y: &[f64]) -> f64 {
        let z = self.matrix.matvec(y, true).expect("dual vector length");
        let g_conj: f64 = z
            .iter()
            .enumerate()
            .map(|(j, &zj)| self.reg.conjugate_coord(j, -zj))
            .sum();
        -self.loss_conjugate(y) - g_conj
    }

    /// Shrinks `y` toward zero until `−Aᵀy` lies in the domain of `g̃*`.
    ///
    /// Needed for regularizers whose conjugate is an indicator (l1, huber);
    /// both loss conjugate domains contain the segment `[0, y]`.
    pub fn make_dual_feasible(&self, y: &[f64]) -> Vec<f64> {
        let Some(radius) = self.reg.conjugate_radius() else {
            return y.to_vec();
        };
        let z = self.matrix.matvec(y, true).expect("dual vector length");
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if zmax <= radius {
            y.to_vec()
        } else {
            let s = radius / zmax;
            y.iter().map(|v| v * s).collect()
        }
    }

    /// `P̃(x) − D(ŷ)` with `ŷ` the feasible rescaling of `y`; bounds `P̃(x) − P̃*`.
    pub fn duality_gap(&self, x: &[f64], y: &[f64]) -> f64 {
        let y = self.make_dual_feasible(y);
        self.primal_value(x) - self.dual_value(&y)
    }

    /// Deterministic-convention dual implied by `x`: `y_i = c·f̃_i'(⟨a_i, x⟩)`.
    pub fn dual_from_primal(&self, x: &[f64]) -> Vec<f64> {
        let c = self.loss_scale();
        self.margins(x)
            .iter()
            .enumerate()
            .map(|(i, &u)| c * self.loss.derivative(i, u))
            .collect()
    }

    /// `∇(c·Σ f̃_i(⟨a_i, x⟩))`; a subgradient for unsmoothed hinge.
    pub fn loss_gradient(&self, x: &[f64]) -> Vec<f64> {
        let y = self.dual_from_primal(x);
        self.matrix.matvec(&y, true).expect("dual vector length")
    }

    /// Norm of the proximal gradient mapping `(x − prox_{s g}(x − s∇f(x)))/s`.
    pub fn gradient_mapping_norm(&self, x: &[f64], step: f64) -> f64 {
        let grad = self.loss_gradient(x);
        x.iter()
            .zip(&grad)
            .enumerate()
            .map(|(j, (&xj, &gj))| {
                let p = self.reg.prox_step(j, step, xj - step * gj);
                let r = (xj - p) / step;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Perturbed copy: `δ₁ = c1·ε` if the loss is non-smooth, `δ₂ = c2·ε` if the
    /// regularizer is not strongly convex. Smooth, strongly convex problems are returned unchanged.
    pub fn perturb(&self, epsilon: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::config(format!(
                "target accuracy must be positive, got {epsilon}"
            )));
        }
        let mut out = self.clone();
        if self.loss.base_gamma() == 0.0 {
            out.loss.dual_perturbation = c1 * epsilon;
        }
        if self.reg.base_mu() == 0.0 {
            out.reg.primal_perturbation = c2 * epsilon;
        }
        Ok(out)
    }

    /// Copy with explicit perturbations, overriding any present.
    pub fn with_perturbations(&self, delta1: f64, delta2: f64) -> Self {
        let mut out = self.clone();
        out.loss.dual_perturbation = delta1;
        out.reg.primal_perturbation = delta2;
        out
    }

    /// Copy with both perturbations removed.
    pub fn unperturbed(&self) -> Self {
        self.with_perturbations(0.0, 0.0)
    }

    pub fn is_perturbed(&self) -> bool {
        self.loss.dual_perturbation > 0.0 || self.reg.primal_perturbation > 0.0
    }
}

/// Proportion of coordinates with `|x_j| > 1e-12`.
pub fn nnz_fraction(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().filter(|v| v.abs() > 1e-12).count() as f64 / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ridge_1d() -> CompositeProblem {
        CompositeProblem::new(
            SparseRowMatrix::identity(1),
            LossFamily::squared(vec![1.0]),
            Regularizer::l2(1.0),
            Scaling::Deterministic,
        )
        .unwrap()
    }

    #[test]
    fn ridge_1d_objective_by_hand() {
        let p = ridge_1d();
        assert_eq!(p.primal_value(&[0.5]), 0.25);
        let c = p.constants();
        assert_eq!((c.gamma, c.mu, c.r, c.r_bar), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hinge_at_origin_violates_every_margin_by_one() {
        let a = SparseRowMatrix::from_dense(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![0.0, 3.0]], 2).unwrap();
        let p = CompositeProblem::new(
            a,
            LossFamily::hinge(vec![1.0, -1.0, 1.0]),
            Regularizer::l1(0.3),
            Scaling::FiniteSum,
        )
        .unwrap();
        assert_eq!(p.primal_value(&[0.0, 0.0]), 1.0);
        let c = p.constants();
        assert_eq!((c.gamma, c.mu), (0.0, 0.0));
        assert_eq!(c.lipschitz, Some((3.0f64).sqrt() / 3.0));
        let q = p.perturb(0.01, 1.0, 1.0).unwrap();
        let c = q.constants();
        assert_eq!((c.gamma, c.mu), (0.01, 0.01));
        // the unperturbed value ignores the smoothing
        assert_eq!(q.primal_value_unperturbed(&[0.0, 0.0]), 1.0);
        assert!(q.primal_value(&[0.0, 0.0]) < 1.0);
    }

    #[test]
    fn perturb_leaves_smooth_strongly_convex_alone() {
        let p = ridge_1d().perturb(0.1, 0.1, 0.1).unwrap();
        assert!(!p.is_perturbed());
        assert!(ridge_1d().perturb(0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn rejects_mismatched_targets_and_bad_labels() {
        let r = CompositeProblem::new(
            SparseRowMatrix::identity(2),
            LossFamily::squared(vec![1.0]),
            Regularizer::l2(1.0),
            Scaling::Deterministic,
        );
        assert!(matches!(r, Err(Error::Structural(_))));
        let r = CompositeProblem::new(
            SparseRowMatrix::identity(2),
            LossFamily::hinge(vec![1.0, 0.5]),
            Regularizer::l2(1.0),
            Scaling::Deterministic,
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_gap_at_ridge_optimum() {
        let p = ridge_1d();
        let x = [0.5];
        let y = p.dual_from_primal(&x);
        assert!(p.duality_gap(&x, &y).abs() < 1e-15);
        assert!((p.saddle_value(&x, &y) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nnz_fraction_counts_threshold() {
        assert_eq!(nnz_fraction(&[0.0, 1e-13, 2e-12, -1.0]), 0.5);
    }
}
