//! Per-sample losses, separable regularizers, their conjugates and proximal maps.
//!
//! Losses act on a scalar margin `u = ⟨a_i, x⟩`; regularizers act on one
//! coordinate at a time. Both carry an optional quadratic perturbation:
//! the dual perturbation `δ₁` adds `(δ₁/2)y²` to every `f_i*` (which smooths
//! `f_i`), the primal perturbation `δ₂` adds `(δ₂/2)z²` to every `g_j`.
//! Every prox and value below includes the active perturbation; the
//! `*_unperturbed` accessors report the original functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `f_i(u) = ½(u − b_i)²`.
    Squared,
    /// `f_i(u) = max(1 − u, 0)`; labels are folded into the rows.
    Hinge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossFamily {
    pub kind: LossKind,
    /// Regression targets for squared loss, ±1 labels for hinge.
    pub targets: Vec<f64>,
    /// `δ₁ ≥ 0`.
    pub dual_perturbation: f64,
}

impl LossFamily {
    pub fn squared(targets: Vec<f64>) -> Self {
        Self {
            kind: LossKind::Squared,
            targets,
            dual_perturbation: 0.0,
        }
    }

    pub fn hinge(labels: Vec<f64>) -> Self {
        Self {
            kind: LossKind::Hinge,
            targets: labels,
            dual_perturbation: 0.0,
        }
    }

    pub fn with_dual_perturbation(mut self, delta1: f64) -> Self {
        self.dual_perturbation = delta1;
        self
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `γ` of the unperturbed per-sample loss: each `f_i` is `(1/γ)`-smooth.
    pub fn base_gamma(&self) -> f64 {
        match self.kind {
            LossKind::Squared => 1.0,
            LossKind::Hinge => 0.0,
        }
    }

    /// `γ + δ₁`, the strong-convexity modulus of the perturbed `f_i*`.
    pub fn effective_gamma(&self) -> f64 {
        self.base_gamma() + self.dual_perturbation
    }

    /// `argmin_y τ(f_i*(y) + (δ₁/2)y²) + ½(y − v)²`.
    #[inline]
    pub fn prox_conjugate(&self, i: usize, tau: f64, v: f64) -> f64 {
        let d1 = self.dual_perturbation;
        match self.kind {
            LossKind::Squared => (v - tau * self.targets[i]) / (1.0 + tau * (1.0 + d1)),
            LossKind::Hinge => ((v - tau) / (1.0 + tau * d1)).clamp(-1.0, 0.0),
        }
    }

    /// Prox of the conjugate of `k·f̃_i`: `argmin_y τ·k·f̃_i*(y/k) + ½(y − v)²`.
    #[inline]
    pub fn prox_conjugate_scaled(&self, i: usize, tau: f64, v: f64, k: f64) -> f64 {
        if k == 1.0 {
            self.prox_conjugate(i, tau, v)
        } else {
            k * self.prox_conjugate(i, tau / k, v / k)
        }
    }

    /// `argmin_z s·f̃_i(z) + ½(z − v)²`, where `f̃_i` is the loss whose
    /// conjugate is `f_i* + (δ₁/2)y²` (the Moreau envelope of `f_i` for hinge).
    pub fn prox_primal(&self, i: usize, s: f64, v: f64) -> f64 {
        let d1 = self.dual_perturbation;
        match self.kind {
            LossKind::Squared => {
                let s = s / (1.0 + d1);
                (v + s * self.targets[i]) / (1.0 + s)
            }
            LossKind::Hinge => {
                let t = s + d1;
                let p = hinge_prox(t, v);
                v + (s / t) * (p - v)
            }
        }
    }

    /// `f̃_i(u)`, including the smoothing from `δ₁`.
    pub fn value(&self, i: usize, u: f64) -> f64 {
        let d1 = self.dual_perturbation;
        match self.kind {
            LossKind::Squared => {
                let r = u - self.targets[i];
                0.5 * r * r / (1.0 + d1)
            }
            LossKind::Hinge if d1 > 0.0 => {
                if u >= 1.0 {
                    0.0
                } else if u <= 1.0 - d1 {
                    1.0 - u - 0.5 * d1
                } else {
                    (1.0 - u) * (1.0 - u) / (2.0 * d1)
                }
            }
            LossKind::Hinge => (1.0 - u).max(0.0),
        }
    }

    pub fn value_unperturbed(&self, i: usize, u: f64) -> f64 {
        match self.kind {
            LossKind::Squared => {
                let r = u - self.targets[i];
                0.5 * r * r
            }
            LossKind::Hinge => (1.0 - u).max(0.0),
        }
    }

    /// Derivative of `f̃_i`; for unsmoothed hinge a subgradient (`−1` on `u < 1`, else 0).
    pub fn derivative(&self, i: usize, u: f64) -> f64 {
        let d1 = self.dual_perturbation;
        match self.kind {
            LossKind::Squared => (u - self.targets[i]) / (1.0 + d1),
            LossKind::Hinge if d1 > 0.0 => ((u - 1.0) / d1).clamp(-1.0, 0.0),
            LossKind::Hinge => {
                if u < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f_i*(y) + (δ₁/2)y²`; `+∞` outside the domain.
    pub fn conjugate(&self, i: usize, y: f64) -> f64 {
        let d1 = self.dual_perturbation;
        let base = match self.kind {
            LossKind::Squared => 0.5 * y * y + self.targets[i] * y,
            LossKind::Hinge => {
                if (-1.0..=0.0).contains(&y) {
                    y
                } else {
                    f64::INFINITY
                }
            }
        };
        base + 0.5 * d1 * y * y
    }
}

/// `argmin_z t·max(1 − z, 0) + ½(z − v)²`.
#[inline]
fn hinge_prox(t: f64, v: f64) -> f64 {
    if v > 1.0 {
        v
    } else if v < 1.0 - t {
        v + t
    } else {
        1.0
    }
}

/// Relative slack on bounded conjugate domains, so a subgradient computed as
/// `v − prox(v)` is not rejected over one rounding error.
const DOMAIN_SLACK: f64 = 1.0 + 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegKind {
    /// `(λ/2) z²`.
    L2 { lambda: f64 },
    /// `λ |z|`.
    L1 { lambda: f64 },
    /// `λ₁|z| + (λ₂/2) z²`.
    ElasticNet { l1: f64, l2: f64 },
    /// `μ_H z²` for `|z| ≤ λ/(2μ_H)`, `λ(|z| − λ/(4μ_H))` beyond.
    Huber { lambda: f64, mu_h: f64 },
    /// `w_j log(w_j / z)` on `z > 0`.
    Kl { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    pub kind: RegKind,
    /// `δ₂ ≥ 0`.
    pub primal_perturbation: f64,
}

impl Regularizer {
    pub fn new(kind: RegKind) -> Self {
        Self {
            kind,
            primal_perturbation: 0.0,
        }
    }

    pub fn l2(lambda: f64) -> Self {
        Self::new(RegKind::L2 { lambda })
    }

    pub fn l1(lambda: f64) -> Self {
        Self::new(RegKind::L1 { lambda })
    }

    pub fn elastic_net(l1: f64, l2: f64) -> Self {
        Self::new(RegKind::ElasticNet { l1, l2 })
    }

    pub fn huber(lambda: f64, mu_h: f64) -> Self {
        Self::new(RegKind::Huber { lambda, mu_h })
    }

    pub fn kl(weights: Vec<f64>) -> Self {
        Self::new(RegKind::Kl { weights })
    }

    pub fn with_primal_perturbation(mut self, delta2: f64) -> Self {
        self.primal_perturbation = delta2;
        self
    }

    /// Checks parameter signs and, for KL, the weight count against `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let nonneg = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be finite and nonnegative, got {x}")))
            }
        };
        nonneg("primal perturbation", self.primal_perturbation)?;
        match &self.kind {
            RegKind::L2 { lambda } | RegKind::L1 { lambda } => nonneg("lambda", *lambda),
            RegKind::ElasticNet { l1, l2 } => {
                nonneg("l1", *l1)?;
                nonneg("l2", *l2)
            }
            RegKind::Huber { lambda, mu_h } => {
                nonneg("lambda", *lambda)?;
                if *mu_h > 0.0 && mu_h.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config(format!("huber mu_h must be positive, got {mu_h}")))
                }
            }
            RegKind::Kl { weights } => {
                if weights.len() != d {
                    return Err(Error::config(format!(
                        "kl regularizer has {} weights for {d} coordinates",
                        weights.len()
                    )));
                }
                match weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                    Some(w) => Err(Error::config(format!("kl weights must be positive, got {w}"))),
                    None => Ok(()),
                }
            }
        }
    }

    /// `μ` of the unperturbed regularizer.
    pub fn base_mu(&self) -> f64 {
        match &self.kind {
            RegKind::L2 { lambda } => *lambda,
            RegKind::ElasticNet { l2, .. } => *l2,
            RegKind::L1 { .. } | RegKind::Huber { .. } | RegKind::Kl { .. } => 0.0,
        }
    }

    /// `μ + δ₂`.
    pub fn effective_mu(&self) -> f64 {
        self.base_mu() + self.primal_perturbation
    }

    /// `argmin_z g̃_j(z) + (p/2)z² − q z` for `p ≥ 0`, with `g̃_j = g_j + (δ₂/2)z²`.
    ///
    /// Every prox used by the solvers reduces to this form: dual averaging
    /// produces `p = 1/B, q = (x0_j − s_j)/B`, a plain prox step `p = 1/step, q = v/step`.
    /// With `p + δ₂ = 0` the minimizer may not exist; the result is then non-finite.
    #[inline]
    pub fn prox_precision(&self, j: usize, p: f64, q: f64) -> f64 {
        let a = p + self.primal_perturbation;
        match &self.kind {
            RegKind::L2 { lambda } => q / (a + lambda),
            RegKind::L1 { lambda } => soft_threshold(q, *lambda) / a,
            RegKind::ElasticNet { l1, l2 } => soft_threshold(q, *l1) / (a + l2),
            RegKind::Huber { lambda, mu_h } => {
                let z = q / (a + 2.0 * mu_h);
                if z.abs() <= lambda / (2.0 * mu_h) {
                    z
                } else {
                    (q - lambda * q.signum()) / a
                }
            }
            RegKind::Kl { weights } => {
                // positive root of a z² − q z − w = 0
                let w = weights[j];
                let disc = (q * q + 4.0 * a * w).sqrt();
                if q >= 0.0 {
                    (q + disc) / (2.0 * a)
                } else {
                    2.0 * w / (disc - q)
                }
            }
        }
    }

    /// `argmin_z step·g̃_j(z) + ½(z − v)²`.
    pub fn prox_coord(&self, j: usize, step: f64, v: f64) -> Result<f64> {
        if !(step > 0.0) {
            return Err(Error::structural(format!("prox step must be positive, got {step}")));
        }
        Ok(self.prox_step(j, step, v))
    }

    /// Unchecked [`Self::prox_coord`] for hot loops; `step > 0` is the caller's job.
    #[inline]
    pub fn prox_step(&self, j: usize, step: f64, v: f64) -> f64 {
        self.prox_precision(j, 1.0 / step, v / step)
    }

    /// `g_j(z)`; `+∞` outside the domain.
    pub fn value_coord_unperturbed(&self, j: usize, z: f64) -> f64 {
        match &self.kind {
            RegKind::L2 { lambda } => 0.5 * lambda * z * z,
            RegKind::L1 { lambda } => lambda * z.abs(),
            RegKind::ElasticNet { l1, l2 } => l1 * z.abs() + 0.5 * l2 * z * z,
            RegKind::Huber { lambda, mu_h } => {
                if z.abs() >= lambda / (2.0 * mu_h) {
                    lambda * (z.abs() - lambda / (4.0 * mu_h))
                } else {
                    mu_h * z * z
                }
            }
            RegKind::Kl { weights } => {
                let w = weights[j];
                if z > 0.0 {
                    w * (w / z).ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `g̃_j(z) = g_j(z) + (δ₂/2)z²`.
    pub fn value_coord(&self, j: usize, z: f64) -> f64 {
        self.value_coord_unperturbed(j, z) + 0.5 * self.primal_perturbation * z * z
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(j, &z)| self.value_coord(j, z)).sum()
    }

    pub fn value_unperturbed(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &z)| self.value_coord_unperturbed(j, z))
            .sum()
    }

    /// `g̃_j*(z) = sup_x x z − g̃_j(x)`; `+∞` outside the domain.
    pub fn conjugate_coord(&self, j: usize, z: f64) -> f64 {
        let curved = self.primal_perturbation > 0.0
            || matches!(self.kind, RegKind::L2 { lambda } if lambda > 0.0)
            || matches!(self.kind, RegKind::ElasticNet { l2, .. } if l2 > 0.0);
        if curved {
            // the supremum is attained at the prox with zero extra precision
            let x = self.prox_precision(j, 0.0, z);
            return z * x - self.value_coord(j, x);
        }
        match &self.kind {
            RegKind::L1 { lambda } | RegKind::ElasticNet { l1: lambda, .. } => {
                if z.abs() <= lambda * DOMAIN_SLACK {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegKind::L2 { .. } => {
                if z == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegKind::Huber { lambda, mu_h } => {
                if z.abs() <= lambda * DOMAIN_SLACK {
                    z * z / (4.0 * mu_h)
                } else {
                    f64::INFINITY
                }
            }
            RegKind::Kl { weights } => {
                if z < 0.0 {
                    -weights[j] * (1.0 + (-z).ln())
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Bound on `|z|` over the domain of `g̃_j*`, or `None` if unbounded.
    pub(crate) fn conjugate_radius(&self) -> Option<f64> {
        if self.primal_perturbation > 0.0 {
            return None;
        }
        match &self.kind {
            RegKind::L1 { lambda } => Some(*lambda),
            RegKind::ElasticNet { l1, l2 } if *l2 == 0.0 => Some(*l1),
            RegKind::Huber { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn conjugate_prox_by_hand() {
        let sq = LossFamily::squared(vec![1.0]);
        assert_eq!(sq.prox_conjugate(0, 1.0, 3.0), 1.0);
        let h = LossFamily::hinge(vec![1.0]);
        assert!(close(h.prox_conjugate(0, 0.5, 0.3), -0.2, 1e-15));
        let hp = h.clone().with_dual_perturbation(0.1);
        assert_eq!(hp.prox_conjugate(0, 0.5, 2.0), 0.0);
        assert_eq!(hp.prox_conjugate(0, 0.5, -3.0), -1.0);
    }

    #[test]
    fn regularizer_prox_by_hand() {
        let l1 = Regularizer::l1(1.0);
        assert_eq!(l1.prox_coord(0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(l1.prox_coord(0, 1.0, 0.5).unwrap(), 0.0);
        let kl = Regularizer::kl(vec![1.0]);
        assert_eq!(kl.prox_coord(0, 1.0, 0.0).unwrap(), 1.0);
        let hub = Regularizer::huber(1e-4, 1.0);
        assert!(close(hub.prox_coord(0, 1.0, 1e-5).unwrap(), 1e-5 / 3.0, 1e-14));
        assert!(close(hub.prox_coord(0, 1.0, 1.0).unwrap(), 0.9999, 1e-14));
        assert!(matches!(l1.prox_coord(0, 0.0, 1.0), Err(Error::Structural(_))));
        assert!(l1.prox_coord(0, -1.0, 1.0).is_err());
    }

    #[test]
    fn kl_root_is_stable_for_large_negative_input() {
        let kl = Regularizer::kl(vec![2.0]);
        let z = kl.prox_coord(0, 1.0, -1e8).unwrap();
        // z ≈ w·step/|v| when v ≪ 0
        assert!(close(z, 2e-8, 1e-6));
        assert!(z > 0.0);
    }

    #[test]
    fn kl_value_outside_domain_is_infinite() {
        let kl = Regularizer::kl(vec![1.0, 1.0]);
        assert_eq!(kl.value(&[1.0, 0.0]), f64::INFINITY);
        assert_eq!(kl.value(&[1.0, 1.0]), 0.0);
    }

    #[test]
    fn constants_follow_definitions() {
        assert_eq!(Regularizer::l2(0.3).base_mu(), 0.3);
        assert_eq!(Regularizer::l1(0.3).base_mu(), 0.0);
        assert_eq!(Regularizer::elastic_net(0.1, 0.2).base_mu(), 0.2);
        assert_eq!(Regularizer::l1(1.0).with_primal_perturbation(0.01).effective_mu(), 0.01);
        let h = LossFamily::hinge(vec![1.0]).with_dual_perturbation(0.01);
        assert_eq!(h.effective_gamma(), 0.01);
    }

    #[test]
    fn huber_is_continuous_at_the_knee() {
        let hub = Regularizer::huber(0.5, 2.0);
        let knee = 0.5 / 4.0;
        let left = hub.value_coord(0, knee - 1e-12);
        let right = hub.value_coord(0, knee + 1e-12);
        assert!((left - right).abs() < 1e-11);
    }

    #[test]
    fn conjugates_satisfy_fenchel_young_at_prox_points() {
        // g(x) + g*(z) = x z when z ∈ ∂g(x)
        let regs = [
            Regularizer::l2(0.7),
            Regularizer::elastic_net(0.2, 0.5),
            Regularizer::huber(0.3, 1.5),
            Regularizer::kl(vec![1.3]),
            Regularizer::l1(0.4).with_primal_perturbation(0.2),
        ];
        for reg in &regs {
            for &v in &[-2.0, -0.1, 0.05, 1.7] {
                let x = reg.prox_step(0, 1.0, v);
                let z = v - x;
                let lhs = reg.value_coord(0, x) + reg.conjugate_coord(0, z);
                assert!(close(lhs, x * z, 1e-10), "{reg:?} v={v}: {lhs} vs {}", x * z);
            }
        }
    }
}
