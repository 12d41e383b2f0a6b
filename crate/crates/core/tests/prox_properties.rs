mod common;

use common::argmin_scalar;
use dapd::prox::soft_threshold;
use dapd::{LossFamily, Regularizer};
use proptest::prelude::*;

fn regularizers() -> impl Strategy<Value = Regularizer> {
    prop_oneof![
        (0.0..5.0f64).prop_map(Regularizer::l1),
        (0.0..5.0f64).prop_map(Regularizer::l2),
        (0.0..5.0f64, 0.0..5.0f64).prop_map(|(a, b)| Regularizer::elastic_net(a, b)),
        (0.01..5.0f64, 0.1..5.0f64).prop_map(|(l, m)| Regularizer::huber(l, m)),
        (0.1..5.0f64).prop_map(|w| Regularizer::kl(vec![w])),
    ]
}

fn perturbed(reg: Regularizer, delta2: f64) -> Regularizer {
    reg.with_primal_perturbation(delta2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// A prox is firmly nonexpansive, so in one dimension it is monotone and 1-Lipschitz.
    #[test]
    fn regularizer_prox_is_monotone_and_nonexpansive(
        reg in regularizers(),
        delta2 in prop_oneof![Just(0.0), 0.0..1.0f64],
        step in 1e-3..1e3f64,
        a in -50.0..50.0f64,
        b in -50.0..50.0f64,
    ) {
        let reg = perturbed(reg, delta2);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (pl, ph) = (reg.prox_coord(0, step, lo).unwrap(), reg.prox_coord(0, step, hi).unwrap());
        prop_assert!(pl <= ph + 1e-12 * (1.0 + ph.abs()));
        prop_assert!(ph - pl <= (hi - lo) * (1.0 + 1e-12) + 1e-12);
    }

    /// The prox output solves its own optimality condition: no nearby point does better.
    #[test]
    fn regularizer_prox_is_a_local_minimizer(
        reg in regularizers(),
        step in 1e-2..1e2f64,
        v in -20.0..20.0f64,
    ) {
        let p = reg.prox_coord(0, step, v).unwrap();
        let obj = |z: f64| step * reg.value_coord(0, z) + 0.5 * (z - v) * (z - v);
        let base = obj(p);
        prop_assert!(base.is_finite());
        for h in [1e-3, 1e-5] {
            for z in [p - h, p + h] {
                prop_assert!(obj(z) >= base - 1e-9 * (1.0 + base.abs()), "z={z} beats prox {p}");
            }
        }
    }

    /// Dual averaging with precision `p` and linear term `q` is a prox at `q/p` with step `1/p`.
    #[test]
    fn prox_precision_agrees_with_prox_step(
        reg in regularizers(),
        p in 1e-3..1e3f64,
        q in -100.0..100.0f64,
    ) {
        let a = reg.prox_precision(0, p, q);
        let b = reg.prox_coord(0, 1.0 / p, q / p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn l1_prox_is_soft_thresholding(lambda in 0.0..5.0f64, step in 1e-3..1e3f64, v in -50.0..50.0f64) {
        let got = Regularizer::l1(lambda).prox_coord(0, step, v).unwrap();
        let want = (v.abs() - step * lambda).max(0.0) * v.signum();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + v.abs()));
        prop_assert!((soft_threshold(v, step * lambda) - got).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn kl_prox_stays_in_the_domain(w in 1e-3..10.0f64, step in 1e-6..1e6f64, v in -1e4..1e4f64) {
        let z = Regularizer::kl(vec![w]).prox_coord(0, step, v).unwrap();
        prop_assert!(z > 0.0 && z.is_finite(), "z = {z}");
    }

    /// `prox_{τf*}(v) + τ·prox_{f/τ}(v/τ) = v` for every loss and dual smoothing.
    #[test]
    fn loss_moreau_decomposition(
        hinge in any::<bool>(),
        target in -3.0..3.0f64,
        delta1 in prop_oneof![Just(0.0), 1e-4..1.0f64],
        tau in 1e-3..1e3f64,
        v in -100.0..100.0f64,
    ) {
        let loss = if hinge { LossFamily::hinge(vec![1.0]) } else { LossFamily::squared(vec![target]) };
        let loss = loss.with_dual_perturbation(delta1);
        let y = loss.prox_conjugate(0, tau, v);
        let back = y + tau * loss.prox_primal(0, 1.0 / tau, v / tau);
        prop_assert!((back - v).abs() <= 1e-10 * (1.0 + v.abs()), "residual {}", back - v);
        if hinge {
            prop_assert!((-1.0..=0.0).contains(&y));
        }
    }

    /// The scaled conjugate prox equals a brute-force minimization of `τ k f*(y/k) + ½(y − v)²`.
    #[test]
    fn scaled_conjugate_prox_matches_definition(
        target in -2.0..2.0f64,
        k in 0.01..100.0f64,
        tau in 0.01..10.0f64,
        v in -10.0..10.0f64,
    ) {
        let loss = LossFamily::squared(vec![target]);
        let got = loss.prox_conjugate_scaled(0, tau, v, k);
        let conj = |y: f64| 0.5 * y * y + target * y;
        let want = argmin_scalar(|y| tau * k * conj(y / k) + 0.5 * (y - v) * (y - v), -1e3, 1e3);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
    }

    /// Fenchel–Young holds with equality at `(prox(v), (v − prox(v))/step)`.
    #[test]
    fn regularizer_fenchel_young_at_prox_points(
        reg in regularizers(),
        delta2 in prop_oneof![Just(0.0), 1e-3..1.0f64],
        step in 1e-2..1e2f64,
        v in -20.0..20.0f64,
    ) {
        let reg = perturbed(reg, delta2);
        let p = reg.prox_coord(0, step, v).unwrap();
        let w = (v - p) / step;
        let g = reg.value_coord(0, p);
        let residual = g + reg.conjugate_coord(0, w) - p * w;
        prop_assert!(residual.abs() <= 1e-9 * (1.0 + g.abs() + (p * w).abs()), "residual {residual}");
    }
}

#[test]
fn hinge_smoothing_is_the_moreau_envelope() {
    // f̃(u) = min_z max(1 − z, 0) + (z − u)²/(2δ₁)
    let delta1 = 0.3;
    let loss = LossFamily::hinge(vec![1.0]).with_dual_perturbation(delta1);
    for k in 0..=60 {
        let u = -2.0 + 0.07 * k as f64;
        let env = |z: f64| (1.0 - z).max(0.0) + (z - u) * (z - u) / (2.0 * delta1);
        let z = argmin_scalar(env, -10.0, 10.0);
        assert!((loss.value(0, u) - env(z)).abs() < 1e-9, "u = {u}");
    }
}

#[test]
fn nonpositive_step_is_rejected() {
    for step in [0.0, -1.0, f64::NAN] {
        assert!(Regularizer::l1(1.0).prox_coord(0, step, 1.0).is_err());
    }
}
