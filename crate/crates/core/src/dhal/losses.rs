//! Label fusion, the distance-based potential-energy weight, and the
//! adversarial actor loss.

use crate::nnet::Real;

/// Fuse raw discriminator outputs into the final conflict-role labels.
///
/// Both fused labels consume the raw (primed) predictions, making the fusion
/// order-independent; results are truncated into [0, 1].
pub fn fuse_labels<T: Real>(l_c: T, l_ac_raw: T, l_pc_raw: T, alpha: T) -> (T, T) {
    let one = T::one();
    let l_ac = (alpha * l_ac_raw + (one - alpha) * (l_c - l_pc_raw)).max(T::zero()).min(one);
    let l_pc = (alpha * l_pc_raw + (one - alpha) * (l_c - l_ac_raw)).max(T::zero()).min(one);
    (l_ac, l_pc)
}

/// Partial derivatives of the fused pair w.r.t. the three raw predictions,
/// zero where truncation is active.
///
/// Returns `(d_ac/d[c, ac', pc'], d_pc/d[c, ac', pc'])`.
pub fn fuse_labels_grad<T: Real>(
    l_c: T,
    l_ac_raw: T,
    l_pc_raw: T,
    alpha: T,
) -> ([T; 3], [T; 3]) {
    let one = T::one();
    let zero = T::zero();
    let pre_ac = alpha * l_ac_raw + (one - alpha) * (l_c - l_pc_raw);
    let pre_pc = alpha * l_pc_raw + (one - alpha) * (l_c - l_ac_raw);
    let ac_open = pre_ac > zero && pre_ac < one;
    let pc_open = pre_pc > zero && pre_pc < one;
    let d_ac = if ac_open { [one - alpha, alpha, -(one - alpha)] } else { [zero; 3] };
    let d_pc = if pc_open { [one - alpha, -(one - alpha), alpha] } else { [zero; 3] };
    (d_ac, d_pc)
}

/// Potential-energy weight: zero at the stop line, `gamma` at the far control
/// boundary.
pub fn beta<T: Real>(d_t: T, d_min: T, d_max: T, gamma: T) -> T {
    assert!(d_max > d_min, "degenerate control boundaries");
    let d = d_t.max(d_min).min(d_max);
    gamma * (d - d_min) / (d_max - d_min)
}

/// The adversarial actor loss for one state-action pair.
///
/// The first term rewards acceleration when no conflict is predicted; the
/// second pushes priority holders toward `a_max` and yielders toward `a_min`,
/// gated by the predicted final-collision label.
pub fn actor_loss<T: Real>(
    a: T,
    l_pc: T,
    l_ac: T,
    delta_c: T,
    beta: T,
    a_min: T,
    a_max: T,
) -> T {
    let one = T::one();
    beta * (one - l_pc) * (one - l_ac) * (a_max - a)
        + (one - beta) * delta_c * ((a_max - a) * l_pc + (a - a_min) * l_ac)
}

/// Partial derivatives of the actor loss w.r.t. `(a, l_pc, l_ac, delta_c)`,
/// treating `beta` as a constant.
pub fn actor_loss_grad<T: Real>(
    a: T,
    l_pc: T,
    l_ac: T,
    delta_c: T,
    beta: T,
    a_min: T,
    a_max: T,
) -> (T, T, T, T) {
    let one = T::one();
    let d_a = -beta * (one - l_pc) * (one - l_ac) + (one - beta) * delta_c * (l_ac - l_pc);
    let d_lpc =
        -beta * (one - l_ac) * (a_max - a) + (one - beta) * delta_c * (a_max - a);
    let d_lac =
        -beta * (one - l_pc) * (a_max - a) + (one - beta) * delta_c * (a - a_min);
    let d_delta = (one - beta) * ((a_max - a) * l_pc + (a - a_min) * l_ac);
    (d_a, d_lpc, d_lac, d_delta)
}

/// Project a tanh output into the acceleration range.
pub fn project_action<T: Real>(tanh_out: T, a_min: T, a_max: T) -> T {
    a_min + (a_max - a_min) * (tanh_out + T::one()) / T::from_f64(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fusion_passthrough_at_alpha_one() {
        let (ac, pc) = fuse_labels(0.3, 0.8, 0.1, 1.0);
        assert_relative_eq!(ac, 0.8);
        assert_relative_eq!(pc, 0.1);
    }

    #[test]
    fn fusion_worked_example() {
        let (ac, pc) = fuse_labels(0.9, 0.8, 0.1, 0.6);
        assert_relative_eq!(ac, 0.80, epsilon = 1e-12);
        assert_relative_eq!(pc, 0.10, epsilon = 1e-12);
    }

    #[test]
    fn fusion_truncates_below_zero() {
        let (ac, _) = fuse_labels(0.0, 0.0, 1.0, 0.6);
        assert_relative_eq!(ac, 0.0);
    }

    proptest! {
        #[test]
        fn fused_labels_stay_in_unit_interval(
            c in 0.0f64..1.0,
            ac in 0.0f64..1.0,
            pc in 0.0f64..1.0,
            alpha in 0.0f64..1.0,
        ) {
            let (a, p) = fuse_labels(c, ac, pc, alpha);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn beta_is_affine_with_pinned_endpoints(gamma in 0.0f64..1.0, d in 0.0f64..100.0) {
            let b = beta(d, 0.0, 100.0, gamma);
            prop_assert!((b - gamma * d / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_endpoints_and_midpoint() {
        assert_relative_eq!(beta(100.0, 0.0, 100.0, 0.2), 0.2);
        assert_relative_eq!(beta(0.0, 0.0, 100.0, 0.2), 0.0);
        assert_relative_eq!(beta(50.0, 0.0, 100.0, 0.2), 0.1);
        // Clamped outside the range.
        assert_relative_eq!(beta(150.0, 0.0, 100.0, 0.2), 0.2);
    }

    #[test]
    fn loss_no_conflict_case() {
        // labels 0, beta 0.1, a = 1: l = 0.1 * (4 - 1) = 0.3.
        let l = actor_loss(1.0, 0.0, 0.0, 0.0, 0.1, -4.0, 4.0);
        assert_relative_eq!(l, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn loss_priority_holder_is_pushed_toward_max_acceleration() {
        // L_PC = 1, L_AC = 0, delta = 1, beta = 0.1, a = 1:
        // l = 0.9 * (4 - 1) = 2.7 and d l / d a < 0.
        let l = actor_loss(1.0, 1.0, 0.0, 1.0, 0.1, -4.0, 4.0);
        assert_relative_eq!(l, 2.7, epsilon = 1e-12);
        let (d_a, ..) = actor_loss_grad(1.0, 1.0, 0.0, 1.0, 0.1, -4.0, 4.0);
        assert!(d_a < 0.0);
        // Mirrored for the yielding side.
        let (d_a_ac, ..) = actor_loss_grad(1.0, 0.0, 1.0, 1.0, 0.1, -4.0, 4.0);
        assert!(d_a_ac > 0.0);
    }

    #[test]
    fn loss_double_conflict_is_constant_in_action() {
        // L_PC = L_AC = 1, beta = 0: l = (a_max - a) + (a - a_min) = 8.
        for a in [-4.0, -1.0, 0.0, 2.5, 4.0] {
            let l = actor_loss(a, 1.0, 1.0, 1.0, 0.0, -4.0, 4.0);
            assert_relative_eq!(l, 8.0, epsilon = 1e-12);
        }
        let (d_a, ..) = actor_loss_grad(0.3, 1.0, 1.0, 1.0, 0.0, -4.0, 4.0);
        assert_relative_eq!(d_a, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_hits_the_bounds() {
        assert_relative_eq!(project_action(0.0, -4.0, 4.0), 0.0);
        assert_relative_eq!(project_action(1.0, -4.0, 4.0), 4.0);
        assert_relative_eq!(project_action(-1.0, -4.0, 4.0), -4.0);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let (a, lpc, lac, dc, b) = (0.7, 0.4, 0.3, 0.6, 0.15);
        let (d_a, d_lpc, d_lac, d_dc) = actor_loss_grad(a, lpc, lac, dc, b, -4.0, 4.0);
        let h = 1e-7;
        let f = |a: f64, lpc: f64, lac: f64, dc: f64| actor_loss(a, lpc, lac, dc, b, -4.0, 4.0);
        assert_relative_eq!(d_a, (f(a + h, lpc, lac, dc) - f(a - h, lpc, lac, dc)) / (2.0 * h), epsilon = 1e-6);
        assert_relative_eq!(d_lpc, (f(a, lpc + h, lac, dc) - f(a, lpc - h, lac, dc)) / (2.0 * h), epsilon = 1e-6);
        assert_relative_eq!(d_lac, (f(a, lpc, lac + h, dc) - f(a, lpc, lac - h, dc)) / (2.0 * h), epsilon = 1e-6);
        assert_relative_eq!(d_dc, (f(a, lpc, lac, dc + h) - f(a, lpc, lac, dc - h)) / (2.0 * h), epsilon = 1e-6);
    }

    #[test]
    fn fusion_gradients_match_finite_differences() {
        let (c, ac, pc, alpha) = (0.6, 0.55, 0.25, 0.6);
        let (d_ac, d_pc) = fuse_labels_grad(c, ac, pc, alpha);
        let h = 1e-7;
        for (i, (dc, dac, dpc)) in
            [(0, (h, 0.0, 0.0)), (1, (0.0, h, 0.0)), (2, (0.0, 0.0, h))]
                .map(|(i, d)| (i, d))
        {
            let (ap, pp) = fuse_labels(c + dc, ac + dac, pc + dpc, alpha);
            let (am, pm) = fuse_labels(c - dc, ac - dac, pc - dpc, alpha);
            assert_relative_eq!(d_ac[i], (ap - am) / (2.0 * h), epsilon = 1e-6);
            assert_relative_eq!(d_pc[i], (pp - pm) / (2.0 * h), epsilon = 1e-6);
        }
    }
}
