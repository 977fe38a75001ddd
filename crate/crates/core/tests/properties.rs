use proptest::prelude::*;

use collusion_core::agents::{Mode, QState};
use collusion_core::games::{
    check_assumptions, dilemma_table, make_bertrand, make_mixed_auction, make_prisoners_dilemma, AssumptionId,
};
use collusion_core::metrics::{stationary_price, sustainable_price};
use collusion_core::stability::snap_toward;

proptest! {
    // Undercutting by one step from the second-lowest price is weakly
    // profitable exactly when min_price − cost ≥ step.
    #[test]
    fn bertrand_assumptions(k in 2usize..=12, cost in 0.0f64..0.05, min in 0.05f64..0.5, span in 0.1f64..2.0) {
        prop_assume!(cost < min);
        let wtp = min + span;
        let step = span / (k - 1) as f64;
        prop_assume!((min - cost - step).abs() > 1e-9);
        let game = make_bertrand(k, min, wtp, cost).unwrap();
        let report = check_assumptions(&game);
        prop_assert_eq!(report.pass, min - cost > step, "{:?}", report.violations);
        if !report.pass {
            prop_assert!(report.violations.iter().all(|v| v.assumption == AssumptionId::LowerDeviation));
        }
    }

    #[test]
    fn auctions_always_satisfy(k in 2usize..=12, v in 0.5f64..5.0, omega in 0.0f64..=1.0) {
        let game = make_mixed_auction(k, v, omega).unwrap();
        let report = check_assumptions(&game);
        prop_assert!(report.pass, "{:?}", report.violations);
    }

    #[test]
    fn ordered_dilemmas_satisfy(a in -5.0f64..5.0, d1 in 0.01f64..3.0, d2 in 0.01f64..3.0, d3 in 0.01f64..3.0) {
        let (u_cd, u_dd, u_cc, u_dc) = (a, a + d1, a + d1 + d2, a + d1 + d2 + d3);
        let game = make_prisoners_dilemma(u_cd, u_dd, u_cc, u_dc).unwrap();
        prop_assert!(check_assumptions(&game).pass);
    }

    // Snapped updates move toward the target, stay within one step of the
    // exact value and never pass an on-grid target.
    #[test]
    fn snap_movement_contract(points in 2usize..40, old_f in 0.0f64..1.0, target_f in 0.0f64..1.0, alpha in 0.01f64..=1.0, on_grid in any::<bool>()) {
        let top = (points - 1) as f64;
        let old = (old_f * top).round() as usize;
        let target = if on_grid { (target_f * top).round() } else { target_f * top };
        let exact = (1.0 - alpha) * old as f64 + alpha * target;
        let r = snap_toward(old, target, exact, points);
        prop_assert!(r < points);
        let o = old as f64;
        if (target - o).abs() <= 1e-9 {
            prop_assert_eq!(r, old);
        } else {
            let up = target > o;
            let toward = if up { r > old } else { r < old };
            prop_assert!(toward);
            prop_assert!((r as f64 - exact).abs() <= 1.0 + 1e-9);
            let past = if up { r as f64 > target + 1e-9 } else { (r as f64) < target - 1e-9 };
            if past {
                prop_assert!(!on_grid);
                prop_assert_eq!(r.abs_diff(old), 1);
            }
        }
    }

    #[test]
    fn diagnostics_ignore_action_order(values in prop::collection::vec(-10.0f64..10.0, 2..12), other in prop::collection::vec(-10.0f64..10.0, 2..12), delta in 0.0f64..0.99, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let k = values.len().min(other.len());
        let a: Vec<f64> = values[..k].to_vec();
        let b: Vec<f64> = other[..k].to_vec();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pa = a.clone();
        pa.shuffle(&mut rng);
        let mut pb = b.clone();
        pb.shuffle(&mut rng);
        let q = |v: Vec<f64>| QState::from_values(k, Mode::Memoryless, v).unwrap();
        prop_assert_eq!(sustainable_price(&q(a.clone()), delta), sustainable_price(&q(pa.clone()), delta));
        let s = stationary_price(&q(a.clone()), &q(b.clone()), delta);
        prop_assert_eq!(s, stationary_price(&q(pa), &q(pb), delta));
        prop_assert_eq!(s, stationary_price(&q(b), &q(a), delta));
    }
}

#[test]
fn swapped_dilemma_fails_lower_deviation() {
    // u_DC < u_CC breaks the profitable-defection condition
    assert!(make_prisoners_dilemma(0.0, 1.0, 3.0, 2.0).is_err());
    let game = dilemma_table(0.0, 1.0, 3.0, 2.0).unwrap();
    let report = check_assumptions(&game);
    assert!(report.failed(AssumptionId::LowerDeviation));
}

#[test]
fn acceptance_games_pass() {
    assert!(check_assumptions(&make_bertrand(10, 0.1, 1.0, 0.0).unwrap()).pass);
    assert!(check_assumptions(&make_prisoners_dilemma(0.0, 1.0, 2.0, 3.0).unwrap()).pass);
    for omega in [0.0, 0.25, 0.5, 0.75, 1.0] {
        assert!(check_assumptions(&make_mixed_auction(10, 1.0, omega).unwrap()).pass);
    }
}
