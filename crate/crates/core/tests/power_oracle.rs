use ehlora::interference::WeightMatrix;
use ehlora::optimizer::{feasible, maxmin_power, PowerProblem};
use proptest::prelude::*;

/// Whether some point of a 200 x 200 power grid meets SINR `gamma` for both users.
fn grid_feasible(gamma: f64, g: [f64; 2], cap: [f64; 2], rho: f64, noise: f64) -> bool {
    let steps = 200;
    (0..=steps).any(|i| {
        let p1 = cap[0] * i as f64 / steps as f64;
        (0..=steps).any(|j| {
            let p2 = cap[1] * j as f64 / steps as f64;
            let s1 = p1 * g[0] / (rho * p2 * g[1] + noise);
            let s2 = p2 * g[1] / (rho * p1 * g[0] + noise);
            s1 >= gamma && s2 >= gamma
        })
    })
}

#[test]
fn two_user_full_collision_matches_grid() {
    let (g, cap, noise) = ([1.0, 0.6], [1.0, 1.5], 0.1);
    let w = WeightMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let p = PowerProblem::new(&g, &cap, &w, noise);
    let t_star = maxmin_power(&p, 1e-10).unwrap().t_star_nats;
    let mut checked = 0;
    for k in 0..60 {
        let t = 1.5 * t_star * k as f64 / 59.0;
        // the grid cannot resolve targets right at the boundary
        if (t - t_star).abs() < 0.02 * t_star {
            continue;
        }
        let direct = feasible(t, &p).unwrap().is_some();
        assert_eq!(direct, grid_feasible(t.exp_m1(), g, cap, 1.0, noise), "t = {t}");
        checked += 1;
    }
    assert!(checked > 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn all_zero_weights_return_caps(
        g in proptest::collection::vec(0.1f64..5.0, 1..8),
        seed_caps in proptest::collection::vec(0.0f64..2.0, 8),
    ) {
        let n = g.len();
        let caps = seed_caps[..n].to_vec();
        let w = WeightMatrix::zeros(n);
        let sol = maxmin_power(&PowerProblem::new(&g, &caps, &w, 0.3), 1e-6).unwrap();
        prop_assert_eq!(&sol.powers_w, &caps);
    }

    #[test]
    fn solution_respects_boxes_and_targets(
        g in proptest::collection::vec(0.1f64..5.0, 2..7),
        caps in proptest::collection::vec(0.05f64..2.0, 7),
        w in proptest::collection::vec(0.0f64..1.5, 49),
    ) {
        let n = g.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { w[i * 7 + j] }).collect())
            .collect();
        let wm = WeightMatrix::from_rows(&rows);
        let caps = &caps[..n];
        let sol = maxmin_power(&PowerProblem::new(&g, caps, &wm, 0.2), 1e-6).unwrap();
        let report = ehlora::interference::rate_report(&sol.powers_w, &g, &wm, 0.2).unwrap();
        for i in 0..n {
            prop_assert!(sol.powers_w[i] >= 0.0 && sol.powers_w[i] <= caps[i]);
            prop_assert!(report.per_user_rate_nats[i] >= sol.t_star_nats - 1e-6);
        }
    }
}
