//! Solver-level oracles: LP shape, mode equivalences, optimality properties
//! and the coverage bounds that any correct quantile-regression vertex
//! solution must satisfy.

use approx::assert_abs_diff_eq;
use gncqr::dataset::minmax_fit_apply;
use gncqr::solver::simplex::{solve_standard_form, SimplexOptions};
use gncqr::solver::{
    assemble_lp, lp_text, solve_default, ConstraintMode, QuantileGrid, SolverError, VarName,
};
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn scaled_random_design(
    rng: &mut StdRng,
    t: usize,
    k: usize,
) -> (Array2<f64>, gncqr::ScalingMap) {
    let raw = Array2::from_shape_fn((t, k + 1), |(_, j)| {
        if j == 0 {
            1.0
        } else {
            rng.gen_range(-3.0..3.0)
        }
    });
    minmax_fit_apply(&raw).expect("random columns are non-constant")
}

fn random_y(rng: &mut StdRng, t: usize) -> Array1<f64> {
    Array1::from_shape_fn(t, |_| rng.gen_range(-4.0..4.0))
}

fn intercept_only(y: &[f64]) -> (Array2<f64>, gncqr::ScalingMap, Array1<f64>) {
    let design = Array2::from_elem((y.len(), 1), 1.0);
    let (scaled, map) = minmax_fit_apply(&design).unwrap();
    (scaled, map, Array1::from(y.to_vec()))
}

#[test]
fn lp_dimensions_match_catalog_arithmetic() {
    // T = 100, K = 6 regressors + intercept, Q = 11:
    // 2*7*11 + 2*100*11 = 2354 columns, 1100 equalities, 10 inequalities.
    let mut rng = StdRng::seed_from_u64(1);
    let (scaled, map) = scaled_random_design(&mut rng, 100, 6);
    let y = random_y(&mut rng, 100);
    let grid = QuantileGrid::deciles_with_quartiles();
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(0.7), &map).unwrap();
    assert_eq!(problem.n_cols(), 2354);
    assert_eq!(problem.n_eq(), 1100);
    assert_eq!(problem.n_ineq(), 10);
    assert_eq!(problem.catalog().len(), 2354);

    let plain = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
    assert_eq!(plain.n_ineq(), 0);
}

#[test]
fn median_of_three_is_two() {
    let (scaled, map, y) = intercept_only(&[1.0, 2.0, 3.0]);
    let grid = QuantileGrid::single(0.5).unwrap();
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
    let fit = solve_default(&problem).unwrap();
    assert_abs_diff_eq!(fit.delta[[0, 0]], 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(fit.objective_value, 1.0, epsilon = 1e-9);
}

#[test]
fn exact_fit_interpolates() {
    // y = 2 + 3x with x in {0, 1}: scaling is the identity, delta = (2, 3).
    let design = ndarray::array![[1.0, 0.0], [1.0, 1.0]];
    let (scaled, map) = minmax_fit_apply(&design).unwrap();
    let y = ndarray::array![2.0, 5.0];
    for tau in [0.1, 0.5, 0.9] {
        let grid = QuantileGrid::single(tau).unwrap();
        let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
        let fit = solve_default(&problem).unwrap();
        assert_abs_diff_eq!(fit.delta[[0, 0]], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.delta[[1, 0]], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.objective_value, 0.0, epsilon = 1e-10);
    }
}

#[test]
fn quartile_matches_brute_force_order_statistic() {
    // tau = 0.25 on y = (0, 1, 2, 3, 100): the pinball loss over candidate
    // fits at each order statistic is minimised at 1.
    let y = [0.0, 1.0, 2.0, 3.0, 100.0];
    let tau = 0.25;
    let loss = |c: f64| -> f64 { y.iter().map(|&v| gncqr::pinball_loss(v - c, tau)).sum() };
    let best = y
        .iter()
        .copied()
        .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
        .unwrap();
    assert_eq!(best, 1.0);

    let (scaled, map, y_arr) = intercept_only(&y);
    let grid = QuantileGrid::single(tau).unwrap();
    let problem = assemble_lp(&scaled, &y_arr, &grid, ConstraintMode::Plain, &map).unwrap();
    let fit = solve_default(&problem).unwrap();
    assert_abs_diff_eq!(fit.delta[[0, 0]], best, epsilon = 1e-9);
    assert_abs_diff_eq!(fit.objective_value, loss(best), epsilon = 1e-9);
}

#[test]
fn bondell_equals_adaptive_alpha_one_exactly() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let t = rng.gen_range(20..40);
        let k = rng.gen_range(2..5);
        let (scaled, map) = scaled_random_design(&mut rng, t, k);
        let y = random_y(&mut rng, t);
        let grid = QuantileGrid::new(vec![0.2, 0.5, 0.8]).unwrap();
        let bondell = assemble_lp(&scaled, &y, &grid, ConstraintMode::Bondell, &map).unwrap();
        let adaptive =
            assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(1.0), &map).unwrap();
        for i in 0..bondell.n_ineq() {
            assert_eq!(bondell.inequality_row(i), adaptive.inequality_row(i));
        }
        let fb = solve_default(&bondell).unwrap();
        let fa = solve_default(&adaptive).unwrap();
        let rel = (fb.objective_value - fa.objective_value).abs()
            / (1.0 + fb.objective_value.abs());
        assert!(rel <= 1e-9);
    }
}

#[test]
fn plain_joint_equals_independent_per_quantile() {
    let mut rng = StdRng::seed_from_u64(6);
    let grid = QuantileGrid::new(vec![0.1, 0.25, 0.5, 0.75, 0.9]).unwrap();
    for _ in 0..4 {
        let t = rng.gen_range(25..45);
        let (scaled, map) = scaled_random_design(&mut rng, t, 3);
        let y = random_y(&mut rng, t);
        let joint = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
        let joint_fit = solve_default(&joint).unwrap();
        let by_quantile = joint_fit.tick_loss_by_quantile(&scaled, &y);
        for (q, &tau) in grid.taus().iter().enumerate() {
            let single = QuantileGrid::single(tau).unwrap();
            let problem = assemble_lp(&scaled, &y, &single, ConstraintMode::Plain, &map).unwrap();
            let fit = solve_default(&problem).unwrap();
            let rel = (by_quantile[q] - fit.objective_value).abs()
                / (1.0 + fit.objective_value.abs());
            assert!(rel <= 1e-7, "q={q} joint {} vs single {}", by_quantile[q], fit.objective_value);
        }
    }
}

#[test]
fn alpha_at_least_one_prevents_in_sample_crossing() {
    let mut rng = StdRng::seed_from_u64(7);
    let grid = QuantileGrid::deciles_with_quartiles();
    for &alpha in &[1.0, 1.5] {
        let (scaled, map) = scaled_random_design(&mut rng, 40, 4);
        let y = random_y(&mut rng, 40);
        let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(alpha), &map).unwrap();
        let fit = solve_default(&problem).unwrap();
        let fitted = scaled.dot(&fit.delta);
        for t in 0..fitted.nrows() {
            for q in 1..fitted.ncols() {
                assert!(
                    fitted[[t, q]] >= fitted[[t, q - 1]] - 1e-8,
                    "crossing at row {t}, q {q}: {} < {}",
                    fitted[[t, q]],
                    fitted[[t, q - 1]]
                );
            }
        }
    }
}

#[test]
fn objective_is_monotone_in_alpha_and_above_plain() {
    let mut rng = StdRng::seed_from_u64(8);
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let (scaled, map) = scaled_random_design(&mut rng, 35, 3);
    let y = random_y(&mut rng, 35);
    let plain = {
        let p = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
        solve_default(&p).unwrap().objective_value
    };
    let mut last = f64::NEG_INFINITY;
    for &alpha in &[0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
        let p = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(alpha), &map).unwrap();
        let obj = solve_default(&p).unwrap().objective_value;
        assert!(
            obj >= last - 1e-9 * (1.0 + obj.abs()),
            "objective decreased from {last} to {obj} at alpha {alpha}"
        );
        assert!(obj >= plain - 1e-9 * (1.0 + obj.abs()));
        last = obj;
    }
}

#[test]
fn fitted_values_scale_with_y() {
    let mut rng = StdRng::seed_from_u64(9);
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let (scaled, map) = scaled_random_design(&mut rng, 30, 2);
    let y = random_y(&mut rng, 30);
    let c = 3.5;
    let scaled_y: Array1<f64> = y.iter().map(|v| c * v).collect();
    let p1 = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(1.0), &map).unwrap();
    let p2 = assemble_lp(&scaled, &scaled_y, &grid, ConstraintMode::Adaptive(1.0), &map).unwrap();
    let f1 = solve_default(&p1).unwrap();
    let f2 = solve_default(&p2).unwrap();
    let fit1 = scaled.dot(&f1.delta);
    let fit2 = scaled.dot(&f2.delta);
    for (a, b) in fit1.iter().zip(fit2.iter()) {
        assert_abs_diff_eq!(c * a, *b, epsilon = 1e-6 * (1.0 + b.abs()));
    }
}

#[test]
fn pinball_coverage_bounds_hold() {
    let mut rng = StdRng::seed_from_u64(10);
    for _ in 0..6 {
        let t = rng.gen_range(20..60);
        let (scaled, map) = scaled_random_design(&mut rng, t, 3);
        let y = random_y(&mut rng, t);
        for &tau in &[0.1, 0.25, 0.5, 0.9] {
            let grid = QuantileGrid::single(tau).unwrap();
            let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Plain, &map).unwrap();
            let fit = solve_default(&problem).unwrap();
            let fitted = scaled.dot(&fit.delta);
            let below = (0..t).filter(|&i| y[i] < fitted[[i, 0]] - 1e-9).count();
            let above = (0..t).filter(|&i| y[i] > fitted[[i, 0]] + 1e-9).count();
            assert!(
                below as f64 <= tau * t as f64 + 1e-9,
                "below {below} > tau T {}",
                tau * t as f64
            );
            assert!(
                above as f64 <= (1.0 - tau) * t as f64 + 1e-9,
                "above {above} > (1-tau) T {}",
                (1.0 - tau) * t as f64
            );
        }
    }
}

#[test]
fn delta_reconstructs_from_upsilon() {
    let mut rng = StdRng::seed_from_u64(11);
    let grid = QuantileGrid::deciles_with_quartiles();
    let (scaled, map) = scaled_random_design(&mut rng, 30, 3);
    let y = random_y(&mut rng, 30);
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(0.5), &map).unwrap();
    let fit = solve_default(&problem).unwrap();
    for j in 0..fit.delta.nrows() {
        let mut acc = 0.0;
        for q in 0..fit.delta.ncols() {
            acc += fit.upsilon[[j, q]];
            assert_abs_diff_eq!(fit.delta[[j, q]], acc, epsilon = 1e-9);
        }
    }
}

#[test]
fn predictions_reproduce_training_rows_and_intercept_only_is_constant() {
    let mut rng = StdRng::seed_from_u64(12);
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let raw = Array2::from_shape_fn((25, 3), |(_, j)| {
        if j == 0 {
            1.0
        } else {
            rng.gen_range(-2.0..2.0)
        }
    });
    let (scaled, map) = minmax_fit_apply(&raw).unwrap();
    let y = random_y(&mut rng, 25);
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(1.0), &map).unwrap();
    let fit = solve_default(&problem).unwrap();
    // predict() takes unscaled rows and must reproduce in-sample fits
    let preds = fit.predict(&raw).unwrap();
    let fitted = scaled.dot(&fit.delta);
    for (a, b) in preds.iter().zip(fitted.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }

    let (s2, m2, y2) = intercept_only(&[1.0, 5.0, 2.0, 4.0, 3.0, 0.0, 2.5, 2.5, 1.5, 3.5]);
    let p2 = assemble_lp(&s2, &y2, &grid, ConstraintMode::Plain, &m2).unwrap();
    let f2 = solve_default(&p2).unwrap();
    let rows = Array2::from_elem((3, 1), 1.0);
    let preds = f2.predict(&rows).unwrap();
    for q in 0..3 {
        assert_eq!(preds[[0, q]], preds[[1, q]]);
        assert_eq!(preds[[0, q]], preds[[2, q]]);
    }
}

#[test]
fn mean_point_is_monotone_for_any_nonnegative_alpha() {
    // the alpha = 0 constraint enforces non-crossing exactly at the column
    // means, and any alpha >= 0 contains that point
    let mut rng = StdRng::seed_from_u64(13);
    let grid = QuantileGrid::new(vec![0.1, 0.5, 0.9]).unwrap();
    let raw = Array2::from_shape_fn((30, 3), |(_, j)| {
        if j == 0 {
            1.0
        } else {
            rng.gen_range(0.0..5.0)
        }
    });
    let (scaled, map) = minmax_fit_apply(&raw).unwrap();
    let y = random_y(&mut rng, 30);
    for &alpha in &[0.0, 0.3, 1.0] {
        let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(alpha), &map).unwrap();
        let fit = solve_default(&problem).unwrap();
        let mut mean_row = Array2::zeros((1, 3));
        mean_row[[0, 0]] = 1.0;
        for j in 1..3 {
            mean_row[[0, j]] = scaled.column(j).iter().sum::<f64>() / 30.0;
        }
        // mean_row is already on the scaled domain: apply delta directly
        let preds = mean_row.dot(&fit.delta);
        for q in 1..3 {
            assert!(
                preds[[0, q]] >= preds[[0, q - 1]] - 1e-8,
                "alpha {alpha}: crossing at the mean point"
            );
        }
    }
}

#[test]
fn rank_deficient_designs_still_produce_unique_fitted_values() {
    // duplicate regressor: coefficients are not identified, fitted values are
    let mut rng = StdRng::seed_from_u64(14);
    let t = 30;
    let x: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..1.0)).collect();
    let full = Array2::from_shape_fn((t, 2), |(i, j)| if j == 0 { 1.0 } else { x[i] });
    let collinear = Array2::from_shape_fn((t, 3), |(i, j)| if j == 0 { 1.0 } else { x[i] });
    let y = random_y(&mut rng, t);
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let (s_full, m_full) = minmax_fit_apply(&full).unwrap();
    let (s_col, m_col) = minmax_fit_apply(&collinear).unwrap();
    let f_full = solve_default(
        &assemble_lp(&s_full, &y, &grid, ConstraintMode::Plain, &m_full).unwrap(),
    )
    .unwrap();
    let f_col =
        solve_default(&assemble_lp(&s_col, &y, &grid, ConstraintMode::Plain, &m_col).unwrap())
            .unwrap();
    let fit_full = s_full.dot(&f_full.delta);
    let fit_col = s_col.dot(&f_col.delta);
    for (a, b) in fit_full.iter().zip(fit_col.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

#[test]
fn vertex_solutions_have_complementary_pairs() {
    let mut rng = StdRng::seed_from_u64(15);
    let (scaled, map) = scaled_random_design(&mut rng, 25, 3);
    let y = random_y(&mut rng, 25);
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(0.8), &map).unwrap();
    let (a, b, c) = problem.to_standard_form();
    let sol = solve_standard_form(&a, &b, &c, &SimplexOptions::default()).unwrap();
    // pair columns are adjacent by construction
    let mut idx = 0;
    for name in problem.catalog() {
        match name {
            VarName::UpsilonPos { .. } | VarName::ResidPos { .. } => {
                let plus = sol.x[idx];
                let minus = sol.x[idx + 1];
                assert!(
                    plus.min(minus) <= 1e-9 * (1.0 + plus.max(minus)),
                    "pair {name} both nonzero: {plus}, {minus}"
                );
            }
            _ => {}
        }
        idx += 1;
    }
}

#[test]
fn solve_is_deterministic() {
    let mut rng = StdRng::seed_from_u64(16);
    let (scaled, map) = scaled_random_design(&mut rng, 30, 4);
    let y = random_y(&mut rng, 30);
    let grid = QuantileGrid::deciles_with_quartiles();
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(1.0), &map).unwrap();
    let f1 = solve_default(&problem).unwrap();
    let f2 = solve_default(&problem).unwrap();
    assert_eq!(f1.objective_value.to_bits(), f2.objective_value.to_bits());
    for (a, b) in f1.delta.iter().zip(f2.delta.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(f1.iterations, f2.iterations);
}

#[test]
fn mode_errors() {
    let (scaled, map, y) = intercept_only(&[1.0, 2.0]);
    let single = QuantileGrid::single(0.5).unwrap();
    assert!(matches!(
        assemble_lp(&scaled, &y, &single, ConstraintMode::Bondell, &map),
        Err(SolverError::GridTooShort)
    ));
    let grid = QuantileGrid::new(vec![0.25, 0.75]).unwrap();
    assert!(matches!(
        assemble_lp(&scaled, &y, &grid, ConstraintMode::Adaptive(-0.5), &map),
        Err(SolverError::BadAlpha(_))
    ));
}

#[test]
fn lp_text_dump_is_wellformed() {
    let (scaled, map, y) = intercept_only(&[1.5, -2.0]);
    let grid = QuantileGrid::new(vec![0.25, 0.75]).unwrap();
    let problem = assemble_lp(&scaled, &y, &grid, ConstraintMode::Bondell, &map).unwrap();
    let text = lp_text(&problem);
    assert!(text.starts_with("Minimize"));
    assert!(text.contains("Subject To"));
    assert!(text.contains("fit_0_0:"));
    assert!(text.contains("nc_1:"));
    assert!(text.contains(">= 0"));
    assert!(text.contains("= 1.5"));
    assert!(text.ends_with("Bounds\nEnd\n"));
}
