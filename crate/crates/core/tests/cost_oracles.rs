mod common;

use common::*;
use lrnn_core::costs::{
    assemble_lp, assemble_qp, eval_cost, minimize_cost, CostFunction, CostTerm, MultiTermExpr, NormSpec, Regime,
};
use lrnn_core::linalg::{kron, matmul, unvec, vec_values};
use lrnn_core::optimize::{minimize_quadratic, solve_lp_with, LpStatus, PivotRule, Route, SimplexOptions};
use lrnn_core::Matrix;
use rand::Rng;

#[test]
fn sparse_minimum_matches_grid_search() {
    let mut r = rng(11);
    let mut checked = 0;
    while checked < 20 {
        let cost = random_cost(&mut r, Regime::Sparse);
        let min = minimize_cost(&cost).unwrap();
        if min.z.max_abs() > 4.5 {
            continue;
        }
        let oracle = OracleCost::from_cost(&cost);
        let (_, grid) = oracle.grid_min();
        assert!(min.value <= grid + 1e-9, "LP {} above grid {grid}", min.value);
        assert!(grid - min.value <= 0.1, "LP {} vs grid {grid}", min.value);
        assert!((oracle.eval(&vec_values(&min.z)) - min.value).abs() <= 1e-9);
        checked += 1;
    }
}

#[test]
fn two_term_2x2_instance_against_fine_grid() {
    let mut r = rng(12);
    let (l1, m1, l2, m2) = (
        random_matrix(&mut r, 2, 2),
        random_matrix(&mut r, 2, 2),
        random_matrix(&mut r, 2, 2),
        random_matrix(&mut r, 2, 2),
    );
    let n = random_matrix(&mut r, 2, 2);
    let expr = MultiTermExpr::new(vec![(l1, m1), (l2, m2)], n, 2, 2).unwrap();
    let cost = CostFunction::new(
        vec![
            CostTerm::new(1.0, expr, NormSpec::eps_insensitive(2, 2, 0.05)).unwrap(),
            CostTerm::new(0.2, MultiTermExpr::identity(2, 2), NormSpec::l1(2, 2)).unwrap(),
        ],
        Regime::Sparse,
    )
    .unwrap();
    let min = minimize_cost(&cost).unwrap();
    let (_, grid) = OracleCost::from_cost(&cost).grid_min();
    assert!((min.value - grid).abs() <= 0.1 && min.value <= grid + 1e-9);
}

#[test]
fn lp_objective_equals_cost_at_argmin() {
    let mut r = rng(13);
    for _ in 0..30 {
        let cost = random_cost(&mut r, Regime::Sparse);
        let min = minimize_cost(&cost).unwrap();
        assert!((min.solver_value - eval_cost(&cost, &min.z).unwrap()).abs() <= 1e-7);
    }
}

#[test]
fn routes_and_pivot_rules_agree() {
    let mut r = rng(14);
    for _ in 0..15 {
        let cost = random_cost(&mut r, Regime::Sparse);
        let lp = assemble_lp(&cost).unwrap();
        let mut values = Vec::new();
        for route in [Route::Primal, Route::Dual, Route::Auto] {
            for rule in [PivotRule::Bland, PivotRule::Dantzig] {
                let opts = SimplexOptions {
                    pivot_rule: rule,
                    route,
                    max_iterations: None,
                };
                let sol = solve_lp_with(&lp, &opts).unwrap();
                assert_eq!(sol.status, LpStatus::Optimal);
                assert!(lp.max_violation(&sol.y) <= 1e-8);
                assert!((lp.value(&sol.y) - sol.objective_value).abs() <= 1e-9);
                values.push(sol.objective_value);
            }
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= 1e-9 * (1.0 + hi.abs()), "{values:?}");
    }
}

#[test]
fn lp_value_is_nonnegative() {
    // the point z = 0 with slacks covering |n| is feasible and the weights are
    // positive, so an optimum can never be negative
    let mut r = rng(15);
    for _ in 0..20 {
        let cost = random_cost(&mut r, Regime::Sparse);
        let sol = solve_lp_with(&assemble_lp(&cost).unwrap(), &SimplexOptions::default()).unwrap();
        assert!(sol.objective_value >= -1e-12);
    }
}

#[test]
fn adding_l1_regularizer_never_lowers_optimum() {
    let mut r = rng(16);
    for _ in 0..15 {
        let base = random_cost(&mut r, Regime::Sparse);
        let (zr, zc) = base.z_shape();
        let v0 = minimize_cost(&base).unwrap().value;
        for lam in [0.05, 0.5, 2.0] {
            let mut terms = base.terms().to_vec();
            terms.push(CostTerm::new(lam, MultiTermExpr::identity(zr, zc), NormSpec::l1(zr, zc)).unwrap());
            let v = minimize_cost(&CostFunction::new(terms, Regime::Sparse).unwrap())
                .unwrap()
                .value;
            assert!(v >= v0 - 1e-9);
        }
    }
}

#[test]
fn quadratic_form_reproduces_cost() {
    let mut r = rng(17);
    for _ in 0..30 {
        let cost = random_cost(&mut r, Regime::Quadratic);
        let qf = assemble_qp(&cost).unwrap();
        assert_eq!(qf.h.max_asymmetry(), 0.0);
        let oracle = OracleCost::from_cost(&cost);
        let (zr, zc) = cost.z_shape();
        for _ in 0..50 {
            let z = random_matrix(&mut r, zr, zc).scale(3.0);
            let direct = eval_cost(&cost, &z).unwrap();
            assert!(rel_close(qf.value(&vec_values(&z)), direct, 1e-9));
            assert!(rel_close(oracle.eval(&vec_values(&z)), direct, 1e-12));
        }
        lrnn_core::linalg::cholesky(&qf.h).expect("regularized Hessian is positive definite");
    }
}

#[test]
fn hessian_matches_literal_kronecker_form() {
    let mut r = rng(18);
    for _ in 0..20 {
        let cost = random_cost(&mut r, Regime::Quadratic);
        let (zr, _) = cost.z_shape();
        let nz = {
            let (a, b) = cost.z_shape();
            a * b
        };
        let mut literal = Matrix::zeros(nz, nz);
        for term in cost.terms() {
            let NormSpec::SquaredK(k) = &term.norm else {
                unreachable!()
            };
            for (li, mi) in term.expr.terms() {
                for (lj, mj) in term.expr.terms() {
                    let p = naive_matmul(&naive_matmul(&li.transpose(), k), lj);
                    let left = naive_kron(&mi.transpose(), &Matrix::identity(zr)).transpose();
                    let right = naive_kron(&mj.transpose(), &p);
                    literal
                        .add_scaled(2.0 * term.weight, &naive_matmul(&left, &right))
                        .unwrap();
                }
            }
        }
        literal.symmetrize();
        let h = assemble_qp(&cost).unwrap().h;
        assert!(max_rel_diff(h.as_slice(), literal.as_slice()) <= 1e-12);
    }
}

#[test]
fn quadratic_minimizer_has_zero_gradient_and_beats_perturbations() {
    let mut r = rng(19);
    for _ in 0..30 {
        let cost = random_cost(&mut r, Regime::Quadratic);
        let oracle = OracleCost::from_cost(&cost);
        let min = minimize_cost(&cost).unwrap();
        let z = vec_values(&min.z);
        let h = 1e-5;
        for k in 0..z.len() {
            let (mut a, mut b) = (z.clone(), z.clone());
            a[k] += h;
            b[k] -= h;
            let g = (oracle.eval(&a) - oracle.eval(&b)) / (2.0 * h);
            assert!(g.abs() <= 1e-6, "gradient {g}");
        }
        let v = oracle.eval(&z);
        for _ in 0..100 {
            let d: Vec<f64> = (0..z.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let zp: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + 1e-2 * b / norm).collect();
            assert!(oracle.eval(&zp) >= v - 1e-12);
        }
    }
}

#[test]
fn minimize_quadratic_perturbation_oracle() {
    let mut r = rng(20);
    let a = random_matrix(&mut r, 6, 6);
    let mut h = matmul(&a.transpose(), &a).unwrap();
    for i in 0..6 {
        h.row_mut(i)[i] += 1.0;
    }
    h.symmetrize();
    let f: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
    let (z, v) = minimize_quadratic(&h, &f, 0.7).unwrap();
    let q = |x: &[f64]| {
        0.5 * x.iter().zip(naive_matvec(&h, x)).map(|(a, b)| a * b).sum::<f64>()
            + x.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>()
            + 0.7
    };
    assert!(rel_close(q(&z), v, 1e-12));
    for _ in 0..100 {
        let d: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let zp: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + 1e-2 * b / n).collect();
        assert!(q(&zp) >= v);
    }
}

#[test]
fn vectorized_operator_matches_kron_sum() {
    let mut r = rng(21);
    let expr = MultiTermExpr::new(
        vec![
            (random_matrix(&mut r, 3, 2), random_matrix(&mut r, 4, 2)),
            (random_matrix(&mut r, 3, 2), random_matrix(&mut r, 4, 2)),
        ],
        random_matrix(&mut r, 3, 2),
        2,
        4,
    )
    .unwrap();
    let mut expected = Matrix::zeros(6, 8);
    for (l, m) in expr.terms() {
        expected.add_scaled(1.0, &kron(&m.transpose(), l)).unwrap();
    }
    assert_eq!(expr.vectorized_operator(), expected);
    let z = random_matrix(&mut r, 2, 4);
    let res = lrnn_core::costs::eval_residual(&expr, &z).unwrap();
    let via_op: Vec<f64> = naive_matvec(&expected, &vec_values(&z))
        .iter()
        .zip(vec_values(expr.offset()))
        .map(|(a, b)| a - b)
        .collect();
    assert!(max_rel_diff(&vec_values(&res), &via_op) <= 1e-14);
    assert_eq!(unvec(&vec_values(&res), 3, 2).unwrap(), res);
}
