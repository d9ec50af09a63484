//! Property tests for the invariants of the loss, penalties, solver, Dantzig
//! weights, score test and samplers.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use semigraph::dantzig::{solve_dantzig, DantzigProblem};
use semigraph::inference::{score_statistic, variance_estimate};
use semigraph::loss::{node_gradient, node_hessian, node_loss, PairIndexPlan};
use semigraph::penalty::{PenaltyFamily, PenaltySpec};
use semigraph::samplers::{build_precision, GaussianSpec};
use semigraph::solver::{kkt_violation, multistage_estimate, solve_weighted_l1, SolverConfig};
use semigraph::{Dataset, NodeCoef};

const ALL: PairIndexPlan = PairIndexPlan::AllPairs;

/// Data of shape `n x d` with a node index and a coefficient vector for it.
#[derive(Debug, Clone)]
struct Instance {
    data: Dataset,
    j: usize,
    beta: NodeCoef,
}

fn instance(max_n: usize, max_d: usize) -> impl Strategy<Value = Instance> {
    (3..=max_n, 2..=max_d)
        .prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(-3.0..3.0f64, n * d),
                Just(n),
                Just(d),
                0..d,
                prop::collection::vec(-2.0..2.0f64, d - 1),
            )
        })
        .prop_map(|(values, n, d, j, beta)| Instance {
            data: Dataset::new(values, n, d).unwrap(),
            j,
            beta: NodeCoef::new(j, beta).unwrap(),
        })
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn all_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

fn family() -> impl Strategy<Value = PenaltyFamily> {
    prop_oneof![
        Just(PenaltyFamily::Lasso),
        (0.2..4.0f64).prop_map(|cap| PenaltyFamily::CappedL1 { cap }),
        (2.05..6.0f64).prop_map(|a| PenaltyFamily::Scad { a }),
        (1.05..6.0f64).prop_map(|gamma| PenaltyFamily::Mcp { gamma }),
    ]
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn loss_is_invariant_to_column_shifts(inst in instance(12, 5), shifts in prop::collection::vec(-10.0..10.0f64, 5)) {
        let Instance { data, j, beta } = inst;
        let shifted = data.shifted(&shifts[..data.d()]).unwrap();
        let (l0, l1) = (node_loss(&data, j, &beta, &ALL).unwrap(), node_loss(&shifted, j, &beta, &ALL).unwrap());
        prop_assert!(close(l0, l1, 1e-12));
        let (g0, g1) = (node_gradient(&data, j, &beta, &ALL).unwrap(), node_gradient(&shifted, j, &beta, &ALL).unwrap());
        prop_assert!(all_close(&g0, &g1, 1e-12));
        let (h0, h1) = (node_hessian(&data, j, &beta, &ALL).unwrap(), node_hessian(&shifted, j, &beta, &ALL).unwrap());
        prop_assert!(all_close(h0.as_slice(), h1.as_slice(), 1e-12));
    }

    #[test]
    fn loss_is_invariant_to_row_order(inst in instance(12, 5), seed in any::<u64>()) {
        let Instance { data, j, beta } = inst;
        let mut order: Vec<usize> = (0..data.n()).collect();
        semigraph::rng::Stream::new(seed).shuffle(&mut order);
        let permuted = data.select_rows(&order).unwrap();
        let (l0, l1) = (node_loss(&data, j, &beta, &ALL).unwrap(), node_loss(&permuted, j, &beta, &ALL).unwrap());
        prop_assert!(close(l0, l1, 1e-12));
        let (g0, g1) = (node_gradient(&data, j, &beta, &ALL).unwrap(), node_gradient(&permuted, j, &beta, &ALL).unwrap());
        prop_assert!(all_close(&g0, &g1, 1e-12));
        let (h0, h1) = (node_hessian(&data, j, &beta, &ALL).unwrap(), node_hessian(&permuted, j, &beta, &ALL).unwrap());
        prop_assert!(all_close(h0.as_slice(), h1.as_slice(), 1e-12));
    }

    #[test]
    fn loss_is_convex(inst in instance(12, 5), other in prop::collection::vec(-2.0..2.0f64, 4), t in 0.01..0.99f64) {
        let Instance { data, j, beta } = inst;
        let b2 = NodeCoef::new(j, other[..data.d() - 1].to_vec()).unwrap();
        let mix = NodeCoef::new(j, beta.beta.iter().zip(&b2.beta).map(|(a, b)| t * a + (1.0 - t) * b).collect()).unwrap();
        let lhs = node_loss(&data, j, &mix, &ALL).unwrap();
        let rhs = t * node_loss(&data, j, &beta, &ALL).unwrap() + (1.0 - t) * node_loss(&data, j, &b2, &ALL).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
        let h = node_hessian(&data, j, &beta, &ALL).unwrap();
        prop_assert!(h.symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn constant_column_has_zero_gradient(inst in instance(12, 5), k_pick in 0usize..4) {
        let Instance { data, j, beta } = inst;
        let d = data.d();
        let k = (j + 1 + k_pick % (d - 1)) % d;
        let rows: Vec<Vec<f64>> = (0..data.n()).map(|i| {
            let mut r = data.row(i).to_vec();
            r[k] = 1.25;
            r
        }).collect();
        let flat = Dataset::from_rows(&rows).unwrap();
        let g = node_gradient(&flat, j, &beta, &ALL).unwrap();
        prop_assert_eq!(g[semigraph::data::slot(j, k)], 0.0);
    }

    #[test]
    fn penalty_shape(fam in family(), lambda in 0.01..3.0f64, u in prop::collection::vec(0.0..10.0f64, 2)) {
        let p = PenaltySpec::new(fam, lambda).unwrap();
        let (lo, hi) = (u[0].min(u[1]), u[0].max(u[1]));
        prop_assert!(p.penalty_rderiv(hi).unwrap() <= p.penalty_rderiv(lo).unwrap());
        prop_assert!(p.penalty_value(lo).unwrap() <= p.penalty_value(hi).unwrap());
        prop_assert!(p.penalty_value(hi).unwrap() <= lambda * hi * (1.0 + 1e-15));
        prop_assert!((0.0..=lambda).contains(&p.penalty_rderiv(hi).unwrap()));
    }

    #[test]
    fn dantzig_scaling_and_monotonicity(
        m in 1usize..=3,
        entries in prop::collection::vec(-1.0..1.0f64, 9),
        target in prop::collection::vec(-1.0..1.0f64, 3),
        lambda in 0.01..0.5f64,
        c in 0.1..5.0f64,
    ) {
        let a = DMatrix::from_fn(m, m, |r, s| entries[3 * r + s]);
        let gram = &a * a.transpose() + DMatrix::identity(m, m) * 0.1;
        let gram = (&gram + gram.transpose()) * 0.5;
        let target = target[..m].to_vec();
        let base = solve_dantzig(&DantzigProblem::new(target.clone(), gram.clone(), lambda).unwrap()).unwrap();
        let scaled_target: Vec<f64> = target.iter().map(|t| c * t).collect();
        let scaled = solve_dantzig(&DantzigProblem::new(scaled_target, gram.clone(), c * lambda).unwrap()).unwrap();
        prop_assert!((scaled.l1_norm - c * base.l1_norm).abs() <= 1e-9 * (1.0 + c * base.l1_norm));
        let looser = solve_dantzig(&DantzigProblem::new(target.clone(), gram.clone(), 2.0 * lambda).unwrap()).unwrap();
        prop_assert!(looser.l1_norm <= base.l1_norm + 1e-9);
        let exact = gram.clone().lu().solve(&nalgebra::DVector::from_vec(target)).unwrap();
        prop_assert!(base.l1_norm <= exact.iter().map(|w| w.abs()).sum::<f64>() + 1e-6);
        prop_assert!(base.feasibility_gap <= 1e-9);
    }

    #[test]
    fn score_test_is_symmetric(inst in instance(10, 5), other in prop::collection::vec(-2.0..2.0f64, 4), w in prop::collection::vec(-1.0..1.0f64, 6), k_pick in 0usize..4) {
        let Instance { data, j, beta } = inst;
        let d = data.d();
        prop_assume!(d >= 3);
        let k = (j + 1 + k_pick % (d - 1)) % d;
        let bk = NodeCoef::new(k, other[..d - 1].to_vec()).unwrap();
        let (wj, wk) = (&w[..d - 2], &w[3..3 + d - 2]);
        let a = score_statistic(&data, j, k, &beta, &bk, wj, wk).unwrap();
        let b = score_statistic(&data, k, j, &bk, &beta, wk, wj).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let va = variance_estimate(&data, j, k, &beta, &bk, wj, wk).unwrap();
        let vb = variance_estimate(&data, k, j, &bk, &beta, wk, wj).unwrap();
        prop_assert_eq!(va.to_bits(), vb.to_bits());
        prop_assert!(va >= 0.0);
    }

    #[test]
    fn precision_is_symmetric_with_the_4nn_pattern(d in 5usize..40, mu in 0.0..0.25f64) {
        let theta = build_precision(&GaussianSpec { d, mu }).unwrap();
        prop_assert_eq!(&theta, &theta.transpose());
        for j in 0..d {
            let neighbours = (0..d).filter(|&k| k != j && theta[(j, k)] != 0.0).count();
            prop_assert_eq!(neighbours, if mu == 0.0 { 0 } else { 4.min(d - 1) });
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn multistage_descends_and_certifies(inst in instance(20, 5), lambda in 0.02..0.3f64, fam in family()) {
        let Instance { data, j, .. } = inst;
        let cfg = SolverConfig::new(PenaltySpec::new(fam, lambda).unwrap());
        let est = multistage_estimate(&data, j, &cfg).unwrap();
        for w in est.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        let uniform = vec![lambda; data.d() - 1];
        let stage1 = solve_weighted_l1(&data, j, &uniform, &NodeCoef::zeros(j, data.d()), &cfg).unwrap();
        prop_assert_eq!(&est.weight_trace[0], &uniform);
        if est.stages_run == 1 {
            prop_assert_eq!(&est.beta_hat, &stage1.coef.beta);
        }
        let weights = est.weight_trace.last().unwrap();
        let g = node_gradient(&data, j, &est.coef(), &ALL).unwrap();
        if est.inner_converged {
            prop_assert!(kkt_violation(&g, &est.beta_hat, weights) <= 1e-5, "{:?}", est);
        } else {
            // only an unpenalized coordinate can run off on separable data
            prop_assert!(weights.contains(&0.0), "{:?}", est);
        }
    }

    #[test]
    fn argmin_is_invariant_to_column_shifts(inst in instance(20, 5), shifts in prop::collection::vec(-1000.0..1000.0f64, 5)) {
        let Instance { data, j, .. } = inst;
        let cfg = SolverConfig::capped_l1(0.05).unwrap();
        let a = multistage_estimate(&data, j, &cfg).unwrap();
        let b = multistage_estimate(&data.shifted(&shifts[..data.d()]).unwrap(), j, &cfg).unwrap();
        prop_assert!(a.beta_hat.iter().zip(&b.beta_hat).all(|(x, y)| (x - y).abs() <= 1e-6));
    }
}
