//! Loss, gradient, Hessian, kernels and sparse eigenvalues against hand
//! values, naive double-loop oracles and finite differences.

mod common;

use approx::assert_abs_diff_eq;
use common::*;
use nalgebra::DMatrix;
use semigraph::diagnostics::sparse_eigenvalue_bounds;
use semigraph::loss::*;
use semigraph::rng::Stream;
use semigraph::{Dataset, NodeCoef};

const ALL: PairIndexPlan = PairIndexPlan::AllPairs;

/// `x_1 = (1, 0, 0)`, `x_2 = (0, 1, 0)`.
fn two_points() -> Dataset {
    Dataset::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap()
}

fn coef(node: usize, beta: &[f64]) -> NodeCoef {
    NodeCoef::new(node, beta.to_vec()).unwrap()
}

fn with_constant_column(mut data: Vec<Vec<f64>>, k: usize) -> Dataset {
    for row in &mut data {
        row[k] = 3.5;
    }
    Dataset::from_rows(&data).unwrap()
}

fn rows_of(data: &Dataset) -> Vec<Vec<f64>> {
    (0..data.n()).map(|i| data.row(i).to_vec()).collect()
}

#[test]
fn residual_ratio_hand_values() {
    let data = two_points();
    assert_eq!(residual_ratio(&data, 0, (0, 1), &coef(0, &[0.0, 0.0])).unwrap(), 1.0);
    let r = residual_ratio(&data, 0, (0, 1), &coef(0, &[1.0, 0.0])).unwrap();
    assert_abs_diff_eq!(r, std::f64::consts::E, epsilon = 1e-15);
    assert_abs_diff_eq!(r, 2.718282, epsilon = 1e-6);

    let tied = Dataset::from_rows(&[vec![2.0, 5.0, -1.0], vec![2.0, -3.0, 4.0]]).unwrap();
    for beta in [[0.3, -1.7], [40.0, 90.0]] {
        assert_eq!(residual_ratio(&tied, 0, (0, 1), &coef(0, &beta)).unwrap(), 1.0);
    }
}

#[test]
fn residual_ratio_rejects_bad_input() {
    let data = two_points();
    assert!(residual_ratio(&data, 0, (0, 0), &coef(0, &[0.0, 0.0])).is_err());
    assert!(residual_ratio(&data, 0, (0, 1), &coef(1, &[0.0, 0.0])).is_err());
    assert!(residual_ratio(&data, 0, (0, 5), &coef(0, &[0.0, 0.0])).is_err());
}

#[test]
fn loss_hand_values() {
    let data = two_points();
    let l0 = node_loss(&data, 0, &coef(0, &[0.0, 0.0]), &ALL).unwrap();
    assert_abs_diff_eq!(l0, std::f64::consts::LN_2, epsilon = 1e-15);
    let l1 = node_loss(&data, 0, &coef(0, &[1.0, 0.0]), &ALL).unwrap();
    assert_abs_diff_eq!(l1, std::f64::consts::E.ln_1p(), epsilon = 1e-15);
    assert_abs_diff_eq!(l1, 1.313262, epsilon = 1e-6);
}

#[test]
fn loss_at_zero_is_ln2_for_any_data() {
    for seed in 0..5 {
        let data = random_dataset(seed, 17, 5, 3.0);
        for j in 0..5 {
            let l = node_loss(&data, j, &NodeCoef::zeros(j, 5), &ALL).unwrap();
            assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
        }
    }
}

#[test]
fn gradient_hand_values() {
    let data = two_points();
    let g = node_gradient(&data, 0, &coef(0, &[0.0, 0.0]), &ALL).unwrap();
    assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
    let h = grad_kernel(&data, 0, (0, 1), &coef(0, &[0.0, 0.0])).unwrap();
    assert_abs_diff_eq!(h[0], 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(h[1], 0.0, epsilon = 1e-15);
}

#[test]
fn hessian_hand_values() {
    let data = two_points();
    let h = node_hessian(&data, 0, &coef(0, &[0.0, 0.0]), &ALL).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.0]);
    assert!((h - want).amax() <= 1e-15);
}

#[test]
fn constant_target_column_gives_zero_derivatives() {
    let base = random_dataset(1, 15, 4, 1.0);
    let data = with_constant_column(rows_of(&base), 2);
    let beta = coef(2, &[0.4, -1.1, 2.0]);
    assert!(node_gradient(&data, 2, &beta, &ALL).unwrap().iter().all(|g| *g == 0.0));
    assert!(node_hessian(&data, 2, &beta, &ALL).unwrap().iter().all(|h| *h == 0.0));
    assert!(grad_kernel(&data, 2, (3, 9), &beta).unwrap().iter().all(|g| *g == 0.0));
    assert_abs_diff_eq!(node_loss(&data, 2, &beta, &ALL).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
}

#[test]
fn degenerate_conditioning_column_has_zero_partial() {
    let base = random_dataset(2, 14, 5, 1.0);
    let data = with_constant_column(rows_of(&base), 3);
    let mut rng = Stream::new(7);
    for j in (0..5).filter(|&j| j != 3) {
        for _ in 0..5 {
            let beta = coef(j, &uniform_vec(&mut rng, 4, -2.0, 2.0));
            let g = node_gradient(&data, j, &beta, &ALL).unwrap();
            assert_eq!(g[slot_of(j, 3)], 0.0);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let data = random_dataset(11, 20, 6, 1.0);
    let mut rng = Stream::new(3);
    for j in [0, 3, 5] {
        let beta = uniform_vec(&mut rng, 5, -1.0, 1.0);
        let g = node_gradient(&data, j, &coef(j, &beta), &ALL).unwrap();
        let fd = central_difference(|b| node_loss(&data, j, &coef(j, b), &ALL).unwrap(), &beta, 1e-5);
        assert!(rel_error(&g, &fd) <= 1e-6, "node {j}: {}", rel_error(&g, &fd));
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let data = random_dataset(12, 18, 5, 1.0);
    let mut rng = Stream::new(4);
    for j in 0..5 {
        let beta = uniform_vec(&mut rng, 4, -1.5, 1.5);
        let h = node_hessian(&data, j, &coef(j, &beta), &ALL).unwrap();
        let fd = central_jacobian(|b| node_gradient(&data, j, &coef(j, b), &ALL).unwrap(), &beta, 1e-5);
        let err = rel_error(h.as_slice(), fd.as_slice());
        assert!(err <= 1e-6, "node {j}: {err}");
    }
}

#[test]
fn optimized_evaluations_equal_naive_double_loops() {
    let mut rng = Stream::new(5);
    for seed in 0..12u64 {
        let n = 4 + (seed as usize % 9);
        let d = 3 + (seed as usize % 3);
        let data = if seed % 3 == 0 { discrete_dataset(seed, n, d) } else { random_dataset(seed, n, d, 1.5) };
        for j in 0..d {
            let beta = uniform_vec(&mut rng, d - 1, -2.0, 2.0);
            let c = coef(j, &beta);
            assert_abs_diff_eq!(node_loss(&data, j, &c, &ALL).unwrap(), naive_loss(&data, j, &beta), epsilon = 1e-12);
            let g = node_gradient(&data, j, &c, &ALL).unwrap();
            assert!(max_abs_diff(&g, &naive_gradient(&data, j, &beta)) <= 1e-12);
            let h = node_hessian(&data, j, &c, &ALL).unwrap();
            assert!((h - naive_hessian(&data, j, &beta)).amax() <= 1e-12);
            let mut pairs = Vec::new();
            for i in 0..n {
                for i2 in i + 1..n {
                    pairs.push((i, i2));
                }
            }
            for &(i, i2) in pairs.iter().step_by(5) {
                let k = grad_kernel(&data, j, (i, i2), &c).unwrap();
                assert!(max_abs_diff(&k, &naive_kernel(&data, j, i, i2, &beta)) <= 1e-12);
            }
        }
    }
}

#[test]
fn subsampled_loss_uses_realized_pairs() {
    let data = random_dataset(21, 12, 4, 1.0);
    let plan = PairIndexPlan::Subsample { pair_count: 20, seed: 9 };
    let pairs = plan.pairs(12).unwrap();
    assert_eq!(pairs.len(), 20);
    assert_eq!(plan.pair_count(12), 20);
    let mut dedup = pairs.clone();
    dedup.dedup();
    assert_eq!(dedup.len(), 20);
    assert!(pairs.windows(2).all(|w| w[0] < w[1]));
    let beta = [0.3, -0.8, 1.2];
    let want: f64 = pairs
        .iter()
        .map(|&p| softplus_ref(pair_exponent(&data, 1, p, &coef(1, &beta)).unwrap()))
        .sum::<f64>()
        / 20.0;
    assert_abs_diff_eq!(node_loss(&data, 1, &coef(1, &beta), &plan).unwrap(), want, epsilon = 1e-12);
    assert_eq!(plan.pairs(12).unwrap(), pairs);
    assert!(PairIndexPlan::Subsample { pair_count: 67, seed: 0 }.pairs(12).is_err());
    assert_eq!(ALL.pair_count(12), 66);
}

#[test]
fn kernel_average_reproduces_gradient() {
    let data = random_dataset(31, 11, 5, 1.0);
    let beta = coef(2, &[0.5, -0.25, 1.0, -1.5]);
    let n = data.n();
    let mut sum = vec![0.0; 4];
    for i in 0..n {
        for i2 in i + 1..n {
            for (s, v) in sum.iter_mut().zip(grad_kernel(&data, 2, (i, i2), &beta).unwrap()) {
                *s += v;
            }
        }
    }
    let avg: Vec<f64> = sum.iter().map(|s| s / (n * (n - 1) / 2) as f64).collect();
    assert!(max_abs_diff(&avg, &node_gradient(&data, 2, &beta, &ALL).unwrap()) <= 1e-12);
}

#[test]
fn stacked_kernel_layout_and_swap() {
    let d = 5;
    let data = random_dataset(41, 9, d, 1.0);
    let bj = coef(1, &[0.2, 0.0, -0.7, 0.4]);
    let bk = coef(3, &[-0.3, 0.9, 0.1, 0.0]);
    let jk = StackedCoef::null_point(&bj, &bk);
    let kj = StackedCoef::null_point(&bk, &bj);
    assert_eq!(jk.to_vec().len(), 2 * d - 3);
    for pair in [(0, 1), (2, 7), (4, 8)] {
        let a = stacked_kernel(&data, 1, 3, pair, &jk).unwrap();
        let b = stacked_kernel(&data, 3, 1, pair, &kj).unwrap();
        assert_eq!(a.len(), 2 * d - 3);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(&a[1..d - 1], &b[d - 1..]);
        assert_eq!(&a[d - 1..], &b[1..d - 1]);
        let naive = naive_stacked_kernel(&data, 1, 3, pair.0, pair.1, &jk.node_coefs().0.beta, &jk.node_coefs().1.beta);
        assert!(max_abs_diff(&a, &naive) <= 1e-12);
    }
    assert!(stacked_kernel(&data, 1, 1, (0, 1), &jk).is_err());
    assert!(stacked_kernel(&data, 3, 1, (0, 1), &jk).is_err());
}

#[test]
fn stacked_kernel_average_matches_block_map_of_gradients() {
    let d = 4;
    let data = random_dataset(42, 10, d, 1.0);
    let (j, k) = (0, 2);
    let st = StackedCoef {
        j,
        k,
        shared: 0.35,
        j_rest: vec![-0.4, 0.8],
        k_rest: vec![1.1, -0.2],
    };
    let (bj, bk) = st.node_coefs();
    assert_eq!(bj.beta[slot_of(j, k)], 0.35);
    assert_eq!(bk.beta[slot_of(k, j)], 0.35);
    let n = data.n();
    let mut sum = vec![0.0; 2 * d - 3];
    for i in 0..n {
        for i2 in i + 1..n {
            for (s, v) in sum.iter_mut().zip(stacked_kernel(&data, j, k, (i, i2), &st).unwrap()) {
                *s += v;
            }
        }
    }
    let avg: Vec<f64> = sum.iter().map(|s| s / (n * (n - 1) / 2) as f64).collect();
    let gj = naive_gradient(&data, j, &bj.beta);
    let gk = naive_gradient(&data, k, &bk.beta);
    let mut want = vec![gj[slot_of(j, k)] + gk[slot_of(k, j)]];
    want.extend(gj.iter().enumerate().filter(|&(s, _)| s != slot_of(j, k)).map(|(_, v)| *v));
    want.extend(gk.iter().enumerate().filter(|&(s, _)| s != slot_of(k, j)).map(|(_, v)| *v));
    assert!(max_abs_diff(&avg, &want) <= 1e-12);
}

#[test]
fn shift_and_permutation_invariance() {
    let data = random_dataset(51, 16, 5, 1.0);
    let mut rng = Stream::new(8);
    let shifts = uniform_vec(&mut rng, 5, -10.0, 10.0);
    let shifted = data.shifted(&shifts).unwrap();
    let mut order: Vec<usize> = (0..16).collect();
    rng.shuffle(&mut order);
    let permuted = data.select_rows(&order).unwrap();
    for j in 0..5 {
        let c = coef(j, &uniform_vec(&mut rng, 4, -2.0, 2.0));
        let l = node_loss(&data, j, &c, &ALL).unwrap();
        let g = node_gradient(&data, j, &c, &ALL).unwrap();
        let h = node_hessian(&data, j, &c, &ALL).unwrap();
        for other in [&shifted, &permuted] {
            assert_abs_diff_eq!(node_loss(other, j, &c, &ALL).unwrap(), l, epsilon = 1e-12);
            assert!(max_abs_diff(&node_gradient(other, j, &c, &ALL).unwrap(), &g) <= 1e-12);
            assert!((node_hessian(other, j, &c, &ALL).unwrap() - &h).amax() <= 1e-12);
        }
    }
}

#[test]
fn convexity_and_psd_hessian() {
    let data = random_dataset(61, 14, 5, 1.0);
    let mut rng = Stream::new(10);
    for _ in 0..30 {
        let j = rng.index(5);
        let b1 = uniform_vec(&mut rng, 4, -3.0, 3.0);
        let b2 = uniform_vec(&mut rng, 4, -3.0, 3.0);
        let t = rng.uniform();
        let mid: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f = |b: &[f64]| node_loss(&data, j, &coef(j, b), &ALL).unwrap();
        assert!(f(&mid) <= t * f(&b1) + (1.0 - t) * f(&b2) + 1e-10);
        let h = node_hessian(&data, j, &coef(j, &b1), &ALL).unwrap();
        assert!((&h - h.transpose()).amax() == 0.0);
        assert!(h.symmetric_eigenvalues().min() >= -1e-10);
    }
}

#[test]
fn sparse_eigenvalue_examples() {
    for s in 1..=4 {
        let (lo, hi) = sparse_eigenvalue_bounds(&DMatrix::identity(4, 4), s).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
    let (lo, hi) = sparse_eigenvalue_bounds(&diag, 1).unwrap();
    assert_eq!((lo, hi), (1.0, 3.0));

    let data = random_dataset(71, 15, 6, 1.0);
    let h = node_hessian(&data, 0, &NodeCoef::zeros(0, 6), &ALL).unwrap();
    let eig = h.clone().symmetric_eigenvalues();
    let (lo, hi) = sparse_eigenvalue_bounds(&h, 5).unwrap();
    assert_abs_diff_eq!(lo, eig.min(), epsilon = 1e-12);
    assert_abs_diff_eq!(hi, eig.max(), epsilon = 1e-12);
    let (lo2, hi2) = sparse_eigenvalue_bounds(&h, 2).unwrap();
    assert!(lo <= lo2 && lo2 <= hi2 && hi2 <= hi);
}

#[test]
fn sparse_eigenvalues_refuse_bad_sizes() {
    assert!(sparse_eigenvalue_bounds(&DMatrix::identity(21, 21), 2).is_err());
    assert!(sparse_eigenvalue_bounds(&DMatrix::identity(3, 3), 0).is_err());
    assert!(sparse_eigenvalue_bounds(&DMatrix::identity(3, 3), 4).is_err());
}

#[test]
fn extreme_coefficients_stay_finite() {
    let data = random_dataset(81, 10, 3, 10.0);
    let c = coef(0, &[500.0, -800.0]);
    let l = node_loss(&data, 0, &c, &ALL).unwrap();
    assert!(l.is_finite() && l > 0.0);
    assert_abs_diff_eq!(l, naive_loss(&data, 0, &c.beta), epsilon = 1e-9 * l);
    assert!(node_gradient(&data, 0, &c, &ALL).unwrap().iter().all(|g| g.is_finite()));
    assert!(node_hessian(&data, 0, &c, &ALL).unwrap().iter().all(|h| h.is_finite()));
}
