use gpgraph::estimators::{empirical_cov, pairwise_cov, regular_cov, sparse_cov, Triplet};
use gpgraph::kernels::{gram, sample_paths, Grid, GramMatrix, KernelKind};
use gpgraph::operator::{block_norms, corr_matrix, precision};
use gpgraph::partition::{make_partition, PixelGraph};
use gpgraph::recovery::tpr_fpr;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_gram(seed: u64, r: usize) -> GramMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rng.random_range(1..=r);
    let a = DMatrix::from_fn(r, rank, |_, _| rng.random::<f64>() - 0.5);
    GramMatrix::from_matrix(&a * a.transpose()).unwrap()
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetry_survives_the_chain(seed in any::<u64>(), p in prop::sample::select(vec![2usize, 3, 5]), k in 1usize..8,
                                   log_kappa in -6.0f64..0.0) {
        let r = p * k * 2;
        let g = random_gram(seed, r);
        prop_assert_eq!(asymmetry(g.values()), 0.0);
        let part = make_partition(r, p).unwrap();
        let c = corr_matrix(&g, &part, 10f64.powf(log_kappa)).unwrap();
        prop_assert!(asymmetry(c.r0()) <= 1e-8);
        let pm = precision(&c).unwrap();
        prop_assert!(asymmetry(pm.values()) <= 1e-8);
        let n = block_norms(&pm, &part).unwrap();
        prop_assert!(asymmetry(n.matrix()) <= 1e-8);
    }

    #[test]
    fn inverse_identity_holds(seed in any::<u64>(), k in 1usize..20, log_kappa in -8.0f64..1.0) {
        let r = 4 * k;
        let g = random_gram(seed, r);
        let c = corr_matrix(&g, &make_partition(r, 4).unwrap(), 10f64.powf(log_kappa)).unwrap();
        let pm = precision(&c).unwrap();
        let resid = pm.values() * (DMatrix::identity(r, r) + c.scaled()) - DMatrix::identity(r, r);
        prop_assert!(resid.amax() < 1e-6, "residual {}", resid.amax());
    }

    #[test]
    fn pairwise_equals_empirical_on_full_data(seed in any::<u64>(), n in 2usize..30, r in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, r, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        prop_assert_eq!(pairwise_cov(&x).unwrap(), empirical_cov(&x).unwrap());
    }

    #[test]
    fn estimators_are_exactly_symmetric(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 9, |_, _| rng.random::<f64>() - 0.5);
        prop_assert_eq!(asymmetry(empirical_cov(&x).unwrap().values()), 0.0);
        prop_assert_eq!(asymmetry(regular_cov(&x).unwrap().values()), 0.0);
        let mut masked = x.clone();
        for i in 1..n {
            masked[(i, (i * 5) % 9)] = f64::NAN;
        }
        prop_assert_eq!(asymmetry(pairwise_cov(&masked).unwrap().values()), 0.0);
        let curves: Vec<Vec<Triplet>> = (0..n)
            .map(|_| (0..4).map(|_| (rng.random::<f64>(), rng.random::<f64>() - 0.5)).collect())
            .collect();
        prop_assert_eq!(asymmetry(sparse_cov(&curves, 3, 9).unwrap().gram.values()), 0.0);
    }

    #[test]
    fn complete_estimate_has_full_recall(seed in any::<u64>(), p in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flags: Vec<bool> = (0..p * p).map(|_| rng.random::<f64>() < 0.4).collect();
        let truth = PixelGraph::from_fn(p, |i, j| flags[i * p + j]);
        prop_assume!(!truth.is_complete());
        prop_assert_eq!(tpr_fpr(&PixelGraph::complete(p), &truth).unwrap(), (1.0, 1.0));
    }
}

#[test]
fn ridge_damps_correlation() {
    let part = make_partition(40, 4).unwrap();
    let mut violations = 0;
    for seed in 0..20 {
        let g = random_gram(seed, 40);
        let mut kappa = 1e-4;
        let mut last = f64::INFINITY;
        for _ in 0..12 {
            let m = corr_matrix(&g, &part, kappa).unwrap().r0().amax();
            violations += (m > last) as usize;
            last = m;
            kappa *= 2.0;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn zero_coupling_gives_identity_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut k = DMatrix::zeros(30, 30);
    for b in 0..3 {
        let a = DMatrix::from_fn(10, 4, |_, _| rng.random::<f64>());
        k.view_mut((b * 10, b * 10), (10, 10)).copy_from(&(&a * a.transpose()));
    }
    let part = make_partition(30, 3).unwrap();
    let c = corr_matrix(&GramMatrix::from_matrix(k).unwrap(), &part, 1e-6).unwrap();
    assert!(c.r0().iter().all(|&v| v == 0.0));
    let pm = precision(&c).unwrap();
    assert_eq!(pm.values(), &DMatrix::identity(30, 30));
    let n = block_norms(&pm, &part).unwrap();
    assert!((0..3).all(|i| (0..3).all(|j| i == j || n.get(i, j) == 0.0)));
}

#[test]
fn population_correlations_respect_unit_bound() {
    let part = make_partition(200, 10).unwrap();
    for kind in KernelKind::benchmark() {
        let g = gram(&kind, Grid::new(200).unwrap()).unwrap();
        let n = corr_matrix(&g, &part, 1e-10).unwrap().block_norms();
        assert!(n.max_off_diagonal() <= 1.0 + 1e-3, "{kind}: {}", n.max_off_diagonal());
    }
}

#[test]
fn empirical_error_shrinks_with_sample_size() {
    let g = gram(&KernelKind::Brownian, Grid::new(50).unwrap()).unwrap();
    let err = |n, seed| (empirical_cov(&sample_paths(&g, n, seed).unwrap()).unwrap().values() - g.values()).amax();
    let small: f64 = (0..10).map(|s| err(100, s)).sum();
    let large: f64 = (0..10).map(|s| err(1600, 100 + s)).sum();
    assert!(large < 0.6 * small, "{large} vs {small}");
}
