mod common;

use common::kernels::{self, dense, random_train};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use ttgreeks::tensor::io::{read_train, write_train};

/// Site dimensions and matching inner bonds for a random train.
fn shape() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec(1usize..5, 1..5).prop_flat_map(|dims| {
        let n = dims.len();
        (Just(dims), prop::collection::vec(1usize..4, n - 1))
    })
}

fn close(a: C64, b: C64, scale: f64) -> bool {
    (a - b).norm() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn truncation_respects_the_error_budget((dims, bonds) in shape(), seed in any::<u64>(), exp in 1i32..12) {
        kernels::svd_bound(&dims, &bonds, seed, 10f64.powi(-exp)).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn truncation_never_grows_bonds((dims, bonds) in shape(), seed in any::<u64>()) {
        let tt = random_train(&dims, &bonds, seed);
        let cut = tt.svd_truncate(1e-6).unwrap();
        for (a, b) in cut.bond_dims().iter().zip(tt.bond_dims()) {
            prop_assert!(*a <= b);
        }
        prop_assert_eq!(cut.dims(), tt.dims());
    }

    #[test]
    fn evaluation_matches_dense_expansion((dims, bonds) in shape(), seed in any::<u64>()) {
        let tt = random_train(&dims, &bonds, seed);
        let all = dense(&tt);
        let mut idx = vec![0usize; dims.len()];
        for (flat, want) in all.iter().enumerate() {
            let mut rem = flat;
            for i in (0..dims.len()).rev() {
                idx[i] = rem % dims[i];
                rem /= dims[i];
            }
            prop_assert!(close(tt.evaluate(&idx).unwrap(), *want, want.norm()));
        }
        prop_assert_eq!(tt.to_dense().unwrap().len(), all.len());
    }

    #[test]
    fn hadamard_product_is_entrywise((dims, bonds) in shape(), seed in any::<u64>()) {
        let (a, b) = (random_train(&dims, &bonds, seed), random_train(&dims, &bonds, seed ^ 0x55));
        let ab = a.elementwise_multiply(&b).unwrap();
        for ((x, y), z) in dense(&a).iter().zip(dense(&b)).zip(dense(&ab)) {
            prop_assert!(close(x * y, z, (x * y).norm()));
        }
        let want: Vec<usize> = a.bond_dims().iter().zip(b.bond_dims()).map(|(p, q)| p * q).collect();
        prop_assert_eq!(ab.bond_dims(), want);
    }

    #[test]
    fn full_sum_equals_dense_sum((dims, bonds) in shape(), seed in any::<u64>()) {
        let tt = random_train(&dims, &bonds, seed);
        let all: Vec<usize> = (0..dims.len()).collect();
        let got = tt.sum_over_axes(&all).unwrap().into_scalar().unwrap();
        let d = dense(&tt);
        let want: C64 = d.iter().sum();
        let scale: f64 = d.iter().map(|x| x.norm()).sum();
        prop_assert!(close(got, want, scale), "{} vs {}", got, want);
    }

    #[test]
    fn partial_sum_keeps_the_other_axes((dims, bonds) in shape(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        prop_assume!(dims.len() >= 2);
        let tt = random_train(&dims, &bonds, seed);
        let axis = pick.index(dims.len());
        let kept = tt.sum_over_axes(&[axis]).unwrap().into_train().unwrap();
        let mut rest = dims.clone();
        rest.remove(axis);
        prop_assert_eq!(kept.dims(), rest.clone());
        // brute force over the dense tensor
        let d = dense(&tt);
        let stride: usize = dims[axis + 1..].iter().product();
        let got = dense(&kept);
        for (flat, g) in got.iter().enumerate() {
            let (hi, lo) = (flat / stride, flat % stride);
            let want: C64 = (0..dims[axis]).map(|s| d[(hi * dims[axis] + s) * stride + lo]).sum();
            prop_assert!(close(*g, want, 10.0 * want.norm()));
        }
    }

    #[test]
    fn merging_cores_keeps_the_tensor((dims, bonds) in shape(), seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        prop_assume!(dims.len() >= 2);
        let tt = random_train(&dims, &bonds, seed);
        let merged = tt.merge_adjacent_cores(pick.index(dims.len() - 1)).unwrap();
        prop_assert_eq!(merged.len(), dims.len() - 1);
        for (x, y) in dense(&tt).iter().zip(dense(&merged)) {
            prop_assert!(close(*x, y, x.norm()));
        }
    }

    #[test]
    fn serialization_round_trips_bit_for_bit((dims, bonds) in shape(), seed in any::<u64>()) {
        let tt = random_train(&dims, &bonds, seed);
        let meta = serde_json::json!({ "seed": seed });
        let mut buf = Vec::new();
        write_train(&mut buf, &tt, Some(&meta)).unwrap();
        let (back, got_meta) = read_train(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(got_meta, Some(meta));
        prop_assert_eq!(back.bond_dims(), tt.bond_dims());
        for (a, b) in back.cores().iter().zip(tt.cores()) {
            prop_assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn chebyshev_differentiation_is_exact_on_polynomials(n in 3usize..20, coeffs in prop::collection::vec(-2.0f64..2.0, 1..20), lo in 0.05f64..100.0, width in 0.05f64..50.0) {
        let coeffs = &coeffs[..coeffs.len().min(n)];
        kernels::chebyshev_exact(n, coeffs, lo, lo + width).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn kronrod_integrates_its_degree_exactly(n in 1usize..40, coeffs in prop::collection::vec(-1.0f64..1.0, 1..30), r in 0.5f64..60.0) {
        let coeffs = &coeffs[..coeffs.len().min(3 * n + 2)];
        kernels::kronrod_exact(n, coeffs, r).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cross_interpolation_recovers_low_rank_tensors(dims in prop::collection::vec(2usize..9, 2..6), rank in 1usize..3, seed in any::<u64>()) {
        kernels::tci_low_rank(&dims, rank, seed).map_err(TestCaseError::fail)?;
    }
}
