use super::*;
use faer::Mat;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_train(dims: &[usize], bonds: &[usize], seed: u64) -> TensorTrain {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let n = dims.len();
    let cores = (0..n)
        .map(|i| {
            let l = if i == 0 { 1 } else { bonds[i - 1] };
            let r = if i + 1 == n { 1 } else { bonds[i] };
            Core::from_fn(l, dims[i], r, |_, _, _| c(next(), next()))
        })
        .collect();
    TensorTrain::new(cores).unwrap()
}

fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in dims {
        out = out
            .into_iter()
            .flat_map(|p| (0..n).map(move |s| {
                let mut q = p.clone();
                q.push(s);
                q
            }))
            .collect();
    }
    out
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn evaluate_matches_dense_expansion() {
    let t = random_train(&[3, 2, 4], &[2, 3], 1);
    let dense = t.to_dense().unwrap();
    for (flat, idx) in multi_indices(&t.dims()).iter().enumerate() {
        assert!(close(t.evaluate(idx).unwrap(), dense[flat], 1e-13));
    }
    let (_, flops) = t.evaluate_with_flops(&[0, 0, 0]).unwrap();
    assert_eq!(flops, 2 + 6 + 3);
}

#[test]
fn rejects_bad_structure() {
    let a = Core::from_fn(1, 2, 3, |_, _, _| c(1.0, 0.0));
    let b = Core::from_fn(2, 2, 1, |_, _, _| c(1.0, 0.0));
    assert!(matches!(TensorTrain::new(vec![a, b]), Err(Error::Structure(_))));
    let t = random_train(&[2, 2], &[2], 3);
    assert!(matches!(
        t.evaluate(&[0, 5]),
        Err(Error::IndexOutOfRange { core: 1, index: 5, dim: 2 })
    ));
}

#[test]
fn svd_truncate_exact_and_compressing() {
    let t = random_train(&[3, 4, 3, 2], &[3, 5, 2], 7);
    let exact = t.svd_truncate(0.0).unwrap();
    let (d0, d1) = (t.to_dense().unwrap(), exact.to_dense().unwrap());
    for (x, y) in d0.iter().zip(&d1) {
        assert!(close(*y, *x, 1e-12));
    }
    // bonds never exceed the matricization ranks
    assert!(exact.bond_dims().iter().zip([3, 6, 2]).all(|(b, m)| *b <= m));

    // sum of two identical rank-1 trains has rank 1
    let f = TensorTrain::product(&[vec![c(1.0, 0.0), c(2.0, 1.0)], vec![c(0.5, 0.0), c(-1.0, 0.0)]])
        .unwrap();
    let doubled = f.elementwise_multiply(&TensorTrain::constant(&[2, 2], c(2.0, 0.0)).unwrap()).unwrap();
    assert_eq!(doubled.svd_truncate(1e-12).unwrap().bond_dims(), vec![1]);

    let (_, report) = t.svd_truncate_with_report(1e-2).unwrap();
    let approx = t.svd_truncate(1e-2).unwrap().to_dense().unwrap();
    let err: f64 = d0.iter().zip(&approx).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = d0.iter().map(|x| x.norm_sqr()).sum();
    assert!(err <= 1e-2 * norm * (1.0 + 1e-9));
    assert!(report.discarded_weight <= 1e-2 + 1e-12);
}

#[test]
fn svd_truncate_rejects_non_finite() {
    let mut t = random_train(&[2, 2], &[2], 9);
    t.cores[0].data[0] = c(f64::NAN, 0.0);
    assert!(matches!(t.svd_truncate(1e-8), Err(Error::NonFinite(_))));
}

#[test]
fn norm_matches_dense() {
    let t = random_train(&[2, 3, 2], &[2, 2], 11);
    let dense: f64 = t.to_dense().unwrap().iter().map(|x| x.norm_sqr()).sum();
    assert!((t.norm_sq() - dense).abs() < 1e-12 * dense);
}

#[test]
fn hadamard_bonds_multiply() {
    let a = random_train(&[2, 3, 2], &[2, 3], 2);
    let b = random_train(&[2, 3, 2], &[3, 2], 5);
    let p = a.elementwise_multiply(&b).unwrap();
    assert_eq!(p.bond_dims(), vec![6, 6]);
    for idx in multi_indices(&p.dims()) {
        let want = a.evaluate(&idx).unwrap() * b.evaluate(&idx).unwrap();
        assert!(close(p.evaluate(&idx).unwrap(), want, 1e-13));
    }
}

#[test]
fn sum_over_axes_matches_dense_sums() {
    let t = random_train(&[2, 3, 2, 3], &[2, 3, 2], 4);
    let dims = t.dims();
    for axes in [vec![0], vec![1, 2], vec![3], vec![0, 3], vec![1, 3]] {
        let reduced = t.sum_over_axes(&axes).unwrap().into_train().unwrap();
        let kept: Vec<usize> = (0..dims.len()).filter(|i| !axes.contains(i)).collect();
        for kidx in multi_indices(&reduced.dims()) {
            let mut want = c(0.0, 0.0);
            for idx in multi_indices(&dims) {
                if kept.iter().zip(&kidx).all(|(&k, &v)| idx[k] == v) {
                    want += t.evaluate(&idx).unwrap();
                }
            }
            assert!(close(reduced.evaluate(&kidx).unwrap(), want, 1e-12), "axes {axes:?}");
        }
    }
    let total = t.sum_over_axes(&[0, 1, 2, 3]).unwrap().into_scalar().unwrap();
    let want: C64 = t.to_dense().unwrap().iter().sum();
    assert!(close(total, want, 1e-12));
}

#[test]
fn zip_up_agrees_with_unfused_route() {
    let a = random_train(&[3, 2, 4, 2, 3], &[3, 4, 2, 3], 21);
    let b = random_train(&[3, 2, 4, 2, 3], &[2, 2, 3, 2], 22);
    for summed in [vec![0, 2, 4], vec![1, 3], vec![0], vec![4], vec![]] {
        let fused = a.hadamard_sum_compress(&b, &summed, 0.0, 4096).unwrap();
        let unfused = a.elementwise_multiply(&b).unwrap().sum_over_axes(&summed);
        let (fused, unfused) = match (fused, unfused) {
            (Reduced::Train(f), Ok(Reduced::Train(u))) => (f, u),
            (Reduced::Scalar(f), Ok(Reduced::Scalar(u))) => {
                assert!(close(f, u, 1e-12));
                continue;
            }
            (f, u) => panic!("mismatched reductions {f:?} {u:?}"),
        };
        for idx in multi_indices(&fused.dims()) {
            assert!(close(fused.evaluate(&idx).unwrap(), unfused.evaluate(&idx).unwrap(), 1e-11));
        }
        assert!(fused.max_bond() <= unfused.max_bond());
    }
    let all = a.hadamard_sum_compress(&b, &[0, 1, 2, 3, 4], 0.0, 4096).unwrap();
    let want: C64 = a.elementwise_multiply(&b).unwrap().to_dense().unwrap().iter().sum();
    assert!(close(all.into_scalar().unwrap(), want, 1e-12));
}

#[test]
fn zip_up_enforces_bond_cap() {
    let a = random_train(&[2, 2, 2], &[4, 4], 1);
    let b = random_train(&[2, 2, 2], &[4, 4], 2);
    assert!(matches!(
        a.hadamard_sum_compress(&b, &[0], 0.0, 8),
        Err(Error::BondCap { position: 0, bond: 16, cap: 8 })
    ));
}

#[test]
fn identity_insertion_preserves_values() {
    let t = random_train(&[2, 3], &[2], 8);
    let ext = t.insert_identity_cores(&[(0, 2), (1, 4), (1, 2), (2, 3)]).unwrap();
    assert_eq!(ext.dims(), vec![2, 2, 4, 2, 3, 3]);
    assert_eq!(ext.bond_dims(), vec![1, 2, 2, 2, 1]);
    for idx in multi_indices(&ext.dims()) {
        let want = t.evaluate(&[idx[1], idx[4]]).unwrap();
        assert_eq!(ext.evaluate(&idx).unwrap(), want);
    }
}

#[test]
fn merge_and_operator_views() {
    let t = random_train(&[2, 3, 4, 2], &[2, 3, 2], 13);
    let m = t.merge_adjacent_cores(1).unwrap();
    assert_eq!(m.dims(), vec![2, 12, 2]);
    let op = t.pair_into_operator().unwrap();
    assert_eq!(op.local_shapes(), vec![(2, 3), (4, 2)]);
    assert_eq!(op.bond_dims(), vec![3]);
    for idx in multi_indices(&t.dims()) {
        let want = t.evaluate(&idx).unwrap();
        assert!(close(m.evaluate(&[idx[0], idx[1] * 4 + idx[2], idx[3]]).unwrap(), want, 1e-13));
        let (v, flops) = op.evaluate_with_flops(&[(idx[0], idx[1]), (idx[2], idx[3])]).unwrap();
        assert!(close(v, want, 1e-13));
        assert_eq!(flops, 3 + 3);
    }
    assert!(random_train(&[2, 2, 2], &[2, 2], 1).pair_into_operator().is_err());
}

#[test]
fn matrix_application_on_core_and_operator() {
    let t = random_train(&[3, 2], &[2], 17);
    let m = Mat::from_fn(3, 3, |i, j| (i as f64 + 1.0) * 0.5 - j as f64);
    let applied = t.apply_matrix_to_core(0, m.as_ref()).unwrap();
    for s in 0..3 {
        for u in 0..2 {
            let want: C64 = (0..3).map(|q| t.evaluate(&[q, u]).unwrap() * m[(s, q)]).sum();
            assert!(close(applied.evaluate(&[s, u]).unwrap(), want, 1e-13));
        }
    }

    let t = random_train(&[3, 2, 2, 2], &[2, 2, 2], 19);
    let op = t.pair_into_operator().unwrap();
    let m2 = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
    let a1 = op.apply_matrix(0, false, m.as_ref()).unwrap();
    let a2 = op.apply_matrix(1, true, m2.as_ref()).unwrap();
    let (k, l, p, q) = (2, 1, 0, 1);
    let want1: C64 = (0..3).map(|r| m[(k, r)] * op.evaluate(&[(r, l), (p, q)]).unwrap()).sum();
    let want2: C64 = (0..2).map(|r| m2[(q, r)] * op.evaluate(&[(k, l), (p, r)]).unwrap()).sum();
    assert!(close(a1.evaluate(&[(k, l), (p, q)]).unwrap(), want1, 1e-13));
    assert!(close(a2.evaluate(&[(k, l), (p, q)]).unwrap(), want2, 1e-13));
    assert!(op.apply_matrix(0, true, m.as_ref()).is_err());
}

#[test]
fn artifact_round_trip() {
    let t = random_train(&[3, 2, 4], &[2, 3], 23);
    let meta = serde_json::json!({"kind": "price", "grid": [1.0, 2.0]});
    let mut buf = Vec::new();
    io::write_train(&mut buf, &t, Some(&meta)).unwrap();
    let (back, m) = io::read_train(&mut buf.as_slice()).unwrap();
    assert_eq!(back, t);
    assert_eq!(m, Some(meta));

    let mut plain = Vec::new();
    io::write_train(&mut plain, &t, None).unwrap();
    assert_eq!(&plain[..4], b"TTG1");
    assert_eq!(u32::from_le_bytes(plain[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(plain[8..12].try_into().unwrap()), 3);
    let (back, m) = io::read_train(&mut plain.as_slice()).unwrap();
    assert_eq!(back, t);
    assert!(m.is_none());

    plain[0] = b'X';
    assert!(matches!(io::read_train(&mut plain.as_slice()), Err(Error::Format(_))));
    assert!(io::read_train(&mut &buf[..20]).is_err());
}
