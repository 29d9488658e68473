mod common;

use common::{bs_call, dense_quadrature, rel_err};
use ttgreeks::model::{CorrelationFixture, ModelSpec};
use ttgreeks::pipeline::{greeks_nd, BuildOptions, Builder, Greek, GridSpec, ToleranceSet};
use ttgreeks::Execution;

fn spec(d: usize, fixture: CorrelationFixture) -> ModelSpec {
    ModelSpec::new(1.0, 0.01, 100.0, fixture.matrix(d).unwrap(), [0.15, 0.25], [90.0, 120.0]).unwrap()
}

#[test]
fn single_asset_tensors_track_black_scholes() {
    let s = spec(1, CorrelationFixture::Const);
    let gs = GridSpec { n_gauss: 31, r_z: 30.0, n_p: 12 };
    let b = Builder::new(&s, &gs, &ToleranceSet::uniform(1e-10, 1e-16), &BuildOptions::default()).unwrap();
    let price = b.price().unwrap();
    let grids = b.grids();
    for g in Greek::ALL {
        let nd = greeks_nd(&price, g, 0).unwrap();
        let an = b.greek_an(g, 0).unwrap();
        for k in 1..gs.n_p - 1 {
            for l in 1..gs.n_p - 1 {
                let (sig, s0) = (grids.sigma[0].nodes[k], grids.spot[0].nodes[l]);
                let bs = bs_call(s0, s.strike, s.rate, s.maturity, sig);
                assert!(rel_err(price.tensor.evaluate_at(&[sig], &[s0]).unwrap(), bs.price) < 1e-4);
                let want = bs.get(Some(g));
                let got_an = an.tensor.evaluate_at(&[sig], &[s0]).unwrap();
                let got_nd = nd.tensor.evaluate_at(&[sig], &[s0]).unwrap();
                assert!(rel_err(got_an, want) < 1e-4, "AN {} at ({k},{l}): {got_an} vs {want}", g.name());
                assert!(rel_err(got_nd, want) < 1e-2, "ND {} at ({k},{l}): {got_nd} vs {want}", g.name());
            }
        }
    }
}

#[test]
fn three_assets_match_nested_quadrature() {
    let s = spec(3, CorrelationFixture::Noise);
    let gs = GridSpec { n_gauss: 7, r_z: 20.0, n_p: 6 };
    let b = Builder::new(&s, &gs, &ToleranceSet::uniform(1e-12, 1e-20), &BuildOptions::default()).unwrap();
    let price = b.price().unwrap();
    let delta = b.greek_an(Greek::Delta, 2).unwrap();
    let mut rng = common::Lcg(3);
    for _ in 0..10 {
        let node: Vec<(usize, usize)> = (0..3).map(|_| (rng.below(gs.n_p), rng.below(gs.n_p))).collect();
        let want = dense_quadrature(&s, b.grids(), &node, None);
        let got = price.tensor.evaluate_indices(&node).unwrap().value;
        assert!(rel_err(got, want) < 1e-7, "{node:?}: {got} vs {want}");
        let want = dense_quadrature(&s, b.grids(), &node, Some((Greek::Delta, 2)));
        let got = delta.tensor.evaluate_indices(&node).unwrap().value;
        assert!((got - want).abs() < 1e-7 * want.abs().max(1e-3), "{node:?}: {got} vs {want}");
    }
}

#[test]
fn sweeps_agree_across_policies_and_with_single_lookups() {
    let s = spec(2, CorrelationFixture::Rand);
    let gs = GridSpec { n_gauss: 7, r_z: 20.0, n_p: 5 };
    let price = Builder::new(&s, &gs, &ToleranceSet::uniform(1e-10, 1e-16), &BuildOptions::default())
        .unwrap()
        .price()
        .unwrap();
    let points: Vec<Vec<(usize, usize)>> =
        (0..5).flat_map(|a| (0..5).map(move |b| vec![(a, b), (4 - b, a)])).collect();
    let seq = price.tensor.evaluate_many(&points, Execution::Sequential).unwrap();
    let par = price.tensor.evaluate_many(&points, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    for (p, v) in points.iter().zip(&seq) {
        assert_eq!(*v, price.tensor.evaluate_indices(p).unwrap().value);
    }
}

#[test]
fn price_rises_with_every_spot() {
    let s = spec(2, CorrelationFixture::Const);
    let gs = GridSpec { n_gauss: 15, r_z: 25.0, n_p: 8 };
    let price = Builder::new(&s, &gs, &ToleranceSet::uniform(1e-10, 1e-16), &BuildOptions::default())
        .unwrap()
        .price()
        .unwrap();
    for k in 0..gs.n_p {
        for m in 0..2 {
            let vals: Vec<f64> = (0..gs.n_p)
                .map(|l| {
                    let mut node = vec![(k, 3), (k, 3)];
                    node[m].1 = l;
                    price.tensor.evaluate_indices(&node).unwrap().value
                })
                .collect();
            // Lobatto nodes run from the top of the range down
            let (lo, hi) = if price.tensor.grids.spot[m].nodes[0] < price.tensor.grids.spot[m].nodes[1] {
                (vals[0], vals[gs.n_p - 1])
            } else {
                (vals[gs.n_p - 1], vals[0])
            };
            assert!(lo < hi, "asset {m} at σ node {k}: {vals:?}");
        }
    }
}
