mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use sublin::gen;
use sublin::graph::resistance::dense_resistance;
use sublin::graph::{build_contribution_system, build_ppr_system, Form, Graph};

use common::rng;

fn adjacency(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.n(), g.n());
    for (u, v, w) in g.arcs() {
        a[(u, v)] += w;
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builders_match_dense_assembly(seed in 0u64..100_000, n in 2usize..64, alpha in 0.05f64..0.95) {
        let mut r = rng(seed);
        let g = gen::random_digraph(n, 2.5, seed % 2 == 0, &mut r);
        let t = (seed as usize) % n;
        let a = adjacency(&g);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(g.out_degrees()));
        let dinv = d.map(|x| if x > 0.0 { 1.0 / x } else { 0.0 });
        let eye = DMatrix::<f64>::identity(n, n);
        let c = 1.0 - alpha;
        let expected = [
            &eye - a.transpose() * &dinv * c,
            &d - a.transpose() * c,
            &eye - &dinv * &a * c,
            &d - &a * c,
        ];
        let built = [
            build_ppr_system(&g, alpha, Form::Identity).unwrap(),
            build_ppr_system(&g, alpha, Form::Degree).unwrap(),
            build_contribution_system(&g, alpha, t, Form::Identity).unwrap().0,
            build_contribution_system(&g, alpha, t, Form::Degree).unwrap().0,
        ];
        for (e, dec) in expected.iter().zip(&built) {
            let got = common::dense_split(dec);
            prop_assert!((got - e).amax() <= 1e-12);
        }
    }

    #[test]
    fn resistance_is_a_metric(seed in 0u64..100_000, n in 3usize..24) {
        let mut r = rng(seed);
        let g = gen::connected_er(n, 0.3, &mut r);
        let res = |s: usize, t: usize| common::resistance(&g, s, t);
        for (x, y, z) in [(0, 1, 2), (0, n - 1, n / 2), (1, 2, n - 1)] {
            prop_assert!(res(x, z) <= res(x, y) + res(y, z) + 1e-10);
        }
        let lib = dense_resistance(&g, 0, n - 1).unwrap();
        prop_assert!((lib - res(0, n - 1)).abs() <= 1e-9 * (1.0 + lib));
    }
}
