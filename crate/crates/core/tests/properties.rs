//! Randomized invariants over dimensions, partitions and seeds.

use cpr_core::curvature::{ad_squared, expansivity_check, sinh_ratio, sinhc_of_square};
use cpr_core::expectations::{BlockPartition, ConditionalExpectation, ExpectationChain};
use cpr_core::homogeneous::{coset_reduce, from_tangent, sigma_g, to_tangent, GCoset};
use cpr_core::linalg::{
    frobenius, herm_exp, herm_log, norm, random_hermitian, random_invertible, random_unitary, relative_error,
    seeded_rng, Invertible, NormKind,
};
use cpr_core::splitting::{cpr_split, extended_split, SolverConfig};
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = NormKind> {
    prop::sample::select(NormKind::standard().to_vec())
}

/// Blocks of size 1..=2 plus an optional leading remainder.
fn partitions() -> impl Strategy<Value = BlockPartition> {
    (prop::collection::vec(1usize..=2, 1..=3), 0usize..=1).prop_map(|(blocks, rem)| {
        let dim = blocks.iter().sum::<usize>() + rem;
        BlockPartition::new(dim, blocks, rem > 0).unwrap()
    })
}

/// A depth-3 chain: singletons inside blocks formed by merging neighbours.
fn chains() -> impl Strategy<Value = ExpectationChain> {
    prop::collection::vec(1usize..=2, 1..=3).prop_map(|coarse| {
        let dim = coarse.iter().sum();
        let fine = BlockPartition::diagonal(dim);
        ExpectationChain::new(dim, vec![fine, BlockPartition::new(dim, coarse, false).unwrap()]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn exp_log_round_trip(n in 1usize..=5, seed in any::<u64>(), scale in 0.01f64..3.0) {
        let x = random_hermitian(n, &mut seeded_rng(seed)).scale(scale);
        let back = herm_log(&herm_exp(&x).unwrap()).unwrap();
        prop_assert!(frobenius(&(back.matrix() - x.matrix())) <= 1e-9 * (1.0 + x.frobenius()));
    }

    #[test]
    fn norms_are_unitarily_invariant(n in 1usize..=5, seed in any::<u64>(), kind in kinds()) {
        let mut rng = seeded_rng(seed);
        let m = random_invertible(n, &mut rng).matrix().clone();
        let (u, v) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng));
        let moved = u.matrix() * &m * v.matrix();
        prop_assert!((norm(&moved, kind) - norm(&m, kind)).abs() <= 1e-10 * norm(&m, kind));
    }

    #[test]
    fn pinching_is_idempotent_and_contractive(p in partitions(), seed in any::<u64>(), kind in kinds()) {
        let e = ConditionalExpectation::new(p.clone());
        let m = random_invertible(p.dim(), &mut seeded_rng(seed)).matrix().clone();
        let once = e.pinch(&m).unwrap();
        let twice = e.pinch(&once).unwrap();
        prop_assert!(frobenius(&(&twice - &once)) <= 1e-14 * (1.0 + frobenius(&m)));
        prop_assert!(norm(&once, kind) <= norm(&m, kind) * (1.0 + 1e-12));
        prop_assert!(e.in_algebra(&once));
    }

    #[test]
    fn pinching_is_a_bimodule_map(p in partitions(), seed in any::<u64>()) {
        let e = ConditionalExpectation::new(p.clone());
        let mut rng = seeded_rng(seed);
        let m = random_invertible(p.dim(), &mut rng).matrix().clone();
        let (a, b) = (e.random_algebra(&mut rng), e.random_algebra(&mut rng));
        let lhs = e.pinch(&(&a * &m * &b)).unwrap();
        let rhs = &a * e.pinch(&m).unwrap() * &b;
        prop_assert!(relative_error(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn split_round_trip(p in partitions(), seed in any::<u64>()) {
        let e = ConditionalExpectation::new(p.clone());
        let g = random_invertible(p.dim(), &mut seeded_rng(seed));
        let s = cpr_split(&g, &e, &SolverConfig::default()).unwrap();
        prop_assert!(s.reconstruction_error(g.matrix()).unwrap() <= 1e-8);
        prop_assert!(s.u.defect() <= 1e-10);
        prop_assert!(frobenius(e.pinch_hermitian(&s.x[0]).matrix()) <= 1e-8 * (1.0 + s.x[0].frobenius()));
        prop_assert!(e.algebra_residual(s.y1.matrix()) <= 1e-10 * (1.0 + s.y1.frobenius()));
    }

    #[test]
    fn extended_split_round_trip(chain in chains(), seed in any::<u64>()) {
        let g = random_invertible(chain.dim(), &mut seeded_rng(seed));
        let s = extended_split(&g, &chain, &SolverConfig::default()).unwrap();
        prop_assert_eq!(s.x.len(), 2);
        prop_assert!(s.reconstruction_error(g.matrix()).unwrap() <= 1e-8);
    }

    #[test]
    fn split_of_unitary_times_b_is_unitary(p in partitions(), seed in any::<u64>()) {
        let e = ConditionalExpectation::new(p.clone());
        let mut rng = seeded_rng(seed);
        let u = random_unitary(p.dim(), &mut rng);
        let b = herm_exp(&e.random_hermitian_b(&mut rng)).unwrap();
        let g = Invertible::new(u.matrix() * b.matrix()).unwrap();
        let s = cpr_split(&g, &e, &SolverConfig::default()).unwrap();
        prop_assert!(s.x[0].frobenius() <= 1e-8);
    }

    #[test]
    fn tangent_round_trip_and_sigma(p in partitions(), seed in any::<u64>()) {
        let e = ConditionalExpectation::new(p.clone());
        let cfg = SolverConfig::default();
        let s = GCoset::new(random_invertible(p.dim(), &mut seeded_rng(seed)), e).unwrap();
        let v = to_tangent(&s, &cfg).unwrap();
        prop_assert!(from_tangent(&v).unwrap().same_as(&s));
        prop_assert!(sigma_g(&sigma_g(&s)).same_as(&s));
        let reduced = coset_reduce(&s, &cfg).unwrap();
        prop_assert!(reduced.compose().unwrap().same_as(&s));
    }

    #[test]
    fn sinhc_is_at_least_one(s in 0.0f64..400.0) {
        let v = sinhc_of_square(s);
        prop_assert!(v >= 1.0);
        if s > 0.0 {
            prop_assert!((v - s.sqrt().sinh() / s.sqrt()).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn ad_squared_spectrum_is_nonnegative(n in 1usize..=4, seed in any::<u64>(), scale in 0.01f64..10.0) {
        let x = random_hermitian(n, &mut seeded_rng(seed)).scale(scale);
        let ad2 = ad_squared(&x);
        let tol = 1e-10 * (1.0 + x.frobenius().powi(2));
        prop_assert!(ad2.eigenvalues().iter().all(|&l| l >= -tol));
        prop_assert!(ad2.eigenvalues().iter().filter(|l| l.abs() <= tol).count() >= n);
        prop_assert!(sinh_ratio(&x).eigenvalues().iter().all(|&l| l >= 1.0 - 1e-12));
    }

    #[test]
    fn one_plus_ad_squared_expands(n in 1usize..=3, seed in any::<u64>(), kind in kinds()) {
        let x = random_hermitian(n, &mut seeded_rng(seed)).scale(2.0);
        let r = expansivity_check(&ad_squared(&x).one_plus(), kind, 16, seed).unwrap();
        prop_assert!(r.min_ratio >= 1.0 - 1e-9);
    }
}
