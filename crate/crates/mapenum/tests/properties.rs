use mapenum::asymptotics_enum::{map_series, residue_class};
use mapenum::exact_series::{rat, IntSeries, TruncSeries};
use mapenum::sampler_limit::{sample_records, CountTables};
use mapenum::surface::Surface;
use mapenum::tree_gf::{legs_series, legs_series_via_y, spine_bivariate, tree_series, DegreeSet};
use num_traits::Zero;
use proptest::prelude::*;

const ORDER: usize = 8;

fn int_series() -> impl Strategy<Value = IntSeries> {
    prop::collection::vec(-50i64..50, ORDER + 1).prop_map(|v| IntSeries::from_i64s(ORDER, &v))
}

fn rat_series() -> impl Strategy<Value = TruncSeries> {
    prop::collection::vec((-20i64..20, 1i64..6), ORDER + 1).prop_map(|v| {
        TruncSeries::from_coeffs(v.into_iter().map(|(n, d)| rat(n, d)).collect())
    })
}

fn degree_set() -> impl Strategy<Value = DegreeSet> {
    prop::collection::btree_set(3u32..9, 1..4)
        .prop_map(|s| DegreeSet::new(&s.into_iter().collect::<Vec<_>>()).unwrap())
}

fn small_surface() -> impl Strategy<Value = Surface> {
    prop::sample::select(vec![
        Surface::cylinder(),
        Surface::moebius(),
        Surface::orientable(1, 1),
        Surface::orientable(0, 3),
        Surface::non_orientable(1, 2),
        Surface::non_orientable(2, 1),
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integer_series_form_a_ring(a in int_series(), b in int_series(), c in int_series()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.add(&b).mul(&c), a.mul(&c).add(&b.mul(&c)));
        prop_assert_eq!(a.mul(&IntSeries::one(ORDER)), a.clone());
        prop_assert_eq!(a.add(&IntSeries::zero(ORDER)), a.clone());
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn rational_series_form_a_ring(a in rat_series(), b in rat_series(), c in rat_series()) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        if !a.coeff(0).is_zero() {
            prop_assert_eq!(a.mul(&a.inverse().unwrap()), TruncSeries::one(ORDER));
        }
    }

    #[test]
    fn map_counts_vanish_off_the_residue_class(s in small_surface(), delta in degree_set()) {
        let p = delta.period();
        let a = map_series(&s, &delta, 24).unwrap();
        for n in 0..=24 {
            if n % p != residue_class(s.chi(), p) {
                prop_assert!(a.coeff(n).is_zero(), "{} {} n={}", s, delta, n);
            }
        }
    }

    #[test]
    fn legs_routes_agree(delta in degree_set(), legs in 1usize..5) {
        prop_assert_eq!(legs_series(&delta, legs, 20), legs_series_via_y(&delta, legs, 20).unwrap());
    }

    #[test]
    fn spine_marginal_is_the_derivative(delta in degree_set()) {
        let order = 14;
        let marginal = spine_bivariate(&delta, order, order + 2)
            .into_iter()
            .fold(TruncSeries::zero(order), |acc, s| acc.add(&s));
        prop_assert_eq!(marginal, tree_series(&delta, order + 1).derive());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// 20 cases of 500 samples each: 10⁴ samples in total.
    #[test]
    fn balanced_edge_trees_give_dissections(
        s in small_surface(),
        delta in prop::sample::select(vec![vec![3u32], vec![4], vec![3, 4], vec![3, 5]]),
        n in 150usize..400,
        seed in any::<u64>(),
    ) {
        let delta = DegreeSet::new(&delta).unwrap();
        let p = delta.period();
        let n = n - n % p + residue_class(s.chi(), p);
        let t = CountTables::build(&s, &delta, n).unwrap();
        for r in sample_records(&t, seed, 500, 1, true) {
            if r.all_balanced {
                prop_assert_eq!(r.is_dissection, Some(true), "{} {} n={} seed={} sample {}", s, delta, n, seed, r.index);
            }
        }
    }
}
