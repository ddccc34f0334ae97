use proptest::prelude::*;
use qspec::bandtree::{build_generating_tree, verify_tree_with, VerifyOptions};
use qspec::contfrac::CFExpansion;
use qspec::dos::dos_from_tree;
use qspec::holder::{gamma_lower, gamma_upper};
use qspec::schrodinger::ModelParams;

fn structural() -> VerifyOptions {
    VerifyOptions { endpoint_tol: 1e-30, enumeration_levels: 4, union_levels: 2, union_max_p: 1, cover_n: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trees_satisfy_the_band_lemmas(prefix in proptest::collection::vec(1u64..5, 0..3), period in proptest::collection::vec(1u64..4, 1..3), lambda in 25.0f64..120.0) {
        let cf = CFExpansion::periodic(prefix, period).unwrap();
        let p = ModelParams::new(cf, lambda).unwrap();
        let tree = build_generating_tree(&p, 3).unwrap();
        let r = verify_tree_with(&tree, &structural()).unwrap();
        let failures: Vec<String> = r.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        prop_assert!(failures.is_empty(), "{:?}", failures);
    }

    #[test]
    fn tree_dos_is_a_distribution(b in 1u64..4, lambda in 25.0f64..200.0, x in -3.0f64..210.0, dx in 0.0f64..5.0) {
        let p = ModelParams::new(CFExpansion::constant(b).unwrap(), lambda).unwrap();
        let tree = build_generating_tree(&p, 3).unwrap();
        let d = dos_from_tree(&tree, 3).unwrap();
        prop_assert!((d.total_mass() - 1.0).abs() < 1e-12);
        let (n0, n1) = (d.cumulative(x), d.cumulative(x + dx));
        prop_assert!(0.0 <= n0 && n0 <= n1 && n1 <= 1.0 + 1e-12);
    }
}

proptest! {
    #[test]
    fn theorem_exponents_are_ordered(b in 1u64..12, lambda in 24.5f64..1e8) {
        let (lo, hi) = (gamma_lower(b, lambda).unwrap(), gamma_upper(b, lambda).unwrap());
        prop_assert!(0.0 < lo && hi > 0.0);
        if b != 3 {
            prop_assert!(lo <= hi, "b={} λ={}: {} {}", b, lambda, lo, hi);
        }
        prop_assert!(gamma_lower(b, lambda * 2.0).unwrap() < lo);
        prop_assert!(gamma_upper(b, lambda * 2.0).unwrap() < hi);
    }
}

// For b = 3 the two closed forms decay at different rates in log λ and
// cross near λ ≈ 1.4066e5, after which the lower exponent exceeds the upper.
#[test]
fn b3_exponents_cross() {
    assert!(gamma_lower(3, 1.4e5).unwrap() < gamma_upper(3, 1.4e5).unwrap());
    assert!(gamma_lower(3, 1.42e5).unwrap() > gamma_upper(3, 1.42e5).unwrap());
}
