//! Frozen values computed independently of the band search.

use qspec::bandtree::{build_generating_tree, BandKind, Enumerator};
use qspec::contfrac::{denominators, CFExpansion};
use qspec::holder::{c_estimate, gamma_lower, gamma_upper, kind_masses};
use qspec::schrodinger::{eig_count_interval, potential, ModelParams};
use rug::Float;

fn fib() -> ModelParams {
    ModelParams::new(CFExpansion::fibonacci(), 30.0).unwrap()
}

fn close(a: &Float, b: f64, tol: f64) -> bool {
    (a.to_f64() - b).abs() <= tol
}

#[test]
fn fibonacci_level_one_bands() {
    // x_(1,1) = E² − 30E − 2: |x| ≤ 2 on [15 − √229, 0] ∪ [30, 15 + √229]
    let mut en = Enumerator::new(&fib(), 3).unwrap();
    let b = en.sigma(1, 1).unwrap();
    let r = 229f64.sqrt();
    assert_eq!(b.len(), 2);
    assert!(close(&b[0].lo, 15.0 - r, 1e-13) && close(&b[0].hi, 0.0, 1e-13));
    assert!(close(&b[1].lo, 30.0, 1e-13) && close(&b[1].hi, 15.0 + r, 1e-13));
    let s = en.sigma(2, 0).unwrap();
    assert!(close(&s[0].lo, 28.0, 0.0) && close(&s[0].hi, 32.0, 0.0));
}

#[test]
fn tree_level_counts() {
    let cases: [(&str, &[usize]); 3] = [("1*", &[2, 2, 4, 6, 10, 16]), ("2*", &[2, 4, 10, 24, 58, 140]), ("3*", &[2, 6, 20, 66, 218, 720])];
    for (spec, want) in cases {
        let p = ModelParams::new(spec.parse().unwrap(), 30.0).unwrap();
        let tree = build_generating_tree(&p, 5).unwrap();
        let got: Vec<usize> = tree.levels.iter().map(Vec::len).collect();
        assert_eq!(got, want, "{spec}");
        let q = denominators(&p.cf, 5).unwrap();
        for k in 1..=5 {
            let c = tree.level_counts(k);
            assert_eq!((c[1] + c[2]) as u32, q[k].to_u32().unwrap(), "{spec} level {k}");
        }
    }
}

#[test]
fn limiting_masses_golden_ratio() {
    // masses per kind shrink by the golden ratio every level
    let m = kind_masses(&fib(), 6).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    for k in 1..6 {
        for kind in [BandKind::I, BandKind::II] {
            let r = m[k][kind.index()] / m[k + 1][kind.index()];
            assert!((r - phi).abs() < 1e-9, "k={k} {kind}: {r}");
        }
    }
    let tree = build_generating_tree(&fib(), 6).unwrap();
    assert!((c_estimate(&tree).unwrap() - (3.0 - 5f64.sqrt())).abs() < 1e-9);
}

#[test]
fn theorem_one_and_two_at_thirty() {
    assert!((gamma_lower(1, 30.0).unwrap() - 0.105357).abs() < 1e-5);
    assert!((gamma_upper(1, 30.0).unwrap() - 0.172286).abs() < 1e-5);
}

#[test]
fn spectrum_counts() {
    // 55 of the 89 sites carry the potential, and so do 55 eigenvalues
    assert_eq!(eig_count_interval(&fib(), 89, -2.5, 2.5).unwrap(), 34);
    assert_eq!(eig_count_interval(&fib(), 89, 27.5, 32.5).unwrap(), 55);
    let v = potential(&fib(), 1, 13).unwrap();
    assert_eq!(v.iter().filter(|&&x| x == 30.0).count(), 8);
}
