//! Acceptance criteria 1–10. Prints one line per criterion and exits
//! nonzero when a criterion fails that is not listed in KNOWN_FAILURES.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qspec::bandtree::{build_generating_tree, verify_tree_with, BandKind, Enumerator, VerifyOptions};
use qspec::contfrac::{denominators, CFExpansion};
use qspec::dos::{dos_compare, level_intervals};
use qspec::holder::{corollary_asymptotics, dichotomy_check, gamma_lower, gamma_upper, holder_report, Regime};
use qspec::schrodinger::ModelParams;
use qspec::suite::{fricke_drift, q_growth};
use rug::Float;

/// Criteria that fail at the pinned tolerances; see the README.
const KNOWN_FAILURES: &[usize] = &[7, 8];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn params(cf: &str, lambda: f64) -> ModelParams {
    ModelParams::new(cf.parse::<CFExpansion>().unwrap(), lambda).unwrap()
}

fn band_count_law() -> Outcome {
    let start = Instant::now();
    let p = params("1*", 30.0);
    let mut en = Enumerator::new(&p, 12).unwrap();
    let two = Float::with_val(p.precision_bits, 2);
    let mut bad = Vec::new();
    for k in 1..=12 {
        let expected = en.q(k - 1).unwrap() as usize;
        let bands = match en.sigma(k, 0) {
            Ok(b) => b,
            Err(_) => {
                bad.push(k);
                continue;
            }
        };
        let disjoint = bands.windows(2).all(|w| w[0].hi < w[1].lo);
        let genuine = bands.iter().all(|b| {
            let mid = Float::with_val(p.precision_bits, &b.lo + &b.hi) / 2u32;
            en.eval(&mid, k, 0).unwrap().abs() <= two
        });
        if bands.len() != expected || !disjoint || !genuine {
            bad.push(k);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && elapsed < Duration::from_secs(300),
        format!("σ_(k,0) has q_(k-1) disjoint bands for k ≤ 12 (bad levels {bad:?}); {:.2}s at 256 bits", elapsed.as_secs_f64()),
    )
}

fn combinatorics() -> Outcome {
    let tree = build_generating_tree(&params("3*", 30.0), 6).unwrap();
    let mut exceptions = 0;
    let mut parents = 0;
    for k in 1..6 {
        for b in tree.levels[k].iter().filter(|b| b.expanded) {
            parents += 1;
            let want = match b.kind {
                BandKind::I => [0, 1, 0],
                BandKind::II => [4, 0, 3],
                BandKind::III => [3, 0, 2],
            };
            if b.children != want {
                exceptions += 1;
            }
        }
    }
    outcome(exceptions == 0 && parents > 0, format!("a ≡ 3, depth 6: {exceptions} exceptions among {parents} parents"))
}

fn structural() -> (Outcome, Outcome) {
    let opts = VerifyOptions { endpoint_tol: 1e-30, enumeration_levels: 0, union_levels: 0, union_max_p: 0, cover_n: 0 };
    let (mut nest_bad, mut sand_bad) = (Vec::new(), Vec::new());
    let mut bands = 0;
    for b in [1, 2, 3, 5] {
        for lambda in [30.0, 100.0] {
            let tree = build_generating_tree(&params(&format!("{b}*"), lambda), 8).unwrap();
            bands += tree.levels.iter().map(Vec::len).sum::<usize>();
            let r = verify_tree_with(&tree, &opts).unwrap();
            let ok = |name: &str| r.get(name).is_some_and(|c| c.passed);
            if !(ok("nesting") && ok("disjointness") && ok("empty triple intersection")) {
                nest_bad.push((b, lambda));
            }
            if !ok("length sandwich") {
                sand_bad.push((b, lambda));
            }
        }
    }
    (
        outcome(nest_bad.is_empty(), format!("nesting, disjointness, empty triple intersection at tol 1e-30 over {bands} bands; failing {nest_bad:?}")),
        outcome(sand_bad.is_empty(), format!("4∏Q ≤ |B| ≤ 4∏P for all {bands} bands; failing {sand_bad:?}")),
    )
}

fn dos_cross_validation() -> Outcome {
    let p = params("1*", 30.0);
    let tree = build_generating_tree(&p, 4).unwrap();
    let iv = level_intervals(&tree, 4);
    let c = dos_compare(&p, 6, &iv).unwrap();
    let tol = 5.0 / 13.0;
    outcome(c.n == 34 && c.max_discrepancy <= tol, format!("{} level-4 intervals, n = {}, max discrepancy {:.4} ≤ {tol:.4}", iv.len(), c.n, c.max_discrepancy))
}

fn fricke() -> Outcome {
    let p = params("1*", 30.0);
    let tree = build_generating_tree(&p, 15).unwrap();
    let c = fricke_drift(&tree, 15, 64).unwrap();
    outcome(c.passed, c.detail)
}

fn holder_bracket() -> Outcome {
    let r = holder_report(&params("1*", 30.0), 10).unwrap();
    let (lo, hi) = (gamma_lower(1, 30.0).unwrap() - 0.03, gamma_upper(1, 30.0).unwrap() + 0.05);
    let e = r.empirical_min.unwrap();
    let mins: Vec<f64> = r.levels.iter().filter_map(|s| s.min_exponent).collect();
    let monotone = mins.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        (lo..=hi).contains(&e) && monotone,
        format!("min e(B) = {e:.4}, bracket [{lo:.4}, {hi:.4}]; per-level minima non-increasing: {monotone}"),
    )
}

fn dichotomy() -> Outcome {
    let geo = dichotomy_check(&"2*".parse().unwrap(), 30.0, 8).unwrap();
    let sup = dichotomy_check(&"k".parse().unwrap(), 30.0, 11).unwrap();
    let g = &sup.gamma_k_seq;
    // gamma_k_seq[i] is γ_{i+1}
    let decreasing = (4..10).all(|k| g[k] < g[k - 1]);
    let halved = g[9] < g[3] / 2.0;
    let passed = geo.regime == Regime::Geometric && geo.fit_residual < geo.threshold && sup.regime == Regime::SuperGeometric && decreasing && halved;
    outcome(
        passed,
        format!(
            "b = 2: {} (residual {:.4} < {:.4}); a_k = k: {} (residual {:.3}); γ_4..γ_10 = {:?}, strictly decreasing {decreasing}, γ_10 < γ_4/2 {halved}",
            geo.verdict,
            geo.fit_residual,
            geo.threshold,
            sup.verdict,
            sup.fit_residual,
            g[3..10].iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn corollary() -> Outcome {
    let t = corollary_asymptotics(5, &[1e3, 1e4, 1e5, 1e6]).unwrap();
    let target = 0.65896;
    let dl: Vec<f64> = t.rows.iter().map(|r| (r.lower_scaled - target).abs()).collect();
    let du: Vec<f64> = t.rows.iter().map(|r| (r.upper_scaled - target).abs()).collect();
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    outcome(dec(&dl) && dec(&du), format!("|γ·logλ − {target}| = {dl:.4?}, |γ̃·logλ − {target}| = {du:.4?}"))
}

fn q_growth_law() -> Outcome {
    let bad: Vec<u64> = (1..=6).filter(|&b| !q_growth(&CFExpansion::constant(b).unwrap()).unwrap().passed).collect();
    let q40 = denominators(&CFExpansion::constant(6).unwrap(), 40).unwrap()[40].clone();
    outcome(bad.is_empty(), format!("b^k ≤ q_k ≤ (b+1)^k for b ≤ 6, k ≤ 40 (q_40 for b = 6 is {q40}); failing b {bad:?}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut run = |n: usize, f: &dyn Fn() -> Outcome| {
        let o = f();
        report(n, &o);
        results.push((n, o));
    };
    run(1, &band_count_law);
    run(2, &combinatorics);
    let (nesting, sandwich) = structural();
    report(3, &nesting);
    report(4, &sandwich);
    results.push((3, nesting));
    results.push((4, sandwich));
    let mut run = |n: usize, f: &dyn Fn() -> Outcome| {
        let o = f();
        report(n, &o);
        results.push((n, o));
    };
    run(5, &dos_cross_validation);
    run(6, &fricke);
    run(7, &holder_bracket);
    run(8, &dichotomy);
    run(9, &corollary);
    run(10, &q_growth_law);

    let unexpected: Vec<usize> = results.iter().filter(|(n, o)| !o.passed && !KNOWN_FAILURES.contains(n)).map(|(n, _)| *n).collect();
    let fixed: Vec<usize> = results.iter().filter(|(n, o)| o.passed && KNOWN_FAILURES.contains(n)).map(|(n, _)| *n).collect();
    let passed = results.iter().filter(|(_, o)| o.passed).count();
    println!("acceptance: {passed}/{} criteria pass; known failures {KNOWN_FAILURES:?}; unexpected failures {unexpected:?}; now passing {fixed:?}", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn report(n: usize, o: &Outcome) {
    println!("criterion {n:>2}: {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
}
