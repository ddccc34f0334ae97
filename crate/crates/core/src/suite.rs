//! The full invariant suite behind `qspec verify`: tree checks plus the
//! continued-fraction, operator, trace-map, DOS and exponent checks.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::bandtree::{build_generating_tree, step_coefficient, verify_tree_with, BandTree, Check, VerifyOptions, VerifyReport};
use crate::contfrac::{cf_value, convergents, denominators, CFExpansion};
use crate::dos::{compare_with, dos_from_bands, dos_from_tree, level_intervals, DOSApprox};
use crate::error::{Error, Result};
use crate::holder::{dichotomy_check, gamma_lower, gamma_upper, report_for_tree, Regime};
use crate::schrodinger::{potential, CountArithmetic, ModelParams, TridiagonalOperator};
use crate::tracemap::{TraceMap, TraceState};

fn check(name: &str, passed: bool, required: bool, detail: String) -> Check {
    Check { name: name.into(), passed, required, detail }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub tree: Option<VerifyOptions>,
    /// Energies per level for the trace-map checks.
    pub energies: usize,
    /// Largest operator used by the counting and DOS checks.
    pub max_n: u64,
    /// Run the dichotomy classification (builds four beam trees).
    pub dichotomy: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { tree: None, energies: 32, max_n: 50_000, dichotomy: true }
    }
}

/// Builds the tree and runs every check.
pub fn verify_all(params: &ModelParams, depth: usize, opts: &SuiteOptions) -> Result<VerifyReport> {
    let tree = build_generating_tree(params, depth)?;
    verify_all_for_tree(&tree, opts)
}

pub fn verify_all_for_tree(tree: &BandTree, opts: &SuiteOptions) -> Result<VerifyReport> {
    let topts = opts.tree.clone().unwrap_or_else(|| VerifyOptions::for_tree(tree));
    let mut report = verify_tree_with(tree, &topts)?;
    let params = &tree.params;
    let c = &mut report.checks;
    c.push(reduced_denominators(&params.cf, tree.depth() + 10)?);
    c.push(convergent_error(&params.cf)?);
    c.push(q_growth(&params.cf)?);
    c.push(sturm_monotone(params, tree.depth(), opts.max_n)?);
    c.push(small_operator_oracle(params)?);
    c.push(potential_prefix(params)?);
    c.push(trace_consistency(tree, opts.energies)?);
    c.push(fricke_drift(tree, tree.depth() + 1, opts.energies)?);
    c.extend(dos_checks(tree, opts.max_n)?);
    c.extend(holder_checks(tree, opts.dichotomy)?);
    Ok(report)
}

/// q_K against the reduced denominator of [0; a_1, …, a_K].
pub fn reduced_denominators(cf: &CFExpansion, max_k: usize) -> Result<Check> {
    let max_k = cf.len().map_or(max_k, |n| n.min(max_k));
    let q = denominators(cf, max_k)?;
    let a = cf.prefix(max_k)?;
    let mut bad = Vec::new();
    for k in 1..=max_k {
        let mut x = Rational::new();
        for &ai in a[..k].iter().rev() {
            x = Rational::from(Rational::from(ai) + &x).recip();
        }
        if *x.denom() != q[k] {
            bad.push(k);
        }
    }
    Ok(check("reduced denominators", bad.is_empty(), true, if bad.is_empty() { format!("q_k matches [0;a_1..a_k] for k ≤ {max_k}") } else { format!("mismatch at k = {bad:?}") }))
}

/// |β − p_k/q_k| < 1/(q_k q_{k+1}).
pub fn convergent_error(cf: &CFExpansion) -> Result<Check> {
    let prec = 1024;
    let beta = cf_value(cf, prec)?;
    let count = cf.len().map_or(200, |n| n.min(200));
    let cv = convergents(cf, count)?;
    let mut bad = Vec::new();
    let mut checked = 0;
    for w in cv.windows(2) {
        let qq = Integer::from(&w[0].q * &w[1].q);
        if qq.significant_bits() > prec / 2 {
            break;
        }
        checked += 1;
        let err = Float::with_val(prec, &beta - Rational::from((&w[0].p, &w[0].q))).abs();
        if err * Float::with_val(prec, &qq) >= 1 {
            bad.push(w[0].k);
        }
    }
    Ok(check("convergent error", bad.is_empty(), true, if bad.is_empty() { format!("bound holds for {checked} convergents") } else { format!("bound fails at k = {bad:?}") }))
}

/// b^k ≤ q_k ≤ (b+1)^k for constant coefficients.
pub fn q_growth(cf: &CFExpansion) -> Result<Check> {
    let Some(b) = cf.constant_value() else {
        return Ok(check("q_k growth", true, false, "skipped: coefficients not constant".into()));
    };
    let q = denominators(cf, 40)?;
    let bad: Vec<usize> = (1..=40).filter(|&k| !(Integer::from(b).pow(k as u32) <= q[k] && q[k] <= Integer::from(b + 1).pow(k as u32))).collect();
    Ok(check("q_k growth", bad.is_empty(), true, if bad.is_empty() { format!("{b}^k ≤ q_k ≤ {}^k for k ≤ 40", b + 1) } else { format!("fails at k = {bad:?}") }))
}

fn largest_q(cf: &CFExpansion, from: usize, cap: u64) -> Result<u64> {
    let q = denominators(cf, from)?;
    Ok(q.iter().rev().filter_map(|x| x.to_u64()).find(|&x| x <= cap).unwrap_or(1))
}

/// Counts are non-decreasing in x and reach n above the spectrum.
pub fn sturm_monotone(params: &ModelParams, depth: usize, cap: u64) -> Result<Check> {
    let n = largest_q(&params.cf, depth + 1, cap.min(5000))?;
    let op = TridiagonalOperator::new(params, n)?;
    let (lo, hi) = (-3.0, params.lambda + 3.0);
    let mut prev = 0;
    let mut ok = op.count_below(lo, CountArithmetic::Auto).count == 0;
    for i in 0..=400 {
        let x = lo + (hi - lo) * i as f64 / 400.0;
        let c = op.count_below(x, CountArithmetic::Auto).count;
        ok &= c >= prev;
        prev = c;
    }
    ok &= prev == n as usize;
    Ok(check("Sturm count monotone", ok, true, format!("n = {n}, 401 points on [{lo}, {hi}], count at top {prev}")))
}

fn char_poly(diag: &[f64]) -> Vec<f64> {
    // det(x − H) by the three-term recursion on coefficient vectors
    let mut prev = vec![1.0];
    let mut cur = vec![-diag[0], 1.0];
    for &v in &diag[1..] {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= v * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Sturm counts against roots of the characteristic polynomial, n ≤ 8.
pub fn small_operator_oracle(params: &ModelParams) -> Result<Check> {
    let (lo, hi) = (-3.0, params.lambda + 3.0);
    let mut bad = Vec::new();
    for n in 1..=8u64 {
        let op = TridiagonalOperator::new(params, n)?;
        let p = char_poly(&op.diagonal);
        let grid = 20_000;
        let mut roots = Vec::new();
        let mut x0 = lo;
        let mut f0 = horner(&p, x0);
        for i in 1..=grid {
            let x1 = lo + (hi - lo) * i as f64 / grid as f64;
            let f1 = horner(&p, x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut a, mut b, fa) = (x0, x1, f0);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if horner(&p, m) * fa > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            f0 = f1;
        }
        if roots.len() != n as usize {
            bad.push(n);
            continue;
        }
        for i in 0..=96 {
            let x = lo + (hi - lo) * (i as f64 + 0.37) / 97.0;
            if roots.iter().any(|r| (r - x).abs() < 1e-9) {
                continue;
            }
            let want = roots.iter().filter(|&&r| r < x).count();
            if op.count_below(x, CountArithmetic::Double).count != want {
                bad.push(n);
                break;
            }
        }
    }
    Ok(check("small-n oracle", bad.is_empty(), true, if bad.is_empty() { "counts match characteristic-polynomial roots for n ≤ 8".into() } else { format!("mismatch for n = {bad:?}") }))
}

pub fn potential_prefix(params: &ModelParams) -> Result<Check> {
    let short = potential(params, 1, 500)?;
    let long = potential(params, 1, 2000)?;
    let ok = long[..500] == short[..];
    Ok(check("potential prefix", ok, true, "V(1..500) is a prefix of V(1..2000)".into()))
}

/// Energies spread over the bands of 𝓖_level, `count` of them.
pub fn band_energies(tree: &BandTree, level: usize, count: usize) -> Vec<Float> {
    let lv = &tree.levels[level.min(tree.depth())];
    (0..count)
        .map(|i| {
            let b = &lv[i * lv.len() / count];
            let t = (i as f64 + 0.5) / count as f64;
            let len = b.length();
            Float::with_val(b.lo.prec(), &b.lo + Float::with_val(len.prec(), &len * t))
        })
        .collect()
}

/// x_{(k+2,0)} = x_{(k,s)} at energies inside the bands.
pub fn trace_consistency(tree: &BandTree, count: usize) -> Result<Check> {
    let params = &tree.params;
    let depth = tree.depth();
    let map = TraceMap::with_alignment(params, depth + 2, tree.alignment)?;
    let mut worst = 0f64;
    let mut bad = 0;
    let mut total = 0;
    for k in 0..depth {
        let s = step_coefficient(params, tree.alignment, k)? as i64;
        for e in band_energies(tree, k + 1, count) {
            let a = map.state_at(&e, k + 2)?.x(0);
            let b = map.state_at(&e, k)?.x(s);
            let prec = a.prec().min(b.prec());
            let scale = Float::with_val(prec, a.abs_ref()).max(&Float::with_val(prec, 1));
            let rel = (Float::with_val(prec, &a - &b).abs() / scale).to_f64();
            worst = worst.max(rel);
            total += 1;
            if rel > 2f64.powi(-(params.precision_bits as i32) / 2) {
                bad += 1;
            }
        }
    }
    Ok(check("trace consistency", bad == 0, true, format!("{bad} of {total} energies differ; largest relative gap {worst:e}")))
}

/// Fricke residual of a fixed-precision run through `levels` levels.
pub fn fricke_drift(tree: &BandTree, levels: usize, count: usize) -> Result<Check> {
    let params = &tree.params;
    let map = TraceMap::with_alignment(params, levels + 1, tree.alignment)?;
    let limit = 1e-20 * params.lambda * params.lambda;
    let mut worst = 0f64;
    let mut failed = None;
    'levels: for k in 1..=levels {
        for e in band_energies(tree, k, count) {
            let mut s = TraceState::initial(map.lambda(), &e);
            for _ in 0..k {
                s = match map.advance(&s) {
                    Ok(s) => s,
                    Err(Error::PrecisionLoss { level, .. }) => {
                        failed = Some(level);
                        break 'levels;
                    }
                    Err(e) => return Err(e),
                };
            }
            worst = worst.max(map.fricke_residual(&s).to_f64());
        }
    }
    let ok = failed.is_none() && worst <= limit;
    let detail = match failed {
        Some(l) => format!("precision alarm at level {l}"),
        None => format!("max residual {worst:e} over levels ≤ {levels}, {count} energies each; limit {limit:e}"),
    };
    Ok(check("Fricke drift", ok, true, detail))
}

fn approx_for(tree: &BandTree, cap: u64) -> Result<Option<DOSApprox>> {
    let q = denominators(&tree.params.cf, tree.depth() + 2)?;
    // the direct comparison needs q_{k+2} ≤ cap
    let Some(k) = (1..=tree.depth()).rev().find(|&k| q[k + 2].to_u64().is_some_and(|x| x <= cap)) else {
        return Ok(None);
    };
    Ok(Some(if tree.is_complete() { dos_from_tree(tree, k)? } else { dos_from_bands(&tree.params, k)? }))
}

pub fn dos_checks(tree: &BandTree, cap: u64) -> Result<Vec<Check>> {
    let params = &tree.params;
    let Some(approx) = approx_for(tree, cap)? else {
        return Ok(vec![check("DOS checks", true, false, "skipped: q_3 exceeds the operator cap".into())]);
    };
    let mut out = Vec::new();

    let total = approx.total_mass();
    out.push(check("DOS total mass", (total - 1.0).abs() < 1e-12, true, format!("level {} mass {total}", approx.level)));

    // nested intervals around the spectrum centre
    let (a, b) = (approx.bands[0].0, approx.bands[approx.bands.len() - 1].1);
    let c = 0.5 * (a + b);
    let nested: Vec<(f64, f64)> = (1..=8).map(|i| (c - (b - a) * i as f64 / 14.0, c + (b - a) * i as f64 / 14.0)).collect();
    let cmp = compare_with(params, &approx, &nested)?;
    let mono = cmp.intervals.windows(2).all(|w| w[1].band_mass >= w[0].band_mass && w[1].direct_mass >= w[0].direct_mass);
    out.push(check("DOS nested monotone", mono, true, format!("{} nested intervals, n = {}", nested.len(), cmp.n)));

    // shifting an endpoint inside a gap
    let widest = approx.bands.windows(2).map(|w| (w[1].0 - w[0].1, w[0].1, w[1].0)).max_by(|x, y| x.0.total_cmp(&y.0));
    if let Some((_, g0, g1)) = widest {
        let shifts = [(a - 1.0, g0 + 0.25 * (g1 - g0)), (a - 1.0, g0 + 0.75 * (g1 - g0))];
        let r = compare_with(params, &approx, &shifts)?;
        let same = r.intervals[0].band_mass == r.intervals[1].band_mass && r.intervals[0].direct_mass == r.intervals[1].direct_mass;
        out.push(check("DOS gap shift", same, true, format!("endpoint moved within the gap ({g0}, {g1})")));
    }

    // discrepancy on fixed intervals shrinks with the level
    let probe = level_intervals(tree, 1.min(tree.depth()));
    let q = denominators(&params.cf, tree.depth() + 4)?;
    let ks: Vec<usize> = (1..=tree.depth() + 2).filter(|&k| q[k + 2].to_u64().is_some_and(|x| x <= cap)).collect();
    if ks.len() >= 2 {
        let (k0, k1) = (ks[0], ks[ks.len() - 1]);
        let d0 = compare_with(params, &dos_from_bands(params, k0)?, &probe)?.max_discrepancy;
        let d1 = compare_with(params, &dos_from_bands(params, k1)?, &probe)?.max_discrepancy;
        out.push(check("DOS convergence", d1 <= d0, true, format!("max discrepancy {d0:.4e} at k = {k0}, {d1:.4e} at k = {k1}")));
    }
    Ok(out)
}

pub fn holder_checks(tree: &BandTree, dichotomy: bool) -> Result<Vec<Check>> {
    let params = &tree.params;
    if params.lambda <= 24.0 {
        return Ok(vec![check("Hölder checks", true, false, "skipped: needs λ > 24".into())]);
    }
    let mut out = Vec::new();
    if let Some(b) = params.cf.constant_value() {
        let lams = [params.lambda, params.lambda * 2.0, params.lambda * 10.0];
        let lo: Vec<f64> = lams.iter().map(|&l| gamma_lower(b, l)).collect::<Result<_>>()?;
        let hi: Vec<f64> = lams.iter().map(|&l| gamma_upper(b, l)).collect::<Result<_>>()?;
        let ok = lo.windows(2).all(|w| w[1] < w[0]) && hi.windows(2).all(|w| w[1] < w[0]) && lo[0] > 0.0 && lo[0] <= hi[0];
        out.push(check("theorem exponents", ok, true, format!("0 < γ = {:.5} ≤ γ̃ = {:.5}, both decreasing in λ", lo[0], hi[0])));

        let r = report_for_tree(tree)?;
        let deepest = r.levels.last().and_then(|s| s.min_exponent).unwrap_or(f64::NAN);
        let (glo, ghi) = (r.gamma_lower.unwrap_or(f64::NAN), r.gamma_upper.unwrap_or(f64::NAN));
        let min_of_max = r.levels.iter().filter_map(|s| s.max_exponent.map(|e| (e, s.log_max_length))).min_by(|x, y| x.0.total_cmp(&y.0));
        let bracket = match min_of_max {
            Some((e, log_len)) => deepest >= glo && e <= ghi + (4f64.ln() / log_len).abs(),
            None => false,
        };
        out.push(check(
            "Hölder bracket",
            bracket,
            false,
            format!("min e at depth {deepest:.4} vs γ = {glo:.4}; min over levels of max e {:.4} vs γ̃ = {ghi:.4}", min_of_max.map_or(f64::NAN, |x| x.0)),
        ));
        let sandwich = r.levels.iter().all(|s| r.l_seq[s.level] <= s.log_min_length && s.log_min_length <= r.u_seq[s.level]);
        let first_bad = r.levels.iter().find(|s| !(r.l_seq[s.level] <= s.log_min_length && s.log_min_length <= r.u_seq[s.level])).map(|s| s.level);
        out.push(check(
            "closed-form length bounds",
            sandwich,
            false,
            match first_bad {
                None => "log L(k) ≤ log min |B| ≤ log U(k) at every level".into(),
                Some(k) => format!("first violated at level {k}"),
            },
        ));
    }
    if dichotomy && tree.depth() >= 4 {
        let d = dichotomy_check(&params.cf, params.lambda, tree.depth())?;
        let r = report_for_tree(tree)?;
        let positive = r.gamma_k_liminf.is_some_and(|g| g > 0.0);
        let consistent = positive == (d.regime == Regime::Geometric) || d.regime == Regime::Inconclusive;
        out.push(check("γ_k against regime", consistent, false, format!("regime {:?}, liminf γ_k {:?}", d.regime, r.gamma_k_liminf)));
    }
    Ok(out)
}
