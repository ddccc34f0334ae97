//! Structural checks on a generating tree.

use rug::Float;
use serde::Serialize;

use crate::error::Result;
use crate::schrodinger::TridiagonalOperator;
use crate::tracemap::{ExponentAlignment, TraceMap};

use super::{inside, trace_slack, BandKind, BandTree, Enumerator, LevelEval};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks do not affect `all_passed`.
    pub required: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub cf: String,
    pub lambda: f64,
    pub depth: usize,
    pub alignment: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.required && !c.passed)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Absolute floor of the endpoint tolerance; the relative part is
    /// 2^{-prec/2}·|E|.
    pub endpoint_tol: f64,
    /// Highest k for the full-line σ_{(k,0)} count check.
    pub enumeration_levels: usize,
    /// Highest k for the union inclusion checks.
    pub union_levels: usize,
    /// Highest p for σ_{(k,p)} in the union inclusion checks.
    pub union_max_p: i64,
    /// Size of the finite operator whose eigenvalues are compared with the
    /// deepest level; 0 skips the comparison.
    pub cover_n: u64,
}

impl VerifyOptions {
    pub fn for_tree(tree: &BandTree) -> Self {
        let d = tree.depth();
        Self { endpoint_tol: 1e-30, enumeration_levels: (d + 1).min(7), union_levels: d.min(3), union_max_p: 2, cover_n: 2000 }
    }
}

pub fn verify_tree(tree: &BandTree) -> Result<VerifyReport> {
    verify_tree_with(tree, &VerifyOptions::for_tree(tree))
}

pub fn verify_tree_with(tree: &BandTree, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = vec![
        nesting(tree, opts),
        disjointness(tree),
        clipping(tree),
        transitions(tree, tree.alignment, true)?,
        transitions(tree, other(tree.alignment), false)?,
        root_transitions(tree)?,
        sandwich(tree)?,
    ];
    if tree.is_complete() {
        checks.push(sigma_counts(tree)?);
    }
    checks.push(triple_intersection(tree)?);
    checks.extend(enumeration_checks(tree, opts)?);
    if opts.cover_n > 0 {
        checks.push(eigenvalue_cover(tree, opts)?);
    }
    Ok(VerifyReport {
        cf: tree.params.cf.to_string(),
        lambda: tree.params.lambda,
        depth: tree.depth(),
        alignment: format!("{:?}", tree.alignment),
        checks,
    })
}

fn other(a: ExponentAlignment) -> ExponentAlignment {
    match a {
        ExponentAlignment::NextCoefficient => ExponentAlignment::CurrentCoefficient,
        ExponentAlignment::CurrentCoefficient => ExponentAlignment::NextCoefficient,
    }
}

fn check(name: &str, passed: bool, required: bool, detail: String) -> Check {
    Check { name: name.into(), passed, required, detail }
}

fn tolerance(x: &Float, floor: f64) -> Float {
    let prec = x.prec();
    let rel = Float::with_val(prec, x.abs_ref()) * Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    rel.max(&Float::with_val(prec, floor))
}

fn nesting(tree: &BandTree, opts: &VerifyOptions) -> Check {
    let mut bad = 0usize;
    let mut worst = 0f64;
    let mut total = 0usize;
    for k in 1..=tree.depth() {
        for b in &tree.levels[k] {
            total += 1;
            let Some(p) = b.parent else {
                bad += 1;
                continue;
            };
            let par = &tree.levels[k - 1][p];
            let lo_ex = Float::with_val(b.lo.prec(), &par.lo - &b.lo);
            let hi_ex = Float::with_val(b.lo.prec(), &b.hi - &par.hi);
            let ok = lo_ex <= tolerance(&b.lo, opts.endpoint_tol) && hi_ex <= tolerance(&b.hi, opts.endpoint_tol);
            worst = worst.max(lo_ex.to_f64()).max(hi_ex.to_f64());
            if !ok {
                bad += 1;
            }
        }
    }
    check("nesting", bad == 0, true, format!("{bad} of {total} bands outside their parent; largest excursion {worst:e}"))
}

fn disjointness(tree: &BandTree) -> Check {
    let mut bad = Vec::new();
    for (k, lv) in tree.levels.iter().enumerate().skip(1) {
        for w in lv.windows(2) {
            if w[0].hi >= w[1].lo {
                bad.push(k);
            }
        }
    }
    bad.dedup();
    check("disjointness", bad.is_empty(), true, if bad.is_empty() { "bands at each level pairwise disjoint".into() } else { format!("overlaps at levels {bad:?}") })
}

fn clipping(tree: &BandTree) -> Check {
    let n = tree.levels.iter().flatten().filter(|b| b.clipped).count();
    check("clipping", n == 0, true, format!("{n} bands reach the edge of their search window"))
}

fn transitions(tree: &BandTree, alignment: ExponentAlignment, required: bool) -> Result<Check> {
    let mut exceptions = 0;
    let mut parents = 0;
    let mut first = None;
    for k in 1..tree.depth() {
        let e = tree.transition_exceptions(k, alignment)?;
        if e > 0 && first.is_none() {
            first = Some(k);
        }
        exceptions += e;
        parents += tree.levels[k].iter().filter(|b| b.expanded).count();
    }
    let name = if required { "transition counts" } else { "transition counts, alternative alignment" };
    let detail = match first {
        None => format!("{parents} parents match T under {alignment:?}"),
        Some(k) => format!("{exceptions} of {parents} parents differ from T under {alignment:?}, first at level {k}"),
    };
    Ok(check(name, exceptions == 0, required, detail))
}

fn root_transitions(tree: &BandTree) -> Result<Check> {
    let real = tree.realized_transitions(0);
    let pred = tree.predicted_transitions(0, tree.alignment)?;
    let ok = tree.levels[0].iter().all(|b| real[b.kind.index()] == pred[b.kind.index()]);
    Ok(check("root transitions", ok, false, format!("level 0 to 1 realized {real:?}, T_0 {pred:?}")))
}

fn sandwich(tree: &BandTree) -> Result<Check> {
    if tree.params.lambda <= 8.0 {
        return Ok(check("length sandwich", true, false, "skipped: needs λ > 8".into()));
    }
    let prec = tree.params.precision_bits;
    let eps = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    let one_minus = Float::with_val(prec, 1u32 - &eps);
    let one_plus = Float::with_val(prec, 1u32 + &eps);
    let (mut bad, mut total) = (0usize, 0usize);
    let (mut min_lo, mut min_hi) = (f64::INFINITY, f64::INFINITY);
    for k in 1..=tree.depth() {
        for (i, b) in tree.levels[k].iter().enumerate() {
            let (lo, hi) = tree.length_bounds(k, i)?;
            let len = b.length();
            total += 1;
            if len < Float::with_val(prec, &lo * &one_minus) || len > Float::with_val(prec, &hi * &one_plus) {
                bad += 1;
            }
            min_lo = min_lo.min(Float::with_val(prec, &len / &lo).to_f64());
            min_hi = min_hi.min(Float::with_val(prec, &hi / &len).to_f64());
        }
    }
    Ok(check(
        "length sandwich",
        bad == 0,
        true,
        format!("{bad} of {total} bands outside their bounds; min |B|/lower {min_lo:.4}, min upper/|B| {min_hi:.4}"),
    ))
}

fn sigma_counts(tree: &BandTree) -> Result<Check> {
    let q = crate::contfrac::denominators(&tree.params.cf, tree.depth())?;
    let mut bad = Vec::new();
    for k in 1..=tree.depth() {
        let c = tree.level_counts(k);
        if Some((c[1] + c[2]) as u128) != q[k].to_u128() {
            bad.push(k);
        }
    }
    Ok(check("II+III = q_k", bad.is_empty(), true, if bad.is_empty() { "every σ_(k+1,0) band is generating".into() } else { format!("count differs from q_k at levels {bad:?}") }))
}

/// I bands avoid σ_{(k+1,0)}; II and III bands avoid σ_{(k,0)} ∩ σ_{(k,−1)}.
fn triple_intersection(tree: &BandTree) -> Result<Check> {
    let map = TraceMap::with_alignment(&tree.params, tree.depth() + 1, tree.alignment)?;
    let two = Float::with_val(tree.params.precision_bits, 2);
    let mut bad = 0usize;
    let mut total = 0usize;
    for k in 1..=tree.depth() {
        let mut ev = LevelEval::new(&map, k);
        for b in &tree.levels[k] {
            total += 1;
            let mut hit = false;
            for e in [&b.lo, &b.midpoint(), &b.hi] {
                ev.at(e)?;
                let t = ev.traces();
                hit |= match b.kind {
                    BandKind::I => inside(&t[2], &two),
                    _ => inside(&t[0], &two) && inside(&t[3], &two),
                };
            }
            if hit {
                bad += 1;
            }
        }
    }
    Ok(check("empty triple intersection", bad == 0, true, format!("{bad} of {total} bands meet the excluded spectrum")))
}

fn windows(bands: &[crate::search::FoundBand]) -> Vec<(Float, Float)> {
    bands.iter().map(|b| (b.lo.clone(), b.hi.clone())).collect()
}

fn enumeration_checks(tree: &BandTree, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let top = opts.enumeration_levels.max(opts.union_levels + 2);
    let mut en = Enumerator::with_alignment(&tree.params, top + 1, tree.alignment)?;
    let mut out = Vec::new();

    let mut bad = Vec::new();
    for k in 1..=opts.enumeration_levels {
        match en.sigma(k, 0) {
            Ok(b) if b.len() as u128 == en.q(k - 1).unwrap_or(0) => {}
            _ => bad.push(k),
        }
    }
    out.push(check(
        "σ_(k,0) enumeration",
        bad.is_empty(),
        true,
        if bad.is_empty() { format!("σ_(k,0) has q_(k-1) bands for k ≤ {}", opts.enumeration_levels) } else { format!("count differs at k = {bad:?}") },
    ));

    // every band of σ_{(k+1,0)} lies in a band of 𝓖_k
    let slack = Float::with_val(tree.params.precision_bits, opts.endpoint_tol);
    let mut missing = 0usize;
    let mut covered_levels = 0usize;
    for k in 1..=tree.depth().min(opts.enumeration_levels.saturating_sub(1)) {
        if !tree.levels[..k].iter().flatten().all(|b| b.expanded) {
            break;
        }
        covered_levels = k;
        let lv = &tree.levels[k];
        for fb in en.sigma(k + 1, 0)? {
            let i = lv.partition_point(|b| b.lo <= fb.lo);
            let holds = |b: &super::Band| {
                Float::with_val(b.lo.prec(), &b.lo - &slack) <= fb.lo && Float::with_val(b.lo.prec(), &fb.hi - &slack) <= b.hi
            };
            let ok = (i > 0 && holds(&lv[i - 1])) || lv.get(i).is_some_and(holds);
            if !ok {
                missing += 1;
            }
        }
    }
    out.push(check("σ_(k+1,0) cover", missing == 0, true, format!("{missing} bands of σ_(k+1,0) outside 𝓖_k for k ≤ {covered_levels}")));

    let mut item3 = Vec::new();
    let mut item3_meet = Vec::new();
    let mut item5 = Vec::new();
    let mut item5_meet = Vec::new();
    let mut item5_low = Vec::new();
    for k in 1..=opts.union_levels {
        let s2 = en.sigma(k + 2, 0)?;
        let s1 = en.sigma(k + 1, 0)?;
        let s0 = en.sigma(k, 0)?;
        let mut w = windows(&s1);
        w.extend(windows(&s0));
        let found = en.locate(k + 2, 0, &w)?;
        if found.len() != s2.len() || found.iter().any(|b| b.clipped) {
            item3.push(k);
        }
        // the intersection form: σ_{(k+2,0)} ∩ σ_{(k+1,0)} ⊂ σ_{(k,0)}
        let mut ev_bad = false;
        for a in &s2 {
            for b in &s1 {
                let lo = if a.lo > b.lo { &a.lo } else { &b.lo };
                let hi = if a.hi < b.hi { &a.hi } else { &b.hi };
                if lo <= hi {
                    let mut mid = Float::with_val(lo.prec(), lo + hi);
                    mid >>= 1u32;
                    let x = en.eval(&mid, k, 0)?;
                    if !inside(&x, &trace_slack(x.prec())) {
                        ev_bad = true;
                    }
                }
            }
        }
        if ev_bad {
            item3_meet.push(k);
        }

        for p in -1..opts.union_max_p {
            if en.degree(k, p)? == 0 || en.degree(k, p + 1)? == 0 {
                continue;
            }
            let sp = en.sigma(k, p)?;
            let mut w = windows(&s1);
            w.extend(windows(&sp));
            let deg = en.degree(k, p + 1)?;
            let found = en.locate(k, p + 1, &w)?;
            if found.len() as u128 != deg || found.iter().any(|b| b.clipped) {
                if p >= 0 {
                    item5.push((k, p));
                } else {
                    item5_low.push(k);
                }
            }
            let mut meet_bad = false;
            let eval_slack = trace_slack(tree.params.precision_bits);
            for b in &found {
                let mid = Float::with_val(b.lo.prec(), &b.lo + &b.hi) / 2u32;
                let x1 = en.eval(&mid, k + 1, 0)?;
                let xp = en.eval(&mid, k, p)?;
                if !(inside(&x1, &eval_slack) && inside(&xp, &eval_slack)) {
                    meet_bad = true;
                }
            }
            if meet_bad {
                item5_meet.push((k, p));
            }
        }
    }
    let lv = opts.union_levels;
    out.push(check(
        "σ_(k+2,0) ⊂ σ_(k+1,0) ∪ σ_(k,0)",
        item3.is_empty(),
        true,
        if item3.is_empty() { format!("holds for k ≤ {lv}") } else { format!("fails at k = {item3:?}") },
    ));
    out.push(check(
        "σ_(k+2,0) ∩ σ_(k+1,0) ⊂ σ_(k,0)",
        item3_meet.is_empty(),
        false,
        if item3_meet.is_empty() { format!("holds for k ≤ {lv}") } else { format!("fails at k = {item3_meet:?}") },
    ));
    out.push(check(
        "σ_(k,p+1) ⊂ σ_(k+1,0) ∪ σ_(k,p)",
        item5.is_empty(),
        true,
        if item5.is_empty() { format!("holds for k ≤ {lv}, 0 ≤ p < {}", opts.union_max_p) } else { format!("fails at (k,p) = {item5:?}") },
    ));
    out.push(check(
        "σ_(k,0) ⊂ σ_(k+1,0) ∪ σ_(k,-1)",
        item5_low.is_empty(),
        false,
        if item5_low.is_empty() { format!("holds for k ≤ {lv}") } else { format!("fails at k = {item5_low:?}") },
    ));
    out.push(check(
        "σ_(k,p+1) ⊂ σ_(k+1,0) ∩ σ_(k,p)",
        item5_meet.is_empty(),
        false,
        if item5_meet.is_empty() { format!("holds for k ≤ {lv}, p < {}", opts.union_max_p) } else { format!("fails at (k,p) = {item5_meet:?}") },
    ));
    Ok(out)
}

/// Share of the eigenvalues of H_n inside ∪𝓖_d, d the deepest level.
/// Finite-volume eigenvalues may sit in gaps, so this is informational.
fn eigenvalue_cover(tree: &BandTree, opts: &VerifyOptions) -> Result<Check> {
    let d = tree.depth();
    let op = TridiagonalOperator::new(&tree.params, opts.cover_n)?;
    let arith = crate::schrodinger::CountArithmetic::Double;
    let inside_count: usize = tree.levels[d].iter().map(|b| op.count_interval(b.lo.to_f64(), b.hi.to_f64(), arith)).sum();
    let share = inside_count as f64 / opts.cover_n as f64;
    Ok(check(
        "eigenvalue cover",
        inside_count == opts.cover_n as usize,
        false,
        format!("{inside_count} of {} eigenvalues of H_n inside 𝓖_{d} ({share:.4})", opts.cover_n),
    ))
}
