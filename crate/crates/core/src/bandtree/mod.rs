//! Spectral generating bands.
//!
//! For k ≥ 1 the generating bands 𝓖_k are
//!
//! * type I: bands of σ_{(k,1)} inside a band of σ_{(k,0)},
//! * type II: bands of σ_{(k+1,0)} inside a band of σ_{(k,−1)},
//! * type III: bands of σ_{(k+1,0)} inside a band of σ_{(k,0)}.
//!
//! 𝓖_1 is found by a global search and classified directly. Every deeper
//! level is found by searching only inside the bands of the previous level.
//! Level 0 holds the two bands the definitions give when σ_{(0,0)} = ℝ,
//! [−2, 2] of type III and [λ−2, λ+2] of type I. They serve as the roots of
//! the type indices and are checked against 𝓖_1, never used to find it.

mod enumerate;
mod export;
mod verify;

pub use enumerate::{enumerate_bands, trace_degree, Enumerator};
pub use export::{decimal, tree_to_csv, tree_to_json, TreeExport};
pub use verify::{verify_tree, verify_tree_with, Check, VerifyOptions, VerifyReport};

use rug::ops::Pow;
use rug::{Assign, Float};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schrodinger::ModelParams;
use crate::search::{find_bands, SearchConfig, SearchStats, Termination};
use crate::tracemap::{resolved_alignment, ExponentAlignment, TraceMap, Workspace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BandKind {
    I,
    II,
    III,
}

impl BandKind {
    pub const ALL: [BandKind; 3] = [BandKind::I, BandKind::II, BandKind::III];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandKind::I => "I",
            BandKind::II => "II",
            BandKind::III => "III",
        }
    }
}

impl std::fmt::Display for BandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rows and columns ordered I, II, III.
pub type TransitionMatrix = [[i64; 3]; 3];

/// T for coefficient a: a band of type i spawns T[i][j] bands of type j.
pub fn transition_matrix(a: u64) -> TransitionMatrix {
    let a = a as i64;
    [[0, 1, 0], [a + 1, 0, a], [a, 0, a - 1]]
}

/// The coefficient attached to the step k → k+1 (a_0 = 0).
pub fn step_coefficient(params: &ModelParams, alignment: ExponentAlignment, k: usize) -> Result<u64> {
    match alignment.step_index(k) {
        0 => Ok(0),
        i => params.cf.coefficient(i).ok_or(Error::CfExhausted { needed: i }),
    }
}

/// Entries P(from, to) and Q(from, to) for coefficient a, or None when the
/// transition cannot occur.
pub fn length_factors(lambda: f64, a: u64, from: BandKind, to: BandKind, prec: u32) -> Option<(Float, Float)> {
    use BandKind::*;
    let lam = Float::with_val(prec, lambda);
    let l5 = Float::with_val(prec, &lam + 5u32);
    let l8 = Float::with_val(prec, &lam - 8u32);
    match (from, to) {
        (I, II) => {
            let e = a as i32 - 1;
            let q = Float::with_val(prec, l5.recip_ref()).pow(e);
            let p = (Float::with_val(prec, 3) / l8).pow(e);
            Some((q, p))
        }
        (II | III, I | III) => {
            let a2 = Float::with_val(prec, a + 2).pow(3u32);
            let q = (l5 * a2).recip();
            let p = Float::with_val(prec, 3) / (l8 * a);
            Some((q, p))
        }
        _ => None,
    }
}

/// (4∏Q, 4∏P) along a type index τ(0), …, τ(k). The step l → l+1 uses the
/// coefficient that the alignment attaches to it.
pub fn band_length_bounds(params: &ModelParams, alignment: ExponentAlignment, type_index: &[BandKind]) -> Result<(Float, Float)> {
    if params.lambda <= 8.0 {
        return Err(Error::Domain { lambda: params.lambda, requirement: "λ > 8" });
    }
    let prec = params.precision_bits;
    let mut lower = Float::with_val(prec, 4);
    let mut upper = Float::with_val(prec, 4);
    for (l, w) in type_index.windows(2).enumerate() {
        let a = step_coefficient(params, alignment, l)?;
        match length_factors(params.lambda, a, w[0], w[1], prec) {
            Some((q, p)) => {
                lower *= q;
                upper *= p;
            }
            None => {
                lower.assign(0);
                upper.assign(0);
            }
        }
    }
    Ok((lower, upper))
}

/// Working precision that resolves every band to `depth`: the bits lost
/// to the smallest bl1 lower factor at each step, plus a margin of 96 bits,
/// rounded up to a multiple of 64 and never below `params.precision_bits`.
pub fn precision_for_depth(params: &ModelParams, alignment: ExponentAlignment, depth: usize) -> Result<u32> {
    let l5 = (params.lambda + 5.0).log2();
    let mut bits = 2.0 + params.lambda.abs().max(1.0).log2();
    for l in 1..depth {
        let a = step_coefficient(params, alignment, l)? as f64;
        bits += ((a - 1.0) * l5).max(l5 + 3.0 * (a + 2.0).log2());
    }
    let need = ((bits + 96.0) / 64.0).ceil() as u32 * 64;
    Ok(need.max(params.precision_bits))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub lo: Float,
    pub hi: Float,
    pub level: usize,
    /// (k, p) of the σ_{(k,p)} the band belongs to.
    pub trace: (usize, i64),
    pub kind: BandKind,
    /// Index into the previous level.
    pub parent: Option<usize>,
    /// Realized children by kind (I, II, III); meaningful when expanded.
    pub children: [u32; 3],
    pub expanded: bool,
    pub clipped: bool,
}

impl Band {
    pub fn length(&self) -> Float {
        Float::with_val(self.lo.prec(), &self.hi - &self.lo)
    }

    pub fn midpoint(&self) -> Float {
        let mut m = Float::with_val(self.lo.prec(), &self.lo + &self.hi);
        m >>= 1u32;
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// Searches stop when the T-matrix prediction is met.
    Predicted,
    /// Searches refine until counts stop changing; no prediction is used.
    Stable,
}

#[derive(Clone, Debug)]
pub struct TreeOptions {
    /// Expand at most this many of the shortest bands of each kind per level.
    pub beam: Option<usize>,
    pub mode: CountMode,
    pub alignment: Option<ExponentAlignment>,
    pub search: SearchConfig,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { beam: None, mode: CountMode::Predicted, alignment: None, search: SearchConfig::default() }
    }
}

#[derive(Clone, Debug)]
pub struct BandTree {
    pub params: ModelParams,
    pub alignment: ExponentAlignment,
    /// levels[0] = 𝓖_0, levels[k] = 𝓖_k.
    pub levels: Vec<Vec<Band>>,
    pub beam: Option<usize>,
    pub mode: CountMode,
    pub stats: SearchStats,
}

impl BandTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// True when every band above the last level was expanded.
    pub fn is_complete(&self) -> bool {
        self.levels[..self.depth()].iter().all(|l| l.iter().all(|b| b.expanded))
    }

    pub fn band(&self, level: usize, idx: usize) -> &Band {
        &self.levels[level][idx]
    }

    /// τ(B) from level 0 down to the band itself.
    pub fn type_index(&self, level: usize, idx: usize) -> Vec<BandKind> {
        let mut out = vec![BandKind::I; level + 1];
        let (mut l, mut i) = (level, idx);
        loop {
            let b = &self.levels[l][i];
            out[l] = b.kind;
            match b.parent {
                Some(p) if l > 0 => {
                    l -= 1;
                    i = p;
                }
                _ => break,
            }
        }
        out
    }

    /// Band counts (I, II, III) at level k.
    pub fn level_counts(&self, k: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for b in &self.levels[k] {
            c[b.kind.index()] += 1;
        }
        c
    }

    /// Realized transitions out of level k, summed over expanded parents.
    pub fn realized_transitions(&self, k: usize) -> TransitionMatrix {
        let mut t = [[0i64; 3]; 3];
        for b in self.levels[k].iter().filter(|b| b.expanded) {
            for j in 0..3 {
                t[b.kind.index()][j] += b.children[j] as i64;
            }
        }
        t
    }

    /// T for the step k → k+1 under an alignment.
    pub fn predicted_transitions(&self, k: usize, alignment: ExponentAlignment) -> Result<TransitionMatrix> {
        Ok(transition_matrix(step_coefficient(&self.params, alignment, k)?))
    }

    /// Expanded parents at level k whose child counts differ from T.
    pub fn transition_exceptions(&self, k: usize, alignment: ExponentAlignment) -> Result<usize> {
        let t = self.predicted_transitions(k, alignment)?;
        Ok(self.levels[k]
            .iter()
            .filter(|b| b.expanded)
            .filter(|b| (0..3).any(|j| b.children[j] as i64 != t[b.kind.index()][j]))
            .count())
    }

    pub fn length_bounds(&self, level: usize, idx: usize) -> Result<(Float, Float)> {
        band_length_bounds(&self.params, self.alignment, &self.type_index(level, idx))
    }

    /// Shortest and longest band length at level k.
    pub fn length_extremes(&self, k: usize) -> Option<(Float, Float)> {
        let mut it = self.levels[k].iter().map(|b| b.length());
        let first = it.next()?;
        Some(it.fold((first.clone(), first), |(mn, mx), l| (if l < mn { l.clone() } else { mn }, if l > mx { l } else { mx })))
    }
}

/// Level-k search helper: one trace state per energy gives every trace the
/// classification needs.
pub(crate) struct LevelEval<'a> {
    pub map: &'a TraceMap,
    pub ws: Workspace,
    pub level: usize,
}

impl<'a> LevelEval<'a> {
    pub fn new(map: &'a TraceMap, level: usize) -> Self {
        Self { map, ws: map.workspace(), level }
    }

    pub fn at(&mut self, e: &Float) -> Result<()> {
        self.map.eval_into(e, self.level, &mut self.ws)
    }

    /// x_{(L,0)}, x_{(L,1)}, x_{(L+1,0)}, x_{(L,−1)} at the last energy.
    pub fn traces(&self) -> [Float; 4] {
        [self.ws.t_prev.clone(), self.ws.t_mix.clone(), self.ws.t_cur.clone(), self.ws.x_minus_one()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Channel {
    /// σ_{(L,1)}: candidate type I.
    Mix,
    /// σ_{(L+1,0)}: candidate type II or III.
    Cur,
}

pub(crate) fn inside(v: &Float, slack: &Float) -> bool {
    let a = Float::with_val(v.prec(), v.abs_ref());
    a <= *slack
}

fn classify(ev: &mut LevelEval, lo: &Float, hi: &Float, ch: Channel, slack: &Float) -> Result<Option<BandKind>> {
    let mut mid = Float::with_val(lo.prec(), lo + hi);
    mid >>= 1u32;
    let (mut in0, mut in_m1) = (true, true);
    for e in [lo, &mid, hi] {
        ev.at(e)?;
        let t = ev.traces();
        in0 &= inside(&t[0], slack);
        in_m1 &= inside(&t[3], slack);
    }
    Ok(match ch {
        Channel::Mix => in0.then_some(BandKind::I),
        Channel::Cur => match (in0, in_m1) {
            (true, false) => Some(BandKind::III),
            (false, true) => Some(BandKind::II),
            (true, true) => {
                return Err(Error::Classification {
                    level: ev.level,
                    detail: format!("band at {} lies in both σ_(k,0) and σ_(k,-1)", lo.to_f64()),
                })
            }
            (false, false) => None,
        },
    })
}

/// 2(1 + 2^{-prec/2}): the classification threshold on |x|.
pub(crate) fn trace_slack(prec: u32) -> Float {
    let eps = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    Float::with_val(prec, eps + 1u32) * 2u32
}

pub fn build_generating_tree(params: &ModelParams, depth: usize) -> Result<BandTree> {
    build_generating_tree_with(params, depth, &TreeOptions::default())
}

pub fn build_generating_tree_with(params: &ModelParams, depth: usize, opts: &TreeOptions) -> Result<BandTree> {
    params.require_band_regime()?;
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let alignment = match opts.alignment {
        Some(a) => a,
        None => resolved_alignment()?,
    };
    let prec = params.precision_bits;
    let map = TraceMap::with_alignment(params, depth + 1, alignment)?;
    let lam = params.lambda_float();
    let slack = trace_slack(prec);
    let mut stats = SearchStats::default();

    let root = |lo: Float, hi: Float, trace, kind| Band {
        lo,
        hi,
        level: 0,
        trace,
        kind,
        parent: None,
        children: [0; 3],
        expanded: true,
        clipped: false,
    };
    let level0 = vec![
        root(Float::with_val(prec, -2), Float::with_val(prec, 2), (1, 0), BandKind::III),
        root(Float::with_val(prec, &lam - 2u32), Float::with_val(prec, &lam + 2u32), (0, 1), BandKind::I),
    ];
    let mut levels = vec![level0];

    // 𝓖_1 by a global search.
    let a1 = step_coefficient(params, alignment, 0)?;
    let mut ev = LevelEval::new(&map, 1);
    let (wlo, whi) = (Float::with_val(prec, -3), Float::with_val(prec, &lam + 3u32));
    let terms = match opts.mode {
        CountMode::Predicted => [Termination::Expected(a1 as usize + 1), Termination::Expected(a1 as usize)],
        CountMode::Stable => [Termination::Stable, Termination::Stable],
    };
    let found = {
        let ev = &mut ev;
        find_bands(
            |e, out| {
                ev.at(e)?;
                out.push(ev.ws.t_mix.clone());
                out.push(ev.ws.t_cur.clone());
                Ok(())
            },
            &wlo,
            &whi,
            &terms,
            &opts.search,
            &mut stats,
        )?
    };
    let mut level1 = Vec::new();
    for (ch, bands) in [Channel::Mix, Channel::Cur].into_iter().zip(found) {
        for fb in bands {
            if let Some(kind) = classify(&mut ev, &fb.lo, &fb.hi, ch, &slack)? {
                let trace = if ch == Channel::Mix { (1, 1) } else { (2, 0) };
                let parent = levels[0].iter().position(|r| r.lo <= fb.lo && fb.hi <= r.hi);
                level1.push(Band {
                    lo: fb.lo,
                    hi: fb.hi,
                    level: 1,
                    trace,
                    kind,
                    parent,
                    children: [0; 3],
                    expanded: false,
                    clipped: fb.clipped,
                });
            }
        }
    }
    seal_level(&mut levels, level1, opts.beam);

    for k in 1..depth {
        let t = transition_matrix(step_coefficient(params, alignment, k)?);
        let mut ev = LevelEval::new(&map, k + 1);
        let mut next = Vec::new();
        for (pi, parent) in levels[k].iter().enumerate() {
            if !parent.expanded {
                continue;
            }
            let row = t[parent.kind.index()];
            let chans: Vec<Channel> = match parent.kind {
                BandKind::I => vec![Channel::Cur],
                _ => vec![Channel::Mix, Channel::Cur],
            };
            let terms: Vec<Termination> = chans
                .iter()
                .map(|c| match opts.mode {
                    CountMode::Stable => Termination::Stable,
                    CountMode::Predicted => Termination::Expected(match c {
                        Channel::Mix => row[0].max(0) as usize,
                        Channel::Cur => (row[1] + row[2]).max(0) as usize,
                    }),
                })
                .collect();
            let width = parent.length();
            let margin = Float::with_val(prec, &width * Float::with_val(prec, Float::i_exp(1, -24)));
            let wlo = Float::with_val(prec, &parent.lo - &margin);
            let whi = Float::with_val(prec, &parent.hi + &margin);
            let found = {
                let ev = &mut ev;
                let chans = &chans;
                find_bands(
                    |e, out| {
                        ev.at(e)?;
                        for c in chans {
                            out.push(match c {
                                Channel::Mix => ev.ws.t_mix.clone(),
                                Channel::Cur => ev.ws.t_cur.clone(),
                            });
                        }
                        Ok(())
                    },
                    &wlo,
                    &whi,
                    &terms,
                    &opts.search,
                    &mut stats,
                )?
            };
            for (ch, bands) in chans.iter().zip(found) {
                for fb in bands {
                    let kind = classify(&mut ev, &fb.lo, &fb.hi, *ch, &slack)?.ok_or_else(|| Error::Classification {
                        level: k + 1,
                        detail: format!("band [{}, {}] fits no type", fb.lo.to_f64(), fb.hi.to_f64()),
                    })?;
                    let trace = if *ch == Channel::Mix { (k + 1, 1) } else { (k + 2, 0) };
                    next.push(Band {
                        lo: fb.lo,
                        hi: fb.hi,
                        level: k + 1,
                        trace,
                        kind,
                        parent: Some(pi),
                        children: [0; 3],
                        expanded: false,
                        clipped: fb.clipped,
                    });
                }
            }
        }
        seal_level(&mut levels, next, opts.beam);
    }
    Ok(BandTree { params: params.clone(), alignment, levels, beam: opts.beam, mode: opts.mode, stats })
}

/// Sorts a new level, records child counts on the parents and marks which
/// bands get expanded.
fn seal_level(levels: &mut Vec<Vec<Band>>, mut next: Vec<Band>, beam: Option<usize>) {
    next.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));
    let prev = levels.last_mut().expect("level 0 exists");
    for b in &next {
        if let Some(p) = b.parent {
            prev[p].children[b.kind.index()] += 1;
        }
    }
    match beam {
        None => next.iter_mut().for_each(|b| b.expanded = true),
        Some(width) => {
            for kind in BandKind::ALL {
                let mut idx: Vec<usize> = (0..next.len()).filter(|&i| next[i].kind == kind).collect();
                idx.sort_by(|&a, &b| next[a].length().partial_cmp(&next[b].length()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
                for &i in idx.iter().take(width) {
                    next[i].expanded = true;
                }
            }
        }
    }
    levels.push(next);
}
