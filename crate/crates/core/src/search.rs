//! Root finding and band search in multiprecision.
//!
//! A band of x = x_{(k,p)} is a maximal interval where |x| ≤ 2. Inside a band
//! x runs monotonically from ±2 to ∓2, so every band carries exactly one sign
//! change of x and the gaps carry none. The search samples a window on
//! Chebyshev–Lobatto nodes, labels each sample as above (+2), below (−2) or
//! inside, and resolves each run between two gap samples into zero or one
//! band, refining locally where the labels are ambiguous. Band edges are then
//! polished with Brent's method on x ∓ 2.

use rug::{Assign, Float};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Stop as soon as at least this many bands are resolved.
    Expected(usize),
    /// Stop once the count survives a global refinement unchanged.
    Stable,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub samples_per_band: usize,
    pub min_samples: usize,
    pub max_doublings: u32,
    pub max_local_rounds: u32,
    /// Refinement stops once a window holds this many samples.
    pub max_samples: usize,
    pub brent_max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { samples_per_band: 4, min_samples: 12, max_doublings: 10, max_local_rounds: 48, max_samples: 1 << 20, brent_max_iter: 400 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub evaluations: u64,
    pub brent_iterations: u64,
    pub refinements: u64,
}

impl SearchStats {
    pub fn merge(&mut self, other: &SearchStats) {
        self.evaluations += other.evaluations;
        self.brent_iterations += other.brent_iterations;
        self.refinements += other.refinements;
    }
}

/// A located band. `clipped` marks bands that run into the window edge.
#[derive(Clone, Debug, PartialEq)]
pub struct FoundBand {
    pub lo: Float,
    pub hi: Float,
    pub clipped: bool,
}

/// Brent's method on a sign-changing bracket [a, b] (fa·fb ≤ 0). Stops when
/// the bracket is below `abs_tol` plus a few ulps of the iterate.
pub fn brent<F>(mut f: F, a: &Float, fa: &Float, b: &Float, fb: &Float, abs_tol: &Float, max_iter: usize) -> Result<(Float, usize)>
where
    F: FnMut(&Float) -> Result<Float>,
{
    if fa.is_zero() {
        return Ok((a.clone(), 0));
    }
    if fb.is_zero() {
        return Ok((b.clone(), 0));
    }
    let prec = a.prec().max(b.prec());
    let eps = Float::with_val(prec, Float::i_exp(1, 1 - prec as i32));
    let (mut a, mut fa, mut b, mut fb) = (a.clone(), fa.clone(), b.clone(), fb.clone());
    let mut c = a.clone();
    let mut fc = fa.clone();
    let mut d = Float::with_val(prec, &b - &a);
    let mut e = d.clone();
    let mut iters = 0;
    let half_tol = Float::with_val(prec, abs_tol * 0.5f64);
    loop {
        if (fb.is_sign_positive() && fc.is_sign_positive()) || (fb.is_sign_negative() && fc.is_sign_negative()) {
            c.assign(&a);
            fc.assign(&fa);
            d.assign(&b - &a);
            e.assign(&d);
        }
        if fc.clone().abs() < fb.clone().abs() {
            a.assign(&b);
            b.assign(&c);
            c.assign(&a);
            fa.assign(&fb);
            fb.assign(&fc);
            fc.assign(&fa);
        }
        let tol1 = Float::with_val(prec, b.abs_ref()) * &eps * 2u32 + &half_tol;
        let xm = Float::with_val(prec, &c - &b) / 2u32;
        if xm.clone().abs() <= tol1 || fb.is_zero() || iters >= max_iter {
            return Ok((b, iters));
        }
        if e.clone().abs() >= tol1 && fa.clone().abs() > fb.clone().abs() {
            let s = Float::with_val(prec, &fb / &fa);
            let (mut p, mut q);
            if a == c {
                p = Float::with_val(prec, &xm * &s) * 2u32;
                q = Float::with_val(prec, 1 - &s);
            } else {
                let qq = Float::with_val(prec, &fa / &fc);
                let r = Float::with_val(prec, &fb / &fc);
                let t1 = Float::with_val(prec, &xm * &qq) * 2u32 * Float::with_val(prec, &qq - &r);
                let t2 = Float::with_val(prec, &b - &a) * Float::with_val(prec, &r - 1u32);
                p = s.clone() * (t1 - t2);
                q = Float::with_val(prec, &qq - 1u32) * Float::with_val(prec, &r - 1u32) * Float::with_val(prec, &s - 1u32);
            }
            if p.is_sign_positive() {
                q = -q;
            } else {
                p = -p;
            }
            let lim1 = Float::with_val(prec, &xm * &q) * 3u32 - Float::with_val(prec, &tol1 * &q).abs();
            let lim2 = Float::with_val(prec, &e * &q).abs();
            let two_p = Float::with_val(prec, &p * 2u32);
            if two_p < lim1 && two_p < lim2 {
                e.assign(&d);
                d = p / q;
            } else {
                d.assign(&xm);
                e.assign(&d);
            }
        } else {
            d.assign(&xm);
            e.assign(&d);
        }
        a.assign(&b);
        fa.assign(&fb);
        if d.clone().abs() > tol1 {
            b += &d;
        } else if xm.is_sign_positive() {
            b += &tol1;
        } else {
            b -= &tol1;
        }
        fb = f(&b)?;
        iters += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Above,
    Below,
    Inside,
}

fn label(v: &Float) -> Label {
    if v.is_nan() {
        return Label::Inside;
    }
    if *v > 2 {
        Label::Above
    } else if *v < -2 {
        Label::Below
    } else {
        Label::Inside
    }
}

struct Sample {
    e: Float,
    v: Vec<Float>,
}

/// Outcome of scanning one channel.
enum Segment {
    Band { g: Option<usize>, j: Option<usize>, first_in: Option<usize>, last_in: Option<usize> },
    Unresolved { from: usize, to: usize },
}

fn scan(samples: &[Sample], ch: usize) -> Vec<Segment> {
    let labels: Vec<Label> = samples.iter().map(|s| label(&s.v[ch])).collect();
    let n = labels.len();
    let mut out = Vec::new();
    let mut prev_gap: Option<usize> = None;
    let mut i = 0;
    while i < n {
        if labels[i] != Label::Inside {
            prev_gap = Some(i);
            i += 1;
            continue;
        }
        // a run of inside samples starting at i
        let start = i;
        while i < n && labels[i] == Label::Inside {
            i += 1;
        }
        let end = i - 1;
        let next_gap = (i < n).then_some(i);
        let run = &samples[start..=end];
        let falling = run.windows(2).all(|w| w[0].v[ch] >= w[1].v[ch]);
        let rising = run.windows(2).all(|w| w[0].v[ch] <= w[1].v[ch]);
        let monotone = match (prev_gap.map(|g| labels[g]), next_gap.map(|j| labels[j])) {
            (Some(Label::Above), _) | (_, Some(Label::Below)) => falling,
            (Some(Label::Below), _) | (_, Some(Label::Above)) => rising,
            _ => falling || rising,
        };
        let ok = match (prev_gap, next_gap) {
            (Some(g), Some(j)) => labels[g] != labels[j] && monotone,
            (None, None) => monotone,
            _ => monotone,
        };
        if ok {
            out.push(Segment::Band { g: prev_gap, j: next_gap, first_in: Some(start), last_in: Some(end) });
        } else {
            out.push(Segment::Unresolved { from: prev_gap.unwrap_or(start), to: next_gap.unwrap_or(end) });
        }
    }
    // Opposite-sign gap samples with nothing in between: a band too narrow
    // to have been hit.
    let mut last: Option<usize> = None;
    for (idx, l) in labels.iter().enumerate() {
        match l {
            Label::Inside => last = None,
            _ => {
                if let Some(p) = last {
                    if labels[p] != *l {
                        out.push(Segment::Band { g: Some(p), j: Some(idx), first_in: None, last_in: None });
                    }
                }
                last = Some(idx);
            }
        }
    }
    out
}

fn chebyshev_nodes(lo: &Float, hi: &Float, n: usize) -> Vec<Float> {
    let prec = lo.prec();
    let mid = Float::with_val(prec, lo + hi) / 2u32;
    let half = Float::with_val(prec, hi - lo) / 2u32;
    let mut out = Vec::with_capacity(n + 1);
    out.push(lo.clone());
    for i in 1..n {
        let c = (std::f64::consts::PI * i as f64 / n as f64).cos();
        out.push(Float::with_val(prec, &mid - Float::with_val(prec, &half * c)));
    }
    out.push(hi.clone());
    out
}

fn midpoint(a: &Float, b: &Float) -> Float {
    let mut m = Float::with_val(a.prec(), a + b);
    m >>= 1u32;
    m
}

/// Multi-channel band search on one window.
///
/// `eval(e, out)` fills `out` with one value per channel (one trace
/// evaluation typically yields several x_{(k,p)}). Returns bands per
/// channel, sorted by position.
pub fn find_bands<F>(
    mut eval: F,
    lo: &Float,
    hi: &Float,
    terms: &[Termination],
    cfg: &SearchConfig,
    stats: &mut SearchStats,
) -> Result<Vec<Vec<FoundBand>>>
where
    F: FnMut(&Float, &mut Vec<Float>) -> Result<()>,
{
    let nch = terms.len();
    let expected: usize = terms
        .iter()
        .map(|t| match t {
            Termination::Expected(n) => *n,
            Termination::Stable => 1,
        })
        .sum();
    let n0 = cfg.min_samples.max(cfg.samples_per_band * (expected + 1));
    let mut samples: Vec<Sample> = Vec::with_capacity(2 * n0);
    for e in chebyshev_nodes(lo, hi, n0) {
        let mut v = Vec::with_capacity(nch);
        eval(&e, &mut v)?;
        stats.evaluations += 1;
        samples.push(Sample { e, v });
    }
    let mut prev_counts: Option<Vec<usize>> = None;
    let mut doublings = 0;
    loop {
        // local resolution
        let mut rounds = 0;
        let segments = loop {
            let segs: Vec<Vec<Segment>> = (0..nch).map(|ch| scan(&samples, ch)).collect();
            let mut ranges: Vec<(usize, usize)> = segs
                .iter()
                .flatten()
                .filter_map(|s| match s {
                    Segment::Unresolved { from, to } => Some((*from, *to)),
                    _ => None,
                })
                .collect();
            if ranges.is_empty() || rounds >= cfg.max_local_rounds || samples.len() >= cfg.max_samples {
                break segs;
            }
            ranges.sort_unstable();
            let mut marks = vec![false; samples.len()];
            for (a, b) in ranges {
                for m in marks.iter_mut().take(b).skip(a) {
                    *m = true;
                }
            }
            samples = refine(samples, |i| marks[i], &mut eval, stats)?;
            rounds += 1;
            stats.refinements += 1;
        };
        let counts: Vec<usize> = segments.iter().map(|s| s.iter().filter(|x| matches!(x, Segment::Band { .. })).count()).collect();
        let unresolved = segments.iter().flatten().any(|s| matches!(s, Segment::Unresolved { .. }));
        let mut done = !unresolved;
        for (ch, t) in terms.iter().enumerate() {
            match t {
                Termination::Expected(n) => done &= counts[ch] >= *n,
                Termination::Stable => done &= prev_counts.as_ref().is_some_and(|p| p[ch] == counts[ch]),
            }
        }
        if done || doublings >= cfg.max_doublings || samples.len() >= cfg.max_samples {
            return polish(&samples, &segments, lo, hi, &mut eval, cfg, stats);
        }
        prev_counts = Some(counts);
        samples = refine(samples, |_| true, &mut eval, stats)?;
        doublings += 1;
        stats.refinements += 1;
    }
}

fn refine<F>(samples: Vec<Sample>, mark: impl Fn(usize) -> bool, eval: &mut F, stats: &mut SearchStats) -> Result<Vec<Sample>>
where
    F: FnMut(&Float, &mut Vec<Float>) -> Result<()>,
{
    let n = samples.len();
    let mut out = Vec::with_capacity(2 * n);
    let mut it = samples.into_iter().enumerate().peekable();
    while let Some((i, s)) = it.next() {
        let next_e = it.peek().map(|(_, nx)| nx.e.clone());
        out.push(s);
        if let Some(ne) = next_e {
            if mark(i) {
                let m = midpoint(&out.last().unwrap().e, &ne);
                if m > out.last().unwrap().e && m < ne {
                    let mut v = Vec::new();
                    eval(&m, &mut v)?;
                    stats.evaluations += 1;
                    out.push(Sample { e: m, v });
                }
            }
        }
    }
    Ok(out)
}

fn polish<F>(
    samples: &[Sample],
    segments: &[Vec<Segment>],
    lo: &Float,
    hi: &Float,
    eval: &mut F,
    cfg: &SearchConfig,
    stats: &mut SearchStats,
) -> Result<Vec<Vec<FoundBand>>>
where
    F: FnMut(&Float, &mut Vec<Float>) -> Result<()>,
{
    let prec = lo.prec();
    let scale = Float::with_val(prec, lo.abs_ref()).max(&Float::with_val(prec, hi.abs_ref())).max(&Float::with_val(prec, 1));
    let abs_tol = scale * Float::with_val(prec, Float::i_exp(1, 2 - prec as i32));
    let mut out = Vec::with_capacity(segments.len());
    for (ch, segs) in segments.iter().enumerate() {
        let mut bands = Vec::new();
        for seg in segs {
            let Segment::Band { g, j, first_in, last_in } = seg else { continue };
            let mut clipped = false;
            let mut solve = |left: usize, right: usize, target: i32| -> Result<Float> {
                let fl = Float::with_val(prec, &samples[left].v[ch] - target);
                let fr = Float::with_val(prec, &samples[right].v[ch] - target);
                let mut buf = Vec::new();
                let (root, iters) = brent(
                    |e| {
                        buf.clear();
                        eval(e, &mut buf)?;
                        stats.evaluations += 1;
                        Ok(Float::with_val(prec, &buf[ch] - target))
                    },
                    &samples[left].e,
                    &fl,
                    &samples[right].e,
                    &fr,
                    &abs_tol,
                    cfg.brent_max_iter,
                )?;
                stats.brent_iterations += iters as u64;
                Ok(root)
            };
            // sign of x on the left gap decides which edge value comes first
            let band_lo = match g {
                Some(g) => {
                    let s = if samples[*g].v[ch] > 0 { 2 } else { -2 };
                    solve(*g, first_in.or(*j).unwrap(), s)?
                }
                None => {
                    clipped = true;
                    lo.clone()
                }
            };
            let band_hi = match j {
                Some(j) => {
                    let s = if samples[*j].v[ch] > 0 { 2 } else { -2 };
                    solve(last_in.or(*g).unwrap(), *j, s)?
                }
                None => {
                    clipped = true;
                    hi.clone()
                }
            };
            bands.push(FoundBand { lo: band_lo, hi: band_hi, clipped });
        }
        bands.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(std::cmp::Ordering::Equal));
        out.push(bands);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: f64) -> Float {
        Float::with_val(256, v)
    }

    #[test]
    fn brent_finds_sqrt2() {
        let g = |e: &Float| Ok(Float::with_val(256, e.square_ref()) - 2u32);
        let (r, it) = brent(g, &f(1.0), &f(-1.0), &f(2.0), &f(2.0), &f(1e-70), 200).unwrap();
        let err = (r - Float::with_val(256, 2).sqrt()).abs();
        assert!(err < 1e-68, "{err}");
        assert!(it < 40);
    }

    #[test]
    fn brent_handles_steep_functions() {
        // tanh-like edge of width 1e-40
        let g = |e: &Float| Ok(Float::with_val(256, e * 1e40f64).atan());
        let (r, _) = brent(g, &f(-1.0), &f(-1.5), &f(3.0), &f(1.5), &f(1e-75), 400).unwrap();
        assert!(r.abs() < 1e-70);
    }

    #[test]
    fn quadratic_bands() {
        // x = E² − 30E − 2: bands [−0.1328, 0] and [30, 30.1328]
        let mut stats = SearchStats::default();
        let bands = find_bands(
            |e, out| {
                out.push(Float::with_val(256, e.square_ref()) - Float::with_val(256, e * 30u32) - 2u32);
                Ok(())
            },
            &f(-3.0),
            &f(33.0),
            &[Termination::Expected(2)],
            &SearchConfig::default(),
            &mut stats,
        )
        .unwrap();
        let b = &bands[0];
        assert_eq!(b.len(), 2);
        let r = Float::with_val(256, 916).sqrt();
        let lo0 = (Float::with_val(256, 30 - r.clone())) / 2u32;
        assert!((b[0].lo.clone() - lo0).abs() < 1e-70);
        assert!(b[0].hi.clone().abs() < 1e-70);
        assert!((b[1].lo.clone() - 30u32).abs() < 1e-70);
        assert!(!b[0].clipped && !b[1].clipped);
        assert!(stats.evaluations > 0);
    }

    #[test]
    fn chebyshev_polynomial_bands() {
        // 2·T_n(E/2) has n bands tiling [−2, 2]; with a factor 1.5 the bands
        // separate.
        for n in [1usize, 5, 13] {
            let mut stats = SearchStats::default();
            let bands = find_bands(
                |e, out| {
                    // 3·T_n(0.75·E) by the three-term recurrence
                    let t = Float::with_val(256, e * 0.75f64);
                    let (mut a, mut b) = (f(1.0), t.clone());
                    for _ in 1..n {
                        let c = Float::with_val(256, &t * &b) * 2u32 - &a;
                        a = b;
                        b = c;
                    }
                    out.push(b * 3u32);
                    Ok(())
                },
                &f(-1.4),
                &f(1.4),
                &[Termination::Stable],
                &SearchConfig::default(),
                &mut stats,
            )
            .unwrap();
            assert_eq!(bands[0].len(), n, "n={n}");
        }
    }

    #[test]
    fn clipped_band_is_flagged() {
        let mut stats = SearchStats::default();
        let bands = find_bands(
            |e, out| {
                out.push(Float::with_val(256, e * 1u32));
                Ok(())
            },
            &f(-1.0),
            &f(5.0),
            &[Termination::Expected(1)],
            &SearchConfig::default(),
            &mut stats,
        )
        .unwrap();
        assert_eq!(bands[0].len(), 1);
        assert!(bands[0][0].clipped);
        assert_eq!(bands[0][0].lo, -1.0);
        assert!((bands[0][0].hi.clone() - 2u32).abs() < 1e-70);
    }

    #[test]
    fn window_inside_a_falling_band() {
        let mut stats = SearchStats::default();
        let bands = find_bands(
            |e, out| {
                out.push(Float::with_val(256, -e));
                Ok(())
            },
            &f(-1.0),
            &f(1.0),
            &[Termination::Expected(0)],
            &SearchConfig::default(),
            &mut stats,
        )
        .unwrap();
        assert_eq!(bands[0].len(), 1);
        assert!(bands[0][0].clipped);
        assert!(stats.evaluations < 100);
    }
}
