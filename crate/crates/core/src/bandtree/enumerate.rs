//! Full-line enumeration of σ_{(k,p)}, independent of the generating tree.
//!
//! σ_{(k+2,0)} is searched inside σ_{(k+1,0)} ∪ σ_{(k,0)} and σ_{(k,p+1)}
//! inside σ_{(k+1,0)} ∪ σ_{(k,p)}. A band count equal to the degree of
//! x_{(k,p)} certifies that nothing was missed, since every band carries a
//! zero of the polynomial.

use std::collections::BTreeMap;

use rug::Float;

use crate::error::{Error, Result};
use crate::schrodinger::ModelParams;
use crate::search::{find_bands, FoundBand, SearchConfig, SearchStats, Termination};
use crate::tracemap::{resolved_alignment, ExponentAlignment, TraceMap};

use super::step_coefficient;

/// Degree of x_{(k,p)} in E: p·q_k + q_{k−1} for p ≥ 0, and for p = −1 the
/// degree of x_{(k−1, s−1)} where s is the exponent of the step k−1 → k.
pub fn trace_degree(params: &ModelParams, alignment: ExponentAlignment, q: &[u128], k: usize, p: i64) -> Result<u128> {
    match p {
        p if p < -1 => Err(Error::InvalidArgument(format!("p = {p} < -1"))),
        -1 if k == 0 => Ok(1),
        -1 => {
            let s = step_coefficient(params, alignment, k - 1)?;
            trace_degree(params, alignment, q, k - 1, s as i64 - 1)
        }
        _ => {
            let qk = *q.get(k).ok_or_else(|| Error::TooLarge(format!("q_{k}")))?;
            let qk1 = if k == 0 { 0 } else { q[k - 1] };
            (p as u128).checked_mul(qk).and_then(|v| v.checked_add(qk1)).ok_or_else(|| Error::TooLarge(format!("degree of x_({k},{p})")))
        }
    }
}

pub struct Enumerator {
    params: ModelParams,
    map: TraceMap,
    alignment: ExponentAlignment,
    q: Vec<u128>,
    pub config: SearchConfig,
    cache: BTreeMap<(usize, i64), Vec<FoundBand>>,
    pub stats: SearchStats,
}

impl Enumerator {
    /// Enumerator able to reach σ_{(k,p)} for k ≤ `max_level`.
    pub fn new(params: &ModelParams, max_level: usize) -> Result<Self> {
        Self::with_alignment(params, max_level, resolved_alignment()?)
    }

    pub fn with_alignment(params: &ModelParams, max_level: usize, alignment: ExponentAlignment) -> Result<Self> {
        params.require_band_regime()?;
        let q = crate::contfrac::denominators(&params.cf, max_level + 2)?
            .iter()
            .map(|v| v.to_u128().ok_or_else(|| Error::TooLarge(format!("q = {v}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: params.clone(),
            map: TraceMap::with_alignment(params, max_level + 2, alignment)?,
            alignment,
            q,
            config: SearchConfig::default(),
            cache: BTreeMap::new(),
            stats: SearchStats::default(),
        })
    }

    pub fn q(&self, k: usize) -> Option<u128> {
        self.q.get(k).copied()
    }

    pub fn degree(&self, k: usize, p: i64) -> Result<u128> {
        trace_degree(&self.params, self.alignment, &self.q, k, p)
    }

    /// All bands of σ_{(k,p)} on the real line.
    pub fn sigma(&mut self, k: usize, p: i64) -> Result<Vec<FoundBand>> {
        if let Some(b) = self.cache.get(&(k, p)) {
            return Ok(b.clone());
        }
        let deg = self.degree(k, p)?;
        if deg == 0 {
            return Err(Error::InvalidArgument(format!("σ_({k},{p}) is the whole line")));
        }
        let prec = self.params.precision_bits;
        let lam = self.params.lambda_float();
        let bands = if p == -1 {
            // x_{(k,−1)} and x_{(k−1,s−1)} are the same polynomial
            let s = step_coefficient(&self.params, self.alignment, k - 1)?;
            self.sigma(k - 1, s as i64 - 1)?
        } else if k == 0 || (p == 0 && k <= 2) {
            let lo = if k == 0 { Float::with_val(prec, -(&lam)) - 3u32 } else { Float::with_val(prec, -3) };
            let hi = Float::with_val(prec, &lam + 3u32);
            let expected = usize::try_from(deg).map_err(|_| Error::TooLarge("degree".into()))?;
            let mut out = self.search(k, p, &[(lo, hi)], Some(expected))?;
            out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
            out
        } else {
            let windows = if p == 0 {
                let mut w = self.sigma(k - 1, 0)?;
                w.extend(self.sigma(k - 2, 0)?);
                w
            } else {
                let mut w = self.sigma(k + 1, 0)?;
                if self.degree(k, p - 1)? > 0 {
                    w.extend(self.sigma(k, p - 1)?);
                }
                w
            };
            let windows: Vec<(Float, Float)> = windows.into_iter().map(|b| (b.lo, b.hi)).collect();
            self.locate(k, p, &windows)?
        };
        if bands.len() as u128 != deg {
            return Err(Error::CountMismatch { what: format!("bands of σ_({k},{p})"), found: bands.len(), expected: deg as usize });
        }
        self.cache.insert((k, p), bands.clone());
        Ok(bands)
    }

    /// Bands of σ_{(k,p)} found inside the union of `windows`, refining until
    /// the degree is reached or the refinement budget runs out.
    ///
    /// Each connected component of the union is searched as a whole and each
    /// of its member windows on its own grid, so that narrow windows nested in
    /// wide ones are sampled at their own scale.
    pub fn locate(&mut self, k: usize, p: i64, windows: &[(Float, Float)]) -> Result<Vec<FoundBand>> {
        let deg = self.degree(k, p)?;
        let mut regions = merge_windows(windows);
        if windows.len() > 1 {
            regions.extend(widen(windows));
        }
        let saved = self.config.clone();
        let mut out = Vec::new();
        for _ in 0..8 {
            let found = self.search(k, p, &regions, None)?;
            out = dedup(found);
            if out.len() as u128 >= deg {
                break;
            }
            self.config.min_samples *= 2;
        }
        self.config = saved;
        Ok(out)
    }

    fn search(&mut self, k: usize, p: i64, windows: &[(Float, Float)], expected: Option<usize>) -> Result<Vec<FoundBand>> {
        let mut ws = self.map.workspace();
        let map = &self.map;
        let term = [Termination::Expected(expected.unwrap_or(0))];
        let mut out = Vec::new();
        for (lo, hi) in windows {
            let found = find_bands(
                |e, v| {
                    map.eval_into(e, k, &mut ws)?;
                    v.push(ws.x(p));
                    Ok(())
                },
                lo,
                hi,
                &term,
                &self.config,
                &mut self.stats,
            )?;
            out.extend(found.into_iter().flatten());
        }
        Ok(out)
    }

    /// x_{(k,p)}(E).
    pub fn eval(&self, e: &Float, k: usize, p: i64) -> Result<Float> {
        let mut ws = self.map.workspace();
        self.map.eval_into(e, k, &mut ws)?;
        Ok(ws.x(p))
    }
}

fn widen(windows: &[(Float, Float)]) -> Vec<(Float, Float)> {
    windows
        .iter()
        .map(|(lo, hi)| {
            let prec = lo.prec();
            let m = Float::with_val(prec, hi - lo) * Float::with_val(prec, Float::i_exp(1, -24));
            (Float::with_val(prec, lo - &m), Float::with_val(prec, hi + &m))
        })
        .collect()
}

/// Sorted union of intervals, each widened by 2^-24 of its width.
pub(crate) fn merge_windows(windows: &[(Float, Float)]) -> Vec<(Float, Float)> {
    let mut w = widen(windows);
    w.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(Float, Float)> = Vec::with_capacity(w.len());
    for (lo, hi) in w {
        match out.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Collapses overlapping finds of the same band, keeping an unclipped copy
/// when there is one.
fn dedup(mut found: Vec<FoundBand>) -> Vec<FoundBand> {
    found.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap().then(a.clipped.cmp(&b.clipped)));
    let mut out: Vec<FoundBand> = Vec::with_capacity(found.len());
    for b in found {
        match out.last_mut() {
            Some(last) if b.lo <= last.hi => {
                if last.clipped && !b.clipped {
                    *last = b;
                } else if last.clipped && b.clipped && b.hi > last.hi {
                    last.hi = b.hi;
                }
            }
            _ => out.push(b),
        }
    }
    out
}

/// Bands of σ_{(k,p)}. Without a window, every band on the line is found
/// and the count is checked against the degree; with a window, the search
/// runs until the count is stable.
pub fn enumerate_bands(params: &ModelParams, k: usize, p: i64, window: Option<(f64, f64)>) -> Result<Vec<FoundBand>> {
    if k == 0 && p == 0 {
        return Err(Error::InvalidArgument("σ_(0,0) is the whole line".into()));
    }
    let mut en = Enumerator::new(params, k + 2)?;
    match window {
        None => en.sigma(k, p),
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
            }
            let prec = params.precision_bits;
            let (lo, hi) = (Float::with_val(prec, lo), Float::with_val(prec, hi));
            let mut ws = en.map.workspace();
            let map = &en.map;
            let found = find_bands(
                |e, v| {
                    map.eval_into(e, k, &mut ws)?;
                    v.push(ws.x(p));
                    Ok(())
                },
                &lo,
                &hi,
                &[Termination::Stable],
                &en.config,
                &mut en.stats,
            )?;
            Ok(found.into_iter().flatten().collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contfrac::CFExpansion;

    fn params(spec: &str) -> ModelParams {
        ModelParams::new(spec.parse::<CFExpansion>().unwrap(), 30.0).unwrap()
    }

    #[test]
    fn spec_examples() {
        let p = params("1*");
        let b = enumerate_bands(&p, 1, 0, None).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].lo.to_f64() + 2.0).abs() < 1e-15 && (b[0].hi.to_f64() - 2.0).abs() < 1e-15);
        let b = enumerate_bands(&p, 0, 1, None).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].lo.to_f64() - 28.0).abs() < 1e-15 && (b[0].hi.to_f64() - 32.0).abs() < 1e-15);
        let b = enumerate_bands(&p, 1, 1, None).unwrap();
        assert_eq!(b.len(), 2);
        assert!((b[0].lo.to_f64() + 0.1328).abs() < 1e-4 && b[0].hi.to_f64().abs() < 1e-14);
        assert!((b[1].lo.to_f64() - 30.0).abs() < 1e-14 && (b[1].hi.to_f64() - 30.1328).abs() < 1e-4);
        assert!(enumerate_bands(&p, 0, 0, None).is_err());
    }

    #[test]
    fn degree_counts() {
        for spec in ["1*", "2*", "(1,2)*", "3*"] {
            let p = params(spec);
            let mut en = Enumerator::new(&p, 8).unwrap();
            for k in 1..=6 {
                assert_eq!(en.sigma(k, 0).unwrap().len() as u128, en.q(k - 1).unwrap(), "{spec} k={k}");
                for pp in 1..=2 {
                    assert_eq!(en.sigma(k, pp).unwrap().len() as u128, en.degree(k, pp).unwrap());
                }
            }
        }
    }

    #[test]
    fn windowed_search() {
        let p = params("1*");
        let b = enumerate_bands(&p, 1, 1, Some((-1.0, 1.0))).unwrap();
        assert_eq!(b.len(), 1);
        assert!(enumerate_bands(&p, 1, 1, Some((1.0, 1.0))).is_err());
    }

    #[test]
    fn merging() {
        let f = |a: f64, b: f64| (Float::with_val(128, a), Float::with_val(128, b));
        let m = merge_windows(&[f(3.0, 4.0), f(0.0, 1.0), f(0.5, 2.0)]);
        assert_eq!(m.len(), 2);
        assert!(m[0].1 > 2.0 && m[1].0 < 3.0);
    }
}
