//! Density of states from band counting and from eigenvalue counting.

use serde::Serialize;

use crate::bandtree::{BandKind, BandTree, Enumerator};
use crate::contfrac::denominators;
use crate::error::{Error, Result};
use crate::schrodinger::{eig_count_interval, ModelParams};

/// Level-k approximation: every band of σ_{(k+1,0)} carries mass 1/q_k.
#[derive(Clone, Debug, Serialize)]
pub struct DOSApprox {
    pub level: usize,
    /// The weight is 1/q.
    pub q: u64,
    /// Sorted, disjoint.
    pub bands: Vec<(f64, f64)>,
}

impl DOSApprox {
    pub fn new(level: usize, q: u64, mut bands: Vec<(f64, f64)>) -> Result<Self> {
        if bands.len() as u64 != q {
            return Err(Error::CountMismatch { what: format!("bands of σ_({},0)", level + 1), found: bands.len(), expected: q as usize });
        }
        bands.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { level, q, bands })
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.bands.len() as f64 * self.weight()
    }

    /// N_k(x); linear inside a band.
    pub fn cumulative(&self, x: f64) -> f64 {
        let below = self.bands.partition_point(|b| b.1 <= x);
        let mut n = below as f64;
        if let Some(&(lo, hi)) = self.bands.get(below) {
            if x > lo {
                n += (x - lo) / (hi - lo);
            }
        }
        n * self.weight()
    }

    /// Mass of [lo, hi].
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        self.cumulative(hi) - self.cumulative(lo)
    }

    /// (x, N_k(x)) at every band endpoint.
    pub fn step_points(&self) -> Vec<(f64, f64)> {
        let w = self.weight();
        self.bands.iter().enumerate().flat_map(|(i, &(lo, hi))| [(lo, i as f64 * w), (hi, (i + 1) as f64 * w)]).collect()
    }
}

fn q_at(params: &ModelParams, k: usize) -> Result<u64> {
    let q = denominators(&params.cf, k)?;
    q[k].to_u64().ok_or_else(|| Error::TooLarge(format!("q_{k} = {}", q[k])))
}

/// DOS from a full-line enumeration of σ_{(k+1,0)}.
pub fn dos_from_bands(params: &ModelParams, k: usize) -> Result<DOSApprox> {
    let mut en = Enumerator::new(params, k + 1)?;
    let bands = en.sigma(k + 1, 0)?;
    DOSApprox::new(k, q_at(params, k)?, bands.iter().map(|b| (b.lo.to_f64(), b.hi.to_f64())).collect())
}

/// DOS from the II and III bands of 𝓖_k, which are exactly the bands of
/// σ_{(k+1,0)}. Needs every level above k expanded.
pub fn dos_from_tree(tree: &BandTree, k: usize) -> Result<DOSApprox> {
    if k == 0 || k > tree.depth() {
        return Err(Error::InvalidArgument(format!("level {k} outside 1..={}", tree.depth())));
    }
    if !tree.levels[..k].iter().flatten().all(|b| b.expanded) {
        return Err(Error::InvalidArgument(format!("levels above {k} are not fully expanded")));
    }
    let bands = tree.levels[k].iter().filter(|b| b.kind != BandKind::I).map(|b| (b.lo.to_f64(), b.hi.to_f64())).collect();
    DOSApprox::new(k, q_at(&tree.params, k)?, bands)
}

/// #{eigenvalues of H_n in [lo, hi]} / n.
pub fn dos_direct(params: &ModelParams, n: u64, lo: f64, hi: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(eig_count_interval(params, n, lo, hi)? as f64 / n as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalComparison {
    pub lo: f64,
    pub hi: f64,
    pub band_mass: f64,
    pub direct_mass: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DosComparison {
    pub level: usize,
    pub n: u64,
    pub intervals: Vec<IntervalComparison>,
    pub max_discrepancy: f64,
}

/// Band-count DOS at level k against eigenvalue counts of H_n, n = q_{k+2}.
pub fn dos_compare(params: &ModelParams, k: usize, intervals: &[(f64, f64)]) -> Result<DosComparison> {
    let approx = dos_from_bands(params, k)?;
    compare_with(params, &approx, intervals)
}

pub fn compare_with(params: &ModelParams, approx: &DOSApprox, intervals: &[(f64, f64)]) -> Result<DosComparison> {
    compare_with_n(params, approx, intervals, q_at(params, approx.level + 2)?)
}

/// Same, with H_n of a chosen size.
pub fn compare_with_n(params: &ModelParams, approx: &DOSApprox, intervals: &[(f64, f64)], n: u64) -> Result<DosComparison> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let op = crate::schrodinger::TridiagonalOperator::new(params, n)?;
    let mut rows = Vec::with_capacity(intervals.len());
    for &(lo, hi) in intervals {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
        }
        let band_mass = approx.mass(lo, hi);
        let direct_mass = op.count_interval(lo, hi, crate::schrodinger::CountArithmetic::Auto) as f64 / n as f64;
        rows.push(IntervalComparison { lo, hi, band_mass, direct_mass, discrepancy: (band_mass - direct_mass).abs() });
    }
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    Ok(DosComparison { level: approx.level, n, intervals: rows, max_discrepancy })
}

/// Generating bands of level `level` as closed intervals.
pub fn level_intervals(tree: &BandTree, level: usize) -> Vec<(f64, f64)> {
    tree.levels[level].iter().map(|b| (b.lo.to_f64(), b.hi.to_f64())).collect()
}
