//! Hölder exponents of the density of states: the closed-form bounds for
//! constant coefficients, the γ_k sequence and exponents measured on the
//! band tree.

use rug::Float;
use serde::Serialize;

use crate::bandtree::{build_generating_tree_with, precision_for_depth, step_coefficient, transition_matrix, BandKind, BandTree, CountMode, TreeOptions};
use crate::contfrac::{cf_statistics, denominators, CFExpansion};
use crate::error::{Error, Result};
use crate::schrodinger::ModelParams;
use crate::tracemap::resolved_alignment;

/// β = [0; b, b, b, …] = (√(b² + 4) − b)/2.
pub fn constant_beta(b: u64) -> f64 {
    let b = b as f64;
    ((b * b + 4.0).sqrt() - b) / 2.0
}

fn check_domain(b: u64, lambda: f64) -> Result<()> {
    if b == 0 {
        return Err(Error::InvalidArgument("b must be at least 1".into()));
    }
    if !(lambda > 24.0) {
        return Err(Error::Domain { lambda, requirement: "λ > 24" });
    }
    Ok(())
}

/// Exponent below which N is Hölder continuous, for β = [0; b, b, …].
pub fn gamma_lower(b: u64, lambda: f64) -> Result<f64> {
    check_domain(b, lambda)?;
    let lb = constant_beta(b).ln();
    let l5 = (lambda + 5.0).ln();
    let c = (b as f64 + 2.0).ln();
    Ok(match b {
        1 => 3.0 * lb / (-2.0 * (27.0 * (lambda + 5.0)).ln()),
        2 | 3 => lb / (-l5 - 3.0 * c),
        _ => 2.0 * lb / (-(b as f64) * l5 - 3.0 * c),
    })
}

/// Exponent above which Hölder continuity fails, for β = [0; b, b, …].
pub fn gamma_upper(b: u64, lambda: f64) -> Result<f64> {
    check_domain(b, lambda)?;
    let lb = constant_beta(b).ln();
    let l8 = (lambda - 8.0).ln();
    let (bf, l3) = (b as f64, 3f64.ln());
    Ok(match b {
        1 => 3.0 * lb / (-2.0 * l8 - 2.0 * l3),
        2 => lb / (-l8 + bf.ln() - l3),
        _ => 2.0 * lb / (-bf * l8 - bf.ln() + bf * l3),
    })
}

/// Lower bound on log(|B|/4) over 𝓖_k.
pub fn bound_l(b: u64, lambda: f64, k: u64) -> Result<f64> {
    check_domain(b, lambda)?;
    let l5 = (lambda + 5.0).ln();
    let c = (b as f64 + 2.0).ln();
    let (kf, up, down) = (k as f64, k.div_ceil(2) as f64, (k / 2) as f64);
    Ok(match b {
        1 => ((2 * k) / 3) as f64 * (-l5 - 3.0 * c),
        2 | 3 => -kf * l5 - 3.0 * kf * c,
        _ => -up * (b as f64 - 1.0) * l5 - 3.0 * down * c - down * l5,
    })
}

/// Upper bound on log(|B|/4) for the shortest band of 𝓖_k.
pub fn bound_u(b: u64, lambda: f64, k: u64) -> Result<f64> {
    check_domain(b, lambda)?;
    let l8 = (lambda - 8.0).ln();
    let (bf, l3) = (b as f64, 3f64.ln());
    let (kf, up, down) = (k as f64, k.div_ceil(2) as f64, (k / 2) as f64);
    Ok(match b {
        1 => (-2.0 * kf / 3.0) * (l8 - bf.ln() + l3),
        2 => -kf * (l8 - bf.ln() + l3),
        _ => -up * (bf - 1.0) * (l8 - l3) - down * (bf.ln() + l8 - l3),
    })
}

/// γ_k = (log C − log q_k)/log L(k+1).
pub fn gamma_k(log_c: f64, log_q: f64, log_l_next: f64) -> f64 {
    (log_c - log_q) / log_l_next
}

fn ln_integer(q: &rug::Integer) -> f64 {
    Float::with_val(64, q).ln().to_f64()
}

/// Limiting DOS mass of a band of each kind at each level:
/// lim_K #(σ_{(K+1,0)} bands inside B)/q_K, from the T matrices.
pub fn kind_masses(params: &ModelParams, depth: usize) -> Result<Vec<[f64; 3]>> {
    let alignment = resolved_alignment()?;
    let q = denominators(&params.cf, depth + 1)?;
    let mut out = Vec::with_capacity(depth + 1);
    for m in 0..=depth {
        let mut row = [0.0; 3];
        for kind in BandKind::ALL {
            row[kind.index()] = propagate_mass(params, alignment, &q, m, kind)?;
        }
        out.push(row);
    }
    Ok(out)
}

fn propagate_mass(params: &ModelParams, alignment: crate::tracemap::ExponentAlignment, q: &[rug::Integer], m: usize, kind: BandKind) -> Result<f64> {
    let mut v = [0.0f64; 3];
    v[kind.index()] = 1.0;
    let mut log_scale = 0.0;
    let mut log_q = ln_integer(&q[m]);
    // r = q_{l−1}/q_l
    let mut r = if m == 0 { 0.0 } else { Float::with_val(64, &q[m - 1]).to_f64() / Float::with_val(64, &q[m]).to_f64() };
    let estimate = |v: &[f64; 3], log_scale: f64, log_q: f64| (log_scale + (v[1] + v[2]).ln() - log_q).exp();
    let mut prev = estimate(&v, log_scale, log_q);
    for l in m..m + 400 {
        let Ok(s) = step_coefficient(params, alignment, l) else { break };
        let Some(a_next) = params.cf.coefficient(l + 1) else { break };
        let t = transition_matrix(s);
        let mut w = [0.0; 3];
        for (i, vi) in v.iter().enumerate() {
            for j in 0..3 {
                w[j] += vi * t[i][j] as f64;
            }
        }
        let sum: f64 = w.iter().sum();
        v = w.map(|x| x / sum);
        log_scale += sum.ln();
        let ratio = a_next as f64 + r;
        log_q += ratio.ln();
        r = 1.0 / ratio;
        let cur = estimate(&v, log_scale, log_q);
        if l > m + 4 && (cur - prev).abs() <= 1e-13 * cur {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

#[derive(Clone, Debug, Serialize)]
pub struct BandExponent {
    pub level: usize,
    pub index: usize,
    pub kind: BandKind,
    pub length: f64,
    pub mass: f64,
    pub exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub bands: usize,
    pub log_min_length: f64,
    pub log_max_length: f64,
    /// Extremes of e(B) over bands shorter than 1; None when there are none.
    pub min_exponent: Option<f64>,
    pub max_exponent: Option<f64>,
}

/// e(B) = log mass(B)/log|B| for every band with |B| < 1.
pub fn empirical_exponents(tree: &BandTree) -> Result<(Vec<BandExponent>, Vec<LevelSummary>)> {
    let masses = kind_masses(&tree.params, tree.depth())?;
    let mut table = Vec::new();
    let mut levels = Vec::new();
    for (k, lv) in tree.levels.iter().enumerate().skip(1) {
        let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut emin, mut emax) = (None::<f64>, None::<f64>);
        for (i, b) in lv.iter().enumerate() {
            let log_len = b.length().ln().to_f64();
            lmin = lmin.min(log_len);
            lmax = lmax.max(log_len);
            if log_len < 0.0 {
                let mass = masses[k][b.kind.index()];
                let e = mass.ln() / log_len;
                emin = Some(emin.map_or(e, |x| x.min(e)));
                emax = Some(emax.map_or(e, |x| x.max(e)));
                table.push(BandExponent { level: k, index: i, kind: b.kind, length: log_len.exp(), mass, exponent: e });
            }
        }
        levels.push(LevelSummary { level: k, bands: lv.len(), log_min_length: lmin, log_max_length: lmax, min_exponent: emin, max_exponent: emax });
    }
    Ok((table, levels))
}

/// max over levels and bands of mass(B)·q_k.
pub fn c_estimate(tree: &BandTree) -> Result<f64> {
    let masses = kind_masses(&tree.params, tree.depth())?;
    let q = denominators(&tree.params.cf, tree.depth())?;
    let mut c = 0f64;
    for (k, lv) in tree.levels.iter().enumerate().skip(1) {
        let qk = Float::with_val(64, &q[k]).to_f64();
        for kind in BandKind::ALL {
            if lv.iter().any(|b| b.kind == kind) {
                c = c.max(masses[k][kind.index()] * qk);
            }
        }
    }
    Ok(c)
}

#[derive(Clone, Debug)]
pub struct HolderOptions {
    /// Trees predicted to exceed this many bands are built with a beam.
    pub max_bands: usize,
    pub beam: usize,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self { max_bands: 400_000, beam: 16 }
    }
}

/// Number of bands a full tree would hold, from T.
pub fn predicted_tree_size(params: &ModelParams, depth: usize) -> Result<f64> {
    let alignment = resolved_alignment()?;
    let mut v = [1.0, 0.0, 1.0];
    let mut total = 2.0;
    for k in 0..depth {
        let t = transition_matrix(step_coefficient(params, alignment, k)?);
        let mut w = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                w[j] += v[i] * t[i][j] as f64;
            }
        }
        v = w;
        total += v.iter().sum::<f64>();
    }
    Ok(total)
}

/// Tree for exponent work: precision raised to resolve the deepest bands,
/// beam applied when a full tree would be too large.
pub fn holder_tree(params: &ModelParams, depth: usize, opts: &HolderOptions) -> Result<BandTree> {
    let alignment = resolved_alignment()?;
    let prec = precision_for_depth(params, alignment, depth)?;
    let p = ModelParams::with_precision(params.cf.clone(), params.lambda, prec)?;
    let beam = (predicted_tree_size(&p, depth)? > opts.max_bands as f64).then_some(opts.beam);
    build_generating_tree_with(&p, depth, &TreeOptions { beam, mode: CountMode::Predicted, alignment: Some(alignment), ..TreeOptions::default() })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub cf: String,
    pub lambda: f64,
    pub depth: usize,
    pub beam: Option<usize>,
    pub constant_b: Option<u64>,
    pub gamma_lower: Option<f64>,
    pub gamma_upper: Option<f64>,
    /// log L(k) = log 4 + bound_l(k), constant b only.
    pub l_seq: Vec<f64>,
    /// log U(k) = log 4 + bound_u(k), constant b only.
    pub u_seq: Vec<f64>,
    pub gamma_k_seq: Vec<f64>,
    /// Smallest γ_k over the upper half of the sequence.
    pub gamma_k_liminf: Option<f64>,
    pub c_est: f64,
    pub delta: Option<f64>,
    pub empirical_min: Option<f64>,
    pub empirical_max: Option<f64>,
    pub levels: Vec<LevelSummary>,
    pub bands: Vec<BandExponent>,
}

pub fn holder_report(params: &ModelParams, depth: usize) -> Result<HolderReport> {
    holder_report_with(params, depth, &HolderOptions::default())
}

pub fn holder_report_with(params: &ModelParams, depth: usize, opts: &HolderOptions) -> Result<HolderReport> {
    if depth < 1 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    params.require_theorem_regime()?;
    let tree = holder_tree(params, depth, opts)?;
    report_for_tree(&tree)
}

pub fn report_for_tree(tree: &BandTree) -> Result<HolderReport> {
    let params = &tree.params;
    let depth = tree.depth();
    let constant_b = params.cf.constant_value().filter(|_| params.lambda > 24.0);
    let (bands, levels) = empirical_exponents(tree)?;
    let c_est = c_estimate(tree)?;
    let q = denominators(&params.cf, depth + 1)?;
    let ln4 = 4f64.ln();

    let (gamma_lower_v, gamma_upper_v, l_seq, u_seq) = match constant_b {
        Some(b) => (
            Some(gamma_lower(b, params.lambda)?),
            Some(gamma_upper(b, params.lambda)?),
            (0..=depth as u64 + 1).map(|k| bound_l(b, params.lambda, k).map(|x| ln4 + x)).collect::<Result<Vec<_>>>()?,
            (0..=depth as u64 + 1).map(|k| bound_u(b, params.lambda, k).map(|x| ln4 + x)).collect::<Result<Vec<_>>>()?,
        ),
        None => (None, None, vec![], vec![]),
    };
    // log L(k+1): the closed form for constant b, the measured minimum otherwise
    let log_l = |k: usize| -> Option<f64> {
        if constant_b.is_some() {
            l_seq.get(k).copied()
        } else {
            levels.get(k.wrapping_sub(1)).map(|s| s.log_min_length)
        }
    };
    let gamma_k_seq: Vec<f64> = (1..=depth).map_while(|k| log_l(k + 1).map(|ll| gamma_k(c_est.ln(), ln_integer(&q[k]), ll))).collect();
    let half = gamma_k_seq.len() / 2;
    let gamma_k_liminf = gamma_k_seq[half..].iter().copied().reduce(f64::min);

    // δ = L(k_0) for the first k_0 after which γ_k stays above the target
    let target = gamma_lower_v.or(gamma_k_liminf.map(|g| g / 2.0));
    let delta = target.and_then(|t| {
        let k0 = (0..gamma_k_seq.len()).find(|&i| gamma_k_seq[i..].iter().all(|&g| g > t))?;
        log_l(k0 + 1).map(f64::exp)
    });

    let empirical_min = bands.iter().map(|b| b.exponent).reduce(f64::min);
    let empirical_max = bands.iter().map(|b| b.exponent).reduce(f64::max);
    Ok(HolderReport {
        cf: params.cf.to_string(),
        lambda: params.lambda,
        depth,
        beam: tree.beam,
        constant_b,
        gamma_lower: gamma_lower_v,
        gamma_upper: gamma_upper_v,
        l_seq,
        u_seq,
        gamma_k_seq,
        gamma_k_liminf,
        c_est,
        delta,
        empirical_min,
        empirical_max,
        levels,
        bands,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Geometric,
    SuperGeometric,
    Inconclusive,
}

impl Regime {
    pub fn verdict(self) -> &'static str {
        match self {
            Regime::Geometric => "geometric; Hölder",
            Regime::SuperGeometric => "super-geometric; non-Hölder",
            Regime::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyConfig {
    pub min_depth: usize,
    pub beam: usize,
    /// Constant coefficients whose fit residuals calibrate the threshold.
    pub calibration: Vec<u64>,
    pub residual_factor: f64,
    /// Lower limit on the threshold, in units of log length.
    pub residual_floor: f64,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self { min_depth: 4, beam: 8, calibration: vec![1, 2, 3], residual_factor: 3.0, residual_floor: 0.05 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DichotomyReport {
    pub cf: String,
    pub lambda: f64,
    pub depth: usize,
    /// Arithmetic mean of a_1..a_depth.
    pub mean_coefficient: f64,
    /// log m_k, m_k the shortest band of 𝓖_k, k = 1..=depth.
    pub log_min_lengths: Vec<f64>,
    pub fit_from_level: usize,
    pub fit_slope: f64,
    pub fit_residual: f64,
    pub calibration_residual: f64,
    pub threshold: f64,
    /// Median second difference of −log m_k over the fitted levels.
    pub median_second_difference: f64,
    pub gamma_k_seq: Vec<f64>,
    pub regime: Regime,
    pub verdict: String,
}

/// Least-squares line through (x, y); returns slope and RMS residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

struct Trend {
    log_m: Vec<f64>,
    from: usize,
    slope: f64,
    residual: f64,
    second: f64,
}

fn trend(tree: &BandTree) -> Trend {
    let log_m: Vec<f64> = tree.levels[1..].iter().map(|lv| lv.iter().map(|b| b.length().ln().to_f64()).fold(f64::INFINITY, f64::min)).collect();
    let depth = log_m.len();
    let from = depth / 2 + 1;
    let xs: Vec<f64> = (from..=depth).map(|k| k as f64).collect();
    let ys: Vec<f64> = log_m[from - 1..].to_vec();
    let (slope, residual) = linear_fit(&xs, &ys);
    let second = median(ys.windows(3).map(|w| -(w[2] - 2.0 * w[1] + w[0])).collect());
    Trend { log_m, from, slope, residual, second }
}

fn beam_tree(cf: &CFExpansion, lambda: f64, depth: usize, beam: usize) -> Result<BandTree> {
    let params = ModelParams::new(cf.clone(), lambda)?;
    let alignment = resolved_alignment()?;
    let prec = precision_for_depth(&params, alignment, depth)?;
    let params = ModelParams::with_precision(cf.clone(), lambda, prec)?;
    let opts = TreeOptions { beam: Some(beam), alignment: Some(alignment), ..TreeOptions::default() };
    build_generating_tree_with(&params, depth, &opts)
}

/// Geometric or faster-than-geometric decay of the shortest band length.
pub fn dichotomy_check(cf: &CFExpansion, lambda: f64, depth: usize) -> Result<DichotomyReport> {
    dichotomy_check_with(cf, lambda, depth, &DichotomyConfig::default())
}

pub fn dichotomy_check_with(cf: &CFExpansion, lambda: f64, depth: usize, cfg: &DichotomyConfig) -> Result<DichotomyReport> {
    if lambda <= 8.0 {
        return Err(Error::Domain { lambda, requirement: "λ > 8" });
    }
    let mean_coefficient = cf_statistics(cf, depth.max(1))?.1;
    if depth < cfg.min_depth {
        return Ok(DichotomyReport {
            cf: cf.to_string(),
            lambda,
            depth,
            mean_coefficient,
            log_min_lengths: vec![],
            fit_from_level: 0,
            fit_slope: f64::NAN,
            fit_residual: f64::NAN,
            calibration_residual: f64::NAN,
            threshold: f64::NAN,
            median_second_difference: f64::NAN,
            gamma_k_seq: vec![],
            regime: Regime::Inconclusive,
            verdict: format!("{}: depth {depth} is below {}", Regime::Inconclusive.verdict(), cfg.min_depth),
        });
    }
    let tree = beam_tree(cf, lambda, depth, cfg.beam)?;
    let tr = trend(&tree);
    let mut calibration_residual = 0f64;
    for &b in &cfg.calibration {
        let t = beam_tree(&CFExpansion::constant(b)?, lambda, depth, cfg.beam)?;
        calibration_residual = calibration_residual.max(trend(&t).residual);
    }
    let threshold = (cfg.residual_factor * calibration_residual).max(cfg.residual_floor);

    // γ_k with L(k+1) the measured shortest band at level k+1
    let c_est = c_estimate(&tree)?;
    let q = denominators(cf, depth)?;
    let gamma_k_seq: Vec<f64> = (1..depth).map(|k| gamma_k(c_est.ln(), ln_integer(&q[k]), tr.log_m[k])).collect();

    let regime = if tr.residual > threshold && tr.second > 0.0 {
        Regime::SuperGeometric
    } else if tr.residual <= threshold {
        Regime::Geometric
    } else {
        Regime::Inconclusive
    };
    Ok(DichotomyReport {
        cf: cf.to_string(),
        lambda,
        depth,
        mean_coefficient,
        log_min_lengths: tr.log_m,
        fit_from_level: tr.from,
        fit_slope: tr.slope,
        fit_residual: tr.residual,
        calibration_residual,
        threshold,
        median_second_difference: tr.second,
        gamma_k_seq,
        regime,
        verdict: regime.verdict().into(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryRow {
    pub lambda: f64,
    pub lower_scaled: f64,
    pub upper_scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryTable {
    pub b: u64,
    /// λ → ∞ limits of gamma_lower·log λ and gamma_upper·log λ.
    pub target_lower: f64,
    pub target_upper: f64,
    pub rows: Vec<CorollaryRow>,
}

/// gamma_lower·log λ and gamma_upper·log λ against their λ → ∞ limits.
pub fn corollary_asymptotics(b: u64, lambdas: &[f64]) -> Result<CorollaryTable> {
    let lb = constant_beta(b).ln();
    let target_lower = match b {
        1 => -1.5 * lb,
        2 | 3 => -lb,
        _ => -2.0 * lb / b as f64,
    };
    let target_upper = match b {
        1 => -1.5 * lb,
        2 => -lb,
        _ => -2.0 * lb / b as f64,
    };
    let rows = lambdas
        .iter()
        .map(|&l| Ok(CorollaryRow { lambda: l, lower_scaled: gamma_lower(b, l)? * l.ln(), upper_scaled: gamma_upper(b, l)? * l.ln() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorollaryTable { b, target_lower, target_upper, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn theorem_values() {
        assert!(close(gamma_lower(1, 30.0).unwrap(), 0.1054, 5e-5));
        assert!(close(gamma_upper(1, 30.0).unwrap(), 0.1723, 5e-5));
        assert!(gamma_lower(5, 1000.0).unwrap() < gamma_lower(5, 100.0).unwrap());
        assert!(gamma_upper(1, 1e12).unwrap() < gamma_upper(1, 1e6).unwrap());
        assert!(gamma_lower(1, 24.0).is_err());
        assert!(gamma_upper(0, 30.0).is_err());
        for b in 1..=8 {
            for l in [25.0, 30.0, 100.0, 1e4] {
                let (lo, hi) = (gamma_lower(b, l).unwrap(), gamma_upper(b, l).unwrap());
                assert!(lo > 0.0 && hi > 0.0, "b={b} λ={l}");
            }
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(bound_l(3, 30.0, 0).unwrap(), 0.0);
        assert_eq!(bound_u(3, 30.0, 0).unwrap(), 0.0);
        assert!(close(bound_l(2, 30.0, 1).unwrap(), -7.714, 5e-4));
        assert!(close(bound_l(1, 30.0, 3).unwrap(), -13.703, 1e-3));
        assert!(close(bound_u(1, 30.0, 3).unwrap(), -8.379, 5e-4));
        assert!(close(bound_u(3, 30.0, 2).unwrap(), -7.077, 2e-3));
    }

    #[test]
    fn gamma_k_edge() {
        assert_eq!(gamma_k(0.0, 0.0, -3.0), 0.0);
    }

    #[test]
    fn corollary_target() {
        let t = corollary_asymptotics(5, &[1e3, 1e6]).unwrap();
        assert!(close(t.target_lower, 0.65889, 1e-5));
        let d = |r: &CorollaryRow| (r.lower_scaled - t.target_lower).abs();
        assert!(d(&t.rows[1]) < d(&t.rows[0]));
        for r in &t.rows {
            assert!(r.upper_scaled >= r.lower_scaled);
        }
    }

    #[test]
    fn masses_sum_to_one() {
        for spec in ["1*", "2*", "(1,2)*", "k"] {
            let p = ModelParams::new(spec.parse().unwrap(), 30.0).unwrap();
            let tree = holder_tree(&p, 3, &HolderOptions { max_bands: 10_000_000, beam: 4 }).unwrap();
            let m = kind_masses(&p, 3).unwrap();
            for k in 1..=3 {
                let total: f64 = tree.levels[k].iter().map(|b| m[k][b.kind.index()]).sum();
                assert!(close(total, 1.0, 1e-9), "{spec} level {k}: {total}");
            }
        }
    }

    #[test]
    fn measured_lengths_within_closed_bounds() {
        for b in [1u64, 2, 3] {
            let p = ModelParams::new(CFExpansion::constant(b).unwrap(), 30.0).unwrap();
            let r = holder_report(&p, 6).unwrap();
            for s in &r.levels {
                let k = s.level;
                // the b = 1 floor gives L(1) = 0
                if (b, k) != (1, 1) {
                    assert!(s.log_min_length >= r.l_seq[k] - 1e-9, "b={b} k={k}");
                }
                if b > 1 {
                    assert!(s.log_min_length <= r.u_seq[k] + 1e-9, "b={b} k={k}");
                }
            }
        }
    }

    #[test]
    fn b1_closed_upper_bound_is_too_small() {
        let p = ModelParams::new(CFExpansion::fibonacci(), 30.0).unwrap();
        let r = holder_report(&p, 6).unwrap();
        assert!(r.levels[0].log_min_length < r.l_seq[1]);
        for s in &r.levels[3..] {
            assert!(s.log_min_length > r.u_seq[s.level], "k={}", s.level);
        }
    }

    #[test]
    fn fibonacci_exponents() {
        let p = ModelParams::new(CFExpansion::fibonacci(), 30.0).unwrap();
        let r = holder_report(&p, 10).unwrap();
        let mins: Vec<f64> = r.levels.iter().map(|s| s.min_exponent.unwrap()).collect();
        assert!(mins.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((r.empirical_min.unwrap() - 0.23591).abs() < 1e-4, "{:?}", r.empirical_min);
        assert!((r.c_est - 0.76393).abs() < 1e-4);
    }

    #[test]
    fn shallow_dichotomy_is_inconclusive() {
        let r = dichotomy_check(&CFExpansion::constant(2).unwrap(), 30.0, 2).unwrap();
        assert_eq!(r.regime, Regime::Inconclusive);
    }

    #[test]
    fn fit_of_a_line() {
        let (s, r) = linear_fit(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!(close(s, 2.0, 1e-12) && r < 1e-12);
    }
}
