//! The Sturmian operator (Hψ)(n) = ψ(n−1) + V(n)ψ(n) + ψ(n+1) with
//! V(n) = λ(⌊(n+1)β⌋ − ⌊nβ⌋), its Dirichlet truncations H_n, and
//! eigenvalue counting by Sturm sequences.

use rug::{Assign, Float, Integer};

use crate::contfrac::{CFExpansion, Convergent};
use crate::error::{Error, Result};

pub const DEFAULT_PRECISION: u32 = 256;

/// Frequency, coupling and working precision.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub cf: CFExpansion,
    pub lambda: f64,
    pub precision_bits: u32,
}

impl ModelParams {
    pub fn new(cf: CFExpansion, lambda: f64) -> Result<Self> {
        Self::with_precision(cf, lambda, DEFAULT_PRECISION)
    }

    pub fn with_precision(cf: CFExpansion, lambda: f64, precision_bits: u32) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain { lambda, requirement: "λ > 0" });
        }
        if !(64..=65536).contains(&precision_bits) {
            return Err(Error::InvalidArgument(format!("precision {precision_bits} bits")));
        }
        Ok(Self { cf, lambda, precision_bits })
    }

    /// Band structure of the trace polynomials needs λ > 4.
    pub fn require_band_regime(&self) -> Result<()> {
        if self.lambda > 4.0 {
            Ok(())
        } else {
            Err(Error::Domain { lambda: self.lambda, requirement: "λ > 4" })
        }
    }

    /// The Hölder estimates are stated for λ > 24.
    pub fn require_theorem_regime(&self) -> Result<()> {
        require_theorem_lambda(self.lambda)
    }

    pub fn lambda_float(&self) -> Float {
        Float::with_val(self.precision_bits, self.lambda)
    }
}

pub(crate) fn require_theorem_lambda(lambda: f64) -> Result<()> {
    if lambda > 24.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { lambda, requirement: "λ > 24" })
    }
}

/// Exact ⌊nβ⌋ from rational convergents, caching them across calls.
pub struct BeattyFloor<'a> {
    cf: &'a CFExpansion,
    conv: Vec<Convergent>,
    done: bool,
}

impl<'a> BeattyFloor<'a> {
    pub fn new(cf: &'a CFExpansion) -> Self {
        Self { cf, conv: Vec::new(), done: false }
    }

    fn ensure(&mut self, len: usize) -> bool {
        while self.conv.len() < len && !self.done {
            let next_k = self.conv.len() + 1;
            match self.cf.coefficient(next_k) {
                Some(a) => {
                    let (p1, q1, p0, q0) = match self.conv.len() {
                        0 => (Integer::from(0), Integer::from(1), Integer::from(1), Integer::from(0)),
                        1 => (self.conv[0].p.clone(), self.conv[0].q.clone(), Integer::from(0), Integer::from(1)),
                        m => (
                            self.conv[m - 1].p.clone(),
                            self.conv[m - 1].q.clone(),
                            self.conv[m - 2].p.clone(),
                            self.conv[m - 2].q.clone(),
                        ),
                    };
                    self.conv.push(Convergent { k: next_k, p: p1 * a + p0, q: q1 * a + q0 });
                }
                None => self.done = true,
            }
        }
        self.conv.len() >= len
    }

    /// ⌊nβ⌋ for n ≥ 0.
    ///
    /// With r = n·p_k mod q_k the fractional part of n·p_k/q_k is r/q_k
    /// and |nβ − n·p_k/q_k| < n/(q_k q_{k+1}); the floor is settled once
    /// that error cannot cross an integer. For r = 0 the side is fixed by
    /// the parity of k (even convergents lie below β).
    pub fn floor(&mut self, n: &Integer) -> Result<Integer> {
        if *n < 0 {
            return Err(Error::InvalidArgument("floor(nβ) needs n ≥ 0".into()));
        }
        if *n == 0 {
            return Ok(Integer::new());
        }
        let mut k = 1;
        loop {
            if !self.ensure(k + 1) {
                return Err(Error::PrecisionUnreachable { needed: k + 1 });
            }
            let c = &self.conv[k - 1];
            let q_next = &self.conv[k].q;
            let np = Integer::from(n * &c.p);
            let (quot, rem) = np.div_rem_floor(c.q.clone());
            if rem != 0 {
                let gap = Integer::from(&c.q - &rem).min(rem);
                if *n < gap * q_next {
                    return Ok(quot);
                }
            } else if *n < Integer::from(&c.q * q_next) {
                return Ok(if k % 2 == 0 { quot } else { quot - 1 });
            }
            k += 1;
        }
    }
}

/// Exact ⌊nβ⌋.
pub fn floor_n_beta(cf: &CFExpansion, n: &Integer) -> Result<Integer> {
    BeattyFloor::new(cf).floor(n)
}

/// V(n_from..=n_to); every entry is exactly 0 or λ.
pub fn potential(params: &ModelParams, n_from: u64, n_to: u64) -> Result<Vec<f64>> {
    Ok(potential_bits(&params.cf, n_from, n_to)?
        .into_iter()
        .map(|b| if b { params.lambda } else { 0.0 })
        .collect())
}

/// The 0/1 Sturmian word ⌊(n+1)β⌋ − ⌊nβ⌋ for n_from..=n_to.
pub fn potential_bits(cf: &CFExpansion, n_from: u64, n_to: u64) -> Result<Vec<bool>> {
    if n_from < 1 || n_from > n_to {
        return Err(Error::InvalidArgument(format!("site range {n_from}..={n_to}")));
    }
    let mut fl = BeattyFloor::new(cf);
    let mut prev = fl.floor(&Integer::from(n_from))?;
    let mut out = Vec::with_capacity((n_to - n_from + 1) as usize);
    for n in n_from..=n_to {
        let next = fl.floor(&Integer::from(n + 1))?;
        let diff = Integer::from(&next - &prev);
        debug_assert!(diff == 0 || diff == 1);
        out.push(diff == 1);
        prev = next;
    }
    Ok(out)
}

/// H_n: diagonal V(1..n), unit off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
}

/// Result of a Sturm count. `perturbed_x` is set when a zero pivot forced
/// the shift to move by one ulp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SturmCount {
    pub count: usize,
    pub perturbed_x: Option<f64>,
}

/// Arithmetic used for the pivot recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountArithmetic {
    /// Double precision up to n = 1000, multiprecision beyond.
    Auto,
    Double,
    Multi(u32),
}

impl TridiagonalOperator {
    pub fn new(params: &ModelParams, n: u64) -> Result<Self> {
        Ok(Self { diagonal: potential(params, 1, n)? })
    }

    pub fn from_diagonal(diagonal: Vec<f64>) -> Self {
        Self { diagonal }
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64, arith: CountArithmetic) -> SturmCount {
        match arith {
            CountArithmetic::Double => self.count_below_f64(x),
            CountArithmetic::Multi(prec) => self.count_below_mp(x, prec),
            CountArithmetic::Auto if self.len() > 1000 => self.count_below_mp(x, DEFAULT_PRECISION),
            CountArithmetic::Auto => self.count_below_f64(x),
        }
    }

    /// Eigenvalues in the closed interval [lo, hi].
    pub fn count_interval(&self, lo: f64, hi: f64, arith: CountArithmetic) -> usize {
        if lo > hi {
            return 0;
        }
        let above = self.count_below(hi.next_up(), arith).count;
        let below = self.count_below(lo, arith).count;
        above - below
    }

    fn count_below_f64(&self, x: f64) -> SturmCount {
        let mut shift = x;
        let mut perturbed = None;
        'retry: loop {
            let mut count = 0;
            let mut d = 1.0f64;
            for (i, &v) in self.diagonal.iter().enumerate() {
                d = if i == 0 { v - shift } else { (v - shift) - 1.0 / d };
                if d == 0.0 {
                    shift = shift.next_down();
                    perturbed = Some(shift);
                    continue 'retry;
                }
                if d < 0.0 {
                    count += 1;
                }
            }
            return SturmCount { count, perturbed_x: perturbed };
        }
    }

    fn count_below_mp(&self, x: f64, prec: u32) -> SturmCount {
        let mut shift = Float::with_val(prec, x);
        let mut perturbed = None;
        let mut d = Float::new(prec);
        let mut t = Float::new(prec);
        'retry: loop {
            let mut count = 0;
            for (i, &v) in self.diagonal.iter().enumerate() {
                t.assign(v);
                t -= &shift;
                if i > 0 {
                    d.recip_mut();
                    t -= &d;
                }
                std::mem::swap(&mut d, &mut t);
                if d.is_zero() {
                    shift.next_down();
                    perturbed = Some(shift.to_f64());
                    continue 'retry;
                }
                if d.is_sign_negative() {
                    count += 1;
                }
            }
            return SturmCount { count, perturbed_x: perturbed };
        }
    }
}

pub fn sturm_count_below(params: &ModelParams, n: u64, x: f64) -> Result<SturmCount> {
    Ok(TridiagonalOperator::new(params, n)?.count_below(x, CountArithmetic::Auto))
}

pub fn eig_count_interval(params: &ModelParams, n: u64, lo: f64, hi: f64) -> Result<usize> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
    }
    Ok(TridiagonalOperator::new(params, n)?.count_interval(lo, hi, CountArithmetic::Auto))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib(lambda: f64) -> ModelParams {
        ModelParams::new(CFExpansion::fibonacci(), lambda).unwrap()
    }

    /// ⌊nβ⌋ for β = (√5 − 1)/2 via exact comparison: m ≤ nβ ⇔ 2m + n ≤ n√5.
    fn golden_floor(n: u64) -> u64 {
        let mut m = 0u64;
        while {
            let lhs = 2 * (m + 1) + n;
            lhs * lhs <= 5 * n * n
        } {
            m += 1;
        }
        m
    }

    #[test]
    fn golden_floors() {
        let cf = CFExpansion::fibonacci();
        assert_eq!(floor_n_beta(&cf, &Integer::from(1)).unwrap(), 0);
        assert_eq!(floor_n_beta(&cf, &Integer::from(5)).unwrap(), 3);
        assert_eq!(floor_n_beta(&cf, &Integer::from(0)).unwrap(), 0);
        let mut fl = BeattyFloor::new(&cf);
        for n in 1..3000u64 {
            assert_eq!(fl.floor(&Integer::from(n)).unwrap(), golden_floor(n), "n = {n}");
        }
    }

    #[test]
    fn floors_against_high_precision_value() {
        for spec in ["2*", "3*", "1,2*", "(1,2)*", "k", "5*"] {
            let cf: CFExpansion = spec.parse().unwrap();
            let beta = crate::contfrac::cf_value(&cf, 400).unwrap();
            let mut fl = BeattyFloor::new(&cf);
            for n in (1..20_000u64).step_by(7) {
                let expect = Float::with_val(400, &beta * n).floor().to_integer().unwrap();
                assert_eq!(fl.floor(&Integer::from(n)).unwrap(), expect, "{spec} n={n}");
            }
        }
    }

    #[test]
    fn finite_expansion_is_unreachable() {
        let cf: CFExpansion = "2".parse().unwrap();
        assert!(matches!(floor_n_beta(&cf, &Integer::from(1)), Err(Error::PrecisionUnreachable { .. })));
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential(&fib(30.0), 1, 5).unwrap(), vec![30.0, 0.0, 30.0, 30.0, 0.0]);
        let silver = ModelParams::new(CFExpansion::constant(2).unwrap(), 30.0).unwrap();
        assert_eq!(potential(&silver, 1, 1).unwrap(), vec![0.0]);
        assert!(potential(&fib(30.0), 0, 3).is_err());
    }

    #[test]
    fn potential_prefix_consistency() {
        let p = fib(7.0);
        let long = potential(&p, 1, 500).unwrap();
        let short = potential(&p, 1, 120).unwrap();
        assert_eq!(&long[..120], &short[..]);
        assert!(long.iter().all(|&v| v == 0.0 || v == 7.0));
        let mid = potential(&p, 50, 80).unwrap();
        assert_eq!(&long[49..80], &mid[..]);
    }

    #[test]
    fn small_counts() {
        let p = fib(30.0);
        assert_eq!(sturm_count_below(&p, 1, 31.0).unwrap().count, 1);
        assert_eq!(sturm_count_below(&p, 7, -2.5).unwrap().count, 0);
        assert_eq!(sturm_count_below(&p, 2, 0.0).unwrap().count, 1);
        assert_eq!(eig_count_interval(&p, 2, 29.0, 31.0).unwrap(), 1);
        assert_eq!(eig_count_interval(&p, 2, 5.0, 5.0).unwrap(), 0);
        for n in [1, 5, 40, 1500] {
            assert_eq!(eig_count_interval(&p, n, -2.0 - 1e-9, 32.0 + 1e-9).unwrap(), n as usize);
        }
    }

    #[test]
    fn zero_pivot_is_perturbed() {
        let op = TridiagonalOperator::from_diagonal(vec![30.0, 0.0]);
        let c = op.count_below(30.0, CountArithmetic::Double);
        assert_eq!(c.perturbed_x, Some(30f64.next_down()));
        assert_eq!(c.count, 1);
        let c = op.count_below(30.0, CountArithmetic::Multi(128));
        assert!(c.perturbed_x.is_some());
        assert_eq!(c.count, 1);
    }

    #[test]
    fn closed_interval_includes_endpoint_eigenvalue() {
        let op = TridiagonalOperator::from_diagonal(vec![3.0]);
        assert_eq!(op.count_interval(3.0, 3.0, CountArithmetic::Double), 1);
        assert_eq!(op.count_interval(1.0, 3.0, CountArithmetic::Multi(128)), 1);
    }

    /// Dense symmetric eigensolver as an independent oracle.
    fn dense_eigenvalues(diag: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => diag[i],
            1 => 1.0,
            _ => 0.0,
        });
        m.symmetric_eigenvalues().iter().copied().collect()
    }

    #[test]
    fn counts_match_dense_eigenvalues() {
        for spec in ["1*", "2*", "(1,2)*"] {
            let p = ModelParams::new(spec.parse().unwrap(), 30.0).unwrap();
            for n in (1..=12u64).chain([21, 34, 55, 89]) {
                let op = TridiagonalOperator::new(&p, n).unwrap();
                let eig = dense_eigenvalues(&op.diagonal);
                assert_eq!(eig.len(), n as usize);
                for x in [-2.1, -0.5, 0.0, 0.7, 1.9, 15.0, 29.5, 30.0, 30.02, 31.2, 33.0] {
                    let expect = eig.iter().filter(|&&e| e < x - 1e-9).count();
                    let near = eig.iter().any(|&e| (e - x).abs() <= 1e-9);
                    if !near {
                        assert_eq!(op.count_below(x, CountArithmetic::Double).count, expect);
                        assert_eq!(op.count_below(x, CountArithmetic::Multi(160)).count, expect);
                    }
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn monotone_in_x(n in 1u64..300, xs in proptest::collection::vec(-3.0f64..35.0, 2..12)) {
                let op = TridiagonalOperator::new(&fib(30.0), n).unwrap();
                let mut xs = xs;
                xs.sort_by(f64::total_cmp);
                let counts: Vec<_> = xs.iter().map(|&x| op.count_below(x, CountArithmetic::Double).count).collect();
                prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(op.count_below(33.0, CountArithmetic::Double).count, n as usize);
            }
        }
    }
}
