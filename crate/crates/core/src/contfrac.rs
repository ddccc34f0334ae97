//! Continued-fraction frequencies.
//!
//! A frequency β ∈ (0, 1) is described by its coefficient stream
//! β = [0; a_1, a_2, …]. Convergents follow the indexing q_{-1} = 0,
//! q_0 = 1, q_{k+1} = a_{k+1} q_k + q_{k-1}, so that q_1 = a_1 and the
//! transfer matrix over q_k sites has trace of degree q_k.

use std::fmt;
use std::str::FromStr;

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Pure rule generating a_k from k (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientRule {
    /// a_k = slope·k + offset.
    Linear { slope: u64, offset: u64 },
}

impl CoefficientRule {
    fn eval(&self, k: usize) -> u64 {
        match *self {
            CoefficientRule::Linear { slope, offset } => slope * k as u64 + offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Stream {
    Finite(Vec<u64>),
    Periodic { prefix: Vec<u64>, period: Vec<u64> },
    Rule(CoefficientRule),
}

/// A frequency given by its continued-fraction coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CFExpansion {
    stream: Stream,
}

fn check_positive(coeffs: &[u64]) -> Result<()> {
    if coeffs.iter().any(|&a| a == 0) {
        return Err(Error::InvalidCf("coefficients must be positive".into()));
    }
    Ok(())
}

impl CFExpansion {
    /// [0; b, b, b, …]
    pub fn constant(b: u64) -> Result<Self> {
        Self::periodic(vec![], vec![b])
    }

    /// Finite prefix followed by a repeating block.
    pub fn periodic(prefix: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidCf("empty period".into()));
        }
        check_positive(&prefix)?;
        check_positive(&period)?;
        Ok(Self { stream: Stream::Periodic { prefix, period } })
    }

    /// A terminating expansion; β is then rational.
    pub fn finite(coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidCf("empty expansion".into()));
        }
        check_positive(&coeffs)?;
        Ok(Self { stream: Stream::Finite(coeffs) })
    }

    pub fn rule(rule: CoefficientRule) -> Result<Self> {
        let CoefficientRule::Linear { slope, offset } = rule;
        if slope == 0 && offset == 0 {
            return Err(Error::InvalidCf("rule yields a_k = 0".into()));
        }
        Ok(Self { stream: Stream::Rule(rule) })
    }

    /// a_k = k.
    pub fn index_rule() -> Self {
        Self { stream: Stream::Rule(CoefficientRule::Linear { slope: 1, offset: 0 }) }
    }

    /// The golden-mean frequency [0; 1, 1, 1, …] = (√5 − 1)/2.
    pub fn fibonacci() -> Self {
        Self { stream: Stream::Periodic { prefix: vec![], period: vec![1] } }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.stream, Stream::Periodic { .. })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.stream, Stream::Finite(_))
    }

    pub fn period(&self) -> Option<usize> {
        match &self.stream {
            Stream::Periodic { period, .. } => Some(period.len()),
            _ => None,
        }
    }

    /// Returns `Some(b)` when every coefficient equals b.
    pub fn constant_value(&self) -> Option<u64> {
        match &self.stream {
            Stream::Periodic { prefix, period } => {
                let b = period[0];
                (period.iter().all(|&a| a == b) && prefix.iter().all(|&a| a == b)).then_some(b)
            }
            _ => None,
        }
    }

    /// a_k for k ≥ 1, `None` past the end of a finite expansion.
    pub fn coefficient(&self, k: usize) -> Option<u64> {
        assert!(k >= 1, "coefficients are indexed from 1");
        match &self.stream {
            Stream::Finite(c) => c.get(k - 1).copied(),
            Stream::Periodic { prefix, period } => Some(if k <= prefix.len() {
                prefix[k - 1]
            } else {
                period[(k - 1 - prefix.len()) % period.len()]
            }),
            Stream::Rule(rule) => Some(rule.eval(k)),
        }
    }

    /// a_1..a_K.
    pub fn prefix(&self, len: usize) -> Result<Vec<u64>> {
        (1..=len)
            .map(|k| self.coefficient(k).ok_or(Error::CfExhausted { needed: k }))
            .collect()
    }

    /// Number of available coefficients, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        match &self.stream {
            Stream::Finite(c) => Some(c.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Iterator over (p_k, q_k) for k = 1, 2, …; stops at the end of a
    /// finite expansion.
    pub fn convergent_iter(&self) -> ConvergentIter<'_> {
        ConvergentIter {
            cf: self,
            k: 0,
            p: (Integer::from(1), Integer::from(0)),
            q: (Integer::from(0), Integer::from(1)),
        }
    }
}

impl fmt::Display for CFExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        match &self.stream {
            Stream::Finite(c) => write!(f, "{}", join(c)),
            Stream::Periodic { prefix, period } => {
                if !prefix.is_empty() {
                    write!(f, "{},", join(prefix))?;
                }
                if period.len() == 1 {
                    write!(f, "{}*", period[0])
                } else {
                    write!(f, "({})*", join(period))
                }
            }
            Stream::Rule(CoefficientRule::Linear { slope: 1, offset: 0 }) => write!(f, "k"),
            Stream::Rule(CoefficientRule::Linear { slope, offset }) => write!(f, "{slope}k+{offset}"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<u64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidCf(format!("bad coefficient {t:?}")))
        })
        .collect()
}

/// Parses the CLI notation: `"3*"` is [0;3,3,…], `"1,2*"` is
/// [0;1,2,2,…], `"(1,2)*"` repeats the whole block, `"k"` is a_k = k,
/// `"2k+1"` a linear rule, and a plain list like `"2"` is finite.
impl FromStr for CFExpansion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidCf("empty specification".into()));
        }
        if s.contains('k') {
            let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            let (slope, offset) = match compact.split_once('k') {
                Some((a, b)) => {
                    let slope = if a.is_empty() { 1 } else { a.parse().map_err(|_| Error::InvalidCf(s.into()))? };
                    let offset = match b.strip_prefix('+') {
                        Some(o) => o.parse().map_err(|_| Error::InvalidCf(s.into()))?,
                        None if b.is_empty() => 0,
                        None => return Err(Error::InvalidCf(s.into())),
                    };
                    (slope, offset)
                }
                None => unreachable!(),
            };
            return Self::rule(CoefficientRule::Linear { slope, offset });
        }
        let Some(body) = s.strip_suffix('*') else {
            return Self::finite(parse_list(s)?);
        };
        let body = body.trim_end();
        if let Some(open) = body.rfind('(') {
            let inner = body[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidCf(format!("unbalanced parentheses in {s:?}")))?;
            let head = body[..open].trim_end().trim_end_matches(',');
            return Self::periodic(parse_list(head)?, parse_list(inner)?);
        }
        let mut all = parse_list(body)?;
        let last = all
            .pop()
            .ok_or_else(|| Error::InvalidCf(format!("nothing to repeat in {s:?}")))?;
        Self::periodic(all, vec![last])
    }
}

/// k-th convergent p_k/q_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub k: usize,
    pub p: Integer,
    pub q: Integer,
}

pub struct ConvergentIter<'a> {
    cf: &'a CFExpansion,
    k: usize,
    // (previous, current)
    p: (Integer, Integer),
    q: (Integer, Integer),
}

impl Iterator for ConvergentIter<'_> {
    type Item = Convergent;

    fn next(&mut self) -> Option<Convergent> {
        let a = self.cf.coefficient(self.k + 1)?;
        self.k += 1;
        let p = Integer::from(&self.p.1 * a) + &self.p.0;
        let q = Integer::from(&self.q.1 * a) + &self.q.0;
        self.p = (std::mem::replace(&mut self.p.1, p.clone()), p.clone());
        self.q = (std::mem::replace(&mut self.q.1, q.clone()), q.clone());
        Some(Convergent { k: self.k, p, q })
    }
}

/// The first `count` convergents p_1/q_1 … p_K/q_K.
pub fn convergents(cf: &CFExpansion, count: usize) -> Result<Vec<Convergent>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one convergent".into()));
    }
    let v: Vec<_> = cf.convergent_iter().take(count).collect();
    if v.len() < count {
        return Err(Error::CfExhausted { needed: v.len() + 1 });
    }
    Ok(v)
}

/// q_0, q_1, …, q_K (q_0 = 1).
pub fn denominators(cf: &CFExpansion, max_k: usize) -> Result<Vec<Integer>> {
    let mut out = vec![Integer::from(1)];
    if max_k > 0 {
        out.extend(convergents(cf, max_k)?.into_iter().map(|c| c.q));
    }
    Ok(out)
}

/// β to within 2^(2 − precision_bits).
pub fn cf_value(cf: &CFExpansion, precision_bits: u32) -> Result<Float> {
    if precision_bits < 53 {
        return Err(Error::InvalidArgument("precision below 53 bits".into()));
    }
    // |β − p_k/q_k| < 1/(q_k q_{k+1}); stop once that is below 2^-(prec+1).
    let target = Integer::from(1) << (precision_bits + 1);
    let mut prev: Option<Convergent> = None;
    for c in cf.convergent_iter() {
        if let Some(pc) = &prev {
            if Integer::from(&pc.q * &c.q) > target {
                return Ok(Float::with_val(precision_bits, Rational::from((&pc.p, &pc.q))));
            }
        }
        prev = Some(c);
    }
    // Finite expansion: the last convergent is β itself.
    let last = prev.ok_or(Error::CfExhausted { needed: 1 })?;
    Ok(Float::with_val(precision_bits, Rational::from((last.p, last.q))))
}

/// (geometric mean, arithmetic mean) of a_1..a_K: the finite-K versions of
/// M̄(β) and d̄(β).
pub fn cf_statistics(cf: &CFExpansion, count: usize) -> Result<(f64, f64)> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one coefficient".into()));
    }
    let a = cf.prefix(count)?;
    let n = count as f64;
    let log_mean = a.iter().map(|&x| (x as f64).ln()).sum::<f64>() / n;
    let mean = a.iter().map(|&x| x as f64).sum::<f64>() / n;
    Ok((log_mean.exp(), mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    fn q_list(cf: &CFExpansion, k: usize) -> Vec<u64> {
        convergents(cf, k).unwrap().iter().map(|c| c.q.to_u64().unwrap()).collect()
    }

    #[test]
    fn finite_golden_prefix() {
        let cf: CFExpansion = "1,1,1".parse().unwrap();
        let c = convergents(&cf, 3).unwrap();
        assert_eq!((c[2].p.to_u64(), c[2].q.to_u64()), (Some(2), Some(3)));
    }

    #[test]
    fn constant_three_denominators() {
        assert_eq!(q_list(&CFExpansion::constant(3).unwrap(), 3), vec![3, 10, 33]);
    }

    #[test]
    fn fibonacci_denominators() {
        assert_eq!(q_list(&CFExpansion::fibonacci(), 6), vec![1, 2, 3, 5, 8, 13]);
    }

    #[test]
    fn values() {
        let golden = cf_value(&CFExpansion::fibonacci(), 200).unwrap();
        let exact = (Float::with_val(200, 5).sqrt() - 1u32) / 2u32;
        assert!(Float::with_val(200, &golden - &exact).abs() < Float::with_val(200, Float::i_exp(1, -198)));

        let silver = cf_value(&CFExpansion::constant(2).unwrap(), 128).unwrap();
        assert!((silver.to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-15);

        let half = cf_value(&"2".parse().unwrap(), 64).unwrap();
        assert_eq!(half, 0.5);
    }

    #[test]
    fn statistics() {
        let (g, m) = cf_statistics(&CFExpansion::constant(3).unwrap(), 7).unwrap();
        assert!((g - 3.0).abs() < 1e-12 && m == 3.0);
        let (_, d) = cf_statistics(&CFExpansion::index_rule(), 4).unwrap();
        assert_eq!(d, 2.5);
        let (m, _) = cf_statistics(&"(1,2)*".parse().unwrap(), 4).unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parsing() {
        let cf: CFExpansion = "1,2*".parse().unwrap();
        assert_eq!(cf.prefix(4).unwrap(), vec![1, 2, 2, 2]);
        let cf: CFExpansion = "(1,2)*".parse().unwrap();
        assert_eq!(cf.prefix(5).unwrap(), vec![1, 2, 1, 2, 1]);
        let cf: CFExpansion = "3,(1,2)*".parse().unwrap();
        assert_eq!(cf.prefix(4).unwrap(), vec![3, 1, 2, 1]);
        let cf: CFExpansion = "k".parse().unwrap();
        assert_eq!(cf.prefix(4).unwrap(), vec![1, 2, 3, 4]);
        let cf: CFExpansion = "2k+1".parse().unwrap();
        assert_eq!(cf.prefix(3).unwrap(), vec![3, 5, 7]);
        assert_eq!("3*".parse::<CFExpansion>().unwrap().constant_value(), Some(3));
        assert!("0*".parse::<CFExpansion>().is_err());
        assert!("x".parse::<CFExpansion>().is_err());
        assert!("*".parse::<CFExpansion>().is_err());
        for s in ["3*", "1,2*", "(1,2)*", "k", "4,5"] {
            assert_eq!(s.parse::<CFExpansion>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn finite_exhaustion() {
        let cf: CFExpansion = "2,3".parse().unwrap();
        assert!(matches!(convergents(&cf, 3), Err(Error::CfExhausted { needed: 3 })));
        assert!(cf.prefix(3).is_err());
    }

    #[test]
    fn growth_bounds() {
        for b in 1..=6u64 {
            let cf = CFExpansion::constant(b).unwrap();
            for c in convergents(&cf, 40).unwrap() {
                let k = c.k as u32;
                assert!(Integer::from(b).pow(k) <= c.q && c.q <= Integer::from(b + 1).pow(k));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn reduce(a: &[u64]) -> (Integer, Integer) {
            // [0; a_1..a_K] evaluated from the tail as an exact rational.
            let mut r = Rational::from(0);
            for &x in a.iter().rev() {
                r = Rational::from(1) / (Rational::from(x) + r);
            }
            r.into_numer_denom()
        }

        proptest! {
            #[test]
            fn recursion_matches_reduced_fraction(a in proptest::collection::vec(1u64..50, 1..25)) {
                let cf = CFExpansion::finite(a.clone()).unwrap();
                let conv = convergents(&cf, a.len()).unwrap();
                for (i, c) in conv.iter().enumerate() {
                    let (p, q) = reduce(&a[..=i]);
                    prop_assert_eq!(&c.p, &p);
                    prop_assert_eq!(&c.q, &q);
                    prop_assert_eq!(Integer::from(c.p.gcd_ref(&c.q)), 1);
                }
                for w in conv.windows(2) {
                    prop_assert!(w[1].q > w[0].q);
                }
            }

            #[test]
            fn convergent_error_bound(prefix in proptest::collection::vec(1u64..9, 0..4), period in proptest::collection::vec(1u64..9, 1..4)) {
                let cf = CFExpansion::periodic(prefix, period).unwrap();
                let beta = cf_value(&cf, 512).unwrap();
                let conv = convergents(&cf, 20).unwrap();
                for w in conv.windows(2) {
                    let err = Float::with_val(512, &beta - Rational::from((&w[0].p, &w[0].q))).abs();
                    let bound = Float::with_val(512, Rational::from((1, Integer::from(&w[0].q * &w[1].q))));
                    prop_assert!(err < bound);
                }
            }
        }
    }
}
