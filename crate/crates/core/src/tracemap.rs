//! Transfer matrices and the trace map.
//!
//! M_k(E) is the transfer matrix over q_k sites, with
//! M_{-1} = [[1, −λ], [0, 1]] and M_0 = [[E, −1], [1, 0]]. The trace
//! quantities x_{(k,p)} = tr M_{k−1} M_k^p are propagated from level to
//! level without ever forming matrix entries:
//!
//! * M_{k+1} = M_{k−1} M_k^{s} with s the coefficient attached to the step
//!   (see [`ExponentAlignment`]),
//! * x_{(k,p+1)} = tr M_k · x_{(k,p)} − x_{(k,p−1)} (Cayley–Hamilton).
//!
//! Off the spectrum the entries of M_k grow like exp(c·q_k) while the
//! traces that matter for band searches stay moderate, so the trace route is
//! the only one used past the small-k oracle. The Fricke invariant
//! x² + y² + z² − xyz − 4 = λ² is checked after every evaluation; a
//! residual beyond tolerance triggers re-evaluation at doubled precision.

use std::sync::OnceLock;

use rug::{Assign, Float};

use crate::contfrac::{convergents, CFExpansion};
use crate::error::{Error, Result};
use crate::schrodinger::{potential, ModelParams};

/// Precision ceiling for automatic escalation.
pub const MAX_PRECISION: u32 = 4096;

/// Largest q_k for which [`transfer_matrix`] forms the direct product.
pub const DIRECT_PRODUCT_LIMIT: u64 = 10_000;

/// Which continued-fraction coefficient is the exponent in
/// M_{k+1} = M_{k−1} M_k^{s}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ExponentAlignment {
    /// s = a_{k+1}, matching q_{k+1} = a_{k+1} q_k + q_{k−1}.
    NextCoefficient,
    /// s = a_k, the literal index of the recursion as usually printed.
    CurrentCoefficient,
}

impl ExponentAlignment {
    /// Coefficient index used on the step k → k+1.
    pub fn step_index(self, k: usize) -> usize {
        match self {
            ExponentAlignment::NextCoefficient => k + 1,
            ExponentAlignment::CurrentCoefficient => k,
        }
    }
}

/// Traces at level k: t_prev = tr M_{k−1}, t_cur = tr M_k,
/// t_mix = tr M_{k−1} M_k.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceState {
    pub k: usize,
    pub e: Float,
    pub t_prev: Float,
    pub t_cur: Float,
    pub t_mix: Float,
}

impl TraceState {
    /// Level 0: (tr M_{−1}, tr M_0, tr M_{−1}M_0) = (2, E, E − λ).
    pub fn initial(lambda: &Float, e: &Float) -> Self {
        let prec = e.prec().max(lambda.prec());
        Self {
            k: 0,
            e: e.clone(),
            t_prev: Float::with_val(prec, 2),
            t_cur: Float::with_val(prec, e),
            t_mix: Float::with_val(prec, e - lambda),
        }
    }

    pub fn prec(&self) -> u32 {
        self.t_cur.prec()
    }

    /// x_{(k,p)} for p ≥ −1.
    pub fn x(&self, p: i64) -> Float {
        assert!(p >= -1, "x_(k,p) needs p ≥ -1");
        let prec = self.prec();
        match p {
            -1 => Float::with_val(prec, &self.t_cur * &self.t_prev) - &self.t_mix,
            0 => self.t_prev.clone(),
            _ => {
                let mut lo = self.t_prev.clone();
                let mut hi = self.t_mix.clone();
                let mut tmp = Float::new(prec);
                for _ in 1..p {
                    tmp.assign(&self.t_cur * &hi);
                    tmp -= &lo;
                    std::mem::swap(&mut lo, &mut hi);
                    std::mem::swap(&mut hi, &mut tmp);
                }
                hi
            }
        }
    }
}

/// |x² + y² + z² − xyz − 4 − λ²| for the triple of `state`.
pub fn fricke_residual(lambda: &Float, state: &TraceState) -> Float {
    let mut ws = Workspace::new(state.prec());
    ws.t_prev.assign(&state.t_prev);
    ws.t_cur.assign(&state.t_cur);
    ws.t_mix.assign(&state.t_mix);
    let lambda_sq = Float::with_val(state.prec(), lambda.square_ref());
    ws.fricke(&lambda_sq);
    ws.residual.clone()
}

/// Preallocated buffers for repeated evaluations at one precision.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub t_prev: Float,
    pub t_cur: Float,
    pub t_mix: Float,
    lo: Float,
    hi: Float,
    tmp: Float,
    residual: Float,
    scale: Float,
}

impl Workspace {
    pub fn new(prec: u32) -> Self {
        let f = Float::new(prec);
        Self {
            t_prev: f.clone(),
            t_cur: f.clone(),
            t_mix: f.clone(),
            lo: f.clone(),
            hi: f.clone(),
            tmp: f.clone(),
            residual: f.clone(),
            scale: f,
        }
    }

    pub fn prec(&self) -> u32 {
        self.t_cur.prec()
    }

    /// x_{(k,−1)} = tr M_k · tr M_{k−1} − tr M_{k−1}M_k for the current level.
    pub fn x_minus_one(&self) -> Float {
        Float::with_val(self.prec(), &self.t_cur * &self.t_prev) - &self.t_mix
    }

    /// x_{(k,p)} for the current level, p ≥ −1.
    pub fn x(&self, p: i64) -> Float {
        match p {
            -1 => self.x_minus_one(),
            0 => self.t_prev.clone(),
            1 => self.t_mix.clone(),
            _ => {
                let prec = self.prec();
                let mut lo = self.t_prev.clone();
                let mut hi = self.t_mix.clone();
                let mut tmp = Float::new(prec);
                for _ in 1..p {
                    tmp.assign(&self.t_cur * &hi);
                    tmp -= &lo;
                    std::mem::swap(&mut lo, &mut hi);
                    std::mem::swap(&mut hi, &mut tmp);
                }
                hi
            }
        }
    }

    fn step(&mut self, s: u64) {
        // x_(k,0) = t_prev, x_(k,1) = t_mix; run p up to s+1.
        self.lo.assign(&self.t_prev);
        self.hi.assign(&self.t_mix);
        for _ in 1..=s {
            self.tmp.assign(&self.t_cur * &self.hi);
            self.tmp -= &self.lo;
            std::mem::swap(&mut self.lo, &mut self.hi);
            std::mem::swap(&mut self.hi, &mut self.tmp);
        }
        // lo = x_(k,s) = tr M_{k+1}, hi = x_(k,s+1) = tr M_k M_{k+1}
        std::mem::swap(&mut self.t_prev, &mut self.t_cur);
        std::mem::swap(&mut self.t_cur, &mut self.lo);
        std::mem::swap(&mut self.t_mix, &mut self.hi);
    }

    /// Fills `residual` with the absolute Fricke residual and `scale` with
    /// the magnitude it is compared against.
    fn fricke(&mut self, lambda_sq: &Float) {
        self.residual.assign(self.t_prev.square_ref());
        self.tmp.assign(self.t_cur.square_ref());
        self.residual += &self.tmp;
        self.tmp.assign(self.t_mix.square_ref());
        self.residual += &self.tmp;
        self.scale.assign(&self.residual);
        self.scale += lambda_sq;
        self.tmp.assign(&self.t_prev * &self.t_cur);
        self.tmp *= &self.t_mix;
        self.residual -= &self.tmp;
        self.tmp.abs_mut();
        self.scale += &self.tmp;
        self.residual -= 4;
        self.residual -= lambda_sq;
        self.residual.abs_mut();
    }
}

/// Trace-map evaluator for one parameter set.
#[derive(Clone, Debug)]
pub struct TraceMap {
    lambda: Float,
    lambda_sq: Float,
    prec: u32,
    coeffs: Vec<u64>,
    alignment: ExponentAlignment,
    // 2^{-prec/2}
    tolerance: Float,
}

impl TraceMap {
    /// Evaluator able to reach level `max_level`, using the empirically
    /// resolved exponent alignment.
    pub fn new(params: &ModelParams, max_level: usize) -> Result<Self> {
        Self::with_alignment(params, max_level, resolved_alignment()?)
    }

    pub fn with_alignment(params: &ModelParams, max_level: usize, alignment: ExponentAlignment) -> Result<Self> {
        Self::build(&params.cf, params.lambda, params.precision_bits, max_level, alignment)
    }

    fn build(cf: &CFExpansion, lambda: f64, prec: u32, max_level: usize, alignment: ExponentAlignment) -> Result<Self> {
        let needed = max_level + 1;
        let mut coeffs = Vec::with_capacity(needed);
        for k in 1..=needed {
            match cf.coefficient(k) {
                Some(a) => coeffs.push(a),
                None => break,
            }
        }
        let lambda_f = Float::with_val(prec, lambda);
        Ok(Self {
            lambda_sq: Float::with_val(prec, lambda_f.square_ref()),
            lambda: lambda_f,
            prec,
            coeffs,
            alignment,
            tolerance: Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32))),
        })
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn lambda(&self) -> &Float {
        &self.lambda
    }

    pub fn alignment(&self) -> ExponentAlignment {
        self.alignment
    }

    /// Exponent s on the step k → k+1.
    pub fn step_coefficient(&self, k: usize) -> Result<u64> {
        let idx = self.alignment.step_index(k);
        if idx == 0 {
            // a_0 = 0 for β ∈ (0, 1)
            return Ok(0);
        }
        self.coeffs.get(idx - 1).copied().ok_or(Error::CfExhausted { needed: idx })
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.prec)
    }

    fn run(&self, e: &Float, k: usize, ws: &mut Workspace) -> Result<()> {
        ws.t_prev.assign(2);
        ws.t_cur.assign(e);
        ws.t_mix.assign(e - &self.lambda);
        for level in 0..k {
            ws.step(self.step_coefficient(level)?);
        }
        Ok(())
    }

    fn residual_ok(&self, ws: &mut Workspace) -> bool {
        ws.fricke(&self.lambda_sq);
        if !ws.residual.is_finite() {
            return false;
        }
        ws.scale *= &self.tolerance;
        ws.residual <= ws.scale
    }

    /// Evaluates the level-k traces at `e` into `ws`, escalating precision
    /// when the Fricke residual flags drift.
    pub fn eval_into(&self, e: &Float, k: usize, ws: &mut Workspace) -> Result<()> {
        self.run(e, k, ws)?;
        if self.residual_ok(ws) {
            return Ok(());
        }
        let mut prec = self.prec;
        loop {
            let residual = ws.residual.to_f64();
            prec *= 2;
            if prec > MAX_PRECISION {
                return Err(Error::PrecisionLoss { level: k, residual, bits: prec / 2 });
            }
            let mut wider = self.clone();
            wider.prec = prec;
            wider.lambda = Float::with_val(prec, &self.lambda);
            wider.lambda_sq = Float::with_val(prec, wider.lambda.square_ref());
            wider.tolerance = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
            let mut wide = Workspace::new(prec);
            wider.run(&Float::with_val(prec, e), k, &mut wide)?;
            if wider.residual_ok(&mut wide) {
                ws.t_prev.assign(&wide.t_prev);
                ws.t_cur.assign(&wide.t_cur);
                ws.t_mix.assign(&wide.t_mix);
                return Ok(());
            }
            ws.residual.assign(&wide.residual);
        }
    }

    pub fn state_at(&self, e: &Float, k: usize) -> Result<TraceState> {
        let mut ws = self.workspace();
        let e = Float::with_val(self.prec, e);
        self.eval_into(&e, k, &mut ws)?;
        Ok(TraceState { k, e, t_prev: ws.t_prev, t_cur: ws.t_cur, t_mix: ws.t_mix })
    }

    /// One trace-map step, k → k+1.
    pub fn advance(&self, state: &TraceState) -> Result<TraceState> {
        let mut ws = Workspace::new(state.prec());
        ws.t_prev.assign(&state.t_prev);
        ws.t_cur.assign(&state.t_cur);
        ws.t_mix.assign(&state.t_mix);
        ws.step(self.step_coefficient(state.k)?);
        if !self.residual_ok(&mut ws) {
            return Err(Error::PrecisionLoss {
                level: state.k + 1,
                residual: ws.residual.to_f64(),
                bits: state.prec(),
            });
        }
        Ok(TraceState {
            k: state.k + 1,
            e: state.e.clone(),
            t_prev: ws.t_prev,
            t_cur: ws.t_cur,
            t_mix: ws.t_mix,
        })
    }

    /// x_{(k,p)}(E) for k ≥ 0, p ≥ −1. x_{(0,0)} ≡ 2 (σ_{(0,0)} = ℝ).
    pub fn trace_x(&self, e: &Float, k: usize, p: i64) -> Result<Float> {
        if p < -1 {
            return Err(Error::InvalidArgument(format!("p = {p} < -1")));
        }
        Ok(self.state_at(e, k)?.x(p))
    }

    pub fn fricke_residual(&self, state: &TraceState) -> Float {
        fricke_residual(&self.lambda, state)
    }
}

pub fn advance_state(params: &ModelParams, state: &TraceState) -> Result<TraceState> {
    TraceMap::new(params, state.k + 1)?.advance(state)
}

pub fn trace_x(params: &ModelParams, e: &Float, k: usize, p: i64) -> Result<Float> {
    TraceMap::new(params, k + 1)?.trace_x(e, k, p)
}

pub type Matrix2 = [[Float; 2]; 2];

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let prec = a[0][0].prec().max(b[0][0].prec());
    let entry = |i: usize, j: usize| Float::with_val(prec, &a[i][0] * &b[0][j]) + Float::with_val(prec, &a[i][1] * &b[1][j]);
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

pub fn mat_trace(m: &Matrix2) -> Float {
    Float::with_val(m[0][0].prec(), &m[0][0] + &m[1][1])
}

pub fn mat_det(m: &Matrix2) -> Float {
    Float::with_val(m[0][0].prec(), &m[0][0] * &m[1][1]) - Float::with_val(m[0][0].prec(), &m[0][1] * &m[1][0])
}

/// M_k(E) by direct product over q_k sites (k ≥ 1), or the fixed matrices
/// for k = −1, 0. Verification path only.
pub fn transfer_matrix(params: &ModelParams, e: &Float, k: i64) -> Result<Matrix2> {
    let prec = params.precision_bits;
    let f = |v: f64| Float::with_val(prec, v);
    match k {
        i64::MIN..=-2 => Err(Error::InvalidArgument(format!("level {k} < -1"))),
        -1 => Ok([[f(1.0), f(-params.lambda)], [f(0.0), f(1.0)]]),
        0 => Ok([[Float::with_val(prec, e), f(-1.0)], [f(1.0), f(0.0)]]),
        _ => {
            let conv = convergents(&params.cf, k as usize)?;
            let q = conv[k as usize - 1]
                .q
                .to_u64()
                .filter(|&q| q <= DIRECT_PRODUCT_LIMIT)
                .ok_or_else(|| Error::TooLarge(format!("direct product over q_{k} sites")))?;
            let v = potential(params, 1, q)?;
            let mut m = [[f(1.0), f(0.0)], [f(0.0), f(1.0)]];
            for vn in v {
                let step = [[Float::with_val(prec, e - vn), f(-1.0)], [f(1.0), f(0.0)]];
                m = mat_mul(&step, &m);
            }
            Ok(m)
        }
    }
}

/// Outcome of comparing both exponent alignments against direct products.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AlignmentProbe {
    pub cf: String,
    pub next_coefficient_matches: bool,
    pub current_coefficient_matches: bool,
}

impl AlignmentProbe {
    pub fn resolved(&self) -> Option<ExponentAlignment> {
        match (self.next_coefficient_matches, self.current_coefficient_matches) {
            (true, false) => Some(ExponentAlignment::NextCoefficient),
            (false, true) => Some(ExponentAlignment::CurrentCoefficient),
            _ => None,
        }
    }
}

/// Starting from directly computed level-1 traces, advances with each
/// alignment to level `levels` and compares tr M_k against the direct
/// product at a few energies.
pub fn probe_alignment(params: &ModelParams, levels: usize) -> Result<AlignmentProbe> {
    let prec = params.precision_bits;
    let energies = [-1.3, -0.2, 0.37, 1.9, params.lambda + 0.45];
    let mut direct = Vec::new();
    for &e in &energies {
        let ef = Float::with_val(prec, e);
        let mut traces = Vec::new();
        let mut mats = Vec::new();
        for k in 0..=levels as i64 {
            let m = transfer_matrix(params, &ef, k)?;
            traces.push(mat_trace(&m));
            mats.push(m);
        }
        let mix = mat_trace(&mat_mul(&mats[0], &mats[1]));
        direct.push((ef, traces, mix));
    }
    let check = |alignment| -> Result<bool> {
        let map = TraceMap::build(&params.cf, params.lambda, prec, levels + 1, alignment)?;
        for (ef, traces, mix) in &direct {
            let mut state = TraceState {
                k: 1,
                e: ef.clone(),
                t_prev: traces[0].clone(),
                t_cur: traces[1].clone(),
                t_mix: mix.clone(),
            };
            for k in 2..=levels {
                let mut ws = Workspace::new(prec);
                ws.t_prev.assign(&state.t_prev);
                ws.t_cur.assign(&state.t_cur);
                ws.t_mix.assign(&state.t_mix);
                ws.step(map.step_coefficient(k - 1)?);
                state = TraceState { k, e: ef.clone(), t_prev: ws.t_prev, t_cur: ws.t_cur, t_mix: ws.t_mix };
                let diff = Float::with_val(prec, &state.t_cur - &traces[k]).abs();
                let scale = Float::with_val(prec, traces[k].abs_ref()) + 1u32;
                if diff > scale * Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 2)) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    Ok(AlignmentProbe {
        cf: params.cf.to_string(),
        next_coefficient_matches: check(ExponentAlignment::NextCoefficient)?,
        current_coefficient_matches: check(ExponentAlignment::CurrentCoefficient)?,
    })
}

/// The exponent alignment established on the alternating frequency
/// [0; 1, 2, 1, 2, …], where the two candidates disagree.
pub fn resolved_alignment() -> Result<ExponentAlignment> {
    static RESOLVED: OnceLock<Option<ExponentAlignment>> = OnceLock::new();
    let r = RESOLVED.get_or_init(|| {
        let cf: CFExpansion = "(1,2)*".parse().expect("static spec");
        let params = ModelParams::with_precision(cf, 30.0, 256).expect("static params");
        probe_alignment(&params, 6).ok().and_then(|p| p.resolved())
    });
    r.ok_or_else(|| Error::Classification {
        level: 0,
        detail: "exponent alignment of the trace recursion could not be resolved".into(),
    })
}
