use crate::error::{Error, Result};
use crate::variance_model::FieldParams;
use serde::Serialize;
use std::f64::consts::LN_2;

const LN4: f64 = 2.0 * LN_2;
const LN8: f64 = 3.0 * LN_2;
/// Relative rounding allowance in the (P4) comparison; the critical case
/// attains its constant exactly.
pub const P4_REL_TOL: f64 = 1e-12;

/// Which of the two ladder recipes applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderCase {
    /// `γ < 1/d`: `ε_k = ε^{C 2^{k−p} + β}` for `k ≥ 1`.
    SubcriticalGamma,
    /// `γ = 1/d`: `ε_{k+1} = (ε_k / 4)^{exp(c 2^{k−p})}`.
    CriticalGamma,
}

impl LadderCase {
    pub fn for_params(p: &FieldParams) -> Result<Self> {
        if p.gamma_at_threshold() {
            Ok(LadderCase::CriticalGamma)
        } else if p.gamma_at_most_threshold() {
            Ok(LadderCase::SubcriticalGamma)
        } else {
            Err(Error::domain(format!("no ladder for gamma = {} > 1/d with d = {}", p.gamma(), p.d())))
        }
    }
}

/// Inputs to [`build_ladder`]. `ln_lambda` is `log log(1/ε)` so that scales
/// far below the float range stay representable.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderSpec {
    pub case: LadderCase,
    pub ln_lambda: f64,
    pub p: u32,
    pub beta: f64,
    /// `C` in the subcritical case, `c` in the critical one.
    pub constant: f64,
    /// Slack `η ∈ (0, 1 − Hβ)` bounding `c`; `None` means `(1 − Hβ)/2`.
    pub eta: Option<f64>,
}

/// `λ_k = log(1/ε_k)` for `k = 0..=p`, stored as `L_k = log λ_k` together
/// with `r_k = L_k − log λ` (so `e^{r_k} = λ_k / λ`).
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonLadder {
    pub spec: LadderSpec,
    log_lambdas: Vec<f64>,
    log_ratios: Vec<f64>,
    window_checked: bool,
}

/// Largest `p` with `2^p ≤ log log log(1/ε)`, or `None` when even `p = 1` fails.
pub fn max_window_p(ln_lambda: f64) -> Option<u32> {
    let lll = ln_lambda.ln();
    if !(lll >= 2.0) {
        return None;
    }
    Some(lll.log2().floor() as u32)
}

fn check_beta(beta: f64, p: &FieldParams) -> Result<()> {
    let upper = 1.0 / p.h();
    if !(beta > 1.0 && beta < upper) {
        return Err(Error::domain(format!("beta = {beta} must lie in (1, 1/H) = (1, {upper})")));
    }
    Ok(())
}

/// Largest admissible subcritical constant, `(1/H − β)/2` (exclusive).
pub fn case1_constant_bound(beta: f64, p: &FieldParams) -> f64 {
    (1.0 / p.h() - beta) / 2.0
}

/// Largest admissible critical constant `log((1 − η)/(Hβ))` (inclusive).
pub fn case2_constant_bound(beta: f64, eta: Option<f64>, p: &FieldParams) -> Result<f64> {
    let hb = p.h() * beta;
    let eta = eta.unwrap_or((1.0 - hb) / 2.0);
    if !(eta > 0.0 && eta < 1.0 - hb) {
        return Err(Error::domain(format!("eta = {eta} must lie in (0, 1 - H*beta) = (0, {})", 1.0 - hb)));
    }
    Ok(((1.0 - eta) / hb).ln())
}

/// Builds the ε-ladder and enforces the window `2^p ≤ log log log(1/ε)`.
pub fn build_ladder(spec: LadderSpec, params: &FieldParams) -> Result<EpsilonLadder> {
    if !spec.ln_lambda.is_finite() {
        return Err(Error::domain("log log(1/eps) must be finite"));
    }
    let lll = spec.ln_lambda.ln();
    let n = 2f64.powi(spec.p as i32);
    if !(n <= lll) {
        return Err(Error::domain(format!(
            "validity window violated: n = 2^p = {n} exceeds log log log(1/eps) = {lll}"
        )));
    }
    let mut ladder = build_ladder_unwindowed(spec, params)?;
    ladder.window_checked = true;
    Ok(ladder)
}

/// Same recursion without the window clause. Used for scales that can be
/// materialized as floats (the window forces `ε < exp(−e^{e²})`).
pub fn build_ladder_unwindowed(spec: LadderSpec, params: &FieldParams) -> Result<EpsilonLadder> {
    if spec.p == 0 || spec.p > 30 {
        return Err(Error::domain(format!("p = {} must lie in 1..=30", spec.p)));
    }
    if !(spec.ln_lambda > 0.0 && spec.ln_lambda.is_finite()) {
        return Err(Error::domain(format!("log log(1/eps) = {} must be positive (eps < 1/e)", spec.ln_lambda)));
    }
    check_beta(spec.beta, params)?;
    if LadderCase::for_params(params)? != spec.case {
        return Err(Error::domain(format!(
            "ladder case {:?} does not match gamma = {} with d = {}",
            spec.case,
            params.gamma(),
            params.d()
        )));
    }
    let p = spec.p as i32;
    let big_l = spec.ln_lambda;
    let mut ratios = Vec::with_capacity(spec.p as usize + 1);
    ratios.push(spec.beta.ln());
    match spec.case {
        LadderCase::SubcriticalGamma => {
            let bound = case1_constant_bound(spec.beta, params);
            if !(spec.constant > 0.0 && spec.constant < bound) {
                return Err(Error::domain(format!("C = {} must lie in (0, (1/H - beta)/2) = (0, {bound})", spec.constant)));
            }
            for k in 1..=p {
                ratios.push((spec.constant * 2f64.powi(k - p) + spec.beta).ln());
            }
        }
        LadderCase::CriticalGamma => {
            let bound = case2_constant_bound(spec.beta, spec.eta, params)?;
            if !(spec.constant > 0.0 && spec.constant <= bound) {
                return Err(Error::domain(format!(
                    "c = {} must lie in (0, log((1 - eta)/(H*beta))] = (0, {bound}]",
                    spec.constant
                )));
            }
            for k in 0..p {
                let r = ratios[k as usize];
                let shift = (LN4 * (-(big_l + r)).exp()).ln_1p();
                ratios.push(r + spec.constant * 2f64.powi(k - p) + shift);
            }
        }
    }
    let log_lambdas = ratios.iter().map(|r| big_l + r).collect();
    Ok(EpsilonLadder { spec, log_lambdas, log_ratios: ratios, window_checked: false })
}

impl EpsilonLadder {
    /// Arbitrary ladder from log-ratios `r_k`, bypassing the recipes. Meant
    /// for negative controls.
    pub fn from_log_ratios(spec: LadderSpec, log_ratios: Vec<f64>) -> Result<Self> {
        if log_ratios.len() != spec.p as usize + 1 {
            return Err(Error::domain(format!("need p + 1 = {} entries", spec.p + 1)));
        }
        let log_lambdas = log_ratios.iter().map(|r| spec.ln_lambda + r).collect();
        Ok(EpsilonLadder { spec, log_lambdas, log_ratios, window_checked: false })
    }

    pub fn p(&self) -> u32 {
        self.spec.p
    }
    /// `log λ_k`.
    pub fn log_lambda(&self, k: usize) -> f64 {
        self.log_lambdas[k]
    }
    /// `λ_k / λ`.
    pub fn ratio(&self, k: usize) -> f64 {
        self.log_ratios[k].exp()
    }
    pub fn log_ratio(&self, k: usize) -> f64 {
        self.log_ratios[k]
    }
    /// `λ_k` as a float (infinite once `λ_k` exceeds the float range).
    pub fn lambda(&self, k: usize) -> f64 {
        self.log_lambdas[k].exp()
    }
    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.log_lambdas.len()).map(|k| self.lambda(k)).collect()
    }
    pub fn window_checked(&self) -> bool {
        self.window_checked
    }
    /// `log(λ_{k+1} − λ_k)`.
    pub fn log_gap(&self, k: usize) -> f64 {
        let dr = self.log_ratios[k + 1] - self.log_ratios[k];
        self.log_lambdas[k] + dr.exp_m1().ln()
    }
    /// Whether every `ε_k = exp(−λ_k)` is a normal float.
    pub fn representable(&self) -> bool {
        self.lambda(self.log_lambdas.len() - 1) <= crate::variance_model::MAX_MATERIALIZED_LAMBDA
    }
    pub fn radii(&self) -> Option<Vec<f64>> {
        self.representable().then(|| self.lambdas().iter().map(|l| (-l).exp()).collect())
    }
}

/// Verdict for one of the four ladder properties. `margin` is the worst
/// case over `k`; positive means the property holds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropertyVerdict {
    pub holds: bool,
    pub margin: Option<f64>,
    pub worst_k: Option<usize>,
}

impl PropertyVerdict {
    fn vacuous() -> Self {
        PropertyVerdict { holds: true, margin: None, worst_k: None }
    }
    fn from_margins(margins: impl Iterator<Item = (usize, f64)>) -> Self {
        let mut out = Self::vacuous();
        for (k, m) in margins {
            if out.margin.is_none_or(|w| m < w || m.is_nan()) {
                out.margin = Some(m);
                out.worst_k = Some(k);
            }
        }
        out.holds = out.margin.is_none_or(|m| m >= 0.0);
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderVerdicts {
    /// `log((λ_{k+1} − λ_k)/log 8)`.
    pub p1: PropertyVerdict,
    /// `(log σ(ε_1) + p log 2 − log ε)/λ`.
    pub p2: PropertyVerdict,
    /// Same normalization for `1 ≤ k < p`.
    pub p3: PropertyVerdict,
    /// Achieved constant minus the required one.
    pub p4: PropertyVerdict,
    /// `inf_k (f(ε_{k+1}) − f(ε_k/4)) / (2^{k−p} Ψ(ε))`.
    pub p4_constant: f64,
    /// Constant the proof asks for: `c`, or `C(1 − 2^p log4/λ)(1 − γd)/(β + 2C)`.
    pub p4_required: f64,
    /// Per-`k` ratios entering `p4_constant`.
    pub p4_ratios: Vec<f64>,
}

impl LadderVerdicts {
    pub fn all_hold(&self) -> bool {
        self.p1.holds && self.p2.holds && self.p3.holds && self.p4.holds
    }
}

/// Evaluates (P1)–(P4) entirely in the log domain.
pub fn verify_p1_to_p4(ladder: &EpsilonLadder, params: &FieldParams) -> LadderVerdicts {
    let p = ladder.p() as usize;
    let big_l = ladder.spec.ln_lambda;
    let inv_lambda = (-big_l).exp();
    let h = params.h();
    let g = params.gamma();

    let p1 = PropertyVerdict::from_margins((0..p).map(|k| (k, ladder.log_gap(k) - LN8.ln())));

    // −Hλ_{k+1} + γ log λ_{k+1} − (k−p) log 2 + λ, divided by λ.
    let sigma_margin = |k: usize| {
        let m = ladder.ratio(k + 1);
        1.0 - h * m + (g * ladder.log_lambda(k + 1) - (k as f64 - p as f64) * LN_2) * inv_lambda
    };
    let p2 = PropertyVerdict::from_margins(std::iter::once((0, sigma_margin(0))));
    let p3 = PropertyVerdict::from_margins((1..p).map(|k| (k, sigma_margin(k))));

    let scale = |k: usize| 2f64.powi(k as i32 - p as i32);
    let (ratios, required): (Vec<f64>, f64) = match ladder.spec.case {
        LadderCase::CriticalGamma => {
            let ratios = (0..p)
                .map(|k| {
                    let shift = (LN4 * (-ladder.log_lambda(k)).exp()).ln_1p();
                    (ladder.log_ratio(k + 1) - ladder.log_ratio(k) - shift) / scale(k)
                })
                .collect();
            (ratios, ladder.spec.constant)
        }
        LadderCase::SubcriticalGamma => {
            let a = params.log_exponent();
            let ratios = (0..p)
                .map(|k| {
                    // y^a expm1(a (log m_{k+1} − log y)) with y = m_k + log4/λ.
                    let log_y = ladder.log_ratio(k) + (LN4 * (-ladder.log_lambda(k)).exp()).ln_1p();
                    let diff = (a * (ladder.log_ratio(k + 1) - log_y)).exp_m1();
                    (a * log_y).exp() * diff / scale(k)
                })
                .collect();
            let c = ladder.spec.constant;
            let n = 2f64.powi(p as i32);
            let required = c * (1.0 - n * LN4 * inv_lambda) * a / (ladder.spec.beta + 2.0 * c);
            (ratios, required)
        }
    };
    let achieved = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p4 = PropertyVerdict::from_margins(ratios.iter().enumerate().map(|(k, r)| (k, r - required)));
    p4.holds = p4.margin.is_none_or(|m| m >= -P4_REL_TOL * required.abs());
    LadderVerdicts { p1, p2, p3, p4, p4_constant: achieved, p4_required: required, p4_ratios: ratios }
}
