use super::identities::{exact_identities, ExactIdentities};
use super::ladder::{
    build_ladder, case1_constant_bound, case2_constant_bound, max_window_p, verify_p1_to_p4, LadderCase, LadderSpec,
    LadderVerdicts,
};
use crate::error::Result;
use crate::rng::{purpose, stream};
use crate::variance_model::{FieldParams, Hurst};
use rand::Rng;
use serde::Serialize;

/// One ladder of a sweep with its parameters and verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct LadderRecord {
    pub index: usize,
    pub n: usize,
    pub d: usize,
    pub hurst: f64,
    pub gamma: f64,
    pub spec: LadderSpec,
    /// `log λ_k`.
    pub log_lambdas: Vec<f64>,
    pub verdicts: LadderVerdicts,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionReport {
    pub seed: u64,
    pub ladders: Vec<LadderRecord>,
    pub identities: Vec<ExactIdentities>,
}

/// Range of `log log(1/ε)` covered by random sweeps.
pub const SWEEP_LN_LAMBDA: (f64, f64) = (10.0, 1700.0);

/// A random admissible ladder. Draws keep `1/H − β` and `1 − γd` away from
/// zero so that margins are not lost to cancellation.
pub fn random_ladder(seed: u64, index: usize, case: LadderCase) -> Result<(FieldParams, LadderSpec)> {
    let mut rng = stream(seed, &[purpose::LADDER_DRAW, index as u64]);
    let n = rng.random_range(1..=3usize);
    let d = rng.random_range(1..=6usize);
    let h = rng.random_range(0.2..0.8);
    let beta = 1.0 + rng.random_range(0.1..0.8) * (1.0 / h - 1.0 - 0.1);
    let gamma = match case {
        LadderCase::CriticalGamma => 1.0 / d as f64,
        LadderCase::SubcriticalGamma => (1.0 - rng.random_range(0.1..1.5)) / d as f64,
    };
    let params = FieldParams::with_defaults(n, d, Hurst::float(h)?, gamma)?;
    let ln_lambda = rng.random_range(SWEEP_LN_LAMBDA.0..=SWEEP_LN_LAMBDA.1);
    let p_max = max_window_p(ln_lambda).unwrap_or(1).min(6);
    let p = rng.random_range(1..=p_max);
    let constant = match case {
        LadderCase::SubcriticalGamma => {
            let bound = case1_constant_bound(beta, &params);
            (rng.random_range(0.1..0.95) * bound).max(0.02)
        }
        LadderCase::CriticalGamma => rng.random_range(0.05..=1.0) * case2_constant_bound(beta, None, &params)?,
    };
    Ok((params, LadderSpec { case, ln_lambda, p, beta, constant, eta: None }))
}

/// `count` random ladders alternating between the two cases, plus the
/// exact identities for `p = 1..=identity_p`.
pub fn construction_sweep(seed: u64, count: usize, identity_p: u32) -> Result<ConstructionReport> {
    let mut ladders = Vec::with_capacity(count);
    for index in 0..count {
        let case = if index % 2 == 0 { LadderCase::SubcriticalGamma } else { LadderCase::CriticalGamma };
        let (params, spec) = random_ladder(seed, index, case)?;
        let ladder = build_ladder(spec, &params)?;
        let verdicts = verify_p1_to_p4(&ladder, &params);
        ladders.push(LadderRecord {
            index,
            n: params.n(),
            d: params.d(),
            hurst: params.h(),
            gamma: params.gamma(),
            spec,
            log_lambdas: (0..=spec.p as usize).map(|k| ladder.log_lambda(k)).collect(),
            verdicts,
        });
    }
    let identities = (1..=identity_p).map(exact_identities).collect::<Result<_>>()?;
    Ok(ConstructionReport { seed, ladders, identities })
}
