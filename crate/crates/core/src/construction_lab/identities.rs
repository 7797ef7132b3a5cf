use super::configuration::BranchAssignment;
use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::Serialize;

pub const MAX_IDENTITY_P: u32 = 20;

/// Exact integer facts behind the moment lower bound for `n = 2^p`.
#[derive(Debug, Clone, Serialize)]
pub struct ExactIdentities {
    pub p: u32,
    pub n: u64,
    /// `Σ_{k<p} k 2^k` by direct summation.
    pub sum_k_2k: i64,
    /// `p 2^p − 2^{p+1} + 2`.
    pub sum_closed_form: i64,
    /// Exact `log₂` of `2^{−p} ∏_{k<p} (2^{k−p})^{2^k}`, read off the bit
    /// length of the big-integer reciprocal. Equals `2 − 2^{p+1}`.
    pub log2_product: i64,
    /// `−n + Σ_{k<p}(k−p)2^k`, the middle term of the chain.
    pub log2_chain_middle: i64,
    /// `log₂ c_1^n = −3n`.
    pub log2_c1_power: i64,
    /// `log2_product ≥ log2_chain_middle ≥ log2_c1_power`.
    pub chain_holds: bool,
    /// `(2^k)!` for `k < min(p, 7)`, decimal.
    pub card_a: Vec<String>,
    /// `∏_{k<p} (2^k)!` in bits (`None` above [`MAX_FACTORIAL_P`]).
    pub factorial_product_bits: Option<u64>,
    /// `∏_{k<p}(2^k)! · (4/c_0)^n ≥ n^n` with the witness `c_0 = 1/3`.
    pub stirling_holds: Option<bool>,
    /// First `k` where the per-factor estimate `(2^k)! ≥ c_0^k 2^{k 2^k}`
    /// fails for that witness; the product form still holds.
    pub stirling_stepwise_first_failure: Option<u32>,
}

/// Witness `c_0` in `∏(2^k)! ≥ (c_0/4)^n n^n`, stored as `1/STIRLING_WITNESS_INV`.
pub const STIRLING_WITNESS_INV: u32 = 3;
/// Largest `p` for which the factorial product is expanded.
pub const MAX_FACTORIAL_P: u32 = 16;

fn factorial(m: u64) -> BigUint {
    // Balanced product tree keeps the big multiplications roughly equal in size.
    fn range_product(lo: u64, hi: u64) -> BigUint {
        if hi - lo < 16 {
            return (lo..=hi).fold(BigUint::one(), |acc, j| acc * j);
        }
        let mid = lo + (hi - lo) / 2;
        range_product(lo, mid) * range_product(mid + 1, hi)
    }
    if m < 2 {
        BigUint::one()
    } else {
        range_product(2, m)
    }
}

pub fn exact_identities(p: u32) -> Result<ExactIdentities> {
    if p == 0 || p > MAX_IDENTITY_P {
        return Err(Error::domain(format!("p = {p} must lie in 1..={MAX_IDENTITY_P}")));
    }
    let n = 1u64 << p;
    let pi = p as i64;

    let sum: BigInt = (0..p).map(|k| BigInt::from(k) << k).sum();
    let closed = BigInt::from(pi) * BigInt::from(n) - (BigInt::from(1) << (p + 1)) + 2;
    let sum_k_2k = i64::try_from(&sum).map_err(|_| Error::numerical("sum overflow"))?;
    let sum_closed_form = i64::try_from(&closed).map_err(|_| Error::numerical("sum overflow"))?;

    // Reciprocal of the product: 2^p ∏ (2^{p−k})^{2^k}.
    let mut recip = BigUint::one() << p;
    for k in 0..p {
        let factor = BigUint::one() << (p - k);
        recip *= factor.pow(1u32 << k);
    }
    if (&recip & (&recip - 1u32)) != BigUint::zero() {
        return Err(Error::numerical("product reciprocal is not a power of two"));
    }
    let log2_product = -((recip.bits() - 1) as i64);
    let log2_chain_middle = -(n as i64) + (0..pi).map(|k| (k - pi) << k).sum::<i64>();
    let log2_c1_power = -3 * n as i64;
    let chain_holds = log2_product >= log2_chain_middle && log2_chain_middle >= log2_c1_power;

    let kmax = p.min(MAX_FACTORIAL_P);
    let facts: Vec<BigUint> = (0..kmax).map(|k| factorial(1u64 << k)).collect();
    let (factorial_product_bits, stirling_holds) = if p <= MAX_FACTORIAL_P {
        let product: BigUint = facts.iter().product();
        // ∏ · (4/c_0)^n = ∏ · 3^n · 2^{2n}  versus  n^n = 2^{pn}.
        let lhs = &product * BigUint::from(STIRLING_WITNESS_INV).pow(n as u32);
        let holds = p < 2 || lhs >= BigUint::one() << (p as u64 * n - 2 * n);
        (Some(product.bits()), Some(holds))
    } else {
        (None, None)
    };
    let stirling_stepwise_first_failure = (0..kmax).find(|&k| {
        // (2^k)! · 3^k ≥ 2^{k 2^k}
        let lhs = &facts[k as usize] * BigUint::from(STIRLING_WITNESS_INV).pow(k);
        lhs < BigUint::one() << ((k as u64) << k)
    });

    Ok(ExactIdentities {
        p,
        n,
        sum_k_2k,
        sum_closed_form,
        log2_product,
        log2_chain_middle,
        log2_c1_power,
        chain_holds,
        card_a: (0..p.min(7)).map(|k| BranchAssignment::count(k).to_string()).collect(),
        factorial_product_bits,
        stirling_holds,
        stirling_stepwise_first_failure,
    })
}
