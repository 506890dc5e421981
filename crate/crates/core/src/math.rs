//! Elementary functions shared by the rate computations: binary entropy,
//! the parameter-estimation fluctuation, error-correction leakage and the
//! conditional-entropy bound used for privacy amplification.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Absolute slack allowed on probability arguments before they are
/// treated as out of domain. Values inside the slack are clamped.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Per-basis quantum bit error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberTriple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl QberTriple {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        for (name, v) in [("e_X", x), ("e_Y", y), ("e_Z", z)] {
            if !(0.0..=0.5).contains(&v) {
                return Err(domain(format!("{name} = {v} outside [0, 1/2]")));
            }
        }
        Ok(Self { x, y, z })
    }

    /// Same error rate in every basis.
    pub fn symmetric(e: f64) -> Result<Self> {
        Self::new(e, e, e)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&p) {
        return Err(domain(format!("{what} = {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(e: f64) -> Result<f64> {
    let e = clamp_probability(e, "binary entropy argument")?;
    Ok(binary_entropy_unchecked(e))
}

#[inline]
pub(crate) fn binary_entropy_unchecked(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
}

/// Statistical fluctuation of a QBER estimated from `m` samples that holds
/// except with probability `eps_pe`:
/// `sqrt((ln(1/eps_pe) + 2 ln(m + 1)) / (8 m))`.
pub fn zeta(eps_pe: f64, m: u64) -> Result<f64> {
    if !(eps_pe > 0.0 && eps_pe < 1.0) {
        return Err(domain(format!("eps_pe = {eps_pe} outside (0, 1)")));
    }
    if m < 1 {
        return Err(domain("sample size m must be >= 1"));
    }
    let m = m as f64;
    Ok((((1.0 / eps_pe).ln() + 2.0 * m.ln_1p()) / (8.0 * m)).sqrt())
}

/// Upper confidence bound on each basis QBER: `observed + 2 zeta`, capped at 1/2.
pub fn worst_case_qber(observed: QberTriple, eps_pe: f64, m_x: u64, m_y: u64, m_z: u64) -> Result<QberTriple> {
    let bound = |e: f64, m: u64| -> Result<f64> { Ok((e + 2.0 * zeta(eps_pe, m)?).min(0.5)) };
    Ok(QberTriple { x: bound(observed.x, m_x)?, y: bound(observed.y, m_y)?, z: bound(observed.z, m_z)? })
}

/// Bits disclosed by error correction on an `n`-bit block at error rate `e`,
/// for a code working at `f_ec` times the Shannon limit.
pub fn leak_ec(n: u64, e: f64, f_ec: f64) -> Result<f64> {
    if !(f_ec >= 1.0) {
        return Err(domain(format!("f_EC = {f_ec} must be >= 1")));
    }
    if !(0.0..=0.5).contains(&e) {
        return Err(domain(format!("QBER {e} outside [0, 1/2]")));
    }
    if n == 0 || e == 0.0 {
        return Ok(0.0);
    }
    Ok(f_ec * n as f64 * binary_entropy_unchecked(e))
}

/// Asymptotic part of the conditional-entropy bound (everything except the
/// finite-size penalty):
///
/// `1 - e_Z h((1 + (e_X - e_Y)/e_Z)/2) - (1 - e_Z) h((1 - (e_X + e_Y + e_Z)/2)/(1 - e_Z))`.
///
/// The first entropy term is taken as 0 when `e_Z = 0`.
pub fn entropy_bound_asymptotic(e: QberTriple) -> Result<f64> {
    let first = if e.z > 0.0 {
        let arg = clamp_probability((1.0 + (e.x - e.y) / e.z) / 2.0, "first entropy argument")?;
        e.z * binary_entropy_unchecked(arg)
    } else {
        0.0
    };
    let second = if e.z < 1.0 {
        let arg = clamp_probability((1.0 - (e.x + e.y + e.z) / 2.0) / (1.0 - e.z), "second entropy argument")?;
        (1.0 - e.z) * binary_entropy_unchecked(arg)
    } else {
        0.0
    };
    Ok(1.0 - first - second)
}

/// Finite-size smoothing penalty for an `n`-bit block, in total bits:
/// `n * 5 sqrt(log2(2/eps_bar)/n) = 5 sqrt(n log2(2/eps_bar))`.
pub fn smoothing_penalty_bits(n: u64, eps_bar: f64) -> Result<f64> {
    if !(eps_bar > 0.0 && eps_bar < 1.0) {
        return Err(domain(format!("eps_bar = {eps_bar} outside (0, 1)")));
    }
    Ok(5.0 * (n as f64 * (2.0 / eps_bar).log2()).sqrt())
}

/// Per-bit conditional-entropy bound `S_zeta(X|E)` including the
/// finite-size term `5 sqrt(log2(2/eps_bar)/n)`. May be negative.
pub fn entropy_bound_s_zeta(e: QberTriple, n: u64, eps_bar: f64) -> Result<f64> {
    if n < 1 {
        return Err(domain("block size n must be >= 1"));
    }
    if !(eps_bar > 0.0 && eps_bar < 1.0) {
        return Err(domain(format!("eps_bar = {eps_bar} outside (0, 1)")));
    }
    let asym = entropy_bound_asymptotic(e)?;
    Ok(asym - 5.0 * ((2.0 / eps_bar).log2() / n as f64).sqrt())
}

/// Six-state one-way key yield per sifted single-photon bit at a symmetric
/// QBER `e` with Shannon-limit error correction:
/// `(1 - e)(1 - h((1 - 3e/2)/(1 - e))) - h(e)`.
pub fn six_state_yield(e: f64) -> Result<f64> {
    let e = clamp_probability(e, "QBER")?;
    if e > 0.5 {
        return Err(domain(format!("QBER {e} above 1/2")));
    }
    let s = entropy_bound_asymptotic(QberTriple { x: e, y: e, z: e })?;
    Ok(s - binary_entropy_unchecked(e))
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
