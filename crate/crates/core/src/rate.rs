//! Finite-key length, asymptotic rate and the six-state QBER threshold.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::math::{
    entropy_bound_asymptotic, leak_ec, six_state_yield, smoothing_penalty_bits, worst_case_qber, QberTriple,
};
use crate::optimize::{optimize_asymptotic, optimize_key_length, Optimum, SearchSpace};
use crate::spdc::{source_stats, SetupParams, SourceStats};

pub const DEFAULT_EPS_TOTAL: f64 = 1e-9;
pub const DEFAULT_EPS_EC: f64 = 1e-10;
pub const DEFAULT_F_EC: f64 = 1.2;

/// Failure probabilities of the sub-protocols and the overall security parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    pub eps_total: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    pub eps_pe: f64,
    /// Smoothing parameter.
    pub eps_bar: f64,
}

impl SecurityBudget {
    pub fn new(eps_total: f64, eps_ec: f64, eps_pa: f64, eps_pe: f64, eps_bar: f64) -> Result<Self> {
        let b = Self { eps_total, eps_ec, eps_pa, eps_pe, eps_bar };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps", self.eps_total),
            ("eps_EC", self.eps_ec),
            ("eps_PA", self.eps_pa),
            ("eps_PE", self.eps_pe),
            ("eps_bar", self.eps_bar),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Budget(format!("{name} = {v} outside (0, 1)")));
            }
        }
        let used = self.eps_bar + self.eps_ec + self.eps_pa + self.eps_pe;
        if used > self.eps_total {
            return Err(Error::Budget(format!(
                "eps_bar + eps_EC + eps_PA + eps_PE = {used:e} exceeds eps = {:e}",
                self.eps_total
            )));
        }
        Ok(())
    }
}

/// Basis-choice probabilities; X and Y share `p_x`, Z takes the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftingProbabilities {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl SiftingProbabilities {
    pub fn new(p_x: f64) -> Result<Self> {
        if !(p_x > 0.0 && p_x <= 1.0 / 3.0) {
            return Err(domain(format!("p_X = {p_x} outside (0, 1/3]")));
        }
        let s = Self { p_x, p_y: p_x, p_z: 1.0 - 2.0 * p_x };
        if !(s.key_fraction() > 0.0) {
            return Err(domain(format!("p_Z^2 - p_X^2 must be > 0 (p_X = {p_x})")));
        }
        Ok(s)
    }

    /// Equal probability for all three bases.
    pub fn balanced() -> Self {
        Self { p_x: 1.0 / 3.0, p_y: 1.0 / 3.0, p_z: 1.0 / 3.0 }
    }

    /// Fraction of pulse-sifted events that end up in the key block.
    pub fn key_fraction(&self) -> f64 {
        self.p_z * self.p_z - self.p_x * self.p_x
    }

    /// Fraction of pulse-sifted events sampled for parameter estimation, per basis.
    pub fn pe_fraction(&self) -> f64 {
        self.p_x * self.p_x
    }
}

/// Bit accounting through the sifting steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolCounts {
    pub n_source: u64,
    /// Events surviving pulse sifting.
    pub n_sifted: u64,
    /// Bits entering error correction and privacy amplification.
    pub n_key: u64,
    /// Parameter-estimation sample size per basis (X, Y, Z).
    pub m_pe: [u64; 3],
}

impl ProtocolCounts {
    /// Expected counts, floored: `N p11`, `N p11 (p_Z^2 - p_X^2)`, `N p11 p_X^2`.
    pub fn expected(n_source: u64, p11: f64, sifting: &SiftingProbabilities) -> Self {
        let sifted = n_source as f64 * p11;
        let m = (sifted * sifting.pe_fraction()).floor() as u64;
        Self {
            n_source,
            n_sifted: sifted.floor() as u64,
            n_key: (sifted * sifting.key_fraction()).floor() as u64,
            m_pe: [m, m, m],
        }
    }
}

/// How the three per-basis estimates share `eps_PE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PeSharing {
    /// `zeta(eps_PE, m_i)` in every basis, `eps_PE` counted once in the budget.
    #[default]
    PerBasis,
    /// `zeta(eps_PE / 3, m_i)`, so the union bound over three bases stays within `eps_PE`.
    Strict,
}

/// Which Z-basis QBER the error-correction leakage is charged at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LeakQber {
    #[default]
    Observed,
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub pe_sharing: PeSharing,
    pub leak_qber: LeakQber,
}

/// Fixed protocol inputs that are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyConfig {
    pub eps_total: f64,
    pub eps_ec: f64,
    pub f_ec: f64,
    pub options: EvalOptions,
}

impl Default for KeyConfig {
    fn default() -> Self {
        Self {
            eps_total: DEFAULT_EPS_TOTAL,
            eps_ec: DEFAULT_EPS_EC,
            f_ec: DEFAULT_F_EC,
            options: EvalOptions::default(),
        }
    }
}

impl KeyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_total > 0.0 && self.eps_total < 1.0) {
            return Err(Error::Budget(format!("eps = {} outside (0, 1)", self.eps_total)));
        }
        if !(self.eps_ec > 0.0 && self.eps_ec < self.eps_total) {
            return Err(Error::Budget(format!(
                "eps_EC = {:e} must lie in (0, eps = {:e})",
                self.eps_ec, self.eps_total
            )));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(domain(format!("f_EC = {} must be >= 1", self.f_ec)));
        }
        Ok(())
    }
}

/// The free parameters of the finite-key bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub lambda: f64,
    pub p_x: f64,
    pub eps_bar: f64,
    pub eps_pe: f64,
    pub eps_pa: f64,
}

/// The terms of the key-length bracket, in bits. `bracket()` subtracts
/// them in a fixed order so the total can be reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// `n (1 - e_Z h(..) - (1 - e_Z) h(..))` at the worst-case QBERs.
    pub entropy_bits: f64,
    /// `5 sqrt(n log2(2/eps_bar))`.
    pub smoothing_penalty_bits: f64,
    pub leak_ec_bits: f64,
    /// `2 log2(1/eps_PA)`.
    pub pa_cost_bits: f64,
    /// `log2(2/eps_EC)`.
    pub ec_verification_bits: f64,
}

impl Breakdown {
    pub fn bracket(&self) -> f64 {
        self.entropy_bits
            - self.smoothing_penalty_bits
            - self.leak_ec_bits
            - self.pa_cost_bits
            - self.ec_verification_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// `max(0, bracket)`.
    pub key_length_bits: f64,
    /// Unclamped bracket; negative when no key can be extracted.
    pub bracket_bits: f64,
    /// Key bits per emitted pulse.
    pub rate: f64,
    pub feasible: bool,
    pub breakdown: Breakdown,
    pub params: OperatingPoint,
    pub counts: ProtocolCounts,
    pub p11: f64,
    pub observed_qber: QberTriple,
    pub worst_case_qber: QberTriple,
}

/// Evaluates the key-length bracket for given counts and observed QBERs.
pub(crate) fn evaluate_bound(
    counts: ProtocolCounts,
    observed: QberTriple,
    p11: f64,
    params: OperatingPoint,
    budget: &SecurityBudget,
    f_ec: f64,
    options: EvalOptions,
) -> Result<RateResult> {
    budget.validate()?;
    if let Some(i) = counts.m_pe.iter().position(|&m| m == 0) {
        return Err(Error::PeSampleEmpty(format!("basis {} has m = 0", ["X", "Y", "Z"][i])));
    }
    let eps_pe = match options.pe_sharing {
        PeSharing::PerBasis => budget.eps_pe,
        PeSharing::Strict => budget.eps_pe / 3.0,
    };
    let [m_x, m_y, m_z] = counts.m_pe;
    let worst = worst_case_qber(observed, eps_pe, m_x, m_y, m_z)?;
    let n = counts.n_key;
    let leak_e = match options.leak_qber {
        LeakQber::Observed => observed.z,
        LeakQber::WorstCase => worst.z,
    };
    let breakdown = Breakdown {
        entropy_bits: n as f64 * entropy_bound_asymptotic(worst)?,
        smoothing_penalty_bits: smoothing_penalty_bits(n, budget.eps_bar)?,
        leak_ec_bits: leak_ec(n, leak_e, f_ec)?,
        pa_cost_bits: 2.0 * (1.0 / budget.eps_pa).log2(),
        ec_verification_bits: (2.0 / budget.eps_ec).log2(),
    };
    let bracket = breakdown.bracket();
    let key = bracket.max(0.0);
    Ok(RateResult {
        key_length_bits: key,
        bracket_bits: bracket,
        rate: if counts.n_source > 0 { key / counts.n_source as f64 } else { 0.0 },
        feasible: bracket > 0.0,
        breakdown,
        params,
        counts,
        p11,
        observed_qber: observed,
        worst_case_qber: worst,
    })
}

/// Key length from precomputed source statistics; `stats` must belong to
/// `lambda` (the optimizer caches them per lambda).
#[allow(clippy::too_many_arguments)]
pub(crate) fn key_length_from_stats(
    stats: &SourceStats,
    lambda: f64,
    sifting: &SiftingProbabilities,
    budget: &SecurityBudget,
    n_source: u64,
    f_ec: f64,
    options: EvalOptions,
) -> Result<RateResult> {
    let counts = ProtocolCounts::expected(n_source, stats.p11, sifting);
    let observed = QberTriple::symmetric(stats.e_pdc)?;
    let params = OperatingPoint {
        lambda,
        p_x: sifting.p_x,
        eps_bar: budget.eps_bar,
        eps_pe: budget.eps_pe,
        eps_pa: budget.eps_pa,
    };
    evaluate_bound(counts, observed, stats.p11, params, budget, f_ec, options)
}

/// Secure key length at fixed parameters using expected counts.
pub fn key_length(
    setup: &SetupParams,
    sifting: &SiftingProbabilities,
    budget: &SecurityBudget,
    n_source: u64,
    f_ec: f64,
) -> Result<RateResult> {
    key_length_with(setup, sifting, budget, n_source, f_ec, EvalOptions::default())
}

pub fn key_length_with(
    setup: &SetupParams,
    sifting: &SiftingProbabilities,
    budget: &SecurityBudget,
    n_source: u64,
    f_ec: f64,
    options: EvalOptions,
) -> Result<RateResult> {
    budget.validate()?;
    if n_source < 1 {
        return Err(domain("N_source must be >= 1"));
    }
    let stats = source_stats(setup)?;
    key_length_from_stats(&stats, setup.lambda, sifting, budget, n_source, f_ec, options)
}

/// Asymptotic key bits per pulse at the setup's lambda:
/// `p11 max(0, (1-e)(1-h((1-3e/2)/(1-e))) - h(e))`, `e = e_PDC`.
pub fn asymptotic_rate(setup: &SetupParams) -> Result<f64> {
    let stats = source_stats(setup)?;
    Ok(asymptotic_rate_from_stats(&stats))
}

pub(crate) fn asymptotic_rate_from_stats(stats: &SourceStats) -> f64 {
    // e_pdc is always in [0, 1/2], where the yield is defined
    let y = six_state_yield(stats.e_pdc).unwrap_or(-1.0);
    stats.p11 * y.max(0.0)
}

/// Largest QBER at which the six-state protocol still yields key, i.e. the
/// root of the asymptotic yield on (0, 1/2). Bisection to full precision.
pub fn qber_threshold() -> f64 {
    static THRESHOLD: OnceLock<f64> = OnceLock::new();
    *THRESHOLD.get_or_init(|| {
        let f = |e: f64| six_state_yield(e).expect("e in [0, 1/2]");
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPulses {
    pub n_source: u64,
    /// The optimized key at `n_source`.
    pub optimum: Optimum,
    pub probes: usize,
}

/// Largest pulse count probed before giving up.
pub const MAX_PULSES: u64 = 1 << 60;

/// Smallest number of emitted pulses for which the optimized key length
/// reaches `target_bits`. Exponential bracketing, then bisection.
pub fn min_pulses_for_key(
    setup: &SetupParams,
    config: &KeyConfig,
    target_bits: f64,
    space: &SearchSpace,
) -> Result<MinPulses> {
    config.validate()?;
    let asym = optimize_asymptotic(setup, space.lambda_range)?;
    if !(asym.rate > 0.0) {
        return Err(Error::Infeasible("asymptotic rate is zero for every lambda".into()));
    }

    let mut probes = 0usize;
    let mut probe = |n: u64| -> Result<(bool, Optimum)> {
        probes += 1;
        let opt = optimize_key_length(setup, config, n, space)?;
        Ok((opt.best_value >= target_bits, opt))
    };

    let mut lo = 1u64; // last failing count
    let mut hi = 16u64;
    let mut hi_opt = loop {
        let (ok, opt) = probe(hi)?;
        if ok {
            break opt;
        }
        lo = hi;
        if hi >= MAX_PULSES {
            return Err(Error::Infeasible(format!("no key of {target_bits} bits below {MAX_PULSES} pulses")));
        }
        hi = hi.saturating_mul(4).min(MAX_PULSES);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let (ok, opt) = probe(mid)?;
        if ok {
            hi = mid;
            hi_opt = opt;
        } else {
            lo = mid;
        }
    }
    Ok(MinPulses { n_source: hi, optimum: hi_opt, probes })
}
