//! Type-II SPDC source feeding a symmetric lossy channel and finite-efficiency,
//! misaligned detectors.
//!
//! The pair-number distribution is thermal, `p_n = (n+1) x^n (1-x)^2` with
//! `x = lambda/(1+lambda)`, so its tail has a closed form. Every series below
//! is truncated at the first order where that tail drops below
//! [`TAIL_TOLERANCE`]; since `W_n <= p_n` the same cut bounds every sum.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::math::CompensatedSum;

pub const TAIL_TOLERANCE: f64 = 1e-14;
pub const MAX_SERIES_TERMS: usize = 100_000;

/// Fibre attenuation used throughout unless overridden, dB/km.
pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.17;

/// Physical configuration of source, channel and detectors.
///
/// The source sits in the middle, so each side sees `length_km / 2` of fibre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupParams {
    /// Half the mean photon-pair number per pulse.
    pub lambda: f64,
    pub alpha_db_per_km: f64,
    /// Total Alice-Bob distance.
    pub length_km: f64,
    pub eta_d_alice: f64,
    pub eta_d_bob: f64,
    /// Per-photon misalignment probability.
    pub eta_m: f64,
}

impl SetupParams {
    pub fn new(
        lambda: f64,
        alpha_db_per_km: f64,
        length_km: f64,
        eta_d_alice: f64,
        eta_d_bob: f64,
        eta_m: f64,
    ) -> Result<Self> {
        let s = Self { lambda, alpha_db_per_km, length_km, eta_d_alice, eta_d_bob, eta_m };
        s.validate()?;
        Ok(s)
    }

    /// Ideal detectors (`eta_D = 1`, `eta_M = 0`) at the default attenuation.
    pub fn perfect(lambda: f64, length_km: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_ALPHA_DB_PER_KM, length_km, 1.0, 1.0, 0.0)
    }

    /// Same detector efficiency on both sides, default attenuation.
    pub fn symmetric(lambda: f64, length_km: f64, eta_d: f64, eta_m: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_ALPHA_DB_PER_KM, length_km, eta_d, eta_d, eta_m)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let s = Self { lambda, ..*self };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(domain(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(domain(format!("alpha = {} must be >= 0", self.alpha_db_per_km)));
        }
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return Err(domain(format!("L = {} must be >= 0", self.length_km)));
        }
        for (side, eta) in [("Alice", self.eta_d_alice), ("Bob", self.eta_d_bob)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(domain(format!("{side} detector efficiency {eta} outside (0, 1]")));
            }
        }
        if !(0.0..=0.5).contains(&self.eta_m) {
            return Err(domain(format!("eta_M = {} outside [0, 1/2]", self.eta_m)));
        }
        Ok(())
    }

    /// Per-photon channel survival over one arm (`L/2`).
    pub fn arm_transmittance(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * (self.length_km / 2.0) / 10.0)
    }

    pub fn transmittances(&self) -> EffectiveTransmittances {
        let arm = self.arm_transmittance();
        EffectiveTransmittances { eta_a: self.eta_d_alice * arm, eta_b: self.eta_d_bob * arm }
    }
}

/// Total single-photon survival on each side: detector times half channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTransmittances {
    pub eta_a: f64,
    pub eta_b: f64,
}

/// `10^(-alpha L / 10)`.
pub fn channel_transmittance(alpha_db_per_km: f64, length_km: f64) -> Result<f64> {
    if !(alpha_db_per_km >= 0.0) || !(length_km >= 0.0) {
        return Err(domain(format!("attenuation {alpha_db_per_km} and length {length_km} must be >= 0")));
    }
    Ok(10f64.powf(-alpha_db_per_km * length_km / 10.0))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("lambda = {lambda} must be > 0")));
    }
    Ok(())
}

/// Probability that the source emits exactly `n` pairs.
pub fn photon_pair_prob(n: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let x = lambda / (1.0 + lambda);
    let q = 1.0 / (1.0 + lambda);
    Ok((n as f64 + 1.0) * x.powf(n as f64) * q * q)
}

/// `sum_{n > n_max} p_n = x^(n_max+1) ((n_max+2)(1-x) + x)`.
pub fn pair_tail(n_max: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let x = lambda / (1.0 + lambda);
    let one_minus_x = 1.0 / (1.0 + lambda);
    let k = n_max as f64;
    Ok(x.powf(k + 1.0) * ((k + 2.0) * one_minus_x + x))
}

/// Smallest `n_max` whose pair tail is below [`TAIL_TOLERANCE`].
pub fn truncation_order(lambda: f64) -> Result<usize> {
    check_lambda(lambda)?;
    let x = lambda / (1.0 + lambda);
    let one_minus_x = 1.0 / (1.0 + lambda);
    let mut x_pow = x; // x^(n+1)
    for n in 0..=MAX_SERIES_TERMS {
        if x_pow * ((n as f64 + 2.0) * one_minus_x + x) < TAIL_TOLERANCE {
            return Ok(n);
        }
        x_pow *= x;
    }
    Err(Error::Convergence { lambda, cap: MAX_SERIES_TERMS })
}

/// Truncated pair-number distribution `p_0 ..= p_{n_max}`.
pub fn pair_distribution(lambda: f64) -> Result<Vec<f64>> {
    let n_max = truncation_order(lambda)?;
    (0..=n_max as u64).map(|n| photon_pair_prob(n, lambda)).collect()
}

/// Probability that an `n`-pair emission leaves exactly one photon on each side.
pub fn single_photon_weight(n: u64, lambda: f64, eta_a: f64, eta_b: f64) -> Result<f64> {
    if n < 1 {
        return Err(domain("W_n needs n >= 1"));
    }
    for eta in [eta_a, eta_b] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!("transmittance {eta} outside (0, 1]")));
        }
    }
    let p = photon_pair_prob(n, lambda)?;
    let nf = n as f64;
    let loss = ((1.0 - eta_a) * (1.0 - eta_b)).powf(nf - 1.0);
    Ok(p * nf * nf * loss * eta_a * eta_b)
}

/// Intrinsic QBER of the `n`-pair component: `(1 - 2/(n+1))/2`.
pub fn intrinsic_qber_n(n: u64) -> Result<f64> {
    if n < 1 {
        return Err(domain("e_n needs n >= 1"));
    }
    Ok(0.5 * (1.0 - 2.0 / (n as f64 + 1.0)))
}

/// `e_M = 2 eta_M (1 - eta_M)`.
pub fn misalignment_error(eta_m: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&eta_m) {
        return Err(domain(format!("eta_M = {eta_m} outside [0, 1/2]")));
    }
    Ok(2.0 * eta_m * (1.0 - eta_m))
}

/// Error probability of a single-photon coincidence that originated from `n`
/// pairs. Simultaneous misalignment and intrinsic errors are not counted.
#[inline]
pub(crate) fn coincidence_error_prob(e_m: f64, e_n: f64) -> f64 {
    e_m * (1.0 - e_n) + (1.0 - e_m) * e_n
}

/// `p_11` and `e_PDC` from one pass over the truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub p11: f64,
    pub e_pdc: f64,
    /// Highest pair number included in the sums.
    pub n_max: usize,
}

/// Returns `(p11, sum_n e_n W_n, n_max)`.
fn coincidence_sums(setup: &SetupParams) -> Result<(f64, f64, usize)> {
    setup.validate()?;
    let n_max = truncation_order(setup.lambda)?;
    let EffectiveTransmittances { eta_a, eta_b } = setup.transmittances();

    // W_n = (1-x)^2 eta_a eta_b x (n+1) n^2 r^(n-1), r = x (1-eta_a)(1-eta_b)
    let lambda = setup.lambda;
    let x = lambda / (1.0 + lambda);
    let q = 1.0 / (1.0 + lambda);
    let prefactor = q * q * eta_a * eta_b * x;
    let r = x * (1.0 - eta_a) * (1.0 - eta_b);

    let mut p11 = CompensatedSum::default();
    let mut intrinsic = CompensatedSum::default();
    let mut r_pow = 1.0;
    for n in 1..=n_max {
        let nf = n as f64;
        let w = prefactor * (nf + 1.0) * nf * nf * r_pow;
        if w == 0.0 {
            break;
        }
        let e_n = 0.5 * (1.0 - 2.0 / (nf + 1.0));
        p11.add(w);
        intrinsic.add(e_n * w);
        r_pow *= r;
    }
    Ok((p11.value(), intrinsic.value(), n_max))
}

/// Probability that both sides receive exactly one photon.
pub fn p11(setup: &SetupParams) -> Result<f64> {
    Ok(coincidence_sums(setup)?.0)
}

/// QBER of the pulse-sifted single-photon coincidences, identical in all bases.
pub fn e_pdc(setup: &SetupParams) -> Result<f64> {
    Ok(source_stats(setup)?.e_pdc)
}

pub fn source_stats(setup: &SetupParams) -> Result<SourceStats> {
    let (p11, intrinsic, n_max) = coincidence_sums(setup)?;
    if !(p11 > 0.0) {
        return Err(Error::ZeroCoincidence);
    }
    // sum_n (e_M (1-e_n) + (1-e_M) e_n) W_n / p11 = e_M + (1 - 2 e_M) <e_n>
    let e_m = misalignment_error(setup.eta_m)?;
    let e_pdc = e_m + (1.0 - 2.0 * e_m) * (intrinsic / p11);
    Ok(SourceStats { p11, e_pdc: e_pdc.clamp(0.0, 0.5), n_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDAS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

    #[test]
    fn transmittance_examples() {
        assert_eq!(channel_transmittance(0.17, 0.0).unwrap(), 1.0);
        assert_eq!(channel_transmittance(0.0, 100.0).unwrap(), 1.0);
        assert!((channel_transmittance(0.17, 10.0).unwrap() - 0.676_082_975_391_981_8).abs() < 1e-15);
        assert!(channel_transmittance(-0.1, 1.0).is_err());
        assert!(channel_transmittance(0.1, -1.0).is_err());
    }

    #[test]
    fn effective_transmittance_is_detector_times_half_channel() {
        let s = SetupParams::new(0.1, 0.17, 40.0, 0.5, 0.25, 0.0).unwrap();
        let t = s.transmittances();
        let arm = channel_transmittance(0.17, 20.0).unwrap();
        assert!((t.eta_a - 0.5 * arm).abs() < 1e-16);
        assert!((t.eta_b - 0.25 * arm).abs() < 1e-16);
    }

    #[test]
    fn pair_prob_examples() {
        for lam in LAMBDAS {
            let p0 = photon_pair_prob(0, lam).unwrap();
            assert!((p0 - 1.0 / (1.0 + lam).powi(2)).abs() < 1e-16);
        }
        assert!(photon_pair_prob(1, 0.0).is_err());
    }

    #[test]
    fn normalization_and_mean() {
        for lam in LAMBDAS {
            let p = pair_distribution(lam).unwrap();
            let mut total = CompensatedSum::default();
            let mut mean = CompensatedSum::default();
            for (n, pn) in p.iter().enumerate() {
                total.add(*pn);
                mean.add(n as f64 * pn);
            }
            let (total, mean) = (total.value(), mean.value());
            assert!((1.0 - 1e-12..=1.0).contains(&total), "lambda={lam} sum={total}");
            assert!(((mean - 2.0 * lam) / (2.0 * lam)).abs() < 1e-10, "lambda={lam} mean={mean}");
        }
        let mean: f64 = pair_distribution(0.35).unwrap().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 0.7).abs() < 1e-10);
    }

    #[test]
    fn tail_formula_matches_direct_sum() {
        for lam in [0.2, 3.0] {
            for n_max in [0u64, 5, 40] {
                let direct: f64 = (n_max + 1..n_max + 5000).map(|n| photon_pair_prob(n, lam).unwrap()).sum();
                let closed = pair_tail(n_max, lam).unwrap();
                assert!((direct - closed).abs() <= 1e-13 * closed.max(1e-300) + 1e-300, "{lam} {n_max}");
            }
        }
    }

    #[test]
    fn truncation_is_minimal() {
        for lam in LAMBDAS {
            let n = truncation_order(lam).unwrap() as u64;
            assert!(pair_tail(n, lam).unwrap() < TAIL_TOLERANCE);
            if n > 0 {
                assert!(pair_tail(n - 1, lam).unwrap() >= TAIL_TOLERANCE);
            }
        }
    }

    #[test]
    fn truncation_cap_breach() {
        assert!(matches!(truncation_order(1e5), Err(Error::Convergence { .. })));
        let s = SetupParams::perfect(1e5, 10.0).unwrap();
        assert!(matches!(p11(&s), Err(Error::Convergence { .. })));
    }

    #[test]
    fn weight_examples() {
        let lam = 0.1;
        let w1 = single_photon_weight(1, lam, 1.0, 1.0).unwrap();
        assert!((w1 - 2.0 * lam / (1.0f64 + lam).powi(3)).abs() < 1e-16);
        for n in 2..10 {
            assert_eq!(single_photon_weight(n, lam, 1.0, 1.0).unwrap(), 0.0);
        }
        let w2 = single_photon_weight(2, 0.1, 0.5, 0.5).unwrap();
        assert!((w2 - 0.005_122_600_915_238_03).abs() < 1e-17);
        assert!(single_photon_weight(0, 0.1, 0.5, 0.5).is_err());
        assert!(single_photon_weight(1, 0.1, 0.0, 0.5).is_err());
    }

    #[test]
    fn p11_examples() {
        let s = SetupParams::perfect(0.1, 0.0).unwrap();
        assert!((p11(&s).unwrap() - 0.150_262_960_180_315_55).abs() < 1e-15);

        // small-lambda limit: p11 / (2 lambda eta_a eta_b) -> 1
        let s = SetupParams::symmetric(1e-7, 30.0, 0.6, 0.0).unwrap();
        let t = s.transmittances();
        let ratio = p11(&s).unwrap() / (2.0 * s.lambda * t.eta_a * t.eta_b);
        assert!((ratio - 1.0).abs() < 1e-5);

        let mut prev = f64::INFINITY;
        for l in [0.0, 20.0, 50.0, 100.0] {
            let v = p11(&SetupParams::symmetric(0.2, l, 0.7, 0.0).unwrap()).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn p11_against_termwise_oracle() {
        // independent route: sum W_n from the public per-term formula
        let s = SetupParams::symmetric(0.1, 50.0, 0.5, 0.03).unwrap();
        let t = s.transmittances();
        let oracle: f64 = (1..400).map(|n| single_photon_weight(n, 0.1, t.eta_a, t.eta_b).unwrap()).sum();
        let stats = source_stats(&s).unwrap();
        assert!((stats.p11 - oracle).abs() < 1e-15);
        // mpmath, 40 digits
        assert!((stats.p11 - 0.007_609_806_044_729_098).abs() < 1e-15);
        assert!((stats.e_pdc - 0.106_920_096_729_739_54).abs() < 1e-13);
    }

    #[test]
    fn intrinsic_qber_examples() {
        assert_eq!(intrinsic_qber_n(1).unwrap(), 0.0);
        assert_eq!(intrinsic_qber_n(3).unwrap(), 0.25);
        assert!((intrinsic_qber_n(1_000_000).unwrap() - 0.499_999).abs() < 1e-9);
        let mut prev = -1.0;
        for n in 1..200 {
            let e = intrinsic_qber_n(n).unwrap();
            assert!(e > prev && e < 0.5);
            prev = e;
        }
        assert!(intrinsic_qber_n(0).is_err());
    }

    #[test]
    fn misalignment_examples() {
        assert_eq!(misalignment_error(0.0).unwrap(), 0.0);
        assert_eq!(misalignment_error(0.5).unwrap(), 0.5);
        assert!((misalignment_error(0.03).unwrap() - 0.0582).abs() < 1e-16);
        assert!(misalignment_error(0.6).is_err());
        assert!(misalignment_error(-0.01).is_err());
    }

    #[test]
    fn e_pdc_examples() {
        for lam in [0.01, 0.3, 5.0] {
            assert_eq!(e_pdc(&SetupParams::perfect(lam, 0.0).unwrap()).unwrap(), 0.0);
            let s = SetupParams::new(lam, 0.0, 50.0, 1.0, 1.0, 0.03).unwrap();
            assert_eq!(e_pdc(&s).unwrap(), misalignment_error(0.03).unwrap());
        }
        let far = SetupParams::perfect(1.0, 100.0).unwrap();
        assert!(e_pdc(&far).unwrap() > 0.126);
    }

    #[test]
    fn e_pdc_underflow_is_error() {
        let s = SetupParams::perfect(0.1, 20_000.0).unwrap();
        assert_eq!(e_pdc(&s), Err(Error::ZeroCoincidence));
    }

    #[test]
    fn e_pdc_monotone_in_lambda() {
        let mut prev = -1.0;
        for i in 0..60 {
            let lam = 10f64.powf(-4.0 + 5.5 * i as f64 / 59.0);
            let e = e_pdc(&SetupParams::symmetric(lam, 50.0, 0.5, 0.0).unwrap()).unwrap();
            assert!(e >= prev, "lambda={lam}");
            prev = e;
        }
    }

    #[test]
    fn setup_validation() {
        assert!(SetupParams::symmetric(0.0, 10.0, 1.0, 0.0).is_err());
        assert!(SetupParams::symmetric(0.1, -1.0, 1.0, 0.0).is_err());
        assert!(SetupParams::symmetric(0.1, 1.0, 0.0, 0.0).is_err());
        assert!(SetupParams::symmetric(0.1, 1.0, 1.1, 0.0).is_err());
        assert!(SetupParams::symmetric(0.1, 1.0, 1.0, 0.51).is_err());
    }

    proptest! {
        #[test]
        fn weight_below_pair_prob(
            n in 1u64..200, lam in 1e-3f64..50.0, ea in 1e-6f64..=1.0, eb in 1e-6f64..=1.0,
        ) {
            let w = single_photon_weight(n, lam, ea, eb).unwrap();
            prop_assert!(w <= photon_pair_prob(n, lam).unwrap());
        }

        #[test]
        fn e_pdc_in_range(lam in 1e-3f64..20.0, l in 0.0f64..150.0, ed in 0.01f64..=1.0, em in 0.0f64..=0.5) {
            let st = source_stats(&SetupParams::symmetric(lam, l, ed, em).unwrap()).unwrap();
            prop_assert!(st.p11 > 0.0 && st.p11 < 1.0);
            prop_assert!((0.0..=0.5).contains(&st.e_pdc));
        }
    }
}
