//! Event-level Monte Carlo of entanglement distribution, loss, photon-number
//! post-selection and basis sifting.
//!
//! Pulses are split into fixed-size shards. Shard `i` draws from a ChaCha8
//! stream seeded with the run seed and stream id `i`, so a tally depends only
//! on `(setup, sifting, n_pulses, seed)` and not on the number of threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::math::QberTriple;
use crate::rate::{
    evaluate_bound, Breakdown, EvalOptions, OperatingPoint, ProtocolCounts, RateResult, SecurityBudget,
    SiftingProbabilities,
};
use crate::spdc::{
    coincidence_error_prob, intrinsic_qber_n, misalignment_error, pair_distribution, source_stats, SetupParams,
};

/// Pulses per RNG stream.
pub const SHARD_SIZE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    fn index(self) -> usize {
        self as usize
    }

    fn draw(rng: &mut impl Rng, sifting: &SiftingProbabilities) -> Basis {
        let u: f64 = rng.random();
        if u < sifting.p_x {
            Basis::X
        } else if u < sifting.p_x + sifting.p_y {
            Basis::Y
        } else {
            Basis::Z
        }
    }
}

/// One side's measurement record for a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub tag: u64,
    pub click_0: bool,
    pub click_1: bool,
    /// QND outcome: exactly one photon. Cleared by vacuum sifting when
    /// neither detector clicked.
    pub single_photon: bool,
    pub basis: Basis,
}

impl DetectionRecord {
    /// Record for `photons` photons reaching the detectors, the first of
    /// which carries `bit`.
    fn measure(tag: u64, photons: u32, bit: bool, basis: Basis) -> Self {
        let mut r =
            Self { tag, click_0: photons > 0 && !bit, click_1: photons > 0 && bit, single_photon: photons == 1, basis };
        r.vacuum_sift();
        r
    }

    pub fn vacuum_sift(&mut self) {
        if !(self.click_0 || self.click_1) {
            self.single_photon = false;
        }
    }

    pub fn bit(&self) -> bool {
        self.click_1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisTally {
    pub sifted_pairs: u64,
    pub errors: u64,
}

impl BasisTally {
    pub fn qber(&self) -> Option<f64> {
        (self.sifted_pairs > 0).then(|| self.errors as f64 / self.sifted_pairs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTally {
    pub setup: SetupParams,
    pub sifting: SiftingProbabilities,
    pub seed: u64,
    pub emitted: u64,
    /// Pulses where both sides kept a single-photon record.
    pub coincidences: u64,
    /// Matched-basis pairs and errors, indexed X, Y, Z.
    pub bases: [BasisTally; 3],
    /// Basis choices over coincidences, per side.
    pub alice_basis_counts: [u64; 3],
    pub bob_basis_counts: [u64; 3],
    /// Coincidences by number of emitted pairs.
    pub coincidences_by_pairs: BTreeMap<u64, u64>,
}

impl SimTally {
    fn empty(setup: SetupParams, sifting: SiftingProbabilities, seed: u64) -> Self {
        Self {
            setup,
            sifting,
            seed,
            emitted: 0,
            coincidences: 0,
            bases: [BasisTally::default(); 3],
            alice_basis_counts: [0; 3],
            bob_basis_counts: [0; 3],
            coincidences_by_pairs: BTreeMap::new(),
        }
    }

    /// Adds another tally's counters. Associative; inputs must come from the
    /// same configuration.
    pub fn merge(&mut self, other: &SimTally) {
        self.emitted += other.emitted;
        self.coincidences += other.coincidences;
        for i in 0..3 {
            self.bases[i].sifted_pairs += other.bases[i].sifted_pairs;
            self.bases[i].errors += other.bases[i].errors;
            self.alice_basis_counts[i] += other.alice_basis_counts[i];
            self.bob_basis_counts[i] += other.bob_basis_counts[i];
        }
        for (n, c) in &other.coincidences_by_pairs {
            *self.coincidences_by_pairs.entry(*n).or_insert(0) += c;
        }
    }

    pub fn empirical_p11(&self) -> f64 {
        if self.emitted == 0 {
            0.0
        } else {
            self.coincidences as f64 / self.emitted as f64
        }
    }

    pub fn matched_pairs(&self) -> u64 {
        self.bases.iter().map(|b| b.sifted_pairs).sum()
    }

    /// QBER over all matched bases.
    pub fn pooled_qber(&self) -> Option<f64> {
        let n = self.matched_pairs();
        (n > 0).then(|| self.bases.iter().map(|b| b.errors).sum::<u64>() as f64 / n as f64)
    }
}

struct Model {
    cdf: Vec<f64>,
    arm: f64,
    eta_d: [f64; 2],
    e_m: f64,
}

impl Model {
    fn new(setup: &SetupParams) -> Result<Self> {
        let mut acc = 0.0;
        let cdf = pair_distribution(setup.lambda)?
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            cdf,
            arm: setup.arm_transmittance(),
            eta_d: [setup.eta_d_alice, setup.eta_d_bob],
            e_m: misalignment_error(setup.eta_m)?,
        })
    }

    fn sample_pairs(&self, u: f64) -> u64 {
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1) as u64
    }

    /// Photons left after per-photon channel loss and detector inefficiency.
    fn thin(&self, rng: &mut impl Rng, n: u64, side: usize) -> u32 {
        let mut k = 0;
        for _ in 0..n {
            if rng.random::<f64>() < self.arm && rng.random::<f64>() < self.eta_d[side] {
                k += 1;
            }
        }
        k
    }
}

fn run_shard(
    model: &Model,
    setup: SetupParams,
    sifting: SiftingProbabilities,
    seed: u64,
    shard: u64,
    pulses: u64,
) -> SimTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut tally = SimTally::empty(setup, sifting, seed);
    let mut by_pairs: Vec<u64> = Vec::new();
    let first_tag = shard * SHARD_SIZE;

    for tag in first_tag..first_tag + pulses {
        let n = model.sample_pairs(rng.random());
        if n == 0 {
            continue;
        }
        if model.thin(&mut rng, n, 0) != 1 {
            continue;
        }
        if model.thin(&mut rng, n, 1) != 1 {
            continue;
        }
        // Basis choices are independent of the photon-number process, so they
        // are only drawn for events that survive pulse sifting.
        let basis_a = Basis::draw(&mut rng, &sifting);
        let basis_b = Basis::draw(&mut rng, &sifting);
        let bit_a: bool = rng.random();
        let e_n = intrinsic_qber_n(n).expect("n >= 1");
        let flip = rng.random::<f64>() < coincidence_error_prob(model.e_m, e_n);
        let alice = DetectionRecord::measure(tag, 1, bit_a, basis_a);
        let bob = DetectionRecord::measure(tag, 1, bit_a ^ flip, basis_b);
        if !(alice.single_photon && bob.single_photon) {
            continue;
        }

        tally.coincidences += 1;
        if by_pairs.len() <= n as usize {
            by_pairs.resize(n as usize + 1, 0);
        }
        by_pairs[n as usize] += 1;
        tally.alice_basis_counts[basis_a.index()] += 1;
        tally.bob_basis_counts[basis_b.index()] += 1;
        if alice.basis == bob.basis {
            let b = &mut tally.bases[alice.basis.index()];
            b.sifted_pairs += 1;
            if alice.bit() != bob.bit() {
                b.errors += 1;
            }
        }
    }
    tally.emitted = pulses;
    tally.coincidences_by_pairs =
        by_pairs.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(n, c)| (n as u64, c)).collect();
    tally
}

/// Runs `n_pulses` emissions through the protocol up to basis sifting.
pub fn simulate(setup: &SetupParams, sifting: &SiftingProbabilities, n_pulses: u64, seed: u64) -> Result<SimTally> {
    setup.validate()?;
    if n_pulses < 1 {
        return Err(domain("n_pulses must be >= 1"));
    }
    let model = Model::new(setup)?;
    let shards = n_pulses.div_ceil(SHARD_SIZE);
    let size = |i: u64| SHARD_SIZE.min(n_pulses - i * SHARD_SIZE);
    let run = |i: u64| run_shard(&model, *setup, *sifting, seed, i, size(i));

    #[cfg(feature = "parallel")]
    let parts: Vec<SimTally> = {
        use rayon::prelude::*;
        (0..shards).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<SimTally> = (0..shards).map(run).collect();

    let mut total = SimTally::empty(*setup, *sifting, seed);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Feeds observed counts into the key-length bound.
///
/// `m_X`, `m_Y` are the matched X and Y pairs; the Z sample has the same size
/// as the X one and the rest of the Z pairs form the key block.
pub fn empirical_rate_check(tally: &SimTally, budget: &SecurityBudget, f_ec: f64) -> Result<RateResult> {
    empirical_rate_check_with(tally, budget, f_ec, EvalOptions::default())
}

pub fn empirical_rate_check_with(
    tally: &SimTally,
    budget: &SecurityBudget,
    f_ec: f64,
    options: EvalOptions,
) -> Result<RateResult> {
    budget.validate()?;
    let params = OperatingPoint {
        lambda: tally.setup.lambda,
        p_x: tally.sifting.p_x,
        eps_bar: budget.eps_bar,
        eps_pe: budget.eps_pe,
        eps_pa: budget.eps_pa,
    };
    let [x, y, z] = tally.bases;
    if tally.coincidences == 0 {
        let breakdown = Breakdown {
            entropy_bits: 0.0,
            smoothing_penalty_bits: 0.0,
            leak_ec_bits: 0.0,
            pa_cost_bits: 2.0 * (1.0 / budget.eps_pa).log2(),
            ec_verification_bits: (2.0 / budget.eps_ec).log2(),
        };
        return Ok(RateResult {
            key_length_bits: 0.0,
            bracket_bits: breakdown.bracket(),
            rate: 0.0,
            feasible: false,
            breakdown,
            params,
            counts: ProtocolCounts { n_source: tally.emitted, n_sifted: 0, n_key: 0, m_pe: [0; 3] },
            p11: 0.0,
            observed_qber: QberTriple { x: 0.0, y: 0.0, z: 0.0 },
            worst_case_qber: QberTriple { x: 0.5, y: 0.5, z: 0.5 },
        });
    }
    let m_z = x.sifted_pairs.min(z.sifted_pairs);
    let counts = ProtocolCounts {
        n_source: tally.emitted,
        n_sifted: tally.coincidences,
        n_key: z.sifted_pairs - m_z,
        m_pe: [x.sifted_pairs, y.sifted_pairs, m_z],
    };
    let q = |b: BasisTally| b.qber().unwrap_or(0.0).min(0.5);
    let observed = QberTriple { x: q(x), y: q(y), z: q(z) };
    evaluate_bound(counts, observed, tally.empirical_p11(), params, budget, f_ec, options)
}

/// Empirical vs analytic statistics with z-scores; a z-score is `None` when
/// the analytic standard error vanishes or no events were observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub p11_analytic: f64,
    pub p11_empirical: f64,
    pub p11_z: Option<f64>,
    pub qber_analytic: f64,
    pub qber_pooled: Option<f64>,
    pub qber_pooled_z: Option<f64>,
    /// X, Y, Z.
    pub qber_by_basis: [Option<f64>; 3],
    pub qber_by_basis_z: [Option<f64>; 3],
}

fn z_score(observed: f64, expected: f64, trials: u64) -> Option<f64> {
    if trials == 0 {
        return None;
    }
    let se = (expected * (1.0 - expected) / trials as f64).sqrt();
    (se > 0.0).then(|| (observed - expected) / se)
}

pub fn compare_with_model(tally: &SimTally) -> Result<ModelComparison> {
    let stats = source_stats(&tally.setup)?;
    let p11_emp = tally.empirical_p11();
    let pooled = tally.pooled_qber();
    Ok(ModelComparison {
        p11_analytic: stats.p11,
        p11_empirical: p11_emp,
        p11_z: z_score(p11_emp, stats.p11, tally.emitted),
        qber_analytic: stats.e_pdc,
        qber_pooled: pooled,
        qber_pooled_z: pooled.and_then(|q| z_score(q, stats.e_pdc, tally.matched_pairs())),
        qber_by_basis: tally.bases.map(|b| b.qber()),
        qber_by_basis_z: tally.bases.map(|b| b.qber().and_then(|q| z_score(q, stats.e_pdc, b.sifted_pairs))),
    })
}
