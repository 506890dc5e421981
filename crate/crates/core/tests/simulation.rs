use sixstate::rate::key_length;
use sixstate::sim::compare_with_model;
use sixstate::spdc::source_stats;
use sixstate::{empirical_rate_check, simulate, SecurityBudget, SetupParams, SiftingProbabilities};

fn lossy() -> SetupParams {
    SetupParams::symmetric(0.1, 50.0, 0.5, 0.03).unwrap()
}

#[test]
fn same_seed_same_tally() {
    let s = lossy();
    let sift = SiftingProbabilities::balanced();
    // more than one shard so the merge order matters
    let a = simulate(&s, &sift, 3_000_000, 11).unwrap();
    let b = simulate(&s, &sift, 3_000_000, 11).unwrap();
    let c = simulate(&s, &sift, 3_000_000, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn estimates_agree_with_model() {
    let sift = SiftingProbabilities::balanced();
    for seed in 0..5 {
        let t = simulate(&lossy(), &sift, 5_000_000, seed).unwrap();
        let c = compare_with_model(&t).unwrap();
        assert!(c.p11_z.unwrap().abs() < 4.0, "seed {seed}: {c:?}");
        assert!(c.qber_pooled_z.unwrap().abs() < 4.0, "seed {seed}: {c:?}");
        for z in c.qber_by_basis_z {
            assert!(z.unwrap().abs() < 4.0, "seed {seed}: {c:?}");
        }
    }
}

#[test]
fn basis_choices_follow_sifting() {
    let sift = SiftingProbabilities::new(0.2).unwrap();
    let t = simulate(&SetupParams::perfect(0.3, 5.0).unwrap(), &sift, 2_000_000, 5).unwrap();
    let probs = [sift.p_x, sift.p_y, sift.p_z];
    let n = t.coincidences as f64;
    for counts in [t.alice_basis_counts, t.bob_basis_counts] {
        assert_eq!(counts.iter().sum::<u64>(), t.coincidences);
        for (k, p) in counts.iter().zip(probs) {
            let se = (p * (1.0 - p) / n).sqrt();
            assert!(((*k as f64 / n) - p).abs() < 4.0 * se, "{counts:?}");
        }
    }
    // matched-basis pairs occur with probability sum p_i^2
    let matched: f64 = probs.iter().map(|p| p * p).sum();
    let se = (matched * (1.0 - matched) / n).sqrt();
    assert!((t.matched_pairs() as f64 / n - matched).abs() < 4.0 * se);
}

#[test]
fn lossless_detection_keeps_only_single_pairs() {
    let s = SetupParams::new(0.5, 0.17, 0.0, 1.0, 1.0, 0.02).unwrap();
    let t = simulate(&s, &SiftingProbabilities::balanced(), 500_000, 9).unwrap();
    assert_eq!(t.coincidences_by_pairs.len(), 1);
    assert_eq!(t.coincidences_by_pairs[&1], t.coincidences);
}

#[test]
fn p11_error_shrinks_like_inverse_sqrt() {
    let s = lossy();
    let p11 = source_stats(&s).unwrap().p11;
    let sift = SiftingProbabilities::balanced();
    let rms = |pulses: u64| {
        let sq: f64 = (0..8)
            .map(|seed| {
                let d = simulate(&s, &sift, pulses, 100 + seed).unwrap().empirical_p11() - p11;
                d * d
            })
            .sum();
        (sq / 8.0).sqrt()
    };
    let small = rms(250_000);
    let large = rms(4_000_000);
    // 16x the pulses should cut the error about 4x
    let ratio = small / large;
    assert!((1.5..12.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn empirical_key_matches_expected_key() {
    let setup = SetupParams::symmetric(0.1, 10.0, 0.8, 0.01).unwrap();
    let sift = SiftingProbabilities::new(0.1).unwrap();
    let budget = SecurityBudget::new(1e-9, 1e-10, 3e-10, 3e-10, 3e-10).unwrap();
    let n = 100_000_000;
    let tally = simulate(&setup, &sift, n, 2024).unwrap();
    let empirical = empirical_rate_check(&tally, &budget, 1.2).unwrap();
    let expected = key_length(&setup, &sift, &budget, n, 1.2).unwrap();
    assert!(expected.key_length_bits > 0.0);
    let rel = (empirical.key_length_bits - expected.key_length_bits).abs() / expected.key_length_bits;
    assert!(rel < 0.1, "empirical {} vs expected {}", empirical.key_length_bits, expected.key_length_bits);
}

#[test]
fn tallies_merge_additively() {
    let sift = SiftingProbabilities::balanced();
    let mut a = simulate(&lossy(), &sift, 200_000, 1).unwrap();
    let b = simulate(&lossy(), &sift, 300_000, 2).unwrap();
    let before = a.coincidences;
    a.merge(&b);
    assert_eq!(a.emitted, 500_000);
    assert_eq!(a.coincidences, before + b.coincidences);
    assert_eq!(a.coincidences_by_pairs.values().sum::<u64>(), a.coincidences);
}
