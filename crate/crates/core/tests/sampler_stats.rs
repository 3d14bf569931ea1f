use adpqis_core::samplers::{accept_reject, Choice};
use adpqis_core::{
    epsilon_greedy_action, qis_sample_action, qratio, ArgminParams, FeatureSpec, QApprox, QisBounds, StageIndex,
    StateVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn stage() -> StageIndex {
    StageIndex::new(1, 1).unwrap()
}

fn bin_of(share: f64, bins: usize) -> usize {
    ((share * bins as f64) as usize).min(bins - 1)
}

/// Twenty proposal classes (bins of the first share) with fixed values; the
/// acceptance rate of each class must match its qratio.
#[test]
fn acceptance_frequency_matches_qratio() {
    const CLASSES: usize = 20;
    const N: usize = 10_000;
    let values: Vec<f64> = (0..CLASSES).map(|i| 35.0 + 5.0 * ((i * 7) % CLASSES) as f64 / 19.0).collect();
    let bounds = QisBounds::new(stage(), 35.0, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut proposed = [0usize; CLASSES];
    let mut accepted = [0usize; CLASSES];
    while proposed.iter().any(|&n| n < N) {
        let mut b = bounds;
        let (a, _) = accept_reject(2, &mut b, &mut rng, |xi| {
            let c = bin_of(xi.shares()[0], CLASSES);
            proposed[c] += 1;
            values[c]
        })
        .unwrap();
        assert_eq!(b, bounds);
        accepted[bin_of(a.shares()[0], CLASSES)] += 1;
    }
    for c in 0..CLASSES {
        let p = qratio(values[c], &bounds);
        let n = proposed[c] as f64;
        let freq = accepted[c] as f64 / n;
        let sigma = (p * (1.0 - p) / n).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * sigma + 1e-12,
            "class {c}: frequency {freq} vs qratio {p} (sigma {sigma})"
        );
    }
}

#[test]
fn accepted_density_follows_qratio() {
    const BINS: usize = 10;
    const N: usize = 20_000;
    let spec = FeatureSpec::new(0, 2, vec![(0.0, 1.0); 2]).unwrap();
    // value = first share, so qratio = 1 - s and the accepted density is 2 (1 - s)
    let q = QApprox::with_theta(stage(), spec, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let empty = StateVector::new(Vec::new()).unwrap();
    let bounds = QisBounds::new(stage(), 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = [0usize; BINS];
    for _ in 0..N {
        let (a, b, _) = qis_sample_action(&q, &empty, &bounds, &mut rng).unwrap();
        assert_eq!(b, bounds);
        counts[bin_of(a.shares()[0], BINS)] += 1;
    }
    let mut chi2 = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let (lo, hi) = (i as f64 / BINS as f64, (i + 1) as f64 / BINS as f64);
        let mass = (2.0 * hi - hi * hi) - (2.0 * lo - lo * lo);
        let expected = mass * N as f64;
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    let p = 1.0 - ChiSquared::new((BINS - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-squared {chi2}, p = {p}");
}

#[test]
fn half_epsilon_exploits_half_the_time() {
    const N: usize = 10_000;
    let spec = FeatureSpec::new(0, 3, vec![(0.0, 1.0); 3]).unwrap();
    let q = QApprox::zero(stage(), spec);
    let empty = StateVector::new(Vec::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let params = ArgminParams::default();
    let exploits = (0..N)
        .filter(|_| epsilon_greedy_action(&q, &empty, 0.5, &params, &mut rng).unwrap().1 == Choice::Exploit)
        .count();
    let sigma = (0.25 / N as f64).sqrt();
    let frac = exploits as f64 / N as f64;
    assert!((frac - 0.5).abs() <= 3.0 * sigma, "exploit fraction {frac}");
}

#[test]
fn extreme_epsilons_are_pure() {
    let spec = FeatureSpec::new(0, 3, vec![(0.0, 1.0); 3]).unwrap();
    let q = QApprox::zero(stage(), spec);
    let empty = StateVector::new(Vec::new()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let params = ArgminParams::default();
    for _ in 0..500 {
        assert_eq!(epsilon_greedy_action(&q, &empty, 0.0, &params, &mut rng).unwrap().1, Choice::Exploit);
        assert_eq!(epsilon_greedy_action(&q, &empty, 1.0, &params, &mut rng).unwrap().1, Choice::Explore);
    }
}
