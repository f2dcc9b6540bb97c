use statrs::distribution::{ChiSquared, ContinuousCDF};

use qrep_core::simulator::{default_shots, sample, Distribution};

#[test]
fn sampled_counts_fit_the_distribution() {
    let probs = vec![0.1, 0.2, 0.3, 0.4];
    let d = Distribution::from_probs(2, probs.clone()).unwrap();
    let shots = 20_000;
    let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(0.999);
    let mut rejections = 0;
    for seed in 0..20 {
        let s = sample(&d, shots, seed);
        let chi2: f64 = s
            .probs()
            .iter()
            .zip(&probs)
            .map(|(obs, p)| {
                let (o, e) = (obs * shots as f64, p * shots as f64);
                (o - e).powi(2) / e
            })
            .sum();
        if chi2 > critical {
            rejections += 1;
        }
    }
    assert!(rejections <= 1, "{rejections} of 20 seeds rejected at the 0.1% level");
}

#[test]
fn sampling_is_seeded() {
    let d = Distribution::from_probs(1, vec![0.5, 0.5]).unwrap();
    assert_eq!(sample(&d, 64, 3), sample(&d, 64, 3));
    assert_ne!(sample(&d, 4096, 3), sample(&d, 4096, 4));
    assert_eq!(default_shots(3), 16);
}

#[test]
fn zero_probability_outcomes_are_never_drawn() {
    let d = Distribution::from_probs(2, vec![0.0, 0.5, 0.0, 0.5]).unwrap();
    let s = sample(&d, 10_000, 1);
    assert_eq!(s.prob(0), 0.0);
    assert_eq!(s.prob(2), 0.0);
}
