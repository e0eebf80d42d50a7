use privroute::counter::{error_bound, laplace_sample, EpsilonPrime, PrivateCounter};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn zero_noise_counter_is_exact_on_every_short_stream() {
    // every stream of length <= 10 is a prefix of some length-10 stream
    let mut streams = 0;
    for code in 0..3u32.pow(10) {
        let mut c = PrivateCounter::new(10, EpsilonPrime::Infinite, 0).unwrap();
        let mut x = code;
        let mut exact = 0i64;
        for _ in 0..10 {
            let s = (x % 3) as i8 - 1;
            x /= 3;
            exact += i64::from(s);
            assert_eq!(c.feed(s).unwrap(), exact as f64);
        }
        streams += 1;
    }
    assert_eq!(streams, 59_049);
}

proptest! {
    #[test]
    fn zero_noise_counter_is_exact_on_long_streams(symbols in prop::collection::vec(-1i8..=1, 1..600)) {
        let mut c = PrivateCounter::new(symbols.len() as u64, EpsilonPrime::Infinite, 9).unwrap();
        let mut exact = 0i64;
        for &s in &symbols {
            exact += i64::from(s);
            prop_assert_eq!(c.feed(s).unwrap(), exact as f64);
        }
    }

    #[test]
    fn noise_terms_equal_popcount(len in 1u64..3000, seed in any::<u64>()) {
        let mut c = PrivateCounter::new(len, EpsilonPrime::Finite(1.0), seed).unwrap();
        for t in 1..=len {
            c.feed(1).unwrap();
            prop_assert_eq!(c.noise_terms(), t.count_ones());
            prop_assert_eq!(c.active_levels().count() as u32, t.count_ones());
            prop_assert!(c.noise_terms() <= (64 - t.leading_zeros()));
        }
    }

    #[test]
    fn error_bound_is_monotone(t in 2u64..1_000_000, beta in 0.001f64..0.9, eps in 0.01f64..10.0) {
        let e = error_bound(t, beta, eps).unwrap();
        prop_assert!(error_bound(t, beta, eps * 1.5).unwrap() < e);
        prop_assert!(error_bound(t + t / 2 + 1, beta, eps).unwrap() > e);
        prop_assert!(error_bound(t, beta / 2.0, eps).unwrap() > e);
    }
}

#[test]
fn laplace_draws_have_the_right_mean_and_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 1_000_000;
    for scale in [1.0, 2.5] {
        let xs: Vec<f64> = (0..draws).map(|_| laplace_sample(scale, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        // sd of the mean is sqrt(2) * scale / 1000
        assert!(mean.abs() < 0.01 * scale, "mean {mean}");
        assert!((var / (2.0 * scale * scale) - 1.0).abs() < 0.03, "var {var}");
    }
}

#[test]
fn release_variance_is_popcount_times_laplace_variance() {
    let eps = 0.5;
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for t in [7u64, 8, 13] {
        let mut errs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut c = PrivateCounter::new(t, EpsilonPrime::Finite(eps), rng.gen()).unwrap();
            let mut y = 0.0;
            for _ in 0..t {
                y = c.feed(1).unwrap();
            }
            errs.push(y - t as f64);
        }
        let mean = errs.iter().sum::<f64>() / trials as f64;
        let var = errs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let want = f64::from(t.count_ones()) * 2.0 / (eps * eps);
        assert!((var / want - 1.0).abs() < 0.04, "t={t}: var {var} want {want}");
    }
}

#[test]
fn seeded_outputs_replay_bit_for_bit() {
    let run = || {
        let mut c = PrivateCounter::new(500, EpsilonPrime::Finite(0.7), 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..500)
            .map(|_| c.feed(rng.gen_range(-1..=1)).unwrap().to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
