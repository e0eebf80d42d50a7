use privroute::params::{derive_private_params, eta_prime_bound, exact_params, is_feasible, GameDims, PrivateParams};
use proptest::prelude::*;

fn dims(n: usize, m: usize, l: usize, d: f64) -> GameDims {
    GameDims {
        n,
        m,
        max_route_len: l,
        sensitivity: d,
    }
}

/// Independent substitution into the schedule formulas.
struct Hand {
    t: u64,
    k: u64,
    eps_prime: f64,
    e: f64,
    delta_t: f64,
}

fn hand(n: f64, m: f64, l: f64, d: f64, alpha: f64, eps: f64, beta: f64) -> Hand {
    let t = (2.0 * m * n / alpha - 1e-9).ceil().max(1.0) as u64;
    let k = (8.0 * l * m * n * d / (alpha * alpha) - 1e-9).ceil().max(1.0) as u64;
    let t_eff = (t.max(2)) as f64;
    let eps_prime = eps / (4.0 * k as f64 * l * t_eff.ln());
    let e = (8.0 * t_eff.ln()).sqrt() * (2.0 * m / beta).ln() / eps_prime;
    Hand {
        t,
        k,
        eps_prime,
        e,
        delta_t: l * d * e,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn fixed_substitutions() {
    // 2 players, 2 links, L = 1, sensitivity 0.5, alpha 0.4
    let p = derive_private_params(dims(2, 2, 1, 0.5), 0.4, 1.0, 0.05).unwrap();
    assert_eq!((p.t, p.k), (20, 100));
    let eps_prime = 1.0 / (400.0 * 20f64.ln());
    assert!(rel(p.epsilon_prime, eps_prime) < 1e-15);
    let e = (8.0 * 20f64.ln()).sqrt() * 80f64.ln() / eps_prime;
    assert!(rel(p.count_error, e) < 1e-15);
    assert!(rel(p.cost_error, 0.5 * e) < 1e-15);
    assert!(!p.feasible);
    assert!(rel(p.eta, 0.4 + e) < 1e-15);
    assert!(rel(p.eta_prime, 0.4 + e + 2.0 + 0.05 + 0.05) < 1e-15);

    // 50 players, 3 links, slope 1/50, alpha 0.25
    let p = derive_private_params(dims(50, 3, 1, 0.02), 0.25, 2e5, 0.05).unwrap();
    assert_eq!((p.t, p.k), (1200, 384));
    assert!(p.feasible);

    let x = exact_params(dims(4, 2, 2, 0.5), 0.5).unwrap();
    assert_eq!((x.t, x.k_lemma, x.k_algorithm), (16, 64, 128));
}

proptest! {
    #[test]
    fn derived_fields_match_hand_substitution(
        n in 1usize..200, m in 1usize..60, l in 1usize..8, d in 0.0f64..1.0,
        alpha in 0.01f64..2.0, eps in 0.01f64..1e7, beta in 0.001f64..0.99,
    ) {
        let p = derive_private_params(dims(n, m, l, d), alpha, eps, beta).unwrap();
        let h = hand(n as f64, m as f64, l as f64, d, alpha, eps, beta);
        prop_assert_eq!((p.t, p.k), (h.t, h.k));
        prop_assert!(rel(p.epsilon_prime, h.eps_prime) < 1e-14);
        prop_assert!(rel(p.count_error, h.e) < 1e-14);
        if d > 0.0 {
            prop_assert!(rel(p.cost_error, h.delta_t) < 1e-14);
        }
        prop_assert_eq!(p.feasible, alpha > 4.0 * p.cost_error);
        prop_assert_eq!(p.feasible, is_feasible(alpha, p.cost_error));
        prop_assert_eq!(p.eta, alpha + 2.0 * p.cost_error);
        prop_assert_eq!(p.eta_prime, eta_prime_bound(p.eta, l, eps, beta));
        prop_assert_eq!(p.stream_budget(), n as u64 * (p.t + 1));
        // re-deriving from the stored inputs reproduces every field
        prop_assert_eq!(&derive_private_params(p.dims, p.alpha, p.epsilon, p.beta).unwrap(), &p);
    }

    #[test]
    fn schedule_is_monotone(
        n in 1usize..100, m in 1usize..40, l in 1usize..6, d in 0.01f64..1.0,
        alpha in 0.05f64..1.0, eps in 0.1f64..1e6, beta in 0.001f64..0.5,
    ) {
        let base = derive_private_params(dims(n, m, l, d), alpha, eps, beta).unwrap();
        let wider = derive_private_params(dims(n, m, l, d), alpha * 2.0, eps, beta).unwrap();
        prop_assert!(wider.t <= base.t && wider.k <= base.k);
        let more_eps = derive_private_params(dims(n, m, l, d), alpha, eps * 2.0, beta).unwrap();
        prop_assert!(more_eps.epsilon_prime > base.epsilon_prime);
        prop_assert!(more_eps.cost_error < base.cost_error);
        prop_assert!(more_eps.feasible || !base.feasible);
        let steeper = derive_private_params(dims(n, m, l, (d * 1.5).min(1.0)), alpha, eps, beta).unwrap();
        prop_assert!(steeper.cost_error >= base.cost_error);
    }

    #[test]
    fn eta_prime_is_nondecreasing(
        eta in 0.0f64..10.0, l in 1usize..10, eps in 0.0f64..10.0, beta in 0.0f64..1.0, bump in 0.0f64..1.0,
    ) {
        let base = eta_prime_bound(eta, l, eps, beta);
        prop_assert!(eta_prime_bound(eta + bump, l, eps, beta) >= base);
        prop_assert!(eta_prime_bound(eta, l + 1, eps, beta) >= base);
        prop_assert!(eta_prime_bound(eta, l, eps + bump, beta) >= base);
        prop_assert!(eta_prime_bound(eta, l, eps, beta + bump) >= base);
    }
}

#[test]
fn feasibility_flips_at_the_solved_sensitivity() {
    let (n, m, l, alpha, eps, beta) = (20, 4, 2, 0.3, 5e4, 0.05);
    let gate = |d: f64| {
        derive_private_params(dims(n, m, l, d), alpha, eps, beta)
            .unwrap()
            .feasible
    };
    assert!(gate(1e-4));
    assert!(!gate(1.0));
    let (mut lo, mut hi) = (1e-4, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gate(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!(gate(lo) && !gate(hi));
    let p = derive_private_params(dims(n, m, l, hi), alpha, eps, beta).unwrap();
    assert!(4.0 * p.cost_error >= alpha);
    let q = derive_private_params(dims(n, m, l, lo), alpha, eps, beta).unwrap();
    assert!(4.0 * q.cost_error < alpha);
}

#[test]
fn gate_matches_the_private_engine_precondition() {
    let p = derive_private_params(dims(2, 2, 1, 0.5), 0.4, 1.0, 0.05).unwrap();
    assert!(matches!(
        p.require_feasible(),
        Err(privroute::Error::InfeasibleAlpha { .. })
    ));
    let p: PrivateParams = derive_private_params(dims(2, 2, 1, 0.5), 0.4, 1e6, 0.05).unwrap();
    assert!(p.require_feasible().is_ok());
}

#[test]
fn invalid_inputs_are_rejected() {
    let d = dims(2, 2, 1, 0.5);
    for (a, e, b) in [
        (0.0, 1.0, 0.05),
        (0.4, 0.0, 0.05),
        (0.4, 1.0, 0.0),
        (0.4, 1.0, 1.0),
        (f64::NAN, 1.0, 0.05),
    ] {
        assert!(derive_private_params(d, a, e, b).is_err(), "{a} {e} {b}");
    }
}
