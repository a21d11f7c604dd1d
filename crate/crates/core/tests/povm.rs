use photocount::povm_cw::{povm_avg_part, povm_cond_part, q_ir_cond, CwPart};
use photocount::povm_independent::{povm_independent_part, povm_r, IndependentPart};
use photocount::special::poisson_kernel;
use photocount::{CountDistribution, DetectorConfig};
use proptest::prelude::*;

fn cfg(x: f64, p: f64) -> DetectorConfig<f64> {
    DetectorConfig::with_params(1.0, x, 1.0, 0.0, p, 0.0).unwrap()
}

/// `P(Poisson(mu) >= n)` by direct summation.
fn poisson_at_least(n: usize, mu: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    let mut term = (-mu).exp();
    let mut below = 0.0;
    for j in 0..n {
        below += term;
        term *= mu / (j + 1) as f64;
    }
    // the complement loses precision only below 1e-16, far under the tolerances used here
    (1.0 - below).max(0.0)
}

/// Counts without afterpulses from renewal arguments: the n-th pulse fires before the
/// window ends iff at least n photons arrive in the live time left after n-1 dead times.
fn renewal_counts(intensity: f64, x: f64, leak: f64) -> Vec<f64> {
    let at_least = |n: usize| {
        if n == 0 {
            return 1.0;
        }
        let live = 1.0 - leak - (n - 1) as f64 * x;
        if live <= 0.0 {
            0.0
        } else {
            poisson_at_least(n, intensity * live)
        }
    };
    let n_max = (1.0 / x).floor() as usize + 2;
    (0..=n_max).map(|n| at_least(n) - at_least(n + 1)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n).map(|i| (a.get(i).unwrap_or(&0.0) - b.get(i).unwrap_or(&0.0)).abs()).fold(0.0, f64::max)
}

#[test]
fn poisson_kernel_sums_to_one() {
    for mean in [0.1, 1.0, 10.0, 50.0] {
        let mut sum = 0.0;
        let mut n = 0;
        loop {
            let p = poisson_kernel(mean, n);
            sum += p;
            if n as f64 > mean && p < 1e-14 {
                break;
            }
            n += 1;
        }
        assert!((sum - 1.0).abs() < 1e-12, "mean {mean}: {sum}");
    }
}

#[test]
fn eta_rr_is_affine_and_decreasing() {
    let c = cfg(0.07, 0.0);
    let etas: Vec<f64> = (0..=14).map(|n| c.eta_rr(n).unwrap()).collect();
    for w in etas.windows(2) {
        assert!(w[1] < w[0]);
        assert!((w[1] - w[0] + 0.07).abs() < 1e-14);
    }
}

#[test]
fn independent_normalization_grid() {
    for i in [0.01, 0.5, 2.0, 4.0, 10.0, 40.0] {
        for p in [0.0, 0.05, 0.3] {
            let d = povm_r(&cfg(0.09, p), i).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-10, "I {i} p {p}: {}", d.total());
        }
    }
}

#[test]
fn independent_windows_without_afterpulses_match_renewal_counts() {
    for x in [0.09, 0.1, 0.25, 0.3] {
        for i in [0.3, 2.0, 7.29, 25.0] {
            let got = povm_r(&cfg(x, 0.0), i).unwrap();
            let want = renewal_counts(i, x, 0.0);
            assert!(max_diff(got.probs(), &want) < 1e-12, "x {x} I {i}");
        }
    }
}

#[test]
fn leaked_windows_without_afterpulses_match_renewal_counts() {
    let x = 0.09;
    for i in [0.5, 4.0, 12.0] {
        for j in 0..=32 {
            let leak = x * j as f64 / 33.0;
            let got = povm_cond_part(&cfg(x, 0.0), i, CwPart::Total, leak).unwrap();
            let want = renewal_counts(i, x, leak);
            assert!(max_diff(&got, &want) < 1e-12, "I {i} leak {leak}");
        }
    }
}

#[test]
fn cw_completeness() {
    let x = 0.09;
    for i in [0.01, 1.0, 4.0, 20.0] {
        for p in [0.0, 0.1] {
            let c = cfg(x, p);
            for j in 0..33 {
                let leak = x * j as f64 / 32.0 * (1.0 - 1e-12);
                let s: f64 = povm_cond_part(&c, i, CwPart::Total, leak).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "I {i} p {p} leak {leak}: {s}");
            }
            let s: f64 = povm_avg_part(&c, i, CwPart::Total).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "averaged I {i} p {p}: {s}");
        }
    }
}

#[test]
fn no_click_probability_grows_with_leak() {
    for p in [0.0, 0.1] {
        let c = cfg(0.09, p);
        let vals: Vec<f64> = (0..=32).map(|j| q_ir_cond(&c, 3.0, 0, 0.09 * j as f64 / 33.0).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] > w[0], "{vals:?}");
        }
    }
}

#[test]
fn averaged_parts_at_vanishing_intensity() {
    for p in [0.0, 0.1] {
        let c = cfg(0.09, p);
        let tiny = povm_avg_part(&c, 1e-8, CwPart::Total).unwrap();
        // the leaked dead time still ends in a chain of afterpulses
        for (n, v) in tiny.iter().enumerate().take(4) {
            let chain = p.powi(n as i32) * (1.0 - p);
            assert!((v - chain).abs() < 1e-6, "n {n}: {v} vs {chain}");
        }
        // first order: one photon in the mean live time 1 - x/2, no afterpulse
        let slope = ((1.0 - p) - tiny[0]) / 1e-8;
        assert!((slope - (1.0 - p) * (1.0 - 0.045)).abs() < 1e-5, "slope {slope}");
    }
}

fn partitions(n: usize, max_part: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if n == 0 {
        out.push(parts.clone());
        return;
    }
    for k in (1..=max_part.min(n)).rev() {
        parts.push(k);
        partitions(n - k, k, parts, out);
        parts.pop();
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn group_partitions_count_compositions() {
    // summing multinomial weights over all partitions of n into f groups gives C(n-1, f-1)
    for n in 1..=8 {
        let mut all = Vec::new();
        partitions(n, n, &mut Vec::new(), &mut all);
        let mut by_groups = vec![0.0; n + 1];
        for parts in &all {
            let f = parts.len();
            let mut counts = vec![0usize; n + 1];
            for &k in parts {
                counts[k] += 1;
            }
            by_groups[f] += factorial(f) / counts.iter().map(|&c| factorial(c)).product::<f64>();
        }
        for f in 1..=n {
            let binom = factorial(n - 1) / (factorial(f - 1) * factorial(n - f));
            assert_eq!(by_groups[f], binom, "n {n} f {f}");
        }
    }
}

#[test]
fn parts_vanish_where_the_window_cannot_hold_them() {
    // x = 0.1 fits exactly ten dead times
    let c = cfg(0.1, 0.2);
    let rr = povm_independent_part(&c, 5.0, IndependentPart::Rr).unwrap();
    let ri = povm_independent_part(&c, 5.0, IndependentPart::Ri).unwrap();
    assert_eq!(rr.len(), 12);
    assert_eq!(rr[11], 0.0);
    assert!(ri[11].abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn independent_parts_are_probabilities(x in 0.02f64..0.6, i in 0.0f64..30.0, p in 0.0f64..0.5) {
        let c = cfg(x, p);
        let rr = povm_independent_part(&c, i, IndependentPart::Rr).unwrap();
        let ri = povm_independent_part(&c, i, IndependentPart::Ri).unwrap();
        for v in rr.iter().chain(&ri) {
            prop_assert!(*v >= 0.0 && *v <= 1.0 + 1e-12);
        }
        let total: f64 = rr.iter().chain(&ri).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "total {}", total);
    }

    #[test]
    fn cw_conditional_parts_are_normalized(x in 0.02f64..0.6, i in 0.0f64..30.0, p in 0.0f64..0.5, u in 0.0f64..1.0) {
        let c = cfg(x, p);
        let leak = x * u * (1.0 - 1e-12);
        let ir = povm_cond_part(&c, i, CwPart::Ir, leak).unwrap();
        let ii = povm_cond_part(&c, i, CwPart::Ii, leak).unwrap();
        for v in ir.iter().chain(&ii) {
            prop_assert!(*v >= 0.0 && *v <= 1.0 + 1e-12);
        }
        let total: f64 = ir.iter().chain(&ii).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "total {}", total);
    }

    #[test]
    fn small_afterpulse_probability_is_continuous(x in 0.05f64..0.4, i in 0.1f64..20.0) {
        let a = povm_r(&cfg(x, 0.0), i).unwrap();
        let b = povm_r(&cfg(x, 1e-9), i).unwrap();
        prop_assert!(max_diff(a.probs(), b.probs()) < 1e-7);
    }
}
