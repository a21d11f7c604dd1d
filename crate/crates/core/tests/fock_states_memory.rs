use num_complex::Complex;
use photocount::fock_map::{pulse_stats_linear, FockMap, FockPart};
use photocount::multiwindow::{lambda_exact, lambda_q, recursion_exact, stationary_state};
use photocount::povm_independent::povm_r;
use photocount::states::{photon_distribution, poisson, squeezed_distribution};
use photocount::{CountDistribution, DetectorConfig, StateSpec};
use proptest::prelude::*;

fn cfg(x: f64, p: f64) -> DetectorConfig<f64> {
    DetectorConfig::with_params(1.0, x, 1.0, 0.0, p, 0.0).unwrap()
}

#[test]
fn fock_columns_are_normalized() {
    for p in [0.0, 0.1, 0.3] {
        let c = cfg(0.09, p);
        for part in [FockPart::RTotal, FockPart::ITotal] {
            let m = FockMap::build(&c, part, 40).unwrap();
            for k in 0..=40 {
                let col = m.column(k);
                assert!(col.iter().all(|v| *v >= 0.0));
                let s: f64 = col.iter().sum();
                assert!((s - 1.0).abs() < 1e-10, "{part:?} p {p} k {k}: {s}");
            }
        }
    }
}

#[test]
fn no_more_pulses_than_photons_without_afterpulses() {
    let c = cfg(0.09, 0.0);
    for part in [FockPart::Rr, FockPart::Ri, FockPart::IrAvg, FockPart::IiAvg] {
        let m = FockMap::build(&c, part, 30).unwrap();
        for k in 0..=30 {
            for n in (k + 1)..m.n_rows() {
                assert!(m.get(n, k).abs() < 1e-13, "{part:?} n {n} k {k}: {}", m.get(n, k));
            }
        }
    }
}

#[test]
fn regular_and_irregular_parts_split_each_column() {
    let c = cfg(0.09, 0.1);
    let rr = FockMap::build(&c, FockPart::Rr, 25).unwrap();
    let ri = FockMap::build(&c, FockPart::Ri, 25).unwrap();
    let total = FockMap::build(&c, FockPart::RTotal, 25).unwrap();
    for k in 0..=25 {
        for n in 0..total.n_rows() {
            assert!((rr.get(n, k) + ri.get(n, k) - total.get(n, k)).abs() < 1e-14);
        }
    }
}

#[test]
fn attenuated_fock_without_loss_is_a_number_state() {
    for l in [0, 1, 5, 17] {
        let d = photon_distribution(&StateSpec::AttenuatedFock { l, eta: 1.0 }).unwrap();
        for (k, v) in d.probs().iter().enumerate() {
            assert_eq!(*v, if k == l { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn squeezed_extraction_does_not_depend_on_the_contour() {
    for (alpha, r, eta) in [(0.0f64, 0.5f64, 1.0f64), (4.0, 0.69, 1.0), (2.0, 1.0, 0.7)] {
        let a = squeezed_distribution(alpha, r, eta, 0.90, 1e-12).unwrap();
        let b = squeezed_distribution(alpha, r, eta, 0.98, 1e-12).unwrap();
        let n = a.probs().len().min(b.probs().len());
        for k in 0..n {
            assert!((a.probs()[k] - b.probs()[k]).abs() < 1e-9, "alpha {alpha} r {r} k {k}");
        }
    }
}

#[test]
fn stationary_memory_is_reached_geometrically() {
    // a long dead time keeps the memory of the first window visible for several steps
    let c = cfg(0.45, 0.1);
    let seq = vec![1.5; 40];
    let states = recursion_exact(&c, &seq, 64).unwrap();
    let steps: Vec<f64> = states.windows(2).map(|w| w[1].distance(&w[0])).collect();
    let ratios: Vec<f64> = steps.windows(2).filter(|w| w[0] > 1e-12).map(|w| w[1] / w[0]).collect();
    assert!(ratios.len() >= 3, "{steps:?}");
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 0.9, "{ratios:?}");
    let fixed = stationary_state(&c, 1.5, 64).unwrap();
    assert!(states.last().unwrap().distance(&fixed) < 1e-10);
}

#[test]
fn two_window_sequences_are_normalized() {
    let c = cfg(0.09, 0.1);
    for (i1, i2) in [(0.5, 8.0), (8.0, 0.5), (3.0, 3.0), (0.0, 12.0)] {
        let s: f64 = (0..=12).map(|n| lambda_q(&c, &[i1, i2], n, 3).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-10, "uniform {i1} {i2}: {s}");
        let states = recursion_exact(&c, &[i1, i2], 64).unwrap();
        let d = lambda_exact(&c, states.last().unwrap(), i2).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-10, "exact {i1} {i2}: {}", d.total());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn states_are_normalized(kind in 0usize..4, a in 0.0f64..4.0, r in 0.0f64..1.0, eta in 0.0f64..=1.0, l in 0usize..30) {
        let spec = match kind {
            0 => StateSpec::Coherent { alpha: Complex::new(a, a / 3.0) },
            1 => StateSpec::Thermal { n_th: a * 2.0 },
            2 => StateSpec::AttenuatedFock { l, eta },
            _ => StateSpec::SqueezedCoherent { alpha: Complex::new(a, 0.0), r, eta },
        };
        let d = photon_distribution(&spec).unwrap();
        prop_assert!(d.probs().iter().all(|v| *v >= 0.0));
        prop_assert!((d.total() - 1.0).abs() < 1e-10, "{:?}: {}", spec, d.total());
    }

    #[test]
    fn fock_map_on_poisson_reproduces_the_q_symbols(i in 0.1f64..9.0, x in 0.05f64..0.4, p in 0.0f64..0.3) {
        let c = cfg(x, p);
        let via_fock = pulse_stats_linear(&c, &poisson(i, 1e-14).unwrap()).unwrap();
        let direct = povm_r(&c, i).unwrap();
        for (a, b) in via_fock.probs().iter().zip(direct.probs()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
