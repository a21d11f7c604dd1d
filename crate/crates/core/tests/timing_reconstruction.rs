use num_complex::Complex;
use photocount::reconstruction::{
    gaussian_quasiprobability, metric_tensors, reconstruct_exact, reconstruct_phase_space, trace_ff,
};
use photocount::timing::{cdf_gap, pdf_gap, GapModel, TimingParams};
use photocount::{DetectorConfig, StateSpec};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = TimingParams> {
    (1.0f64..100.0, 1.0f64..100.0, 0.0f64..0.6, 0.0f64..20.0, 0.0f64..10.0).prop_map(|(ph, d, p, a, r)| TimingParams {
        tau_phot: ph * 1e-9,
        tau_d: d * 1e-9,
        p,
        tau_after: a * 1e-9,
        tau_r: r * 1e-9,
    })
}

fn brute_trace(k: usize, a: f64, l: usize, b: f64) -> f64 {
    let binom = |n: usize, r: usize| (0..r).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
    (k.max(l)..4000)
        .map(|i| {
            binom(i, k)
                * a.powi(k as i32)
                * (1.0 - a).powi((i - k) as i32)
                * binom(i, l)
                * b.powi(l as i32)
                * (1.0 - b).powi((i - l) as i32)
        })
        .sum()
}

/// s-ordered quasiprobability of a squeezed vacuum, squeezed along the real axis.
fn squeezed_vacuum_quasi(r: f64, s: f64, x: f64, y: f64) -> f64 {
    let vx = ((-2.0 * r).exp() - s) / 4.0;
    let vy = ((2.0 * r).exp() - s) / 4.0;
    (-x * x / (2.0 * vx) - y * y / (2.0 * vy)).exp() / (2.0 * std::f64::consts::PI * (vx * vy).sqrt())
}

fn ideal(tau_d: f64) -> DetectorConfig<f64> {
    DetectorConfig::new(1.0, tau_d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gap_cdf_is_a_distribution_function(prm in params(), refined in any::<bool>()) {
        let model = if refined { GapModel::Refined } else { GapModel::Basic };
        let top = prm.tau_d + 30.0 * (prm.tau_phot + prm.tau_after);
        let mut last = 0.0;
        for i in 0..10_000 {
            let f = cdf_gap(&prm, top * i as f64 / 9_999.0, model);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn refined_density_is_the_derivative(prm in params(), u in 0.05f64..5.0) {
        prop_assume!(prm.tau_after > 0.05e-9 && prm.tau_r > 0.05e-9);
        let t = prm.tau_d + u * prm.tau_phot.min(prm.tau_after);
        let h = t * 1e-6;
        let fd = (cdf_gap(&prm, t + h, GapModel::Refined) - cdf_gap(&prm, t - h, GapModel::Refined)) / (2.0 * h);
        let pdf = pdf_gap(&prm, t, GapModel::Refined);
        prop_assert!((fd - pdf).abs() <= 1e-5 * pdf.abs().max(1.0 / prm.tau_phot * 1e-3), "{} vs {}", fd, pdf);
    }

    #[test]
    fn group_traces_match_fock_sums(k in 0usize..10, l in 0usize..10, a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let want = brute_trace(k, a, l, b);
        prop_assert!((trace_ff(k, a, l, b) - want).abs() <= 1e-12 * want.max(1e-300) + 1e-15);
    }

    #[test]
    fn reconstruction_is_displacement_covariant(beta in -1.0f64..1.0, shift in -0.8f64..0.8, point in -1.0f64..1.0) {
        let c = ideal(0.125);
        let a = reconstruct_exact(&c, -0.7, &StateSpec::Coherent { alpha: Complex::new(beta, 0.0) }, &[point]).unwrap();
        let b = reconstruct_exact(&c, -0.7, &StateSpec::Coherent { alpha: Complex::new(beta + shift, 0.0) }, &[point + shift]).unwrap();
        prop_assert!((a[0].estimate - b[0].estimate).abs() < 1e-12);
        let sq = |alpha: f64| StateSpec::SqueezedCoherent { alpha: Complex::new(alpha, 0.0), r: 0.4, eta: 1.0 };
        let a = reconstruct_exact(&c, -0.7, &sq(beta), &[point]).unwrap();
        let b = reconstruct_exact(&c, -0.7, &sq(beta + shift), &[point + shift]).unwrap();
        prop_assert!((a[0].estimate - b[0].estimate).abs() < 1e-10);
    }
}

#[test]
fn metric_is_symmetric_with_a_trivial_vacuum_row() {
    for n in [4, 8, 12] {
        let m = metric_tensors(&ideal(1.0 / n as f64)).unwrap();
        assert_eq!(m.singular_index(), n);
        assert!((m.covariant(0, 0) - 1.0).abs() < 1e-14);
        for i in 1..n {
            assert!(m.covariant(0, i).abs() < 1e-14);
            for j in 0..n {
                assert!((m.covariant(i, j) - m.covariant(j, i)).abs() <= 1e-13 * m.covariant(i, j).abs().max(1.0));
                let id: f64 = (0..n).map(|k| m.contravariant(i, k) * m.covariant(k, j)).sum();
                assert!((id - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8, "N {n} ({i},{j}): {id}");
            }
        }
    }
}

#[test]
fn squeezed_vacuum_quasiprobability_is_recovered() {
    let c = ideal(0.125);
    let spec = StateSpec::SqueezedCoherent { alpha: Complex::new(0.0, 0.0), r: 0.5, eta: 1.0 };
    for s in [-0.9, -0.8, -0.5] {
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let pts = reconstruct_exact(&c, s, &spec, &grid).unwrap();
        for p in &pts {
            let want = squeezed_vacuum_quasi(0.5, s, p.alpha, 0.0);
            let analytic = gaussian_quasiprobability(&spec, 1.0, Complex::new(p.alpha, 0.0), s).unwrap();
            assert!((analytic - want).abs() < 1e-12, "s {s} alpha {}: {analytic} vs {want}", p.alpha);
            assert!((p.estimate - want).abs() <= p.mismatch_bound, "s {s} alpha {}: {} vs {want}", p.alpha, p.estimate);
        }
        let y = gaussian_quasiprobability(&spec, 1.0, Complex::new(0.3, 0.6), s).unwrap();
        assert!((y - squeezed_vacuum_quasi(0.5, s, 0.3, 0.6)).abs() < 1e-12);
    }
}

#[test]
fn sampled_reconstruction_is_reproducible_and_unbiased() {
    let c = ideal(0.125);
    let spec = StateSpec::Coherent { alpha: Complex::new(0.4, 0.0) };
    let grid = [-0.5, 0.0, 0.4, 1.0];
    let a = reconstruct_phase_space(&c, -0.8, &spec, &grid, 40_000, 1).unwrap();
    let b = reconstruct_phase_space(&c, -0.8, &spec, &grid, 40_000, 1).unwrap();
    assert_eq!(a, b);
    let exact = reconstruct_exact(&c, -0.8, &spec, &grid).unwrap();
    for (p, e) in a.iter().zip(&exact) {
        // the vacuum point never clicks, so its sampling error vanishes
        assert!((p.estimate - e.estimate).abs() <= (5.0 * p.stderr).max(1e-10), "{p:?} vs {e:?}");
    }
}
