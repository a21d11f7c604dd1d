use photocount::montecarlo::{dkw_epsilon, simulate, EmpiricalCdf, Mode, SimOptions, Source, TimingModel};
use photocount::states::photon_distribution;
use photocount::timing::{cdf_gap, GapModel, TimingParams};
use photocount::{DetectorConfig, StateSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cfg(x: f64, p: f64) -> DetectorConfig<f64> {
    DetectorConfig::with_params(1.0, x, 1.0, 0.0, p, 0.0).unwrap()
}

#[test]
fn leaked_dead_time_lowers_the_mean_count() {
    let c = cfg(0.09, 0.0);
    let src = Source::Coherent { alpha_sq: 4.0 };
    let ind = simulate(&c, &src, 1_000_000, 21, &SimOptions::default()).unwrap();
    let cw = simulate(&c, &src, 1_000_000, 22, &SimOptions { mode: Mode::Cw, ..Default::default() }).unwrap();
    let sigma = ((ind.variance() + cw.variance()) / 1e6).sqrt();
    assert!(ind.mean() - cw.mean() > 3.0 * sigma, "{} vs {} (sigma {sigma})", ind.mean(), cw.mean());
}

#[test]
fn cw_window_statistics_do_not_depend_on_the_index() {
    // counts at window indices 10..=20 over many independent trajectories
    let c = cfg(0.09, 0.1);
    let src = Source::Coherent { alpha_sq: 4.0 };
    let opts = SimOptions { mode: Mode::Cw, ..Default::default() };
    let trajectories = 20_000;
    let mut table = vec![vec![0.0f64; 13]; 11];
    for seed in 0..trajectories {
        let rec = simulate(&c, &src, 21, 50_000 + seed, &opts).unwrap();
        for (row, &n) in table.iter_mut().zip(&rec.counts[10..]) {
            row[n as usize] += 1.0;
        }
    }
    // keep categories with enough expected mass
    let col_sums: Vec<f64> = (0..13).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let keep: Vec<usize> = (0..13).filter(|&j| col_sums[j] >= 5.0 * 11.0).collect();
    let total: f64 = keep.iter().map(|&j| col_sums[j]).sum();
    let mut chi2 = 0.0;
    for row in &table {
        let row_sum: f64 = keep.iter().map(|&j| row[j]).sum();
        for &j in &keep {
            let expected = row_sum * col_sums[j] / total;
            chi2 += (row[j] - expected).powi(2) / expected;
        }
    }
    let dof = ((table.len() - 1) * (keep.len() - 1)) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 {chi2} with {dof} dof, p {p_value}");
}

#[test]
fn records_respect_the_detector_limits() {
    let x = 0.09;
    let c = DetectorConfig::with_params(1.0, x, 1.0, 0.0, 0.2, 0.0).unwrap().with_timing(0.002, 0.01).unwrap();
    for timing in [TimingModel::Instant, TimingModel::Refined] {
        for (mode, src) in [
            (Mode::Independent, Source::Coherent { alpha_sq: 30.0 }),
            (Mode::Cw, Source::Photons(photon_distribution(&StateSpec::Thermal { n_th: 10.0 }).unwrap())),
        ] {
            let rec = simulate(&c, &src, 20_000, 3, &SimOptions { mode, timing, record_gaps: true }).unwrap();
            assert!(rec.counts.iter().all(|&n| n <= 12));
            assert!(rec.tau2_samples.iter().all(|&t| (0.0..x).contains(&t)));
            let min_gap = rec.gap_samples.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min_gap >= x * (1.0 - 1e-12), "{timing:?} {mode:?}: {min_gap}");
        }
    }
}

#[test]
fn photon_sources_are_reproducible() {
    let c = cfg(0.09, 0.1);
    let src = Source::Photons(photon_distribution(&StateSpec::Thermal { n_th: 3.0 }).unwrap());
    for mode in [Mode::Independent, Mode::Cw] {
        let opts = SimOptions { mode, record_gaps: true, ..Default::default() };
        let a = simulate(&c, &src, 50_000, 9, &opts).unwrap();
        let b = simulate(&c, &src, 50_000, 9, &opts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, simulate(&c, &src, 50_000, 10, &opts).unwrap().counts);
    }
}

#[test]
fn simulated_gaps_follow_the_refined_law() {
    let ns = 1e-9;
    let truth =
        TimingParams { tau_phot: 48.77 * ns, tau_d: 60.54 * ns, p: 0.0972, tau_after: 2.2 * ns, tau_r: 0.12 * ns };
    let tau_m = 1e-6;
    let c = DetectorConfig::with_params(tau_m, truth.tau_d, 1.0, 0.0, truth.p, 0.0)
        .unwrap()
        .with_timing(truth.tau_r, truth.tau_after)
        .unwrap();
    let opts = SimOptions { mode: Mode::Cw, timing: TimingModel::Refined, record_gaps: true };
    let rec = simulate(&c, &Source::Coherent { alpha_sq: tau_m / truth.tau_phot }, 12_000, 17, &opts).unwrap();
    let gaps = &rec.gap_samples[..100_000];
    let emp = EmpiricalCdf::new(gaps).unwrap();
    let d = emp.sup_distance(|t| cdf_gap(&truth, t, GapModel::Refined));
    assert!(d < dkw_epsilon(gaps.len(), 0.01), "sup distance {d}");
}
