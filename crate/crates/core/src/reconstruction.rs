//! Geometric reconstruction of observable expectations from the pulse
//! statistics of independent windows, and its application to unbalanced
//! homodyne detection.
//!
//! Everything here assumes no afterpulses, no dark counts and an integer
//! `τ_m/τ_d = N`. The detector efficiency is folded into the state, so the
//! measurement operators carry only the adjusting efficiencies `η_rr(n)`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::detector::DetectorConfig;
use crate::distribution::CountDistribution;
use crate::error::{Error, Result};
use crate::fock_map::pulse_stats_linear;
use crate::montecarlo::sample_counts;
use crate::special::binomial;
use crate::states::{photon_distribution, StateSpec};

/// Largest accepted 1-norm condition number of the inverted metric block.
pub const MAX_CONDITION: f64 = 1e12;

/// Checks the preconditions and returns `N`.
fn measurement_size(cfg: &DetectorConfig<f64>) -> Result<usize> {
    let g = cfg.geometry();
    if !g.integer_ratio {
        return Err(Error::Config("reconstruction requires an integer ratio tau_m / tau_d".into()));
    }
    if cfg.p0() != 0.0 || cfg.r_ap() != 0.0 || cfg.nu() != 0.0 {
        return Err(Error::Config("reconstruction requires a detector without afterpulses and dark counts".into()));
    }
    Ok(g.n_whole)
}

/// `Tr(F̂_k[a] F̂_l[b])` for the photon-number-resolving elements with efficiencies `a` and `b`.
pub fn trace_ff(k: usize, a: f64, l: usize, b: f64) -> f64 {
    let denom = a + b - a * b;
    let mut sum = 0.0;
    for i in k.max(l)..=(k + l) {
        let j = 2 * i - k - l;
        sum += binomial::<f64>(i, j)
            * binomial::<f64>(j, i - k)
            * a.powi(k as i32)
            * b.powi(l as i32)
            * (1.0 - a).powi((i - k) as i32)
            * (1.0 - b).powi((i - l) as i32)
            / denom.powi(i as i32 + 1);
    }
    sum
}

/// Covariant and contravariant metric tensors of the measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensors {
    n: usize,
    covariant: Vec<Vec<f64>>,
    contravariant: Vec<Vec<f64>>,
    condition: f64,
}

impl MetricTensors {
    /// Index `N` of the singular element `g_NN = ∞`.
    pub fn singular_index(&self) -> usize {
        self.n
    }

    /// `g_nm` for `n, m = 0…N`; `g_NN` is infinite.
    pub fn covariant(&self, n: usize, m: usize) -> f64 {
        self.covariant[n][m]
    }

    /// `g^nm` for `n, m = 0…N`; row and column `N` vanish.
    pub fn contravariant(&self, n: usize, m: usize) -> f64 {
        self.contravariant[n][m]
    }

    /// 1-norm condition number of the inverted `N×N` block.
    pub fn condition(&self) -> f64 {
        self.condition
    }
}

fn group_trace(eta: &[f64], n: usize, m: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..=n {
        for l in 0..=m {
            sum += trace_ff(k, eta[n], l, eta[m]);
        }
    }
    sum
}

/// Metric tensors from the closed-form traces, with `g^nm` from inverting the leading block.
pub fn metric_tensors(cfg: &DetectorConfig<f64>) -> Result<MetricTensors> {
    let n = measurement_size(cfg)?;
    let eta: Vec<f64> = (0..=n).map(|j| cfg.eta_rr(j)).collect::<Result<_>>()?;
    // H[n][m] = Σ_{k≤n, l≤m} Tr(F̂_k[η_n] F̂_l[η_m]), the trace of the cumulative elements
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for a in 0..=n {
        for b in 0..=n {
            h[a][b] = if a == n && b == n { f64::INFINITY } else { group_trace(&eta, a, b) };
        }
    }
    let mut g = vec![vec![0.0; n + 1]; n + 1];
    for a in 0..=n {
        for b in 0..=n {
            if a == n && b == n {
                g[a][b] = f64::INFINITY;
                continue;
            }
            let mut v = h[a][b];
            if b > 0 {
                v -= h[a][b - 1];
            }
            if a > 0 {
                v -= h[a - 1][b];
            }
            if a > 0 && b > 0 {
                v += h[a - 1][b - 1];
            }
            g[a][b] = v;
        }
    }
    let block = DMatrix::from_fn(n, n, |i, j| g[i][j]);
    let inv = block.clone().full_piv_lu().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
    let condition = one_norm(&block) * one_norm(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let mut contravariant = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            contravariant[i][j] = inv[(i, j)];
        }
    }
    Ok(MetricTensors { n, covariant: g, contravariant, condition })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_ordering(s: f64) -> Result<()> {
    if !(-1.0..=0.0).contains(&s) {
        return Err(Error::Domain(format!("ordering parameter must lie in [-1, 0], got {s}")));
    }
    Ok(())
}

/// `2/(π(1-s))`, the value of `P(0;s)` for the vacuum.
fn kernel_scale(s: f64) -> f64 {
    2.0 / (std::f64::consts::PI * (1.0 - s))
}

/// `Tr[P̂(0;s) Π̂_n]` for `n = 0…N-1`.
pub fn kernel_covariant(cfg: &DetectorConfig<f64>, s: f64, n: usize) -> Result<f64> {
    let size = measurement_size(cfg)?;
    check_ordering(s)?;
    if n >= size {
        return Err(Error::Domain(format!("component index {n} must be below N = {size}")));
    }
    let partial = |m: usize| -> Result<f64> {
        let e = cfg.eta_rr(m)?;
        let d = 2.0 - (1.0 + s) * e;
        Ok((0..=m).map(|k| (-e * (s + 1.0)).powi(k as i32) * (1.0 - s) / d.powi(k as i32 + 1)).sum())
    };
    let mut v = partial(n)?;
    if n > 0 {
        v -= partial(n - 1)?;
    }
    Ok(kernel_scale(s) * v)
}

/// `Tr[P̂(0;s)²]`, infinite at `s = 0`.
pub fn kernel_hs_norm_sq(s: f64) -> Result<f64> {
    check_ordering(s)?;
    let q = (1.0 + s) / (1.0 - s);
    Ok(kernel_scale(s).powi(2) / (1.0 - q * q))
}

/// Coordinates of an observable with respect to the measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableCoords {
    /// `Tr(Â Π̂_m)` for `m = 0…N-1`.
    pub covariant: Vec<f64>,
    /// `Aⁿ = Σ_m g^nm Tr(Â Π̂_m)`.
    pub contravariant: Vec<f64>,
    /// `Tr(Â²)`.
    pub hs_norm_sq: f64,
}

impl ObservableCoords {
    pub fn new(metric: &MetricTensors, covariant: Vec<f64>, hs_norm_sq: f64) -> Result<Self> {
        let n = metric.singular_index();
        if covariant.len() != n {
            return Err(Error::Input(format!("expected {n} covariant components, got {}", covariant.len())));
        }
        if covariant.iter().any(|v| !v.is_finite()) || hs_norm_sq.is_nan() {
            return Err(Error::Input("observable coordinates must be finite".into()));
        }
        let contravariant = (0..n).map(|i| (0..n).map(|j| metric.contravariant(i, j) * covariant[j]).sum()).collect();
        Ok(ObservableCoords { covariant, contravariant, hs_norm_sq })
    }

    /// Coordinates of `P̂(0;s)`.
    pub fn phase_space_kernel(cfg: &DetectorConfig<f64>, metric: &MetricTensors, s: f64) -> Result<Self> {
        let cov = (0..metric.singular_index()).map(|n| kernel_covariant(cfg, s, n)).collect::<Result<_>>()?;
        Self::new(metric, cov, kernel_hs_norm_sq(s)?)
    }

    /// Squared HS norm captured by the measurement, `Σ g^nm A_n A_m`.
    pub fn captured(&self) -> f64 {
        self.covariant.iter().zip(&self.contravariant).map(|(a, b)| a * b).sum()
    }

    /// Bound on the residual term: `sqrt(Tr Â² - Σ g^nm A_n A_m)`.
    pub fn mismatch(&self) -> f64 {
        (self.hs_norm_sq - self.captured()).max(0.0).sqrt()
    }

    /// Squared mismatch divided by `Tr(Â²)`.
    pub fn relative_mismatch(&self) -> f64 {
        if self.hs_norm_sq.is_infinite() {
            return 1.0;
        }
        ((self.hs_norm_sq - self.captured()) / self.hs_norm_sq).max(0.0)
    }
}

/// Estimated expectation value and bound on its systematic error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub mismatch_bound: f64,
    pub relative_mismatch: f64,
}

/// `Σ_n Aⁿ 𝒫_n` together with the HS mismatch bound. Pulse numbers `≥ N` do not contribute.
pub fn expectation(coords: &ObservableCoords, pulses: &[f64]) -> Expectation {
    let value = coords.contravariant.iter().zip(pulses).map(|(a, p)| a * p).sum();
    Expectation { value, mismatch_bound: coords.mismatch(), relative_mismatch: coords.relative_mismatch() }
}

/// Relative HS mismatch of `P̂(α;s)`, independent of `α`.
pub fn relative_hs_mismatch(cfg: &DetectorConfig<f64>, s: f64) -> Result<f64> {
    let metric = metric_tensors(cfg)?;
    Ok(ObservableCoords::phase_space_kernel(cfg, &metric, s)?.relative_mismatch())
}

/// State reaching an ideal detector after the detector loss `eta_det`,
/// displaced in phase space by `-a` (real).
pub fn displaced_state(spec: &StateSpec<f64>, eta_det: f64, a: f64) -> Result<StateSpec<f64>> {
    if !(0.0..=1.0).contains(&eta_det) {
        return Err(Error::Input(format!("detector efficiency must lie in [0, 1], got {eta_det}")));
    }
    match *spec {
        StateSpec::Coherent { alpha } => Ok(StateSpec::Coherent { alpha: alpha * eta_det.sqrt() - a }),
        StateSpec::SqueezedCoherent { alpha, r, eta } => {
            let total = eta * eta_det;
            if a != 0.0 && total == 0.0 {
                return Ok(StateSpec::Coherent { alpha: Complex::new(-a, 0.0) });
            }
            let shift = if a == 0.0 { 0.0 } else { a / total.sqrt() };
            Ok(StateSpec::SqueezedCoherent { alpha: alpha - shift, r, eta: total })
        }
        StateSpec::Thermal { n_th } if a == 0.0 => Ok(StateSpec::Thermal { n_th: n_th * eta_det }),
        StateSpec::AttenuatedFock { l, eta } if a == 0.0 => Ok(StateSpec::AttenuatedFock { l, eta: eta * eta_det }),
        _ => Err(Error::Unsupported("displacement is only available for coherent and squeezed states".into())),
    }
}

fn ideal_detector(cfg: &DetectorConfig<f64>) -> Result<DetectorConfig<f64>> {
    measurement_size(cfg)?;
    DetectorConfig::new(cfg.tau_m(), cfg.tau_d())
}

/// Exact pulse distribution `𝒫_n(a)` of the state displaced to the phase-space point `a`.
pub fn pulse_distribution_at(cfg: &DetectorConfig<f64>, spec: &StateSpec<f64>, a: f64) -> Result<Vec<f64>> {
    let ideal = ideal_detector(cfg)?;
    let photons = photon_distribution(&displaced_state(spec, cfg.eta(), a)?)?;
    Ok(pulse_stats_linear(&ideal, &photons)?.probs().to_vec())
}

/// One point of a reconstructed phase-space distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionPoint {
    pub alpha: f64,
    pub estimate: f64,
    /// Statistical standard error, zero for exact pulse distributions.
    pub stderr: f64,
    pub mismatch_bound: f64,
}

/// Reconstruction of `P(α;s)` on real displacements from `samples_per_point`
/// simulated pulse counts per point. Point `i` uses a seed derived from `seed` and `i`.
pub fn reconstruct_phase_space(
    cfg: &DetectorConfig<f64>,
    s: f64,
    spec: &StateSpec<f64>,
    alpha_grid: &[f64],
    samples_per_point: usize,
    seed: u64,
) -> Result<Vec<ReconstructionPoint>> {
    if samples_per_point == 0 {
        return Err(Error::Input("samples_per_point must be positive".into()));
    }
    let metric = metric_tensors(cfg)?;
    let coords = ObservableCoords::phase_space_kernel(cfg, &metric, s)?;
    let bound = coords.mismatch();
    alpha_grid
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let pulses = pulse_distribution_at(cfg, spec, a)?;
            let point_seed = seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let counts = sample_counts(&pulses, samples_per_point, point_seed);
            let m = samples_per_point as f64;
            let vals = counts.iter().map(|&c| coords.contravariant.get(c as usize).copied().unwrap_or(0.0));
            let (sum, sum_sq) = vals.fold((0.0, 0.0), |(s1, s2), v| (s1 + v, s2 + v * v));
            let mean = sum / m;
            let var = if samples_per_point > 1 { ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
            Ok(ReconstructionPoint { alpha: a, estimate: mean, stderr: (var / m).sqrt(), mismatch_bound: bound })
        })
        .collect()
}

/// Infinite-sample reconstruction using the exact pulse distributions.
pub fn reconstruct_exact(
    cfg: &DetectorConfig<f64>,
    s: f64,
    spec: &StateSpec<f64>,
    alpha_grid: &[f64],
) -> Result<Vec<ReconstructionPoint>> {
    let metric = metric_tensors(cfg)?;
    let coords = ObservableCoords::phase_space_kernel(cfg, &metric, s)?;
    alpha_grid
        .iter()
        .map(|&a| {
            let e = expectation(&coords, &pulse_distribution_at(cfg, spec, a)?);
            Ok(ReconstructionPoint { alpha: a, estimate: e.value, stderr: 0.0, mismatch_bound: e.mismatch_bound })
        })
        .collect()
}

/// Analytic `P(α;s)` of a Gaussian state after the detector loss `eta_det`.
pub fn gaussian_quasiprobability(spec: &StateSpec<f64>, eta_det: f64, alpha: Complex<f64>, s: f64) -> Result<f64> {
    check_ordering(s)?;
    let (centre, vx, vy) = match displaced_state(spec, eta_det, 0.0)? {
        StateSpec::Coherent { alpha } => (alpha, 0.25, 0.25),
        StateSpec::Thermal { n_th } => (Complex::new(0.0, 0.0), (2.0 * n_th + 1.0) / 4.0, (2.0 * n_th + 1.0) / 4.0),
        StateSpec::SqueezedCoherent { alpha, r, eta } => {
            (alpha * eta.sqrt(), (eta * (-2.0 * r).exp() + 1.0 - eta) / 4.0, (eta * (2.0 * r).exp() + 1.0 - eta) / 4.0)
        }
        StateSpec::AttenuatedFock { .. } => {
            return Err(Error::Unsupported("Fock states have no Gaussian quasiprobability".into()))
        }
    };
    let (sx, sy) = (vx - s / 4.0, vy - s / 4.0);
    let d = alpha - centre;
    Ok((-d.re * d.re / (2.0 * sx) - d.im * d.im / (2.0 * sy)).exp() / (2.0 * std::f64::consts::PI * (sx * sy).sqrt()))
}
