//! Event-level simulation of a click detector with nonparalyzable dead time
//! and afterpulses.
//!
//! Independent-window runs are split into fixed batches of windows; batch `b`
//! draws from the ChaCha stream `b` of the seed, so results do not depend on
//! the number of threads. Continuous-wave runs are one sequential trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::detector::DetectorConfig;
use crate::distribution::{CountDistribution, PhotonDistribution};
use crate::error::{Error, Result};
use crate::states::{photon_distribution, StateSpec};

/// Windows per independent batch.
const BATCH: usize = 1 << 14;

/// Light falling on the detector in each window.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Coherent light: homogeneous Poisson arrivals with mean `alpha_sq` per window.
    Coherent { alpha_sq: f64 },
    /// Phase-insensitive state given by its photon-number distribution; `k` is
    /// drawn per window and the photons are placed uniformly.
    Photons(PhotonDistribution<f64>),
}

impl Source {
    pub fn from_state(spec: &StateSpec<f64>) -> Result<Self> {
        match spec {
            StateSpec::Coherent { alpha } => Ok(Source::Coherent { alpha_sq: alpha.norm_sqr() }),
            other => Ok(Source::Photons(photon_distribution(other)?)),
        }
    }

    /// Mean incident photon number per window.
    pub fn mean_photons(&self) -> f64 {
        match self {
            Source::Coherent { alpha_sq } => *alpha_sq,
            Source::Photons(d) => d.mean(),
        }
    }
}

/// Whether detector state carries over between windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Independent,
    Cw,
}

/// Instant recovery and afterpulses at dead-time expiry, or smooth recovery
/// with delayed afterpulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingModel {
    Instant,
    Refined,
}

/// Run options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub mode: Mode,
    pub timing: TimingModel,
    /// Keep inter-pulse times.
    pub record_gaps: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { mode: Mode::Independent, timing: TimingModel::Instant, record_gaps: false }
    }
}

/// Output of a simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRecord {
    pub counts: Vec<u32>,
    /// Dead time leaked into each window (seconds); zero in independent mode.
    pub tau2_samples: Vec<f64>,
    /// Times between consecutive pulses (seconds), when recorded.
    pub gap_samples: Vec<f64>,
    pub seed: u64,
    pub n_windows: usize,
}

impl SimRecord {
    /// Relative frequencies of the counts `0…len-1`.
    pub fn histogram(&self, len: usize) -> Vec<f64> {
        let mut h = vec![0.0; len.max(self.max_count() + 1)];
        for &c in &self.counts {
            h[c as usize] += 1.0;
        }
        let n = self.counts.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / self.counts.len() as f64
    }
}

struct Params {
    tau_m: f64,
    tau_d: f64,
    p: f64,
    eta: f64,
    dark_rate: f64,
    tau_r: f64,
    tau_after: f64,
    refined: bool,
    record_gaps: bool,
}

impl Params {
    fn recovery(&self, s: f64) -> f64 {
        if self.tau_r > 0.0 {
            -(-s / self.tau_r).exp_m1()
        } else {
            1.0
        }
    }
}

/// Detector state along one trajectory, in absolute time.
struct Detector {
    /// End of the current dead time.
    live_from: f64,
    /// The afterpulse decision at `live_from` is still open.
    undecided: bool,
    /// Scheduled delayed afterpulse (refined model).
    ap_at: Option<f64>,
    pulsed: bool,
}

impl Detector {
    fn fresh(t0: f64) -> Self {
        Detector { live_from: t0, undecided: false, ap_at: None, pulsed: false }
    }

    fn pulse(&mut self, t: f64, prm: &Params, count: &mut u32, gaps: &mut Vec<f64>) {
        *count += 1;
        if prm.record_gaps {
            // measured from the end of the dead time so an instant afterpulse gives exactly τ_d
            if self.pulsed {
                gaps.push(prm.tau_d + (t - self.live_from));
            }
        }
        self.pulsed = true;
        self.live_from = t + prm.tau_d;
        self.undecided = true;
        self.ap_at = None;
    }

    /// Resolves afterpulse decisions and scheduled afterpulses strictly before `t`.
    fn advance_to<R: Rng>(&mut self, t: f64, prm: &Params, rng: &mut R, count: &mut u32, gaps: &mut Vec<f64>) {
        loop {
            if let Some(at) = self.ap_at {
                if at < t {
                    self.pulse(at, prm, count, gaps);
                    continue;
                }
                return;
            }
            if !(self.undecided && self.live_from < t) {
                return;
            }
            self.undecided = false;
            if prm.p > 0.0 && rng.random::<f64>() < prm.p {
                let e = self.live_from;
                if prm.refined {
                    self.ap_at = Some(e + afterpulse_delay(prm, rng));
                } else {
                    self.pulse(e, prm, count, gaps);
                }
            }
        }
    }

    fn arrival<R: Rng>(&mut self, a: f64, prm: &Params, rng: &mut R, count: &mut u32, gaps: &mut Vec<f64>) {
        self.advance_to(a, prm, rng, count, gaps);
        if self.ap_at.is_some() || a < self.live_from {
            return;
        }
        if prm.refined && prm.tau_r > 0.0 && rng.random::<f64>() >= prm.recovery(a - self.live_from) {
            return;
        }
        self.pulse(a, prm, count, gaps);
    }
}

/// Delay after dead-time expiry of a delayed afterpulse: first event of a
/// process with rate `η_r(s)/τ_after`, sampled by thinning.
fn afterpulse_delay<R: Rng>(prm: &Params, rng: &mut R) -> f64 {
    if prm.tau_after <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        s += e * prm.tau_after;
        if prm.tau_r <= 0.0 || rng.random::<f64>() < prm.recovery(s) {
            return s;
        }
    }
}

/// Sorted arrival times of primary events in `[t0, t0 + τ_m)`.
fn arrivals<R: Rng>(src: &Source, prm: &Params, t0: f64, rng: &mut R, buf: &mut Vec<f64>, sampler: &Option<Sampler>) {
    buf.clear();
    let t1 = t0 + prm.tau_m;
    let poisson_stream = |rate: f64, buf: &mut Vec<f64>, rng: &mut R| {
        if rate <= 0.0 {
            return;
        }
        let mut t = t0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / rate;
            if t >= t1 {
                break;
            }
            buf.push(t);
        }
    };
    match src {
        Source::Coherent { alpha_sq } => {
            poisson_stream((prm.eta * alpha_sq) / prm.tau_m + prm.dark_rate, buf, rng);
        }
        Source::Photons(_) => {
            let k = sampler.as_ref().expect("photon sampler").draw(rng);
            for _ in 0..k {
                if prm.eta >= 1.0 || rng.random::<f64>() < prm.eta {
                    buf.push(t0 + rng.random::<f64>() * prm.tau_m);
                }
            }
            poisson_stream(prm.dark_rate, buf, rng);
            buf.sort_by(f64::total_cmp);
        }
    }
}

/// Inverse-CDF sampler for a photon-number distribution.
struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(d: &PhotonDistribution<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = d.probs().iter().map(|p| {
            acc += p;
            acc
        });
        let mut cdf: Vec<f64> = cdf.collect();
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= total);
        Sampler { cdf }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn params(cfg: &DetectorConfig<f64>, src: &Source, opts: &SimOptions) -> Result<Params> {
    let p = cfg.afterpulse_probability(src.mean_photons())?;
    Ok(Params {
        tau_m: cfg.tau_m(),
        tau_d: cfg.tau_d(),
        p,
        eta: cfg.eta(),
        dark_rate: cfg.nu() / cfg.tau_m(),
        tau_r: cfg.tau_r(),
        tau_after: cfg.tau_after(),
        refined: opts.timing == TimingModel::Refined,
        record_gaps: opts.record_gaps,
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates `n_windows` measurement windows.
pub fn simulate(
    cfg: &DetectorConfig<f64>,
    source: &Source,
    n_windows: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimRecord> {
    if n_windows == 0 {
        return Err(Error::Input("at least one window is required".into()));
    }
    if let Source::Coherent { alpha_sq } = source {
        if !(*alpha_sq >= 0.0 && alpha_sq.is_finite()) {
            return Err(Error::Input(format!("intensity must be nonnegative, got {alpha_sq}")));
        }
    }
    let prm = params(cfg, source, opts)?;
    let sampler = match source {
        Source::Photons(d) => Some(Sampler::new(d)),
        Source::Coherent { .. } => None,
    };
    match opts.mode {
        Mode::Independent => {
            let n_batches = n_windows.div_ceil(BATCH);
            let parts: Vec<(Vec<u32>, Vec<f64>)> = (0..n_batches)
                .into_par_iter()
                .map(|b| {
                    let mut rng = rng_for(seed, b as u64);
                    let len = BATCH.min(n_windows - b * BATCH);
                    let mut counts = Vec::with_capacity(len);
                    let mut gaps = Vec::new();
                    let mut buf = Vec::new();
                    for _ in 0..len {
                        let mut det = Detector::fresh(0.0);
                        let mut c = 0;
                        arrivals(source, &prm, 0.0, &mut rng, &mut buf, &sampler);
                        for &a in &buf {
                            det.arrival(a, &prm, &mut rng, &mut c, &mut gaps);
                        }
                        det.advance_to(prm.tau_m, &prm, &mut rng, &mut c, &mut gaps);
                        counts.push(c);
                    }
                    (counts, gaps)
                })
                .collect();
            let mut counts = Vec::with_capacity(n_windows);
            let mut gap_samples = Vec::new();
            for (c, g) in parts {
                counts.extend(c);
                gap_samples.extend(g);
            }
            Ok(SimRecord { counts, tau2_samples: vec![0.0; n_windows], gap_samples, seed, n_windows })
        }
        Mode::Cw => {
            let mut rng = rng_for(seed, 0);
            let mut det = Detector::fresh(0.0);
            let mut counts = Vec::with_capacity(n_windows);
            let mut tau2 = Vec::with_capacity(n_windows);
            let mut gaps = Vec::new();
            let mut buf = Vec::new();
            for l in 0..n_windows {
                let t0 = l as f64 * prm.tau_m;
                let t1 = t0 + prm.tau_m;
                tau2.push((det.live_from - t0).clamp(0.0, prm.tau_d));
                let mut c = 0;
                arrivals(source, &prm, t0, &mut rng, &mut buf, &sampler);
                for &a in &buf {
                    det.arrival(a, &prm, &mut rng, &mut c, &mut gaps);
                }
                det.advance_to(t1, &prm, &mut rng, &mut c, &mut gaps);
                counts.push(c);
            }
            Ok(SimRecord { counts, tau2_samples: tau2, gap_samples: gaps, seed, n_windows })
        }
    }
}

/// Draws `n` counts from the probability vector `probs`.
pub fn sample_counts(probs: &[f64], n: usize, seed: u64) -> Vec<u32> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p.max(0.0);
            acc
        })
        .collect();
    let total = acc;
    cdf.iter_mut().for_each(|c| *c /= total);
    let mut rng = rng_for(seed, 0);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
        })
        .collect()
}

/// Right-continuous empirical distribution function.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("empirical CDF needs at least one sample".into()));
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::Input("samples contain NaN".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    /// Fraction of samples `≤ t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= t) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Sample quantile at level `q ∈ [0, 1]` (lower empirical inverse).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[i]
    }

    /// Kolmogorov distance `sup_t |F_emp(t) - F(t)|` to a continuous-from-the-right CDF,
    /// checked on both sides of every jump.
    pub fn sup_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let t = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == t {
                j += 1;
            }
            let model = f(t);
            let model_left = f(t - t.abs().max(1e-300) * 1e-12);
            d = d.max((j as f64 / n - model).abs()).max((i as f64 / n - model_left).abs());
            i = j;
        }
        d
    }
}

/// Half-width of the Dvoretzky–Kiefer–Wolfowitz band at confidence `1 - alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}
