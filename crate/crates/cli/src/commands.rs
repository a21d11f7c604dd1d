//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use num_complex::Complex;
use serde::Serialize;

use photocount::fock_map::{pulse_stats_cw, pulse_stats_linear};
use photocount::montecarlo::{simulate, EmpiricalCdf, Mode, SimOptions, Source, TimingModel};
use photocount::multiwindow::{cw_pulse_distribution, cw_pulse_distribution_exact, q_stationary_uniform};
use photocount::povm_independent::povm_r;
use photocount::reconstruction::{
    gaussian_quasiprobability, metric_tensors, reconstruct_exact, reconstruct_phase_space, relative_hs_mismatch,
};
use photocount::states::photon_distribution;
use photocount::timing::{cdf_gap, fit_gap_cdf, flux_from_mean, GapModel, TimingParams, FIT_GRID};
use photocount::validation::{run_criterion, CRITERIA};
use photocount::{mandel_q, total_variation, CountDistribution, DetectorConfig, StateSpec};

use crate::config::{Format, ParamsBlock, RunConfig, SimMode, StatsMode, TimingKind};
use crate::io::{csv_table, gaps_from_json, gaps_from_numbers, parse_numbers, write_atomic, write_json};

/// How a successful command run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
    ValidationFailed,
}

/// Output directory and format after flag overrides.
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&self, name: &str, text: String) -> anyhow::Result<()> {
        if self.format == Format::Csv {
            write_atomic(&self.path(name), text.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct DistSummary {
    mean: f64,
    variance: f64,
    mandel_q: Option<f64>,
    total: f64,
    probabilities: Vec<f64>,
}

impl DistSummary {
    fn of<D: CountDistribution<f64>>(d: &D) -> Self {
        DistSummary {
            mean: d.mean(),
            variance: d.variance(),
            mandel_q: mandel_q(d).ok(),
            total: d.total(),
            probabilities: d.probs().to_vec(),
        }
    }
}

fn prob_table(probs: &[f64]) -> String {
    csv_table(&["n", "probability"], probs.iter().enumerate().map(|(n, p)| vec![n as f64, *p]))
}

fn coherent_intensity(spec: &StateSpec<f64>) -> Option<f64> {
    match spec {
        StateSpec::Coherent { alpha } => Some(alpha.norm_sqr()),
        _ => None,
    }
}

/// Analytic pulse distribution of `mode`; coherent states use the Q-symbol route.
fn analytic_pulses(
    cfg: &DetectorConfig<f64>,
    spec: &StateSpec<f64>,
    mode: StatsMode,
    depth: Option<usize>,
    grid: usize,
) -> anyhow::Result<photocount::PulseDistribution<f64>> {
    let coherent = coherent_intensity(spec);
    Ok(match (mode, coherent) {
        (StatsMode::Independent, Some(i)) => povm_r(cfg, i)?,
        (StatsMode::CwUniform, Some(i)) => cw_pulse_distribution(cfg, i, depth)?,
        (StatsMode::CwExact, Some(i)) => cw_pulse_distribution_exact(cfg, i, grid)?,
        (StatsMode::Independent, None) => pulse_stats_linear(cfg, &photon_distribution(spec)?)?,
        (StatsMode::CwUniform, None) => pulse_stats_cw(cfg, &photon_distribution(spec)?, depth)?,
        (StatsMode::CwExact, None) => bail!("cw-exact statistics need a coherent state"),
    })
}

#[derive(Serialize)]
struct ModeSummary {
    mode: &'static str,
    #[serde(flatten)]
    dist: DistSummary,
}

#[derive(Serialize)]
struct StatsEnvelope<'a> {
    config: &'a RunConfig,
    photons: DistSummary,
    pulses: Vec<ModeSummary>,
}

pub fn stats(run: &RunConfig, out: &Output) -> anyhow::Result<Status> {
    let cfg = run.detector()?;
    let spec = run.state()?;
    let task = &run.task.stats;
    let modes = task.modes.clone().unwrap_or_else(|| {
        if coherent_intensity(&spec).is_some() {
            vec![StatsMode::Independent, StatsMode::CwUniform, StatsMode::CwExact]
        } else {
            vec![StatsMode::Independent, StatsMode::CwUniform]
        }
    });
    let photons = photon_distribution(&spec)?;
    let mut pulses = Vec::new();
    for &mode in &modes {
        let d = analytic_pulses(&cfg, &spec, mode, task.depth, task.grid)?;
        println!(
            "{:<12} mean {:.4}  variance {:.4}  Q {}",
            mode.name(),
            d.mean(),
            d.variance(),
            mandel_q(&d).map(|q| format!("{q:.4}")).unwrap_or_else(|_| "undefined".into())
        );
        out.csv(&format!("pulses_{}.csv", mode.name()), prob_table(d.probs()))?;
        pulses.push(ModeSummary { mode: mode.name(), dist: DistSummary::of(&d) });
    }
    out.csv("photons.csv", prob_table(photons.probs()))?;
    write_json(&out.path("stats.json"), &StatsEnvelope { config: run, photons: DistSummary::of(&photons), pulses })?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct SimEnvelope<'a> {
    config: &'a RunConfig,
    seed: u64,
    n_windows: usize,
    mean: f64,
    variance: f64,
    histogram: Vec<u64>,
    total_variation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<&'a [u32]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau2_cdf: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_samples: Option<&'a [f64]>,
}

pub fn simulate_cmd(run: &RunConfig, out: &Output) -> anyhow::Result<Status> {
    let cfg = run.detector()?;
    let spec = run.state()?;
    let task = &run.task.simulate;
    let seed = run.seed();
    let source = Source::from_state(&spec)?;
    let opts = SimOptions {
        mode: match task.mode {
            SimMode::Independent => Mode::Independent,
            SimMode::Cw => Mode::Cw,
        },
        timing: match task.timing {
            TimingKind::Instant => TimingModel::Instant,
            TimingKind::Refined => TimingModel::Refined,
        },
        record_gaps: task.record_gaps,
    };
    let rec = simulate(&cfg, &source, task.windows, seed, &opts)?;
    let len = rec.max_count() + 1;
    let mut hist = vec![0u64; len];
    for &c in &rec.counts {
        hist[c as usize] += 1;
    }
    let analytic = if task.compare && task.timing == TimingKind::Instant {
        let mode = if task.mode == SimMode::Cw { StatsMode::CwUniform } else { StatsMode::Independent };
        Some(analytic_pulses(&cfg, &spec, mode, None, 0)?)
    } else {
        None
    };
    let tv = analytic.as_ref().map(|a| {
        let n = len.max(a.probs().len());
        let mut x = rec.histogram(n);
        let mut y = a.probs().to_vec();
        x.resize(n, 0.0);
        y.resize(n, 0.0);
        total_variation(&x, &y)
    });
    println!("windows {}  mean {:.4}  variance {:.4}", rec.n_windows, rec.mean(), rec.variance());
    if let Some(tv) = tv {
        println!("total variation to analytic distribution {tv:.5}");
    } else if task.compare {
        println!("no analytic comparison for the refined timing model");
    }
    let freq = rec.histogram(len);
    out.csv(
        "histogram.csv",
        csv_table(
            &["n", "count", "frequency"],
            hist.iter().zip(&freq).enumerate().map(|(n, (c, f))| vec![n as f64, *c as f64, *f]),
        ),
    )?;
    out.csv(
        "counts.csv",
        csv_table(&["window", "count"], rec.counts.iter().enumerate().map(|(i, c)| vec![i as f64, *c as f64])),
    )?;
    let tau2_cdf = if task.mode == SimMode::Cw {
        let tau_d = cfg.tau_d();
        let emp = EmpiricalCdf::new(&rec.tau2_samples)?;
        let q = coherent_intensity(&spec).map(|i| q_stationary_uniform(&cfg, i, None)).transpose()?;
        let rows: Vec<[f64; 3]> = (0..=100)
            .map(|j| {
                let t = tau_d * j as f64 / 100.0;
                let uniform = q.map(|q| if j == 100 { 1.0 } else { q + (1.0 - q) * t / tau_d }).unwrap_or(f64::NAN);
                [t, emp.eval(t), uniform]
            })
            .collect();
        out.csv("tau2_cdf.csv", csv_table(&["t", "empirical", "uniform"], rows.iter().map(|r| r.to_vec())))?;
        Some(rows)
    } else {
        None
    };
    if task.record_gaps {
        out.csv("gaps.csv", csv_table(&["gap"], rec.gap_samples.iter().map(|g| vec![*g])))?;
    }
    let json = out.format == Format::Json;
    let env = SimEnvelope {
        config: run,
        seed,
        n_windows: rec.n_windows,
        mean: rec.mean(),
        variance: rec.variance(),
        histogram: hist,
        total_variation: tv,
        counts: json.then_some(&rec.counts[..]),
        tau2_cdf,
        gap_samples: (json && task.record_gaps).then_some(&rec.gap_samples[..]),
    };
    write_json(&out.path("simulation.json"), &env)?;
    Ok(Status::Done)
}

fn read_gaps(run: &RunConfig, input: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display()))?;
    if input.extension().is_some_and(|e| e == "json") {
        return gaps_from_json(&text);
    }
    // a header line such as `gap` is allowed
    let body: String = text
        .lines()
        .map(|l| if l.trim().chars().next().is_some_and(|c| c.is_ascii_alphabetic()) { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let floor = run.detector.as_ref().map(|d| d.tau_d);
    gaps_from_numbers(&parse_numbers(&body)?, run.task.fit.input_kind, floor)
}

#[derive(Serialize)]
struct FitEnvelope<'a> {
    config: &'a RunConfig,
    input: String,
    n_gaps: usize,
    model: &'static str,
    params: ParamsBlock,
    params_ns: ParamsBlock,
    sup_residual: f64,
    loss: f64,
    iterations: usize,
    converged: bool,
    mean_gap: f64,
    flux_estimate: Option<f64>,
}

pub fn fit(run: &RunConfig, input: Option<&Path>, out: &Output) -> anyhow::Result<Status> {
    let task = &run.task.fit;
    let input = input.map(Path::to_path_buf).or_else(|| task.input.clone()).context("no gap input file given")?;
    let gaps = read_gaps(run, &input)?;
    let emp = EmpiricalCdf::new(&gaps)?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let first = emp.samples()[0];
    let init: TimingParams = match task.init {
        Some(p) => p.into(),
        None => {
            let scale = (mean - first).max(first * 1e-3);
            TimingParams { tau_phot: scale, tau_d: first, p: 0.05, tau_after: 0.02 * scale, tau_r: 0.01 * scale }
        }
    };
    let model = task.model.model();
    let fitted = fit_gap_cdf(&emp, model, &init, &task.bounds(&init))?;
    let p = fitted.params;
    let ns = |v: f64| v * 1e9;
    let params_ns = ParamsBlock {
        tau_phot: ns(p.tau_phot),
        tau_d: ns(p.tau_d),
        p: p.p,
        tau_after: ns(p.tau_after),
        tau_r: ns(p.tau_r),
    };
    println!(
        "tau_phot {:.3} ns  tau_d {:.3} ns  p {:.4}  tau_after {:.3} ns  tau_r {:.3} ns  sup residual {:.2e}  converged {}",
        params_ns.tau_phot, params_ns.tau_d, p.p, params_ns.tau_after, params_ns.tau_r, fitted.sup_residual, fitted.converged
    );
    let grid: Vec<f64> = (0..FIT_GRID).map(|i| emp.quantile((i as f64 + 0.5) / FIT_GRID as f64)).collect();
    out.csv(
        "fit_cdf.csv",
        csv_table(&["t", "empirical", "model"], grid.iter().map(|&t| vec![t, emp.eval(t), cdf_gap(&p, t, model)])),
    )?;
    let env = FitEnvelope {
        config: run,
        input: input.display().to_string(),
        n_gaps: gaps.len(),
        model: if model == GapModel::Basic { "basic" } else { "refined" },
        params: p.into(),
        params_ns,
        sup_residual: fitted.sup_residual,
        loss: fitted.loss,
        iterations: fitted.iterations,
        converged: fitted.converged,
        mean_gap: mean,
        flux_estimate: flux_from_mean(&p, mean).ok(),
    };
    write_json(&out.path("fit.json"), &env)?;
    Ok(if fitted.converged { Status::Done } else { Status::NotConverged })
}

#[derive(Serialize)]
struct ReconstructPoint {
    alpha: f64,
    estimate: f64,
    stderr: f64,
    mismatch: f64,
    analytic: Option<f64>,
}

#[derive(Serialize)]
struct ReconstructEnvelope<'a> {
    config: &'a RunConfig,
    s: f64,
    n: usize,
    condition: f64,
    relative_mismatch: f64,
    points: Vec<ReconstructPoint>,
}

pub fn reconstruct(run: &RunConfig, out: &Output) -> anyhow::Result<Status> {
    let cfg = run.detector()?;
    let spec = run.state()?;
    let task = &run.task.reconstruct;
    let grid = task.alpha_grid.points()?;
    let metric = metric_tensors(&cfg)?;
    let pts = if task.exact {
        reconstruct_exact(&cfg, task.s, &spec, &grid)?
    } else {
        reconstruct_phase_space(&cfg, task.s, &spec, &grid, task.samples_per_point, run.seed())?
    };
    let points: Vec<ReconstructPoint> = pts
        .iter()
        .map(|p| ReconstructPoint {
            alpha: p.alpha,
            estimate: p.estimate,
            stderr: p.stderr,
            mismatch: p.mismatch_bound,
            analytic: gaussian_quasiprobability(&spec, cfg.eta(), Complex::new(p.alpha, 0.0), task.s).ok(),
        })
        .collect();
    let rel = relative_hs_mismatch(&cfg, task.s)?;
    println!(
        "N {}  condition {:.3e}  mismatch bound {:.4e}  relative mismatch {:.4e}",
        metric.singular_index(),
        metric.condition(),
        pts.first().map(|p| p.mismatch_bound).unwrap_or(0.0),
        rel
    );
    out.csv(
        "reconstruct.csv",
        csv_table(
            &["alpha", "estimate", "stderr", "mismatch", "analytic"],
            points.iter().map(|p| vec![p.alpha, p.estimate, p.stderr, p.mismatch, p.analytic.unwrap_or(f64::NAN)]),
        ),
    )?;
    let env = ReconstructEnvelope {
        config: run,
        s: task.s,
        n: metric.singular_index(),
        condition: metric.condition(),
        relative_mismatch: rel,
        points,
    };
    write_json(&out.path("reconstruct.json"), &env)?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct CriterionJson {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn validate(run: &RunConfig, out: Option<&Output>) -> anyhow::Result<Status> {
    let ids = run.task.validate.criteria.clone().unwrap_or_else(|| CRITERIA.to_vec());
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
        bail!("unknown criterion {bad}");
    }
    let mut all = true;
    let mut report = Vec::new();
    for id in ids {
        let r = run_criterion(id);
        println!("{r}");
        all &= r.passed;
        report.push(CriterionJson { id: r.id, name: r.name, passed: r.passed, detail: r.detail });
    }
    if let Some(out) = out {
        write_json(&out.path("validate.json"), &report)?;
    }
    Ok(if all { Status::Done } else { Status::ValidationFailed })
}
