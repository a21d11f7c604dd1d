//! Distribution of the time between consecutive pulses, flux estimation and
//! least-squares fitting of detector parameters to measured gap times.
//!
//! All durations are in seconds.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::montecarlo::EmpiricalCdf;
use crate::optimize::NelderMead;

/// Parameters of the gap-time model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingParams {
    /// Inverse photon flux `1/λ`.
    pub tau_phot: f64,
    pub tau_d: f64,
    /// Afterpulse probability.
    pub p: f64,
    /// Afterpulse delay constant (refined model).
    pub tau_after: f64,
    /// Recovery time (refined model).
    pub tau_r: f64,
}

impl TimingParams {
    pub fn basic(tau_phot: f64, tau_d: f64, p: f64) -> Self {
        TimingParams { tau_phot, tau_d, p, tau_after: 0.0, tau_r: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_phot > 0.0
            && self.tau_d >= 0.0
            && (0.0..1.0).contains(&self.p)
            && self.tau_after >= 0.0
            && self.tau_r >= 0.0;
        if !ok {
            return Err(Error::Input(format!("invalid timing parameters {self:?}")));
        }
        Ok(())
    }

    fn to_vec(self, model: GapModel) -> Vec<f64> {
        match model {
            GapModel::Basic => vec![self.tau_phot, self.tau_d, self.p],
            GapModel::Refined => vec![self.tau_phot, self.tau_d, self.p, self.tau_after, self.tau_r],
        }
    }

    fn from_slice(v: &[f64]) -> Self {
        TimingParams {
            tau_phot: v[0],
            tau_d: v[1],
            p: v[2],
            tau_after: v.get(3).copied().unwrap_or(0.0),
            tau_r: v.get(4).copied().unwrap_or(0.0),
        }
    }
}

/// Dirac-delta afterpulses with instant recovery, or delayed afterpulses with smooth recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapModel {
    Basic,
    Refined,
}

/// Effective live time `Ξ(t)` accumulated after the dead time.
fn xi(prm: &TimingParams, s: f64) -> f64 {
    if prm.tau_r > 0.0 {
        s + prm.tau_r * (-s / prm.tau_r).exp_m1()
    } else {
        s
    }
}

/// `1 - exp(-Ξ/τ)` with the `τ → 0` limit as a unit step.
fn exp_cdf(xi: f64, tau: f64) -> f64 {
    if tau > 0.0 {
        -(-xi / tau).exp_m1()
    } else {
        1.0
    }
}

/// Cumulative distribution of the time between consecutive pulses.
pub fn cdf_gap(prm: &TimingParams, t: f64, model: GapModel) -> f64 {
    if t < prm.tau_d {
        return 0.0;
    }
    let s = t - prm.tau_d;
    match model {
        GapModel::Basic => (1.0 - prm.p) * exp_cdf(s, prm.tau_phot) + prm.p,
        GapModel::Refined => {
            let x = xi(prm, s);
            (1.0 - prm.p) * exp_cdf(x, prm.tau_phot) + prm.p * exp_cdf(x, prm.tau_after)
        }
    }
}

/// Continuous part of the gap-time density (per second). The basic model
/// carries an additional point mass `p` at `τ_d`.
pub fn pdf_gap(prm: &TimingParams, t: f64, model: GapModel) -> f64 {
    if t < prm.tau_d {
        return 0.0;
    }
    let s = t - prm.tau_d;
    let dens = |x: f64, tau: f64, rec: f64| if tau > 0.0 { rec / tau * (-x / tau).exp() } else { 0.0 };
    match model {
        GapModel::Basic => (1.0 - prm.p) * dens(s, prm.tau_phot, 1.0),
        GapModel::Refined => {
            let rec = if prm.tau_r > 0.0 { -(-s / prm.tau_r).exp_m1() } else { 1.0 };
            let x = xi(prm, s);
            (1.0 - prm.p) * dens(x, prm.tau_phot, rec) + prm.p * dens(x, prm.tau_after, rec)
        }
    }
}

/// Mean gap `(1-p)(τ_phot + τ_d)` of the basic model as used for flux estimation.
pub fn mean_gap(prm: &TimingParams) -> f64 {
    (1.0 - prm.p) * (prm.tau_phot + prm.tau_d)
}

/// First moment of the basic gap distribution, `τ_d + (1-p)τ_phot`.
pub fn mean_gap_exact(prm: &TimingParams) -> f64 {
    prm.tau_d + (1.0 - prm.p) * prm.tau_phot
}

/// Photon flux `λ = (1-p)/(⟨t_b⟩ - τ_d(1-p))` from a mean gap, inverse of [`mean_gap`].
pub fn flux_from_mean(prm: &TimingParams, mean: f64) -> Result<f64> {
    let floor = prm.tau_d * (1.0 - prm.p);
    if !(mean > floor) {
        return Err(Error::Domain(format!("mean gap {mean} must exceed tau_d (1 - p) = {floor}")));
    }
    Ok((1.0 - prm.p) / (mean - floor))
}

/// Box constraints on the fitted parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: TimingParams,
    pub upper: TimingParams,
}

impl Bounds {
    /// Wide default box around an initial guess.
    pub fn around(init: &TimingParams) -> Self {
        Bounds {
            lower: TimingParams { tau_phot: init.tau_phot * 0.05, tau_d: 0.0, p: 0.0, tau_after: 0.0, tau_r: 0.0 },
            upper: TimingParams {
                tau_phot: init.tau_phot * 20.0,
                tau_d: init.tau_d * 2.0 + init.tau_phot,
                p: 0.95,
                tau_after: (init.tau_after * 20.0).max(init.tau_d),
                tau_r: (init.tau_r * 20.0).max(init.tau_d),
            },
        }
    }
}

/// Result of a gap-time fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: TimingParams,
    /// Largest absolute CDF deviation on the fit grid.
    pub sup_residual: f64,
    /// Sum of squared CDF deviations on the fit grid.
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Number of quantile-spaced grid points of the fit.
pub const FIT_GRID: usize = 256;

/// Least-squares fit of the model CDF to an empirical gap distribution on a
/// quantile-spaced grid plus one point just below the smallest gap. The first start replaces `init.tau_d` by the smallest
/// gap minus one average grid spacing; a second sits on the smallest gap with
/// the mass found there as afterpulse probability.
pub fn fit_gap_cdf(emp: &EmpiricalCdf, model: GapModel, init: &TimingParams, bounds: &Bounds) -> Result<FitResult> {
    let mut grid: Vec<f64> = (0..FIT_GRID).map(|i| emp.quantile((i as f64 + 0.5) / FIT_GRID as f64)).collect();
    let first = emp.samples()[0];
    let spacing = (grid[FIT_GRID - 1] - grid[0]) / (FIT_GRID - 1) as f64;
    // an afterpulse atom hides the support edge from the quantile grid; pin it from below
    grid.insert(0, first - 1e-3 * spacing);
    let values: Vec<f64> = grid.iter().map(|&t| emp.eval(t)).collect();
    let clamp_d = |t: f64| t.clamp(bounds.lower.tau_d, bounds.upper.tau_d);
    let mut a = *init;
    a.tau_d = clamp_d(first - spacing);
    let mut b = *init;
    b.tau_d = clamp_d(first);
    let edge = emp.eval(first * (1.0 + 1e-9));
    if edge > 1e-3 {
        b.p = edge.min(bounds.upper.p);
    }
    let mut c = a;
    c.tau_phot = 0.5 * (a.tau_phot + (grid[FIT_GRID / 2] - first).max(spacing));
    fit_from_starts(&grid, &values, model, &[a, b, c], bounds)
}

/// Least-squares fit of the model CDF to given values on a grid of gap times,
/// started from `init` and two points pulled toward the centre of the bounds.
pub fn fit_cdf_on_grid(
    grid: &[f64],
    values: &[f64],
    model: GapModel,
    init: &TimingParams,
    bounds: &Bounds,
) -> Result<FitResult> {
    let pull = |w: f64| {
        let v: Vec<f64> = init
            .to_vec(model)
            .iter()
            .zip(bounds.lower.to_vec(model).iter().zip(bounds.upper.to_vec(model)))
            .map(|(x, (a, b))| x + w * (0.5 * (a + b) - x))
            .collect();
        TimingParams::from_slice(&v)
    };
    fit_from_starts(grid, values, model, &[*init, pull(0.1), pull(0.3)], bounds)
}

fn fit_from_starts(
    grid: &[f64],
    values: &[f64],
    model: GapModel,
    starts: &[TimingParams],
    bounds: &Bounds,
) -> Result<FitResult> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::Input("fit grid and values must be nonempty and of equal length".into()));
    }
    for s in starts {
        s.validate()?;
    }
    let lo = bounds.lower.to_vec(model);
    let hi = bounds.upper.to_vec(model);
    if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
        return Err(Error::Input("each lower bound must be below its upper bound".into()));
    }
    let to_params = |u: &[f64]| -> TimingParams {
        let v: Vec<f64> = u.iter().zip(lo.iter().zip(&hi)).map(|(x, (a, b))| a + x * (b - a)).collect();
        TimingParams::from_slice(&v)
    };
    let loss = |u: &[f64]| -> f64 {
        let prm = to_params(u);
        if prm.tau_phot <= 0.0 {
            return f64::INFINITY;
        }
        grid.iter().zip(values).map(|(&t, &y)| (cdf_gap(&prm, t, model) - y).powi(2)).sum()
    };
    let starts: Vec<Vec<f64>> = starts
        .iter()
        .map(|s| {
            s.to_vec(model)
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(x, (a, b))| ((x - a) / (b - a)).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    let nm = NelderMead::default();
    let runs: Vec<_> = starts.par_iter().map(|s| nm.minimize(loss, s)).collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .map(|(_, m)| m)
        .unwrap();
    let params = to_params(&best.x);
    let sup_residual =
        grid.iter().zip(values).map(|(&t, &y)| (cdf_gap(&params, t, model) - y).abs()).fold(0.0, f64::max);
    Ok(FitResult {
        params,
        sup_residual,
        loss: best.value,
        iterations: runs.iter().map(|m| m.evaluations).sum(),
        converged: best.converged,
    })
}

/// Straight-line fit `p = p0 + r_ap·λ` of afterpulse probability against photon flux.
#[derive(Clone, Debug, PartialEq)]
pub struct AfterpulseLaw {
    pub p0: f64,
    /// Slope in seconds.
    pub r_ap: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares of `p` on the flux `λ` from `(λ, p)` pairs.
pub fn afterpulse_intensity_model(fits: &[(f64, f64)]) -> Result<AfterpulseLaw> {
    let n = fits.len() as f64;
    let mx = fits.iter().map(|f| f.0).sum::<f64>() / n;
    let my = fits.iter().map(|f| f.1).sum::<f64>() / n;
    let sxx: f64 = fits.iter().map(|f| (f.0 - mx).powi(2)).sum();
    if fits.len() < 2 || !(sxx > 0.0) {
        return Err(Error::Input("at least two distinct fluxes are required".into()));
    }
    let sxy: f64 = fits.iter().map(|f| (f.0 - mx) * (f.1 - my)).sum();
    let r_ap = sxy / sxx;
    let p0 = my - r_ap * mx;
    let residuals = fits.iter().map(|f| f.1 - p0 - r_ap * f.0).collect();
    Ok(AfterpulseLaw { p0, r_ap, residuals })
}
