//! Q-symbols for continuous-wave detection: windows that start inside a dead
//! time leaked from the previous window (length `τ₂`), ending regularly (ir)
//! or irregularly (ii), both conditioned on `τ₂` and averaged over a uniform `τ₂`.
//!
//! Branch seams at `τ₂ = τ_m - Nτ_d` are half-open: `τ₂ < τ_m - Nτ_d` selects
//! the branch in which `N` further dead times still fit into the window.

use crate::detector::{DetectorConfig, Geometry, Window};
use crate::distribution::PulseDistribution;
use crate::error::{Error, Result};
use crate::expr::{Expr, Kernel};
use crate::povm_independent::{eta_signed, group_weight};
use crate::scalar::Real;
use crate::special::{binomial, poisson_band, poisson_kernel};

/// Selects a part of the continuous-wave POVM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwPart {
    Ir,
    Ii,
    /// `ir + ii`.
    Total,
}

/// Weight `C(n,f+1) p^{n-f-1} (1-p)^{f+1}` of `f` photon groups after the leaked group.
#[inline]
fn leak_weight<T: Real>(n: usize, f: usize, p: T) -> T {
    binomial::<T>(n, f + 1) * p.powi((n - f - 1) as i32) * (T::one() - p).powi((f + 1) as i32)
}

pub(crate) fn ir_cond_expr<T: Real>(g: &Geometry<T>, p: T, n: usize, t2: T) -> Expr<T> {
    let mut e = Expr::zero();
    let nn = g.n_whole;
    if n < nn || (n == nn && t2 < g.delta) {
        let eff = (g.eta(n) - t2).max(T::zero());
        for f in 0..=n {
            e.push(group_weight(n, f, p) * (T::one() - p), Kernel::Point { f, eff });
        }
    }
    e
}

pub(crate) fn ii_cond_expr<T: Real>(g: &Geometry<T>, p: T, n: usize, t2: T) -> Expr<T> {
    let mut e = Expr::zero();
    let nn = g.n_whole;
    let short = t2 < g.delta;
    if n >= 1 && (n < nn || (n == nn && short)) {
        let hi = g.eta(n - 1) - t2;
        let lo = (g.eta(n) - t2).max(T::zero());
        for f in 0..n {
            let c = leak_weight(n, f, p);
            e.push(c, Kernel::Tail { f, eff: hi });
            e.push(-c, Kernel::Tail { f, eff: lo });
        }
    } else if n == nn && !short {
        e.constant = p.powi(nn as i32);
        let eff = (g.eta(nn - 1) - t2).max(T::zero());
        for f in 0..nn {
            e.push(leak_weight(nn, f, p), Kernel::Tail { f, eff });
        }
    } else if n == nn + 1 && short {
        e.constant = p.powi(n as i32);
        let eff = g.delta - t2;
        for f in 0..=nn {
            e.push(leak_weight(n, f, p), Kernel::Tail { f, eff });
        }
    }
    e
}

pub(crate) fn ir_avg_expr<T: Real>(g: &Geometry<T>, p: T, n: usize) -> Expr<T> {
    let mut e = Expr::zero();
    let nn = g.n_whole;
    if n > nn {
        return e;
    }
    let (lo, hi) = if n < nn { (g.eta(n + 1), g.eta(n)) } else { (T::zero(), g.delta) };
    if hi > lo {
        for f in 0..=n {
            e.push(group_weight(n, f, p) * (T::one() - p), Kernel::Band { f, lo, hi });
        }
    }
    e
}

pub(crate) fn ii_avg_expr<T: Real>(g: &Geometry<T>, p: T, n: usize) -> Expr<T> {
    let mut e = Expr::zero();
    let nn = g.n_whole;
    if n == 0 || n > nn + 1 {
        return e;
    }
    if n <= nn {
        // Σ_f c_f Σ_{j≤f} X_j = Σ_j X_j Σ_{f≥j} c_f
        let upper = if n < nn { g.eta(n + 1) } else { T::zero() };
        let (mid, top) = (g.eta(n), g.eta(n - 1));
        let mut cum = T::zero();
        for j in (0..n).rev() {
            cum += leak_weight(n, j, p);
            if mid > upper {
                e.push(cum, Kernel::Band { f: j, lo: upper, hi: mid });
            }
            e.push(-cum, Kernel::Band { f: j, lo: mid, hi: top });
        }
        if n == nn {
            e.constant = (g.x - g.delta) / g.x;
        }
    } else if g.delta > T::zero() {
        e.constant = g.delta / g.x;
        let mut cum = T::zero();
        for j in (0..=nn).rev() {
            cum += leak_weight(n, j, p);
            e.push(-cum, Kernel::Band { f: j, lo: T::zero(), hi: g.delta });
        }
    }
    e
}

/// Lower edge of the τ₁ domain of the ii density (units of `τ_m`).
fn ii_tau1_floor<T: Real>(g: &Geometry<T>, n: usize, t2: T) -> Option<T> {
    let nn = g.n_whole;
    if n == 0 || n > nn + 1 {
        None
    } else if n < nn {
        Some(T::zero())
    } else if n == nn {
        Some((t2 - g.delta).max(T::zero()))
    } else if t2 < g.delta {
        Some(t2 + g.x - g.delta)
    } else {
        None
    }
}

/// ii density in `τ₁` given `τ₂` (both in units of `τ_m`).
pub(crate) fn ii_density<T: Real>(w: &Window<T>, n: usize, t1: T, t2: T) -> T {
    let g = &w.g;
    let Some(floor) = ii_tau1_floor(g, n, t2) else {
        return T::zero();
    };
    if t1 < floor || t1 > g.x || w.intensity == T::zero() {
        return T::zero();
    }
    let mu = w.intensity * (eta_signed(g, n) + t1 - t2).max(T::zero());
    let mut acc = T::zero();
    for f in 0..n {
        acc += leak_weight(n, f, w.p) * poisson_kernel(mu, f);
    }
    w.intensity * acc
}

/// `∫_a^b` of the ii density over `τ₁` given `τ₂` (units of `τ_m`), clipped to its domain.
pub(crate) fn ii_mass<T: Real>(w: &Window<T>, n: usize, t2: T, a: T, b: T) -> T {
    let g = &w.g;
    let Some(floor) = ii_tau1_floor(g, n, t2) else {
        return T::zero();
    };
    let a = a.max(floor);
    let b = b.min(g.x);
    if !(b > a) || w.intensity == T::zero() {
        return T::zero();
    }
    let base = eta_signed(g, n) - t2;
    let mu_a = w.intensity * (base + a).max(T::zero());
    let mu_b = w.intensity * (base + b).max(T::zero());
    let mut acc = T::zero();
    for f in 0..n {
        acc += leak_weight(n, f, w.p) * poisson_band(f, mu_a, mu_b);
    }
    acc
}

/// Pure afterpulse chain of the leaked pulse that overshoots the window:
/// probability and resulting overshoot `τ₁` (units of `τ_m`).
pub(crate) fn chain_atom<T: Real>(w: &Window<T>, t2: T) -> (T, T) {
    let g = &w.g;
    if t2 >= g.delta {
        (w.p.powi(g.n_whole as i32), t2 - g.delta)
    } else {
        (w.p.powi((g.n_whole + 1) as i32), t2 + g.x - g.delta)
    }
}

fn check_tau2<T: Real>(cfg: &DetectorConfig<T>, tau2: T) -> Result<T> {
    if !(tau2 >= T::zero() && tau2 <= cfg.tau_d()) {
        return Err(Error::Domain(format!("tau2 = {tau2} outside [0, tau_d]")));
    }
    Ok(tau2 / cfg.tau_m())
}

/// ir Q-symbol conditioned on the leaked dead time `τ₂` (seconds).
pub fn q_ir_cond<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize, tau2: T) -> Result<T> {
    let t2 = check_tau2(cfg, tau2)?;
    let w = cfg.window(alpha_sq)?;
    Ok(ir_cond_expr(&w.g, w.p, n, t2).q_symbol(w.intensity, w.g.x))
}

/// ii Q-symbol conditioned on the leaked dead time `τ₂` (seconds).
pub fn q_ii_cond<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize, tau2: T) -> Result<T> {
    let t2 = check_tau2(cfg, tau2)?;
    let w = cfg.window(alpha_sq)?;
    Ok(ii_cond_expr(&w.g, w.p, n, t2).q_symbol(w.intensity, w.g.x))
}

/// Density `dΠ_n^(ii)/dτ₁` (per second) of the overshoot `τ₁` given `τ₂`.
/// Pure afterpulse chains of the leaked pulse form a point mass not included here.
pub fn q_ii_density<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize, tau1: T, tau2: T) -> Result<T> {
    let t2 = check_tau2(cfg, tau2)?;
    let w = cfg.window(alpha_sq)?;
    Ok(ii_density(&w, n, tau1 / cfg.tau_m(), t2) / cfg.tau_m())
}

/// ir Q-symbol averaged over a uniform `τ₂ ∈ [0, τ_d]`.
pub fn q_ir_avg<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize) -> Result<T> {
    let w = cfg.window(alpha_sq)?;
    Ok(ir_avg_expr(&w.g, w.p, n).q_symbol(w.intensity, w.g.x))
}

/// ii Q-symbol averaged over a uniform `τ₂ ∈ [0, τ_d]`.
pub fn q_ii_avg<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize) -> Result<T> {
    let w = cfg.window(alpha_sq)?;
    Ok(ii_avg_expr(&w.g, w.p, n).q_symbol(w.intensity, w.g.x))
}

pub(crate) fn cond_expr<T: Real>(g: &Geometry<T>, p: T, part: CwPart, n: usize, t2: T) -> Expr<T> {
    match part {
        CwPart::Ir => ir_cond_expr(g, p, n, t2),
        CwPart::Ii => ii_cond_expr(g, p, n, t2),
        CwPart::Total => ir_cond_expr(g, p, n, t2).add(ii_cond_expr(g, p, n, t2)),
    }
}

pub(crate) fn avg_expr<T: Real>(g: &Geometry<T>, p: T, part: CwPart, n: usize) -> Expr<T> {
    match part {
        CwPart::Ir => ir_avg_expr(g, p, n),
        CwPart::Ii => ii_avg_expr(g, p, n),
        CwPart::Total => ir_avg_expr(g, p, n).add(ii_avg_expr(g, p, n)),
    }
}

/// Conditional part values for `n = 0…N+1` at leaked dead time `τ₂` (seconds).
pub fn povm_cond_part<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, part: CwPart, tau2: T) -> Result<Vec<T>> {
    let t2 = check_tau2(cfg, tau2)?;
    let w = cfg.window(alpha_sq)?;
    Ok((0..=w.g.n_whole + 1)
        .map(|n| cond_expr(&w.g, w.p, part, n, t2).q_symbol(w.intensity, w.g.x).max(T::zero()))
        .collect())
}

/// Uniformly averaged part values for `n = 0…N+1`.
pub fn povm_avg_part<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, part: CwPart) -> Result<Vec<T>> {
    let w = cfg.window(alpha_sq)?;
    Ok((0..=w.g.n_whole + 1)
        .map(|n| avg_expr(&w.g, w.p, part, n).q_symbol(w.intensity, w.g.x).max(T::zero()))
        .collect())
}

/// Pulse distribution of a window that starts inside a uniformly distributed leaked dead time.
pub fn povm_i_avg<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T) -> Result<PulseDistribution<T>> {
    let probs = povm_avg_part(cfg, alpha_sq, CwPart::Total)?;
    Ok(PulseDistribution::from_parts(probs, cfg.geometry().n_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm_independent::{q_ri, q_rr};

    fn cfg(x: f64, p: f64) -> DetectorConfig<f64> {
        DetectorConfig::with_params(1.0, x, 1.0, 0.0, p, 0.0).unwrap()
    }

    #[test]
    fn ir_examples() {
        let c = cfg(0.09, 0.0);
        for n in 0..=5 {
            assert!((q_ir_cond(&c, 3.0, n, 0.0).unwrap() - q_rr(&c, 3.0, n).unwrap()).abs() < 1e-15);
            let full = q_ir_cond(&c, 3.0, n, 0.09).unwrap();
            let e = 1.0 - (n + 1) as f64 * 0.09;
            assert!((full - poisson_kernel(3.0 * e, n)).abs() < 1e-14);
        }
        let c = cfg(0.09, 0.1);
        assert!((q_ir_cond(&c, 0.0, 0, 0.045).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ii_reduces_to_ri_without_leak() {
        let c = cfg(0.09, 0.0);
        for n in 1..=11 {
            let a = q_ii_cond(&c, 2.5, n, 0.0).unwrap();
            let b = q_ri(&c, 2.5, n).unwrap();
            assert!((a - b).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn ii_seam_is_continuous_without_afterpulses() {
        let c = cfg(0.09, 0.0);
        let seam = 1.0 - 11.0 * 0.09;
        let below = q_ii_cond(&c, 3.0, 11, seam * (1.0 - 1e-13)).unwrap();
        let above = q_ii_cond(&c, 3.0, 11, seam).unwrap();
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn rejects_leak_outside_dead_time() {
        let c = cfg(0.09, 0.0);
        assert!(q_ir_cond(&c, 1.0, 0, 0.1).is_err());
        assert!(q_ii_cond(&c, 1.0, 1, -0.01).is_err());
    }
}
