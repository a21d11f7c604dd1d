//! Q-symbols for independent measurement windows: the rr part (last dead time
//! ends inside the window) and the ri part (last dead time exceeds it).

use crate::detector::{DetectorConfig, Geometry, Window};
use crate::distribution::PulseDistribution;
use crate::error::{Error, Result};
use crate::expr::{Expr, Kernel};
use crate::scalar::Real;
use crate::special::{binomial, poisson_band, poisson_kernel};

/// Selects a part of the independent-window POVM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndependentPart {
    Rr,
    Ri,
    Total,
}

/// Binomial weight `C(m,f) p^{m-f} (1-p)^f` of `f` terminated groups among `m` pulses.
#[inline]
pub(crate) fn group_weight<T: Real>(m: usize, f: usize, p: T) -> T {
    binomial::<T>(m, f) * p.powi((m - f) as i32) * (T::one() - p).powi(f as i32)
}

pub(crate) fn rr_expr<T: Real>(g: &Geometry<T>, p: T, n: usize) -> Expr<T> {
    let mut e = Expr::zero();
    if n == 0 {
        e.push(T::one(), Kernel::Point { f: 0, eff: T::one() });
    } else if n <= g.n_whole {
        let eff = g.eta(n);
        for f in 1..=n {
            let c = binomial::<T>(n - 1, f - 1) * p.powi((n - f) as i32) * (T::one() - p).powi(f as i32);
            e.push(c, Kernel::Point { f, eff });
        }
    }
    e
}

pub(crate) fn ri_expr<T: Real>(g: &Geometry<T>, p: T, n: usize) -> Expr<T> {
    let mut e = Expr::zero();
    let nn = g.n_whole;
    if (1..=nn).contains(&n) {
        let (hi, lo) = (g.eta(n - 1), g.eta(n));
        for f in 0..n {
            let w = group_weight(n - 1, f, p);
            e.push(w, Kernel::Tail { f, eff: hi });
            e.push(-w, Kernel::Tail { f, eff: lo });
        }
    } else if n == nn + 1 && !g.integer_ratio {
        for f in 0..=nn {
            e.push(group_weight(nn, f, p), Kernel::Tail { f, eff: g.delta });
        }
    }
    e
}

/// Signed live-time fraction `1 - n x`, continued to `n = N+1` as `δ - x`.
#[inline]
pub(crate) fn eta_signed<T: Real>(g: &Geometry<T>, n: usize) -> T {
    if n <= g.n_whole {
        g.eta(n)
    } else {
        g.delta - g.x * T::count(n - g.n_whole)
    }
}

/// Lower edge of the τ₁ domain (units of `τ_m`) for the ri density with `n` pulses.
#[inline]
fn ri_tau1_floor<T: Real>(g: &Geometry<T>, n: usize) -> T {
    if n == g.n_whole + 1 {
        g.x - g.delta
    } else {
        T::zero()
    }
}

/// ri density in `τ₁` (units of `τ_m`), per unit `τ₁/τ_m`.
pub(crate) fn ri_density<T: Real>(w: &Window<T>, n: usize, t1: T) -> T {
    let g = &w.g;
    if n == 0 || n > g.n_whole + 1 || (n == g.n_whole + 1 && g.integer_ratio) {
        return T::zero();
    }
    if t1 < ri_tau1_floor(g, n) || t1 > g.x || w.intensity == T::zero() {
        return T::zero();
    }
    let mu = w.intensity * (eta_signed(g, n) + t1).max(T::zero());
    let mut acc = T::zero();
    for f in 0..n {
        acc += group_weight(n - 1, f, w.p) * poisson_kernel(mu, f);
    }
    w.intensity * acc
}

/// `∫_a^b` of the ri density over `τ₁ ∈ [a, b]` (units of `τ_m`), clipped to its domain.
pub(crate) fn ri_mass<T: Real>(w: &Window<T>, n: usize, a: T, b: T) -> T {
    let g = &w.g;
    if n == 0 || n > g.n_whole + 1 || (n == g.n_whole + 1 && g.integer_ratio) {
        return T::zero();
    }
    let a = a.max(ri_tau1_floor(g, n));
    let b = b.min(g.x);
    if !(b > a) || w.intensity == T::zero() {
        return T::zero();
    }
    let base = eta_signed(g, n);
    let mu_a = w.intensity * (base + a).max(T::zero());
    let mu_b = w.intensity * (base + b).max(T::zero());
    let mut acc = T::zero();
    for f in 0..n {
        acc += group_weight(n - 1, f, w.p) * poisson_band(f, mu_a, mu_b);
    }
    acc
}

fn check_n<T: Real>(cfg: &DetectorConfig<T>, n: usize, lo: usize, hi: usize) -> Result<()> {
    if n < lo || n > hi {
        return Err(Error::Domain(format!("pulse number {n} outside [{lo}, {hi}] for N = {}", cfg.geometry().n_whole)));
    }
    Ok(())
}

/// rr Q-symbol `Π_n^(rr)(α)` at incident intensity `|α|²`, `0 ≤ n ≤ N`.
pub fn q_rr<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize) -> Result<T> {
    check_n(cfg, n, 0, cfg.geometry().n_whole)?;
    let w = cfg.window(alpha_sq)?;
    Ok(rr_expr(&w.g, w.p, n).q_symbol(w.intensity, w.g.x))
}

/// ri Q-symbol `Π_n^(ri)(α)`, `1 ≤ n ≤ N+1`.
pub fn q_ri<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize) -> Result<T> {
    check_n(cfg, n, 1, cfg.geometry().n_whole + 1)?;
    let w = cfg.window(alpha_sq)?;
    Ok(ri_expr(&w.g, w.p, n).q_symbol(w.intensity, w.g.x))
}

/// Density `dΠ_n^(ri)/dτ₁` (per second) of the time `τ₁` by which the last dead
/// time overshoots the window; zero outside its domain.
pub fn q_ri_density<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, n: usize, tau1: T) -> Result<T> {
    check_n(cfg, n, 1, cfg.geometry().n_whole + 1)?;
    let w = cfg.window(alpha_sq)?;
    Ok(ri_density(&w, n, tau1 / cfg.tau_m()) / cfg.tau_m())
}

/// Values of one part of the independent-window POVM for `n = 0…N+1`.
pub fn povm_independent_part<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, part: IndependentPart) -> Result<Vec<T>> {
    let w = cfg.window(alpha_sq)?;
    let g = w.g;
    Ok((0..=g.n_whole + 1)
        .map(|n| {
            let e = match part {
                IndependentPart::Rr => rr_expr(&g, w.p, n),
                IndependentPart::Ri => ri_expr(&g, w.p, n),
                IndependentPart::Total => rr_expr(&g, w.p, n).add(ri_expr(&g, w.p, n)),
            };
            e.q_symbol(w.intensity, g.x).max(T::zero())
        })
        .collect())
}

/// Pulse-number distribution for independent windows and coherent input.
pub fn povm_r<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T) -> Result<PulseDistribution<T>> {
    let probs = povm_independent_part(cfg, alpha_sq, IndependentPart::Total)?;
    Ok(PulseDistribution::from_parts(probs, cfg.geometry().n_max))
}
