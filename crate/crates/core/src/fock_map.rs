//! Fock-basis conditional probabilities `P_{n|k}` of registering `n` pulses
//! given `k` absorbed photons, and the maps from photon to pulse statistics.
//!
//! The Fock pathway uses a constant afterpulse probability. Efficiency and dark
//! counts act on the photon distribution before the map: the incident
//! distribution is thinned by `η` and convolved with `Poisson(ν)`, and `p` is
//! evaluated at its mean incident photon number.

use crate::detector::{DetectorConfig, Geometry};
use crate::distribution::{CountDistribution, PhotonDistribution, PulseDistribution};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::povm_cw::{avg_expr, CwPart};
use crate::povm_independent::{ri_expr, rr_expr};
use crate::scalar::Real;
use crate::special::{binom_pmf, poisson_kernel};

pub use crate::special::incomplete_beta;

/// Selects a part of the POVM in the Fock basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FockPart {
    Rr,
    Ri,
    IrAvg,
    IiAvg,
    /// `rr + ri`.
    RTotal,
    /// `ir + ii`, averaged over a uniform leak.
    ITotal,
}

fn part_expr<T: Real>(g: &Geometry<T>, p: T, part: FockPart, n: usize) -> Expr<T> {
    match part {
        FockPart::Rr => rr_expr(g, p, n),
        FockPart::Ri => ri_expr(g, p, n),
        FockPart::IrAvg => avg_expr(g, p, CwPart::Ir, n),
        FockPart::IiAvg => avg_expr(g, p, CwPart::Ii, n),
        FockPart::RTotal => rr_expr(g, p, n).add(ri_expr(g, p, n)),
        FockPart::ITotal => avg_expr(g, p, CwPart::Total, n),
    }
}

fn check_p<T: Real>(p: T) -> Result<T> {
    if !(p >= T::zero() && p < T::one()) {
        return Err(Error::Domain(format!("afterpulse probability {p} outside [0, 1)")));
    }
    Ok(p)
}

/// Matrix `P[n][k]` of one POVM part, `n = 0…N+1`, `k = 0…K`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockMap<T = f64> {
    part: FockPart,
    cutoff: usize,
    p: T,
    rows: Vec<Vec<T>>,
}

impl<T: Real> FockMap<T> {
    /// Builds the map with afterpulse probability `p0` of `cfg`.
    pub fn build(cfg: &DetectorConfig<T>, part: FockPart, cutoff: usize) -> Result<Self> {
        Self::with_p(cfg, part, cutoff, cfg.p0())
    }

    /// Builds the map with an explicit constant afterpulse probability.
    pub fn with_p(cfg: &DetectorConfig<T>, part: FockPart, cutoff: usize, p: T) -> Result<Self> {
        let p = check_p(p)?;
        let g = cfg.geometry();
        let rows = (0..=g.n_whole + 1)
            .map(|n| {
                let e = part_expr(g, p, part, n);
                (0..=cutoff).map(|k| e.fock(k, g.x).max(T::zero())).collect()
            })
            .collect();
        Ok(FockMap { part, cutoff, p, rows })
    }

    pub fn part(&self) -> FockPart {
        self.part
    }

    /// Largest photon number `K`.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Afterpulse probability the map was built with.
    pub fn afterpulse_probability(&self) -> T {
        self.p
    }

    /// Number of rows, `N+2`.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `P_{n|k}`; zero outside the stored range.
    pub fn get(&self, n: usize, k: usize) -> T {
        self.rows.get(n).and_then(|r| r.get(k)).copied().unwrap_or_else(T::zero)
    }

    /// Column `k` as a vector over `n`.
    pub fn column(&self, k: usize) -> Vec<T> {
        self.rows.iter().map(|r| r.get(k).copied().unwrap_or_else(T::zero)).collect()
    }

    /// Row `n` as a vector over `k`.
    pub fn row(&self, n: usize) -> &[T] {
        &self.rows[n]
    }

    /// `Σ_k P_{n|k} P_k` for each `n`.
    pub fn apply(&self, photons: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| r.iter().zip(photons).map(|(&a, &b)| a * b).sum()).collect()
    }
}

fn single<T: Real>(cfg: &DetectorConfig<T>, part: FockPart, n: usize, k: usize) -> Result<T> {
    let p = check_p(cfg.p0())?;
    let g = cfg.geometry();
    Ok(part_expr(g, p, part, n).fock(k, g.x).max(T::zero()))
}

/// `P^(rr)_{n|k}` with afterpulse probability `p0`.
pub fn fock_rr<T: Real>(cfg: &DetectorConfig<T>, n: usize, k: usize) -> Result<T> {
    single(cfg, FockPart::Rr, n, k)
}

/// `P^(ri)_{n|k}` with afterpulse probability `p0`.
pub fn fock_ri<T: Real>(cfg: &DetectorConfig<T>, n: usize, k: usize) -> Result<T> {
    single(cfg, FockPart::Ri, n, k)
}

/// Uniformly averaged `P^(ir)_{n|k}` with afterpulse probability `p0`.
pub fn fock_ir_avg<T: Real>(cfg: &DetectorConfig<T>, n: usize, k: usize) -> Result<T> {
    single(cfg, FockPart::IrAvg, n, k)
}

/// Uniformly averaged `P^(ii)_{n|k}` with afterpulse probability `p0`.
pub fn fock_ii_avg<T: Real>(cfg: &DetectorConfig<T>, n: usize, k: usize) -> Result<T> {
    single(cfg, FockPart::IiAvg, n, k)
}

/// Distribution of absorbed primary events: incident photons thinned by `η`,
/// convolved with `Poisson(ν)` dark counts, truncated once the tail is below `1e-14`.
pub fn absorbed_distribution<T: Real>(cfg: &DetectorConfig<T>, photons: &PhotonDistribution<T>) -> Vec<T> {
    let eta = cfg.eta();
    let src = photons.probs();
    let mut thinned = vec![T::zero(); src.len()];
    for (m, &pm) in src.iter().enumerate() {
        if pm == T::zero() {
            continue;
        }
        for (k, t) in thinned.iter_mut().enumerate().take(m + 1) {
            *t += pm * binom_pmf(m, k, eta);
        }
    }
    let nu = cfg.nu();
    if nu == T::zero() {
        return thinned;
    }
    let mut dark = Vec::new();
    let mut acc = T::zero();
    let floor = T::lit(1e-14).max(T::epsilon());
    for j in 0.. {
        let v = poisson_kernel(nu, j);
        dark.push(v);
        acc += v;
        if T::count(j) > nu && T::one() - acc < floor {
            break;
        }
    }
    let mut out = vec![T::zero(); thinned.len() + dark.len() - 1];
    for (i, &a) in thinned.iter().enumerate() {
        for (j, &b) in dark.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Afterpulse probability used by the Fock pathway: `p0 + (r_ap/τ_m)⟨k⟩` at the
/// mean incident photon number.
pub fn fock_afterpulse_probability<T: Real>(cfg: &DetectorConfig<T>, photons: &PhotonDistribution<T>) -> Result<T> {
    cfg.afterpulse_probability(photons.mean())
}

fn finish<T: Real>(probs: Vec<T>, g: &Geometry<T>) -> PulseDistribution<T> {
    PulseDistribution::from_parts(probs.into_iter().map(|v| v.max(T::zero())).collect(), g.n_max)
}

/// Pulse statistics of independent windows: `𝒫_n = Σ_k P^(r)_{n|k} P_k`.
///
/// Photon mass discarded by the cutoff is missing from the result, so
/// `1 - Σ𝒫_n` reports the truncation residual.
pub fn pulse_stats_linear<T: Real>(
    cfg: &DetectorConfig<T>,
    photons: &PhotonDistribution<T>,
) -> Result<PulseDistribution<T>> {
    let p = fock_afterpulse_probability(cfg, photons)?;
    let absorbed = absorbed_distribution(cfg, photons);
    let map = FockMap::with_p(cfg, FockPart::RTotal, absorbed.len() - 1, p)?;
    Ok(finish(map.apply(&absorbed), cfg.geometry()))
}

/// Probability `𝒬` of a leak-free start for i.i.d. windows: `B̄ Σ_{j<depth} C^j`
/// with `B̄ = Σ_k B_k P_k`, `C = Σ_k (A_k - B_k) P_k`; `None` sums the series.
fn stationary_q<T: Real>(a: T, b: T, depth: Option<usize>) -> Result<T> {
    let c = a - b;
    match depth {
        None => Ok(if b == T::zero() { T::one() } else { b / (T::one() - c) }),
        Some(0) => Err(Error::Domain("series depth must be at least 1".into())),
        Some(d) => {
            let mut q = T::zero();
            let mut pow = T::one();
            for _ in 0..d {
                q += b * pow;
                pow *= c;
            }
            Ok(q)
        }
    }
}

struct CwMaps<T> {
    r: FockMap<T>,
    i: FockMap<T>,
    rr: FockMap<T>,
    ir: FockMap<T>,
}

impl<T: Real> CwMaps<T> {
    fn new(cfg: &DetectorConfig<T>, cutoff: usize, p: T) -> Result<Self> {
        Ok(CwMaps {
            r: FockMap::with_p(cfg, FockPart::RTotal, cutoff, p)?,
            i: FockMap::with_p(cfg, FockPart::ITotal, cutoff, p)?,
            rr: FockMap::with_p(cfg, FockPart::Rr, cutoff, p)?,
            ir: FockMap::with_p(cfg, FockPart::IrAvg, cutoff, p)?,
        })
    }

    /// `(A_k, B_k)`: regular-end probabilities without and with a uniform leak.
    fn ab(&self, k: usize) -> (T, T) {
        let a = self.rr.column(k).into_iter().sum();
        let b = self.ir.column(k).into_iter().sum();
        (a, b)
    }
}

/// Stationary continuous-wave pulse statistics for i.i.d. windows in the
/// uniform approximation; `depth = None` sums the memory series.
pub fn pulse_stats_cw<T: Real>(
    cfg: &DetectorConfig<T>,
    photons: &PhotonDistribution<T>,
    depth: Option<usize>,
) -> Result<PulseDistribution<T>> {
    let p = fock_afterpulse_probability(cfg, photons)?;
    let absorbed = absorbed_distribution(cfg, photons);
    let maps = CwMaps::new(cfg, absorbed.len() - 1, p)?;
    let (mut a, mut b) = (T::zero(), T::zero());
    for (k, &pk) in absorbed.iter().enumerate() {
        let (ak, bk) = maps.ab(k);
        a += ak * pk;
        b += bk * pk;
    }
    let q = stationary_q(a, b, depth)?;
    pulse_stats_with_q(&maps, &absorbed, q, cfg.geometry())
}

/// Continuous-wave pulse statistics with a prescribed leak-free probability `𝒬`.
pub fn pulse_stats_cw_with_q<T: Real>(
    cfg: &DetectorConfig<T>,
    photons: &PhotonDistribution<T>,
    q: T,
) -> Result<PulseDistribution<T>> {
    let p = fock_afterpulse_probability(cfg, photons)?;
    let absorbed = absorbed_distribution(cfg, photons);
    let maps = CwMaps::new(cfg, absorbed.len() - 1, p)?;
    pulse_stats_with_q(&maps, &absorbed, q, cfg.geometry())
}

fn pulse_stats_with_q<T: Real>(
    maps: &CwMaps<T>,
    absorbed: &[T],
    q: T,
    g: &Geometry<T>,
) -> Result<PulseDistribution<T>> {
    let r = maps.r.apply(absorbed);
    let i = maps.i.apply(absorbed);
    let probs = r.iter().zip(&i).map(|(&a, &b)| q * a + (T::one() - q) * b).collect();
    Ok(finish(probs, g))
}

/// Multiwindow conditional probability `Λ_{n|k_l,…,k_1}` for absorbed photon
/// numbers `ks = [k_1, …, k_l]` in the uniform approximation, keeping `depth`
/// terms of the memory series.
pub fn lambda_fock<T: Real>(cfg: &DetectorConfig<T>, ks: &[usize], n: usize, depth: usize) -> Result<T> {
    let Some(&k_last) = ks.last() else {
        return Err(Error::Input("photon-number sequence is empty".into()));
    };
    if depth == 0 {
        return Err(Error::Domain("series depth must be at least 1".into()));
    }
    let cutoff = ks.iter().copied().max().unwrap_or(0);
    let maps = CwMaps::new(cfg, cutoff, check_p(cfg.p0())?)?;
    let mut q = T::zero();
    let mut prod = T::one();
    let mut exhausted = true;
    for (j, &k) in ks[..ks.len() - 1].iter().rev().enumerate() {
        if j == depth {
            exhausted = false;
            break;
        }
        let (a, b) = maps.ab(k);
        q += prod * b;
        prod *= a - b;
    }
    if exhausted {
        q += prod;
    }
    let r = maps.r.get(n, k_last);
    let i = maps.i.get(n, k_last);
    Ok((r - i) * q + i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm_cw::povm_i_avg;
    use crate::povm_independent::povm_r;

    fn cfg(x: f64, p: f64) -> DetectorConfig<f64> {
        DetectorConfig::with_params(1.0, x, 1.0, 0.0, p, 0.0).unwrap()
    }

    /// Taylor coefficients of `e^{I} Π(I)` at `I = 0` from a Chebyshev
    /// interpolant on `[-1, 1]`; `P_{n|k} = k! c_k`.
    fn chebyshev_fock(expr: &Expr<f64>, x: f64, kmax: usize) -> Vec<f64> {
        let deg = 15;
        let nodes: Vec<f64> =
            (0..=deg).map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / (deg as f64 + 1.0)).cos()).collect();
        let vals: Vec<f64> = nodes.iter().map(|&i| i.exp() * expr.q_symbol(i, x)).collect();
        // Chebyshev coefficients
        let a: Vec<f64> = (0..=deg)
            .map(|m| {
                let s: f64 = nodes.iter().zip(&vals).map(|(&t, &v)| v * (m as f64 * t.acos()).cos()).sum();
                s * 2.0 / (deg as f64 + 1.0) * if m == 0 { 0.5 } else { 1.0 }
            })
            .collect();
        // monomial coefficients via T_{m+1} = 2t T_m - T_{m-1}
        let mut mono = vec![0.0; deg + 1];
        let mut t_prev = vec![0.0; deg + 1];
        let mut t_cur = vec![0.0; deg + 1];
        t_prev[0] = 1.0;
        t_cur[1] = 1.0;
        mono[0] += a[0];
        for c in 0..=deg {
            mono[c] += a[1] * t_cur[c];
        }
        for m in 2..=deg {
            let mut t_next = vec![0.0; deg + 1];
            for c in 0..deg {
                t_next[c + 1] += 2.0 * t_cur[c];
            }
            for c in 0..=deg {
                t_next[c] -= t_prev[c];
                mono[c] += a[m] * t_next[c];
            }
            t_prev = t_cur;
            t_cur = t_next;
        }
        let mut fact = 1.0;
        (0..=kmax)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                mono[k] * fact
            })
            .collect()
    }

    #[test]
    fn fock_diagonals_match_q_symbol_expansion() {
        for (x, p) in [(0.3, 0.1), (0.09, 0.0), (0.2, 0.25)] {
            let c = cfg(x, p);
            let g = c.geometry();
            for part in [FockPart::Rr, FockPart::Ri, FockPart::IrAvg, FockPart::IiAvg] {
                let map = FockMap::build(&c, part, 6).unwrap();
                for n in 0..map.n_rows() {
                    let oracle = chebyshev_fock(&part_expr(g, p, part, n), g.x, 6);
                    for (k, &o) in oracle.iter().enumerate() {
                        assert!((map.get(n, k) - o).abs() < 1e-7, "{part:?} n={n} k={k}: {} vs {o}", map.get(n, k));
                    }
                }
            }
        }
    }

    #[test]
    fn binomial_rr_example() {
        let c = cfg(0.09, 0.0);
        assert!((fock_rr(&c, 1, 2).unwrap() - 2.0 * 0.91 * 0.09).abs() < 1e-15);
        assert_eq!(fock_rr(&c, 3, 2).unwrap(), 0.0);
        let c = cfg(0.09, 0.3);
        assert_eq!(fock_rr(&c, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn ii_vacuum_row() {
        let x: f64 = 0.3;
        let p: f64 = 0.2;
        let c = cfg(x, p);
        let nn: usize = 3;
        let expect = ((nn as f64 + 1.0) * x - 1.0) / x * p.powi(nn as i32);
        assert!((fock_ii_avg(&c, nn, 0).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn coherent_columns_reproduce_q_symbols() {
        let c = cfg(0.09, 0.05);
        let photons = crate::states::poisson(4.0, 1e-15).unwrap();
        let lin = pulse_stats_linear(&c, &photons).unwrap();
        let q = povm_r(&c, 4.0).unwrap();
        for (a, b) in lin.probs().iter().zip(q.probs()) {
            assert!((a - b).abs() < 1e-10);
        }
        let cw = pulse_stats_cw_with_q(&c, &photons, 0.0).unwrap();
        let qi = povm_i_avg(&c, 4.0).unwrap();
        for (a, b) in cw.probs().iter().zip(qi.probs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_reduces_to_single_window_maps() {
        let c = cfg(0.09, 0.1);
        let r = FockMap::build(&c, FockPart::RTotal, 5).unwrap();
        for n in 0..6 {
            assert!((lambda_fock(&c, &[5], n, 3).unwrap() - r.get(n, 5)).abs() < 1e-15);
        }
        let total: f64 = (0..13).map(|n| lambda_fock(&c, &[7, 2, 5], n, 3).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
