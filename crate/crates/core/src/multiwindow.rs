//! Memory effect across neighbouring windows in continuous-wave detection.
//!
//! The state entering window `l` is the probability `𝒬_l` that no dead time
//! leaks into it together with the distribution of the leaked dead time `τ₂`
//! on `[0, τ_d]`. The distribution is carried as masses on `M` equal cells;
//! transfer between windows integrates the analytic ri/ii densities exactly
//! over destination cells and averages over source cells with Gauss–Legendre
//! nodes, so total probability is conserved to rounding.

use crate::detector::{DetectorConfig, Window};
use crate::distribution::PulseDistribution;
use crate::error::{Error, Result};
use crate::povm_cw::{avg_expr, chain_atom, cond_expr, ii_density, ii_mass, CwPart};
use crate::povm_independent::{ri_density, ri_expr, ri_mass, rr_expr};
use crate::scalar::Real;
use crate::special::GAUSS4;

/// Default number of τ₂ cells.
pub const DEFAULT_GRID: usize = 64;
/// Smallest accepted number of τ₂ cells.
pub const MIN_GRID: usize = 16;
/// Default number of terms of the uniform-approximation series.
pub const DEFAULT_DEPTH: usize = 3;

/// Memory carried into a window: atom `𝒬_l` at `τ₂ = 0` plus cell masses of `ϱ_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState<T = f64> {
    pub q_atom: T,
    /// Probability that `τ₂` falls into cell `j`, `[jτ_d/M, (j+1)τ_d/M)`.
    pub cell_mass: Vec<T>,
    tau_d: T,
}

impl<T: Real> MemoryState<T> {
    fn initial(m: usize, tau_d: T) -> Self {
        MemoryState { q_atom: T::one(), cell_mass: vec![T::zero(); m], tau_d }
    }

    /// Number of cells `M`.
    pub fn grid_size(&self) -> usize {
        self.cell_mass.len()
    }

    /// Cell centres in seconds.
    pub fn cell_centers(&self) -> Vec<T> {
        let m = self.grid_size();
        let w = self.tau_d / T::count(m);
        (0..m).map(|j| w * (T::count(j) + T::lit(0.5))).collect()
    }

    /// Cell-averaged density `ϱ_l(τ₂)` per second.
    pub fn density(&self) -> Vec<T> {
        let w = self.tau_d / T::count(self.grid_size());
        self.cell_mass.iter().map(|&m| m / w).collect()
    }

    /// `𝒬_l + ∫ϱ_l`.
    pub fn total(&self) -> T {
        self.q_atom + self.cell_mass.iter().copied().sum::<T>()
    }

    /// Largest absolute difference of atom and cell masses.
    pub fn distance(&self, other: &Self) -> T {
        self.cell_mass
            .iter()
            .zip(&other.cell_mass)
            .map(|(a, b)| (*a - *b).abs())
            .fold((self.q_atom - other.q_atom).abs(), T::max)
    }
}

/// Memory kernels of one window at fixed intensity, sampled on `M+1` uniform
/// nodes `τ_j = jτ_d/M`.
#[derive(Clone, Debug)]
pub struct Kernels<T = f64> {
    /// Probability that a window without leak ends regularly.
    pub a: T,
    /// τ₂-average of `b`.
    pub b_bar: T,
    /// `a - b_bar`.
    pub c: T,
    /// Sample nodes in seconds.
    pub tau: Vec<T>,
    /// `B(τ₂)`: probability of a regular end given leak `τ₂`.
    pub b: Vec<T>,
    /// `G(τ)`: density (per second) of the overshoot `τ` after a window without leak.
    pub g: Vec<T>,
    /// `H(τ₂, τ)` as `h[i][j]` with `τ₂ = tau[i]`, `τ = tau[j]`; per second,
    /// continuous part only.
    pub h: Vec<Vec<T>>,
    /// Point mass of `H(τ₂, ·)` from pure afterpulse chains: `(weight, τ)` per `τ₂ = tau[i]`.
    pub h_atom: Vec<(T, T)>,
}

fn scalar_sums<T: Real>(w: &Window<T>) -> (T, T) {
    let g = &w.g;
    let mut a = T::zero();
    let mut b_bar = T::zero();
    for n in 0..=g.n_whole + 1 {
        a += rr_expr(g, w.p, n).q_symbol(w.intensity, g.x);
        b_bar += avg_expr(g, w.p, CwPart::Ir, n).q_symbol(w.intensity, g.x);
    }
    (a, b_bar)
}

fn b_cond<T: Real>(w: &Window<T>, t2: T) -> T {
    let g = &w.g;
    (0..=g.n_whole).map(|n| cond_expr(g, w.p, CwPart::Ir, n, t2).q_symbol(w.intensity, g.x)).sum()
}

/// Evaluates the memory kernels at incident intensity `|α|²` on `m+1` nodes.
pub fn kernels<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, m: usize) -> Result<Kernels<T>> {
    check_grid(m)?;
    let w = cfg.window(alpha_sq)?;
    let g = &w.g;
    let (a, b_bar) = scalar_sums(&w);
    let tm = cfg.tau_m();
    let nodes: Vec<T> = (0..=m).map(|j| g.x * T::count(j) / T::count(m)).collect();
    let b = nodes.iter().map(|&t| b_cond(&w, t)).collect();
    let gd = nodes.iter().map(|&t| (1..=g.n_whole + 1).map(|n| ri_density(&w, n, t)).sum::<T>() / tm).collect();
    let h = nodes
        .iter()
        .map(|&t2| {
            nodes.iter().map(|&t1| (1..=g.n_whole + 1).map(|n| ii_density(&w, n, t1, t2)).sum::<T>() / tm).collect()
        })
        .collect();
    let h_atom = nodes
        .iter()
        .map(|&t2| {
            let (wt, t1) = chain_atom(&w, t2);
            (wt, t1 * tm)
        })
        .collect();
    Ok(Kernels { a, b_bar, c: a - b_bar, tau: nodes.iter().map(|&t| t * tm).collect(), b, g: gd, h, h_atom })
}

fn check_grid(m: usize) -> Result<()> {
    if m < MIN_GRID {
        return Err(Error::Domain(format!("grid size {m} below the minimum {MIN_GRID}")));
    }
    Ok(())
}

/// Gauss–Legendre nodes and weights for averaging over `[lo, hi]`, split at `cut`.
fn cell_nodes<T: Real>(lo: T, hi: T, cut: T) -> Vec<(T, T)> {
    let mut segs = Vec::with_capacity(2);
    if cut > lo && cut < hi {
        segs.push((lo, cut));
        segs.push((cut, hi));
    } else {
        segs.push((lo, hi));
    }
    let width = hi - lo;
    let mut out = Vec::with_capacity(8);
    for (a, b) in segs {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        for &(xi, wi) in GAUSS4.iter() {
            out.push((mid + half * T::lit(xi), T::lit(wi) * half / width));
        }
    }
    out
}

/// Window-to-window transfer on the cell grid at one intensity.
struct Transfer<T> {
    a: T,
    /// Cell averages of `B(τ₂)`.
    b_src: Vec<T>,
    /// Mass of the overshoot in each cell after a window without leak.
    g_dst: Vec<T>,
    /// `t[i][j]`: probability that leak in cell `i` produces overshoot in cell `j`.
    t: Vec<Vec<T>>,
}

fn cell_of<T: Real>(t: T, x: T, m: usize) -> usize {
    (t / x * T::count(m)).floor().to_usize().unwrap_or(0).min(m - 1)
}

impl<T: Real> Transfer<T> {
    fn new(w: &Window<T>, m: usize) -> Self {
        let g = &w.g;
        let x = g.x;
        let edges: Vec<T> = (0..=m).map(|j| x * T::count(j) / T::count(m)).collect();
        let n_top = g.n_whole + 1;
        let a = (0..=n_top).map(|n| rr_expr(g, w.p, n).q_symbol(w.intensity, x)).sum();
        let g_dst = (0..m).map(|j| (1..=n_top).map(|n| ri_mass(w, n, edges[j], edges[j + 1])).sum()).collect();
        let mut b_src = vec![T::zero(); m];
        let mut t = vec![vec![T::zero(); m]; m];
        for i in 0..m {
            for (t2, wt) in cell_nodes(edges[i], edges[i + 1], g.delta) {
                b_src[i] += wt * b_cond(w, t2);
                let row = &mut t[i];
                for n in 1..=n_top {
                    let mut prev = T::zero();
                    for j in 0..m {
                        let cum = ii_mass(w, n, t2, T::zero(), edges[j + 1]);
                        row[j] += wt * (cum - prev);
                        prev = cum;
                    }
                }
                let (aw, t1) = chain_atom(w, t2);
                if aw > T::zero() {
                    row[cell_of(t1, x, m)] += wt * aw;
                }
            }
        }
        Transfer { a, b_src, g_dst, t }
    }

    fn step(&self, s: &MemoryState<T>) -> MemoryState<T> {
        let m = s.grid_size();
        let mut q = s.q_atom * self.a;
        let mut mass: Vec<T> = self.g_dst.iter().map(|&g| g * s.q_atom).collect();
        for i in 0..m {
            let mi = s.cell_mass[i];
            if mi == T::zero() {
                continue;
            }
            q += mi * self.b_src[i];
            for (acc, &tij) in mass.iter_mut().zip(&self.t[i]) {
                *acc += mi * tij;
            }
        }
        MemoryState { q_atom: q, cell_mass: mass, tau_d: s.tau_d }
    }
}

/// Exact memory recursion for a window-intensity sequence: states entering
/// windows `1…L` (the last intensity is not needed and not read).
pub fn recursion_exact<T: Real>(cfg: &DetectorConfig<T>, seq: &[T], m: usize) -> Result<Vec<MemoryState<T>>> {
    check_grid(m)?;
    if seq.is_empty() {
        return Err(Error::Input("intensity sequence is empty".into()));
    }
    let mut states = vec![MemoryState::initial(m, cfg.tau_d())];
    let mut cache: Option<(T, Transfer<T>)> = None;
    for &alpha_sq in &seq[..seq.len() - 1] {
        let w = cfg.window(alpha_sq)?;
        if cache.as_ref().is_none_or(|(a, _)| *a != alpha_sq) {
            cache = Some((alpha_sq, Transfer::new(&w, m)));
        }
        let next = cache.as_ref().unwrap().1.step(states.last().unwrap());
        states.push(next);
    }
    Ok(states)
}

/// Stationary memory state at constant intensity, by iterating the exact recursion.
pub fn stationary_state<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, m: usize) -> Result<MemoryState<T>> {
    check_grid(m)?;
    let w = cfg.window(alpha_sq)?;
    let tr = Transfer::new(&w, m);
    let mut s = MemoryState::initial(m, cfg.tau_d());
    let tol = T::epsilon() * T::lit(16.0);
    for _ in 0..100_000 {
        let next = tr.step(&s);
        let d = next.distance(&s);
        s = next;
        if d <= tol {
            break;
        }
    }
    Ok(s)
}

/// `𝒬_l` for the last window of `seq` in the uniform approximation, keeping
/// `depth` terms of the resolved series.
pub fn q_prob_uniform<T: Real>(cfg: &DetectorConfig<T>, seq: &[T], depth: usize) -> Result<T> {
    if depth == 0 {
        return Err(Error::Domain("series depth must be at least 1".into()));
    }
    if seq.is_empty() {
        return Err(Error::Input("intensity sequence is empty".into()));
    }
    let prev = &seq[..seq.len() - 1];
    let mut q = T::zero();
    let mut prod = T::one();
    for (k, &alpha_sq) in prev.iter().rev().enumerate() {
        if k == depth {
            return Ok(q);
        }
        let (a, b_bar) = scalar_sums(&cfg.window(alpha_sq)?);
        q += prod * b_bar;
        prod *= a - b_bar;
    }
    // series exhausted before the depth: the first window carries 𝒬₁ = 1
    Ok(q + prod)
}

/// Stationary `𝒬` at constant intensity: `B̄ Σ_{j<depth} C^j`, or `B̄/(1-C)` for `None`.
pub fn q_stationary_uniform<T: Real>(cfg: &DetectorConfig<T>, alpha_sq: T, depth: Option<usize>) -> Result<T> {
    let (a, b_bar) = scalar_sums(&cfg.window(alpha_sq)?);
    let c = a - b_bar;
    match depth {
        None => Ok(if b_bar == T::zero() { T::one() } else { b_bar / (T::one() - c) }),
        Some(0) => Err(Error::Domain("series depth must be at least 1".into())),
        Some(d) => {
            let mut q = T::zero();
            let mut pow = T::one();
            for _ in 0..d {
                q += b_bar * pow;
                pow *= c;
            }
            Ok(q)
        }
    }
}

fn parts_at<T: Real>(w: &Window<T>) -> (Vec<T>, Vec<T>) {
    let g = &w.g;
    let r =
        (0..=g.n_whole + 1).map(|n| rr_expr(g, w.p, n).add(ri_expr(g, w.p, n)).q_symbol(w.intensity, g.x)).collect();
    let i = (0..=g.n_whole + 1).map(|n| avg_expr(g, w.p, CwPart::Total, n).q_symbol(w.intensity, g.x)).collect();
    (r, i)
}

fn mix<T: Real>(q: T, r: &[T], i: &[T]) -> Vec<T> {
    r.iter().zip(i).map(|(&a, &b)| (q * a + (T::one() - q) * b).max(T::zero())).collect()
}

/// Multiwindow Q-symbol `Λ_n = 𝒬Π_n^(r) + (1-𝒬)Π_n^(i)` for the last window of `seq`
/// in the uniform approximation.
pub fn lambda_q<T: Real>(cfg: &DetectorConfig<T>, seq: &[T], n: usize, depth: usize) -> Result<T> {
    let q = q_prob_uniform(cfg, seq, depth)?;
    let w = cfg.window(*seq.last().unwrap())?;
    let (r, i) = parts_at(&w);
    Ok(mix(q, &r, &i).get(n).copied().unwrap_or_else(T::zero))
}

/// Pulse distribution of the window entered with `state`, at intensity `|α|²`.
pub fn lambda_exact<T: Real>(
    cfg: &DetectorConfig<T>,
    state: &MemoryState<T>,
    alpha_sq: T,
) -> Result<PulseDistribution<T>> {
    let w = cfg.window(alpha_sq)?;
    let g = &w.g;
    let m = state.grid_size();
    let (r, _) = parts_at(&w);
    let mut probs: Vec<T> = r.iter().map(|&v| v * state.q_atom).collect();
    for i in 0..m {
        let mi = state.cell_mass[i];
        if mi == T::zero() {
            continue;
        }
        let lo = g.x * T::count(i) / T::count(m);
        let hi = g.x * T::count(i + 1) / T::count(m);
        for (t2, wt) in cell_nodes(lo, hi, g.delta) {
            for (n, acc) in probs.iter_mut().enumerate() {
                *acc += mi * wt * cond_expr(g, w.p, CwPart::Total, n, t2).q_symbol(w.intensity, g.x);
            }
        }
    }
    for v in probs.iter_mut() {
        *v = v.max(T::zero());
    }
    Ok(PulseDistribution::from_parts(probs, g.n_max))
}

/// Stationary continuous-wave pulse distribution in the uniform approximation;
/// `depth = None` sums the series in closed form.
pub fn cw_pulse_distribution<T: Real>(
    cfg: &DetectorConfig<T>,
    alpha_sq: T,
    depth: Option<usize>,
) -> Result<PulseDistribution<T>> {
    let q = q_stationary_uniform(cfg, alpha_sq, depth)?;
    let w = cfg.window(alpha_sq)?;
    let (r, i) = parts_at(&w);
    Ok(PulseDistribution::from_parts(mix(q, &r, &i), w.g.n_max))
}

/// Stationary continuous-wave pulse distribution from the exact memory recursion.
pub fn cw_pulse_distribution_exact<T: Real>(
    cfg: &DetectorConfig<T>,
    alpha_sq: T,
    m: usize,
) -> Result<PulseDistribution<T>> {
    let s = stationary_state(cfg, alpha_sq, m)?;
    lambda_exact(cfg, &s, alpha_sq)
}
