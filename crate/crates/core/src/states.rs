//! Photon-number distributions of the example field states.

use num_complex::Complex;

use crate::distribution::PhotonDistribution;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{binom_pmf, poisson_kernel, poisson_upper};

pub use crate::distribution::mandel_q;

/// Default bound on the photon mass discarded by the cutoff.
pub const DEFAULT_TAIL: f64 = 1e-12;

/// Field state of one window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSpec<T = f64> {
    Coherent {
        alpha: Complex<T>,
    },
    Thermal {
        n_th: T,
    },
    /// Fock state `|l⟩` after a loss channel of transmission `eta`.
    AttenuatedFock {
        l: usize,
        eta: T,
    },
    /// Displaced squeezed vacuum (real displacement along the squeezed
    /// quadrature) after a loss channel of transmission `eta`.
    SqueezedCoherent {
        alpha: Complex<T>,
        r: T,
        eta: T,
    },
}

impl<T: Real> StateSpec<T> {
    fn validate(&self) -> Result<()> {
        let unit = |e: T| e >= T::zero() && e <= T::one();
        match *self {
            StateSpec::Coherent { alpha } => {
                if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                    return Err(Error::Input("coherent amplitude must be finite".into()));
                }
            }
            StateSpec::Thermal { n_th } => {
                if !(n_th >= T::zero() && n_th.is_finite()) {
                    return Err(Error::Input(format!("thermal occupation must be nonnegative, got {n_th}")));
                }
            }
            StateSpec::AttenuatedFock { eta, .. } => {
                if !unit(eta) {
                    return Err(Error::Input(format!("transmission must lie in [0, 1], got {eta}")));
                }
            }
            StateSpec::SqueezedCoherent { alpha, r, eta } => {
                if alpha.im != T::zero() {
                    return Err(Error::Unsupported("squeezed states are only defined for a real displacement".into()));
                }
                if !unit(eta) || !r.is_finite() || !alpha.re.is_finite() {
                    return Err(Error::Input("invalid squeezed-state parameters".into()));
                }
            }
        }
        Ok(())
    }
}

fn tail_floor<T: Real>(tail: T) -> T {
    tail.max(T::epsilon() * T::lit(64.0))
}

/// Poisson distribution with the given mean, cut where the tail drops below `tail`.
pub fn poisson<T: Real>(mean: T, tail: T) -> Result<PhotonDistribution<T>> {
    if !(mean >= T::zero() && mean.is_finite()) {
        return Err(Error::Input(format!("mean must be nonnegative, got {mean}")));
    }
    let tol = tail_floor(tail);
    let mut k = 0;
    while T::count(k) < mean || poisson_upper(k, mean) > tol {
        k += 1;
    }
    Ok(PhotonDistribution::from_raw((0..=k).map(|j| poisson_kernel(mean, j)).collect()))
}

fn thermal<T: Real>(n_th: T, tail: T) -> PhotonDistribution<T> {
    if n_th == T::zero() {
        return PhotonDistribution::fock(0);
    }
    let ratio = n_th / (T::one() + n_th);
    let tol = tail_floor(tail);
    let mut probs = Vec::new();
    let mut term = T::one() / (T::one() + n_th);
    let mut upper = ratio;
    loop {
        probs.push(term);
        if upper <= tol {
            break;
        }
        term *= ratio;
        upper *= ratio;
    }
    PhotonDistribution::from_raw(probs)
}

/// Generating function `Σ_k P_k t^k` of the lossy displaced squeezed vacuum.
fn squeezed_generating<T: Real>(alpha: T, r: T, eta: T, t: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let s = (one - t) * eta;
    let u = one - s;
    let (ch, sh) = (r.cosh(), r.sinh());
    let d = Complex::new(ch * ch, T::zero()) - u * u * (sh * sh);
    let two = T::lit(2.0);
    let e = s * (alpha * alpha) * (s * (T::one() - (two * r).exp()) - two) / (d * two);
    e.exp() / d.sqrt()
}

/// Taylor coefficients `0…K` of `f` by the discrete Cauchy integral on a
/// circle of radius `rho` with `4K` nodes.
fn cauchy_coefficients<T: Real>(f: impl Fn(Complex<T>) -> Complex<T>, k: usize, rho: T) -> Vec<T> {
    let m = 4 * k;
    let tau = T::TAU();
    let samples: Vec<Complex<T>> =
        (0..m).map(|j| f(Complex::from_polar(rho, tau * T::count(j) / T::count(m)))).collect();
    let mut out = Vec::with_capacity(k + 1);
    let mut scale = T::one() / T::count(m);
    for n in 0..=k {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, s) in samples.iter().enumerate() {
            let phase = (j * n) % m;
            acc = acc + *s * Complex::from_polar(T::one(), -tau * T::count(phase) / T::count(m));
        }
        out.push((acc.re * scale).max(T::zero()));
        scale /= rho;
    }
    out
}

/// Photon distribution of a lossy displaced squeezed vacuum, extracted on a
/// circle of radius `rho`.
pub fn squeezed_distribution<T: Real>(alpha: T, r: T, eta: T, rho: T, tail: T) -> Result<PhotonDistribution<T>> {
    let tol = tail_floor(tail);
    let mut k = 16;
    loop {
        let probs = cauchy_coefficients(|t| squeezed_generating(alpha, r, eta, t), k, rho);
        let total: T = probs.iter().copied().sum();
        if T::one() - total <= tol {
            return Ok(PhotonDistribution::from_raw(probs));
        }
        if k >= 1 << 14 {
            return Err(Error::Input("squeezed state needs more than 16384 photon numbers".into()));
        }
        k *= 2;
    }
}

/// Photon-number distribution of `spec` with discarded mass at most `tail`.
pub fn photon_distribution_with_tail<T: Real>(spec: &StateSpec<T>, tail: T) -> Result<PhotonDistribution<T>> {
    spec.validate()?;
    match *spec {
        StateSpec::Coherent { alpha } => poisson(alpha.norm_sqr(), tail),
        StateSpec::Thermal { n_th } => Ok(thermal(n_th, tail)),
        StateSpec::AttenuatedFock { l, eta } => {
            Ok(PhotonDistribution::from_raw((0..=l).map(|k| binom_pmf(l, k, eta)).collect()))
        }
        StateSpec::SqueezedCoherent { alpha, r, eta } => squeezed_distribution(alpha.re, r, eta, T::lit(0.95), tail),
    }
}

/// Photon-number distribution of `spec` with discarded mass below `1e-12`.
pub fn photon_distribution<T: Real>(spec: &StateSpec<T>) -> Result<PhotonDistribution<T>> {
    photon_distribution_with_tail(spec, T::lit(DEFAULT_TAIL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::CountDistribution;

    #[test]
    fn squeezed_vacuum_closed_form() {
        let r: f64 = 1.0;
        let d = squeezed_distribution(0.0, r, 1.0, 0.95, 1e-12).unwrap();
        let p = d.probs();
        assert!((p[0] - 1.0 / r.cosh()).abs() < 1e-12);
        assert!((p[2] - r.tanh().powi(2) / 2.0 / r.cosh()).abs() < 1e-12);
        assert!(p.iter().skip(1).step_by(2).all(|&v| v < 1e-12));
    }

    #[test]
    fn squeezed_moments_follow_quadrature_variances() {
        let (a, r, eta) = (4.0f64, 0.69, 0.8);
        let d = squeezed_distribution(a, r, eta, 0.95, 1e-12).unwrap();
        let vx = (eta * (-2.0 * r).exp() + 1.0 - eta) / 4.0;
        let vy = (eta * (2.0 * r).exp() + 1.0 - eta) / 4.0;
        let mean = eta * a * a + vx + vy - 0.5;
        let var = 4.0 * eta * a * a * vx + 2.0 * (vx * vx + vy * vy) - 0.25;
        assert!((d.mean() - mean).abs() < 1e-9);
        assert!((d.variance() - var).abs() < 1e-8);
    }

    #[test]
    fn rejects_complex_squeezed_displacement() {
        let s = StateSpec::SqueezedCoherent { alpha: Complex::new(1.0, 0.5), r: 0.3, eta: 1.0 };
        assert!(matches!(photon_distribution(&s), Err(Error::Unsupported(_))));
    }

    #[test]
    fn thermal_and_fock() {
        let d = photon_distribution(&StateSpec::<f64>::Thermal { n_th: 9.0 }).unwrap();
        assert!(d.tail() < 1e-12);
        assert!((mandel_q(&d).unwrap() - 9.0).abs() < 1e-8);
        let f = photon_distribution(&StateSpec::<f64>::AttenuatedFock { l: 5, eta: 1.0 }).unwrap();
        assert_eq!(f.probs(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let c = photon_distribution(&StateSpec::<f64>::Coherent { alpha: Complex::new(0.0, 2.0) }).unwrap();
        assert!((c.mean() - 4.0).abs() < 1e-10);
        assert!(mandel_q(&c).unwrap().abs() < 1e-9);
    }
}
