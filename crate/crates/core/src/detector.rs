//! Detector and measurement parameters.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance under which `τ_m/τ_d` is treated as an integer.
const INTEGER_RATIO_TOL: f64 = 1e-9;

/// Dead-time geometry of one measurement time window, in units of `τ_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry<T> {
    /// `τ_d / τ_m`.
    pub x: T,
    /// Maximal number of whole dead-time intervals `N = ⌊τ_m/τ_d⌋`.
    pub n_whole: usize,
    /// Largest attainable pulse count: `N+1`, or `N` when `τ_m/τ_d` is an integer.
    pub n_max: usize,
    /// Whether `τ_m/τ_d` is an integer.
    pub integer_ratio: bool,
    /// `(τ_m - Nτ_d)/τ_m`; exactly zero for integer ratios.
    pub delta: T,
}

impl<T: Real> Geometry<T> {
    fn new(tau_m: T, tau_d: T) -> Self {
        let ratio = tau_m / tau_d;
        let rounded = ratio.round();
        let integer_ratio = (ratio - rounded).abs() <= T::lit(INTEGER_RATIO_TOL) * ratio;
        let n_whole = if integer_ratio { rounded } else { ratio.floor() }.to_usize().expect("finite dead-time ratio");
        let x = tau_d / tau_m;
        let delta = if integer_ratio { T::zero() } else { (T::one() - T::count(n_whole) * x).max(T::zero()) };
        Geometry { x, n_whole, n_max: if integer_ratio { n_whole } else { n_whole + 1 }, integer_ratio, delta }
    }

    /// Live-time fraction `1 - n x` after `n` whole dead times; `n = N` returns `delta`.
    #[inline]
    pub(crate) fn eta(&self, n: usize) -> T {
        if n == self.n_whole {
            self.delta
        } else {
            T::one() - T::count(n) * self.x
        }
    }
}

/// Detector and measurement parameters.
///
/// Durations are in seconds. `tau_r` and `tau_after` only enter the gap-time
/// model and the refined simulator; the POVM computations never read them.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig<T = f64> {
    tau_m: T,
    tau_d: T,
    eta: T,
    nu: T,
    p0: T,
    r_ap: T,
    tau_r: T,
    tau_after: T,
    geometry: Geometry<T>,
}

impl<T: Real> DetectorConfig<T> {
    /// Ideal detector (unit efficiency, no dark counts, no afterpulses).
    pub fn new(tau_m: T, tau_d: T) -> Result<Self> {
        Self::with_params(tau_m, tau_d, T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Detector with efficiency `eta`, dark counts `nu` per window and
    /// afterpulse law `p = p0 + (r_ap/τ_m)|α|²`.
    pub fn with_params(tau_m: T, tau_d: T, eta: T, nu: T, p0: T, r_ap: T) -> Result<Self> {
        if !(tau_m > T::zero() && tau_m.is_finite()) {
            return Err(Error::Config(format!("tau_m must be positive, got {tau_m}")));
        }
        if !(tau_d > T::zero() && tau_d < tau_m) {
            return Err(Error::Config(format!("tau_d must satisfy 0 < tau_d < tau_m, got {tau_d}")));
        }
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
        }
        if !(nu >= T::zero() && nu.is_finite()) {
            return Err(Error::Config(format!("nu must be nonnegative, got {nu}")));
        }
        if !(p0 >= T::zero() && p0 < T::one()) {
            return Err(Error::Config(format!("p0 must lie in [0, 1), got {p0}")));
        }
        if !(r_ap >= T::zero() && r_ap.is_finite()) {
            return Err(Error::Config(format!("r_ap must be nonnegative, got {r_ap}")));
        }
        Ok(DetectorConfig {
            tau_m,
            tau_d,
            eta,
            nu,
            p0,
            r_ap,
            tau_r: T::zero(),
            tau_after: T::zero(),
            geometry: Geometry::new(tau_m, tau_d),
        })
    }

    /// Sets the recovery time and afterpulse delay constant of the timing model.
    pub fn with_timing(mut self, tau_r: T, tau_after: T) -> Result<Self> {
        if !(tau_r >= T::zero() && tau_after >= T::zero()) {
            return Err(Error::Config("tau_r and tau_after must be nonnegative".into()));
        }
        self.tau_r = tau_r;
        self.tau_after = tau_after;
        Ok(self)
    }

    /// Same detector with a constant afterpulse probability `p`.
    pub fn with_constant_p(&self, p: T) -> Result<Self> {
        let mut c = Self::with_params(self.tau_m, self.tau_d, self.eta, self.nu, p, T::zero())?;
        c.tau_r = self.tau_r;
        c.tau_after = self.tau_after;
        Ok(c)
    }

    pub fn tau_m(&self) -> T {
        self.tau_m
    }
    pub fn tau_d(&self) -> T {
        self.tau_d
    }
    pub fn eta(&self) -> T {
        self.eta
    }
    pub fn nu(&self) -> T {
        self.nu
    }
    pub fn p0(&self) -> T {
        self.p0
    }
    pub fn r_ap(&self) -> T {
        self.r_ap
    }
    pub fn tau_r(&self) -> T {
        self.tau_r
    }
    pub fn tau_after(&self) -> T {
        self.tau_after
    }
    pub fn geometry(&self) -> &Geometry<T> {
        &self.geometry
    }

    /// `N = ⌊τ_m/τ_d⌋` together with the largest attainable count `n_max`.
    pub fn max_whole_deadtimes(&self) -> (usize, usize) {
        (self.geometry.n_whole, self.geometry.n_max)
    }

    /// Adjusting efficiency `η_rr(n) = (τ_m - nτ_d)/τ_m` for `0 ≤ n ≤ N`.
    pub fn eta_rr(&self, n: usize) -> Result<T> {
        if n > self.geometry.n_whole {
            return Err(Error::Domain(format!("n = {n} exceeds N = {}", self.geometry.n_whole)));
        }
        Ok(self.geometry.eta(n))
    }

    /// Mean number of primary (photon or dark) events per window, `η|α|² + ν`.
    pub fn effective_intensity(&self, alpha_sq: T) -> T {
        self.eta * alpha_sq + self.nu
    }

    /// Afterpulse probability `p0 + (r_ap/τ_m)|α|²` at incident intensity `|α|²`.
    pub fn afterpulse_probability(&self, alpha_sq: T) -> Result<T> {
        if !(alpha_sq >= T::zero() && alpha_sq.is_finite()) {
            return Err(Error::Domain(format!("intensity must be nonnegative, got {alpha_sq}")));
        }
        let p = self.p0 + self.r_ap / self.tau_m * alpha_sq;
        if p >= T::one() {
            return Err(Error::Domain(format!("afterpulse probability {p} >= 1 at intensity {alpha_sq}")));
        }
        Ok(p)
    }

    pub(crate) fn window(&self, alpha_sq: T) -> Result<Window<T>> {
        let p = self.afterpulse_probability(alpha_sq)?;
        Ok(Window { g: self.geometry, p, intensity: self.effective_intensity(alpha_sq) })
    }
}

/// Everything a Q-symbol evaluation needs: geometry, afterpulse probability
/// and effective intensity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window<T> {
    pub g: Geometry<T>,
    pub p: T,
    pub intensity: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_deadtimes() {
        let c = DetectorConfig::new(1.0f64, 0.09).unwrap();
        assert_eq!(c.max_whole_deadtimes(), (11, 12));
        let c = DetectorConfig::new(4.0f64, 1.0).unwrap();
        assert_eq!(c.max_whole_deadtimes(), (4, 4));
        assert_eq!(c.eta_rr(4).unwrap(), 0.0);
        let c = DetectorConfig::new(1.0f64, 0.3).unwrap();
        assert_eq!(c.max_whole_deadtimes(), (3, 4));
        let c = DetectorConfig::new(1.0f64, 1.0 / 3.0).unwrap();
        assert_eq!(c.max_whole_deadtimes(), (3, 3));
    }

    #[test]
    fn eta_rr_values() {
        let c = DetectorConfig::new(1.0f64, 0.09).unwrap();
        assert_eq!(c.eta_rr(0).unwrap(), 1.0);
        assert!((c.eta_rr(5).unwrap() - 0.55).abs() < 1e-15);
        assert!(c.eta_rr(12).is_err());
    }

    #[test]
    fn effective_intensity_examples() {
        let c = DetectorConfig::with_params(1.0f64, 0.1, 0.8, 0.1, 0.0, 0.0).unwrap();
        assert!((c.effective_intensity(5.0) - 4.1).abs() < 1e-15);
        let c = DetectorConfig::with_params(1.0f64, 0.1, 0.5, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(c.effective_intensity(4.0), 2.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(DetectorConfig::new(1.0f64, 1.0).is_err());
        assert!(DetectorConfig::new(1.0f64, 0.0).is_err());
        assert!(DetectorConfig::with_params(1.0f64, 0.1, 1.2, 0.0, 0.0, 0.0).is_err());
        assert!(DetectorConfig::with_params(1.0f64, 0.1, 1.0, 0.0, 1.0, 0.0).is_err());
        let c = DetectorConfig::with_params(1e-6f64, 1e-7, 1.0, 0.0, 0.5, 1e-7).unwrap();
        assert!(c.afterpulse_probability(5.0).is_err());
        assert!(c.afterpulse_probability(4.0).is_ok());
    }
}
