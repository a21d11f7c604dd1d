//! Photon-number and pulse-number distributions.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar statistics of a count distribution.
pub trait CountDistribution<T: Real> {
    fn probs(&self) -> &[T];

    fn mean(&self) -> T {
        self.probs().iter().enumerate().map(|(n, &p)| T::count(n) * p).sum()
    }

    fn variance(&self) -> T {
        let m = self.mean();
        self.probs()
            .iter()
            .enumerate()
            .map(|(n, &p)| {
                let d = T::count(n) - m;
                d * d * p
            })
            .sum()
    }

    fn total(&self) -> T {
        self.probs().iter().copied().sum()
    }
}

/// Truncated photon-number distribution `P_k`, `k = 0…K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonDistribution<T = f64> {
    probs: Vec<T>,
}

impl<T: Real> PhotonDistribution<T> {
    /// Builds a distribution; rejects negative entries and discarded mass above `1e-10`.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("photon distribution is empty".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= T::zero())) {
            return Err(Error::Input("photon probabilities must be finite and nonnegative".into()));
        }
        let total: T = probs.iter().copied().sum();
        let tol = T::lit(1e-10).max(T::epsilon() * T::lit(256.0));
        if (T::one() - total).abs() > tol {
            return Err(Error::Input(format!("photon distribution mass {total} differs from 1")));
        }
        Ok(PhotonDistribution { probs })
    }

    /// All mass at `k`.
    pub fn fock(k: usize) -> Self {
        let mut probs = vec![T::zero(); k + 1];
        probs[k] = T::one();
        PhotonDistribution { probs }
    }

    /// Cutoff `K`.
    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// Discarded tail mass `1 - Σ P_k`.
    pub fn tail(&self) -> T {
        (T::one() - self.total()).max(T::zero())
    }

    pub(crate) fn from_raw(probs: Vec<T>) -> Self {
        PhotonDistribution { probs }
    }
}

impl<T: Real> CountDistribution<T> for PhotonDistribution<T> {
    fn probs(&self) -> &[T] {
        &self.probs
    }
}

/// Pulse-number distribution `𝒫_n`, `n = 0…N+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseDistribution<T = f64> {
    probs: Vec<T>,
    n_max: usize,
}

impl<T: Real> PulseDistribution<T> {
    pub(crate) fn from_parts(probs: Vec<T>, n_max: usize) -> Self {
        PulseDistribution { probs, n_max }
    }

    /// Largest attainable count for the detector that produced it.
    pub fn n_max(&self) -> usize {
        self.n_max
    }
}

impl<T: Real> CountDistribution<T> for PulseDistribution<T> {
    fn probs(&self) -> &[T] {
        &self.probs
    }
}

/// Mandel parameter `Var(n)/⟨n⟩ - 1`.
pub fn mandel_q<T: Real, D: CountDistribution<T> + ?Sized>(dist: &D) -> Result<T> {
    let m = dist.mean();
    if !(m > T::zero()) {
        return Err(Error::Input("Mandel Q is undefined for a distribution with zero mean".into()));
    }
    Ok(dist.variance() / m - T::one())
}

/// Total-variation distance `½ Σ |p_i - q_i|` between two probability vectors.
pub fn total_variation<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().max(b.len());
    let get = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero);
    (0..n).map(|i| (get(a, i) - get(b, i)).abs()).sum::<T>() * T::lit(0.5)
}
