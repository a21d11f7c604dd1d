//! Linear combinations of Poissonian building blocks.
//!
//! Every POVM part used here is a constant plus a combination of three
//! kernels in the normally ordered intensity `I`. The same combination can be
//! read as a Q-symbol (Poisson weights in `I`) or as a Fock diagonal
//! (binomial weights in the photon number `k`), which keeps the two
//! representations structurally identical.

use crate::scalar::Real;
use crate::special::{binom_pmf, binom_upper, binom_upper_diff, poisson_band, poisson_kernel, poisson_upper};

#[derive(Clone, Copy, Debug)]
pub(crate) enum Kernel<T> {
    /// `F_f[I·e]`.
    Point { f: usize, eff: T },
    /// `Σ_{m>f} F_m[I·e]`.
    Tail { f: usize, eff: T },
    /// `(1/x) ∫_lo^hi F_f[I·e] de`, the τ₂-average of a point kernel whose
    /// efficiency sweeps `[lo, hi]` as the leaked dead time runs over `[0, τ_d]`.
    Band { f: usize, lo: T, hi: T },
}

#[derive(Clone, Debug)]
pub(crate) struct Expr<T> {
    pub constant: T,
    pub terms: Vec<(T, Kernel<T>)>,
}

impl<T: Real> Expr<T> {
    pub fn zero() -> Self {
        Expr { constant: T::zero(), terms: Vec::new() }
    }

    pub fn push(&mut self, coef: T, kernel: Kernel<T>) {
        if coef != T::zero() {
            self.terms.push((coef, kernel));
        }
    }

    /// Q-symbol at effective intensity `i`; `x = τ_d/τ_m`.
    pub fn q_symbol(&self, i: T, x: T) -> T {
        let mut acc = self.constant;
        for &(c, k) in &self.terms {
            let v = match k {
                Kernel::Point { f, eff } => poisson_kernel(i * eff, f),
                Kernel::Tail { f, eff } => poisson_upper(f, i * eff),
                Kernel::Band { f, lo, hi } => {
                    if i == T::zero() {
                        if f == 0 {
                            (hi - lo) / x
                        } else {
                            T::zero()
                        }
                    } else {
                        poisson_band(f, i * lo, i * hi) / (i * x)
                    }
                }
            };
            acc += c * v;
        }
        acc
    }

    /// Fock diagonal `⟨k|Π̂|k⟩`; `x = τ_d/τ_m`.
    pub fn fock(&self, k: usize, x: T) -> T {
        let mut acc = self.constant;
        for &(c, ker) in &self.terms {
            let v = match ker {
                Kernel::Point { f, eff } => binom_pmf(k, f, eff),
                Kernel::Tail { f, eff } => binom_upper(k, f, eff),
                Kernel::Band { f, lo, hi } => {
                    if f > k {
                        T::zero()
                    } else {
                        binom_upper_diff(k + 1, f, lo, hi) / (x * T::count(k + 1))
                    }
                }
            };
            acc += c * v;
        }
        acc
    }

    pub fn add(mut self, other: Expr<T>) -> Self {
        self.constant += other.constant;
        self.terms.extend(other.terms);
        self
    }
}
