//! Special functions: log-gamma, binomial coefficients, Poisson and binomial
//! kernels with their cumulative sums, and the incomplete beta integral.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::sync::OnceLock;

const PASCAL_MAX: usize = 64;
const LN_FACT_LEN: usize = 1024;
/// Above this mean or count the Poisson kernel is evaluated in log space.
const POISSON_LOG_SWITCH: usize = 30;

fn pascal() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(PASCAL_MAX + 1);
        for n in 0..=PASCAL_MAX {
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_LEN];
        for n in 1..LN_FACT_LEN {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

/// Natural logarithm of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::lit(0.5);
    if x < half {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(COEF[0]);
    let t = x + T::lit(G) + half;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += T::lit(*c) / (x + T::count(i));
    }
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + a.ln()
}

/// `ln(n!)`.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < LN_FACT_LEN {
        T::lit(ln_fact_table()[n])
    } else {
        ln_gamma(T::count(n) + T::one())
    }
}

/// Binomial coefficient `C(n, k)`; zero for `k > n`.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    if n <= PASCAL_MAX {
        T::lit(pascal()[n][k])
    } else {
        (ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)).exp()
    }
}

/// Poisson kernel `mean^n e^{-mean} / n!`.
pub fn poisson_kernel<T: Real>(mean: T, n: usize) -> T {
    let switch = T::count(POISSON_LOG_SWITCH);
    if mean > switch || n > POISSON_LOG_SWITCH {
        poisson_log(mean, n)
    } else {
        poisson_direct(mean, n)
    }
}

pub(crate) fn poisson_direct<T: Real>(mean: T, n: usize) -> T {
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    mean.powi(n as i32) * (-mean).exp() / T::lit(fact)
}

pub(crate) fn poisson_log<T: Real>(mean: T, n: usize) -> T {
    if mean == T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    (T::count(n) * mean.ln() - mean - ln_factorial::<T>(n)).exp()
}

/// `Σ_{m=0}^{f} F_m(mu)`, the Poisson CDF at `f`.
pub(crate) fn poisson_lower<T: Real>(f: usize, mu: T) -> T {
    if mu == T::zero() {
        return T::one();
    }
    if mu >= T::count(f + 1) {
        let eps = T::epsilon();
        let mut term = poisson_kernel(mu, f);
        let mut sum = term;
        for m in (1..=f).rev() {
            term = term * T::count(m) / mu;
            sum += term;
            if term.abs() <= eps * sum.abs() {
                break;
            }
        }
        sum
    } else {
        T::one() - poisson_upper(f, mu)
    }
}

/// `Σ_{m>f} F_m(mu)`, the Poisson upper tail above `f`.
pub(crate) fn poisson_upper<T: Real>(f: usize, mu: T) -> T {
    if mu == T::zero() {
        return T::zero();
    }
    if mu < T::count(f + 1) {
        let eps = T::epsilon();
        let mut term = poisson_kernel(mu, f + 1);
        let mut sum = term;
        let mut m = f + 1;
        while m < f + 4000 {
            m += 1;
            term = term * mu / T::count(m);
            sum += term;
            if term.abs() <= eps * sum.abs() {
                break;
            }
        }
        sum
    } else {
        T::one() - poisson_lower(f, mu)
    }
}

/// `∫_a^b F_f(μ) dμ`, evaluated from whichever cumulative sum avoids cancellation.
pub(crate) fn poisson_band<T: Real>(f: usize, a: T, b: T) -> T {
    if a.max(b) < T::count(f + 1) {
        poisson_upper(f, b) - poisson_upper(f, a)
    } else {
        poisson_lower(f, a) - poisson_lower(f, b)
    }
}

/// Binomial probability `C(m,j) e^j (1-e)^{m-j}`.
pub(crate) fn binom_pmf<T: Real>(m: usize, j: usize, e: T) -> T {
    if j > m {
        return T::zero();
    }
    if e <= T::zero() {
        return if j == 0 { T::one() } else { T::zero() };
    }
    if e >= T::one() {
        return if j == m { T::one() } else { T::zero() };
    }
    if m <= PASCAL_MAX {
        binomial::<T>(m, j) * e.powi(j as i32) * (T::one() - e).powi((m - j) as i32)
    } else {
        let ln_c = ln_factorial::<T>(m) - ln_factorial::<T>(j) - ln_factorial::<T>(m - j);
        (ln_c + T::count(j) * e.ln() + T::count(m - j) * (-e).ln_1p()).exp()
    }
}

/// `P(X > f)` for `X ~ Binomial(m, e)`.
pub(crate) fn binom_upper<T: Real>(m: usize, f: usize, e: T) -> T {
    if f >= m || e <= T::zero() {
        return T::zero();
    }
    if e >= T::one() {
        return T::one();
    }
    if T::count(f + 1) > T::count(m) * e {
        let eps = T::epsilon();
        let odds = e / (T::one() - e);
        let mut term = binom_pmf(m, f + 1, e);
        let mut sum = term;
        for j in (f + 1)..m {
            term = term * T::count(m - j) / T::count(j + 1) * odds;
            sum += term;
            if term <= eps * sum {
                break;
            }
        }
        sum
    } else {
        T::one() - binom_lower(m, f, e)
    }
}

/// `P(X <= f)` for `X ~ Binomial(m, e)`.
pub(crate) fn binom_lower<T: Real>(m: usize, f: usize, e: T) -> T {
    if f >= m || e <= T::zero() {
        return T::one();
    }
    if e >= T::one() {
        return T::zero();
    }
    if T::count(f) < T::count(m) * e {
        let eps = T::epsilon();
        let inv_odds = (T::one() - e) / e;
        let mut term = binom_pmf(m, f, e);
        let mut sum = term;
        for j in (1..=f).rev() {
            term = term * T::count(j) / T::count(m - j + 1) * inv_odds;
            sum += term;
            if term <= eps * sum {
                break;
            }
        }
        sum
    } else {
        T::one() - binom_upper(m, f, e)
    }
}

/// `P(X > f | e = hi) - P(X > f | e = lo)` for `X ~ Binomial(m, e)`.
pub(crate) fn binom_upper_diff<T: Real>(m: usize, f: usize, lo: T, hi: T) -> T {
    if lo > T::lit(0.5) {
        binom_lower(m, f, lo) - binom_lower(m, f, hi)
    } else {
        binom_upper(m, f, hi) - binom_upper(m, f, lo)
    }
}

/// Incomplete beta integral `∫_{z1}^{z2} t^{a-1} (1-t)^{b-1} dt` for integer `a, b ≥ 1`.
///
/// The polynomial antiderivative is evaluated through its binomial-tail form
/// `B(a,b) [I_{z2}(a,b) - I_{z1}(a,b)]`, where `I_z(a,b)` is the probability of
/// at least `a` successes in `a+b-1` trials; every summand is nonnegative.
pub fn incomplete_beta<T: Real>(z1: T, z2: T, a: usize, b: usize) -> Result<T> {
    if a == 0 || b == 0 {
        return Err(Error::Domain(format!("beta parameters must be >= 1, got ({a}, {b})")));
    }
    if !(z1 >= T::zero() && z2 <= T::one()) {
        return Err(Error::Domain(format!("limits must lie in [0, 1], got [{z1}, {z2}]")));
    }
    if z1 > z2 {
        return Err(Error::Domain(format!("lower limit {z1} exceeds upper limit {z2}")));
    }
    let m = a + b - 1;
    let complete = (ln_factorial::<T>(a - 1) + ln_factorial::<T>(b - 1) - ln_factorial::<T>(m)).exp();
    Ok(complete * binom_upper_diff(m, a - 1, z1, z2))
}

/// Four-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..40usize {
            let exact: f64 = ln_fact_table()[n - 1];
            let lg: f64 = ln_gamma(n as f64);
            assert!((lg - exact).abs() < 1e-12 * exact.abs().max(1.0), "n={n}");
        }
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn binomial_table_and_log_branch_agree() {
        let direct: f64 = binomial(64, 20);
        let via_log = (ln_factorial::<f64>(64) - ln_factorial::<f64>(20) - ln_factorial::<f64>(44)).exp();
        assert!((direct - via_log).abs() < 1e-11 * direct);
        assert_eq!(binomial::<f64>(5, 6), 0.0);
        assert_eq!(binomial::<f64>(10, 3), 120.0);
    }

    #[test]
    fn poisson_kernel_values() {
        assert_eq!(poisson_kernel(0.0f64, 0), 1.0);
        assert_eq!(poisson_kernel(0.0f64, 3), 0.0);
        assert!((poisson_kernel(2.0f64, 1) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((poisson_kernel(2.0f64, 1) - 0.27067).abs() < 1e-5);
    }

    #[test]
    fn direct_and_log_poisson_agree() {
        for &mean in &[0.1f64, 1.0, 4.0, 12.5, 30.0] {
            for n in 0..=60 {
                let d = poisson_direct(mean, n);
                let l = poisson_log(mean, n);
                if d > 1e-300 {
                    assert!(((d - l) / d).abs() < 1e-12, "mean={mean} n={n}");
                }
            }
        }
    }

    #[test]
    fn cumulative_sums_are_complementary() {
        for &mu in &[1e-9f64, 0.3, 2.0, 7.5, 45.0, 300.0] {
            for f in 0..25 {
                let lo = poisson_lower(f, mu);
                let up = poisson_upper(f, mu);
                assert!((lo + up - 1.0).abs() < 1e-13, "mu={mu} f={f}");
                let brute: f64 = (0..=f).map(|m| poisson_kernel(mu, m)).sum();
                assert!((lo - brute).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn small_mean_tail_keeps_relative_precision() {
        let mu = 1e-8f64;
        let t = poisson_upper(0, mu);
        assert!(((t - (-(-mu).exp_m1())) / t).abs() < 1e-14);
        let t2 = poisson_upper(1, mu);
        assert!(((t2 - mu * mu / 2.0) / t2).abs() < 1e-7);
    }

    #[test]
    fn binomial_tails() {
        for m in [0usize, 1, 5, 17, 80, 150] {
            for &e in &[0.0f64, 0.03, 0.4, 0.91, 1.0] {
                for f in 0..=m + 1 {
                    let brute: f64 = (f + 1..=m).map(|j| binom_pmf(m, j, e)).sum();
                    assert!((binom_upper(m, f, e) - brute).abs() < 1e-12, "m={m} e={e} f={f}");
                    assert!((binom_lower(m, f, e) + binom_upper(m, f, e) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn incomplete_beta_values() {
        assert!((incomplete_beta(0.0f64, 1.0, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        let b = incomplete_beta(0.0f64, 1.0, 3, 4).unwrap();
        assert!((b - 2.0 * 6.0 / 720.0).abs() < 1e-15);
        // polynomial antiderivative of t (1-t)^2
        let anti = |t: f64| t * t / 2.0 - 2.0 * t.powi(3) / 3.0 + t.powi(4) / 4.0;
        let v = incomplete_beta(0.2f64, 0.7, 2, 3).unwrap();
        assert!((v - (anti(0.7) - anti(0.2))).abs() < 1e-15);
        assert!(incomplete_beta(0.7f64, 0.2, 2, 3).is_err());
        assert!(incomplete_beta(0.1f64, 0.2, 0, 3).is_err());
    }
}
