//! Distribution and factorial moments of the number of types `K_n`.
//!
//! Looking backwards from a sample of `m` lineages, the first event is a
//! mutation with probability `m r / (g_m + m r)` (one lineage leaves the
//! sample carrying its own type) or a jump of the block-counting process with
//! probability `g_m / (g_m + m r)` (the sample shrinks to `i` lineages with
//! probability `r[m][i]`, and the number of types is unchanged). This gives
//!
//! ```text
//! P(K_m = k) = m r/(g_m + m r) P(K_(m-1) = k-1) + 1/(g_m + m r) Σ_{i=k}^{m-1} g[m][i] P(K_i = k)
//! ```
//!
//! with `P(K_1 = 1) = 1`. The recursion is generic over the scalar type so
//! the same code runs in `f64` and in exact rationals.

use std::io::Write;

use num_traits::{FromPrimitive, Num};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rates::RateTable;
use crate::special::log_add_exp;

pub mod rational;

/// Largest `n` accepted by [`ewens_oracle`].
pub const EWENS_MAX_N: usize = 1000;

/// Scalars the recursions run in.
pub trait Scalar: Num + Clone + FromPrimitive {}
impl<T: Num + Clone + FromPrimitive> Scalar for T {}

/// Source of jump rates for the recursions.
pub trait Rates<T> {
    fn n_max(&self) -> usize;
    fn g(&self, m: usize, k: usize) -> T;
    fn total(&self, m: usize) -> T;
}

impl Rates<f64> for RateTable {
    fn n_max(&self) -> usize {
        RateTable::n_max(self)
    }
    fn g(&self, m: usize, k: usize) -> f64 {
        RateTable::g(self, m, k)
    }
    fn total(&self, m: usize) -> f64 {
        RateTable::total(self, m)
    }
}

fn scalar<T: Scalar>(v: usize) -> T {
    T::from_usize(v).expect("small integers are representable")
}

fn check_size<T>(rates: &impl Rates<T>, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if n > 1 && n > rates.n_max() {
        return Err(Error::RateTableTooSmall { requested: n, available: rates.n_max() });
    }
    Ok(())
}

/// `P(K_m = k)` for `1 <= k <= m <= n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeDistribution<T = f64> {
    pub n: usize,
    pub r: T,
    rows: Vec<Vec<T>>,
    /// Descending factorial moments, when computed alongside.
    pub fmoments: Option<FactorialMoments<T>>,
}

impl<T: Scalar> TypeDistribution<T> {
    /// `P(K_m = k)`; zero outside `1 <= k <= m`.
    pub fn prob(&self, m: usize, k: usize) -> T {
        if m == 0 || m > self.n || k == 0 || k > m {
            T::zero()
        } else {
            self.rows[m - 1][k - 1].clone()
        }
    }

    /// Row `m`, indexed by `k - 1`.
    pub fn row(&self, m: usize) -> &[T] {
        &self.rows[m - 1]
    }
}

impl TypeDistribution<f64> {
    pub fn mean(&self, m: usize) -> f64 {
        self.row(m).iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// CSV with columns `m,k,probability`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,k,probability")?;
        for (m, row) in self.rows.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", m + 1, k + 1, p)?;
            }
        }
        Ok(())
    }
}

/// Runs the first-event recursion bottom-up for `m = 1..=n`.
pub fn type_distribution_generic<T: Scalar>(rates: &impl Rates<T>, r: T, n: usize) -> Result<TypeDistribution<T>> {
    check_size(rates, n)?;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    rows.push(vec![T::one()]);
    for m in 2..=n {
        let mr = scalar::<T>(m) * r.clone();
        let denom = rates.total(m) + mr.clone();
        let g: Vec<T> = (1..m).map(|i| rates.g(m, i)).collect();
        let mut row = Vec::with_capacity(m);
        for k in 1..=m {
            let mut acc = if k >= 2 { mr.clone() * rows[m - 2][k - 2].clone() } else { T::zero() };
            for i in k..m {
                if !g[i - 1].is_zero() {
                    acc = acc + g[i - 1].clone() * rows[i - 1][k - 1].clone();
                }
            }
            row.push(acc / denom.clone());
        }
        rows.push(row);
    }
    Ok(TypeDistribution { n, r, rows, fmoments: None })
}

/// `P(K_m = k)` for all `m <= n` from a floating-point rate table.
pub fn type_distribution(table: &RateTable, r: f64, n: usize) -> Result<TypeDistribution> {
    check_rate(r)?;
    type_distribution_generic(table, r, n)
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("mutation rate must be positive and finite, got {r}")));
    }
    Ok(())
}

/// `P(K_n = n) = Π_{i=2}^n i r / (g_i + i r)`: all sampled types distinct.
pub fn all_singletons_probability(table: &RateTable, r: f64, n: usize) -> Result<f64> {
    check_rate(r)?;
    check_size(table, n)?;
    Ok((2..=n).map(|i| i as f64 * r / (table.total(i) + i as f64 * r)).product())
}

/// Descending factorial moments `E[(K_m)_j]`, `j = 0..=j_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorialMoments<T = f64> {
    pub j_max: usize,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> FactorialMoments<T> {
    pub fn get(&self, m: usize, j: usize) -> T {
        self.values[m - 1][j].clone()
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

impl FactorialMoments<f64> {
    /// CSV with columns `m,j,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,j,value")?;
        for (m, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", m + 1, j, v)?;
            }
        }
        Ok(())
    }
}

/// Factorial-moment recursion
/// `(g_m + m r) μ_m^(j) = m r (μ_(m-1)^(j) + j μ_(m-1)^(j-1)) + Σ_k g[m][k] μ_k^(j)`
/// from `μ_1^(j) = δ_(j,1)` (and `μ^(0) = 1`).
pub fn factorial_moments_generic<T: Scalar>(rates: &impl Rates<T>, r: T, n: usize, j_max: usize) -> Result<FactorialMoments<T>> {
    check_size(rates, n)?;
    let mut values: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut first = vec![T::zero(); j_max + 1];
    first[0] = T::one();
    if j_max >= 1 {
        first[1] = T::one();
    }
    values.push(first);
    for m in 2..=n {
        let mr = scalar::<T>(m) * r.clone();
        let denom = rates.total(m) + mr.clone();
        let mut row = vec![T::one(); j_max + 1];
        for j in 1..=j_max {
            let prev = &values[m - 2];
            let mut acc = mr.clone() * (prev[j].clone() + scalar::<T>(j) * prev[j - 1].clone());
            for k in 1..m {
                let g = rates.g(m, k);
                if !g.is_zero() {
                    acc = acc + g * values[k - 1][j].clone();
                }
            }
            row[j] = acc / denom.clone();
        }
        values.push(row);
    }
    Ok(FactorialMoments { j_max, values })
}

pub fn factorial_moments(table: &RateTable, r: f64, n: usize, j_max: usize) -> Result<FactorialMoments> {
    check_rate(r)?;
    factorial_moments_generic(table, r, n, j_max)
}

/// Generating functions `f_m(s) = E[s^K_m]` for `m = 1..=n` at every point
/// of `s_grid`, via `(g_m + m r) f_m(s) = m r s f_(m-1)(s) + Σ_k g[m][k] f_k(s)`.
/// Result is indexed `[m - 1][grid index]`.
pub fn pgf_values(table: &RateTable, r: f64, n: usize, s_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_rate(r)?;
    check_size(table, n)?;
    let mut f: Vec<Vec<f64>> = Vec::with_capacity(n);
    f.push(s_grid.to_vec());
    for m in 2..=n {
        let mr = m as f64 * r;
        let denom = table.total(m) + mr;
        let row: Vec<f64> = s_grid
            .iter()
            .enumerate()
            .map(|(si, &s)| {
                let mut acc = mr * s * f[m - 2][si];
                for k in 1..m {
                    acc += table.g(m, k) * f[k - 1][si];
                }
                acc / denom
            })
            .collect();
        f.push(row);
    }
    Ok(f)
}

/// Ewens sampling formula `P(K_n = k) = θ^k |s(n,k)| / [θ]_n`, indexed by
/// `k - 1`. The unsigned Stirling numbers of the first kind are built from
/// `s(n,k) = s(n-1,k-1) + (n-1) s(n-1,k)` in log space.
pub fn ewens_oracle(theta: f64, n: usize) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be positive, got {theta}")));
    }
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if n > EWENS_MAX_N {
        return Err(Error::Overflow { requested: n, max: EWENS_MAX_N });
    }
    // ls[k] = ln s(m, k) for the current m; s(1,1) = 1.
    let mut ls = vec![f64::NEG_INFINITY; n + 1];
    ls[1] = 0.0;
    for m in 2..=n {
        let lm = ((m - 1) as f64).ln();
        for k in (1..=m).rev() {
            let stay = if k < m { lm + ls[k] } else { f64::NEG_INFINITY };
            ls[k] = log_add_exp(ls[k - 1], stay);
        }
    }
    let ln_rising: f64 = (0..n).map(|i| (theta + i as f64).ln()).sum();
    let lt = theta.ln();
    Ok((1..=n).map(|k| (k as f64 * lt + ls[k] - ln_rising).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;

    #[test]
    fn kingman_theta_one_n3() {
        // θ = 2r = 1
        let t = RateTable::build(&Measure::kingman(1.0).unwrap(), 3).unwrap();
        let d = type_distribution(&t, 0.5, 3).unwrap();
        let expected = [1.0 / 3.0, 0.5, 1.0 / 6.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((d.prob(3, k + 1) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_of_one() {
        let t = RateTable::build(&Measure::star(1.0).unwrap(), 2).unwrap();
        let d = type_distribution(&t, 1.0, 1).unwrap();
        assert_eq!(d.prob(1, 1), 1.0);
        assert_eq!(all_singletons_probability(&t, 1.0, 1).unwrap(), 1.0);
    }

    #[test]
    fn star_pair() {
        let t = RateTable::build(&Measure::star(1.0).unwrap(), 2).unwrap();
        let d = type_distribution(&t, 1.0, 2).unwrap();
        assert!((d.prob(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(2, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((all_singletons_probability(&t, 1.0, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ewens_small_cases() {
        let e = ewens_oracle(1.0, 3).unwrap();
        assert!((e[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((e[1] - 0.5).abs() < 1e-14);
        assert!((e[2] - 1.0 / 6.0).abs() < 1e-14);
        assert_eq!(ewens_oracle(3.7, 1).unwrap(), vec![1.0]);
        assert!((ewens_oracle(2.0, 2).unwrap()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(ewens_oracle(1.0, EWENS_MAX_N + 1), Err(Error::Overflow { .. })));
    }

    #[test]
    fn ewens_reaches_two_hundred() {
        let e = ewens_oracle(0.5, 200).unwrap();
        let total: f64 = e.iter().sum();
        assert!((total - 1.0).abs() < 1e-11);
    }

    #[test]
    fn kingman_mean_via_factorial_moments() {
        let t = RateTable::build(&Measure::kingman(1.0).unwrap(), 3).unwrap();
        let fm = factorial_moments(&t, 0.5, 3, 3).unwrap();
        assert!((fm.get(3, 1) - 11.0 / 6.0).abs() < 1e-14);
        assert_eq!(fm.get(1, 2), 0.0);
        assert_eq!(fm.get(1, 1), 1.0);
        assert_eq!(fm.get(2, 0), 1.0);
    }

    #[test]
    fn pgf_endpoints() {
        let t = RateTable::build(&Measure::beta(1.0, 1.0).unwrap(), 12).unwrap();
        let f = pgf_values(&t, 0.8, 12, &[0.0, 1.0]).unwrap();
        for row in &f {
            assert_eq!(row[0], 0.0);
            assert!((row[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn star_pgf_identity() {
        // (1 + m r) f_m(s) = m r s f_(m-1)(s) + s
        let r = 0.7;
        let t = RateTable::build(&Measure::star(1.0).unwrap(), 15).unwrap();
        let grid = [0.1, 0.5, 0.9];
        let f = pgf_values(&t, r, 15, &grid).unwrap();
        for m in 2..=15 {
            for (si, &s) in grid.iter().enumerate() {
                let lhs = (1.0 + m as f64 * r) * f[m - 1][si];
                let rhs = m as f64 * r * s * f[m - 2][si] + s;
                assert!((lhs - rhs).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_oversized_requests() {
        let t = RateTable::build(&Measure::kingman(1.0).unwrap(), 5).unwrap();
        assert!(matches!(type_distribution(&t, 1.0, 6), Err(Error::RateTableTooSmall { .. })));
        assert!(type_distribution(&t, 0.0, 3).is_err());
    }
}
