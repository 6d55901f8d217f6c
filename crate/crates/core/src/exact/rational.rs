//! Exact rational evaluation for small samples.
//!
//! Every finite double is a dyadic rational, so measures built from Kingman
//! and star masses and from point or simplex atoms have rational jump rates.
//! Ξ-atoms go through the exponential generating function of the paintbox:
//! `f(i,u,j)` sums `Π x_l^(n_l) / n_l!` over the ways the first `i` boxes
//! absorb `u` balls with `j` of them nonempty.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{factorial_moments_generic, type_distribution_generic, FactorialMoments, Rates, TypeDistribution};
use crate::error::{Error, Result};
use crate::measure::{Component, Measure};

/// Largest sample size for exact evaluation.
pub const EXACT_MAX_N: usize = 30;

pub fn to_rational(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::invalid(format!("{v} has no exact rational value")))
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn binom(n: usize, k: usize) -> BigRational {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(acc)
}

fn pow(base: &BigRational, e: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= base;
    }
    acc
}

/// Rate table in exact arithmetic; totals are the exact row sums.
#[derive(Debug, Clone)]
pub struct RationalRates {
    n_max: usize,
    rows: Vec<Vec<BigRational>>,
    totals: Vec<BigRational>,
}

impl Rates<BigRational> for RationalRates {
    fn n_max(&self) -> usize {
        self.n_max
    }
    fn g(&self, m: usize, k: usize) -> BigRational {
        if m < 2 || m > self.n_max || k == 0 || k >= m {
            BigRational::zero()
        } else {
            self.rows[m][k - 1].clone()
        }
    }
    fn total(&self, m: usize) -> BigRational {
        self.totals[m].clone()
    }
}

impl RationalRates {
    pub fn build(measure: &Measure, n_max: usize) -> Result<Self> {
        if n_max > EXACT_MAX_N {
            return Err(Error::Overflow { requested: n_max, max: EXACT_MAX_N });
        }
        let n_max = n_max.max(2);
        let mut rows: Vec<Vec<BigRational>> = (0..=n_max).map(|m| vec![BigRational::zero(); m.saturating_sub(1)]).collect();
        let kingman = to_rational(measure.kingman_mass())?;
        if !kingman.is_zero() {
            for (m, row) in rows.iter_mut().enumerate().skip(2) {
                row[m - 2] += &kingman * binom(m, 2);
            }
        }
        let mut factorial = vec![BigRational::one(); n_max + 1];
        for i in 1..=n_max {
            factorial[i] = &factorial[i - 1] * int(i);
        }
        for c in measure.components() {
            match c {
                Component::Star { weight } => {
                    let w = to_rational(*weight)?;
                    for row in rows.iter_mut().skip(2) {
                        row[0] += &w;
                    }
                }
                Component::Point { u, weight } => {
                    let w = to_rational(*weight)?;
                    let u = to_rational(*u)?;
                    let v = BigRational::one() - &u;
                    for (m, row) in rows.iter_mut().enumerate().skip(2) {
                        for k in 1..m {
                            row[k - 1] += &w * binom(m, k - 1) * pow(&u, m - k - 1) * pow(&v, k - 1);
                        }
                    }
                }
                Component::Simplex { x, weight, .. } => {
                    let xs: Vec<BigRational> = x.iter().map(|&v| to_rational(v)).collect::<Result<_>>()?;
                    let norm1: BigRational = xs.iter().fold(BigRational::zero(), |a, b| a + b);
                    let norm2: BigRational = xs.iter().fold(BigRational::zero(), |a, b| a + b * b);
                    let scale = to_rational(*weight)? / norm2;
                    let dust = BigRational::one() - norm1;
                    let f = egf_table(&xs, n_max, &factorial);
                    let s = xs.len();
                    for (m, row) in rows.iter_mut().enumerate().skip(2) {
                        for k in 1..m {
                            let mut p = BigRational::zero();
                            for j in 1..=s.min(k) {
                                let d = k - j;
                                let term = &f[m - d][j];
                                if term.is_zero() {
                                    continue;
                                }
                                p += &factorial[m] * pow(&dust, d) / &factorial[d] * term;
                            }
                            row[k - 1] += &scale * p;
                        }
                    }
                }
                Component::Beta { .. } => {
                    return Err(Error::UnsupportedMeasure(
                        "exact rational mode needs atomic measures; beta densities have irrational rates".into(),
                    ))
                }
            }
        }
        let totals = rows.iter().map(|row| row.iter().fold(BigRational::zero(), |a, b| a + b)).collect();
        Ok(RationalRates { n_max, rows, totals })
    }
}

/// `f[u][j]` after all boxes have been processed.
fn egf_table(x: &[BigRational], n_max: usize, factorial: &[BigRational]) -> Vec<Vec<BigRational>> {
    let s = x.len();
    let mut f = vec![vec![BigRational::zero(); s + 1]; n_max + 1];
    f[0][0] = BigRational::one();
    for (i, xi) in x.iter().enumerate() {
        let terms: Vec<BigRational> = (0..=n_max).map(|t| pow(xi, t) / &factorial[t]).collect();
        let mut next = f.clone();
        for u in 1..=n_max {
            for j in 1..=(i + 1) {
                let mut acc = BigRational::zero();
                for t in 1..=u {
                    if !f[u - t][j - 1].is_zero() {
                        acc += &terms[t] * &f[u - t][j - 1];
                    }
                }
                next[u][j] += acc;
            }
        }
        f = next;
    }
    f
}

/// Exact `P(K_m = k)` for `m <= n`.
pub fn exact_type_distribution(measure: &Measure, r: f64, n: usize) -> Result<TypeDistribution<BigRational>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("mutation rate must be positive and finite, got {r}")));
    }
    let rates = RationalRates::build(measure, n)?;
    type_distribution_generic(&rates, to_rational(r)?, n)
}

/// Exact factorial moments for `m <= n`.
pub fn exact_factorial_moments(measure: &Measure, r: f64, n: usize, j_max: usize) -> Result<FactorialMoments<BigRational>> {
    let rates = RationalRates::build(measure, n)?;
    factorial_moments_generic(&rates, to_rational(r)?, n, j_max)
}

/// Decimal approximation of an exact probability.
pub fn approx(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
