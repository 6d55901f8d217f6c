//! Special functions and the polynomial kernels that appear under the
//! rate integrals.
//!
//! The kernels are written as functions of a merger fraction `u` for a state
//! with `m` blocks. Each has an alternating closed form that cancels badly
//! for small `m * u`, so below that threshold they are summed as positive
//! binomial series instead.

pub use statrs::function::beta::ln_beta;
pub use statrs::function::gamma::ln_gamma;

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `C(n, 2)` as a float.
#[inline]
pub fn choose2(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n * (n - 1.0)
}

/// Rows of Pascal's triangle in double precision.
///
/// Every entry is the correctly rounded binomial up to `n = 56`; above that
/// the relative error grows like `n * eps`, which is far below the
/// tolerances the paintbox computations are checked against.
#[derive(Debug, Clone)]
pub struct Pascal {
    rows: Vec<Vec<f64>>,
}

impl Pascal {
    pub fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
        rows.push(vec![1.0]);
        for n in 1..=n_max {
            let prev = &rows[n - 1];
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        Pascal { rows }
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> f64 {
        if k > n {
            0.0
        } else {
            self.rows[n][k]
        }
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `(1 - u)^p` computed as `exp(p * ln(1 - u))`, exact at the endpoints.
#[inline]
pub fn one_minus_pow(u: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        (p * (-u).ln_1p()).exp()
    }
}

/// `1 - (1 - u)^eta` without cancellation for small `u`; zero at `eta = 0`.
#[inline]
pub fn one_minus_survival(u: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        -(eta * (-u).ln_1p()).exp_m1()
    }
}

/// Sum of `w(j) * C(m, j) u^(j-2) (1-u)^(m-j)` over `j = 2..=m`, evaluated by
/// ratio recursion from `j = 2`. Only used when `m * u` is small, so the terms
/// decay geometrically and the loop stops early.
fn binomial_tail_series(m: usize, u: f64, weight: impl Fn(usize) -> f64) -> f64 {
    let mf = m as f64;
    let ratio = u / (1.0 - u);
    let mut term = choose2(m) * one_minus_pow(u, mf - 2.0);
    let mut sum = 0.0;
    for j in 2..=m {
        let contrib = weight(j) * term;
        sum += contrib;
        if contrib <= 1e-18 * sum && j > 2 {
            break;
        }
        term *= (mf - j as f64) / (j as f64 + 1.0) * ratio;
    }
    sum
}

/// `(1 - (1-u)^m - m u (1-u)^(m-1)) / u^2`: the total-rate kernel, whose
/// integral against `Λ(du)` is the total jump rate out of `m` blocks.
/// Continuous at `u = 0` with value `C(m, 2)`.
pub fn total_kernel(m: usize, u: f64) -> f64 {
    if m < 2 {
        return 0.0;
    }
    if u <= 0.0 {
        return choose2(m);
    }
    let mf = m as f64;
    if mf * u < 1.0 {
        binomial_tail_series(m, u, |_| 1.0)
    } else {
        (one_minus_survival(u, mf) - mf * u * one_minus_pow(u, mf - 1.0)) / (u * u)
    }
}

/// `((1-u)^m - 1 + m u) / u^2`: integrated against `Λ(du)` this is
/// `g_m E(m - I_m)`. Continuous at `u = 0` with value `C(m, 2)`.
pub fn drop_kernel(m: usize, u: f64) -> f64 {
    if m < 2 {
        return 0.0;
    }
    if u <= 0.0 {
        return choose2(m);
    }
    let mf = m as f64;
    if mf * u < 1.0 {
        binomial_tail_series(m, u, |j| (j - 1) as f64)
    } else {
        (one_minus_pow(u, mf) - 1.0 + mf * u) / (u * u)
    }
}

/// `(1 - (1-u)^eta) / u`, continuous at `u = 0` with value `eta`.
pub fn survival_kernel(eta: f64, u: f64) -> f64 {
    if u <= 0.0 {
        eta
    } else {
        one_minus_survival(u, eta) / u
    }
}

/// Elementary symmetric polynomials `e_0..=e_len` of `x`.
pub fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        for l in (1..=i + 1).rev() {
            e[l] += xi * e[l - 1];
        }
    }
    e
}
