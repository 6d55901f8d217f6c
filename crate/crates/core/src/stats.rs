//! Goodness-of-fit tests used to compare simulations with exact values.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic 1% quantile of the Kolmogorov distribution.
pub const KOLMOGOROV_1PCT: f64 = 1.6276;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub passed: bool,
}

/// `P(sup |B_t| > x)` for a Brownian bridge.
pub fn kolmogorov_survival(x: f64) -> f64 {
    // The alternating series converges slowly near zero, where the value is 1.
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF at the 1%
/// level, with Stephens' finite-sample scaling.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    finish(d, n.sqrt())
}

/// Two-sample Kolmogorov-Smirnov test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let effective = ((n * m) as f64 / (n + m) as f64).sqrt();
    finish(d, effective)
}

fn finish(d: f64, sqrt_n: f64) -> KsResult {
    let scale = sqrt_n + 0.12 + 0.11 / sqrt_n;
    KsResult {
        statistic: d,
        critical: KOLMOGOROV_1PCT / scale,
        p_value: kolmogorov_survival(scale * d),
        passed: d < KOLMOGOROV_1PCT / scale,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling.
    pub cells: usize,
}

impl ChiSquareResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Pearson chi-square goodness of fit of `observed` counts against cell
/// probabilities `expected`. Adjacent cells are pooled until every pooled cell
/// expects at least `min_expected` observations.
pub fn chi_square(observed: &[u64], expected: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &pi) in observed.iter().zip(expected) {
        o += oi as f64;
        e += pi * n;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if o > 0.0 || e > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        ChiSquared::new(dof as f64).map(|c| c.sf(statistic)).unwrap_or(0.0)
    };
    ChiSquareResult { statistic, dof, p_value, cells: cells.len() }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Distance from `target` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        if self.se > 0.0 {
            (self.mean - target).abs() / self.se
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn estimate(values: impl IntoIterator<Item = f64>) -> Estimate {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    Estimate { mean, se: (var / n.max(1.0)).sqrt() }
}

/// Raw moments `E(X^j)`, `j = 1..=j_max`.
pub fn raw_moments(samples: &[f64], j_max: usize) -> Vec<Estimate> {
    (1..=j_max).map(|j| estimate(samples.iter().map(|x| x.powi(j as i32)))).collect()
}

/// Binomial proportion `hits / n` with its standard error under `p`.
pub fn proportion_z(hits: u64, n: u64, p: f64) -> f64 {
    let nf = n as f64;
    let se = (p * (1.0 - p) / nf).sqrt();
    let diff = (hits as f64 / nf - p).abs();
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
