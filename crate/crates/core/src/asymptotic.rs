//! Limit law of `K_n / n` for coalescents without proper frequencies.
//!
//! The limit `K = r ∫ e^{-rt} e^{-X_t} dt` is an exponential functional of
//! the subordinator `X_t = -log S_t` with Laplace exponent `Φ`. Its moments are
//! `E(K^j) = Π_{i≤j} i r / (i r + Φ(i))`. When the measure is simple,
//! `X` is compound Poisson with intensity `m_0` and `K` solves the perpetuity
//! `K = B + A (1 - B) K`, where `B ~ Beta(1, m_0 / r)` and `A = 1 - |x|` for a
//! jump `x` drawn from `Ξ(dx) / ((x,x) m_0)`. Iterating the perpetuity gives
//! the series `Σ_i B_i Π_{j<i} A_j (1 - B_j)` used by the sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Component, ConditionReport, Measure};
use crate::special::ln_beta;
use crate::stats::{self, Estimate, KsResult};

/// Default truncation threshold of the perpetuity series.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Hard cap on series terms per draw.
pub const MAX_TERMS: usize = 10_000_000;

/// One piece of the mixture law of `A = 1 - |x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ALawPart {
    /// `A` equals `value`.
    Atom { value: f64, prob: f64 },
    /// `1 - A ~ Beta(a, b)`.
    OneMinusBeta { a: f64, b: f64, prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleParams {
    pub m0: f64,
    /// Second shape parameter `m_0 / r` of `B ~ Beta(1, m_0 / r)`.
    pub b_shape: f64,
    pub a_law: Vec<ALawPart>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLaw {
    pub r: f64,
    pub conditions: ConditionReport,
    /// `phi[j] = Φ(j)`, `phi[0] = 0`.
    pub phi: Vec<f64>,
    /// `moments[j] = E(K^j)`, `moments[0] = 1`.
    pub moments: Vec<f64>,
    /// `r² / ((r + Φ(1))² (2r + Φ(2))) ∫ |x|²/(x,x) Ξ(dx)`.
    pub variance: f64,
    /// `E(K²) - E(K)²`.
    pub variance_from_moments: f64,
    pub simple_params: Option<SimpleParams>,
}

impl LimitLaw {
    pub fn j_max(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.moments[1]
    }

    /// Smallest iterated difference `Σ_i (-1)^i C(m,i) E(K^(k+i))` over
    /// `k + m <= j_max`. A law on `[0, 1]` makes all of them nonnegative.
    pub fn min_hausdorff_difference(&self) -> f64 {
        let j = self.j_max();
        let mut min = f64::INFINITY;
        for k in 0..=j {
            // Forward differences of the tail sequence starting at k.
            let mut diffs: Vec<f64> = self.moments[k..].to_vec();
            for _m in 1..=(j - k) {
                diffs = diffs.windows(2).map(|w| w[0] - w[1]).collect();
                min = min.min(diffs[0]);
            }
        }
        min
    }
}

fn mixture_a_law(measure: &Measure, m0: f64) -> Vec<ALawPart> {
    measure
        .components()
        .iter()
        .map(|c| match *c {
            Component::Star { weight } => ALawPart::Atom { value: 0.0, prob: weight / m0 },
            Component::Point { u, weight } => ALawPart::Atom { value: 1.0 - u, prob: weight / (u * u) / m0 },
            Component::Simplex { weight, norm1, norm2, .. } => {
                ALawPart::Atom { value: (1.0 - norm1).max(0.0), prob: weight / norm2 / m0 }
            }
            Component::Beta { a, b, weight } => {
                // u^(a-3)(1-u)^(b-1)/B(a,b) has mass B(a-2,b)/B(a,b).
                let mass = weight * (ln_beta(a - 2.0, b) - ln_beta(a, b)).exp();
                ALawPart::OneMinusBeta { a: a - 2.0, b, prob: mass / m0 }
            }
        })
        .filter(|p| match *p {
            ALawPart::Atom { prob, .. } | ALawPart::OneMinusBeta { prob, .. } => prob > 0.0,
        })
        .collect()
}

/// Moments of the limit of `K_n / n` up to order `j_max`.
pub fn limit_law(measure: &Measure, r: f64, j_max: usize) -> Result<LimitLaw> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("mutation rate must be positive and finite, got {r}")));
    }
    let conditions = measure.require_proper_frequencies()?;
    let orders = j_max.max(2);
    let mut phi = vec![0.0; orders + 1];
    for (j, p) in phi.iter_mut().enumerate().skip(1) {
        *p = measure.laplace_exponent(j as f64)?;
    }
    let mut moments = vec![1.0; j_max + 1];
    for j in 1..=j_max {
        let jr = j as f64 * r;
        moments[j] = moments[j - 1] * jr / (jr + phi[j]);
    }
    let variance = r * r / ((r + phi[1]).powi(2) * (2.0 * r + phi[2])) * measure.square_functional();
    let m1 = r / (r + phi[1]);
    let m2 = m1 * 2.0 * r / (2.0 * r + phi[2]);
    let simple_params = match (conditions.simple_condition, conditions.m0.finite()) {
        (true, Some(m0)) => Some(SimpleParams { m0, b_shape: m0 / r, a_law: mixture_a_law(measure, m0) }),
        _ => None,
    };
    phi.truncate(j_max.max(1) + 1);
    Ok(LimitLaw { r, conditions, phi, moments, variance, variance_from_moments: m2 - m1 * m1, simple_params })
}

/// Draws from the perpetuity series.
#[derive(Debug, Clone)]
pub struct FixedPointSampler {
    r: f64,
    params: SimpleParams,
    epsilon: f64,
    cumulative: Vec<f64>,
    betas: Vec<Option<Beta<f64>>>,
    seed: u64,
}

/// One truncated series draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub terms: usize,
    /// Upper bound on the discarded tail: the running product at truncation.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSamples {
    pub seed: u64,
    pub epsilon: f64,
    pub values: Vec<f64>,
    pub mean_terms: f64,
    pub max_terms: usize,
    pub max_tail_bound: f64,
}

impl FixedPointSampler {
    pub fn new(measure: &Measure, r: f64, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::BadEpsilon(epsilon));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("mutation rate must be positive and finite, got {r}")));
        }
        let (_, m0) = measure.require_simple()?;
        let params = SimpleParams { m0, b_shape: m0 / r, a_law: mixture_a_law(measure, m0) };
        let mut cumulative = Vec::with_capacity(params.a_law.len());
        let mut acc = 0.0;
        let mut betas = Vec::with_capacity(params.a_law.len());
        for part in &params.a_law {
            match *part {
                ALawPart::Atom { prob, .. } => {
                    acc += prob;
                    betas.push(None);
                }
                ALawPart::OneMinusBeta { a, b, prob } => {
                    acc += prob;
                    betas.push(Some(Beta::new(a, b).map_err(|e| Error::invalid(format!("beta({a}, {b}): {e}")))?));
                }
            }
            cumulative.push(acc);
        }
        Ok(FixedPointSampler { r, params, epsilon, cumulative, betas, seed })
    }

    pub fn params(&self) -> &SimpleParams {
        &self.params
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// `B ~ Beta(1, m_0/r)` by inversion of `P(B > x) = (1-x)^(m_0/r)`.
    pub fn draw_b<R: Rng>(&self, rng: &mut R) -> f64 {
        let v: f64 = 1.0 - rng.random::<f64>(); // in (0, 1]
        -(self.r / self.params.m0 * v.ln()).exp_m1()
    }

    pub fn draw_a<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let target = rng.random::<f64>() * total;
        let idx = self.cumulative.iter().position(|&c| target < c).unwrap_or(self.cumulative.len() - 1);
        match (self.params.a_law[idx], &self.betas[idx]) {
            (ALawPart::Atom { value, .. }, _) => value,
            (ALawPart::OneMinusBeta { .. }, Some(beta)) => 1.0 - beta.sample(rng),
            (ALawPart::OneMinusBeta { .. }, None) => unreachable!(),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Draw {
        let mut value = 0.0;
        let mut product = 1.0;
        let mut terms = 0;
        loop {
            let b = self.draw_b(rng);
            value += product * b;
            product *= self.draw_a(rng) * (1.0 - b);
            terms += 1;
            if product < self.epsilon || terms >= MAX_TERMS {
                break;
            }
        }
        Draw { value, terms, tail_bound: product }
    }

    /// Draw number `index`, reproducible from `(seed, index)` alone.
    pub fn draw_indexed(&self, index: u64) -> Draw {
        self.draw(&mut self.rng(index))
    }

    pub fn sample(&self, count: usize) -> FixedPointSamples {
        self.sample_range(0, count)
    }

    fn sample_range(&self, first: u64, count: usize) -> FixedPointSamples {
        let draws: Vec<Draw> = (0..count as u64).into_par_iter().map(|i| self.draw_indexed(first + i)).collect();
        let total_terms: usize = draws.iter().map(|d| d.terms).sum();
        FixedPointSamples {
            seed: self.seed,
            epsilon: self.epsilon,
            values: draws.iter().map(|d| d.value).collect(),
            mean_terms: total_terms as f64 / count.max(1) as f64,
            max_terms: draws.iter().map(|d| d.terms).max().unwrap_or(0),
            max_tail_bound: draws.iter().map(|d| d.tail_bound).fold(0.0, f64::max),
        }
    }

    /// Two-sample KS test of `M` against `B + A (1 - B) M'`, with `M'`,
    /// `A`, `B` drawn from streams disjoint from those of `M`.
    pub fn self_consistency(&self, count: usize) -> KsResult {
        let m = self.sample_range(0, count).values;
        let m_prime = self.sample_range(count as u64, count).values;
        let offset = 2 * count as u64;
        let mapped: Vec<f64> = m_prime
            .par_iter()
            .enumerate()
            .map(|(i, &mp)| {
                let mut rng = self.rng(offset + i as u64);
                let b = self.draw_b(&mut rng);
                let a = self.draw_a(&mut rng);
                b + a * (1.0 - b) * mp
            })
            .collect();
        stats::ks_two_sample(&m, &mapped)
    }
}

/// Samples of the limit through the perpetuity series.
pub fn fixed_point_sample(measure: &Measure, r: f64, seed: u64, count: usize, epsilon: f64) -> Result<FixedPointSamples> {
    Ok(FixedPointSampler::new(measure, r, epsilon, seed)?.sample(count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub j: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub se: f64,
    /// `|empirical - analytic| / se`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub rows: Vec<MomentRow>,
    pub max_z: f64,
}

/// Empirical against analytic moments `E(K^j)`, `j = 0..=j_max`.
pub fn moment_check(samples: &[f64], law: &LimitLaw, j_max: usize) -> MomentCheck {
    let j_max = j_max.min(law.j_max());
    let mut rows = vec![MomentRow { j: 0, analytic: 1.0, empirical: 1.0, se: 0.0, z: 0.0 }];
    for (i, est) in stats::raw_moments(samples, j_max).into_iter().enumerate() {
        let j = i + 1;
        let Estimate { mean, se } = est;
        rows.push(MomentRow { j, analytic: law.moments[j], empirical: mean, se, z: est.z(law.moments[j]) });
    }
    let max_z = rows.iter().map(|r| r.z).fold(0.0, f64::max);
    MomentCheck { rows, max_z }
}

/// CDF of `Beta(1, beta)`.
pub fn beta_one_cdf(beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        -(beta * (-x).ln_1p()).exp_m1()
    }
}
