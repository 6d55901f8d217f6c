//! Globally adaptive 21-point Gauss–Kronrod quadrature and a wrapper for
//! integrands carrying beta-type endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute tolerance used by the rate and Laplace-exponent integrals.
pub const ABS_TOL: f64 = 1e-10;
/// Relative tolerance used by the rate and Laplace-exponent integrals.
pub const REL_TOL: f64 = 1e-10;

const MAX_INTERVALS: usize = 2000;

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_063_330_761,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    magnitude: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Segment { a, b, value, error, magnitude: abs_sum }
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let first = kronrod21(&f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut magnitude = first.magnitude;
    // Below this floor the error estimate is rounding noise.
    while total_err > abs_tol.max(rel_tol * total.abs()).max(60.0 * f64::EPSILON * magnitude) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure { estimate: total, error: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureFailure { estimate: total, error: total_err });
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        magnitude += left.magnitude + right.magnitude - worst.magnitude;
        heap.push(left);
        heap.push(right);
        if !total.is_finite() {
            return Err(Error::QuadratureFailure { estimate: total, error: total_err });
        }
    }
    // Re-sum to shed the drift from incremental updates.
    Ok(heap.iter().map(|s| s.value).sum())
}

/// `∫_0^1 h(u) u^(p-1) (1-u)^(q-1) du` for smooth bounded `h` and `p, q > 0`.
///
/// The interval is split at 1/2. On the left half the substitution
/// `u = t^(1/p)` absorbs `u^(p-1) du` into `dt / p`; the right half uses the
/// mirror substitution `1 - u = s^(1/q)`.
pub fn beta_weighted<H: Fn(f64) -> f64>(h: H, p: f64, q: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    debug_assert!(p > 0.0 && q > 0.0);
    let left = integrate(
        |t: f64| {
            let u = t.powf(1.0 / p);
            h(u) * crate::special::one_minus_pow(u, q - 1.0) / p
        },
        0.0,
        0.5f64.powf(p),
        abs_tol * 0.5,
        rel_tol,
    )?;
    let right = integrate(
        |s: f64| {
            let v = s.powf(1.0 / q);
            let u = 1.0 - v;
            h(u) * crate::special::one_minus_pow(v, p - 1.0) / q
        },
        0.0,
        0.5f64.powf(q),
        abs_tol * 0.5,
        rel_tol,
    )?;
    Ok(left + right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_beta;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-12).unwrap();
        assert!(v.abs() < 1e-11);
    }

    #[test]
    fn beta_weighted_recovers_beta_function() {
        for &(p, q) in &[(0.3, 0.7), (1.5, 0.5), (2.5, 1.0), (0.5, 4.0), (5.0, 0.2)] {
            let v = beta_weighted(|_| 1.0, p, q, 1e-13, 1e-13).unwrap();
            let exact = ln_beta(p, q).exp();
            assert!((v - exact).abs() < 1e-11 * exact, "p={p} q={q}: {v} vs {exact}");
        }
    }

    #[test]
    fn beta_weighted_with_smooth_factor() {
        // ∫ u * u^(p-1)(1-u)^(q-1) = B(p+1, q)
        let v = beta_weighted(|u| u, 0.4, 0.6, 1e-13, 1e-13).unwrap();
        let exact = ln_beta(1.4, 0.6).exp();
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn non_integrable_singularity_fails() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, 1e-12);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
