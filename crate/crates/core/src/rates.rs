//! Jump rates of the block-counting process.
//!
//! `g[m][k]` is the rate at which a restriction with `m` blocks jumps to `k`
//! blocks, `g_total[m]` the total jump rate out of `m` blocks and
//! `r[m][k] = g[m][k] / g_total[m]` the jump distribution. The row entries and
//! the totals are computed along two independent routes so that they can be
//! checked against each other:
//!
//! * rows: closed Beta-function forms for Λ-measures, the paintbox occupancy
//!   table for Ξ-atoms;
//! * totals: the total-rate integral, evaluated for Λ through the telescoping
//!   identity `g_(m+1) - g_m = m ∫ (1-u)^(m-1) Λ(du)` and for Ξ-atoms through
//!   the probability that no box catches two blocks.
//!
//! Tables start at `m = 2`; a single block never jumps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Component, Extended, Measure, MeasureKind};
use crate::quadrature::{self, ABS_TOL, REL_TOL};
use crate::special::{choose2, drop_kernel, elementary_symmetric, ln_beta, ln_binom, one_minus_survival, survival_kernel, total_kernel};

pub mod paintbox;

pub use paintbox::Paintbox;

/// Largest table built for Λ-measures unless a caller raises it.
pub const LAMBDA_CEILING: usize = 5000;
/// Largest table built for Ξ-measures (the paintbox table is quadratic in `n`).
pub const XI_CEILING: usize = 500;

#[inline]
fn tri_index(m: usize, k: usize) -> usize {
    (m - 1) * (m - 2) / 2 + (k - 1)
}

#[derive(Debug, Clone)]
pub struct RateTable {
    n_max: usize,
    g: Vec<f64>,
    totals: Vec<f64>,
    row_sums: Vec<f64>,
}

impl RateTable {
    /// Builds the table for `2 <= m <= n_max` under the default ceilings.
    pub fn build(measure: &Measure, n_max: usize) -> Result<Self> {
        let ceiling = match measure.kind() {
            MeasureKind::Lambda => LAMBDA_CEILING,
            MeasureKind::Xi => XI_CEILING,
        };
        Self::build_with_ceiling(measure, n_max, ceiling)
    }

    pub fn build_with_ceiling(measure: &Measure, n_max: usize, ceiling: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::invalid(format!("rate tables need n_max >= 2, got {n_max}")));
        }
        if n_max > ceiling {
            return Err(Error::TableTooLarge { requested: n_max, ceiling });
        }
        let rows = RowBuilder::new(measure, n_max)?;
        let built: Vec<Vec<f64>> = (2..=n_max).into_par_iter().map(|m| rows.row(m)).collect::<Result<_>>()?;
        let mut g = Vec::with_capacity(n_max * (n_max - 1) / 2);
        let mut row_sums = vec![0.0; n_max + 1];
        for (m, row) in (2..=n_max).zip(built) {
            row_sums[m] = row.iter().sum();
            g.extend(row);
        }
        let totals = total_rates(measure, n_max)?;
        Ok(RateTable { n_max, g, totals, row_sums })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `g[m][k]` for `1 <= k < m <= n_max`; zero outside the triangle.
    #[inline]
    pub fn g(&self, m: usize, k: usize) -> f64 {
        if m < 2 || m > self.n_max || k == 0 || k >= m {
            0.0
        } else {
            self.g[tri_index(m, k)]
        }
    }

    /// Row `m` as a slice indexed by `k - 1`.
    pub fn row(&self, m: usize) -> &[f64] {
        let start = tri_index(m, 1);
        &self.g[start..start + m - 1]
    }

    /// Total jump rate `g_m` from the total-rate integral (independent of the
    /// row entries).
    #[inline]
    pub fn total(&self, m: usize) -> f64 {
        self.totals[m]
    }

    /// `Σ_k g[m][k]`.
    pub fn row_sum(&self, m: usize) -> f64 {
        self.row_sums[m]
    }

    /// Jump distribution `r[m][k] = g[m][k] / g_m`, indexed by `k - 1`.
    pub fn jump_distribution(&self, m: usize) -> Result<Vec<f64>> {
        if m < 2 || m > self.n_max {
            return Err(Error::RateTableTooSmall { requested: m, available: self.n_max });
        }
        let total = self.total(m);
        Ok(self.row(m).iter().map(|g| g / total).collect())
    }

    /// Largest relative gap between row sums and independently computed totals.
    pub fn max_row_sum_error(&self) -> f64 {
        (2..=self.n_max)
            .map(|m| ((self.row_sums[m] - self.totals[m]) / self.totals[m]).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `m,k,g_mk,r_mk`, rows ordered by `m` then `k`.
    pub fn write_rates_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,k,g_mk,r_mk")?;
        for m in 2..=self.n_max {
            let total = self.total(m);
            for (i, g) in self.row(m).iter().enumerate() {
                writeln!(w, "{},{},{},{}", m, i + 1, g, g / total)?;
            }
        }
        Ok(())
    }

    /// CSV with columns `m,g_m,row_sum`.
    pub fn write_totals_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,g_m,row_sum")?;
        for m in 2..=self.n_max {
            writeln!(w, "{},{},{}", m, self.totals[m], self.row_sums[m])?;
        }
        Ok(())
    }
}

/// Per-measure state for computing rate rows.
struct RowBuilder<'a> {
    measure: &'a Measure,
    paintboxes: Vec<(f64, Paintbox)>,
}

impl<'a> RowBuilder<'a> {
    fn new(measure: &'a Measure, n_max: usize) -> Result<Self> {
        let mut paintboxes = Vec::new();
        for c in measure.components() {
            if let Component::Simplex { x, weight, norm2, .. } = c {
                paintboxes.push((weight / norm2, Paintbox::new(x, n_max)));
            }
        }
        Ok(RowBuilder { measure, paintboxes })
    }

    fn row(&self, m: usize) -> Result<Vec<f64>> {
        let mut row = vec![0.0; m - 1];
        let kingman = self.measure.kingman_mass();
        if kingman > 0.0 {
            row[m - 2] += kingman * choose2(m);
        }
        for c in self.measure.components() {
            match *c {
                Component::Star { weight } => row[0] += weight,
                Component::Point { u, weight } => {
                    let (lu, lv) = (u.ln(), (-u).ln_1p());
                    for k in 1..m {
                        let ln = ln_binom(m as u64, k as u64 - 1) + (m - k - 1) as f64 * lu + (k - 1) as f64 * lv;
                        row[k - 1] += weight * ln.exp();
                    }
                }
                Component::Beta { a, b, weight } => {
                    let norm = ln_beta(a, b);
                    for k in 1..m {
                        let p = (m - k) as f64 + a - 1.0;
                        if p <= 0.0 {
                            return Err(Error::DivergentRate(format!("B({p}, ·) for m = {m}, k = {k}")));
                        }
                        let ln = ln_binom(m as u64, k as u64 - 1) + ln_beta(p, k as f64 + b - 1.0) - norm;
                        row[k - 1] += weight * ln.exp();
                    }
                }
                Component::Simplex { .. } => {}
            }
        }
        for (scale, pb) in &self.paintboxes {
            let dist = pb.block_count_distribution(m);
            for k in 1..m {
                row[k - 1] += scale * dist[k];
            }
        }
        Ok(row)
    }
}

/// One rate row `g[m][1..m)` without building the full table.
pub fn rate_row(measure: &Measure, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::invalid(format!("rate rows start at m = 2, got {m}")));
    }
    RowBuilder::new(measure, m)?.row(m)
}

/// Total rates `g_m` for `m = 0..=n_max` (entries 0 and 1 are zero), from
/// the total-rate integral.
pub fn total_rates(measure: &Measure, n_max: usize) -> Result<Vec<f64>> {
    let mut totals = vec![0.0; n_max + 1];
    let kingman = measure.kingman_mass();
    for (m, t) in totals.iter_mut().enumerate().skip(2) {
        *t = kingman * choose2(m);
    }
    for c in measure.components() {
        for (t, v) in totals.iter_mut().zip(component_totals(c, n_max)) {
            *t += v;
        }
    }
    Ok(totals)
}

/// Contribution of one component to `g_m`, `m = 0..=n_max`.
pub fn component_totals(c: &Component, n_max: usize) -> Vec<f64> {
    let mut totals = vec![0.0; n_max + 1];
    match *c {
        Component::Simplex { ref x, weight, norm1, norm2 } => {
            let e = elementary_symmetric(x);
            let dust = 1.0 - norm1;
            for (m, t) in totals.iter_mut().enumerate().skip(2) {
                // P(no box receives two blocks) = Σ_l (m)_l e_l (1-|x|)^(m-l).
                let mut no_merge = 0.0;
                let mut falling = 1.0;
                for (l, el) in e.iter().enumerate().take(m + 1) {
                    if l > 0 {
                        falling *= (m - l + 1) as f64;
                    }
                    no_merge += falling * el * dust.powi((m - l) as i32);
                }
                *t = weight / norm2 * (1.0 - no_merge);
            }
        }
        ref lambda => {
            // g_2 is the component mass; g_(m+1) - g_m = m E[(1-U)^(m-1)].
            let weight = lambda.weight();
            let mut acc = weight;
            let mut moment = 1.0; // E[(1-U)^(m-1)] at m = 1
            for m in 2..=n_max {
                if m > 2 {
                    acc += weight * (m - 1) as f64 * moment;
                }
                totals[m] = acc;
                moment = match *lambda {
                    Component::Star { .. } => 0.0,
                    Component::Point { u, .. } => moment * (1.0 - u),
                    Component::Beta { a, b, .. } => {
                        let bi = b + (m - 1) as f64 - 1.0;
                        moment * bi / (a + bi)
                    }
                    Component::Simplex { .. } => unreachable!(),
                };
            }
        }
    }
    totals
}

/// Expected loss of blocks at the first jump out of `m` blocks and the
/// expected number of internal branches the jump creates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockDropReport {
    pub m: usize,
    /// `E(m - I_m)` from the integral identity.
    pub e_drop: f64,
    /// `E(m - I_m) = Σ_k (m - k) r[m][k]` from the rate row.
    pub e_drop_jump_chain: f64,
    /// `E(V_m)`.
    pub e_internal: f64,
    /// `H(m) = ∫ Σ_i (1 - (1-x_i)^m) Ξ(dx)/(x,x)`.
    pub h_of_m: Extended,
}

struct DropIntegrals {
    total: f64,
    drop: f64,
    internal: f64,
}

fn drop_integrals(measure: &Measure, m: usize) -> Result<DropIntegrals> {
    let total = total_rates(measure, m)?[m];
    let kingman = measure.kingman_mass() * choose2(m);
    let mut drop = kingman;
    let mut internal_xi = kingman;
    for c in measure.components() {
        match *c {
            Component::Star { weight } => drop += weight * (m - 1) as f64,
            Component::Point { u, weight } => drop += weight * drop_kernel(m, u),
            Component::Beta { a, b, weight } => {
                let v = quadrature::beta_weighted(|u| drop_kernel(m, u), a, b, ABS_TOL, REL_TOL)?;
                drop += weight * v * (-ln_beta(a, b)).exp();
            }
            Component::Simplex { ref x, weight, norm2, .. } => {
                // m|x| - Σ(1 - (1-x_i)^m) = Σ x_i^2 D_m(x_i), all terms positive.
                let d: f64 = x.iter().map(|&xi| xi * xi * drop_kernel(m, xi)).sum();
                let v: f64 = x.iter().map(|&xi| xi * xi * total_kernel(m, xi)).sum();
                drop += weight / norm2 * d;
                internal_xi += weight / norm2 * v;
            }
        }
    }
    // For one-coordinate atoms the internal-branch integrand is the
    // total-rate integrand itself, so every jump creates one internal branch.
    let internal = match measure.kind() {
        MeasureKind::Lambda => total,
        MeasureKind::Xi => internal_xi,
    };
    Ok(DropIntegrals { total, drop, internal })
}

fn h_of_m(measure: &Measure, m: usize) -> Result<Extended> {
    if measure.kingman_mass() > 0.0 {
        return Ok(Extended::Infinite);
    }
    let mf = m as f64;
    let mut h = 0.0;
    for c in measure.components() {
        h += match *c {
            Component::Star { weight } => weight,
            Component::Point { u, weight } => weight * one_minus_survival(u, mf) / (u * u),
            Component::Simplex { ref x, weight, norm2, .. } => {
                weight / norm2 * x.iter().map(|&xi| one_minus_survival(xi, mf)).sum::<f64>()
            }
            Component::Beta { a, b, weight } => {
                if a <= 1.0 {
                    return Ok(Extended::Infinite);
                }
                let v = quadrature::beta_weighted(|u| survival_kernel(mf, u), a - 1.0, b, ABS_TOL, REL_TOL)?;
                weight * v * (-ln_beta(a, b)).exp()
            }
        };
    }
    Ok(Extended::Finite(h))
}

/// Expected block drop and internal-branch count at the first jump out of `m`
/// blocks, with the drop computed both from the integral identity and from the
/// jump distribution.
pub fn expected_block_drop(measure: &Measure, m: usize) -> Result<BlockDropReport> {
    if m < 2 {
        return Err(Error::invalid(format!("the first jump needs m >= 2 blocks, got {m}")));
    }
    let ints = drop_integrals(measure, m)?;
    let row = rate_row(measure, m)?;
    let chain: f64 = row.iter().enumerate().map(|(i, g)| (m - i - 1) as f64 * g).sum::<f64>() / ints.total;
    Ok(BlockDropReport {
        m,
        e_drop: ints.drop / ints.total,
        e_drop_jump_chain: chain,
        e_internal: ints.internal / ints.total,
        h_of_m: h_of_m(measure, m)?,
    })
}

/// `g_m E(m - I_m)` from the integral identity; exposed for dual-path checks
/// against `Σ_k (m - k) g[m][k]`.
pub fn weighted_drop_integral(measure: &Measure, m: usize) -> Result<f64> {
    Ok(drop_integrals(measure, m)?.drop)
}

/// `(m, E(m - I_m) / E(V_m))` along `grid`; the ratio diverges for measures
/// without proper frequencies.
pub fn drop_ratio_diagnostic(measure: &Measure, grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    measure.require_proper_frequencies()?;
    grid.iter()
        .map(|&m| {
            if m < 2 {
                return Err(Error::invalid(format!("grid entries must be >= 2, got {m}")));
            }
            let ints = drop_integrals(measure, m)?;
            Ok((m, ints.drop / ints.internal))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{LambdaSpec, MeasureSpec, PointAtom, SimplexAtom, XiSpec};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn kingman_three() {
        let t = RateTable::build(&Measure::kingman(1.0).unwrap(), 3).unwrap();
        assert_eq!(t.g(3, 2), 3.0);
        assert_eq!(t.g(3, 1), 0.0);
        assert_eq!(t.total(3), 3.0);
        assert_eq!(t.jump_distribution(3).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn star_rows() {
        let t = RateTable::build(&Measure::star(1.0).unwrap(), 12).unwrap();
        for m in 2..=12 {
            assert_eq!(t.g(m, 1), 1.0);
            assert_eq!(t.total(m), 1.0);
            for k in 2..m {
                assert_eq!(t.g(m, k), 0.0);
            }
        }
        assert_eq!(t.jump_distribution(7).unwrap()[0], 1.0);
    }

    #[test]
    fn half_half_atom_row_three() {
        let t = RateTable::build(&Measure::dirac(&[0.5, 0.5]).unwrap(), 3).unwrap();
        assert!(close(t.g(3, 1), 0.5, 1e-15));
        assert!(close(t.g(3, 2), 1.5, 1e-15));
        assert!(close(t.total(3), 2.0, 1e-15));
        let r = t.jump_distribution(3).unwrap();
        assert!(close(r[0], 0.25, 1e-15) && close(r[1], 0.75, 1e-15));
    }

    #[test]
    fn beta_two_one_total_mass() {
        let t = RateTable::build(&Measure::beta(2.0, 1.0).unwrap(), 2).unwrap();
        assert!(close(t.total(2), 1.0, 1e-15));
        assert!(close(t.g(2, 1), 1.0, 1e-13));
    }

    #[test]
    fn kingman_total_is_exact() {
        let t = RateTable::build(&Measure::kingman(2.5).unwrap(), 40).unwrap();
        for m in 2..=40 {
            assert_eq!(t.total(m), 2.5 * (m * (m - 1) / 2) as f64);
        }
    }

    #[test]
    fn ceiling_and_size_errors() {
        let m = Measure::kingman(1.0).unwrap();
        assert!(matches!(RateTable::build_with_ceiling(&m, 50, 10), Err(Error::TableTooLarge { .. })));
        assert!(RateTable::build(&m, 1).is_err());
        let t = RateTable::build(&m, 5).unwrap();
        assert!(matches!(t.jump_distribution(6), Err(Error::RateTableTooSmall { .. })));
    }

    #[test]
    fn lambda_atom_matches_embedded_xi_atom() {
        let l = Measure::new(MeasureSpec::Lambda(LambdaSpec {
            atoms: vec![PointAtom { u: 0.35, weight: 1.5 }, PointAtom { u: 0.8, weight: 0.5 }],
            star_mass: 0.25,
            kingman_mass: 0.5,
            ..Default::default()
        }))
        .unwrap();
        let x = l.to_xi().unwrap();
        let tl = RateTable::build(&l, 60).unwrap();
        let tx = RateTable::build(&x, 60).unwrap();
        for m in 2..=60 {
            let scale = tl.total(m);
            assert!(close(tl.total(m), tx.total(m), 1e-12), "total m={m}");
            for k in 1..m {
                assert!((tl.g(m, k) - tx.g(m, k)).abs() <= 1e-12 * scale, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn row_sums_match_totals_for_mixtures() {
        let l = Measure::new(MeasureSpec::Lambda(LambdaSpec {
            kingman_mass: 0.3,
            star_mass: 0.2,
            beta: vec![
                crate::measure::BetaComponent { a: 1.0, b: 1.0, weight: 1.0 },
                crate::measure::BetaComponent { a: 0.5, b: 2.5, weight: 0.7 },
            ],
            atoms: vec![PointAtom { u: 0.1, weight: 0.4 }],
        }))
        .unwrap();
        let t = RateTable::build(&l, 150).unwrap();
        assert!(t.max_row_sum_error() < 1e-10, "{}", t.max_row_sum_error());
        let x = Measure::new(MeasureSpec::Xi(XiSpec {
            kingman_mass: 0.1,
            atoms: vec![
                SimplexAtom { x: vec![0.4, 0.3, 0.1], weight: 1.0 },
                SimplexAtom { x: vec![0.2, 0.2, 0.2, 0.2, 0.2], weight: 0.5 },
            ],
        }))
        .unwrap();
        let t = RateTable::build(&x, 100).unwrap();
        assert!(t.max_row_sum_error() < 1e-10, "{}", t.max_row_sum_error());
    }

    #[test]
    fn block_drop_half_half_three() {
        let m = Measure::dirac(&[0.5, 0.5]).unwrap();
        assert!(close(weighted_drop_integral(&m, 3).unwrap(), 2.5, 1e-15));
        let r = expected_block_drop(&m, 3).unwrap();
        assert!(close(r.e_drop, 1.25, 1e-15));
        assert!(close(r.e_drop_jump_chain, 1.25, 1e-15));
        assert!(close(r.e_internal, 1.0, 1e-15));
        let ratio = drop_ratio_diagnostic(&m, &[3]).unwrap();
        assert!(close(ratio[0].1, 1.25, 1e-15));
    }

    #[test]
    fn block_drop_kingman_and_beta() {
        let k = expected_block_drop(&Measure::kingman(1.0).unwrap(), 9).unwrap();
        assert_eq!(k.e_drop, 1.0);
        assert_eq!(k.e_internal, 1.0);
        assert_eq!(k.h_of_m, Extended::Infinite);
        let b = expected_block_drop(&Measure::beta(2.0, 1.0).unwrap(), 2).unwrap();
        assert!(close(b.e_drop, 1.0, 1e-10));
        assert_eq!(b.e_internal, 1.0);
    }

    #[test]
    fn drop_ratio_grows_for_beta_two_one() {
        let d = drop_ratio_diagnostic(&Measure::beta(2.0, 1.0).unwrap(), &[10, 100, 1000]).unwrap();
        assert!(d[0].1 < d[1].1 && d[1].1 < d[2].1, "{d:?}");
        assert!(drop_ratio_diagnostic(&Measure::kingman(1.0).unwrap(), &[10]).is_err());
    }

    #[test]
    fn csv_is_ordered() {
        let t = RateTable::build(&Measure::kingman(1.0).unwrap(), 3).unwrap();
        let mut buf = Vec::new();
        t.write_rates_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "m,k,g_mk,r_mk\n2,1,1,1\n3,1,0,0\n3,2,3,1\n");
    }
}
