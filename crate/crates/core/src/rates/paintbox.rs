//! Block counts after one paintbox draw.
//!
//! `n` blocks are thrown independently into boxes of sizes `x_1 ≥ x_2 ≥ ...`
//! or into the dust (probability `1 - |x|`). Every nonempty box becomes one
//! block, every dust ball stays a singleton, so the block count afterwards is
//! `#dust + #nonempty boxes`.
//!
//! The occupancy table `F[u][j]` is the probability that `u` balls thrown
//! into the boxes alone (box `i` with probability `x_i / |x|`) occupy exactly
//! `j` boxes. It is built box by box: conditional on the first `i - 1` boxes,
//! box `i` receives `Binomial(u, x_i / σ_i)` of the balls, `σ_i = x_1 + ... + x_i`.
//! This is the exponential generating function recursion
//! `f(i,u,j) = f(i-1,u,j) + Σ_t x_i^t/t! f(i-1,u-t,j-1)` rescaled by
//! `u! / σ_i^u`, so every entry stays a probability. One table serves all
//! sample sizes up to its capacity.

use crate::special::Pascal;

#[derive(Debug, Clone)]
pub struct Paintbox {
    norm1: f64,
    boxes: usize,
    occupancy: Vec<Vec<f64>>,
    ln_binom: Vec<Vec<f64>>,
}

impl Paintbox {
    pub fn new(x: &[f64], n_max: usize) -> Self {
        let boxes = x.len();
        let pascal = Pascal::new(n_max);
        let mut occ = vec![vec![0.0; boxes + 1]; n_max + 1];
        occ[0][0] = 1.0;
        let mut sigma = 0.0;
        let mut q_pow = vec![1.0; n_max + 1];
        let mut p_pow = vec![1.0; n_max + 1];
        for (i, &xi) in x.iter().enumerate() {
            let sigma_next = sigma + xi;
            let q = xi / sigma_next;
            let p = sigma / sigma_next;
            for t in 1..=n_max {
                q_pow[t] = q_pow[t - 1] * q;
                p_pow[t] = p_pow[t - 1] * p;
            }
            let mut next = vec![vec![0.0; boxes + 1]; n_max + 1];
            for u in 0..=n_max {
                for j in 0..=(i + 1) {
                    let mut v = p_pow[u] * occ[u][j];
                    if j > 0 {
                        for t in 1..=u {
                            v += pascal.get(u, t) * q_pow[t] * p_pow[u - t] * occ[u - t][j - 1];
                        }
                    }
                    next[u][j] = v;
                }
            }
            occ = next;
            sigma = sigma_next;
        }
        let ln_binom = (0..=n_max)
            .map(|n| (0..=n).map(|k| pascal.get(n, k).ln()).collect())
            .collect();
        Paintbox { norm1: x.iter().sum::<f64>().min(1.0), boxes, occupancy: occ, ln_binom }
    }

    pub fn capacity(&self) -> usize {
        self.occupancy.len() - 1
    }

    /// `P(#blocks = k)` for `k = 0..=n` (entry 0 is always zero for `n ≥ 1`).
    pub fn block_count_distribution(&self, n: usize) -> Vec<f64> {
        assert!(n <= self.capacity(), "paintbox table built for n <= {}", self.capacity());
        let dust = 1.0 - self.norm1;
        let ln_dust = dust.ln();
        let ln_norm1 = self.norm1.ln();
        let mut out = vec![0.0; n + 1];
        for d in 0..=n {
            let u = n - d;
            // Binomial(n, 1-|x|) probability of exactly d dust balls.
            let weight = if dust <= 0.0 {
                if d == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let mut lw = self.ln_binom[n][d] + d as f64 * ln_dust;
                if u > 0 {
                    lw += u as f64 * ln_norm1;
                }
                lw.exp()
            };
            if weight == 0.0 {
                continue;
            }
            for j in 0..=self.boxes.min(u) {
                let f = self.occupancy[u][j];
                if f != 0.0 {
                    out[d + j] += weight * f;
                }
            }
        }
        out
    }
}
