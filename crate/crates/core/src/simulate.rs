//! Monte Carlo simulation of the coalescent tree with mutations.
//!
//! Two engines build the genealogy of `n` leaves:
//!
//! * Λ-mode: with `b` blocks the next event comes after `Exp(g_b)`; the
//!   firing component (Kingman mass, star mass, a beta density or a point
//!   atom) is picked in proportion to its share of `g_b`, the number `j` of
//!   merging blocks is drawn from that component's law, and a uniformly
//!   chosen `j`-subset of blocks merges. The rates are generated on the fly,
//!   so `n` is not limited by the size of a stored rate table.
//! * Ξ-mode: each atom `x` rings at rate `weight/(x,x)` and paints every
//!   block into box `i` with probability `x_i` (dust otherwise); co-boxed
//!   blocks merge. Ticks that merge nothing change nothing, so the engine
//!   waits directly for the next effective tick (rate `g_b`) and rejects
//!   silent paintings; the rejected count is kept in the record. A Kingman
//!   part merges a uniform pair at rate `a·C(b,2)`.
//!
//! Mutations are superimposed afterwards. Under infinitely many alleles a
//! leaf's type is set by the most recent mutation above it, so only whether a
//! segment carries at least one mutation matters: each segment is marked
//! with probability `1 - exp(-r·duration)`.
//!
//! Replicate `i` of a run uses its own ChaCha stream `(seed, i)`, and all
//! aggregates are integer sums, so results do not depend on the number of
//! worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Component, Measure, MeasureKind};
use crate::rates::component_totals;
use crate::special::{choose2, ln_beta, ln_binom};

/// Parent entry of the root.
pub const NO_PARENT: usize = usize::MAX;

/// One collision event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub blocks_before: usize,
    pub blocks_after: usize,
    /// Nodes `first_node .. first_node + new_nodes` were created here; their
    /// children are listed through the parent array.
    pub first_node: usize,
    pub new_nodes: usize,
}

/// A branch of the tree: the lifetime of `node` until it merges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub node: usize,
    pub start: f64,
    pub end: f64,
    pub is_external: bool,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Simulated tree. Leaves are nodes `0..n`, internal nodes follow in order of
/// creation, so a parent always has a larger id than its children and the
/// root is the last node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenealogyRecord {
    pub n: usize,
    pub parent: Vec<usize>,
    pub time: Vec<f64>,
    pub events: Vec<Event>,
    /// Paintings rejected because no box caught two blocks (Ξ-mode only).
    pub silent_ticks: u64,
}

impl GenealogyRecord {
    fn reset(&mut self, n: usize) {
        self.n = n;
        self.parent.clear();
        self.parent.resize(n, NO_PARENT);
        self.time.clear();
        self.time.resize(n, 0.0);
        self.events.clear();
        self.silent_ticks = 0;
    }

    pub fn nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.nodes() - 1
    }

    /// Number of collision events until one block remains.
    pub fn c_n(&self) -> usize {
        self.events.len()
    }

    /// Block count right after the first jump (0 for a single leaf).
    pub fn i_n(&self) -> usize {
        self.events.first().map_or(0, |e| e.blocks_after)
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..node).filter(|&v| self.parent[v] == node).collect()
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.nodes()).filter(|&v| self.parent[v] != NO_PARENT).map(move |v| Segment {
            node: v,
            start: self.time[v],
            end: self.time[self.parent[v]],
            is_external: v < self.n,
        })
    }

    pub fn external_lengths(&self) -> Vec<f64> {
        (0..self.n).filter(|&v| self.parent[v] != NO_PARENT).map(|v| self.time[self.parent[v]]).collect()
    }

    fn merge(&mut self, time: f64, groups: &[&[usize]], blocks_before: usize, blocks_after: usize) -> usize {
        let first = self.nodes();
        for (i, group) in groups.iter().enumerate() {
            let id = first + i;
            for &child in group.iter() {
                self.parent[child] = id;
            }
            self.parent.push(NO_PARENT);
            self.time.push(time);
        }
        self.events.push(Event { time, blocks_before, blocks_after, first_node: first, new_nodes: groups.len() });
        first
    }
}

/// Mutation summary of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MutationRecord {
    /// Distinct types among the leaves.
    pub k_n: usize,
    /// Types carried by exactly one leaf.
    pub k_n1: usize,
    /// Mutated external segments.
    pub m_n: usize,
    /// Mutated segments.
    pub n_n: usize,
}

impl MutationRecord {
    /// `M_n <= K_n1 <= K_n <= N_n + 1`.
    pub fn chain_holds(&self) -> bool {
        self.m_n <= self.k_n1 && self.k_n1 <= self.k_n && self.k_n <= self.n_n + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicateRecord {
    pub rep: u64,
    pub k_n: usize,
    pub k_n1: usize,
    pub m_n: usize,
    pub n_n: usize,
    pub c_n: usize,
    pub i_n: usize,
}

impl ReplicateRecord {
    pub fn chain_holds(&self) -> bool {
        self.m_n <= self.k_n1 && self.k_n1 <= self.k_n && self.k_n <= self.n_n + 1
    }
}

#[derive(Debug, Clone)]
enum LambdaPart {
    Star,
    Point { u: f64, weight: f64 },
    Beta { a: f64, b: f64, ln_norm: f64, weight: f64 },
}

#[derive(Debug, Clone)]
struct XiAtom {
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Engine {
    Lambda { parts: Vec<(LambdaPart, Vec<f64>)> },
    Xi { atoms: Vec<(XiAtom, Vec<f64>)> },
}

/// Genealogy generator for a fixed measure and sample size.
#[derive(Debug, Clone)]
pub struct Simulator {
    n: usize,
    kingman: f64,
    engine: Engine,
}

/// Reusable buffers for one worker.
#[derive(Debug, Default)]
pub struct Workspace {
    genealogy: GenealogyRecord,
    active: Vec<usize>,
    boxes: Vec<Vec<usize>>,
    kept: Vec<usize>,
    types: Vec<usize>,
    counts: Vec<u32>,
    mutated: Vec<bool>,
}

impl Workspace {
    pub fn genealogy(&self) -> &GenealogyRecord {
        &self.genealogy
    }
}

impl Simulator {
    /// Λ-measures run in Λ-mode, Ξ-measures in Ξ-mode.
    pub fn new(measure: &Measure, n: usize) -> Result<Self> {
        match measure.kind() {
            MeasureKind::Lambda => Self::lambda_mode(measure, n),
            MeasureKind::Xi => Self::xi_mode(measure, n),
        }
    }

    pub fn lambda_mode(measure: &Measure, n: usize) -> Result<Self> {
        if measure.kind() != MeasureKind::Lambda {
            return Err(Error::UnsupportedMeasure(
                "Λ-mode merges one group per event; Ξ-measures need the paintbox engine".into(),
            ));
        }
        check_n(n)?;
        let parts = measure
            .components()
            .iter()
            .map(|c| {
                let part = match *c {
                    Component::Star { .. } => LambdaPart::Star,
                    Component::Point { u, weight } => LambdaPart::Point { u, weight },
                    Component::Beta { a, b, weight } => LambdaPart::Beta { a, b, ln_norm: ln_beta(a, b), weight },
                    Component::Simplex { .. } => unreachable!("Λ-measure holds no simplex atoms"),
                };
                (part, component_totals(c, n))
            })
            .collect();
        Ok(Simulator { n, kingman: measure.kingman_mass(), engine: Engine::Lambda { parts } })
    }

    /// Paintbox engine; Λ-measures are embedded first (beta densities are
    /// rejected).
    pub fn xi_mode(measure: &Measure, n: usize) -> Result<Self> {
        check_n(n)?;
        let xi = measure.to_xi()?;
        let atoms = xi
            .components()
            .iter()
            .map(|c| match c {
                Component::Simplex { x, .. } => {
                    let mut acc = 0.0;
                    let cumulative = x
                        .iter()
                        .map(|v| {
                            acc += v;
                            acc
                        })
                        .collect();
                    Ok((XiAtom { cumulative }, component_totals(c, n)))
                }
                _ => Err(Error::UnsupportedMeasure("Ξ-mode needs simplex atoms".into())),
            })
            .collect::<Result<_>>()?;
        Ok(Simulator { n, kingman: xi.kingman_mass(), engine: Engine::Xi { atoms } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn has_no_parts(&self) -> bool {
        match &self.engine {
            Engine::Lambda { parts } => parts.is_empty(),
            Engine::Xi { atoms } => atoms.is_empty(),
        }
    }

    pub fn is_lambda_mode(&self) -> bool {
        matches!(self.engine, Engine::Lambda { .. })
    }

    /// Total rate out of `b` blocks.
    pub fn total_rate(&self, b: usize) -> f64 {
        let parts: f64 = match &self.engine {
            Engine::Lambda { parts } => parts.iter().map(|(_, t)| t[b]).sum(),
            Engine::Xi { atoms } => atoms.iter().map(|(_, t)| t[b]).sum(),
        };
        self.kingman * choose2(b) + parts
    }

    pub fn simulate_genealogy<R: Rng>(&self, rng: &mut R) -> GenealogyRecord {
        let mut ws = Workspace::default();
        self.simulate_into(&mut ws, rng);
        ws.genealogy
    }

    /// Builds a genealogy into `ws.genealogy`.
    pub fn simulate_into<R: Rng>(&self, ws: &mut Workspace, rng: &mut R) {
        let n = self.n;
        ws.genealogy.reset(n);
        ws.active.clear();
        ws.active.extend(0..n);
        let mut t = 0.0;
        while ws.active.len() > 1 {
            let b = ws.active.len();
            let total = self.total_rate(b);
            let wait: f64 = rng.sample(Exp1);
            t += wait / total;
            let mut pick = rng.random::<f64>() * total;
            let kingman = self.kingman * choose2(b);
            if pick < kingman || self.has_no_parts() {
                self.merge_subset(ws, rng, t, 2);
                continue;
            }
            pick -= kingman;
            match &self.engine {
                Engine::Lambda { parts } => {
                    let idx = choose_part(parts.iter().map(|(_, tot)| tot[b]), pick);
                    let (part, totals) = &parts[idx];
                    let j = merge_size(part, b, totals[b], rng);
                    self.merge_subset(ws, rng, t, j);
                }
                Engine::Xi { atoms } => {
                    let idx = choose_part(atoms.iter().map(|(_, tot)| tot[b]), pick);
                    paint(ws, &atoms[idx].0, rng, t);
                }
            }
        }
    }

    /// Merges a uniform `j`-subset of the active blocks into one node.
    fn merge_subset<R: Rng>(&self, ws: &mut Workspace, rng: &mut R, t: f64, j: usize) {
        let b = ws.active.len();
        let j = j.clamp(2, b);
        if j < b {
            // Move a uniform j-subset to the tail.
            for i in 0..j {
                let last = b - 1 - i;
                let idx = rng.random_range(0..=last);
                ws.active.swap(idx, last);
            }
        }
        let tail = ws.active.split_off(b - j);
        let node = ws.genealogy.merge(t, &[&tail], b, b - j + 1);
        ws.active.push(node);
    }

    /// Genealogy plus mutations for replicate `rep` of a run seeded by `seed`.
    pub fn replicate(&self, r: f64, seed: u64, rep: u64, ws: &mut Workspace) -> ReplicateRecord {
        let mut rng = stream_rng(seed, rep);
        self.simulate_into(ws, &mut rng);
        let m = superimpose_into(ws, r, &mut rng);
        ReplicateRecord {
            rep,
            k_n: m.k_n,
            k_n1: m.k_n1,
            m_n: m.m_n,
            n_n: m.n_n,
            c_n: ws.genealogy.c_n(),
            i_n: ws.genealogy.i_n(),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if n > u32::MAX as usize / 2 {
        return Err(Error::invalid(format!("sample size {n} is too large")));
    }
    Ok(())
}

/// RNG for replicate `rep`: the ChaCha stream `rep` under key `seed`.
pub fn stream_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn choose_part(rates: impl Iterator<Item = f64>, pick: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, r) in rates.enumerate() {
        if r > 0.0 {
            last = i;
            acc += r;
            if pick < acc {
                return i;
            }
        }
    }
    last
}

/// Number of blocks merged by one event of `part` out of `b` blocks, whose
/// total rate is `total`.
fn merge_size<R: Rng>(part: &LambdaPart, b: usize, total: f64, rng: &mut R) -> usize {
    match *part {
        LambdaPart::Star => b,
        LambdaPart::Point { u, weight } => {
            // j ~ Binomial(b, u) conditioned on j >= 2.
            let p_two_plus = total * u * u / weight;
            if p_two_plus >= 0.5 {
                let dist = Binomial::new(b as u64, u).expect("u lies in (0, 1)");
                loop {
                    let j = dist.sample(rng) as usize;
                    if j >= 2 {
                        return j;
                    }
                }
            }
            let ln_first = ln_binom(b as u64, 2) + 2.0 * u.ln() + (b - 2) as f64 * (-u).ln_1p() - p_two_plus.ln();
            let odds = u / (1.0 - u);
            sequential_inverse(b, ln_first.exp(), rng, |j| (b - j) as f64 / (j + 1) as f64 * odds)
        }
        LambdaPart::Beta { a, b: beta_b, ln_norm, weight } => {
            // Rate of a j-merger: weight·C(b,j)·B(j+a-2, b-j+beta_b)/B(a,beta_b).
            let ln_first = weight.ln() + ln_binom(b as u64, 2) + ln_beta(a, (b - 2) as f64 + beta_b) - ln_norm - total.ln();
            sequential_inverse(b, ln_first.exp(), rng, |j| {
                (b - j) as f64 / (j + 1) as f64 * (j as f64 + a - 2.0) / ((b - j - 1) as f64 + beta_b)
            })
        }
    }
}

/// Inverse-CDF search over `j = 2..=b` from `P(j = 2) = first` and the ratio
/// `P(j+1)/P(j)`.
fn sequential_inverse<R: Rng, F: Fn(usize) -> f64>(b: usize, first: f64, rng: &mut R, ratio: F) -> usize {
    let target = rng.random::<f64>();
    let mut p = first;
    let mut acc = p;
    let mut j = 2;
    while acc <= target && j < b {
        p *= ratio(j);
        j += 1;
        acc += p;
    }
    j
}

/// One effective paintbox tick: repaint until some box catches two blocks.
fn paint<R: Rng>(ws: &mut Workspace, atom: &XiAtom, rng: &mut R, t: f64) {
    let boxes = atom.cumulative.len();
    if ws.boxes.len() < boxes {
        ws.boxes.resize_with(boxes, Vec::new);
    }
    let b = ws.active.len();
    loop {
        for bx in ws.boxes.iter_mut() {
            bx.clear();
        }
        ws.kept.clear();
        for &block in &ws.active {
            let u = rng.random::<f64>();
            match atom.cumulative.iter().position(|&c| u < c) {
                Some(i) => ws.boxes[i].push(block),
                None => ws.kept.push(block),
            }
        }
        if ws.boxes[..boxes].iter().any(|bx| bx.len() >= 2) {
            break;
        }
        ws.genealogy.silent_ticks += 1;
    }
    let mut groups: Vec<&[usize]> = Vec::new();
    for bx in &ws.boxes[..boxes] {
        match bx.len() {
            0 => {}
            1 => ws.kept.push(bx[0]),
            _ => groups.push(bx),
        }
    }
    let after = ws.kept.len() + groups.len();
    let first = ws.genealogy.merge(t, &groups, b, after);
    let created = groups.len();
    ws.active.clear();
    ws.active.extend_from_slice(&ws.kept);
    ws.active.extend(first..first + created);
}

/// Marks segments and counts types for a standalone genealogy. `r = 0` is
/// accepted and leaves every leaf with the ancestral type.
pub fn superimpose_mutations<R: Rng>(g: &GenealogyRecord, r: f64, rng: &mut R) -> MutationRecord {
    let mut ws = Workspace { genealogy: g.clone(), ..Default::default() };
    superimpose_into(&mut ws, r, rng)
}

fn superimpose_into<R: Rng>(ws: &mut Workspace, r: f64, rng: &mut R) -> MutationRecord {
    let g = &ws.genealogy;
    let nodes = g.nodes();
    ws.mutated.clear();
    ws.mutated.resize(nodes, false);
    let (mut m_n, mut n_n) = (0, 0);
    for v in 0..nodes {
        let p = g.parent[v];
        if p == NO_PARENT {
            continue;
        }
        let dur = g.time[p] - g.time[v];
        let hit = rng.random::<f64>() < -(-r * dur).exp_m1();
        ws.mutated[v] = hit;
        if hit {
            n_n += 1;
            if v < g.n {
                m_n += 1;
            }
        }
    }
    // Types top-down: parents have larger ids. Type 0 is the ancestral one.
    ws.types.clear();
    ws.types.resize(nodes, 0);
    let mut fresh = 0;
    for v in (0..nodes).rev() {
        let p = g.parent[v];
        ws.types[v] = if ws.mutated[v] {
            fresh += 1;
            fresh
        } else if p == NO_PARENT {
            0
        } else {
            ws.types[p]
        };
    }
    ws.counts.clear();
    ws.counts.resize(fresh + 1, 0);
    for v in 0..g.n {
        ws.counts[ws.types[v]] += 1;
    }
    let k_n = ws.counts.iter().filter(|&&c| c > 0).count();
    let k_n1 = ws.counts.iter().filter(|&&c| c == 1).count();
    MutationRecord { k_n, k_n1, m_n, n_n }
}

/// Histogram and integer moments of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatSummary {
    pub histogram: Vec<u64>,
    pub sum: u64,
    pub sum_sq: u128,
}

impl StatSummary {
    fn new(n: usize) -> Self {
        StatSummary { histogram: vec![0; n + 1], sum: 0, sum_sq: 0 }
    }

    fn add(&mut self, v: usize) {
        self.histogram[v] += 1;
        self.sum += v as u64;
        self.sum_sq += (v as u128) * (v as u128);
    }

    fn merge(&mut self, other: &StatSummary) {
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.histogram.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count() as f64
    }

    /// Unbiased sample variance (0 for a single replicate).
    pub fn variance(&self) -> f64 {
        let n = self.count() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.sum as f64 / n;
        ((self.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn frequency(&self, v: usize) -> f64 {
        self.histogram.get(v).copied().unwrap_or(0) as f64 / self.count() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub n: usize,
    pub r: f64,
    pub reps: u64,
    pub seed: u64,
    pub k_n: StatSummary,
    pub k_n1: StatSummary,
    pub m_n: StatSummary,
    pub n_n: StatSummary,
    pub c_n: StatSummary,
    pub i_n: StatSummary,
    /// Replicates violating `M_n <= K_n1 <= K_n <= N_n + 1`.
    pub chain_violations: u64,
}

impl MonteCarloSummary {
    fn empty(n: usize, r: f64, seed: u64) -> Self {
        // N_n counts segments, up to 2n - 2.
        let wide = 2 * n;
        MonteCarloSummary {
            n,
            r,
            reps: 0,
            seed,
            k_n: StatSummary::new(n),
            k_n1: StatSummary::new(n),
            m_n: StatSummary::new(n),
            n_n: StatSummary::new(wide),
            c_n: StatSummary::new(n),
            i_n: StatSummary::new(n),
            chain_violations: 0,
        }
    }

    fn add(&mut self, rec: &ReplicateRecord) {
        self.reps += 1;
        self.k_n.add(rec.k_n);
        self.k_n1.add(rec.k_n1);
        self.m_n.add(rec.m_n);
        self.n_n.add(rec.n_n);
        self.c_n.add(rec.c_n);
        self.i_n.add(rec.i_n);
        if !rec.chain_holds() {
            self.chain_violations += 1;
        }
    }

    fn merge(mut self, other: MonteCarloSummary) -> Self {
        self.reps += other.reps;
        self.k_n.merge(&other.k_n);
        self.k_n1.merge(&other.k_n1);
        self.m_n.merge(&other.m_n);
        self.n_n.merge(&other.n_n);
        self.c_n.merge(&other.c_n);
        self.i_n.merge(&other.i_n);
        self.chain_violations += other.chain_violations;
        self
    }

    pub fn from_records(n: usize, r: f64, seed: u64, records: &[ReplicateRecord]) -> Self {
        let mut s = Self::empty(n, r, seed);
        for rec in records {
            s.add(rec);
        }
        s
    }
}

fn check_run(r: f64, reps: u64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("mutation rate must be positive and finite, got {r}")));
    }
    if reps == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    Ok(())
}

/// Aggregated statistics of `reps` replicates.
pub fn monte_carlo(measure: &Measure, r: f64, n: usize, reps: u64, seed: u64) -> Result<MonteCarloSummary> {
    let sim = Simulator::new(measure, n)?;
    monte_carlo_with(&sim, r, reps, seed)
}

pub fn monte_carlo_with(sim: &Simulator, r: f64, reps: u64, seed: u64) -> Result<MonteCarloSummary> {
    check_run(r, reps)?;
    let n = sim.n();
    Ok((0..reps)
        .into_par_iter()
        .fold(
            || (Workspace::default(), MonteCarloSummary::empty(n, r, seed)),
            |(mut ws, mut acc), rep| {
                let rec = sim.replicate(r, seed, rep, &mut ws);
                acc.add(&rec);
                (ws, acc)
            },
        )
        .map(|(_, acc)| acc)
        .reduce(|| MonteCarloSummary::empty(n, r, seed), MonteCarloSummary::merge))
}

/// Every replicate record, in replicate order.
pub fn run_replicates(measure: &Measure, r: f64, n: usize, reps: u64, seed: u64) -> Result<Vec<ReplicateRecord>> {
    let sim = Simulator::new(measure, n)?;
    check_run(r, reps)?;
    Ok((0..reps)
        .into_par_iter()
        .map_init(Workspace::default, |ws, rep| sim.replicate(r, seed, rep, ws))
        .collect())
}

/// Replicate dump with columns `rep,k_n,k_n1,m_n,n_n,c_n,i_n`.
pub fn write_replicates_csv<W: Write>(records: &[ReplicateRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "rep,k_n,k_n1,m_n,n_n,c_n,i_n")?;
    for r in records {
        writeln!(w, "{},{},{},{},{},{},{}", r.rep, r.k_n, r.k_n1, r.m_n, r.n_n, r.c_n, r.i_n)?;
    }
    Ok(())
}
