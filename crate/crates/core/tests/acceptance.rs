//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use typecount::asymptotic::{self, beta_one_cdf, FixedPointSampler};
use typecount::exact::{self, ewens_oracle, type_distribution};
use typecount::measure::{LambdaSpec, MeasureSpec, PointAtom, SimplexAtom, XiSpec};
use typecount::rates::{self, Paintbox, RateTable};
use typecount::simulate::{self, MonteCarloSummary, Simulator};
use typecount::stats;
use typecount::Measure;

const EWENS_TOL: f64 = 1e-10;
const EWENS_TIME: Duration = Duration::from_secs(5);
const PRODUCT_REL_TOL: f64 = 1e-12;
const ROW_SUM_REL_TOL: f64 = 1e-10;
const PAINTBOX_TOL: f64 = 1e-14;
const DROP_REL_TOL: f64 = 1e-9;
const LIMIT_MEAN_TOL: f64 = 0.02;
const LIMIT_MEAN_TIME: Duration = Duration::from_secs(300);
const MOMENT_SE: f64 = 3.0;
const MC_SE: f64 = 4.0;
const CHAIN_MIN_REPS: u64 = 1_000_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn lambda(spec: LambdaSpec) -> Measure {
    Measure::new(MeasureSpec::Lambda(spec)).unwrap()
}

fn xi(kingman_mass: f64, atoms: &[(&[f64], f64)]) -> Measure {
    Measure::new(MeasureSpec::Xi(XiSpec {
        kingman_mass,
        atoms: atoms.iter().map(|&(x, weight)| SimplexAtom { x: x.to_vec(), weight }).collect(),
    }))
    .unwrap()
}

fn lambda_families() -> Vec<(&'static str, Measure)> {
    vec![
        ("kingman", Measure::kingman(1.0).unwrap()),
        ("star", Measure::star(1.0).unwrap()),
        ("beta(2,1)", Measure::beta(2.0, 1.0).unwrap()),
        ("beta(1,1)", Measure::beta(1.0, 1.0).unwrap()),
        ("beta(0.5,1.5)", Measure::beta(0.5, 1.5).unwrap()),
        ("beta(3,2)", Measure::beta(3.0, 2.0).unwrap()),
        (
            "lambda mixture",
            lambda(LambdaSpec {
                kingman_mass: 0.3,
                star_mass: 0.2,
                beta: vec![typecount::measure::BetaComponent { a: 1.5, b: 0.5, weight: 0.7 }],
                atoms: vec![PointAtom { u: 0.25, weight: 0.4 }, PointAtom { u: 0.9, weight: 0.1 }],
            }),
        ),
        ("point atom 0.3", lambda(LambdaSpec { atoms: vec![PointAtom { u: 0.3, weight: 1.0 }], ..Default::default() })),
    ]
}

fn xi_families() -> Vec<(&'static str, Measure)> {
    vec![
        ("xi (0.5,0.5)", xi(0.0, &[(&[0.5, 0.5], 1.0)])),
        ("xi (0.4,0.3,0.2)", xi(0.0, &[(&[0.4, 0.3, 0.2], 1.0)])),
        ("xi support 5 + kingman", xi(0.5, &[(&[0.3, 0.25, 0.2, 0.15, 0.1], 1.0), (&[0.6], 0.5)])),
        ("xi two atoms", xi(0.0, &[(&[0.7, 0.1], 2.0), (&[0.2, 0.2, 0.2], 0.5)])),
    ]
}

fn ewens_equivalence() -> Outcome {
    let start = Instant::now();
    let n = 50;
    let table = RateTable::build(&Measure::kingman(1.0).unwrap(), n).unwrap();
    let mut worst: f64 = 0.0;
    for r in [0.25, 0.5, 1.0] {
        let d = type_distribution(&table, r, n).unwrap();
        for m in 1..=n {
            let oracle = ewens_oracle(2.0 * r, m).unwrap();
            for (k, p) in oracle.iter().enumerate() {
                worst = worst.max((p - d.prob(m, k + 1)).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= EWENS_TOL && elapsed < EWENS_TIME,
        format!("max |error| {worst:.2e} (tol {EWENS_TOL:.0e}), {:.3} s", elapsed.as_secs_f64()),
    )
}

fn closed_product() -> Outcome {
    let n = 100;
    let mut worst: f64 = 0.0;
    for (_, m) in lambda_families().into_iter().chain(xi_families()) {
        let table = RateTable::build(&m, n).unwrap();
        for r in [0.5, 2.0] {
            let d = type_distribution(&table, r, n).unwrap();
            for size in 1..=n {
                let product = exact::all_singletons_probability(&table, r, size).unwrap();
                let rel = (product - d.prob(size, size)).abs() / product;
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst <= PRODUCT_REL_TOL, format!("max relative error {worst:.2e} (tol {PRODUCT_REL_TOL:.0e})"))
}

/// Exact enumeration of paintbox block counts over all box assignments.
fn paintbox_enumeration(x: &[f64], n: usize) -> Vec<BigRational> {
    let s = x.len();
    let xr: Vec<BigRational> = x.iter().map(|&v| BigRational::from_float(v).unwrap()).collect();
    let dust = BigRational::one() - xr.iter().fold(BigRational::zero(), |a, b| a + b);
    let mut out = vec![BigRational::zero(); n + 1];
    for code in 0..(s + 1).pow(n as u32) {
        let mut c = code;
        let mut prob = BigRational::one();
        let mut counts = vec![0usize; s + 1];
        for _ in 0..n {
            let slot = c % (s + 1);
            c /= s + 1;
            prob *= if slot == s { &dust } else { &xr[slot] };
            counts[slot] += 1;
        }
        out[counts[s] + counts[..s].iter().filter(|&&v| v > 0).count()] += prob;
    }
    out
}

fn rate_identities() -> Outcome {
    let mut lambda_err: f64 = 0.0;
    for (_, m) in lambda_families() {
        lambda_err = lambda_err.max(RateTable::build(&m, 200).unwrap().max_row_sum_error());
    }
    let mut xi_err: f64 = 0.0;
    for (_, m) in xi_families() {
        xi_err = xi_err.max(RateTable::build(&m, 100).unwrap().max_row_sum_error());
    }
    let mut pb_err: f64 = 0.0;
    for x in [&[0.5, 0.5][..], &[0.3], &[0.4, 0.3, 0.2], &[1.0], &[0.6, 0.25, 0.15], &[0.2, 0.1]] {
        let pb = Paintbox::new(x, 8);
        for n in 1..=8 {
            let dp = pb.block_count_distribution(n);
            for (k, exact) in paintbox_enumeration(x, n).iter().enumerate() {
                pb_err = pb_err.max((dp[k] - exact.to_f64().unwrap()).abs());
            }
        }
    }
    outcome(
        lambda_err <= ROW_SUM_REL_TOL && xi_err <= ROW_SUM_REL_TOL && pb_err <= PAINTBOX_TOL,
        format!(
            "row sums: Λ {lambda_err:.2e}, Ξ {xi_err:.2e} (tol {ROW_SUM_REL_TOL:.0e}); paintbox vs enumeration {pb_err:.2e} (tol {PAINTBOX_TOL:.0e})"
        ),
    )
}

fn block_drop_dual_path() -> Outcome {
    let mut worst: f64 = 0.0;
    let families = lambda_families().into_iter().chain(xi_families()).filter(|(_, m)| m.kingman_mass() == 0.0);
    let mut internal_ok = true;
    for (_, m) in families {
        let table = RateTable::build(&m, 100).unwrap();
        for size in 2..=100 {
            let integral = rates::weighted_drop_integral(&m, size).unwrap();
            let chain: f64 = (1..size).map(|k| (size - k) as f64 * table.g(size, k)).sum();
            worst = worst.max((integral - chain).abs() / chain);
            if m.kind() == typecount::measure::MeasureKind::Lambda {
                internal_ok &= rates::expected_block_drop(&m, size).unwrap().e_internal == 1.0;
            }
        }
    }
    let half = xi(0.0, &[(&[0.5, 0.5], 1.0)]);
    let weighted = rates::weighted_drop_integral(&half, 3).unwrap();
    let report = rates::expected_block_drop(&half, 3).unwrap();
    let exact_case = weighted == 2.5 && report.e_drop == 1.25;
    outcome(
        worst <= DROP_REL_TOL && exact_case && internal_ok,
        format!(
            "max relative error {worst:.2e} (tol {DROP_REL_TOL:.0e}); Ξ=δ(0.5,0.5) n=3: g·E = {weighted}, E(3-I_3) = {}; E(V_n) = 1 for Λ: {internal_ok}",
            report.e_drop
        ),
    )
}

fn limit_mean(chain: &mut ChainTally) -> Outcome {
    let start = Instant::now();
    let m = Measure::beta(2.0, 1.0).unwrap();
    let n = 10_000;
    let s = simulate::monte_carlo(&m, 1.0, n, 10_000, 2024).unwrap();
    chain.add(&s);
    let mean = s.k_n.mean() / n as f64;
    let target = asymptotic::limit_law(&m, 1.0, 1).unwrap().mean();
    let elapsed = start.elapsed();
    outcome(
        (mean - target).abs() <= LIMIT_MEAN_TOL && elapsed < LIMIT_MEAN_TIME,
        format!("mean K_n/n = {mean:.5}, limit {target:.5} (tol {LIMIT_MEAN_TOL}), {:.1} s", elapsed.as_secs_f64()),
    )
}

fn star_limit_law(chain: &mut ChainTally) -> Outcome {
    let m = Measure::star(1.0).unwrap();
    let (n, reps, r) = (10_000, 100_000u64, 1.0);
    let records = simulate::run_replicates(&m, r, n, reps, 77).unwrap();
    chain.add(&MonteCarloSummary::from_records(n, r, 77, &records));
    let xs: Vec<f64> = records.iter().map(|rec| rec.k_n as f64 / n as f64).collect();
    let ks = stats::ks_one_sample(&xs, |x| beta_one_cdf(1.0 / r, x));
    outcome(ks.passed, format!("KS D = {:.5}, 1% critical {:.5}, p = {:.3}", ks.statistic, ks.critical, ks.p_value))
}

fn fixed_point_consistency() -> Outcome {
    let m = xi(0.0, &[(&[0.5, 0.5], 1.0)]);
    let law = asymptotic::limit_law(&m, 1.0, 3).unwrap();
    let targets = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 10.0];
    let formula_ok = law.moments[1..].iter().zip(targets).all(|(a, b)| (a - b).abs() < 1e-15);
    let sampler = FixedPointSampler::new(&m, 1.0, asymptotic::DEFAULT_EPSILON, 99).unwrap();
    let samples = sampler.sample(100_000);
    let check = asymptotic::moment_check(&samples.values, &law, 3);
    let ks = sampler.self_consistency(100_000);
    outcome(
        formula_ok && check.max_z <= MOMENT_SE && ks.passed,
        format!(
            "moments {:?} vs analytic (1/3, 1/6, 1/10), max {:.2} SE (tol {MOMENT_SE}); self-consistency KS D = {:.5}, critical {:.5}",
            check.rows[1..].iter().map(|r| format!("{:.5}", r.empirical)).collect::<Vec<_>>(),
            check.max_z,
            ks.statistic,
            ks.critical
        ),
    )
}

#[derive(Default)]
struct ChainTally {
    reps: u64,
    violations: u64,
}

impl ChainTally {
    fn add(&mut self, s: &MonteCarloSummary) {
        self.reps += s.reps;
        self.violations += s.chain_violations;
    }
}

fn bound_chain(chain: &mut ChainTally) -> Outcome {
    let families = lambda_families().into_iter().chain(xi_families());
    for (i, (_, m)) in families.enumerate() {
        let sim = Simulator::new(&m, 20).unwrap();
        let s = simulate::monte_carlo_with(&sim, 0.5 + 0.25 * (i % 4) as f64, 80_000, 500 + i as u64).unwrap();
        chain.add(&s);
    }
    outcome(
        chain.reps >= CHAIN_MIN_REPS && chain.violations == 0,
        format!("{} replicates, {} violations (at least {CHAIN_MIN_REPS} required)", chain.reps, chain.violations),
    )
}

fn monte_carlo_vs_exact(chain: &mut ChainTally) -> Outcome {
    let n = 10;
    let reps = 100_000u64;
    let mut worst: f64 = 0.0;
    for (i, m) in [Measure::kingman(1.0).unwrap(), xi(0.0, &[(&[0.5, 0.5], 1.0)])].iter().enumerate() {
        let table = RateTable::build(m, n).unwrap();
        for (j, r) in [0.5, 1.0].into_iter().enumerate() {
            let d = type_distribution(&table, r, n).unwrap();
            let s = simulate::monte_carlo(m, r, n, reps, 1000 + 10 * i as u64 + j as u64).unwrap();
            chain.add(&s);
            for k in 1..=n {
                worst = worst.max(stats::proportion_z(s.k_n.histogram[k], reps, d.prob(n, k)));
            }
        }
    }
    outcome(worst <= MC_SE, format!("max deviation {worst:.2} SE (tol {MC_SE})"))
}

fn collision_decay(chain: &mut ChainTally) -> Outcome {
    let m = Measure::beta(2.0, 1.0).unwrap();
    let mut ratios = Vec::new();
    for (n, reps) in [(100usize, 20_000u64), (1_000, 5_000), (10_000, 1_000)] {
        let s = simulate::monte_carlo(&m, 1.0, n, reps, 31).unwrap();
        chain.add(&s);
        ratios.push(s.c_n.mean() / n as f64);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    outcome(decreasing, format!("mean C_n/n over n = 1e2, 1e3, 1e4: {ratios:.5?}"))
}

fn main() -> ExitCode {
    let mut chain = ChainTally::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!("{} [{id:>2}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "Ewens equivalence", ewens_equivalence());
    record(2, "closed product P(K_n = n)", closed_product());
    record(3, "rate identities", rate_identities());
    record(4, "block drop dual path", block_drop_dual_path());
    record(5, "limit mean beta(2,1)", limit_mean(&mut chain));
    record(6, "star-shaped limit law", star_limit_law(&mut chain));
    record(7, "fixed-point consistency", fixed_point_consistency());
    record(9, "Monte Carlo vs exact", monte_carlo_vs_exact(&mut chain));
    record(10, "C_n/n decay", collision_decay(&mut chain));
    record(8, "bound chain", bound_chain(&mut chain));
    let failed = results.iter().filter(|(_, _, o)| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
