//! The `typecount` command line tool.
//!
//! Every subcommand reads a measure file, computes one artifact and writes it
//! as CSV (default) or JSON to `--out` or standard output. Exit codes: 0 on
//! success, 2 on invalid input, 3 when the measure violates a condition the
//! computation needs, 4 when `crosscheck` finds a discrepancy above
//! tolerance, 1 for anything else.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::asymptotic::{self, FixedPointSampler, LimitLaw};
use crate::error::{Error, ErrorKind, Result};
use crate::exact::{self, rational};
use crate::io::{load_measure, write_csv_preamble, write_json};
use crate::measure::{Measure, MeasureKind, MeasureSpec};
use crate::rates::{self, RateTable};
use crate::simulate::{self, MonteCarloSummary, StatSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "typecount", version, about = "Number of allelic types under exchangeable coalescents with mutation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Measure file (JSON).
    #[arg(long)]
    measure: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Jump rates g_mk and jump probabilities r_mk for m <= n.
    Rates {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Also write the total rates (m,g_m,row_sum) to this file.
        #[arg(long)]
        totals: Option<PathBuf>,
    },
    /// P(K_m = k) for all k <= m <= n.
    Dist {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        n: usize,
        /// Exact rational arithmetic (atomic measures, n <= 30).
        #[arg(long)]
        exact: bool,
    },
    /// Descending factorial moments E[(K_m)_j] for m <= n, j <= jmax.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        jmax: usize,
    },
    /// Limit law of K_n / n: Laplace exponent, moments, variance.
    Limit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 4)]
        jmax: usize,
    },
    /// Samples of the limit from the perpetuity series (simple measures).
    Fpsample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rate: f64,
        /// Number of samples.
        #[arg(long)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = asymptotic::DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Monte Carlo summary of K_n, K_n1, M_n, N_n, C_n, I_n.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write every replicate (rep,k_n,k_n1,m_n,n_n,c_n,i_n) to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Dual-path identities with pass/fail against tolerances.
    Crosscheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

/// Resolved configuration echoed into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub measure_path: String,
    pub measure: MeasureSpec,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_scale: Option<f64>,
}

impl RunConfig {
    fn new(command: &'static str, common: &Common, measure: &Measure) -> Self {
        RunConfig {
            command,
            measure_path: common.measure.display().to_string(),
            measure: measure.spec().clone(),
            format: common.format,
            r: None,
            n: None,
            jmax: None,
            reps: None,
            seed: None,
            epsilon: None,
            exact: None,
            tol_scale: None,
        }
    }
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Condition => EXIT_CONDITION,
        ErrorKind::Numerical | ErrorKind::Io => EXIT_FAILURE,
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("--rate must be positive and finite, got {r}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("--n must be at least 1".into()));
    }
    Ok(())
}

fn check_reps(reps: u64) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter("--reps must be at least 1".into()));
    }
    Ok(())
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(
    common: &Common,
    config: &RunConfig,
    result: &T,
    csv: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    let mut out = open_out(common.out.as_deref())?;
    match common.format {
        Format::Json => write_json(&mut out, config, result)?,
        Format::Csv => {
            write_csv_preamble(&mut out, config)?;
            csv(&mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn table_for(measure: &Measure, n: usize) -> Result<RateTable> {
    RateTable::build(measure, n.max(2))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Rates { common, n, totals } => {
            let measure = load_measure(&common.measure)?;
            if n < 2 {
                return Err(Error::InvalidParameter("--n must be at least 2 for a rate table".into()));
            }
            let mut config = RunConfig::new("rates", &common, &measure);
            config.n = Some(n);
            let table = RateTable::build(&measure, n)?;
            if let Some(path) = totals {
                let mut w = BufWriter::new(File::create(path)?);
                write_csv_preamble(&mut w, &config)?;
                table.write_totals_csv(&mut w)?;
                w.flush()?;
            }
            let json = RatesJson::from(&table)?;
            emit(&common, &config, &json, |w| table.write_rates_csv(w))?;
        }
        Command::Dist { common, rate, n, exact } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            check_n(n)?;
            let mut config = RunConfig::new("dist", &common, &measure);
            config.r = Some(rate);
            config.n = Some(n);
            config.exact = Some(exact);
            if exact {
                let d = rational::exact_type_distribution(&measure, rate, n)?;
                let rows: Vec<ExactRow> = (1..=n)
                    .flat_map(|m| (1..=m).map(move |k| (m, k)))
                    .map(|(m, k)| {
                        let p = d.prob(m, k);
                        ExactRow { m, k, probability: rational::approx(&p), exact: p.to_string() }
                    })
                    .collect();
                emit(&common, &config, &rows, |w| {
                    writeln!(w, "m,k,probability,exact")?;
                    for r in &rows {
                        writeln!(w, "{},{},{},{}", r.m, r.k, r.probability, r.exact)?;
                    }
                    Ok(())
                })?;
            } else {
                let d = exact::type_distribution(&table_for(&measure, n)?, rate, n)?;
                let rows: Vec<DistRow> = (1..=n)
                    .flat_map(|m| (1..=m).map(move |k| (m, k)))
                    .map(|(m, k)| DistRow { m, k, probability: d.prob(m, k) })
                    .collect();
                emit(&common, &config, &rows, |w| d.write_csv(w))?;
            }
        }
        Command::Moments { common, rate, n, jmax } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            check_n(n)?;
            let mut config = RunConfig::new("moments", &common, &measure);
            config.r = Some(rate);
            config.n = Some(n);
            config.jmax = Some(jmax);
            let fm = exact::factorial_moments(&table_for(&measure, n)?, rate, n, jmax)?;
            let rows: Vec<MomentRow> = (1..=n)
                .flat_map(|m| (0..=jmax).map(move |j| (m, j)))
                .map(|(m, j)| MomentRow { m, j, value: fm.get(m, j) })
                .collect();
            emit(&common, &config, &rows, |w| fm.write_csv(w))?;
        }
        Command::Limit { common, rate, jmax } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            let mut config = RunConfig::new("limit", &common, &measure);
            config.r = Some(rate);
            config.jmax = Some(jmax);
            let law = asymptotic::limit_law(&measure, rate, jmax)?;
            let levy: Vec<String> = measure.levy_density_description()?.iter().map(|p| p.to_string()).collect();
            let json = LimitJson { law: &law, levy_measure: levy };
            emit(&common, &config, &json, |w| write_limit_csv(w, &law))?;
        }
        Command::Fpsample { common, rate, reps, seed, epsilon } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            check_reps(reps)?;
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::BadEpsilon(epsilon));
            }
            let mut config = RunConfig::new("fpsample", &common, &measure);
            config.r = Some(rate);
            config.reps = Some(reps);
            config.seed = Some(seed);
            config.epsilon = Some(epsilon);
            let sampler = FixedPointSampler::new(&measure, rate, epsilon, seed)?;
            let samples = sampler.sample(reps as usize);
            emit(&common, &config, &samples, |w| {
                writeln!(w, "# seed: {}", samples.seed)?;
                writeln!(w, "# epsilon: {:e}", samples.epsilon)?;
                writeln!(w, "# mean_terms: {}", samples.mean_terms)?;
                writeln!(w, "# max_terms: {}", samples.max_terms)?;
                writeln!(w, "# max_tail_bound: {:e}", samples.max_tail_bound)?;
                writeln!(w, "value")?;
                for v in &samples.values {
                    writeln!(w, "{v}")?;
                }
                Ok(())
            })?;
        }
        Command::Simulate { common, rate, n, reps, seed, dump } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            check_n(n)?;
            check_reps(reps)?;
            let mut config = RunConfig::new("simulate", &common, &measure);
            config.r = Some(rate);
            config.n = Some(n);
            config.reps = Some(reps);
            config.seed = Some(seed);
            let summary = match dump {
                Some(path) => {
                    let records = simulate::run_replicates(&measure, rate, n, reps, seed)?;
                    let mut w = BufWriter::new(File::create(path)?);
                    write_csv_preamble(&mut w, &config)?;
                    simulate::write_replicates_csv(&records, &mut w)?;
                    w.flush()?;
                    MonteCarloSummary::from_records(n, rate, seed, &records)
                }
                None => simulate::monte_carlo(&measure, rate, n, reps, seed)?,
            };
            emit(&common, &config, &summary, |w| write_summary_csv(w, &summary))?;
        }
        Command::Crosscheck { common, n, rate, tol_scale } => {
            let measure = load_measure(&common.measure)?;
            check_rate(rate)?;
            if n < 2 {
                return Err(Error::InvalidParameter("--n must be at least 2".into()));
            }
            if !(tol_scale > 0.0 && tol_scale.is_finite()) {
                return Err(Error::InvalidParameter(format!("--tol-scale must be positive, got {tol_scale}")));
            }
            let mut config = RunConfig::new("crosscheck", &common, &measure);
            config.n = Some(n);
            config.r = Some(rate);
            config.tol_scale = Some(tol_scale);
            let checks = crosscheck(&measure, n, rate, tol_scale)?;
            emit(&common, &config, &checks, |w| {
                writeln!(w, "check,discrepancy,tolerance,passed")?;
                for c in &checks {
                    writeln!(w, "{},{:e},{:e},{}", c.name, c.discrepancy, c.tolerance, c.passed)?;
                }
                Ok(())
            })?;
            for c in &checks {
                eprintln!("{} {}: {:e} (tolerance {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.discrepancy, c.tolerance);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(EXIT_TOLERANCE);
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DistRow {
    m: usize,
    k: usize,
    probability: f64,
}

#[derive(Serialize)]
struct ExactRow {
    m: usize,
    k: usize,
    probability: f64,
    exact: String,
}

#[derive(Serialize)]
struct MomentRow {
    m: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize)]
struct RateRow {
    m: usize,
    k: usize,
    g_mk: f64,
    r_mk: f64,
}

#[derive(Serialize)]
struct TotalRow {
    m: usize,
    g_m: f64,
    row_sum: f64,
}

#[derive(Serialize)]
struct RatesJson {
    rates: Vec<RateRow>,
    totals: Vec<TotalRow>,
}

impl RatesJson {
    fn from(t: &RateTable) -> Result<Self> {
        let mut rates = Vec::new();
        let mut totals = Vec::new();
        for m in 2..=t.n_max() {
            let r = t.jump_distribution(m)?;
            for k in 1..m {
                rates.push(RateRow { m, k, g_mk: t.g(m, k), r_mk: r[k - 1] });
            }
            totals.push(TotalRow { m, g_m: t.total(m), row_sum: t.row_sum(m) });
        }
        Ok(RatesJson { rates, totals })
    }
}

#[derive(Serialize)]
struct LimitJson<'a> {
    law: &'a LimitLaw,
    levy_measure: Vec<String>,
}

fn write_limit_csv(w: &mut dyn Write, law: &LimitLaw) -> io::Result<()> {
    writeln!(w, "# variance: {}", law.variance)?;
    writeln!(w, "# h1: {}", law.conditions.h1)?;
    writeln!(w, "# m0: {}", law.conditions.m0)?;
    writeln!(w, "j,phi,moment")?;
    for j in 0..=law.j_max() {
        let phi = law.phi.get(j).copied().unwrap_or(f64::NAN);
        writeln!(w, "{},{},{}", j, phi, law.moments[j])?;
    }
    Ok(())
}

fn write_summary_csv(w: &mut dyn Write, s: &MonteCarloSummary) -> io::Result<()> {
    writeln!(w, "# reps: {}", s.reps)?;
    writeln!(w, "# chain_violations: {}", s.chain_violations)?;
    writeln!(w, "statistic,mean,variance,se")?;
    let rows: [(&str, &StatSummary); 6] =
        [("k_n", &s.k_n), ("k_n1", &s.k_n1), ("m_n", &s.m_n), ("n_n", &s.n_n), ("c_n", &s.c_n), ("i_n", &s.i_n)];
    for (name, st) in rows {
        let var = st.variance();
        writeln!(w, "{},{},{},{}", name, st.mean(), var, (var / s.reps as f64).sqrt())?;
    }
    Ok(())
}

/// Outcome of one identity check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, discrepancy: f64, tolerance: f64) -> Self {
        Check { name, discrepancy, tolerance, passed: discrepancy <= tolerance }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Runs every identity that applies to `measure` up to sample size `n`.
pub fn crosscheck(measure: &Measure, n: usize, r: f64, tol_scale: f64) -> Result<Vec<Check>> {
    let table = RateTable::build(measure, n)?;
    let mut checks = Vec::new();
    checks.push(Check::new("row_sum_vs_total_rate", table.max_row_sum_error(), 1e-10 * tol_scale));

    let jump_err = (2..=n)
        .map(|m| table.jump_distribution(m).map(|row| (row.iter().sum::<f64>() - 1.0).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check::new("jump_rows_normalized", jump_err, 1e-12 * tol_scale));

    if measure.kingman_mass() == 0.0 {
        let mut drop_err: f64 = 0.0;
        let mut internal_err: f64 = 0.0;
        let drop_max = n.min(100);
        for m in 2..=drop_max {
            let integral = rates::weighted_drop_integral(measure, m)?;
            let chain: f64 = (1..m).map(|k| (m - k) as f64 * table.g(m, k)).sum();
            drop_err = drop_err.max(rel(integral, chain));
            if measure.kind() == MeasureKind::Lambda {
                let report = rates::expected_block_drop(measure, m)?;
                internal_err = internal_err.max((report.e_internal - 1.0).abs());
            }
        }
        checks.push(Check::new("block_drop_integral_vs_jump_chain", drop_err, 1e-9 * tol_scale));
        if measure.kind() == MeasureKind::Lambda {
            checks.push(Check::new("internal_branches_equal_one", internal_err, 0.0));
        }
    }

    let dist = exact::type_distribution(&table, r, n)?;
    let norm_err = (1..=n).map(|m| (dist.row(m).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::new("distribution_rows_normalized", norm_err, 1e-10 * tol_scale));

    let product = exact::all_singletons_probability(&table, r, n)?;
    checks.push(Check::new("all_singletons_closed_product", rel(product, dist.prob(n, n)), 1e-12 * tol_scale));

    let fm = exact::factorial_moments(&table, r, n, 1)?;
    let mean_err = (1..=n).map(|m| (fm.get(m, 1) - dist.mean(m)).abs()).fold(0.0, f64::max);
    checks.push(Check::new("mean_recursion_vs_distribution", mean_err, 1e-9 * tol_scale));

    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let pgf = exact::pgf_values(&table, r, n, &grid)?;
    let mut pgf_err: f64 = 0.0;
    for m in 1..=n {
        for (si, &s) in grid.iter().enumerate() {
            let poly: f64 = dist.row(m).iter().enumerate().map(|(i, p)| p * s.powi(i as i32 + 1)).sum();
            pgf_err = pgf_err.max((poly - pgf[m - 1][si]).abs());
        }
    }
    checks.push(Check::new("pgf_recursion_vs_distribution", pgf_err, 1e-9 * tol_scale));

    let diag_n = n.min(20);
    let fm_diag = exact::factorial_moments(&table, r, diag_n, diag_n)?;
    let mut diag_err: f64 = 0.0;
    let mut factorial = 1.0;
    for m in 1..=diag_n {
        factorial *= m as f64;
        diag_err = diag_err.max(rel(fm_diag.get(m, m), factorial * dist.prob(m, m)));
    }
    checks.push(Check::new("factorial_moment_diagonal", diag_err, 1e-9 * tol_scale));

    if measure.components().is_empty() && measure.kingman_mass() > 0.0 {
        let theta = 2.0 * r / measure.kingman_mass();
        let ewens_n = n.min(exact::EWENS_MAX_N);
        let oracle = exact::ewens_oracle(theta, ewens_n)?;
        let err = oracle.iter().zip(dist.row(ewens_n)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        checks.push(Check::new("ewens_oracle", err, 1e-10 * tol_scale));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crosscheck_half_half() {
        let checks = crosscheck(&Measure::dirac(&[0.5, 0.5]).unwrap(), 50, 0.5, 1.0).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        let row = checks.iter().find(|c| c.name == "row_sum_vs_total_rate").unwrap();
        assert!(row.discrepancy < 1e-10);
    }

    #[test]
    fn crosscheck_kingman_includes_ewens() {
        let checks = crosscheck(&Measure::kingman(1.0).unwrap(), 40, 0.5, 1.0).unwrap();
        assert!(checks.iter().any(|c| c.name == "ewens_oracle"));
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn crosscheck_beta_mixture() {
        let spec: MeasureSpec = serde_json::from_str(
            r#"{"kind":"lambda","star_mass":0.2,"beta":[{"a":1.5,"b":0.5,"weight":1.0}],"atoms":[{"u":0.3,"weight":0.5}]}"#,
        )
        .unwrap();
        let checks = crosscheck(&Measure::new(spec).unwrap(), 60, 1.0, 1.0).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn usage_errors_exit_with_validation_code() {
        assert_eq!(run(["typecount", "dist", "--rate", "1"]), EXIT_VALIDATION);
        assert_eq!(run(["typecount", "--version"]), EXIT_OK);
    }
}
