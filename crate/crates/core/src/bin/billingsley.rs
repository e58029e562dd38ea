use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use billingsley::checks::{run_suite, SuiteConfig, SuiteName, REPORT_VERSION};
use billingsley::convergence::{run_criterion, BoxCriterion, RunOptions};
use billingsley::dickman::{DickmanTable, DEFAULT_STEP, DEFAULT_U_MAX};
use billingsley::factor_stats::{
    box_probability_exact, box_probability_via_psi, sample_box_probability, sample_factors,
};
use billingsley::pd_process::{pd_box_probability, pd_density, pd_samples, DEFAULT_TRUNCATION};
use billingsley::powers::floor_pow;
use billingsley::primes::{mertens_constant_estimate, mertens_sum, PrimeSieve};
use billingsley::region::BoxSpec;
use billingsley::smoothcount::{psi_bruteforce, psi_dickman, psi_exact};
use billingsley::{Error, DEFAULT_SEED};

/// Largest sieve built for sampling when n is beyond it.
const SAMPLING_SIEVE_CAP: u64 = 1 << 25;

#[derive(Parser)]
#[command(
    name = "billingsley",
    version,
    about = "Prime factor statistics and the Poisson–Dirichlet limit"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Decimal places for human-readable numbers.
    #[arg(long, global = true, default_value_t = 6)]
    digits: usize,
    /// Write the result to FILE instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Directory for cached ρ tables.
    #[arg(long, global = true, env = "BILLINGSLEY_CACHE")]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Dickman function.
    Rho {
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_U_MAX)]
        umax: f64,
    },
    /// Write the ρ grid as CSV `u,rho`.
    RhoTable {
        #[arg(long, default_value_t = DEFAULT_U_MAX)]
        umax: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Mertens constant estimate, or a reciprocal prime sum over a range.
    #[command(group(ArgGroup::new("mode").required(true).args(["x", "range"])))]
    Mertens {
        #[arg(long, value_parser = parse_count)]
        x: Option<u64>,
        #[arg(long, num_args = 2, value_names = ["A", "B"], value_parser = parse_count)]
        range: Option<Vec<u64>>,
    },
    /// Count y-smooth integers up to x.
    Psi {
        #[arg(long, value_parser = parse_count)]
        x: u64,
        #[arg(long, value_parser = parse_count)]
        y: u64,
        #[arg(long, value_enum, default_value_t = PsiMethod::Exact)]
        method: PsiMethod,
    },
    /// CSV ladder `n,psi,psi_over_n,rho,abs_err` with y = n^(1/t).
    PsiLadder {
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        #[arg(long, value_parser = parse_count, default_value = "1e7")]
        nmax: u64,
        #[arg(long, value_parser = parse_count, default_value = "100")]
        nmin: u64,
    },
    /// P(X_n ∈ B) for a box "t1,dt1;t2,dt2;…".
    Box {
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long = "box")]
        spec: BoxSpec,
        #[arg(long, value_enum, default_value_t = BoxMethod::Psi)]
        method: BoxMethod,
        #[arg(long, value_parser = parse_count, default_value = "1e6")]
        samples: u64,
    },
    /// CSV `N,p1..pk,L1..Lk` for uniform random N <= n.
    SampleFactors {
        #[arg(long, value_parser = parse_count)]
        n: u64,
        #[arg(long, value_parser = parse_count)]
        count: u64,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// CSV of ranked Poisson–Dirichlet draws `L1..Lk,tail_mass`.
    PdSample {
        #[arg(long, value_parser = parse_count)]
        count: u64,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        trunc: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Density of the first k ranked components at a point "t1,t2,…".
    PdDensity {
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = DEFAULT_U_MAX)]
        umax: f64,
    },
    /// Integral of the density over a box.
    PdBox {
        #[arg(long = "box")]
        spec: BoxSpec,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Check the box criterion along a ladder of n.
    Verify {
        #[arg(long = "box")]
        spec: BoxSpec,
        #[arg(long)]
        epsilon: f64,
        /// Override R = k/(2ε).
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long, default_value = "1e4,1e5,1e6")]
        ladder: String,
        #[arg(long, value_parser = parse_count, default_value = "1e6")]
        samples: u64,
        #[arg(long, value_parser = parse_count, default_value = "1e6")]
        exact_threshold: u64,
        /// Report file; same as --out.
        #[arg(long, conflicts_with = "out")]
        report: Option<PathBuf>,
    },
    /// Run an acceptance bundle and emit its JSON report.
    Suite {
        #[arg(long, value_enum)]
        name: SuiteArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiMethod {
    Brute,
    Exact,
    Dickman,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoxMethod {
    Exact,
    Psi,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Identities,
    Convergence,
    All,
}

impl From<SuiteArg> for SuiteName {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Identities => SuiteName::Identities,
            SuiteArg::Convergence => SuiteName::Convergence,
            SuiteArg::All => SuiteName::All,
        }
    }
}

/// Accepts plain integers as well as exact float forms such as `1e7`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(64) {
        Ok(f as u64)
    } else {
        Err(format!("'{s}' is not a non-negative integer"))
    }
}

/// What a command produced, and whether it counts as a pass.
struct Outcome {
    text: String,
    failure: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            failure: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(outcome) => {
            let mut target = cli.global.out.clone();
            if let Command::Verify {
                report: Some(p), ..
            } = &cli.command
            {
                target = Some(p.clone());
            }
            if let Err(e) = emit(&outcome.text, target.as_ref()) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(msg) => {
                    eprintln!("{msg}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parameter(_) => 2,
                _ => 1,
            })
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn table(g: &Global, u_max: f64, step: f64) -> billingsley::Result<DickmanTable> {
    match &g.cache_dir {
        Some(dir) => DickmanTable::load_or_build(dir, u_max, step),
        None => DickmanTable::build(u_max, step),
    }
}

fn fixed(v: f64, digits: usize) -> String {
    format!("{v:.digits$}\n")
}

fn to_json<T: Serialize>(v: &T) -> billingsley::Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn envelope<T: Serialize>(
    command: &str,
    config: serde_json::Value,
    results: &T,
) -> billingsley::Result<String> {
    to_json(&json!({
        "version": REPORT_VERSION,
        "command": command,
        "config": config,
        "results": results,
    }))
}

fn run(cli: &Cli) -> billingsley::Result<Outcome> {
    let g = &cli.global;
    let d = g.digits;
    match &cli.command {
        Command::Rho { u, step, umax } => {
            let t = table(g, *umax, *step)?;
            Ok(Outcome::ok(fixed(t.rho(*u)?, d)))
        }
        Command::RhoTable { umax, step } => {
            let t = table(g, *umax, *step)?;
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            Ok(Outcome::ok(
                String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?,
            ))
        }
        Command::Mertens { x, range } => {
            if let Some(x) = x {
                let sieve = PrimeSieve::new(*x)?;
                Ok(Outcome::ok(fixed(
                    mertens_constant_estimate(&sieve, *x)?,
                    d,
                )))
            } else {
                let r = range.as_ref().expect("clap enforces the group");
                let sieve = PrimeSieve::new(r[1].max(2))?;
                Ok(Outcome::ok(fixed(mertens_sum(&sieve, r[0], r[1])?, d)))
            }
        }
        Command::Psi { x, y, method } => match method {
            PsiMethod::Brute => {
                let sieve = PrimeSieve::new((*x).max(2))?;
                Ok(Outcome::ok(format!(
                    "{}\n",
                    psi_bruteforce(&sieve, *x, *y)?
                )))
            }
            PsiMethod::Exact => Ok(Outcome::ok(format!("{}\n", psi_exact(*x, *y)?))),
            PsiMethod::Dickman => {
                let t = table(g, DEFAULT_U_MAX, DEFAULT_STEP)?;
                Ok(Outcome::ok(fixed(
                    psi_dickman(&t, *x as f64, *y as f64)?,
                    d,
                )))
            }
        },
        Command::PsiLadder { t, nmax, nmin } => {
            if !(*t >= 1.0) || !t.is_finite() {
                return Err(Error::Parameter(format!("t must be >= 1, got {t}")));
            }
            if *nmin < 2 || nmin > nmax {
                return Err(Error::Parameter("need 2 <= nmin <= nmax".into()));
            }
            let tab = table(g, DEFAULT_U_MAX.max(t.ceil()), DEFAULT_STEP)?;
            let rho = tab.rho(*t)?;
            let mut s = String::from("n,psi,psi_over_n,rho,abs_err\n");
            let mut n = *nmin;
            while n <= *nmax {
                let psi = psi_exact(n, floor_pow(n, 1.0 / t).max(1))?;
                let ratio = psi as f64 / n as f64;
                writeln!(s, "{n},{psi},{ratio},{rho},{}", (ratio - rho).abs()).unwrap();
                match n.checked_mul(10) {
                    Some(next) => n = next,
                    None => break,
                }
            }
            Ok(Outcome::ok(s))
        }
        Command::Box {
            n,
            spec,
            method,
            samples,
        } => {
            let text = match method {
                BoxMethod::Exact | BoxMethod::Psi => {
                    let limit = match method {
                        BoxMethod::Exact => *n,
                        _ => floor_pow(*n, spec.upper(0).min(1.0)),
                    };
                    let sieve = PrimeSieve::new(limit.max(2))?;
                    let c = match method {
                        BoxMethod::Exact => box_probability_exact(&sieve, *n, spec)?,
                        _ => box_probability_via_psi(&sieve, *n, spec)?,
                    };
                    to_json(&json!({ "count": c.count, "total": c.total, "p_hat": c.ratio() }))?
                }
                BoxMethod::Mc => {
                    let sieve = PrimeSieve::new(sampling_limit(*n))?;
                    let e = sample_box_probability(&sieve, *n, spec, *samples, g.seed)?;
                    to_json(
                        &json!({ "count": e.hits, "total": e.total, "p_hat": e.p_hat, "std_err": e.std_err }),
                    )?
                }
            };
            Ok(Outcome::ok(text))
        }
        Command::SampleFactors { n, count, k } => {
            if *k < 1 {
                return Err(Error::Parameter("k must be >= 1".into()));
            }
            let sieve = PrimeSieve::new(sampling_limit(*n))?;
            let rows = sample_factors(&sieve, *n, *count, *k, g.seed)?;
            let mut s = String::from("N");
            for i in 1..=*k {
                write!(s, ",p{i}").unwrap();
            }
            for i in 1..=*k {
                write!(s, ",L{i}").unwrap();
            }
            s.push('\n');
            for r in rows {
                write!(s, "{}", r.value).unwrap();
                for p in &r.primes {
                    write!(s, ",{p}").unwrap();
                }
                for l in &r.logs {
                    write!(s, ",{l}").unwrap();
                }
                s.push('\n');
            }
            Ok(Outcome::ok(s))
        }
        Command::PdSample { count, trunc, k } => {
            if *k < 1 || k > trunc {
                return Err(Error::Parameter(format!(
                    "need 1 <= k <= trunc, got k = {k}"
                )));
            }
            let draws = pd_samples(g.seed, *count, *trunc)?;
            let mut s = String::new();
            for i in 1..=*k {
                write!(s, "L{i},").unwrap();
            }
            s.push_str("tail_mass\n");
            for dr in draws {
                for i in 0..*k {
                    write!(s, "{},", dr.component(i)).unwrap();
                }
                writeln!(s, "{}", dr.tail_mass).unwrap();
            }
            Ok(Outcome::ok(s))
        }
        Command::PdDensity { point, umax } => {
            let t: Vec<f64> = point
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parameter(format!("bad coordinate '{x}': {e}")))
                })
                .collect::<billingsley::Result<_>>()?;
            let tab = table(g, *umax, DEFAULT_STEP)?;
            Ok(Outcome::ok(fixed(pd_density(&tab, &t)?, d)))
        }
        Command::PdBox { spec, grid } => {
            let tab = table(g, DEFAULT_U_MAX, DEFAULT_STEP)?;
            Ok(Outcome::ok(to_json(&pd_box_probability(
                &tab, spec, *grid,
            )?)?))
        }
        Command::Verify {
            spec,
            epsilon,
            r,
            ladder,
            samples,
            exact_threshold,
            ..
        } => {
            let ladder: Vec<u64> = ladder
                .split(',')
                .map(|x| parse_count(x.trim()).map_err(Error::Parameter))
                .collect::<billingsley::Result<_>>()?;
            let crit = match r {
                Some(r) => BoxCriterion::with_r(*epsilon, *r, spec.k())?,
                None => BoxCriterion::new(*epsilon, spec.k())?,
            };
            let tab = table(g, DEFAULT_U_MAX, DEFAULT_STEP)?;
            let opts = RunOptions {
                samples: *samples,
                seed: g.seed,
                exact_threshold: *exact_threshold,
                ..RunOptions::default()
            };
            let rep = run_criterion(&tab, &ladder, spec, &crit, &opts)?;
            let failure = rep.entries.iter().find(|e| !e.verdict).map(|e| {
                format!(
                    "verdict failed at n = {}: p = {} below bound {}",
                    e.n, e.p, rep.lower_bound
                )
            });
            let config = json!({
                "seed": g.seed,
                "samples": samples,
                "exact_threshold": exact_threshold,
                "ladder": ladder,
            });
            Ok(Outcome {
                text: envelope("verify", config, &rep)?,
                failure,
            })
        }
        Command::Suite { name } => {
            let cfg = SuiteConfig {
                seed: g.seed,
                cache_dir: g.cache_dir.clone(),
                ..SuiteConfig::default()
            };
            let report = run_suite((*name).into(), &cfg)?;
            let failure = report
                .first_failure()
                .map(|f| format!("criterion {} ({}) failed", f.id, f.name));
            Ok(Outcome {
                text: to_json(&report)?,
                failure,
            })
        }
    }
}

/// Sieve size for sampling up to n: all of it when affordable, else enough
/// that every N <= n factors by sieve or trial division.
fn sampling_limit(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    n.min(SAMPLING_SIEVE_CAP).max(r + 1).max(2)
}
