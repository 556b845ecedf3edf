use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ggplab::cache::Cache;
use ggplab::config::{Format, RunConfig};
use ggplab::exponents::{exponents, markdown_table, parse_rational};
use ggplab::suites::{names, run_suites};
use ggplab::Error;

#[derive(Parser)]
#[command(name = "ggplab", version, about = "Exact and numerical checks for p-adic microlocal lifts and period bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run verification suites and emit a report.
    Verify(VerifyArgs),
    /// Print the exponent table.
    Exponents {
        /// Single value or inclusive range A..B.
        #[arg(long, default_value = "1..3")]
        n: String,
        #[arg(long, default_value = "0")]
        theta: String,
        #[arg(long, default_value_t = 1)]
        l: u32,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Inspect or clear the coset cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
        #[arg(long, global = true)]
        cache_dir: Option<PathBuf>,
    },
    /// List suite names.
    Suites,
}

#[derive(Subcommand)]
enum CacheAction {
    List,
    Clear,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite names, `prefix.*` or `all`; repeatable or comma separated.
    #[arg(long = "suite", value_delimiter = ',')]
    suites: Vec<String>,
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    budget: Option<u128>,
    /// Seconds; suites not started by then are skipped.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

fn build_config(a: VerifyArgs) -> ggplab::Result<RunConfig> {
    let mut c = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if !a.suites.is_empty() {
        c.suites = a.suites;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { c.$f = v; } )* };
    }
    set!(n, p, l, samples, seed, threshold, trials, theta, budget, format);
    if a.group.is_some() {
        c.group = a.group;
    }
    if a.time_budget.is_some() {
        c.time_budget = a.time_budget;
    }
    if a.cache_dir.is_some() {
        c.cache_dir = a.cache_dir;
    }
    if a.out.is_some() {
        c.out = a.out;
    }
    Ok(c)
}

fn parse_range(s: &str) -> ggplab::Result<(u32, u32)> {
    let bad = || Error::InvalidConfig(format!("bad range {s}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("ggplab: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Verify(a) => {
            let cfg = match build_config(a) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let report = match run_suites(&cfg) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            match &cfg.out {
                Some(path) => {
                    if let Err(e) = report.write(path, cfg.format) {
                        return config_error(e);
                    }
                    for s in &report.suites {
                        eprintln!("{:<20} {:<12} {:.2}s", s.name, s.status.as_str(), s.wall_time);
                    }
                }
                None => println!("{}", report.render(cfg.format)),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Cmd::Exponents { n, theta, l, format } => {
            let rows = parse_range(&n).and_then(|(a, b)| {
                let t = parse_rational(&theta)?;
                (a..=b).map(|n| exponents(n, l, t)).collect::<ggplab::Result<Vec<_>>>()
            });
            let rows = match rows {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            match format.parse::<Format>() {
                Ok(Format::Md) => print!("{}", markdown_table(&rows)),
                Ok(Format::Json) => println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize")),
                Err(e) => return config_error(e),
            }
            ExitCode::SUCCESS
        }
        Cmd::Cache { action, cache_dir } => {
            let cache = Cache::resolve(cache_dir.as_deref());
            let out = match action {
                CacheAction::List => cache.list().map(|entries| {
                    println!("{}", cache.dir.display());
                    for e in entries {
                        println!("{:>10}  {}", e.bytes, e.key);
                    }
                }),
                CacheAction::Clear => cache.clear().map(|k| println!("removed {k} entries from {}", cache.dir.display())),
            };
            match out {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("ggplab: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Suites => {
            for s in names() {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
    }
}
