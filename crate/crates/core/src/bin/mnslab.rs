use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mnslab::besov::{build_partition, norm, NormFamily, NormSpec};
use mnslab::harness::{
    aggregate, check_params, convergence_study, init_threads, read_rows_csv, run_coupled, write_aggregate_csv,
    write_rows_csv, ExperimentConfig, Manifest, StudyFlags,
};
use mnslab::snapshot::read_field;
use mnslab::Result;

#[derive(Parser)]
#[command(name = "mnslab", version, about = "Particle / stochastic compressible Navier-Stokes convergence lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat key = value configuration file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set grid.M=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| mnslab::Error::Config(format!("--set expects KEY=VALUE, got '{o}'")))?;
            cfg = cfg.with(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Besov,
    TriebelLizorkin,
}

#[derive(Subcommand)]
enum Command {
    /// Check (β, γ, δ) and the δ window for every N of the schedule.
    Validate(ConfigArgs),
    /// One coupled run; writes rows.csv and manifest.txt.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (default: output.dir).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Full sweep over the N schedule; writes rows.csv, aggregate.csv and manifest.txt.
    Study {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Besov or Triebel-Lizorkin norms of the fields in a field snapshot.
    Norms {
        snapshot: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 1.3)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Family::Besov)]
        family: Family,
    },
    /// Re-aggregate a raw rows CSV.
    Report {
        rows: PathBuf,
        /// δ used for the scaled column.
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        /// Write the aggregate here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(out: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    Manifest::for_config(cfg).write(BufWriter::new(File::create(dir.join("manifest.txt"))?))
}

fn print_flags(flags: &StudyFlags) {
    let mark = |b: bool| if b { "pass" } else { "fail" };
    println!("log-log slope of E[sup Q] vs N: {:.4}", flags.slope);
    println!("MONOTONE_DECAY: {}", mark(flags.monotone_decay));
    println!("scaled statistic non-increasing (top half): {}", mark(flags.scaled_non_increasing));
    println!("besov_S decreasing: {}", mark(flags.besov_s_decreasing));
    println!("besov_V decreasing: {}", mark(flags.besov_v_decreasing));
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_threads()?;
    match cli.command {
        Command::Validate(args) => {
            let cfg = args.load()?;
            let (lo, hi) = cfg.params.delta_window();
            println!("delta window: ({lo:.6}, {hi:.6}), delta = {}", cfg.params.delta);
            let mut ok = true;
            for &n in &cfg.schedule {
                match check_params(&cfg, n) {
                    Ok(adm) => {
                        println!("N = {n}: admissible");
                        for w in adm.warnings {
                            println!("  warning: {w}");
                        }
                    }
                    Err(e) => {
                        ok = false;
                        println!("N = {n}: {e}");
                    }
                }
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Run { cfg, out } => {
            let cfg = cfg.load()?;
            let dir = out_dir(&out, &cfg)?;
            let run = run_coupled(&cfg, cfg.run_n, cfg.run_rep)?;
            write_rows_csv(BufWriter::new(File::create(dir.join("rows.csv"))?), &run.rows)?;
            write_manifest(&dir, &cfg)?;
            println!("sup Q = {}  ({} rows in {})", run.sup_q(), run.rows.len(), dir.display());
            if let Some(f) = run.failure {
                eprintln!("run ended early: {f}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Study { cfg, out } => {
            let cfg = cfg.load()?;
            let dir = out_dir(&out, &cfg)?;
            let report = convergence_study(&cfg)?;
            write_rows_csv(BufWriter::new(File::create(dir.join("rows.csv"))?), &report.rows)?;
            write_aggregate_csv(BufWriter::new(File::create(dir.join("aggregate.csv"))?), &report.aggregates)?;
            report.manifest.write(BufWriter::new(File::create(dir.join("manifest.txt"))?))?;
            for a in &report.aggregates {
                println!(
                    "N = {:>6}  E[sup Q] = {:.5e} [{:.5e}, {:.5e}]  N^2d E[(sup Q)^2] = {:.5e}  besov_S = {:.4e}  besov_V = {:.4e}",
                    a.n, a.e_sup_q, a.ci_lo, a.ci_hi, a.scaled, a.e_sup_besov_s, a.e_sup_besov_v
                );
            }
            print_flags(&report.flags);
            for f in &report.failures {
                eprintln!("failure: {f}");
            }
            Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Norms { snapshot, s, p, r, lambda, family } => {
            let f = read_field(&mut BufReader::new(File::open(&snapshot)?))?;
            let part = build_partition(lambda, &f.grid)?;
            let spec = match family {
                Family::Besov => NormSpec { family: NormFamily::Besov, s, p, r },
                Family::TriebelLizorkin => NormSpec { family: NormFamily::TriebelLizorkin, s, p, r },
            };
            println!("t = {}", f.t);
            println!("rho: {}", norm(&f.rho, &spec, &part)?);
            for (q, c) in f.vel.iter().enumerate() {
                println!("upsilon_{q}: {}", norm(c, &spec, &part)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { rows, delta, out } => {
            let rows = read_rows_csv(BufReader::new(File::open(&rows)?))?;
            let aggs = aggregate(&rows, delta)?;
            match out {
                Some(p) => write_aggregate_csv(BufWriter::new(File::create(p)?), &aggs)?,
                None => write_aggregate_csv(std::io::stdout().lock(), &aggs)?,
            }
            if aggs.len() >= 2 {
                print_flags(&StudyFlags::from_aggregates(&aggs));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
