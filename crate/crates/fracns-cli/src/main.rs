use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fracns::ledger::LedgerLine;
use fracns::pipeline::verify::{run_suite, SUITES};
use fracns::pipeline::{audit_directory, compare_profiles, run, RunConfig, RunOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracns", about = "Convex-integration laboratory for the fractional Navier-Stokes-Reynolds system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration q = 0..q_max and write report.toml, level CSVs and checkpoints.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many levels.
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Check e_tot monotonicity in every level CSV of an output directory.
    Audit {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run level 0 under `profile` and `compare_profile` and compare the results.
    CompareProfiles {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the operator, Mikado, solver, harness, appendix and gluing suites.
    VerifyOperators {
        /// Run only the named suite.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 20240917)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    qmax: Option<u32>,
    #[arg(long)]
    grid: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            config.output = Some(out.clone());
        }
        if let Some(q) = self.qmax {
            config.q_max = q;
        }
        if let Some(n) = self.grid {
            config.grid = n;
        }
        Ok(config)
    }
}

fn print_line(line: &LedgerLine) {
    let status = if line.pass { "ok  " } else if line.hard { "FAIL" } else { "soft" };
    let rel = relation_symbol(line);
    print!("  {status} {:<44} {:>12.4e} {rel} {:<12.4e}", line.id, line.lhs, line.rhs);
    if let Some(n) = &line.note {
        print!("  ({n})");
    }
    println!();
}

fn relation_symbol(line: &LedgerLine) -> &'static str {
    use fracns::ledger::Relation::*;
    match line.relation {
        Le => "<=",
        Lt => "< ",
        Ge => ">=",
        Gt => "> ",
    }
}

fn cmd_run(overrides: &Overrides, resume: bool, stop_after: Option<u32>) -> Result<bool> {
    let config = overrides.load()?;
    let out = config.output.clone();
    if resume && out.is_none() {
        bail!("--resume needs an output directory");
    }
    let outcome = run(&config, &RunOptions { out: out.clone(), resume, stop_after })?;
    let r = &outcome.report;
    for level in &r.levels {
        println!("level {} -> {}", level.q, level.q + 1);
        for line in &level.ledger.lines {
            print_line(line);
        }
    }
    for (q, s) in &outcome.timing {
        println!("level {q} took {s:.1} s");
    }
    println!("hard failures: {}", r.hard_failures.len());
    for id in &r.hard_failures {
        println!("  {id}");
    }
    println!("soft failures: {}", r.soft_failures.len());
    for id in &r.soft_failures {
        println!("  {id}");
    }
    if let Some(dir) = out {
        println!("report written to {}", dir.join("report.toml").display());
    }
    Ok(r.pass)
}

fn cmd_audit(dir: &Path) -> Result<bool> {
    let audits = audit_directory(dir)?;
    if audits.is_empty() {
        bail!("no level CSV files in {}", dir.display());
    }
    for a in &audits {
        println!(
            "{}: {} samples, max e_tot increase {:.3e}, increasing steps {}, column consistency {:.1e}",
            a.file, a.samples, a.max_increase, a.increases, a.consistency
        );
    }
    Ok(true)
}

fn cmd_compare(overrides: &Overrides) -> Result<bool> {
    let config = overrides.load()?;
    let c = compare_profiles(&config)?;
    println!("e(0): {} vs {}", c.e0_a, c.e0_b);
    println!("v1(.,0) digests: {} / {}", c.digest_initial_a, c.digest_initial_b);
    println!("identical initial data: {}", c.identical_initial);
    println!("max |e_a - e_b| = {:.4e}", c.max_profile_difference);
    println!("max |<|v1a|^2> - <|v1b|^2>| = {:.4e}", c.max_energy_difference);
    Ok(true)
}

fn cmd_verify(only: Option<&str>, seed: u64) -> Result<bool> {
    let mut all_hard = true;
    let mut matched = false;
    for (name, suite) in SUITES {
        if only.is_some_and(|o| o != name) {
            continue;
        }
        matched = true;
        let outcome = run_suite(name, suite, seed)?;
        println!("{name} ({:.1} s): {}", outcome.seconds, if outcome.pass() { "pass" } else { "FAIL" });
        let lines = &outcome.ledger.lines;
        if lines.len() <= 24 {
            lines.iter().for_each(print_line);
        } else {
            println!("  {} lines, {} failing", lines.len(), lines.iter().filter(|l| !l.pass).count());
            lines.iter().filter(|l| !l.pass).for_each(print_line);
        }
        all_hard &= outcome.ledger.hard_failures().is_empty();
    }
    if !matched {
        bail!("unknown suite; available: {}", SUITES.map(|s| s.0).join(", "));
    }
    Ok(all_hard)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { overrides, resume, stop_after } => cmd_run(overrides, *resume, *stop_after),
        Command::Audit { out } => cmd_audit(out),
        Command::CompareProfiles { overrides } => cmd_compare(overrides),
        Command::VerifyOperators { suite, seed } => cmd_verify(suite.as_deref(), *seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
