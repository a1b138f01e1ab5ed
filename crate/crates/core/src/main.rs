use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use olt::harness::{self, HarnessError, RunConfig, Theorem};

#[derive(Parser)]
#[command(name = "olt", version, about = "Online learning to transport: runs, presets and bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or a built-in preset.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        /// Output directory; defaults to `$OLT_OUT_DIR/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "OLT_OUT_DIR", default_value = "olt-out", hide_env_values = true)]
        out_root: PathBuf,
    },
    /// List the built-in presets, or print one as TOML.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Check regret bounds on every record.json below a directory.
    Verify {
        #[arg(long)]
        records: PathBuf,
        /// Restrict to these bounds (convex, projected, relaxed, interaction,
        /// msoe-expectation, shrinking). Default: every applicable bound.
        #[arg(long = "theorem")]
        theorems: Vec<String>,
    },
    /// Compare the QP and transport solvers with brute-force enumeration.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool, HarnessError> {
    match cmd {
        Command::Run { config, preset, seed, replicates, out, out_root } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => RunConfig::from_toml(
                    &std::fs::read_to_string(&path)
                        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?,
                )?,
                (None, Some(name)) => harness::preset(&name)?,
                (None, None) => unreachable!("clap requires one of --config and --preset"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            cfg.validate()?;
            let out = out.or(cfg.out_dir.clone()).unwrap_or_else(|| out_root.join(&cfg.name));
            let ensemble = harness::run(&cfg, Some(&out))?;
            let mut ok = true;
            for r in &ensemble.records {
                ok &= r.all_deterministic_checks_pass();
            }
            println!("{}: {} replicate(s) written to {}", cfg.name, ensemble.records.len(), out.display());
            for c in &ensemble.records[0].checks {
                let verdict = match c.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "expectation only",
                };
                println!("  {:?} vs {}: worst slack {:.3e} ({verdict})", c.bound, c.reference.name(), c.worst_slack);
            }
            Ok(ok)
        }
        Command::Presets { show } => {
            match show {
                Some(name) => print!("{}", harness::preset(&name)?.to_toml()),
                None => {
                    for name in harness::preset_names() {
                        println!("{name}");
                    }
                }
            }
            Ok(true)
        }
        Command::Verify { records, theorems } => {
            let recs = harness::load_records(&records)?;
            let wanted = theorems
                .iter()
                .map(|s| Theorem::parse(s).ok_or_else(|| HarnessError::Config(format!("unknown bound {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = harness::verify_bounds(&recs, (!wanted.is_empty()).then_some(wanted.as_slice()))?;
            println!("{:<18} {:<22} {:<16} {:>4} {:>6} {:>14} {:>14} {:>11} {:>9}  verdict", "bound", "run", "reference", "reps", "prefix", "lhs", "rhs", "slack", "tol");
            let mut ok = true;
            for r in &rows {
                ok &= r.pass;
                println!(
                    "{:<18} {:<22} {:<16} {:>4} {:>6} {:>14.6e} {:>14.6e} {:>11.3e} {:>9.2e}  {}{}",
                    r.theorem.name(),
                    r.run,
                    r.reference.name(),
                    r.replicates,
                    r.prefix,
                    r.lhs,
                    r.rhs,
                    r.slack,
                    r.tol,
                    if r.pass { "pass" } else { "FAIL" },
                    if r.note.is_empty() { String::new() } else { format!(" ({})", r.note) }
                );
            }
            Ok(ok)
        }
        Command::Oracle { count, seed } => {
            let r = harness::oracle_suite(seed, count);
            println!(
                "qp: status {}/{count}, ξ within tolerance {}/{count}, max |Δξ| {:.3e}",
                r.qp_status_agree, r.qp_xi_agree, r.qp_max_xi_diff
            );
            println!("w2: {}/{count} within tolerance, max |ΔW2²| {:.3e}", r.w2_agree, r.w2_max_diff);
            println!("digest {}", r.digest);
            for f in &r.failures {
                println!("  {f}");
            }
            Ok(r.pass())
        }
    }
}
