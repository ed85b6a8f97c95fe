use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use degenerate_ot::harness::{collect_reports, load_config, output_root, run_suite, run_to_dir, RunSummary};

/// Runs transport experiments and writes CSV reports, manifests and plots.
#[derive(Parser)]
#[command(name = "degot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run every `.toml` config in a directory.
    Suite { dir: PathBuf },
    /// Summarize the reports below a directory.
    Report { dir: PathBuf },
}

fn print_summary(s: &RunSummary) {
    let status = if s.passed() { "PASS" } else { "FAIL" };
    println!("{status} {} ({} rows, {} asserted)", s.dir.display(), s.rows, s.asserted);
    for m in &s.failed {
        println!("  failed: {m}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = output_root();
    let ok = match cli.command {
        Command::Run { config } => match load_config(&config).and_then(|c| run_to_dir(&c, &root)) {
            Ok(s) => {
                print_summary(&s);
                s.passed()
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                false
            }
        },
        Command::Suite { dir } => match run_suite(&dir, &root) {
            Ok(runs) => {
                let mut ok = true;
                for (path, res) in runs {
                    match res {
                        Ok(s) => {
                            print_summary(&s);
                            ok &= s.passed();
                        }
                        Err(e) => {
                            eprintln!("error: {}: {e}", path.display());
                            ok = false;
                        }
                    }
                }
                ok
            }
            Err(e) => {
                eprintln!("error: {e}");
                false
            }
        },
        Command::Report { dir } => match collect_reports(&dir) {
            Ok(reports) if !reports.is_empty() => {
                let mut ok = true;
                for (path, s) in reports {
                    let status = if s.failed.is_empty() { "PASS" } else { "FAIL" };
                    println!("{status} {} ({} rows, {} asserted)", path.display(), s.rows, s.asserted);
                    for m in &s.failed {
                        println!("  failed: {m}");
                    }
                    ok &= s.failed.is_empty();
                }
                ok
            }
            Ok(_) => {
                eprintln!("error: no report.csv below {}", dir.display());
                false
            }
            Err(e) => {
                eprintln!("error: {e}");
                false
            }
        },
    };
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
