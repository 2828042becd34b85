use std::path::PathBuf;
use std::process::ExitCode;

use autofill_sim::attacks::{run_attack, AttackKind};
use autofill_sim::frameworks::{preset, FrameworkId, ManagerProfile};
use autofill_sim::harness::{
    compare_golden, fixtures_dir, golden_path, matrix, render_matrix, render_report, run_suite,
    ReportFormat, Suite,
};
use autofill_sim::model::UserAgent;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "autofill-sim",
    version,
    about = "Autofill framework conformance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum User {
    Approve,
    Deny,
}

#[derive(Subcommand)]
enum Command {
    /// Run one suite against one framework.
    Run {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        framework: FrameworkId,
        #[arg(long)]
        manager: Option<String>,
        #[arg(long, value_enum, default_value = "markdown")]
        report: Format,
        /// Also compare against this golden; any difference exits with 1.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Run one attack scenario.
    Attack {
        #[arg(long)]
        attack: AttackKind,
        #[arg(long)]
        framework: FrameworkId,
        #[arg(long)]
        manager: Option<String>,
        #[arg(long, value_enum, default_value = "approve")]
        user: User,
    },
    /// Every suite against every framework, plus the attack library.
    Matrix {
        #[arg(long, value_enum, default_value = "markdown")]
        report: Format,
    },
}

enum Failure {
    Mismatch(String),
    Usage(String),
}

fn profile(
    framework: FrameworkId,
    manager: Option<&str>,
) -> Result<Option<ManagerProfile>, Failure> {
    manager
        .map(|m| preset(framework, m).map_err(|e| Failure::Usage(e.to_string())))
        .transpose()
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            suite,
            framework,
            manager,
            report,
            golden,
        } => {
            let profile = profile(framework, manager.as_deref())?;
            let result = run_suite(suite, framework, profile.as_ref()).map_err(usage)?;
            print!("{}", render_report(&result, report.into()));
            if let Some(path) = golden {
                let diff = compare_golden(&result, &path).map_err(usage)?;
                if !diff.is_empty() {
                    let lines: Vec<String> = diff
                        .cells
                        .iter()
                        .map(|d| {
                            format!(
                                "  {}: golden {} got {}",
                                d.check,
                                d.expected.glyph(),
                                d.actual.glyph()
                            )
                        })
                        .collect();
                    return Err(Failure::Mismatch(format!(
                        "{} cell(s) differ from {}\n{}",
                        diff.len(),
                        path.display(),
                        lines.join("\n")
                    )));
                }
            }
            Ok(())
        }
        Command::Attack {
            attack,
            framework,
            manager,
            user,
        } => {
            let profile = profile(framework, manager.as_deref())?;
            let user = match user {
                User::Approve => UserAgent::AlwaysApprove,
                User::Deny => UserAgent::AlwaysDeny,
            };
            let outcome = run_attack(attack, framework, profile.as_ref(), user).map_err(usage)?;
            println!("{attack} vs {framework}: {}", outcome.label());
            if framework == FrameworkId::SecureModel && outcome.is_stolen() {
                return Err(Failure::Mismatch(format!(
                    "{attack} was expected to be blocked"
                )));
            }
            Ok(())
        }
        Command::Matrix { report } => {
            let dir = fixtures_dir();
            let m = matrix(&dir).map_err(usage)?;
            print!("{}", render_matrix(&m, report.into()));
            let mut problems = Vec::new();
            for r in &m.reports {
                let diff = compare_golden(r, &golden_path(&dir, r.suite, r.subject.framework))
                    .map_err(usage)?;
                if !diff.is_empty() {
                    problems.push(format!(
                        "{} {}: {} cell(s) differ",
                        r.suite,
                        r.subject.framework,
                        diff.len()
                    ));
                }
            }
            for fa in m
                .attacks
                .iter()
                .filter(|a| a.framework == FrameworkId::SecureModel)
            {
                for rec in fa
                    .outcomes
                    .iter()
                    .filter(|r| !r.outcome.starts_with("blocked"))
                {
                    problems.push(format!(
                        "{} not blocked by {}: {}",
                        rec.attack, fa.framework, rec.outcome
                    ));
                }
            }
            if problems.is_empty() {
                Ok(())
            } else {
                Err(Failure::Mismatch(problems.join("\n")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
