//! Command-line front end: `solve`, `gen`, `verify` and `report`.
//!
//! Exit codes: 0 steady state reached (or command succeeded), 1 error or
//! failed verification, 2 unbounded queue growth, 3 phase cap or horizon.

use crate::engine::{solve_equilibrium, Limits};
use crate::gadgets::GadgetSpec;
use crate::instance::{emit_instance, parse_instance, validate};
use crate::rat::{parse_rat, Rat};
use crate::report::{exit_code, render_csv, render_text, verify_report, RunReport, EXIT_ERROR, EXIT_STEADY};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "nashflow", version, about = "Exact dynamic equilibria in fluid queuing networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the equilibrium of an instance file and write a run report.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        max_phases: usize,
        /// Stop at this source time (default: the convergence bound when
        /// the inflow does not exceed the min cut).
        #[arg(long, value_parser = rat_arg)]
        horizon: Option<Rat>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a generated instance file.
    Gen {
        #[command(subcommand)]
        gadget: Gadget,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Re-check every invariant of a stored run report.
    Verify { report: PathBuf },
    /// Re-render a stored run report.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Gadget {
    #[command(name = "example_one")]
    ExampleOne {
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        u: Rat,
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        tau: Rat,
    },
    #[command(name = "example_three")]
    ExampleThree {
        #[arg(long = "nu-b", value_parser = rat_arg)]
        nu_b: Option<Rat>,
    },
    #[command(name = "figure_chain")]
    FigureChain {
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        u: Rat,
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        rho: Rat,
    },
    Pulse {
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        u: Rat,
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        rho: Rat,
    },
    Damper {
        #[arg(long)]
        k: u32,
        #[arg(long, value_parser = rat_arg, default_value = "1")]
        rho: Rat,
    },
    Exponential {
        #[arg(long)]
        d: u32,
        /// Defaults to the least admissible power of two.
        #[arg(long = "C", alias = "c")]
        c: Option<BigInt>,
    },
    #[command(name = "two_link")]
    TwoLink {
        #[arg(long = "L", alias = "l")]
        l: u32,
    },
}

fn rat_arg(s: &str) -> Result<Rat, String> {
    parse_rat(s).map_err(|e| e.to_string())
}

impl Gadget {
    fn spec(self) -> GadgetSpec {
        match self {
            Gadget::ExampleOne { u, tau } => GadgetSpec::ExampleOne { u, tau },
            Gadget::ExampleThree { nu_b } => GadgetSpec::ExampleThree { nu_b },
            Gadget::FigureChain { u, rho } => GadgetSpec::FigureChain { u, rho },
            Gadget::Pulse { u, k, rho } => GadgetSpec::Pulse { u, k, rho },
            Gadget::Damper { k, rho } => GadgetSpec::Damper { k, rho },
            Gadget::Exponential { d, c } => GadgetSpec::Exponential { d, c },
            Gadget::TwoLink { l } => GadgetSpec::TwoLink { l },
        }
    }
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<(), String> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn render(report: &RunReport, format: Format) -> Result<String, String> {
    match format {
        Format::Json => Ok(report.to_json_string()),
        Format::Csv => render_csv(report).map_err(|e| e.to_string()),
        Format::Text => render_text(report).map_err(|e| e.to_string()),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    match cli.command {
        Command::Solve {
            instance,
            max_phases,
            horizon,
            format,
            output,
        } => {
            let inst = parse_instance(&read(&instance)?).map_err(|e| e.to_string())?;
            let valid = validate(&inst).map_err(|v| {
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")
            })?;
            for w in &valid.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let limits = Limits { max_phases, horizon };
            let traj = solve_equilibrium(&valid, &limits).map_err(|e| e.to_string())?;
            let report = RunReport::build(&traj, &limits);
            emit(&render(&report, format)?, output.as_deref(), out)?;
            let _ = writeln!(
                err,
                "{}: {} phases{}",
                report.summary.status,
                report.summary.phases,
                report
                    .summary
                    .theta_star
                    .as_ref()
                    .map_or(String::new(), |t| format!(", steady from theta = {}", t.exact))
            );
            Ok(exit_code(&traj.status))
        }
        Command::Gen { gadget, output } => {
            let inst = gadget.spec().generate().map_err(|e| e.to_string())?;
            validate(&inst).map_err(|v| format!("generated instance is invalid: {v:?}"))?;
            emit(&emit_instance(&inst), output.as_deref(), out)?;
            Ok(EXIT_STEADY)
        }
        Command::Verify { report } => {
            let r = RunReport::parse(&read(&report)?).map_err(|e| e.to_string())?;
            let v = verify_report(&r).map_err(|e| e.to_string())?;
            for f in &v.failures {
                let _ = writeln!(out, "FAIL {f}");
            }
            let first = r.summary.first_phase_end.as_ref().map_or("never", |n| n.exact.as_str());
            let _ = writeln!(
                out,
                "{} checks, {} failed; status {}, {} phases, first phase ends at {}",
                v.checks,
                v.failures.len(),
                r.summary.status,
                r.summary.phases,
                first
            );
            Ok(if v.passed() { EXIT_STEADY } else { EXIT_ERROR })
        }
        Command::Report { report, format, output } => {
            let r = RunReport::parse(&read(&report)?).map_err(|e| e.to_string())?;
            emit(&render(&r, format)?, output.as_deref(), out)?;
            Ok(EXIT_STEADY)
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_STEADY };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("nashflow").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn gen_writes_instances() {
        let (code, text, _) = call(&["gen", "two_link", "--L", "3"]);
        assert_eq!(code, 0);
        assert_eq!(parse_instance(&text).unwrap().arcs.len(), 2);
        let (code, text, _) = call(&["gen", "pulse", "--u", "1", "--k", "2", "--rho", "1"]);
        assert_eq!(code, 0);
        assert_eq!(parse_instance(&text).unwrap().arcs.len(), 12);
        let (code, _, err) = call(&["gen", "exponential", "--d", "2", "--C", "8"]);
        assert_eq!(code, 1);
        assert!(err.contains("minimum"));
    }

    #[test]
    fn bad_arguments_fail() {
        assert_eq!(call(&["solve"]).0, 1);
        assert_eq!(call(&["gen", "pulse", "--k", "0"]).0, 1);
        assert_eq!(call(&["solve", "/nonexistent/file.json"]).0, 1);
    }
}
