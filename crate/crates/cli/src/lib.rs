//! Command-line front end of the catheter navigation simulator.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration or input error,
//! 3 training or simulation divergence, 4 hash or schema mismatch.

pub mod args;
pub mod commands;
pub mod plot;
pub mod report;

use std::ffi::OsString;

use cathnav::{Error, Result};
use clap::Parser;

pub use args::{Cli, Command};

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::TrainingDiverged(_) | Error::SimulationDiverged { .. } => 3,
        Error::Schema(_) => 4,
        Error::Contract(_) => 1,
        _ => 2,
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
fn out(text: impl std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn print_json<T: serde::Serialize>(value: &T) {
    out(serde_json::to_string_pretty(value).expect("output serializes"));
}

pub fn run(cli: Cli) -> Result<()> {
    use commands::*;
    match cli.command {
        Command::Train(a) => print_json(&cmd_train(&a)?),
        Command::Evaluate(a) => {
            let r = cmd_evaluate(&a)?;
            if a.out.is_none() {
                out(r.to_json());
            } else {
                let m = &r.metrics;
                out(format!("success {}/{} (delta {:.3}), T_a {:.3} mm, T_r {:.3} mm", m.n_s, m.n, m.delta, m.t_a, m.t_r_mean));
            }
        }
        Command::Plan(a) => {
            let p = cmd_plan(&a)?;
            out(format!("{} waypoints, complete: {}", p.records.len(), p.header.complete));
        }
        Command::Demos(a) => print_json(&cmd_demos(&a)?),
        Command::Replay(a) => {
            let r = cmd_replay(&a)?;
            out(format!("{} steps, outcome {:?}, max observation error {:.3e}", r.steps, r.outcome, r.max_observation_error));
        }
        Command::Compare(a) => out(cmd_compare(&a)?.table().trim_end()),
        Command::Plot(a) => {
            for f in cmd_plot(&a)? {
                out(f.display());
            }
        }
        Command::GenMesh(a) => out(cmd_gen_mesh(&a)?.display()),
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
