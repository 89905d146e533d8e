use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

mod commands;
mod params;

use params::{flags, Params};

pub const SUBCOMMANDS: [(&str, &str); 8] = [
    ("solve", "Recover one random sparse signal and write its trace"),
    ("sweep", "Phase-transition sweep over (s, m) with boundary extraction"),
    ("rates", "Convergence-rate study at m = oversampling * m0"),
    ("timing", "Time-to-target as a function of m per ensemble"),
    ("sensitivity", "Limiting error under a mistuned radius"),
    ("denoise", "Monte Carlo check of the projection denoising bound"),
    ("theory", "Evaluate phi and the rate predictions"),
    ("widths", "Squared Gaussian width of the l1 descent cone and m0"),
];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: pgdlab::Error) -> Self {
        use pgdlab::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::DimensionMismatch { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("pgdlab")
        .about("Projected gradient descent for structured signal recovery")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let table = flags(name);
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value file; command-line flags take precedence"),
        );
        let writes_files = table.iter().any(|f| f.key == "out");
        for f in table {
            let help = match f.default {
                Some(d) => format!("{} [default: {d}]", f.help),
                None => f.help.to_string(),
            };
            sub = sub.arg(Arg::new(f.key).long(f.key).value_name(f.value_name).help(help));
        }
        if writes_files && name != "solve" {
            sub = sub.arg(
                Arg::new("svg").long("svg").action(ArgAction::SetTrue).help("Also write SVG plots"),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let matches = match cli().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return Ok(());
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return Err(CliError::Usage(String::new()));
            }
            return Err(CliError::Usage(e.to_string().trim_end().to_string()));
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let provided: Vec<(&'static str, String)> = flags(name)
        .iter()
        .filter_map(|f| sub.get_one::<String>(f.key).map(|v| (f.key, v.clone())))
        .collect();
    let config = sub.get_one::<String>("config").map(PathBuf::from);
    let params = Params::resolve(name, config.as_deref(), &provided)?;
    let svg = sub.try_get_one::<bool>("svg").ok().flatten().copied().unwrap_or(false);
    commands::dispatch(name, &params, svg)
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
