//! The `erwlab` command line: parsing, dispatch and emission.
//!
//! Exit status: 0 success, 2 usage error, 3 runtime or i/o failure.

pub mod config;
pub mod emit;
pub mod run;

use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Help or version text; not a failure.
    Info(String),
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Info(s) | CliError::Usage(s) | CliError::Runtime(s) => f.write_str(s),
        }
    }
}

/// Parses, runs and emits; returns the process exit status.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let result = config::parse_args(argv).and_then(|cfg| {
        let started = Instant::now();
        if let Some(note) = derived_note(&cfg) {
            eprintln!("{note}");
        }
        let output = run::execute(&cfg)?;
        for w in &output.warnings {
            eprintln!("warning: {w}");
        }
        let emitted = emit::emit(&output, &cfg, started.elapsed().as_secs_f64())?;
        if cfg.out.is_some() {
            println!("{}", emitted.summary_line);
        } else {
            eprintln!("{}", emitted.summary_line);
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Info(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("erwlab: {}", e.to_string().trim_end());
            e.exit_code()
        }
    }
}

/// Derived quantities echoed before a run starts.
fn derived_note(cfg: &config::RunConfig) -> Option<String> {
    use erwlab_core::holes::HoleExperimentConfig;
    let (config::Subcommand::Holes, Some(n), Some(m)) = (cfg.subcommand, cfg.n, cfg.m) else {
        return None;
    };
    let h = HoleExperimentConfig { n, m, reps: cfg.reps.unwrap_or(1), seed: cfg.seed.unwrap_or(0) };
    Some(match h.mu() {
        Some(mu) => format!("holes: mu = {mu:.6}, threshold = {}", h.threshold()),
        None => format!("holes: mu undefined for m = {m}, threshold = {}", h.threshold()),
    })
}
