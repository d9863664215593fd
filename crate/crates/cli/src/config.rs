//! Argument and config-file parsing into a validated [`RunConfig`].

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_REPS: u64 = 100;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_LEVEL: f64 = 0.99;
pub const WORKERS_ENV: &str = "ERWLAB_WORKERS";

pub const EPSILON_MESSAGE: &str = "epsilon must satisfy 0 < ε ≤ 1/6";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Speed,
    Holes,
    Visits,
    Hitting,
    AvoidOrigin,
    Blocks,
    Coupling,
    Alpha,
    Oracle,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::Speed,
        Subcommand::Holes,
        Subcommand::Visits,
        Subcommand::Hitting,
        Subcommand::AvoidOrigin,
        Subcommand::Blocks,
        Subcommand::Coupling,
        Subcommand::Alpha,
        Subcommand::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Speed => "speed",
            Subcommand::Holes => "holes",
            Subcommand::Visits => "visits",
            Subcommand::Hitting => "hitting",
            Subcommand::AvoidOrigin => "avoid-origin",
            Subcommand::Blocks => "blocks",
            Subcommand::Coupling => "coupling",
            Subcommand::Alpha => "alpha",
            Subcommand::Oracle => "oracle",
        }
    }

    pub fn replicated(self) -> bool {
        !matches!(self, Subcommand::Alpha | Subcommand::Oracle)
    }

    /// Flags this subcommand accepts, besides --config.
    pub fn schema(self) -> &'static [&'static str] {
        match self {
            Subcommand::Speed => &["epsilon", "n", "half-space"],
            Subcommand::Holes => &["n", "m"],
            Subcommand::Visits => &["r", "n"],
            Subcommand::Hitting => &["r"],
            Subcommand::AvoidOrigin => &["k", "multiplier"],
            Subcommand::Blocks => &["epsilon", "n", "drift-ref"],
            Subcommand::Coupling => &["epsilon", "n"],
            Subcommand::Alpha => &["lambda", "base-n", "base-alpha", "top-n"],
            Subcommand::Oracle => &["r", "n"],
        }
    }

    fn accepts(self, key: &str) -> bool {
        const REPLICATED: &[&str] = &["reps", "seed", "workers", "level", "checkpoint"];
        const OUTPUT: &[&str] = &["out", "format"];
        self.schema().contains(&key) || OUTPUT.contains(&key) || (self.replicated() && REPLICATED.contains(&key))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every flag, optional, as read from argv or from a config file.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// Excitation strength, 0 < ε ≤ 1/6
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Walk length (speed, holes, blocks, coupling), domain scale (visits) or block-size argument (oracle)
    #[arg(long)]
    pub n: Option<u64>,
    /// Length of the short walk (holes)
    #[arg(long)]
    pub m: Option<u64>,
    /// Ball radius
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of replications
    #[arg(long)]
    pub reps: Option<u64>,
    /// Experiment seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: ERWLAB_WORKERS, else available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    /// The λ parameter of the α recursion
    #[arg(long)]
    pub lambda: Option<u32>,
    /// Confidence level of reported intervals
    #[arg(long)]
    pub level: Option<f64>,
    /// Comma-separated walk counts (avoid-origin)
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<u32>>,
    /// Radius multiplier, r = multiplier·e^{√k} (avoid-origin)
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Drift reference for block diagnostics
    #[arg(long, allow_negative_numbers = true)]
    pub drift_ref: Option<f64>,
    /// Pre-visited half-space x₁ ≤ t (speed)
    #[arg(long, allow_negative_numbers = true)]
    pub half_space: Option<i64>,
    /// Base level of the α recursion
    #[arg(long)]
    pub base_n: Option<u64>,
    /// α at the base level
    #[arg(long)]
    pub base_alpha: Option<f64>,
    /// Top level of the α recursion
    #[arg(long)]
    pub top_n: Option<u64>,
    /// Output directory (default: rows to stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row format
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSONL file of finished replications; an interrupted run resumes from it
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// JSON file with the same keys as the flags; explicit flags win
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! check {
            ($($field:ident => $key:literal),*) => {
                $(if self.$field.is_some() { keys.push($key); })*
            };
        }
        check!(epsilon => "epsilon", n => "n", m => "m", r => "r", reps => "reps", seed => "seed",
            workers => "workers", lambda => "lambda", level => "level", k => "k",
            multiplier => "multiplier", drift_ref => "drift-ref", half_space => "half-space",
            base_n => "base-n", base_alpha => "base-alpha", top_n => "top-n", out => "out",
            format => "format", checkpoint => "checkpoint");
        keys
    }

    /// `self` with gaps filled from `file`.
    fn over(self, file: Flags) -> Flags {
        macro_rules! merge {
            ($($field:ident),*) => { Flags { $($field: self.$field.or(file.$field),)* config: self.config } };
        }
        merge!(epsilon, n, m, r, reps, seed, workers, lambda, level, k, multiplier, drift_ref, half_space, base_n,
            base_alpha, top_n, out, format, checkpoint)
    }
}

#[derive(Debug, ClapSubcommand)]
enum Command {
    /// Speed of the excited walk: R(n)₁/n, R(2n)₁/(2n), P(R(2n)₁ ≤ R(n)₁)
    Speed(Flags),
    /// Holes of a short planar walk with respect to a long one
    Holes(Flags),
    /// Visit counts J to B(0,r) before leaving B(0,2n)
    Visits(Flags),
    /// Hit-before-exit of the origin from (r,0) within B(0,2r)
    Hitting(Flags),
    /// Probability that k walks from the ring of B(0,r) all avoid the origin
    AvoidOrigin(Flags),
    /// Block diagnostics of the excited walk over ]n, 2n]
    Blocks(Flags),
    /// Audit of the excited/simple walk coupling
    Coupling(Flags),
    /// The α recursion along n → k(n)
    Alpha(Flags),
    /// Reference values: κ, potential kernel, exact hit probabilities, block sizes
    Oracle(Flags),
}

#[derive(Debug, Parser)]
#[command(name = "erwlab", version, about = "Excited random walk laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A validated invocation. Flags a subcommand does not use are `None`;
/// used flags carry their resolved values, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub epsilon: Option<f64>,
    pub n: Option<u64>,
    pub m: Option<u64>,
    pub r: Option<f64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub lambda: Option<u32>,
    pub level: Option<f64>,
    pub k: Option<Vec<u32>>,
    pub multiplier: Option<f64>,
    pub drift_ref: Option<f64>,
    pub half_space: Option<i64>,
    pub base_n: Option<u64>,
    pub base_alpha: Option<f64>,
    pub top_n: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub checkpoint: Option<PathBuf>,
}

pub fn usage() -> String {
    use clap::CommandFactory;
    Cli::command().render_help().to_string()
}

fn default_workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w >= 1)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn required<T>(v: Option<T>, sub: Subcommand, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("{sub} requires --{key}")))
}

/// Parses argv (including the program name).
pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    if argv.len() <= 1 {
        return Err(CliError::Usage(usage()));
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => CliError::Usage(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let (sub, flags) = match cli.command {
        Command::Speed(f) => (Subcommand::Speed, f),
        Command::Holes(f) => (Subcommand::Holes, f),
        Command::Visits(f) => (Subcommand::Visits, f),
        Command::Hitting(f) => (Subcommand::Hitting, f),
        Command::AvoidOrigin(f) => (Subcommand::AvoidOrigin, f),
        Command::Blocks(f) => (Subcommand::Blocks, f),
        Command::Coupling(f) => (Subcommand::Coupling, f),
        Command::Alpha(f) => (Subcommand::Alpha, f),
        Command::Oracle(f) => (Subcommand::Oracle, f),
    };
    let flags = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
            let file: Flags = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            flags.over(file)
        }
        None => flags,
    };
    resolve(sub, flags)
}

fn resolve(sub: Subcommand, f: Flags) -> Result<RunConfig, CliError> {
    for key in f.present() {
        if !sub.accepts(key) {
            return Err(CliError::Usage(format!("--{key} is not accepted by {sub}")));
        }
    }
    let rep = sub.replicated();
    let mut c = RunConfig {
        subcommand: sub,
        epsilon: None,
        n: None,
        m: None,
        r: None,
        reps: rep.then(|| f.reps.unwrap_or(DEFAULT_REPS)),
        seed: rep.then(|| f.seed.unwrap_or(DEFAULT_SEED)),
        workers: None,
        lambda: None,
        level: rep.then(|| f.level.unwrap_or(DEFAULT_LEVEL)),
        k: None,
        multiplier: None,
        drift_ref: None,
        half_space: None,
        base_n: None,
        base_alpha: None,
        top_n: None,
        out: f.out,
        format: f.format.unwrap_or_default(),
        checkpoint: f.checkpoint,
    };
    if rep {
        c.workers = Some(match f.workers {
            Some(w) => w,
            None => default_workers()?,
        });
    }
    let max_eps = 1.0 / 6.0;
    match sub {
        Subcommand::Speed | Subcommand::Blocks => {
            c.epsilon = Some(f.epsilon.unwrap_or(max_eps));
            c.n = Some(required(f.n, sub, "n")?);
            if sub == Subcommand::Speed {
                c.half_space = f.half_space;
            } else {
                c.drift_ref = Some(f.drift_ref.unwrap_or(0.0));
            }
        }
        Subcommand::Coupling => {
            c.epsilon = Some(f.epsilon.unwrap_or(max_eps));
            c.n = Some(required(f.n, sub, "n")?);
        }
        Subcommand::Holes => {
            c.n = Some(required(f.n, sub, "n")?);
            c.m = Some(required(f.m, sub, "m")?);
        }
        Subcommand::Visits => {
            c.r = Some(f.r.unwrap_or(16.0));
            c.n = Some(f.n.unwrap_or(4096));
        }
        Subcommand::Hitting => c.r = Some(required(f.r, sub, "r")?),
        Subcommand::AvoidOrigin => {
            c.k = Some(f.k.unwrap_or_else(|| vec![4, 9, 16, 25]));
            c.multiplier = Some(f.multiplier.unwrap_or(1.0));
        }
        Subcommand::Alpha => {
            c.lambda = Some(required(f.lambda, sub, "lambda")?);
            c.base_n = Some(required(f.base_n, sub, "base-n")?);
            c.base_alpha = Some(required(f.base_alpha, sub, "base-alpha")?);
            c.top_n = Some(required(f.top_n, sub, "top-n")?);
        }
        Subcommand::Oracle => {
            c.r = f.r;
            c.n = f.n;
        }
    }
    validate(&c)?;
    Ok(c)
}

fn validate(c: &RunConfig) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Usage(msg));
    if let Some(e) = c.epsilon {
        let zero_ok = c.subcommand == Subcommand::Coupling;
        let ok = e <= 1.0 / 6.0 && (e > 0.0 || (zero_ok && e == 0.0));
        if !ok {
            return bad(if zero_ok { format!("{EPSILON_MESSAGE} (0 is also allowed for coupling)") } else { EPSILON_MESSAGE.into() });
        }
    }
    if c.reps == Some(0) {
        return bad("reps must be at least 1".into());
    }
    if c.workers == Some(0) {
        return bad("workers must be at least 1".into());
    }
    if let Some(l) = c.level {
        if !(l > 0.0 && l < 1.0) {
            return bad(format!("level must lie in (0, 1), got {l}"));
        }
    }
    if let Some(r) = c.r {
        if !(r > 0.0 && r.is_finite()) {
            return bad(format!("r must be a positive real, got {r}"));
        }
    }
    if let Some(m) = c.multiplier {
        if !(m > 0.0 && m.is_finite()) {
            return bad(format!("multiplier must be positive, got {m}"));
        }
    }
    if let Some(a) = c.base_alpha {
        if !(a > 0.0 && a.is_finite()) {
            return bad(format!("base-alpha must be positive, got {a}"));
        }
    }
    if matches!(c.subcommand, Subcommand::Speed | Subcommand::Coupling) && c.n == Some(0) {
        return bad("n must be at least 1".into());
    }
    if c.subcommand == Subcommand::Holes && c.n.is_some_and(|n| n < 3) {
        return bad("holes needs n ≥ 3".into());
    }
    if let Some(d) = c.drift_ref {
        if !d.is_finite() {
            return bad("drift-ref must be finite".into());
        }
    }
    Ok(())
}

impl RunConfig {
    /// An argv that parses back to this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = vec!["erwlab".to_string(), self.subcommand.name().to_string()];
        let mut push = |k: &str, v: String| {
            a.push(format!("--{k}"));
            a.push(v);
        };
        // {:?} prints the shortest string that reads back to the same f64
        if let Some(v) = self.epsilon {
            push("epsilon", format!("{v:?}"));
        }
        if let Some(v) = self.n {
            push("n", v.to_string());
        }
        if let Some(v) = self.m {
            push("m", v.to_string());
        }
        if let Some(v) = self.r {
            push("r", format!("{v:?}"));
        }
        if let Some(v) = self.reps {
            push("reps", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = self.workers {
            push("workers", v.to_string());
        }
        if let Some(v) = self.lambda {
            push("lambda", v.to_string());
        }
        if let Some(v) = self.level {
            push("level", format!("{v:?}"));
        }
        if let Some(v) = &self.k {
            push("k", v.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
        }
        if let Some(v) = self.multiplier {
            push("multiplier", format!("{v:?}"));
        }
        if let Some(v) = self.drift_ref {
            push("drift-ref", format!("{v:?}"));
        }
        if let Some(v) = self.half_space {
            push("half-space", v.to_string());
        }
        if let Some(v) = self.base_n {
            push("base-n", v.to_string());
        }
        if let Some(v) = self.base_alpha {
            push("base-alpha", format!("{v:?}"));
        }
        if let Some(v) = self.top_n {
            push("top-n", v.to_string());
        }
        if let Some(v) = &self.out {
            push("out", v.display().to_string());
        }
        push("format", match self.format { Format::Csv => "csv".into(), Format::Json => "json".into() });
        if let Some(v) = &self.checkpoint {
            push("checkpoint", v.display().to_string());
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, CliError> {
        parse_args(std::iter::once("erwlab").chain(s.split_whitespace()))
    }

    #[test]
    fn epsilon_above_bound_is_rejected() {
        match parse("speed --epsilon 0.2 --n 10") {
            Err(CliError::Usage(msg)) => assert!(msg.contains(EPSILON_MESSAGE)),
            other => panic!("{other:?}"),
        }
        assert!(parse("speed --epsilon 0 --n 10").is_err());
        assert!(parse("coupling --epsilon 0 --n 10").is_ok());
    }

    #[test]
    fn holes_example() {
        let c = parse("holes --n 1000000 --m 4096 --reps 1000 --seed 7").unwrap();
        assert_eq!((c.n, c.m, c.reps, c.seed), (Some(1_000_000), Some(4096), Some(1000), Some(7)));
        assert_eq!(c.level, Some(0.99));
        assert_eq!(c.format, Format::Csv);
    }

    #[test]
    fn empty_argv_is_a_usage_error() {
        assert!(matches!(parse_args(["erwlab"]), Err(CliError::Usage(_))));
        assert_eq!(parse_args(["erwlab"]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn schema_rejects_foreign_flags() {
        assert!(matches!(parse("speed --n 10 --m 4"), Err(CliError::Usage(_))));
        assert!(matches!(parse("alpha --lambda 1 --base-n 10 --base-alpha 0.5 --top-n 100 --reps 3"), Err(CliError::Usage(_))));
        assert!(matches!(parse("holes --n 10 --m 4 --bogus 1"), Err(CliError::Usage(_))));
        assert!(matches!(parse("teleport --n 10"), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults() {
        let c = parse("visits --workers 2").unwrap();
        assert_eq!((c.r, c.n, c.reps, c.seed, c.workers), (Some(16.0), Some(4096), Some(100), Some(0), Some(2)));
        let c = parse("avoid-origin --k 1,4 --workers 1").unwrap();
        assert_eq!(c.k, Some(vec![1, 4]));
        let c = parse("oracle").unwrap();
        assert_eq!((c.reps, c.workers, c.r), (None, None, None));
        assert!(matches!(parse("hitting"), Err(CliError::Usage(_))));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"n": 500, "m": 64, "reps": 3, "seed": 11}"#).unwrap();
        let c = parse(&format!("holes --config {} --seed 12 --workers 1", path.display())).unwrap();
        assert_eq!((c.n, c.m, c.reps, c.seed), (Some(500), Some(64), Some(3), Some(12)));
        std::fs::write(&path, r#"{"n": 500, "color": "blue"}"#).unwrap();
        assert!(matches!(parse(&format!("holes --config {}", path.display())), Err(CliError::Usage(_))));
        std::fs::write(&path, r#"{"n": 500, "m": 64, "epsilon": 0.1}"#).unwrap();
        assert!(matches!(parse(&format!("holes --config {}", path.display())), Err(CliError::Usage(_))));
        let missing = dir.path().join("nope.json");
        assert!(matches!(parse(&format!("holes --config {}", missing.display())), Err(CliError::Runtime(_))));
    }

    #[test]
    fn negative_values_parse() {
        let c = parse("speed --n 10 --half-space -5 --workers 1").unwrap();
        assert_eq!(c.half_space, Some(-5));
        let c = parse("blocks --n 1000 --drift-ref -1.5 --workers 1").unwrap();
        assert_eq!(c.drift_ref, Some(-1.5));
    }
}
