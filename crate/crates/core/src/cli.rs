//! Command-line surface: fit, produce, validate and bench.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_benchmark, BenchConfig};
use crate::config::{drop_column, AppBundle, ProjectConfig};
use crate::error::Error;
use crate::explainer::DEFAULT_K;
use crate::output::{
    contributions_json, contributions_table, examples_json, examples_table, importance_json, importance_table,
    render_json,
};
use crate::tabular::{read_table, Table};
use crate::transform::TransformPipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_STOPPED: i32 = 4;
pub const EXIT_EQUIVALENCE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "realpipe", version, about = "Interpretable explanations for tabular models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit transformers and model from a project config and save a bundle.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce an explanation from a saved bundle.
    Produce(ProduceArgs),
    /// Dry-run every transform route of a project config.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time the four explanation conditions on synthetic data.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured number of timed runs.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Contributions,
    Importance,
    Examples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
struct ProduceArgs {
    kind: Kind,
    #[arg(long)]
    app: PathBuf,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Written to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// Where a failure happened; decides how pipeline errors map to exit codes.
#[derive(Clone, Copy)]
enum Phase {
    Setup,
    Produce,
}

fn exit_code(err: &Error, phase: Phase) -> i32 {
    match err {
        Error::Config(_) | Error::Capability(_) | Error::Validation(_) => EXIT_CONFIG,
        Error::Schema(_) | Error::Parse { .. } | Error::Lookup(_) | Error::Data(_) | Error::Io(_) => EXIT_DATA,
        Error::Equivalence(_) => EXIT_EQUIVALENCE,
        Error::Contract(_) | Error::MissingColumn { .. } | Error::Transform { .. } => match phase {
            Phase::Setup => EXIT_CONFIG,
            Phase::Produce => EXIT_DATA,
        },
    }
}

fn fail(err: Error, phase: Phase) -> i32 {
    eprintln!("error: {err}");
    exit_code(&err, phase)
}

/// Runs the CLI with `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Fit { config, out } => cmd_fit(&config, &out),
        Command::Produce(args) => cmd_produce(&args),
        Command::Validate { config } => cmd_validate(&config),
        Command::Bench { config, out, repeats } => cmd_bench(&config, &out, repeats),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> i32 {
    let result = match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e, Phase::Produce),
    }
}

fn cmd_fit(config: &Path, out: &Path) -> i32 {
    let (project, base) = match ProjectConfig::load(config) {
        Ok(v) => v,
        Err(e) => return fail(e, Phase::Setup),
    };
    let app = match project.build_app(&base) {
        Ok(app) => app,
        Err(e) => return fail(e, Phase::Setup),
    };
    print!("{}", app.validation_report());
    let bundle = match AppBundle::from_app(&app, &project) {
        Ok(b) => b,
        Err(e) => return fail(e, Phase::Setup),
    };
    match bundle.save(out) {
        Ok(()) => {
            println!("wrote {}", out.display());
            EXIT_OK
        }
        Err(e) => fail(e, Phase::Setup),
    }
}

fn read_input(path: &Path, bundle: &AppBundle) -> crate::error::Result<Table> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let table = read_table(&bytes, bundle.id_column.as_deref())?;
    // Inputs may carry the target column; it is not a feature.
    if table.has_column(&bundle.target_column) {
        drop_column(&table, &bundle.target_column)
    } else {
        Ok(table)
    }
}

fn cmd_produce(args: &ProduceArgs) -> i32 {
    match (args.kind, &args.input) {
        (Kind::Importance, Some(_)) => {
            eprintln!("error: input not accepted for importance (it explains the training data)");
            return EXIT_CONFIG;
        }
        (Kind::Contributions | Kind::Examples, None) => {
            eprintln!("error: --input is required");
            return EXIT_CONFIG;
        }
        _ => {}
    }
    if args.k.is_some() && args.kind != Kind::Examples {
        eprintln!("error: --k only applies to examples");
        return EXIT_CONFIG;
    }
    if args.k == Some(0) {
        eprintln!("error: --k must be at least 1");
        return EXIT_CONFIG;
    }
    let bundle = match AppBundle::load(&args.app) {
        Ok(b) => b,
        Err(e) => return fail(e, Phase::Setup),
    };
    let input = match &args.input {
        Some(p) => match read_input(p, &bundle) {
            Ok(t) => Some(t),
            Err(e) => return fail(e, Phase::Produce),
        },
        None => None,
    };
    let app = match bundle.into_app() {
        Ok(app) => app,
        Err(e) => return fail(e, Phase::Setup),
    };
    let json = args.format == Format::Json;
    let (text, events, stopped) = match args.kind {
        Kind::Contributions => match app.produce_feature_contributions(input.as_ref().expect("checked")) {
            Ok(o) => {
                let text = if json { render_json(&contributions_json(&o)) } else { contributions_table(&o) };
                (text, o.audit, o.stopped)
            }
            Err(e) => return fail(e, Phase::Produce),
        },
        Kind::Importance => match app.produce_feature_importance() {
            Ok(o) => {
                let text = if json { render_json(&importance_json(&o)) } else { importance_table(&o) };
                (text, o.audit, o.stopped)
            }
            Err(e) => return fail(e, Phase::Produce),
        },
        Kind::Examples => {
            let k = args.k.unwrap_or(DEFAULT_K);
            match app.produce_similar_examples(input.as_ref().expect("checked"), k) {
                Ok(o) => {
                    let text = if json { render_json(&examples_json(&o)) } else { examples_table(&o) };
                    (text, o.audit, o.stopped)
                }
                Err(e) => return fail(e, Phase::Produce),
            }
        }
    };
    for e in &events {
        eprintln!("audit: {e}");
    }
    if stopped {
        eprintln!("error: explanation transforms stopped before reaching a displayable space");
        return EXIT_STOPPED;
    }
    write_out(args.output.as_deref(), &text)
}

fn cmd_validate(config: &Path) -> i32 {
    let (project, base) = match ProjectConfig::load(config) {
        Ok(v) => v,
        Err(e) => return fail(e, Phase::Setup),
    };
    let transformers = match project.build_transformers() {
        Ok(t) => t,
        Err(e) => return fail(e, Phase::Setup),
    };
    let (train, _) = match project.load_training(&base) {
        Ok(v) => v,
        Err(e) => return fail(e, Phase::Setup),
    };
    let report = TransformPipeline::new(transformers).fit_and_validate(&train);
    print!("{report}");
    if report.all_passed() {
        EXIT_OK
    } else {
        for f in report.failures() {
            eprintln!("route failed: {f}");
        }
        EXIT_STOPPED
    }
}

fn cmd_bench(config: &Path, out: &Path, repeats: Option<usize>) -> i32 {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return fail(Error::Config(format!("cannot read {}: {e}", config.display())), Phase::Setup),
    };
    let mut cfg = match BenchConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(e, Phase::Setup),
    };
    if let Some(r) = repeats {
        if r == 0 {
            eprintln!("error: --repeats must be at least 1");
            return EXIT_CONFIG;
        }
        cfg.repeats = r;
    }
    let report = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(e, Phase::Setup),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(out, text) {
        return fail(Error::Io(format!("{}: {e}", out.display())), Phase::Setup);
    }
    for p in &report.percent_changes {
        println!("{} {} rows {:?} -> {:?}: {:+.2}%", p.kind, p.rows, p.from, p.to, p.percent);
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::Config("x".into()), Phase::Produce), 2);
        assert_eq!(exit_code(&Error::Io("x".into()), Phase::Setup), 3);
        assert_eq!(exit_code(&Error::Equivalence("x".into()), Phase::Setup), 5);
        let missing = Error::MissingColumn { transformer: "t#0".into(), column: "c".into() };
        assert_eq!(exit_code(&missing, Phase::Setup), 2);
        assert_eq!(exit_code(&missing, Phase::Produce), 3);
    }

    #[test]
    fn bad_flags_exit_2() {
        assert_eq!(run(["realpipe", "produce", "sideways", "--app", "x"]), 2);
        assert_eq!(run(["realpipe", "fit"]), 2);
        assert_eq!(run(["realpipe", "--help"]), 0);
    }
}
