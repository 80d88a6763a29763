use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};

use pysbom::cyclonedx::{self, DiagFormat, Format};
use pysbom::parsers::{ParseOptions, ScanError, DEFAULT_REQUIREMENTS};
use pysbom::pipeline::{generate, PipelineError};
use pysbom::resolver::{parse_strategy_order, DiskCache, HttpIndex, ResolutionPolicy, Strategy, DEFAULT_INDEX_URL};
use pysbom::Severity;

const EXIT_FAIL_ON: u8 = 1;
const EXIT_FATAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "pysbom", version, about = "CycloneDX SBOMs for Python projects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a project directory and write its SBOM
    Scan(ScanArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FailOn {
    Info,
    Warning,
    Error,
}

impl FailOn {
    fn severity(self) -> Severity {
        match self {
            FailOn::Info => Severity::Info,
            FailOn::Warning => Severity::Warning,
            FailOn::Error => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiagnosticsFormat {
    Text,
    Json,
    None,
}

#[derive(Debug, clap::Args)]
struct ScanArgs {
    /// Project directory
    root: PathBuf,

    /// SBOM output path; diagnostics go to <OUTPUT>.diag.json
    #[arg(short, long, default_value = "sbom.cdx.json")]
    output: PathBuf,

    /// Output format; only json is supported
    #[arg(long, default_value = "json")]
    format: String,

    /// Comma-separated strategy order from lock, resolve, guess
    #[arg(long, default_value = "lock,resolve", value_parser = parse_strategy_order)]
    strategy: StrategyOrder,

    /// Never contact the index; use the cache only
    #[arg(long)]
    offline: bool,

    /// Resolve against the index as it was at this RFC 3339 time
    #[arg(long, value_parser = parse_as_of)]
    as_of: Option<DateTime<Utc>>,

    /// Include optional dependencies (extras and non-dev groups)
    #[arg(long)]
    include_optional: bool,

    /// Include development dependencies
    #[arg(long)]
    include_dev: bool,

    /// Requirements file name to read; repeatable
    #[arg(long = "requirements-name", value_name = "NAME", default_value = DEFAULT_REQUIREMENTS)]
    requirements_names: Vec<String>,

    /// Package index base URL
    #[arg(long, env = "PYSBOM_INDEX_URL", default_value = DEFAULT_INDEX_URL)]
    index_url: String,

    /// Index response cache directory
    #[arg(long, env = "PYSBOM_CACHE_DIR")]
    cache_dir: Option<PathBuf>,

    /// Target interpreter series for markers and requires-python
    #[arg(long, value_name = "X.Y")]
    python_version: Option<String>,

    /// Exit 1 when any diagnostic reaches this severity
    #[arg(long, value_enum)]
    fail_on: Option<FailOn>,

    /// Byte-reproducible output: sorted, no timestamp, content-derived serial
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    deterministic: bool,

    /// Diagnostics printed to stderr
    #[arg(long, value_enum, default_value = "text")]
    diagnostics: DiagnosticsFormat,
}

type StrategyOrder = Vec<Strategy>;

fn parse_as_of(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("{s:?} is not an RFC 3339 timestamp: {e}"))
}

fn detect_python_version() -> String {
    std::process::Command::new("python3")
        .args(["-c", "import sys; print('%d.%d' % sys.version_info[:2])"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "3.12".to_string())
}

fn default_cache_dir() -> Option<PathBuf> {
    dirs::cache_dir().map(|d| d.join("pysbom"))
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".diag.json");
    PathBuf::from(name)
}

fn run(args: ScanArgs) -> Result<u8, (u8, String)> {
    let format: Format = args.format.parse().map_err(|e: cyclonedx::EmitError| (EXIT_USAGE, e.to_string()))?;
    cyclonedx::check_format(format).map_err(|e| (EXIT_USAGE, e.to_string()))?;

    let python = args.python_version.clone().unwrap_or_else(detect_python_version);
    let mut policy = ResolutionPolicy::new(args.strategy.clone(), &python).map_err(|e| (EXIT_USAGE, e.to_string()))?;
    policy.as_of = args.as_of;
    policy.include_optional = args.include_optional;
    policy.include_dev = args.include_dev;
    policy.offline = args.offline;

    let cache = args.cache_dir.clone().or_else(default_cache_dir).map(DiskCache::new);
    let index = HttpIndex::new(&args.index_url, cache, args.offline);
    let parse = ParseOptions {
        requirements_names: args.requirements_names.clone(),
    };

    let generated = generate(&args.root, &parse, &policy, &index, args.deterministic).map_err(|e| match e {
        PipelineError::Scan(ScanError::NoMetadata { .. } | ScanError::AllFailed { .. } | ScanError::Unreadable { .. }) => {
            (EXIT_FATAL, e.to_string())
        }
        PipelineError::Emit(_) => (EXIT_FATAL, format!("internal error: {e}")),
    })?;

    let write = |path: &Path, bytes: &[u8]| {
        std::fs::write(path, bytes).map_err(|e| (EXIT_FATAL, format!("cannot write {}: {e}", path.display())))
    };
    write(&args.output, &generated.sbom)?;
    write(&sidecar_path(&args.output), &generated.diagnostics_json)?;

    match args.diagnostics {
        DiagnosticsFormat::Text => {
            eprint!("{}", String::from_utf8_lossy(&cyclonedx::emit_diagnostics(&generated.diagnostics, DiagFormat::Text)))
        }
        DiagnosticsFormat::Json => eprint!("{}", String::from_utf8_lossy(&generated.diagnostics_json)),
        DiagnosticsFormat::None => {}
    }
    log::info!(
        "{} components, {} edges written to {}",
        generated.resolved.components.len(),
        generated.resolved.edges.len(),
        args.output.display()
    );

    if let Some(threshold) = args.fail_on {
        let hit = generated.diagnostics.iter().filter(|d| d.severity >= threshold.severity()).count();
        if hit > 0 {
            eprintln!("{hit} diagnostics at or above {:?} level", threshold.severity().as_str());
            return Ok(EXIT_FAIL_ON);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Scan(args) => match run(args) {
            Ok(code) => ExitCode::from(code),
            Err((code, message)) => {
                eprintln!("pysbom: {message}");
                ExitCode::from(code)
            }
        },
    }
}
