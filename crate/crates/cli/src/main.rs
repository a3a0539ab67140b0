use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use menucsi_core::config::RunConfig;
use menucsi_core::exec::Exec;
use menucsi_core::identify::parse_checks;
use menucsi_core::pipeline::{Pipeline, PipelineError, RunOptions, ScoreSource};
use menucsi_core::prompt::Strategy;

/// Culture-specific item identification and translation experiments for
/// Chinese menus.
#[derive(Parser, Debug)]
#[command(name = "menucsi", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Run config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Serve every backend call from the shipped caches; a missing cache
    /// file is an error and no request leaves the process.
    #[arg(long, global = true)]
    offline: bool,
    /// Serve backend calls from cache; misses are errors.
    #[arg(long, global = true)]
    cache_only: bool,
    /// Use the corrected template spelling (changes the template version).
    #[arg(long, global = true)]
    fix_typos: bool,
    /// Record backend or check failures and carry on.
    #[arg(long, global = true)]
    keep_going: bool,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    /// Override `paths.output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Override `paths.cache_dir`.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// OCR blocks (JSON) → entries.jsonl + alignment_report.jsonl
    Ingest {
        ocr: PathBuf,
    },
    /// entries.jsonl → predictions.jsonl
    Identify {
        /// Comma-separated subset of rtt,cu,hs.
        #[arg(long)]
        checks: Option<String>,
    },
    /// entries + predictions + recipes → retrievals.jsonl
    Retrieve {
        #[arg(long)]
        recipes: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Rendered prompts → prompts.jsonl
    Prompt {
        /// Comma-separated strategies (e.g. baseline,recipe_equivalents).
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Chat completions for every (entry, strategy) → translations.jsonl
    Translate {
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Span P/R/F1 and score tables → report.txt + report.csv
    Evaluate {
        /// token | exact-span
        #[arg(long = "match")]
        match_mode: Option<String>,
        /// Take per-entry scores from the COMET scorer instead of paths.scores.
        #[arg(long)]
        score: Option<ScoreArg>,
    },
    /// Inter-annotator agreement → kappa.txt
    Kappa {
        /// Annotation file (defaults to paths.annotations).
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Items × categories count matrix instead of annotations.
        #[arg(long, conflicts_with = "annotations")]
        matrix: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScoreArg {
    Comet,
    File,
}

fn parse_strategies(list: &str) -> Result<Vec<Strategy>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Strategy>().map_err(anyhow::Error::from))
        .collect()
}

fn load_config(global: &Global) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig {
            base_dir: std::env::current_dir()?,
            ..RunConfig::default()
        },
    };
    config.mode.offline |= global.offline;
    config.mode.cache_only |= global.cache_only;
    config.mode.fix_typos |= global.fix_typos;
    if let Some(dir) = &global.output_dir {
        config.paths.output_dir = Some(dir.clone());
    }
    if let Some(dir) = &global.cache_dir {
        config.paths.cache_dir = Some(dir.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.global)?;
    let needs_config = !matches!(cli.command, Command::Kappa { .. });
    if needs_config && cli.global.config.is_none() {
        bail!(PipelineError::Config(menucsi_core::config::ConfigError::Invalid("--config is required".into())));
    }
    match &cli.command {
        Command::Identify { checks: Some(list) } => config.identify.checks = parse_checks(list)?,
        Command::Retrieve { recipes, top_k } => {
            if let Some(r) = recipes {
                config.paths.recipes = Some(r.clone());
            }
            if let Some(k) = top_k {
                config.translate.top_k = *k;
            }
        }
        Command::Prompt { strategies: Some(list) } | Command::Translate { strategies: Some(list) } => {
            config.translate.strategies = parse_strategies(list)?
        }
        Command::Evaluate { match_mode: Some(m), .. } => config.evaluate.match_mode = m.clone(),
        _ => {}
    }
    config.validate()?;
    let options = RunOptions {
        exec: if cli.global.sequential { Exec::Sequential } else { Exec::default() },
        keep_going: cli.global.keep_going,
    };
    let pipeline = Pipeline::new(config, options);

    match cli.command {
        Command::Ingest { ocr } => {
            let s = pipeline.ingest(&ocr)?;
            println!("ingest: {} entries, {} candidate pairs", s.entries, s.candidates);
        }
        Command::Identify { .. } => {
            let s = pipeline.identify()?;
            println!(
                "identify: {} entries, {} with CSI spans, {} with check failures",
                s.entries, s.csi_entries, s.failed_entries
            );
        }
        Command::Retrieve { .. } => {
            let n = pipeline.retrieve()?;
            println!("retrieve: {n} rows");
        }
        Command::Prompt { .. } => {
            let n = pipeline.prompt()?;
            println!("prompt: {n} prompts");
        }
        Command::Translate { .. } => {
            let s = pipeline.translate()?;
            println!(
                "translate: {} records ({} new, {} parse warnings, {} errors)",
                s.total, s.new, s.warnings, s.errors
            );
        }
        Command::Evaluate { score, .. } => {
            let source = match score {
                Some(ScoreArg::Comet) => ScoreSource::Comet,
                _ => ScoreSource::File,
            };
            let s = pipeline.evaluate(source)?;
            print!("{}", s.text);
        }
        Command::Kappa { annotations, matrix } => {
            let text = pipeline.kappa(annotations.as_deref(), matrix.as_deref())?;
            print!("{text}");
        }
    }
    let calls = pipeline.network_calls();
    log::info!("network calls: {calls}");
    if pipeline.config.mode.offline && calls != 0 {
        bail!("offline run made {calls} network calls");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.chain().find_map(|e| e.downcast_ref::<PipelineError>()).map(PipelineError::exit_code).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
