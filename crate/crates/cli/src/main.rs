use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use sonotab::api::ServeError;
use sonotab::config::Config;
use sonotab::extract::{read_schema, run_extract, ExtractCommandError, ExtractOptions, DEFAULT_COHORT};
use sonotab_core::extraction::{HttpChatBackend, HttpChatConfig};
use sonotab_core::synth::generate_corpus;
use sonotab_core::{default_schema, review_surface, ExtractorBackend, HedgeLexicon, RuleBasedBackend};

/// Structured extraction of endometriosis ultrasound reports.
#[derive(Parser)]
#[command(name = "sonotab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendFlag {
    Rule,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, store and export a set of reports without the service.
    Extract {
        /// Report files or directories (PDF or plain text).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Schema file; the built-in endometriosis schema when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rule")]
        backend: BackendFlag,
        #[arg(long, required_if_eq("backend", "llm"))]
        base_url: Option<String>,
        #[arg(long, required_if_eq("backend", "llm"))]
        model: Option<String>,
        #[arg(long, default_value_t = 120)]
        timeout_s: u64,
        #[arg(long)]
        hedge_lexicon: Option<PathBuf>,
        /// Data directory for records, documents and exports.
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value = DEFAULT_COHORT)]
        cohort: String,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Inspect schemas.
    Schema {
        #[command(subcommand)]
        command: SchemaCommand,
    },
    /// Write a synthetic report corpus with its ground truth.
    Corpus {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, short)]
        output: PathBuf,
        /// Write PDFs instead of plain text.
        #[arg(long)]
        pdf: bool,
        #[arg(long, default_value_t = 24)]
        lines_per_page: usize,
    },
}

#[derive(Subcommand)]
enum SchemaCommand {
    /// Print the built-in schema as JSON.
    Dump,
    /// Validate a schema file and summarise it.
    Check { path: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Extract {
            inputs,
            schema,
            backend,
            base_url,
            model,
            timeout_s,
            hedge_lexicon,
            output,
            cohort,
        } => {
            let backend: Arc<dyn ExtractorBackend> = match backend {
                BackendFlag::Rule => Arc::new(RuleBasedBackend),
                BackendFlag::Llm => {
                    let mut http = HttpChatConfig::new(base_url.unwrap_or_default(), model.unwrap_or_default());
                    http.timeout = Duration::from_secs(timeout_s);
                    Arc::new(HttpChatBackend::new(http).map_err(|e| anyhow::anyhow!("backend: {e}"))?)
                }
            };
            let hedges = match &hedge_lexicon {
                Some(p) => HedgeLexicon::load(p).with_context(|| format!("cannot read hedge lexicon {}", p.display()))?,
                None => HedgeLexicon::default(),
            };
            let opts = ExtractOptions {
                inputs,
                schema,
                backend,
                hedges,
                output,
                cohort,
            };
            let stdout = std::io::stdout();
            match run_extract(&opts, &mut stdout.lock()) {
                Ok(summary) => {
                    log::info!(
                        "{} processed, {} failed; exports: {}",
                        summary.processed,
                        summary.failed,
                        summary.exports.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
                    );
                    Ok(if summary.failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
                }
                Err(e @ (ExtractCommandError::Schema { .. } | ExtractCommandError::Input { .. })) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Serve { config } => {
            let config = Config::load(&config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            match runtime.block_on(sonotab::serve(&config)) {
                Ok(()) => Ok(ExitCode::SUCCESS),
                Err(e @ ServeError::AddressInUse(_)) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(3))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Schema { command } => match command {
            SchemaCommand::Dump => {
                println!("{}", default_schema().to_json_pretty());
                Ok(ExitCode::SUCCESS)
            }
            SchemaCommand::Check { path } => match read_schema(Some(&path)) {
                Ok(schema) => {
                    let surface: Vec<&str> = review_surface(&schema).iter().map(|f| f.field_id.as_str()).collect();
                    println!(
                        "{} {}: {} fields; review surface: {}",
                        schema.schema_id,
                        schema.version,
                        schema.fields.len(),
                        surface.join(", ")
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(2))
                }
            },
        },
        Command::Corpus {
            seed,
            count,
            output,
            pdf,
            lines_per_page,
        } => {
            std::fs::create_dir_all(&output).with_context(|| format!("cannot create {}", output.display()))?;
            let mut truth = BTreeMap::new();
            for report in generate_corpus(seed, count) {
                let (name, bytes) = if pdf {
                    (report.filename.replace(".txt", ".pdf"), report.to_pdf(lines_per_page))
                } else {
                    (report.filename.clone(), report.text.clone().into_bytes())
                };
                std::fs::write(output.join(&name), bytes)?;
                truth.insert(name, report.truth);
            }
            let mut sidecar = std::fs::File::create(output.join("ground_truth.json"))?;
            serde_json::to_writer_pretty(&mut sidecar, &truth)?;
            writeln!(sidecar)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
