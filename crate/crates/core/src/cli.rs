//! Command-line entry point: every pipeline stage as a subcommand.
//!
//! Exit codes: 0 success, 1 data-level failure (invalid data,
//! non-convergent standardization), 2 usage error (bad flags, unreadable
//! files, bad configuration).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::evaluate::{evaluate_run, GroundTruthPath};
use crate::fusion::{run_filter, trajectory_from_ndjson, trajectory_to_ndjson, FusionConfig};
use crate::ingest::{replay, IngestConfig, Pipeline};
use crate::schema::{parse_ndjson, RawPayload, StandardizedDataset};
use crate::standardizer::{make_backend, standardize, BackendConfig};
use crate::trgm::{apply_script, derive_script, TransformationScript};
use crate::validation::{validate_dataset, SchemaSet};

/// Top-level configuration file: one JSON document with a block per
/// subsystem. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<BackendConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_level: Option<String>,
}

impl GlobalConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Parser)]
#[command(
    name = "seamfuse",
    version,
    about = "Standardize, transform, and fuse positioning-sensor streams"
)]
struct Cli {
    /// Log filter (overridable via SEAMFUSE_LOG).
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardize one raw payload file through the configured backend.
    Standardize {
        /// Raw payload document (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Global config holding the standardizer block.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the standardized records (NDJSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a standardized record file against the canonical schemas.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Alternative schema set (JSON); defaults to the built-in one.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Derive transformation rules from a (raw, standardized) example pair.
    GenRules {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a transformation script to a raw payload.
    Transform {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse a standardized record stream into a trajectory.
    Fuse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trajectory against a ground-truth path.
    Evaluate {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        label: String,
        /// Measure in the north-east plane only.
        #[arg(long)]
        planar: bool,
        /// Where to write the error series CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Where to write the report document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the ingestion service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a recorded raw-payload log through the pipeline.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Speed multiplier, or "inf" for as-fast-as-possible.
        #[arg(long, default_value = "inf")]
        speed: String,
        #[arg(long)]
        config: PathBuf,
        /// Where to write the fused trajectory (NDJSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Bad invocation or unreadable configuration: exit 2.
    Usage(String),
    /// The data itself failed: exit 1.
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<GlobalConfig, Failure> {
    GlobalConfig::from_json(&read_file(path)?)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
}

/// Process-wide entry point used by `main`.
pub fn run() -> i32 {
    let mut stdout = std::io::stdout();
    run_with(std::env::args_os(), &mut stdout)
}

/// Testable entry point: parses `args`, writes primary output to `out`,
/// and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.log_level.as_deref());
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}

fn init_logging(level: Option<&str>) {
    let filter = level
        .map(String::from)
        .or_else(|| std::env::var("SEAMFUSE_LOG").ok())
        .unwrap_or_else(|| "warn".to_string());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(filter))
        .with_writer(std::io::stderr)
        .try_init();
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Standardize {
            input,
            config,
            out: out_path,
        } => {
            let body: serde_json::Value = serde_json::from_str(&read_file(&input)?)
                .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let config = load_config(&config)?;
            let backend_config = config
                .standardizer
                .ok_or_else(|| Failure::Usage("config lacks a 'standardizer' block".into()))?;
            let backend =
                make_backend(&backend_config).map_err(|e| Failure::Usage(e.to_string()))?;
            let raw = RawPayload::new("cli", 1, body).expect("positive received_at");
            let outcome = standardize(
                backend.as_ref(),
                backend_config.max_iterations,
                &raw,
                SchemaSet::builtin(),
            )
            .map_err(|e| Failure::Data(e.to_string()))?;

            let summary = json!({
                "converged": outcome.converged,
                "iterations_used": outcome.iterations_used,
                "record_count": outcome.dataset.len(),
                "errors": outcome.final_report.errors,
            });
            emit(out, &format!("{summary}\n"))?;
            if let Some(path) = out_path {
                write_file(&path, &outcome.dataset.to_ndjson())?;
            }
            Ok(if outcome.converged { 0 } else { 1 })
        }

        Command::Validate { input, schema } => {
            let values: Vec<serde_json::Value> = parse_ndjson(&read_file(&input)?)
                .map_err(|e| Failure::Data(e.to_string()))?
                .into_iter()
                .map(|(_, v)| v)
                .collect();
            let custom;
            let schemas = match schema {
                Some(path) => {
                    custom = SchemaSet::from_json(&read_file(&path)?)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    &custom
                }
                None => SchemaSet::builtin(),
            };
            let report = validate_dataset(&values, schemas);
            emit(
                out,
                &format!(
                    "{}\n",
                    serde_json::to_string(&report).expect("report serializes")
                ),
            )?;
            Ok(if report.valid { 0 } else { 1 })
        }

        Command::GenRules {
            input,
            target,
            out: out_path,
        } => {
            let body: serde_json::Value = serde_json::from_str(&read_file(&input)?)
                .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let expected = StandardizedDataset::from_ndjson(&read_file(&target)?)
                .map_err(|e| Failure::Data(e.to_string()))?;
            let derived =
                derive_script(&body, &expected).map_err(|e| Failure::Data(e.to_string()))?;
            write_file(&out_path, &derived.script.to_json_pretty())?;
            let summary = json!({
                "rules": derived.script.rules.len(),
                "post_ops": derived.script.post_ops.len(),
                "warnings": derived.warnings,
                "unmatched": derived.unmatched,
            });
            emit(out, &format!("{summary}\n"))?;
            Ok(if derived.unmatched.is_empty() { 0 } else { 1 })
        }

        Command::Transform {
            script,
            input,
            out: out_path,
        } => {
            let script = TransformationScript::from_json(&read_file(&script)?)
                .map_err(|e| Failure::Data(format!("{}: {e}", script.display())))?;
            let body: serde_json::Value = serde_json::from_str(&read_file(&input)?)
                .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let outcome =
                apply_script(&script, &body).map_err(|e| Failure::Data(e.to_string()))?;
            for rule in &outcome.missing {
                eprintln!("warning: no source for {}", rule.input_path);
            }
            let mut ndjson = String::new();
            for record in &outcome.records {
                ndjson.push_str(&record.to_string());
                ndjson.push('\n');
            }
            match out_path {
                Some(path) => write_file(&path, &ndjson)?,
                None => emit(out, &ndjson)?,
            }
            let report = validate_dataset(&outcome.records, SchemaSet::builtin());
            Ok(if report.valid && outcome.missing.is_empty() {
                0
            } else {
                1
            })
        }

        Command::Fuse {
            input,
            config,
            out: out_path,
        } => {
            let dataset = StandardizedDataset::from_ndjson(&read_file(&input)?)
                .map_err(|e| Failure::Data(e.to_string()))?;
            let config = load_config(&config)?;
            let fusion = config
                .fusion
                .ok_or_else(|| Failure::Usage("config lacks a 'fusion' block".into()))?;
            let trajectory =
                run_filter(&dataset, &fusion).map_err(|e| Failure::Data(e.to_string()))?;
            let ndjson = trajectory_to_ndjson(&trajectory);
            match out_path {
                Some(path) => write_file(&path, &ndjson)?,
                None => emit(out, &ndjson)?,
            }
            Ok(0)
        }

        Command::Evaluate {
            trajectory,
            truth,
            label,
            planar,
            csv,
            out: out_path,
        } => {
            let points = trajectory_from_ndjson(&read_file(&trajectory)?)
                .map_err(|e| Failure::Data(e.to_string()))?;
            let path = GroundTruthPath::from_json(&read_file(&truth)?)
                .map_err(|e| Failure::Data(e.to_string()))?;
            let run =
                evaluate_run(&points, &path, &label, planar).map_err(|e| Failure::Data(e.to_string()))?;
            let csv_path = match &csv {
                Some(path) => {
                    write_file(path, &run.series_csv())?;
                    Some(path.display().to_string())
                }
                None => None,
            };
            let report = json!({
                "label": run.label,
                "summary": run.summary,
                "series_csv_path": csv_path,
            });
            let text = format!(
                "{}\n",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            match out_path {
                Some(path) => write_file(&path, &text)?,
                None => emit(out, &text)?,
            }
            Ok(0)
        }

        Command::Serve { config } => {
            let config = load_config(&config)?;
            let ingest = config
                .ingest
                .ok_or_else(|| Failure::Usage("config lacks an 'ingest' block".into()))?;
            let fusion = config
                .fusion
                .ok_or_else(|| Failure::Usage("config lacks a 'fusion' block".into()))?;
            let bind = ingest.bind.clone();
            let pipeline =
                Arc::new(Pipeline::new(ingest, fusion).map_err(|e| Failure::Usage(e.to_string()))?);
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Failure::Usage(e.to_string()))?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind)
                    .await
                    .map_err(|e| Failure::Usage(format!("cannot bind {bind}: {e}")))?;
                eprintln!("listening on {}", listener.local_addr().expect("bound"));
                crate::ingest::serve(listener, pipeline)
                    .await
                    .map_err(|e| Failure::Usage(e.to_string()))
            })?;
            Ok(0)
        }

        Command::Replay {
            log,
            speed,
            config,
            out: out_path,
        } => {
            let speed = match speed.as_str() {
                "inf" | "INF" | "infinity" => None,
                other => Some(other.parse::<f64>().map_err(|_| {
                    Failure::Usage(format!(
                        "--speed must be a positive number or 'inf', got '{other}'"
                    ))
                })?),
            };
            if let Some(s) = speed {
                if !(s > 0.0) {
                    return Err(Failure::Usage("--speed must be positive".into()));
                }
            }
            let config = load_config(&config)?;
            let ingest = config
                .ingest
                .ok_or_else(|| Failure::Usage("config lacks an 'ingest' block".into()))?;
            let fusion = config
                .fusion
                .ok_or_else(|| Failure::Usage("config lacks a 'fusion' block".into()))?;
            let pipeline =
                Pipeline::new(ingest, fusion).map_err(|e| Failure::Usage(e.to_string()))?;
            let summary = replay(&pipeline, &read_file(&log)?, speed);
            for line in &summary.malformed_lines {
                eprintln!("warning: malformed log line {line}");
            }
            emit(
                out,
                &format!(
                    "{}\n",
                    serde_json::to_string(&summary).expect("summary serializes")
                ),
            )?;
            if let Some(path) = out_path {
                write_file(&path, &trajectory_to_ndjson(&pipeline.trajectory_snapshot()))?;
            }
            let clean = summary.rejected == 0
                && summary.non_convergent == 0
                && summary.malformed_lines.is_empty();
            Ok(if clean { 0 } else { 1 })
        }
    }
}
