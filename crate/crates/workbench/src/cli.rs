use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use gmwf_core::engine::configure_peer;
use gmwf_core::enumeration::{ensure_axiom_visibility, generate_target_artifacts};
use gmwf_core::expansion::{expand, ExpansionError, GuidePolicy};
use gmwf_core::format::{canonical_json, parse_artifact, FormatError, SpecDocument};
use gmwf_core::{Gmawfp, ValidationOptions, ValidationReport};
use serde_json::{json, Value};

use crate::service::{self, AppState};
use crate::sim::{simulate, Script};

#[derive(Debug, Parser)]
#[command(name = "gmwf", version, about = "Grammatical workflow workbench")]
pub struct Cli {
    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a process specification.
    Validate {
        spec: PathBuf,
        /// Also require every actor to see the axiom.
        #[arg(long)]
        strict: bool,
    },
    /// List every complete scenario of a process.
    Enumerate {
        spec: PathBuf,
        /// Skip the fresh-axiom extension.
        #[arg(long)]
        raw: bool,
    },
    /// Local grammar of one actor.
    ProjectGrammar {
        spec: PathBuf,
        #[arg(long)]
        actor: String,
    },
    /// Partial replica of an artifact for one actor.
    ProjectArtifact {
        spec: PathBuf,
        artifact: PathBuf,
        #[arg(long)]
        actor: String,
    },
    /// Merge an updated replica back into a global artifact.
    Expand {
        spec: PathBuf,
        global: PathBuf,
        replica: PathBuf,
        #[arg(long)]
        actor: String,
        /// first | seed=<n> | index=<k> | external
        #[arg(long, default_value = "first")]
        guide_policy: GuidePolicy,
    },
    /// Replay a script over in-memory peers.
    Simulate {
        spec: PathBuf,
        script: PathBuf,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        spec: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for per-case action logs.
        #[arg(long, env = "GMWF_STATE_DIR")]
        state: Option<PathBuf>,
    },
}

/// Failure classes; each maps to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{message}")]
    Domain {
        message: String,
        detail: Option<Value>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain { .. } => 1,
            CliError::Input(_) => 2,
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError::Domain {
            message: message.into(),
            detail: None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Input(m) => json!({"error": "input", "message": m}),
            CliError::Domain { message, detail } => {
                let mut v = json!({"error": "domain", "message": message});
                if let Some(d) = detail {
                    v["detail"] = d.clone();
                }
                v
            }
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn invalid(report: &ValidationReport) -> CliError {
    CliError::Domain {
        message: format!("invalid specification\n{report}"),
        detail: Some(serde_json::to_value(report).expect("serializable")),
    }
}

fn load_spec(path: &Path) -> Result<Gmawfp, CliError> {
    let doc = SpecDocument::parse(&read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    match doc.into_spec() {
        Ok(spec) => Ok(spec),
        Err(FormatError::Invalid(report)) => Err(invalid(&report)),
        Err(e) => Err(CliError::Input(e.to_string())),
    }
}

fn load_artifact(path: &Path) -> Result<gmwf_core::Artifact, CliError> {
    parse_artifact(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn domain<E: std::fmt::Display>(e: E) -> CliError {
    CliError::domain(e.to_string())
}

/// Executes a parsed command and returns what goes to stdout.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Validate { spec, strict } => {
            let doc = SpecDocument::parse(&read(spec)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", spec.display())))?;
            let opts = ValidationOptions {
                axiom_visibility: *strict,
                ..Default::default()
            };
            let report = doc.validate(&opts);
            if report.has_errors() {
                return Err(invalid(&report));
            }
            Ok(canonical_json(&report))
        }
        Command::Enumerate { spec, raw } => {
            let spec = load_spec(spec)?;
            let g = if *raw {
                spec.gmwf
            } else {
                ensure_axiom_visibility(&spec).gmwf
            };
            let set = generate_target_artifacts(&g).map_err(domain)?;
            Ok(canonical_json(&set.artifacts))
        }
        Command::ProjectGrammar { spec, actor } => {
            let spec = load_spec(spec)?;
            let config = configure_peer(&spec, actor).map_err(domain)?;
            let local = &config.local;
            Ok(canonical_json(&json!({
                "actor": actor,
                "axioms": local.gmwf.axioms,
                "sorts": local.gmwf.sort_names().collect::<Vec<_>>(),
                "productions": local.gmwf.productions.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "structuring": local.structuring,
                "targets": local.local_targets.len(),
            })))
        }
        Command::ProjectArtifact {
            spec,
            artifact,
            actor,
        } => {
            let spec = load_spec(spec)?;
            let config = configure_peer(&spec, actor).map_err(domain)?;
            let t = load_artifact(artifact)?;
            if !gmwf_core::conforms(&t, &config.spec.gmwf) {
                return Err(CliError::domain("artifact does not conform to the grammar"));
            }
            let r = config.local.project(&t).map_err(domain)?;
            Ok(canonical_json(&r))
        }
        Command::Expand {
            spec,
            global,
            replica,
            actor,
            guide_policy,
        } => {
            let spec = load_spec(spec)?;
            let config = configure_peer(&spec, actor).map_err(domain)?;
            let t = load_artifact(global)?;
            let t_maj = load_artifact(replica)?;
            match expand(&t, &t_maj, &config.targets, &config.local, *guide_policy) {
                Ok(ex) => Ok(canonical_json(&json!({
                    "result": ex.result,
                    "guides": ex.guides,
                    "chosen": ex.chosen,
                }))),
                Err(ExpansionError::GuideChoiceRequired { options }) => {
                    let listed: Vec<Value> = options
                        .iter()
                        .map(|o| json!({"index": o.index, "result": o.result}))
                        .collect();
                    Err(CliError::Domain {
                        message: format!(
                            "{} guides lead to different results; pass --guide-policy index=<k>",
                            options.len()
                        ),
                        detail: Some(Value::Array(listed)),
                    })
                }
                Err(e) => Err(domain(e)),
            }
        }
        Command::Simulate {
            spec,
            script,
            trace,
        } => {
            let spec = load_spec(spec)?;
            let script: Script = serde_json::from_str(&read(script)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", script.display())))?;
            let out = simulate(&spec, &script).map_err(domain)?;
            let text = out.to_canonical();
            match trace {
                Some(path) => {
                    fs::write(path, format!("{text}\n"))
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    Ok(canonical_json(&out.cases))
                }
                None => Ok(text),
            }
        }
        Command::Serve { spec, port, state } => {
            let spec = load_spec(spec)?;
            let app = AppState::new(&spec, state.clone()).map_err(domain)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(e.to_string()))?;
            eprintln!("listening on 127.0.0.1:{port}");
            rt.block_on(service::serve(app, *port))
                .map_err(|e| CliError::Input(e.to_string()))?;
            Ok(String::new())
        }
    }
}

/// Parses arguments, runs, prints, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            if !out.is_empty() {
                let mut stdout = std::io::stdout().lock();
                let _ = writeln!(stdout, "{out}");
            }
            0
        }
        Err(e) => {
            if cli.json {
                eprintln!("{}", canonical_json(&e.to_json()));
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
