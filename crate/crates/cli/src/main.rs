//! `isee`: run the case-based reasoning cycle from the shell.

mod render;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isee_core::case::{from_json_str, to_json, Case};
use isee_core::retention::FeedbackResponse;
use isee_core::strategy::{BehaviorTree, QuestionSubtree};
use isee_core::taxonomy::ConceptId;
use isee_core::{Engine, Error};
use isee_service::api::{ErrorBody, FeedbackResult, RetainResult};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "isee", version, about = "Recommend, adapt, revise and retain explanation strategies")]
struct Cli {
    /// Directory holding taxonomy/, library/ and casebase/.
    #[arg(long, global = true, env = "ISEE_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Output {
    /// Print the JSON the HTTP service would return.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "ISEE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Bearer token clients must present.
        #[arg(long, env = "ISEE_TOKEN")]
        token: String,
        /// Browser origin allowed by CORS, or `*`.
        #[arg(long, env = "ISEE_CORS_ORIGIN")]
        cors_origin: Option<String>,
    },
    /// Retrieve the k most similar cases for a query document.
    Query {
        #[arg(short, long)]
        query: PathBuf,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Retrieve, then repair the nearest strategy for one intent.
    Adapt {
        #[arg(short, long)]
        query: PathBuf,
        #[arg(short, default_value_t = 3)]
        k: usize,
        /// Intent to adapt; defaults to the query's first intent.
        #[arg(long)]
        intent: Option<String>,
        /// Use these neighbours, nearest first, instead of retrieving.
        #[arg(long, value_delimiter = ',')]
        case_ids: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Rank substitutes for an explainer or a question subtree.
    #[command(subcommand)]
    Substitute(Substitute),
    /// Validate or simulate a behaviour tree.
    #[command(subcommand)]
    Bt(Bt),
    /// Aggregate questionnaire responses.
    #[command(subcommand)]
    Feedback(Feedback),
    /// Anonymise and store a complete case.
    Retain {
        case: PathBuf,
        /// Confirm the design user agreed to retention.
        #[arg(long, overrides_with = "no_consent")]
        consent: bool,
        #[arg(long)]
        no_consent: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Inspect the case base.
    #[command(subcommand)]
    Casebase(Casebase),
}

#[derive(Subcommand)]
enum Substitute {
    Explainer {
        #[arg(long)]
        target: String,
        #[arg(short, long)]
        query: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    Subtree {
        /// Question subtree document.
        subtree: PathBuf,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum Bt {
    Validate {
        tree: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    Simulate {
        tree: PathBuf,
        /// Comma-separated tokens, e.g. `why,variant,what`.
        #[arg(long, value_delimiter = ',')]
        script: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum Feedback {
    Aggregate {
        /// JSON list of responses.
        responses: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum Casebase {
    Stats {
        #[command(flatten)]
        out: Output,
    },
    Coverage {
        #[arg(long, default_value_t = isee_service::DEFAULT_COVERAGE_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        out: Output,
    },
}

fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidRequest(format!("cannot read {}: {e}", path.display())))?;
    Ok(from_json_str(&text)?)
}

fn emit<T: Serialize>(out: Output, value: &T, human: impl FnOnce(&T) -> String) {
    if out.json {
        println!("{}", to_json(value));
    } else {
        print!("{}", human(value));
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if let Command::Serve {
        listen,
        token,
        cors_origin,
    } = cli.command
    {
        let config = isee_service::Config {
            listen,
            token,
            data_dir: cli.data_dir,
            cors_origin,
        };
        let rt = tokio::runtime::Runtime::new().map_err(|e| Error::InvalidRequest(e.to_string()))?;
        rt.block_on(isee_service::serve(config)).map_err(|e| match e {
            isee_service::ServeError::Load(e) => e,
            other => Error::InvalidRequest(other.to_string()),
        })?;
        return Ok(ExitCode::SUCCESS);
    }

    let engine = Engine::open(&cli.data_dir)?;
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::Query { query, k, out } => {
            let q: Case = read_doc(&query)?;
            let res = engine.query(&q.description, k)?;
            emit(out, &res, render::retrieval);
        }
        Command::Adapt {
            query,
            k,
            intent,
            case_ids,
            out,
        } => {
            let q: Case = read_doc(&query)?;
            let intent = match intent {
                Some(i) => ConceptId::from(i),
                None => q
                    .description
                    .intents()
                    .next()
                    .map(|i| i.label.clone())
                    .ok_or_else(|| Error::InvalidRequest("the query names no intent".into()))?,
            };
            let ids = if case_ids.is_empty() {
                engine.query(&q.description, k)?.ids().into_iter().map(str::to_owned).collect()
            } else {
                case_ids
            };
            let plan = engine.adapt(&q, &ids, &intent)?;
            emit(out, &plan, render::plan);
        }
        Command::Substitute(Substitute::Explainer { target, query, out }) => {
            let q: Case = read_doc(&query)?;
            let r = engine.substitute_explainer(&target, &q.description)?;
            emit(out, &r, render::explainer_ranking);
        }
        Command::Substitute(Substitute::Subtree { subtree, k, out }) => {
            let s: QuestionSubtree = read_doc(&subtree)?;
            let r = engine.substitute_subtree(&s, k)?;
            emit(out, &r, render::subtree_ranking);
        }
        Command::Bt(Bt::Validate { tree, out }) => {
            let t: BehaviorTree = read_doc(&tree)?;
            let report = engine.validate_tree(&t);
            emit(out, &report, render::validation);
            if !report.is_valid() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bt(Bt::Simulate { tree, script, out }) => {
            let t: BehaviorTree = read_doc(&tree)?;
            let trace = engine.simulate(&t, &script)?;
            emit(out, &trace, render::trace);
        }
        Command::Feedback(Feedback::Aggregate { responses, out }) => {
            let rs: Vec<FeedbackResponse> = read_doc(&responses)?;
            let result = FeedbackResult {
                case_id: None,
                outcome: engine.feedback(&rs)?,
            };
            emit(out, &result, |r| render::outcome(&r.outcome));
        }
        Command::Retain {
            case,
            consent,
            no_consent,
            out,
        } => {
            let c: Case = read_doc(&case)?;
            let id = engine.retain(&c, consent && !no_consent)?;
            let result = RetainResult {
                revision: engine.snapshot().revision(),
                id,
            };
            emit(out, &result, |r| format!("retained as {} (revision {})\n", r.id, r.revision));
        }
        Command::Casebase(Casebase::Stats { out }) => {
            emit(out, &engine.stats(), render::stats);
        }
        Command::Casebase(Casebase::Coverage { threshold, out }) => {
            let report = engine.coverage(threshold)?;
            emit(out, &report, render::coverage);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let body = ErrorBody::from(&e);
            eprintln!("error[{}]: {}", body.error.code, body.error.message);
            for f in &body.error.fields {
                eprintln!("  {}: {}", f.field, f.message);
            }
            ExitCode::FAILURE
        }
    }
}
