use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nlground::eval::{evaluate, load_dataset, load_learner_script, Variant};
use nlground::matcher::EmbeddingTable;
use nlground::spec::TemplateToken;
use nlground::{bundled, ground, AscStore, Environment, GroundingOptions, MatcherKind, World};
use nlground_service::{router, AppState};

#[derive(Parser)]
#[command(name = "nlground", version, about = "Ground natural-language commands to application APIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of spec files; the bundled applications are served when omitted.
        #[arg(long)]
        specs: Option<PathBuf>,
    },
    /// Ground one command and print the result as JSON.
    Ground {
        /// Spec file, or the name of a bundled application.
        #[arg(long)]
        spec: String,
        /// World state (JSON); an empty world when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        command: String,
        #[arg(long, default_value = "vsm")]
        matcher: MatcherKind,
        #[arg(long)]
        no_rephrase: bool,
        #[arg(long)]
        no_utilities: bool,
        /// Word-vector file for the embedding matcher.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Run the grounded action and print the resulting world too.
        #[arg(long)]
        execute: bool,
    },
    /// Score a labeled dataset.
    Eval {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        dataset: PathBuf,
        /// e.g. vsm, vsm-R, vsm-U, jaccard, emb
        #[arg(long, default_value = "vsm")]
        variant: Variant,
        /// Scripted learner sessions replayed before scoring.
        #[arg(long)]
        learner_script: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Where to write the JSON report; the table always goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print every template with utility-constrained slots starred.
    Mark {
        #[arg(long)]
        spec: String,
    },
}

fn open_store(spec: &str, embeddings: Option<&Path>) -> Result<AscStore> {
    let store = if Path::new(spec).exists() {
        AscStore::open(Path::new(spec)).with_context(|| format!("loading {spec}"))?
    } else if let Some(store) = bundled::store(spec) {
        store
    } else {
        bail!("{spec:?} is neither a spec file nor a bundled application ({})", bundled::NAMES.join(", "));
    };
    Ok(match embeddings {
        Some(path) => {
            let table = EmbeddingTable::load(path).with_context(|| format!("loading {}", path.display()))?;
            store.with_embeddings(Arc::new(table))
        }
        None => store,
    })
}

fn read_world(path: Option<&Path>, app: &str) -> Result<World> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => World::for_app(app).with_context(|| format!("{app} has no default world; pass --world")),
    }
}

fn mark(spec: &str) -> Result<()> {
    let store = open_store(spec, None)?;
    let engine = store.engine();
    for asc in &engine.spec().ascs {
        for template in &asc.templates {
            let rendered: Vec<String> = template
                .tokens
                .iter()
                .map(|t| match t {
                    TemplateToken::Word(w) => w.clone(),
                    TemplateToken::Slot(s) => {
                        let slot = asc.input(s).expect("validated slot");
                        let star = if slot.starred { "*" } else { "" };
                        format!("{{{s}{star}:{}}}", slot.ty)
                    }
                })
                .collect();
            println!("{:>3} {:<24} {}", asc.aid, asc.api, rendered.join(" "));
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve { port, host, specs } => {
            let state = match specs {
                Some(dir) => AppState::from_dir(&dir)?,
                None => AppState::bundled(),
            };
            let names: Vec<&String> = state.stores.keys().collect();
            eprintln!("serving {names:?} on http://{host}:{port}");
            let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
            axum::serve(listener, router(Arc::new(state))).await?;
        }
        Command::Ground { spec, world, command, matcher, no_rephrase, no_utilities, embeddings, execute } => {
            let store = open_store(&spec, embeddings.as_deref())?;
            let mut world = read_world(world.as_deref(), store.app_name())?;
            let options = GroundingOptions { matcher, rephrase: !no_rephrase, utilities: !no_utilities, ..Default::default() };
            let result = ground(&store.engine(), &command, &options, &world)?;
            let mut out = serde_json::json!({ "result": result });
            if execute {
                if let Some(call) = &result.action {
                    world.execute_action(&call.api, &call.values())?;
                }
                out["world"] = serde_json::to_value(&world)?;
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Eval { spec, dataset, variant, learner_script, embeddings, report } => {
            let store = open_store(&spec, embeddings.as_deref())?;
            let data = load_dataset(&dataset, store.engine().spec())?;
            let script = learner_script.as_deref().map(load_learner_script).transpose()?;
            let result = evaluate(&store, &data, variant, script.as_deref())?;
            print!("{}", result.to_table());
            if let Some(path) = report {
                let mut doc = serde_json::to_value(&result)?;
                doc["table"] = result.to_table().into();
                std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Mark { spec } => mark(&spec)?,
    }
    Ok(())
}
