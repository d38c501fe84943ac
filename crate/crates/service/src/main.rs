use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pipegen_core::{Category, TagContext};
use pipegen_service::{http, load_engine, FileStore, ProjectService};

#[derive(Parser)]
#[command(
    name = "pipegen",
    version,
    about = "Guided design of PHOTON pipeline scripts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "PIPEGEN_PORT", default_value_t = 8080)]
        port: u16,
        /// Directory with elements.csv and parameters.csv; bundled content if absent.
        #[arg(long, env = "PIPEGEN_CONTENT_DIR")]
        content_dir: Option<PathBuf>,
        #[arg(long, env = "PIPEGEN_DATA_DIR", default_value = "pipegen-data")]
        data_dir: PathBuf,
    },
    /// Render a project document to a script.
    Generate {
        #[arg(long)]
        project_file: PathBuf,
        #[arg(long, env = "PIPEGEN_CONTENT_DIR")]
        content_dir: Option<PathBuf>,
        /// Output file; standard output if omitted.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Inspect content packs.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
}

#[derive(Subcommand)]
enum RegistryCommand {
    /// Load and check a content directory.
    Validate { dir: PathBuf },
    /// List elements, optionally filtered by category and context tags.
    List {
        #[arg(long)]
        category: Option<String>,
        /// Comma-separated context tags.
        #[arg(long)]
        tags: Option<String>,
        #[arg(long, env = "PIPEGEN_CONTENT_DIR")]
        content_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve {
            port,
            content_dir,
            data_dir,
        } => serve(port, content_dir, data_dir),
        Command::Generate {
            project_file,
            content_dir,
            output,
        } => {
            let engine = load_engine(content_dir.as_deref())?;
            let script = pipegen_service::generate(&project_file, &engine)?;
            match output {
                Some(path) => std::fs::write(&path, script)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{script}"),
            }
            Ok(())
        }
        Command::Registry {
            command: RegistryCommand::Validate { dir },
        } => {
            let engine = load_engine(Some(&dir))?;
            println!(
                "{}: {} elements, {} steps, ok",
                dir.display(),
                engine.registry.len(),
                engine.steps.iter().count()
            );
            Ok(())
        }
        Command::Registry {
            command:
                RegistryCommand::List {
                    category,
                    tags,
                    content_dir,
                },
        } => {
            let engine = load_engine(content_dir.as_deref())?;
            let reg = &engine.registry;
            let categories = match category {
                Some(c) => {
                    vec![Category::parse(&c).with_context(|| format!("unknown category `{c}`"))?]
                }
                None => Category::ALL.to_vec(),
            };
            for category in categories {
                let elements = match &tags {
                    Some(t) => {
                        let ctx: TagContext = t
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .collect();
                        reg.query_elements(category, &ctx)
                    }
                    None => reg.elements_in(category).collect(),
                };
                for e in elements {
                    let tags: Vec<&str> = e.tags.iter().map(String::as_str).collect();
                    println!("{category}\t{}\t{}", e.element_id, tags.join(";"));
                }
            }
            Ok(())
        }
    }
}

fn serve(port: u16, content_dir: Option<PathBuf>, data_dir: PathBuf) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let engine = Arc::new(load_engine(content_dir.as_deref())?);
    let store = Arc::new(
        FileStore::open(&data_dir).with_context(|| format!("opening {}", data_dir.display()))?,
    );
    let app = http::router(ProjectService::new(engine, store));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, data_dir = %data_dir.display(), "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
