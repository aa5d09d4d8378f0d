use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conditor::build::{cmd_build, BuildOptions, ExitStatus};
use conditor::graph::graph_export;
use conditor::query::{open_store, QueryService};
use conditor_core::emit::emit_xtm_dita;
use conditor_core::index::DEFAULT_K;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "conditor", version, about = "Compile an encyclopedia corpus into a searchable topic map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a corpus into out/topicmap.xml and out/store/
    Build {
        #[arg(long)]
        corpus: PathBuf,
        /// Rules file; the built-in rules are used when omitted
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for entry interpretation (0 = one per core)
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Ranked search; prints `id TAB score TAB name TAB snippet`
    Search {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        query: String,
    },
    /// Write the stored map as XTM-DITA
    Emit {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the neighbourhood of a topic as JSON
    Graph {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        root: u64,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Serve the JSON API (and optionally a static UI bundle)
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn fatal(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(ExitStatus::Fatal.code() as u8)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("CONDITOR_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => fatal(format!("{e:#}")),
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Build {
            corpus,
            rules,
            out,
            threads,
        } => {
            let report = cmd_build(&BuildOptions {
                corpus: &corpus,
                rules: rules.as_deref(),
                out: &out,
                threads,
            })?;
            print!("{report}");
            Ok(ExitCode::from(report.status().code() as u8))
        }
        Command::Search { store, k, query } => {
            let svc = QueryService::open(&store)?;
            let hits = match svc.search(&query, k) {
                Ok(hits) => hits,
                Err(e) => return Ok(fatal(format!("invalid query: {e}"))),
            };
            let mut out = std::io::stdout().lock();
            for hit in hits {
                writeln!(out, "{}", hit.to_line())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Emit { store, out } => {
            let map = open_store(&store)?.load()?;
            std::fs::write(&out, emit_xtm_dita(&map))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph { store, root, depth } => {
            let map = open_store(&store)?.load()?;
            match graph_export(&map, root, depth) {
                Some(export) => {
                    println!("{}", serde_json::to_string_pretty(&export)?);
                    Ok(ExitCode::SUCCESS)
                }
                None => Ok(fatal(format!("topic {root} not found"))),
            }
        }
        Command::Serve {
            store,
            port,
            host,
            static_dir,
        } => {
            let svc = QueryService::open(&store)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(conditor::server::serve(svc, SocketAddr::new(host, port), static_dir))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
