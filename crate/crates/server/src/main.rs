use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use tkg_core::layout::Method;
use tkg_core::synth::{generate_corpus, SynthConfig};
use tkg_server::{pipeline, prepare, serve_on, AppConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "app", version, about = "Talent knowledge graph pipeline and API server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the record files into snapshot.json.
    Ingest(Common),
    /// Aggregate paper vectors into author and dataset vectors.
    Embed(Common),
    /// Rank collaborators and dataset users.
    Recommend(Common),
    /// Project all nodes to 2D.
    Layout(Common),
    /// Serve the API over the finished artifacts.
    Serve(Common),
    /// Write a synthetic corpus into --output-dir.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    perplexity: Option<f64>,
    /// t-SNE iterations, or UMAP epochs.
    #[arg(long)]
    iterations: Option<usize>,
    /// Use the offline justification provider.
    #[arg(long)]
    mock_llm: bool,
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().authors)]
    authors: usize,
    #[arg(long, default_value_t = SynthConfig::default().datasets)]
    datasets: usize,
    #[arg(long, default_value_t = SynthConfig::default().papers)]
    papers: usize,
    #[arg(long, default_value_t = SynthConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
}

impl Common {
    fn config(&self) -> anyhow::Result<AppConfig> {
        let mut c = AppConfig::load(self.config.as_deref())?;
        if let Some(d) = &self.input_dir {
            c.pipeline.input_dir = d.clone();
        }
        if let Some(d) = &self.output_dir {
            c.pipeline.data_dir = d.clone();
        }
        if let Some(s) = self.seed {
            c.layout.random_seed = s;
        }
        if let Some(m) = self.method {
            c.layout.method = m;
        }
        if let Some(p) = self.perplexity {
            c.layout.tsne.perplexity = p;
        }
        if let Some(n) = self.iterations {
            c.layout.tsne.iterations = n;
            c.layout.umap.epochs = n;
        }
        if self.mock_llm {
            c.provider.mock = true;
        }
        if let Some(p) = self.port {
            c.server.port = p;
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

async fn serve(config: AppConfig) -> anyhow::Result<()> {
    let (state, app) = prepare(&config)?;
    let addr = config.server.socket_addr();
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, nodes = state.catalog().len(), model = state.gateway().model_id(), "serving");
    serve_on(listener, app, async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    })
    .await?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(a) => {
            let c = a.config()?;
            let p = &c.pipeline;
            print_json(&pipeline::ingest(&p.input_dir, &p.data_dir, p.activity_cutoff_year)?)
        }
        Command::Embed(a) => {
            let c = a.config()?;
            let p = &c.pipeline;
            print_json(&pipeline::embed(&p.input_dir, &p.data_dir, p.embedding_dim)?)
        }
        Command::Recommend(a) => {
            let c = a.config()?;
            let p = &c.pipeline;
            print_json(&pipeline::recommend(&p.data_dir, p.collaborators_k, p.dataset_users_k)?)
        }
        Command::Layout(a) => {
            let c = a.config()?;
            print_json(&pipeline::layout(&c.pipeline.data_dir, &c.layout)?)
        }
        Command::Serve(a) => {
            let c = a.config()?;
            tokio::runtime::Runtime::new()?.block_on(serve(c))
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                authors: a.authors,
                datasets: a.datasets,
                papers: a.papers,
                dim: a.dim,
                seed: a.seed,
                ..SynthConfig::default()
            };
            generate_corpus(&cfg).write_dir(&a.output_dir)?;
            println!("wrote synthetic corpus to {}", a.output_dir.display());
            Ok(())
        }
    }
}
