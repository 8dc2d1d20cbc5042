use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use rovi_core::simulator::WorldState;
use rovi_service::{app, AppState, SceneStore, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "rovi-service", version, about = "Serve the RoVI pipeline over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Persist scenes as JSON files here and reload them at startup.
    #[arg(long)]
    store_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 8 << 20)]
    max_body_bytes: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let config = ServiceConfig { max_body_bytes: args.max_body_bytes, ..Default::default() };
    let store = match &args.store_dir {
        Some(dir) => {
            let (palette, tol) = (config.pipeline.palette.clone(), config.pipeline.parser.tolerance);
            SceneStore::with_dir(dir, |text| WorldState::from_json(text, &palette, tol).ok())?
        }
        None => SceneStore::new(),
    };
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(AppState::new(store, config))).await
}
