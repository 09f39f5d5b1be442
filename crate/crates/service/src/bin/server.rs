use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use cathnav::environment::path::PlannedPath;
use clap::Parser;
use sim_service::{App, ServiceConfig, Store};

/// Serves teleoperation sessions over websocket and trial reports over REST.
#[derive(Debug, Parser)]
#[command(name = "cathnav-service", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Scenario to offer: a builtin name or a scenario file, optionally
    /// followed by `=<planned path file>` for C-GAIL guidance. Repeatable.
    #[arg(long = "scenario", default_values_t = ["toy-curved".to_string(), "toy-straight".to_string()])]
    scenarios: Vec<String>,
    /// Directory where trial reports are written.
    #[arg(long)]
    reports: Option<PathBuf>,
    /// Milliseconds between ticks; 0 runs unthrottled.
    #[arg(long, default_value_t = 50)]
    tick_ms: u64,
}

fn load(args: &Args) -> cathnav::Result<Store> {
    let mut store = Store::new(args.reports.clone())?;
    for spec in &args.scenarios {
        let (name, plan) = match spec.split_once('=') {
            Some((n, p)) => (n, Some(PlannedPath::load(p)?)),
            None => (spec.as_str(), None),
        };
        store.add_scenario(cathnav_cli::commands::load_scenario(name)?, plan)?;
    }
    Ok(store)
}

#[tokio::main]
async fn main() {
    let args = Args::parse();
    let store = match load(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cathnav_cli::exit_code(&e));
        }
    };
    let mut config = ServiceConfig::default();
    config.tick_interval = (args.tick_ms > 0).then(|| Duration::from_millis(args.tick_ms));
    let listener = match tokio::net::TcpListener::bind(&args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.addr);
            std::process::exit(2);
        }
    };
    eprintln!("listening on {}", args.addr);
    if let Err(e) = sim_service::serve(listener, Arc::new(App { store, config })).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
