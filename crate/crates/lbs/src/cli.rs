use std::fs::OpenOptions;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lbs_core::server::auth::{load_credentials, CredentialStore};
use lbs_core::server::{load_registry, AssetStore, LocationRecord, LocationServer, Registry};
use lbs_core::sim::{load_scenario, run, Simulation};
use lbs_core::tag::parse_tag_id;

use crate::interactive::{self, SimHandle};
use crate::web::{location_router, wall_clock, LocationService};

#[derive(Debug, Parser)]
#[command(
    name = "lbs",
    version,
    about = "Indoor location services over simulated RFID"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the location server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long)]
        registry: PathBuf,
        /// `user:salt_hex:sha256_hex` lines; without it a single guest/guest
        /// account is created.
        #[arg(long)]
        credentials: Option<PathBuf>,
        /// Directory served under /image/.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Run a scenario headless and write its event log.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario in real time behind the interactive HTTP API.
    Interactive {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Static web console served under /ui/.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Inspect or edit a registry file.
    Registry {
        #[command(subcommand)]
        action: RegistryAction,
    },
    /// Manage a credentials file.
    User {
        #[command(subcommand)]
        action: UserAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum RegistryAction {
    /// Append a record, creating the file if needed.
    Add {
        file: PathBuf,
        tag: String,
        name: String,
        description: String,
        #[arg(long)]
        image: Option<String>,
        /// `topic=text`, repeatable.
        #[arg(long = "extra")]
        extras: Vec<String>,
    },
    List {
        file: PathBuf,
    },
    /// Validate a file; exits 1 on the first error.
    Check {
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum UserAction {
    /// Append a user with a freshly salted password hash.
    Add {
        file: PathBuf,
        username: String,
        #[arg(long)]
        password: String,
    },
}

pub fn run_cli(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            port,
            bind,
            registry,
            credentials,
            assets,
        } => serve(&bind, port, &registry, credentials.as_deref(), assets),
        Command::Simulate {
            scenario,
            seed,
            out,
        } => simulate(&scenario, seed, out.as_deref()),
        Command::Interactive {
            scenario,
            port,
            bind,
            speed,
            seed,
            assets,
            ui,
        } => interactive_mode(&scenario, &bind, port, speed, seed, assets, ui),
        Command::Registry { action } => registry_cmd(action),
        Command::User { action } => user_cmd(action),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start async runtime")
}

async fn bind_listener(bind: &str, port: u16) -> Result<tokio::net::TcpListener> {
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .with_context(|| format!("bad bind address {bind:?}"))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    std::io::stdout().flush()?;
    Ok(listener)
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

fn asset_store(assets: Option<PathBuf>) -> AssetStore {
    assets.map_or(AssetStore::None, AssetStore::Dir)
}

fn serve(
    bind: &str,
    port: u16,
    registry: &Path,
    credentials: Option<&Path>,
    assets: Option<PathBuf>,
) -> Result<()> {
    let registry = load_registry(registry)?;
    let credentials = match credentials {
        Some(path) => load_credentials(path)?,
        None => {
            eprintln!("no --credentials given; accepting guest/guest");
            let mut store = CredentialStore::new();
            store.add_user("guest", "guest", &mut rand::rng())?;
            store
        }
    };
    eprintln!("{} locations, {} users", registry.len(), credentials.len());
    let svc = LocationService {
        server: Arc::new(LocationServer::new(
            registry,
            credentials,
            asset_store(assets),
        )),
        clock: wall_clock(),
    };
    runtime()?.block_on(async {
        let listener = bind_listener(bind, port).await?;
        axum::serve(listener, location_router(svc))
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        Ok(())
    })
}

fn simulate(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let text = run(&scenario)?.to_text();
    match out {
        Some(out) => {
            std::fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn interactive_mode(
    path: &Path,
    bind: &str,
    port: u16,
    speed: f64,
    seed: Option<u64>,
    assets: Option<PathBuf>,
    ui: Option<PathBuf>,
) -> Result<()> {
    if !(speed.is_finite() && speed > 0.0) {
        bail!("--speed must be positive");
    }
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let registry = match &scenario.registry {
        Some(file) => load_registry(file)?,
        None => Registry::new(),
    };
    let handle = SimHandle::new(Simulation::with_assets(
        scenario,
        registry,
        asset_store(assets),
    ));
    runtime()?.block_on(async {
        let listener = bind_listener(bind, port).await?;
        let clock = tokio::spawn(interactive::run_clock(handle.clone(), speed));
        let result = axum::serve(listener, interactive::router(handle, ui))
            .with_graceful_shutdown(shutdown_signal())
            .await;
        clock.abort();
        result?;
        Ok(())
    })
}

fn registry_cmd(action: RegistryAction) -> Result<()> {
    match action {
        RegistryAction::Add {
            file,
            tag,
            name,
            description,
            image,
            extras,
        } => {
            let mut registry = if file.exists() {
                load_registry(&file)?
            } else {
                Registry::new()
            };
            let mut record = LocationRecord::new(parse_tag_id(&tag)?, name, description);
            if let Some(image) = image {
                record = record.with_image(image);
            }
            for extra in extras {
                let Some((topic, text)) = extra.split_once('=') else {
                    bail!("--extra {extra:?} is not topic=text");
                };
                record = record.with_extra(topic, text);
            }
            let line = record.to_tsv_line();
            registry.insert(record)?;
            append_line(&file, &line)?;
            Ok(())
        }
        RegistryAction::List { file } => {
            let registry = load_registry(&file)?;
            let mut out = std::io::stdout().lock();
            for r in registry.records() {
                writeln!(out, "{}\t{}\t{}", r.tag, r.name, r.description)?;
            }
            Ok(())
        }
        RegistryAction::Check { file } => {
            let registry = load_registry(&file)?;
            println!("ok: {} records", registry.len());
            Ok(())
        }
    }
}

fn user_cmd(action: UserAction) -> Result<()> {
    match action {
        UserAction::Add {
            file,
            username,
            password,
        } => {
            let store = if file.exists() {
                load_credentials(&file)?
            } else {
                CredentialStore::new()
            };
            if store.usernames().any(|u| u == username) {
                bail!("user {username:?} already exists");
            }
            let mut single = CredentialStore::new();
            single.add_user(&username, &password, &mut rand::rng())?;
            let text = single.to_text();
            append_line(&file, text.trim_end())?;
            Ok(())
        }
    }
}

/// Appends one line, adding a newline first if the file lacks a trailing one.
fn append_line(path: &Path, line: &str) -> Result<()> {
    let existing = std::fs::read(path).unwrap_or_default();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    if existing.last().is_some_and(|b| *b != b'\n') {
        f.write_all(b"\n")?;
    }
    writeln!(f, "{line}")?;
    Ok(())
}
