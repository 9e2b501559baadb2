// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! `nslctl`: exit code 0 on success, 1 on a domain rejection, 2 on usage or parse errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nslice_core::catalog::load_catalog;
use nslice_core::infra::InfrastructureMap;
use nslice_core::lifecycle::events_table;
use nslice_core::ordering::OverrideValue;

use crate::api::{serve, AppState};
use crate::config::Config;
use crate::engine::{parse_trace, Clock, Engine, EngineError};
use crate::tenants::TenantRegistry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nslctl", version, about = "Network-slice orchestrator")]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Overrides the configured catalog directory.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// Fixed clock in epoch milliseconds, for reproducible runs.
    #[arg(long, global = true, hide = true)]
    pub clock_ms: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Service catalog checks.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Service orders.
    #[command(subcommand)]
    Order(OrderCmd),
    /// Slices of reserved orders.
    #[command(subcommand)]
    Slice(SliceCmd),
    /// Infrastructure map.
    #[command(subcommand)]
    Infra(InfraCmd),
    /// Reservation ledger.
    #[command(subcommand)]
    Reservations(ReservationsCmd),
    /// Serve the HTTP API.
    Serve,
}

#[derive(Debug, Subcommand)]
pub enum CatalogCmd {
    /// Load and validate a catalog directory.
    Lint { dir: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
pub enum OrderCmd {
    Submit {
        #[arg(long)]
        tenant: String,
        #[arg(long)]
        template: String,
        /// `path=value`; a value with letters or commas is a set.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        /// Rejected order this one re-negotiates.
        #[arg(long)]
        renegotiates: Option<String>,
    },
    Process { id: String },
    Status { id: String },
}

#[derive(Debug, Subcommand)]
pub enum SliceCmd {
    Activate {
        id: String,
        /// Epoch minutes; defaults to now.
        #[arg(long)]
        now: Option<u64>,
    },
    /// Feed an `hour,load` trace and print the scaling events.
    Simulate {
        id: String,
        #[arg(long)]
        trace: PathBuf,
    },
    Terminate { id: String },
}

#[derive(Debug, Subcommand)]
pub enum InfraCmd {
    Load {
        file: PathBuf,
        /// Drop existing events and reservations.
        #[arg(long)]
        reset: bool,
    },
    Show,
}

#[derive(Debug, Subcommand)]
pub enum ReservationsCmd {
    /// Per-PoP, per-window utilization table.
    Export,
}

struct Failure(i32, String);

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Setup(_) | EngineError::Invalid { .. } | EngineError::Log(_) | EngineError::Apply(_) => {
                EXIT_USAGE
            }
            _ => EXIT_REJECTED,
        };
        Failure(code, e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn parse_override(s: &str) -> Result<(String, OverrideValue), Failure> {
    let (path, value) = s.split_once('=').ok_or_else(|| usage(format!("--set {s}: expected PATH=VALUE")))?;
    let v = match value.parse::<u64>() {
        Ok(n) => OverrideValue::Number(n),
        Err(_) => OverrideValue::Set(value.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()),
    };
    Ok((path.to_string(), v))
}

fn load_config(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| usage(e.to_string()))?,
        None => Config::from_toml("", Path::new(".")).map_err(|e| usage(e.to_string()))?,
    };
    cfg.apply_env(env).map_err(|e| usage(e.to_string()))?;
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(c) = &cli.catalog {
        cfg.catalog_dir = c.clone();
    }
    Ok(cfg)
}

fn json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

fn execute(cli: Cli, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load_config(&cli, env)?;
    let clock = cli.clock_ms.map_or(Clock::System, Clock::Fixed);
    let io = |e: std::io::Error| usage(e.to_string());
    match cli.command {
        Command::Catalog(CatalogCmd::Lint { dir }) => {
            let dir = dir.unwrap_or(cfg.catalog_dir);
            let cat = load_catalog(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            writeln!(out, "ok: {} vnfs, {} nsds, {} templates", cat.vnfs.len(), cat.nsds.len(), cat.templates.len())
                .map_err(io)?;
        }
        Command::Infra(InfraCmd::Load { file, reset }) => {
            let map = InfrastructureMap::load(&file).map_err(|e| usage(e.to_string()))?;
            Engine::install_infra(&cfg.data_dir, &map, reset)?;
            writeln!(out, "loaded {} pops, {} wan links", map.pops.len(), map.wan_links.len()).map_err(io)?;
        }
        Command::Infra(InfraCmd::Show) => {
            let e = Engine::open(cfg, clock)?;
            let m = &e.state().map;
            writeln!(out, "{:<10} {:<12} {:<16} {:>6} {:>8} {:>10}", "pop", "region", "capabilities", "vcpu", "mem_gb", "storage_gb")
                .map_err(io)?;
            for p in &m.pops {
                let caps: Vec<String> = p.capabilities.iter().map(|c| format!("{c:?}").to_uppercase()).collect();
                let caps = if caps.is_empty() { "-".to_string() } else { caps.join(",") };
                writeln!(
                    out,
                    "{:<10} {:<12} {:<16} {:>6} {:>8} {:>10}",
                    p.id.as_str(),
                    p.region,
                    caps,
                    p.capacity.vcpu,
                    p.capacity.mem_gb,
                    p.capacity.storage_gb
                )
                .map_err(io)?;
            }
            writeln!(out, "{:<10} {:<10} {:<10} {:>9} {:>6}", "link", "a", "b", "mbps", "class").map_err(io)?;
            for l in &m.wan_links {
                writeln!(
                    out,
                    "{:<10} {:<10} {:<10} {:>9} {:>6}",
                    l.id.as_str(),
                    l.endpoint_a.as_str(),
                    l.endpoint_b.as_str(),
                    l.capacity_mbps,
                    l.reliability_class
                )
                .map_err(io)?;
            }
        }
        Command::Order(cmd) => {
            let mut e = Engine::open(cfg, clock)?;
            match cmd {
                OrderCmd::Submit { tenant, template, overrides, renegotiates } => {
                    let overrides =
                        overrides.iter().map(|s| parse_override(s)).collect::<Result<BTreeMap<_, _>, _>>()?;
                    let order = e.submit(&tenant, &template, overrides, renegotiates.as_deref())?;
                    writeln!(out, "{}", json(&order)).map_err(io)?;
                }
                OrderCmd::Process { id } => {
                    let v = e.process(None, &id)?;
                    if v.is_admitted() {
                        writeln!(out, "ADMITTED {id}").map_err(io)?;
                    } else {
                        let cause = v.cause.map_or("DESIGN".to_string(), |c| format!("{c:?}").to_uppercase());
                        writeln!(out, "REJECTED {id} cause={cause}").map_err(io)?;
                    }
                    writeln!(out, "{}", json(&v)).map_err(io)?;
                    if !v.is_admitted() {
                        return Ok(EXIT_REJECTED);
                    }
                }
                OrderCmd::Status { id } => writeln!(out, "{}", json(&e.order(None, &id)?)).map_err(io)?,
            }
        }
        Command::Slice(cmd) => {
            let mut e = Engine::open(cfg, clock)?;
            match cmd {
                SliceCmd::Activate { id, now } => writeln!(out, "{}", json(&e.activate(None, &id, now)?)).map_err(io)?,
                SliceCmd::Simulate { id, trace } => {
                    let text = std::fs::read_to_string(&trace).map_err(|err| usage(format!("{}: {err}", trace.display())))?;
                    let loads = parse_trace(&text).map_err(|m| usage(format!("{}: {m}", trace.display())))?;
                    let report = e.trace(None, &id, &loads)?;
                    write!(out, "{}", events_table(&report.events)).map_err(io)?;
                }
                SliceCmd::Terminate { id } => writeln!(out, "{}", json(&e.terminate(None, &id)?)).map_err(io)?,
            }
        }
        Command::Reservations(ReservationsCmd::Export) => {
            let e = Engine::open(cfg, clock)?;
            write!(out, "{}", e.reservations_table()).map_err(io)?;
        }
        Command::Serve => {
            let tenants = match &cfg.tenants_file {
                Some(p) => TenantRegistry::load(p).map_err(usage)?,
                None => {
                    tracing::warn!("no tenants_file configured; every request will get 401");
                    TenantRegistry::default()
                }
            };
            let port = cfg.port;
            let engine = Engine::open(cfg, clock)?;
            let rt = tokio::runtime::Runtime::new().map_err(io)?;
            rt.block_on(serve(AppState::new(engine, tenants), port)).map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs one command line. `env` supplies environment variables.
pub fn run<I, S>(args: I, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, env, out) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
