use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use h2atlas::eligibility::BufferMap;
use h2atlas::service::fixture::{write_fixture, FixtureOptions};
use h2atlas::service::pipeline::{
    latest_run_with_region, layer_csv, layer_geojson, read_curve_csv, read_eligibility, water_summary,
    whatif_eligibility, LAYER_NAMES,
};
use h2atlas::service::{
    api, run_pipeline, AppState, PipelineOptions, RegionStatus, RunConfig, RunOutcome, RunStatus, Scenario, Store,
};
use h2atlas::tech::Tech;

#[derive(Debug, Parser)]
#[command(name = "h2atlas", version, about = "Regional green-hydrogen cost-potential atlas")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Result store directory.
    #[arg(long, global = true, env = "ATLAS_STORE", default_value = "atlas-store")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Geojson,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a run from a config file; repeats print "cached".
    Run { config: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "ATLAS_PORT", default_value_t = api::DEFAULT_PORT)]
        port: u16,
        /// Concurrent pipeline runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Eligibility of one region, optionally with buffer overrides.
    Eligibility {
        region: String,
        #[arg(long, default_value = "wind")]
        tech: Tech,
        #[arg(long)]
        run: Option<String>,
        /// Buffer override as CRITERION_ID=METERS; repeatable.
        #[arg(long = "buffer", value_parser = parse_buffer)]
        buffers: Vec<(u8, f64)>,
    },
    /// Sustainable groundwater yield per region for a scenario such as rcp26_medium_2030.
    Water {
        scenario: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Cost-potential curve of a region as CSV.
    Curve {
        gid: String,
        #[arg(long)]
        run: Option<String>,
    },
    /// Export a map layer.
    Export {
        #[arg(long)]
        layer: String,
        #[arg(long, value_enum, default_value = "geojson")]
        format: ExportFormat,
        #[arg(long)]
        run: Option<String>,
        /// Output file (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the synthetic three-region fixture bundle.
    Fixture {
        dir: PathBuf,
        /// Add a region with unreadable geometry.
        #[arg(long)]
        corrupt_region: bool,
    },
}

fn parse_buffer(s: &str) -> Result<(u8, f64), String> {
    let (id, m) = s.split_once('=').ok_or("expected CRITERION_ID=METERS")?;
    let id: u8 = id.trim().parse().map_err(|_| format!("bad criterion id {id:?}"))?;
    let m: f64 = m.trim().parse().map_err(|_| format!("bad buffer {m:?}"))?;
    if !(m >= 0.0) || !m.is_finite() {
        return Err(format!("buffer must be a non-negative number, got {m}"));
    }
    Ok((id, m))
}

fn latest_done(store: &Store) -> anyhow::Result<String> {
    store
        .list_runs()?
        .into_iter()
        .rev()
        .find(|m| m.status == RunStatus::Done)
        .map(|m| m.run_id)
        .ok_or_else(|| anyhow!("no finished run in {}", store.root().display()))
}

fn emit(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let opts = PipelineOptions { threads: cli.threads };
    match cli.command {
        Command::Run { config } => {
            let config = RunConfig::read(&config)?;
            let store = Store::open(&cli.store)?;
            let outcome = run_pipeline(&store, &config, opts)?;
            let m = outcome.manifest();
            let failed = m.regions.iter().filter(|r| r.status != RegionStatus::Done).count();
            let tag = match outcome {
                RunOutcome::Cached(_) => "cached",
                RunOutcome::Completed(_) => "completed",
            };
            println!("{} {tag} regions={} failed={failed}", m.run_id, m.regions.len());
            for r in m.regions.iter().filter(|r| r.error.is_some()) {
                eprintln!("{}: {}", r.gid, r.error.as_deref().unwrap_or_default());
            }
            if m.status != RunStatus::Done {
                bail!("run {} ended as {:?}", m.run_id, m.status);
            }
        }
        Command::Serve { port, workers } => {
            let store = Store::open(&cli.store)?;
            let state = AppState::new(store, workers, cli.threads);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(api::serve(state, port))?;
        }
        Command::Eligibility {
            region,
            tech,
            run,
            buffers,
        } => {
            let store = Store::open(&cli.store)?;
            let run_id = match run {
                Some(r) => r,
                None => latest_run_with_region(&store, &region)?.run_id,
            };
            let baseline = read_eligibility(&store, &run_id, &region, tech)?;
            let overrides: BufferMap = buffers.into_iter().collect();
            let result = if overrides.is_empty() {
                baseline.clone()
            } else {
                with_threads(cli.threads, || whatif_eligibility(&store, &run_id, &region, tech, &overrides))??
            };
            let v = json!({
                "run_id": run_id,
                "gid": region,
                "tech": tech,
                "overrides": overrides,
                "eligible_fraction": result.eligible_fraction,
                "baseline_fraction": baseline.eligible_fraction,
                "region_cells": result.region_cells,
                "eligible_cells": result.eligible_cells,
                "ledger": result.ledger,
            });
            emit(None, &serde_json::to_string_pretty(&v)?)?;
        }
        Command::Water { scenario, config } => {
            let config = RunConfig::read(&config)?;
            let scenario = Scenario::parse_key(&scenario)?;
            let rows = water_summary(&config, scenario)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["gid", "sy_mean_mm", "groundwater_m3"])?;
            for r in rows {
                w.write_record([
                    r.gid,
                    r.sy_mean_mm.map(|v| v.to_string()).unwrap_or_default(),
                    r.groundwater_m3.to_string(),
                ])?;
            }
            emit(None, &String::from_utf8(w.into_inner()?)?)?;
        }
        Command::Curve { gid, run } => {
            let store = Store::open(&cli.store)?;
            let run_id = match run {
                Some(r) => r,
                None => latest_run_with_region(&store, &gid)?.run_id,
            };
            emit(None, &read_curve_csv(&store, &run_id, &gid)?)?;
        }
        Command::Export {
            layer,
            format,
            run,
            output,
        } => {
            if !LAYER_NAMES.contains(&layer.as_str()) {
                bail!("unknown layer {layer:?}; known: {}", LAYER_NAMES.join(", "));
            }
            let store = Store::open(&cli.store)?;
            let run_id = match run {
                Some(r) => r,
                None => latest_done(&store)?,
            };
            let text = match format {
                ExportFormat::Geojson => serde_json::to_string(&layer_geojson(&store, &run_id, &layer)?)?,
                ExportFormat::Csv => layer_csv(&store, &run_id, &layer)?,
            };
            emit(output.as_ref(), &text)?;
        }
        Command::Fixture { dir, corrupt_region } => {
            let path = write_fixture(&dir, FixtureOptions { corrupt_region })?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?.install(f)),
        None => Ok(f()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e
                .downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
