use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uavcrowd::bench::run_benchmark;
use uavcrowd::dataset::{
    balance_and_split, default_suite, export_dataset, record_clip, ClipSpec, DigestSink, DirectorySink, FrameSink, Inventory,
    INVENTORY_FILE,
};
use uavcrowd::behavior::ScenarioScript;
use uavcrowd::server::{effective_seed, serve, Pacing, ServerConfig, DEFAULT_PORT};
use uavcrowd::world::{WorldConfig, DEFAULT_RADIUS};
use uavcrowd::Result;

#[derive(Parser)]
#[command(name = "uavcrowd", version, about = "Crowd-activity simulator with UAV camera capture")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Copy)]
struct WorldArgs {
    /// World and crowd seed (UAVCROWD_SEED overrides)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hex rings around the center tile
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: u32,
}

impl WorldArgs {
    fn config(&self) -> WorldConfig {
        WorldConfig { radius: self.radius, ..WorldConfig::with_seed(effective_seed(self.seed)) }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a world and print it as JSON
    Generate {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        tile_size: Option<f64>,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record clips into a directory
    Record {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 150)]
        agents: usize,
        /// Clip length in seconds (at most 10)
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// UAV altitude in meters
        #[arg(long, default_value_t = uavcrowd::camera::CAPTURE_ALTITUDE)]
        altitude: f64,
        /// Scenario script JSON instead of a random crowd
        #[arg(long, conflicts_with = "suite")]
        script: Option<PathBuf>,
        /// Record the 240-clip default suite
        #[arg(long)]
        suite: bool,
        /// Render and annotate but write only the inventory and per-clip digests
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Balance, split and export recorded clips
    Export {
        /// Inventory written by `record`
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Only write the manifest
        #[arg(long)]
        manifest_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure frames per second against agent count
    Bench {
        #[command(flatten)]
        world: WorldArgs,
        /// Agent counts, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0,50,100,150")]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 300)]
        ticks: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the control service
    Serve {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 40)]
        agents: usize,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Step as fast as possible instead of at 30 Hz
        #[arg(long)]
        batch: bool,
        /// Directory for live recordings
        #[arg(long, default_value = "recordings")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate { world, tile_size, out } => {
            let mut cfg = world.config();
            if let Some(t) = tile_size {
                cfg.tile_size = t;
            }
            let w = cfg.generate()?;
            emit(&(w.to_json() + "\n"), out.as_deref())
        }
        Cmd::Record { world, agents, duration, altitude, script, suite, dry_run, out } => {
            let specs = if suite {
                default_suite()
            } else {
                let script = match script {
                    Some(path) => ScenarioScript::from_json(&fs::read_to_string(path)?)?,
                    None => ScenarioScript::random(effective_seed(world.seed), agents, duration)?,
                };
                let id = script.name.clone().unwrap_or_else(|| format!("clip_s{}", script.seed));
                let mut spec = ClipSpec::new(id, script);
                spec.world.radius = world.radius;
                vec![spec]
            };
            fs::create_dir_all(&out)?;
            let mut clips = Vec::with_capacity(specs.len());
            for mut spec in specs {
                spec.uav.altitude = altitude;
                let clip = if dry_run {
                    let mut sink = DigestSink::default();
                    let clip = record_clip(&spec, &mut sink as &mut dyn FrameSink)?;
                    log::info!("{}: {}", clip.id, sink.finish());
                    clip
                } else {
                    let mut sink = DirectorySink::create(out.join(&spec.id))?;
                    record_clip(&spec, &mut sink)?
                };
                eprintln!("recorded {} ({}, {} frames)", clip.id, clip.label.as_str(), clip.frame_count);
                clips.push(clip);
            }
            fs::write(out.join(INVENTORY_FILE), Inventory::new(clips).to_json())?;
            Ok(())
        }
        Cmd::Export { inventory, split_seed, manifest_only, out } => {
            let inv = Inventory::from_json(&fs::read_to_string(&inventory)?)?;
            let split = balance_and_split(inv.clips.iter().map(|c| (c.id.as_str(), c.label)), split_seed)?;
            let summary = export_dataset(&inv.clips, &split, &out, !manifest_only)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Cmd::Bench { world, agents, ticks, format, out } => {
            let report = run_benchmark(&agents, &world.config(), ticks)?;
            let text = match format {
                Format::Table => report.to_table(),
                Format::Json => report.to_json() + "\n",
                Format::Csv => report.to_csv(),
            };
            emit(&text, out.as_deref())
        }
        Cmd::Serve { world, agents, port, host, batch, out } => {
            let cfg = ServerConfig {
                bind: format!("{host}:{port}"),
                world: world.config(),
                agents,
                pacing: if batch { Pacing::Batch } else { Pacing::Realtime },
                record_dir: out,
            };
            let handle = serve(cfg)?;
            eprintln!("listening on {}", handle.local_addr());
            handle.wait();
            Ok(())
        }
    }
}
