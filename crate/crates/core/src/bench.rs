//! Frame rate against agent count.
//!
//! A measured frame is one simulation step plus a full three-pass capture.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::behavior::{spawn_state, SimState, SpawnConfig, DT};
use crate::camera::{CameraIntrinsics, UavState};
use crate::error::{Error, Result};
use crate::render::Renderer;
use crate::world::WorldConfig;

pub const WARMUP_TICKS: u64 = 60;
pub const MIN_MEASURED_TICKS: u64 = 300;
pub const BENCH_ALTITUDE: f64 = 30.0;
pub const BENCH_PITCH_DEG: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub agent_count: usize,
    pub mean_fps: f64,
    pub p5_fps: f64,
    pub ticks_measured: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub machine_info: String,
    pub config_hash: String,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>8}  {:>10}  {:>10}  {:>8}", "agents", "mean_fps", "p5_fps", "ticks");
        for r in &self.rows {
            let _ = writeln!(s, "{:>8}  {:>10.2}  {:>10.2}  {:>8}", r.agent_count, r.mean_fps, r.p5_fps, r.ticks_measured);
        }
        let _ = writeln!(s, "machine: {}", self.machine_info);
        let _ = writeln!(s, "config: {}", self.config_hash);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("agent_count,mean_fps,p5_fps,ticks_measured\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.4},{:.4},{}", r.agent_count, r.mean_fps, r.p5_fps, r.ticks_measured);
        }
        s
    }
}

/// Oblique view of the crowd centroid, or of the map center when there are no agents.
pub fn bench_camera(sim: &SimState) -> UavState {
    let n = sim.agents.len().max(1) as f64;
    let (x, y) = sim.agents.iter().fold((0.0, 0.0), |(x, y), a| (x + a.pos.x / n, y + a.pos.y / n));
    UavState::looking_at_ground(x, y, BENCH_ALTITUDE, 0.0, BENCH_PITCH_DEG.to_radians())
}

/// Crowd used for a benchmark row: `count` agents in groups on adjacent tiles.
pub fn bench_crowd(world: &crate::world::World, count: usize) -> Result<SimState> {
    match count {
        0 => Ok(SimState::empty(world.seed)),
        n => spawn_state(world, &SpawnConfig { clustered: true, ..SpawnConfig::with_agents(n) }),
    }
}

pub fn machine_info() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).map(|l| l.split(':').nth(1).unwrap_or("").trim().to_string()))
        .unwrap_or_else(|| "unknown cpu".into());
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{cpu}; {threads} hardware threads; {}-{}; single-threaded renderer", std::env::consts::OS, std::env::consts::ARCH)
}

pub fn run_benchmark(counts: &[usize], world_cfg: &WorldConfig, duration_ticks: u64) -> Result<BenchReport> {
    if counts.is_empty() {
        return Err(Error::InvalidParameter("no agent counts given".into()));
    }
    if duration_ticks < MIN_MEASURED_TICKS {
        return Err(Error::InvalidParameter(format!("duration_ticks must be >= {MIN_MEASURED_TICKS}, got {duration_ticks}")));
    }
    let world = world_cfg.generate()?;
    let k = CameraIntrinsics::default();
    let mut renderer = Renderer::new(k)?;

    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mut rows = Vec::with_capacity(sorted.len());
    for &count in &sorted {
        let mut sim = bench_crowd(&world, count)?;
        let uav = bench_camera(&sim);
        for _ in 0..WARMUP_TICKS {
            sim = sim.step(&world, DT);
            std::hint::black_box(renderer.capture(&sim, &world, &uav));
        }
        let mut frame_secs = Vec::with_capacity(duration_ticks as usize);
        let start = Instant::now();
        for _ in 0..duration_ticks {
            let t0 = Instant::now();
            sim = sim.step(&world, DT);
            std::hint::black_box(renderer.capture(&sim, &world, &uav));
            frame_secs.push(t0.elapsed().as_secs_f64());
        }
        let total = start.elapsed().as_secs_f64();
        log::info!("bench: {count} agents, {duration_ticks} frames in {total:.2} s");
        rows.push(BenchRow {
            agent_count: count,
            mean_fps: duration_ticks as f64 / total,
            p5_fps: p5_fps(&frame_secs),
            ticks_measured: duration_ticks,
        });
    }

    let cfg = serde_json::json!({
        "counts": sorted,
        "world": world_cfg,
        "duration_ticks": duration_ticks,
        "altitude": BENCH_ALTITUDE,
        "pitch_deg": BENCH_PITCH_DEG,
        "intrinsics": k,
    });
    Ok(BenchReport {
        rows,
        machine_info: machine_info(),
        config_hash: crate::behavior::hex_digest(cfg.to_string().as_bytes()),
    })
}

/// Frame rate exceeded by 95% of frames: the reciprocal of the 95th-percentile frame time.
fn p5_fps(frame_secs: &[f64]) -> f64 {
    let mut sorted = frame_secs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((sorted.len() as f64 * 0.95).ceil() as usize).clamp(1, sorted.len()) - 1;
    1.0 / sorted[idx]
}
