//! Control service: newline-delimited JSON commands over TCP.
//!
//! Every connection gets one reader thread and one writer thread; all
//! commands go through a single queue to the simulation thread, which owns
//! the [`Session`] and answers in arrival order. A `Subscribe` command
//! upgrades the server-to-client direction to length-prefixed binary
//! messages:
//!
//! ```text
//! [u32 big-endian header length][header JSON][payload bytes]
//! ```
//!
//! Frame headers describe the payload as a list of encoded images; command
//! responses sent after the upgrade travel as messages with an empty payload.
//! Client-to-server traffic stays line-delimited JSON throughout.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::annotate::FrameAnnotation;
use crate::behavior::{ScenarioScript, SpawnConfig, DT};
use crate::camera::CameraIntrinsics;
use crate::dataset::{DirectorySink, FrameSink};
use crate::error::{Error, Result};
use crate::render::{FrameSet, Pass};
use crate::session::{Population, Session};
use crate::world::WorldConfig;

pub const DEFAULT_PORT: u16 = 8777;
pub const SEED_ENV: &str = "UAVCROWD_SEED";

/// `UAVCROWD_SEED` when set and valid, else `cli_seed`.
pub fn effective_seed(cli_seed: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(cli_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    /// One tick every 1/30 s of wall-clock time.
    Realtime,
    /// Ticks as fast as the loop runs.
    Batch,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub world: WorldConfig,
    pub agents: usize,
    pub pacing: Pacing,
    /// Where `StartRecording` writes clips.
    pub record_dir: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: format!("127.0.0.1:{DEFAULT_PORT}"),
            world: WorldConfig::with_seed(0),
            agents: 40,
            pacing: Pacing::Realtime,
            record_dir: PathBuf::from("recordings"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", deny_unknown_fields)]
pub enum Command {
    Reset {
        request_id: String,
        #[serde(default)]
        seed: Option<u64>,
    },
    SetVelocity {
        request_id: String,
        vx: f64,
        vy: f64,
        vz: f64,
        #[serde(default)]
        yaw: Option<f64>,
    },
    SetAltitude {
        request_id: String,
        #[serde(alias = "altitude")]
        z: f64,
    },
    SetCameraPitch {
        request_id: String,
        pitch: f64,
    },
    GetImages {
        request_id: String,
        #[serde(default = "all_passes")]
        passes: Vec<Pass>,
        #[serde(default)]
        annotate: bool,
    },
    StartRecording {
        request_id: String,
        #[serde(default)]
        clip_id: Option<String>,
    },
    StopRecording {
        request_id: String,
    },
    GetState {
        request_id: String,
    },
    LoadScenario {
        request_id: String,
        script: ScenarioScript,
    },
    Subscribe {
        request_id: String,
        #[serde(default = "one")]
        every: u32,
        #[serde(default = "all_passes")]
        passes: Vec<Pass>,
    },
}

fn all_passes() -> Vec<Pass> {
    Pass::ALL.to_vec()
}

fn one() -> u32 {
    1
}

impl Command {
    pub fn request_id(&self) -> &str {
        match self {
            Command::Reset { request_id, .. }
            | Command::SetVelocity { request_id, .. }
            | Command::SetAltitude { request_id, .. }
            | Command::SetCameraPitch { request_id, .. }
            | Command::GetImages { request_id, .. }
            | Command::StartRecording { request_id, .. }
            | Command::StopRecording { request_id }
            | Command::GetState { request_id }
            | Command::LoadScenario { request_id, .. }
            | Command::Subscribe { request_id, .. } => request_id,
        }
    }
}

/// Parses one command line. Errors carry the request id when it could be read.
pub fn parse_command(line: &str) -> std::result::Result<Command, (Option<String>, &'static str, String)> {
    let value: Value = serde_json::from_str(line).map_err(|e| (None, "parse", e.to_string()))?;
    let request_id = value.get("request_id").and_then(Value::as_str).map(str::to_string);
    if request_id.is_none() {
        return Err((None, "invalid_command", "missing string request_id".into()));
    }
    serde_json::from_value(value).map_err(|e| (request_id, "invalid_command", e.to_string()))
}

pub fn ok_response(request_id: &str, payload: Value) -> Value {
    json!({"request_id": request_id, "status": "ok", "payload": payload})
}

pub fn error_response(request_id: Option<&str>, code: &str, message: &str) -> Value {
    json!({"request_id": request_id, "status": "error", "code": code, "message": message})
}

enum Outbound {
    Json(Value),
    /// Switch to binary framing after writing this line.
    Upgrade(Value),
    Frame(Vec<u8>, Arc<Vec<u8>>),
}

enum Request {
    Command(u64, Command, Sender<Outbound>),
    Reply(Sender<Outbound>, Value),
    Disconnect(u64),
}

struct Subscriber {
    conn: u64,
    every: u32,
    passes: Vec<Pass>,
    out: Sender<Outbound>,
}

struct Recording {
    clip_id: String,
    dir: PathBuf,
    sink: DirectorySink,
    frames: u32,
    start_tick: u64,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    streams: Arc<Mutex<Vec<TcpStream>>>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the service stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_all();
    }

    fn stop_all(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        for s in self.streams.lock().expect("stream list").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if !self.threads.is_empty() {
            self.stop_all();
        }
    }
}

/// Binds the socket and starts the simulation loop.
pub fn serve(cfg: ServerConfig) -> Result<ServerHandle> {
    let listener = TcpListener::bind(&cfg.bind).map_err(|e| Error::Startup(format!("cannot bind {}: {e}", cfg.bind)))?;
    let addr = listener.local_addr()?;
    let population = Population::Random(SpawnConfig::with_agents(cfg.agents));
    let session = Session::new(cfg.world, population, CameraIntrinsics::default()).map_err(|e| Error::Startup(e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let streams = Arc::new(Mutex::new(Vec::new()));
    let (tx, rx) = mpsc::channel::<Request>();
    log::info!("listening on {addr}");

    let sim_stop = stop.clone();
    let sim = std::thread::Builder::new()
        .name("sim".into())
        .spawn(move || SimLoop::new(session, cfg.pacing, cfg.record_dir).run(rx, sim_stop))?;

    let accept_stop = stop.clone();
    let accept_streams = streams.clone();
    let acceptor = std::thread::Builder::new().name("accept".into()).spawn(move || {
        let mut next_conn = 0u64;
        for stream in listener.incoming() {
            if accept_stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            next_conn += 1;
            if let Ok(clone) = stream.try_clone() {
                accept_streams.lock().expect("stream list").push(clone);
            }
            let tx = tx.clone();
            let _ = std::thread::Builder::new()
                .name(format!("conn-{next_conn}"))
                .spawn(move || handle_connection(next_conn, stream, tx));
        }
    })?;
    Ok(ServerHandle { addr, stop, streams, threads: vec![sim, acceptor] })
}

fn handle_connection(conn: u64, stream: TcpStream, tx: Sender<Request>) {
    let _ = stream.set_nodelay(true);
    let Ok(write_half) = stream.try_clone() else { return };
    let (out_tx, out_rx) = mpsc::channel::<Outbound>();
    let writer = std::thread::spawn(move || write_loop(write_half, out_rx));
    let mut seen = HashSet::new();
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let req = match parse_command(&line) {
            Ok(cmd) if !seen.insert(cmd.request_id().to_string()) => {
                let id = cmd.request_id().to_string();
                Request::Reply(out_tx.clone(), error_response(Some(&id), "invalid_command", "duplicate request_id"))
            }
            Ok(cmd) => Request::Command(conn, cmd, out_tx.clone()),
            Err((id, code, msg)) => Request::Reply(out_tx.clone(), error_response(id.as_deref(), code, &msg)),
        };
        if tx.send(req).is_err() {
            break;
        }
    }
    let _ = tx.send(Request::Disconnect(conn));
    drop(out_tx);
    let _ = writer.join();
}

fn write_loop(stream: TcpStream, rx: Receiver<Outbound>) {
    let mut w = BufWriter::new(stream);
    let mut binary = false;
    for msg in rx {
        let res = match msg {
            Outbound::Json(v) if binary => write_message(&mut w, &v, &[]),
            Outbound::Json(v) => writeln!(w, "{v}"),
            Outbound::Upgrade(v) => {
                let r = if binary { write_message(&mut w, &v, &[]) } else { writeln!(w, "{v}") };
                binary = true;
                r
            }
            Outbound::Frame(header, payload) => {
                if !binary {
                    continue;
                }
                w.write_all(&(header.len() as u32).to_be_bytes())
                    .and_then(|_| w.write_all(&header))
                    .and_then(|_| w.write_all(&payload))
            }
        };
        if res.and_then(|_| w.flush()).is_err() {
            break;
        }
    }
}

fn write_message<W: Write>(w: &mut W, header: &Value, payload: &[u8]) -> std::io::Result<()> {
    let mut header = header.clone();
    header["payload_len"] = json!(payload.len());
    let bytes = serde_json::to_vec(&header).expect("header serializes");
    w.write_all(&(bytes.len() as u32).to_be_bytes())?;
    w.write_all(&bytes)?;
    w.write_all(payload)
}

/// Binary frame message: header JSON with part offsets, payload of encoded images.
pub fn encode_frame_message(frames: &FrameSet, passes: &[Pass], ann: Option<&FrameAnnotation>) -> (Vec<u8>, Vec<u8>) {
    let mut payload = Vec::new();
    let mut parts = Vec::new();
    for &pass in passes {
        let img = frames.image(pass);
        let bytes = img.encode();
        parts.push(json!({"pass": pass, "format": img.file_extension(), "offset": payload.len(), "len": bytes.len()}));
        payload.extend_from_slice(&bytes);
    }
    let header = json!({
        "type": "frame",
        "tick": frames.tick,
        "width": frames.rgb.width,
        "height": frames.rgb.height,
        "uav": frames.uav,
        "parts": parts,
        "annotation": ann,
        "payload_len": payload.len(),
    });
    (serde_json::to_vec(&header).expect("header serializes"), payload)
}

struct SimLoop {
    session: Session,
    pacing: Pacing,
    record_dir: PathBuf,
    recording: Option<Recording>,
    subscribers: Vec<Subscriber>,
    clips_recorded: u32,
}

impl SimLoop {
    fn new(session: Session, pacing: Pacing, record_dir: PathBuf) -> Self {
        SimLoop { session, pacing, record_dir, recording: None, subscribers: Vec::new(), clips_recorded: 0 }
    }

    fn run(mut self, rx: Receiver<Request>, stop: Arc<AtomicBool>) {
        let period = Duration::from_secs_f64(DT);
        let mut deadline = Instant::now() + period;
        while !stop.load(Ordering::SeqCst) {
            // Handle commands until the next tick is due.
            loop {
                let wait = match self.pacing {
                    Pacing::Realtime => deadline.saturating_duration_since(Instant::now()),
                    Pacing::Batch => Duration::ZERO,
                };
                match rx.recv_timeout(wait) {
                    Ok(req) => self.handle(req),
                    Err(RecvTimeoutError::Timeout) => break,
                    Err(RecvTimeoutError::Disconnected) => return,
                }
                if self.pacing == Pacing::Realtime && Instant::now() >= deadline {
                    break;
                }
            }
            if let Err(e) = self.tick() {
                log::error!("tick failed: {e}");
            }
            deadline += period;
            let now = Instant::now();
            if now > deadline + period * 30 {
                // Too far behind to catch up; resynchronize instead of bursting.
                deadline = now + period;
            }
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.session.step()?;
        let tick = self.session.tick();
        let due: Vec<usize> = (0..self.subscribers.len()).filter(|&i| tick % self.subscribers[i].every as u64 == 0).collect();
        if self.recording.is_none() && due.is_empty() {
            return Ok(());
        }
        let frames = self.session.capture();
        let ann = self.session.annotate(&frames)?;
        if let Some(rec) = &mut self.recording {
            rec.sink.write_frame(rec.frames, &frames, &ann)?;
            rec.frames += 1;
        }
        let mut dead = Vec::new();
        for i in due {
            let s = &self.subscribers[i];
            let (header, payload) = encode_frame_message(&frames, &s.passes, Some(&ann));
            if s.out.send(Outbound::Frame(header, Arc::new(payload))).is_err() {
                dead.push(s.conn);
            }
        }
        self.subscribers.retain(|s| !dead.contains(&s.conn));
        Ok(())
    }

    fn handle(&mut self, req: Request) {
        match req {
            Request::Reply(out, v) => {
                let _ = out.send(Outbound::Json(v));
            }
            Request::Disconnect(conn) => self.subscribers.retain(|s| s.conn != conn),
            Request::Command(conn, cmd, out) => {
                let id = cmd.request_id().to_string();
                let upgrade = matches!(cmd, Command::Subscribe { .. });
                let reply = match self.execute(conn, cmd, &out) {
                    Ok(payload) => ok_response(&id, payload),
                    Err(e) => error_response(Some(&id), e.code(), &e.to_string()),
                };
                let ok = reply["status"] == "ok";
                let _ = out.send(if upgrade && ok { Outbound::Upgrade(reply) } else { Outbound::Json(reply) });
            }
        }
    }

    fn execute(&mut self, conn: u64, cmd: Command, out: &Sender<Outbound>) -> Result<Value> {
        let s = &mut self.session;
        match cmd {
            Command::Reset { seed, .. } => {
                self.recording = None;
                s.reset(seed)?;
                Ok(json!({"tick": s.tick(), "seed": s.world().seed}))
            }
            Command::SetVelocity { vx, vy, vz, yaw, .. } => {
                s.set_velocity(vx, vy, vz, yaw)?;
                Ok(json!({"control": s.control()}))
            }
            Command::SetAltitude { z, .. } => {
                s.set_altitude(z)?;
                Ok(json!({"z": s.uav().pos.z}))
            }
            Command::SetCameraPitch { pitch, .. } => {
                s.set_pitch(pitch)?;
                Ok(json!({"pitch": s.uav().pitch}))
            }
            Command::GetImages { passes, annotate, .. } => {
                if passes.is_empty() {
                    return Err(Error::InvalidCommand("no passes requested".into()));
                }
                let frames = s.capture();
                let mut images = serde_json::Map::new();
                for pass in passes {
                    let img = frames.image(pass);
                    images.insert(
                        pass.short_name().into(),
                        json!({"format": img.file_extension(), "width": img.width, "height": img.height, "data": BASE64.encode(img.encode())}),
                    );
                }
                let ann = if annotate { Some(s.annotate(&frames)?) } else { None };
                Ok(json!({"tick": frames.tick, "uav": frames.uav, "images": images, "annotation": ann}))
            }
            Command::StartRecording { clip_id, .. } => {
                if self.recording.is_some() {
                    return Err(Error::InvalidCommand("already recording".into()));
                }
                self.clips_recorded += 1;
                let clip_id = clip_id.unwrap_or_else(|| format!("live_{:04}_t{}", self.clips_recorded, s.tick()));
                if clip_id.is_empty() || clip_id.contains(['/', '\\']) || clip_id.starts_with('.') {
                    return Err(Error::InvalidCommand(format!("bad clip id {clip_id:?}")));
                }
                let dir = self.record_dir.join(&clip_id);
                let sink = DirectorySink::create(&dir)?;
                self.recording = Some(Recording { clip_id: clip_id.clone(), dir: dir.clone(), sink, frames: 0, start_tick: s.tick() });
                Ok(json!({"clip_id": clip_id, "dir": dir}))
            }
            Command::StopRecording { .. } => {
                let rec = self.recording.take().ok_or_else(|| Error::InvalidCommand("not recording".into()))?;
                let label = dominant_label(s.sim());
                let entry = json!({
                    "clip_id": rec.clip_id,
                    "label": label,
                    "frames": rec.frames,
                    "start_tick": rec.start_tick,
                    "end_tick": s.tick(),
                    "dir": rec.dir,
                });
                register_recording(&self.record_dir, &entry)?;
                Ok(entry)
            }
            Command::GetState { .. } => Ok(state_payload(s, self.recording.as_ref())),
            Command::LoadScenario { script, .. } => {
                self.recording = None;
                s.load_scenario(script)?;
                Ok(json!({"tick": s.tick(), "agents": s.sim().agents.len(), "groups": s.sim().groups.len()}))
            }
            Command::Subscribe { every, passes, .. } => {
                if every == 0 || passes.is_empty() {
                    return Err(Error::InvalidCommand("subscribe needs every >= 1 and at least one pass".into()));
                }
                self.subscribers.retain(|x| x.conn != conn);
                self.subscribers.push(Subscriber { conn, every, passes: passes.clone(), out: out.clone() });
                Ok(json!({"every": every, "passes": passes, "framing": "u32be-header-json+payload"}))
            }
        }
    }
}

fn dominant_label(sim: &crate::behavior::SimState) -> crate::behavior::Scenario {
    use crate::behavior::Scenario;
    let violent = sim.agents.iter().filter(|a| sim.scenario_of(a) == Some(Scenario::Violent)).count();
    if sim.agents.is_empty() || 2 * violent < sim.agents.len() {
        Scenario::NonViolent
    } else {
        Scenario::Violent
    }
}

/// Appends a finished live recording to `recordings.json` in the record directory.
fn register_recording(dir: &std::path::Path, entry: &Value) -> Result<()> {
    let path = dir.join("recordings.json");
    let mut doc: Value = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => json!({"dataset": "live", "clips": []}),
    };
    doc["clips"].as_array_mut().ok_or_else(|| Error::InvalidInput("recordings.json has no clip list".into()))?.push(entry.clone());
    std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn state_payload(s: &Session, rec: Option<&Recording>) -> Value {
    let sim = s.sim();
    let groups: Vec<Value> = sim
        .groups
        .iter()
        .map(|g| json!({"id": g.id, "scenario": g.scenario, "anchor": g.anchor, "size": g.member_ids.len()}))
        .collect();
    json!({
        "tick": sim.tick,
        "seed": s.world().seed,
        "uav": s.uav(),
        "control": s.control(),
        "agent_count": sim.agents.len(),
        "groups": groups,
        "recording": rec.map(|r| json!({"clip_id": r.clip_id, "frames": r.frames})),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_commands() {
        let c = parse_command(r#"{"op":"SetVelocity","request_id":"a","vx":1,"vy":0,"vz":0}"#).unwrap();
        assert_eq!(c, Command::SetVelocity { request_id: "a".into(), vx: 1.0, vy: 0.0, vz: 0.0, yaw: None });
        let c = parse_command(r#"{"op":"GetImages","request_id":"b","passes":["rgb","seg","depth"]}"#).unwrap();
        assert_eq!(c, Command::GetImages { request_id: "b".into(), passes: Pass::ALL.to_vec(), annotate: false });
        let c = parse_command(r#"{"op":"SetAltitude","request_id":"c","altitude":9}"#).unwrap();
        assert_eq!(c, Command::SetAltitude { request_id: "c".into(), z: 9.0 });
    }

    #[test]
    fn parse_failures_have_codes() {
        assert_eq!(parse_command("{nope").unwrap_err().1, "parse");
        let (id, code, _) = parse_command(r#"{"op":"Fly","request_id":"x"}"#).unwrap_err();
        assert_eq!((id.as_deref(), code), (Some("x"), "invalid_command"));
        assert_eq!(parse_command(r#"{"op":"GetState"}"#).unwrap_err().1, "invalid_command");
        assert!(parse_command(r#"{"op":"GetState","request_id":"y","extra":1}"#).is_err());
    }

    #[test]
    fn frame_message_layout() {
        let mut s = Session::with_agents(1, 2, 0).unwrap();
        let f = s.capture();
        let (header, payload) = encode_frame_message(&f, &[Pass::Segmentation, Pass::Depth], None);
        let h: Value = serde_json::from_slice(&header).unwrap();
        assert_eq!(h["payload_len"], payload.len());
        let parts = h["parts"].as_array().unwrap();
        assert_eq!(parts.len(), 2);
        let depth_off = parts[1]["offset"].as_u64().unwrap() as usize;
        assert_eq!(depth_off, f.seg.encode().len());
        assert_eq!(&payload[depth_off..], &f.depth.encode()[..]);
    }
}
