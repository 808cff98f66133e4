//! A steerable simulation: world, crowd, UAV and renderer advanced together.

use crate::annotate::{annotate_frame, FrameAnnotation, DEFAULT_GAP_PX};
use crate::behavior::{spawn_state, ScenarioScript, SimState, SpawnConfig, DT};
use crate::camera::{apply_control, CameraIntrinsics, ControlCommand, UavState, MAX_ALTITUDE, MIN_ALTITUDE};
use crate::error::{Error, Result};
use crate::render::{FrameSet, Renderer};
use crate::world::{World, WorldConfig};

/// How a session populates its world.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Random(SpawnConfig),
    Script(ScenarioScript),
}

pub struct Session {
    world_cfg: WorldConfig,
    population: Population,
    world: World,
    sim: SimState,
    uav: UavState,
    control: ControlCommand,
    renderer: Renderer,
}

impl Session {
    pub fn new(world_cfg: WorldConfig, population: Population, k: CameraIntrinsics) -> Result<Self> {
        let world = world_cfg.generate()?;
        let sim = populate(&world, &population)?;
        let uav = initial_uav(&sim);
        Ok(Session { world_cfg, population, world, sim, uav, control: ControlCommand::default(), renderer: Renderer::new(k)? })
    }

    /// World from `seed` with `agents` randomly grouped agents (none when 0).
    pub fn with_agents(seed: u64, radius: u32, agents: usize) -> Result<Self> {
        let cfg = WorldConfig { radius, ..WorldConfig::with_seed(seed) };
        Session::new(cfg, Population::Random(SpawnConfig::with_agents(agents)), CameraIntrinsics::default())
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn uav(&self) -> &UavState {
        &self.uav
    }

    pub fn control(&self) -> &ControlCommand {
        &self.control
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        self.renderer.intrinsics()
    }

    pub fn tick(&self) -> u64 {
        self.sim.tick
    }

    /// Rebuilds world and crowd from the configuration, optionally with a new seed.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<()> {
        let mut cfg = self.world_cfg;
        if let Some(seed) = seed {
            cfg.seed = seed;
            if let Population::Script(script) = &mut self.population {
                script.seed = seed;
            }
        }
        let world = cfg.generate()?;
        let sim = populate(&world, &self.population)?;
        self.uav = initial_uav(&sim);
        self.world_cfg = cfg;
        self.world = world;
        self.sim = sim;
        self.control = ControlCommand::default();
        Ok(())
    }

    /// Replaces the crowd with the script's groups; the world is regenerated from the script seed.
    pub fn load_scenario(&mut self, script: ScenarioScript) -> Result<()> {
        let cfg = WorldConfig { seed: script.seed, ..self.world_cfg };
        let world = cfg.generate()?;
        let population = Population::Script(script);
        let sim = populate(&world, &population)?;
        self.uav = initial_uav(&sim);
        self.world_cfg = cfg;
        self.population = population;
        self.world = world;
        self.sim = sim;
        self.control = ControlCommand::default();
        Ok(())
    }

    pub fn set_velocity(&mut self, vx: f64, vy: f64, vz: f64, yaw: Option<f64>) -> Result<()> {
        if ![vx, vy, vz].iter().all(|v| v.is_finite()) || yaw.is_some_and(|y| !y.is_finite()) {
            return Err(Error::InvalidCommand("velocity components must be finite".into()));
        }
        self.control = ControlCommand { vx, vy, vz, yaw: yaw.or(self.control.yaw), pitch: self.control.pitch };
        Ok(())
    }

    /// Moves the UAV to altitude `z` immediately, clamped to the flight envelope.
    pub fn set_altitude(&mut self, z: f64) -> Result<()> {
        if !z.is_finite() {
            return Err(Error::InvalidCommand("altitude must be finite".into()));
        }
        self.uav.pos.z = z.clamp(MIN_ALTITUDE, MAX_ALTITUDE);
        Ok(())
    }

    pub fn set_pitch(&mut self, pitch: f64) -> Result<()> {
        if !pitch.is_finite() {
            return Err(Error::InvalidCommand("pitch must be finite".into()));
        }
        let pitch = pitch.clamp(0.0, std::f64::consts::FRAC_PI_2);
        self.uav.pitch = pitch;
        self.control.pitch = Some(pitch);
        Ok(())
    }

    /// Advances UAV and crowd by one fixed step.
    pub fn step(&mut self) -> Result<()> {
        self.uav = apply_control(&self.uav, &self.control, DT)?;
        self.sim = self.sim.step(&self.world, DT);
        Ok(())
    }

    pub fn capture(&mut self) -> FrameSet {
        self.renderer.capture(&self.sim, &self.world, &self.uav)
    }

    pub fn annotate(&self, frames: &FrameSet) -> Result<FrameAnnotation> {
        annotate_frame(&frames.seg, frames.tick, DEFAULT_GAP_PX)
    }
}

fn populate(world: &World, population: &Population) -> Result<SimState> {
    match population {
        Population::Random(cfg) if cfg.total_agents == 0 => Ok(SimState::empty(world.seed)),
        Population::Random(cfg) => spawn_state(world, cfg),
        Population::Script(script) => script.spawn(world),
    }
}

/// Default pose: capture-altitude hover looking at the first group's anchor.
pub fn initial_uav(sim: &SimState) -> UavState {
    let target = sim.groups.first().map(|g| g.anchor).unwrap_or_default();
    UavState::looking_at_ground(
        target.x,
        target.y,
        crate::camera::CAPTURE_ALTITUDE,
        0.0,
        crate::camera::DEFAULT_PITCH_DEG.to_radians(),
    )
}
