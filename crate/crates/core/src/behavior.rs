//! Crowd agents: spawning, the activity state machine, and the fixed-step loop.
//!
//! Transition rules, in the order `tick_agent` applies them:
//!
//! 1. `Walk`: pick a random walkable waypoint near the group anchor, follow the
//!    hex path to it, pick a new one on arrival.
//! 2. `Talk`/`Phone`/`Dance`: walk to a slot within 1.5 m of the anchor, perform
//!    for 4-10 s, then re-roll an activity from the group's list.
//! 3. `Chase` while seeking: target the nearest agent outside the group.
//! 4. `Chase` while approaching: inside strike range (1 m) switch to `Punch` or
//!    `Kick`, chosen 50/50.
//! 5. `Punch`/`Kick` perform for 1.2 s, then revert to `Chase`.
//! 6. `Shoot`: perform within 15 m of the target and emit a gunshot on entry and
//!    every 2 s after.
//! 7. Any non-violent agent within 30 m of a gunshot disperses: flee at 4 m/s
//!    for 8 s, then walk.

use std::f64::consts::TAU;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::hex::HexCoord;
use crate::rng::{behavior_stream, substream, Substream};
use crate::world::{find_path, World};

pub const WALK_SPEED: f64 = 1.4;
pub const CHASE_SPEED: f64 = 3.0;
pub const FLEE_SPEED: f64 = 4.0;
pub const MAX_AGENT_SPEED: f64 = 6.0;
pub const STRIKE_RANGE: f64 = 1.0;
pub const STRIKE_DURATION: f64 = 1.2;
pub const SHOOT_RANGE: f64 = 15.0;
pub const SHOT_INTERVAL: f64 = 2.0;
pub const HEARING_RADIUS: f64 = 30.0;
pub const FLEE_DURATION: f64 = 8.0;
pub const PERSONAL_SPACE: f64 = 0.6;
pub const ANCHOR_RADIUS: f64 = 1.5;
pub const PERFORM_MIN: f64 = 4.0;
pub const PERFORM_MAX: f64 = 10.0;
pub const SPAWN_RADIUS: f64 = 5.0;
/// Radius within which melee and shooting agents look for targets outside their group.
pub const TARGET_SEARCH_RADIUS: f64 = 30.0;
/// Wall clearance that starts repelling agents from building tiles.
pub const WALL_MARGIN: f64 = 0.5;
/// Canonical step length.
pub const DT: f64 = 1.0 / 30.0;

const WAYPOINT_RINGS: u32 = 3;
const SLOT_TOLERANCE: f64 = 0.35;
const WAYPOINT_TOLERANCE: f64 = 0.25;
/// Upper bound on the avoidance vector relative to a unit goal direction. Below
/// one, so steering never reverses the goal direction.
const MAX_AVOIDANCE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Punch,
    Kick,
    Shoot,
    Chase,
    Talk,
    Walk,
    Disperse,
    Dance,
    Phone,
}

impl Activity {
    pub const ALL: [Activity; 9] = [
        Activity::Punch,
        Activity::Kick,
        Activity::Shoot,
        Activity::Chase,
        Activity::Talk,
        Activity::Walk,
        Activity::Disperse,
        Activity::Dance,
        Activity::Phone,
    ];

    pub fn scenario(self) -> Scenario {
        classify_scenario(self)
    }

    pub fn is_violent(self) -> bool {
        self.scenario() == Scenario::Violent
    }

    /// Allowed in a group of `scenario`. Dispersal is a reaction available to both.
    pub fn allowed_in(self, scenario: Scenario) -> bool {
        self == Activity::Disperse || self.scenario() == scenario
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Violent,
    NonViolent,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Violent => "violent",
            Scenario::NonViolent => "non_violent",
        }
    }
}

pub fn classify_scenario(act: Activity) -> Scenario {
    match act {
        Activity::Punch | Activity::Kick | Activity::Shoot | Activity::Chase => Scenario::Violent,
        _ => Scenario::NonViolent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Seeking,
    Approaching,
    Performing,
    Fleeing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorState {
    pub activity: Activity,
    pub phase: Phase,
    /// Seconds left in the current phase; never negative.
    pub timer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    Agent { id: u32 },
    Waypoint { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u32,
    pub group_id: u32,
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub state: BehaviorState,
    pub target: Option<Target>,
    /// Remaining hex cells of the current walk.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub route: Vec<HexCoord>,
    /// Origin being fled from while dispersing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flee_from: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: u32,
    pub member_ids: Vec<u32>,
    pub scenario: Scenario,
    pub anchor: Vec2,
    /// Activities members may hold; re-rolls draw from this list.
    pub activities: Vec<Activity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Gunshot,
    ScenarioStart,
    ScenarioEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub origin: Vec2,
    pub tick: u64,
}

/// Everything an agent can see while deciding its next move.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhood<'a> {
    pub world: &'a World,
    pub group: Option<&'a Group>,
    /// Snapshot of all agents at the start of the tick, sorted by id.
    pub agents: &'a [Agent],
    pub tick: u64,
}

impl Neighborhood<'_> {
    fn agent(&self, id: u32) -> Option<&Agent> {
        self.agents.binary_search_by_key(&id, |a| a.id).ok().map(|i| &self.agents[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub seed: u64,
    pub tick: u64,
    pub agents: Vec<Agent>,
    pub groups: Vec<Group>,
    pub events: Vec<SimEvent>,
}

impl SimState {
    pub fn empty(seed: u64) -> Self {
        SimState { seed, tick: 0, agents: Vec::new(), groups: Vec::new(), events: Vec::new() }
    }

    pub fn new(seed: u64, groups: Vec<Group>, mut agents: Vec<Agent>) -> Self {
        agents.sort_by_key(|a| a.id);
        let events = groups
            .iter()
            .map(|g| SimEvent { kind: EventKind::ScenarioStart, origin: g.anchor, tick: 0 })
            .collect();
        SimState { seed, tick: 0, agents, groups, events }
    }

    pub fn group(&self, id: u32) -> Option<&Group> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn agent(&self, id: u32) -> Option<&Agent> {
        self.agents.binary_search_by_key(&id, |a| a.id).ok().map(|i| &self.agents[i])
    }

    pub fn scenario_of(&self, agent: &Agent) -> Option<Scenario> {
        self.group(agent.group_id).map(|g| g.scenario)
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex_digest(&bytes)
    }

    pub fn step(&self, world: &World, dt: f64) -> SimState {
        step(self, world, dt)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Advances the simulation by one tick.
///
/// Agents are ticked in ascending id order against the start-of-tick snapshot
/// and hear the gunshots emitted during the previous tick.
pub fn step(sim: &SimState, world: &World, dt: f64) -> SimState {
    let mut rng = behavior_stream(sim.seed, sim.tick);
    let heard: Vec<SimEvent> = sim.events.iter().filter(|e| e.tick + 1 == sim.tick).copied().collect();
    let mut agents = Vec::with_capacity(sim.agents.len());
    let mut emitted = Vec::new();
    for a in &sim.agents {
        let nb = Neighborhood { world, group: sim.group(a.group_id), agents: &sim.agents, tick: sim.tick };
        let (next, event) = tick_agent(a, &nb, &heard, dt, &mut rng);
        agents.push(next);
        emitted.extend(event);
    }
    let mut events = sim.events.clone();
    events.extend(emitted);
    SimState { seed: sim.seed, tick: sim.tick + 1, agents, groups: sim.groups.clone(), events }
}

struct Motion {
    dir: Option<Vec2>,
    speed: f64,
}

impl Motion {
    const IDLE: Motion = Motion { dir: None, speed: 0.0 };

    fn toward(from: Vec2, to: Vec2, speed: f64) -> Motion {
        Motion { dir: (to - from).normalized(), speed }
    }
}

/// One agent update. Returns the new agent and a gunshot, if it fired.
pub fn tick_agent<R: Rng>(
    a: &Agent,
    perception: &Neighborhood<'_>,
    events: &[SimEvent],
    dt: f64,
    rng: &mut R,
) -> (Agent, Option<SimEvent>) {
    let mut next = a.clone();
    let Some(group) = perception.group.filter(|_| dt > 0.0 && dt.is_finite()) else {
        next.speed = 0.0;
        return (next, None);
    };

    if group.scenario == Scenario::NonViolent {
        if let Some(origin) = nearest_gunshot(events, a.pos) {
            start_flee(&mut next, origin, rng);
        }
    }

    let mut fired = None;
    let motion = match next.state.activity {
        Activity::Walk => walk(&mut next, group, perception, rng),
        Activity::Talk | Activity::Phone | Activity::Dance => gather(&mut next, group, dt, rng),
        Activity::Chase | Activity::Punch | Activity::Kick => melee(&mut next, group, perception, dt, rng),
        Activity::Shoot => {
            let (m, shot) = shoot(&mut next, group, perception, dt);
            if shot {
                fired = Some(SimEvent { kind: EventKind::Gunshot, origin: a.pos, tick: perception.tick });
            }
            m
        }
        Activity::Disperse => disperse(&mut next, group, dt, rng),
    };

    match motion.dir {
        Some(dir) if motion.speed > 0.0 => {
            let avoid = avoidance(&next, perception);
            let steer = (dir + avoid).normalized().unwrap_or(dir);
            next.heading = steer.angle();
            next.speed = motion.speed.min(MAX_AGENT_SPEED);
            next.pos = slide_move(perception.world, next.pos, steer * (next.speed * dt));
        }
        _ => next.speed = 0.0,
    }
    next.state.timer = next.state.timer.max(0.0);
    (next, fired)
}

fn nearest_gunshot(events: &[SimEvent], pos: Vec2) -> Option<Vec2> {
    events
        .iter()
        .filter(|e| e.kind == EventKind::Gunshot)
        .map(|e| (e.origin.distance(pos), e.origin))
        .filter(|(d, _)| *d <= HEARING_RADIUS)
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, o)| o)
}

fn start_flee<R: Rng>(a: &mut Agent, origin: Vec2, rng: &mut R) {
    let away = (a.pos - origin).normalized().unwrap_or_else(|| Vec2::from_angle(rng.random_range(0.0..TAU)));
    a.state = BehaviorState { activity: Activity::Disperse, phase: Phase::Fleeing, timer: FLEE_DURATION };
    a.heading = away.angle();
    a.flee_from = Some(origin);
    a.target = None;
    a.route.clear();
}

fn reroll<R: Rng>(a: &mut Agent, group: &Group, rng: &mut R) {
    let activity = *group.activities.choose(rng).unwrap_or(&a.state.activity);
    a.target = None;
    a.route.clear();
    a.flee_from = None;
    a.state = BehaviorState { activity, phase: initial_phase(activity), timer: 0.0 };
    if activity == Activity::Disperse {
        start_flee(a, group.anchor, rng);
    }
}

fn initial_phase(activity: Activity) -> Phase {
    match activity {
        Activity::Walk => Phase::Performing,
        Activity::Talk | Activity::Phone | Activity::Dance => Phase::Approaching,
        Activity::Disperse => Phase::Fleeing,
        Activity::Chase | Activity::Punch | Activity::Kick | Activity::Shoot => Phase::Seeking,
    }
}

fn walk<R: Rng>(a: &mut Agent, group: &Group, nb: &Neighborhood<'_>, rng: &mut R) -> Motion {
    a.state.phase = Phase::Performing;
    for attempt in 0..2 {
        while let Some(&cell) = a.route.first() {
            if a.pos.distance(nb.world.center_of(cell)) < WAYPOINT_TOLERANCE {
                a.route.remove(0);
            } else {
                break;
            }
        }
        if let Some(&cell) = a.route.first() {
            return Motion::toward(a.pos, nb.world.center_of(cell), WALK_SPEED);
        }
        if attempt == 0 && !plan_route(a, group, nb, rng) {
            break;
        }
    }
    a.target = None;
    Motion::IDLE
}

fn plan_route<R: Rng>(a: &mut Agent, group: &Group, nb: &Neighborhood<'_>, rng: &mut R) -> bool {
    let world = nb.world;
    let here = world.hex_of(a.pos);
    let home = world.hex_of(group.anchor);
    let candidates: Vec<HexCoord> = world
        .nav
        .nodes()
        .iter()
        .copied()
        .filter(|c| *c != here && c.distance(home) <= WAYPOINT_RINGS)
        .collect();
    let Some(&goal) = candidates.choose(rng) else { return false };
    match find_path(&world.nav, here, goal) {
        Ok(path) => {
            let c = world.center_of(goal);
            a.target = Some(Target::Waypoint { x: c.x, y: c.y });
            a.route = path;
            true
        }
        Err(_) => false,
    }
}

/// Standing slot for member `k` of `n`: a sunflower spiral inside the anchor radius.
fn slot(group: &Group, agent_id: u32) -> Vec2 {
    const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
    let n = group.member_ids.len().max(1) as f64;
    let k = group.member_ids.iter().position(|&m| m == agent_id).unwrap_or(0) as f64;
    let r = 0.93 * ANCHOR_RADIUS * ((k + 0.5) / n).sqrt();
    group.anchor + Vec2::from_angle(k * GOLDEN_ANGLE) * r
}

fn gather<R: Rng>(a: &mut Agent, group: &Group, dt: f64, rng: &mut R) -> Motion {
    let spot = slot(group, a.id);
    match a.state.phase {
        Phase::Performing => {
            a.state.timer -= dt;
            if a.state.timer <= 0.0 {
                reroll(a, group, rng);
            }
            Motion::IDLE
        }
        _ => {
            a.state.phase = Phase::Approaching;
            a.target = Some(Target::Waypoint { x: spot.x, y: spot.y });
            if a.pos.distance(group.anchor) <= ANCHOR_RADIUS && a.pos.distance(spot) <= SLOT_TOLERANCE {
                a.state.phase = Phase::Performing;
                a.state.timer = rng.random_range(PERFORM_MIN..=PERFORM_MAX);
                Motion::IDLE
            } else {
                Motion::toward(a.pos, spot, WALK_SPEED)
            }
        }
    }
}

/// Nearest agent outside the group within the search radius, else the nearest
/// other group member. Ties go to the lower id.
fn pick_target(a: &Agent, nb: &Neighborhood<'_>) -> Option<u32> {
    let nearest = |same_group: bool, limit: f64| {
        nb.agents
            .iter()
            .filter(|o| o.id != a.id && (o.group_id == a.group_id) == same_group)
            .map(|o| (o.pos.distance(a.pos), o.id))
            .filter(|(d, _)| *d <= limit)
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|(_, id)| id)
    };
    nearest(false, TARGET_SEARCH_RADIUS).or_else(|| nearest(true, f64::INFINITY))
}

fn target_pos(a: &Agent, nb: &Neighborhood<'_>) -> Option<Vec2> {
    match a.target {
        Some(Target::Agent { id }) => nb.agent(id).map(|t| t.pos),
        _ => None,
    }
}

fn face(a: &mut Agent, at: Vec2) {
    if let Some(d) = (at - a.pos).normalized() {
        a.heading = d.angle();
    }
}

fn melee<R: Rng>(a: &mut Agent, _group: &Group, nb: &Neighborhood<'_>, dt: f64, rng: &mut R) -> Motion {
    if a.state.phase == Phase::Performing {
        a.state.timer -= dt;
        if let Some(p) = target_pos(a, nb) {
            face(a, p);
        }
        if a.state.timer <= 0.0 {
            a.state = BehaviorState { activity: Activity::Chase, phase: Phase::Seeking, timer: 0.0 };
            a.target = None;
        }
        return Motion::IDLE;
    }
    if a.state.phase != Phase::Approaching || target_pos(a, nb).is_none() {
        a.state.phase = Phase::Seeking;
        a.target = pick_target(a, nb).map(|id| Target::Agent { id });
        if a.target.is_none() {
            return Motion::IDLE;
        }
        a.state.phase = Phase::Approaching;
    }
    let Some(p) = target_pos(a, nb) else { return Motion::IDLE };
    if a.pos.distance(p) < STRIKE_RANGE {
        let activity = match a.state.activity {
            Activity::Chase if rng.random_bool(0.5) => Activity::Punch,
            Activity::Chase => Activity::Kick,
            own => own,
        };
        a.state = BehaviorState { activity, phase: Phase::Performing, timer: STRIKE_DURATION };
        face(a, p);
        return Motion::IDLE;
    }
    Motion::toward(a.pos, p, CHASE_SPEED)
}

/// Returns the motion and whether a shot was fired this tick.
fn shoot(a: &mut Agent, _group: &Group, nb: &Neighborhood<'_>, dt: f64) -> (Motion, bool) {
    if target_pos(a, nb).is_none() {
        a.state.phase = Phase::Seeking;
        a.target = pick_target(a, nb).map(|id| Target::Agent { id });
        if a.target.is_none() {
            return (Motion::IDLE, false);
        }
        a.state.phase = Phase::Approaching;
    }
    let Some(p) = target_pos(a, nb) else { return (Motion::IDLE, false) };
    let in_range = a.pos.distance(p) <= SHOOT_RANGE;
    match a.state.phase {
        Phase::Performing if in_range => {
            face(a, p);
            a.state.timer -= dt;
            if a.state.timer <= 0.0 {
                a.state.timer += SHOT_INTERVAL;
                return (Motion::IDLE, true);
            }
            (Motion::IDLE, false)
        }
        _ if in_range => {
            a.state.phase = Phase::Performing;
            a.state.timer = SHOT_INTERVAL;
            face(a, p);
            (Motion::IDLE, true)
        }
        _ => {
            a.state.phase = Phase::Approaching;
            (Motion::toward(a.pos, p, WALK_SPEED), false)
        }
    }
}

fn disperse<R: Rng>(a: &mut Agent, group: &Group, dt: f64, rng: &mut R) -> Motion {
    if a.state.phase != Phase::Fleeing || a.flee_from.is_none() {
        start_flee(a, group.anchor, rng);
    }
    a.state.timer -= dt;
    if a.state.timer <= 0.0 {
        a.state = BehaviorState { activity: Activity::Walk, phase: Phase::Performing, timer: 0.0 };
        a.flee_from = None;
        return Motion::IDLE;
    }
    let origin = a.flee_from.expect("fleeing agents carry an origin");
    let dir = (a.pos - origin).normalized().unwrap_or_else(|| Vec2::from_angle(a.heading));
    Motion { dir: Some(dir), speed: FLEE_SPEED }
}

/// Repulsion from agents inside personal space and from nearby building walls.
fn avoidance(a: &Agent, nb: &Neighborhood<'_>) -> Vec2 {
    let mut push = Vec2::ZERO;
    for o in nb.agents {
        if o.id == a.id {
            continue;
        }
        let d = a.pos - o.pos;
        let dist = d.length();
        if dist < PERSONAL_SPACE && dist > 1e-9 {
            push = push + d * ((PERSONAL_SPACE - dist) / (PERSONAL_SPACE * dist));
        }
    }
    let world = nb.world;
    let here = world.hex_of(a.pos);
    let center = world.center_of(here);
    let inradius = world.inradius();
    for n in here.neighbors() {
        if world.tile(n).is_some_and(|t| t.kind.is_walkable()) {
            continue;
        }
        let Some(out) = (world.center_of(n) - center).normalized() else { continue };
        let to_edge = inradius - (a.pos - center).dot(out);
        if to_edge < WALL_MARGIN {
            push = push - out * ((WALL_MARGIN - to_edge.max(0.0)) / WALL_MARGIN);
        }
    }
    let len = push.length();
    if len > MAX_AVOIDANCE {
        push * (MAX_AVOIDANCE / len)
    } else {
        push
    }
}

/// Moves by `delta` unless that lands off the walkable map; then tries each axis alone.
fn slide_move(world: &World, pos: Vec2, delta: Vec2) -> Vec2 {
    [pos + delta, Vec2::new(pos.x + delta.x, pos.y), Vec2::new(pos.x, pos.y + delta.y)]
        .into_iter()
        .find(|p| world.is_walkable_point(*p))
        .unwrap_or(pos)
}

/// One group in a spawn plan or scenario script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    pub scenario: Scenario,
    pub activities: Vec<Activity>,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=20).contains(&self.size) {
            return Err(Error::InvalidParameter(format!("group size {} outside 2..=20", self.size)));
        }
        if self.activities.is_empty() {
            return Err(Error::InvalidParameter("group has no activities".into()));
        }
        if let Some(bad) = self.activities.iter().find(|a| !a.allowed_in(self.scenario)) {
            return Err(Error::InvalidParameter(format!(
                "activity {bad:?} not allowed in a {} group",
                self.scenario.as_str()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnConfig {
    pub total_agents: usize,
    pub violent_fraction: f64,
    pub min_group_size: usize,
    pub max_group_size: usize,
    pub violent_activities: Vec<Activity>,
    pub non_violent_activities: Vec<Activity>,
    /// Place group anchors on adjacent tiles instead of spreading them over the map.
    pub clustered: bool,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        SpawnConfig {
            total_agents: 150,
            violent_fraction: 0.5,
            min_group_size: 3,
            max_group_size: 8,
            violent_activities: vec![Activity::Chase, Activity::Punch, Activity::Kick, Activity::Shoot],
            non_violent_activities: vec![Activity::Talk, Activity::Walk, Activity::Dance, Activity::Phone],
            clustered: false,
        }
    }
}

impl SpawnConfig {
    pub fn with_agents(total_agents: usize) -> Self {
        SpawnConfig { total_agents, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.total_agents < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 agents, got {}", self.total_agents)));
        }
        if !(0.0..=1.0).contains(&self.violent_fraction) {
            return Err(Error::InvalidParameter(format!("violent_fraction {} outside [0, 1]", self.violent_fraction)));
        }
        let (lo, hi) = (self.min_group_size, self.max_group_size);
        if lo < 2 || hi > 20 || hi + 1 < 2 * lo {
            return Err(Error::InvalidParameter(format!(
                "group size range {lo}..={hi} must satisfy 2 <= min, max <= 20, max >= 2*min - 1"
            )));
        }
        Ok(())
    }
}

/// Splits `cfg.total_agents` into groups and assigns scenarios and activity lists.
pub fn plan_groups<R: Rng>(cfg: &SpawnConfig, rng: &mut R) -> Result<Vec<GroupSpec>> {
    cfg.validate()?;
    let mut sizes = Vec::new();
    let mut remaining = cfg.total_agents;
    while remaining > 0 {
        let size = if remaining <= cfg.max_group_size {
            remaining
        } else {
            let s = rng.random_range(cfg.min_group_size..=cfg.max_group_size);
            if remaining - s < cfg.min_group_size {
                remaining - cfg.min_group_size
            } else {
                s
            }
        };
        sizes.push(size);
        remaining -= size;
    }
    let violent = (cfg.violent_fraction * sizes.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.shuffle(rng);
    let mut specs: Vec<GroupSpec> = sizes
        .iter()
        .map(|&size| GroupSpec { size, scenario: Scenario::NonViolent, activities: cfg.non_violent_activities.clone() })
        .collect();
    for &i in &order[..violent] {
        specs[i].scenario = Scenario::Violent;
        specs[i].activities = cfg.violent_activities.clone();
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Places planned groups: one distinct walkable anchor tile per group, members
/// within `SPAWN_RADIUS` of the anchor on walkable ground.
pub fn place_groups<R: Rng>(
    world: &World,
    specs: &[GroupSpec],
    clustered: bool,
    rng: &mut R,
) -> Result<(Vec<Group>, Vec<Agent>)> {
    for s in specs {
        s.validate()?;
    }
    let walkable: Vec<HexCoord> = world.nav.nodes().to_vec();
    if walkable.is_empty() {
        return Err(Error::Capacity("world has no walkable tiles".into()));
    }
    if specs.len() > walkable.len() {
        return Err(Error::Capacity(format!(
            "{} groups need distinct anchor tiles but only {} are walkable",
            specs.len(),
            walkable.len()
        )));
    }
    let anchors: Vec<HexCoord> = if clustered {
        let first = walkable[rng.random_range(0..walkable.len())];
        bfs_order(world, first).into_iter().take(specs.len()).collect()
    } else {
        let mut shuffled = walkable;
        shuffled.shuffle(rng);
        shuffled.truncate(specs.len());
        shuffled
    };
    if anchors.len() < specs.len() {
        return Err(Error::Capacity("not enough connected walkable tiles for group anchors".into()));
    }

    let mut groups = Vec::with_capacity(specs.len());
    let mut agents: Vec<Agent> = Vec::new();
    for (gi, (spec, cell)) in specs.iter().zip(&anchors).enumerate() {
        let anchor = world.center_of(*cell);
        let mut member_ids = Vec::with_capacity(spec.size);
        for _ in 0..spec.size {
            let pos = sample_spawn_point(world, anchor, &agents, rng)?;
            let activity = *spec.activities.choose(rng).expect("validated non-empty");
            let id = agents.len() as u32;
            let mut agent = Agent {
                id,
                group_id: gi as u32,
                pos,
                heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                speed: 0.0,
                state: BehaviorState { activity, phase: initial_phase(activity), timer: 0.0 },
                target: None,
                route: Vec::new(),
                flee_from: None,
            };
            if activity == Activity::Disperse {
                start_flee(&mut agent, anchor, rng);
            }
            member_ids.push(id);
            agents.push(agent);
        }
        groups.push(Group {
            id: gi as u32,
            member_ids,
            scenario: spec.scenario,
            anchor,
            activities: spec.activities.clone(),
        });
    }
    Ok((groups, agents))
}

fn bfs_order(world: &World, start: HexCoord) -> Vec<HexCoord> {
    let mut seen = std::collections::HashSet::from([start]);
    let mut queue = std::collections::VecDeque::from([start]);
    let mut out = Vec::new();
    while let Some(c) = queue.pop_front() {
        out.push(c);
        for n in world.nav.neighbors_of(c) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    out
}

fn sample_spawn_point<R: Rng>(world: &World, anchor: Vec2, placed: &[Agent], rng: &mut R) -> Result<Vec2> {
    const SPACED_TRIES: usize = 48;
    const TOTAL_TRIES: usize = 256;
    for attempt in 0..TOTAL_TRIES {
        let r = SPAWN_RADIUS * rng.random::<f64>().sqrt();
        let p = anchor + Vec2::from_angle(rng.random_range(0.0..TAU)) * r;
        if !world.is_walkable_point(p) {
            continue;
        }
        if attempt < SPACED_TRIES && placed.iter().any(|o| o.pos.distance(p) < PERSONAL_SPACE) {
            continue;
        }
        return Ok(p);
    }
    Err(Error::Capacity(format!("no walkable spawn point within {SPAWN_RADIUS} m of anchor {anchor:?}")))
}

/// Plans and places groups using `rng`.
pub fn spawn_groups<R: Rng>(world: &World, rng: &mut R, cfg: &SpawnConfig) -> Result<(Vec<Group>, Vec<Agent>)> {
    let specs = plan_groups(cfg, rng)?;
    place_groups(world, &specs, cfg.clustered, rng)
}

/// Spawns onto `world` from its seed's spawning stream.
pub fn spawn_state(world: &World, cfg: &SpawnConfig) -> Result<SimState> {
    let mut rng = substream(world.seed, Substream::Spawning);
    let (groups, agents) = spawn_groups(world, &mut rng, cfg)?;
    Ok(SimState::new(world.seed, groups, agents))
}

/// Reproducible scenario description driving one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub duration_s: f64,
    pub groups: Vec<GroupSpec>,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let script: ScenarioScript = serde_json::from_str(text)?;
        Ok(script)
    }

    pub fn agent_count(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    /// Scenario holding the most agents; ties go to `Violent`.
    pub fn dominant_scenario(&self) -> Scenario {
        let violent: usize = self.groups.iter().filter(|g| g.scenario == Scenario::Violent).map(|g| g.size).sum();
        if 2 * violent >= self.agent_count() {
            Scenario::Violent
        } else {
            Scenario::NonViolent
        }
    }

    /// Random script with `agents` agents split into groups, half of them violent.
    pub fn random(seed: u64, agents: usize, duration_s: f64) -> Result<Self> {
        let mut rng = substream(seed, Substream::Spawning);
        let groups = plan_groups(&SpawnConfig::with_agents(agents), &mut rng)?;
        Ok(ScenarioScript { name: None, seed, duration_s, groups })
    }

    /// Places the script's groups on adjacent tiles of `world`.
    pub fn spawn(&self, world: &World) -> Result<SimState> {
        if self.groups.is_empty() {
            return Err(Error::InvalidScript("script has no groups".into()));
        }
        let mut rng = substream(self.seed, Substream::Spawning);
        // Skip the draws plan_groups would have made so placement is independent of them.
        rng.set_word_pos(1 << 32);
        let (groups, agents) = place_groups(world, &self.groups, true, &mut rng)?;
        Ok(SimState::new(self.seed, groups, agents))
    }
}
