//! Brute-force oracles and scenario fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use uavcrowd::annotate::MIN_COMPONENT_PIXELS;
use uavcrowd::behavior::{
    step, Activity, EventKind, GroupSpec, Scenario, ScenarioScript, SimState, SpawnConfig, DT, HEARING_RADIUS,
    MAX_AGENT_SPEED,
};
use uavcrowd::geom::Vec2;
use uavcrowd::render::{Image, Pass, SegPalette};
use uavcrowd::world::{generate_world, TileKind, TileMix, World};

/// `[x_min, y_min, x_max, y_max]`, inclusive.
pub type Rect = [u32; 4];

/// Components by breadth-first flood fill over the 8-neighborhood.
pub fn flood_fill(mask: &[bool], w: u32, h: u32) -> Vec<(usize, Rect)> {
    let (w, h) = (w as i64, h as i64);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 0;
        let mut r = [u32::MAX, u32::MAX, 0, 0];
        while let Some(i) = queue.pop_front() {
            count += 1;
            let (x, y) = (i as i64 % w, i as i64 / w);
            r = [r[0].min(x as u32), r[1].min(y as u32), r[2].max(x as u32), r[3].max(y as u32)];
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if count >= MIN_COMPONENT_PIXELS {
            out.push((count, r));
        }
    }
    out.sort_by_key(|(_, r)| (r[1], r[0], r[3], r[2]));
    out
}

/// Whether two rectangles, each grown by `gap` on all sides, share a pixel.
pub fn dilated_overlap(a: Rect, b: Rect, gap: u32) -> bool {
    let (g, a, b) = (gap as i64, a.map(i64::from), b.map(i64::from));
    a[0] - g <= b[2] + g && b[0] - g <= a[2] + g && a[1] - g <= b[3] + g && b[1] - g <= a[3] + g
}

fn union(a: Rect, b: Rect) -> Rect {
    [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])]
}

/// Repeatedly fuses any two groups whose boxes are within `gap` until none are.
pub fn closure_groups(rects: &[Rect], gap: u32) -> Vec<(Rect, usize)> {
    let mut groups: Vec<(Rect, usize)> = rects.iter().map(|&r| (r, 1)).collect();
    'outer: loop {
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if dilated_overlap(groups[i].0, groups[j].0, gap) {
                    let (r, n) = groups.swap_remove(j);
                    groups[i] = (union(groups[i].0, r), groups[i].1 + n);
                    continue 'outer;
                }
            }
        }
        break;
    }
    groups.sort_by_key(|(r, _)| (r[1], r[0], r[3], r[2]));
    groups
}

/// Random mask mixing blobs, rectangles and speckle.
pub fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<bool> {
    let n = (w * h) as usize;
    match rng.random_range(0..3) {
        0 => {
            let p = rng.random_range(0.05..0.6);
            (0..n).map(|_| rng.random_bool(p)).collect()
        }
        1 => {
            let mut m = vec![false; n];
            for _ in 0..rng.random_range(0..12) {
                let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
                let (x1, y1) = ((x0 + rng.random_range(0..w.min(20))).min(w - 1), (y0 + rng.random_range(0..h.min(20))).min(h - 1));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        m[(y * w + x) as usize] = true;
                    }
                }
            }
            for v in m.iter_mut() {
                if rng.random_bool(0.02) {
                    *v = !*v;
                }
            }
            m
        }
        _ => {
            let mut m = vec![false; n];
            for _ in 0..rng.random_range(0..8) {
                let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
                let r = rng.random_range(0.5..8.0);
                for y in 0..h {
                    for x in 0..w {
                        if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                            m[(y * w + x) as usize] = true;
                        }
                    }
                }
            }
            m
        }
    }
}

/// Segmentation image with `mask` in the agent color and other palette or near-miss colors elsewhere.
pub fn mask_to_seg(rng: &mut ChaCha8Rng, mask: &[bool], w: u32, h: u32) -> Image {
    let decoys = [SegPalette::GROUND, SegPalette::ROAD, SegPalette::BUILDING, SegPalette::SKY, [81, 13, 37], [80, 13, 36]];
    let mut data = Vec::with_capacity(mask.len() * 3);
    for &on in mask {
        let c = if on { SegPalette::AGENT } else { decoys[rng.random_range(0..decoys.len())] };
        data.extend_from_slice(&c);
    }
    Image::new_rgb(w, h, Pass::Segmentation, data).expect("sized buffer")
}

/// SHA-256 over every file under `dir`, keyed by relative path in sorted order.
pub fn dir_digest(dir: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(fs::read(&f).expect("readable file"));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Tile kind under `p` by nearest tile center, `None` off the map.
pub fn tile_by_nearest_center(world: &World, p: Vec2) -> Option<TileKind> {
    let (d, t) = world
        .tiles()
        .iter()
        .map(|t| (world.center_of(t.coord).distance(p), t))
        .min_by(|a, b| a.0.total_cmp(&b.0))?;
    // Anything past the circumradius of the nearest tile is outside every hex.
    (d <= world.tile_size).then_some(t.kind)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct BehaviorTally {
    pub ticks: u64,
    pub agent_ticks: u64,
    pub gunshots: u64,
    pub flee_checks: u64,
}

/// A crowd with shooters and brawlers next to bystander groups.
pub fn mixed_script(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = vec![
        GroupSpec { size: rng.random_range(2..=4), scenario: Scenario::Violent, activities: vec![Activity::Shoot] },
        GroupSpec {
            size: rng.random_range(3..=8),
            scenario: Scenario::Violent,
            activities: vec![Activity::Chase, Activity::Punch, Activity::Kick],
        },
    ];
    for _ in 0..rng.random_range(2..=4) {
        groups.push(GroupSpec {
            size: rng.random_range(4..=12),
            scenario: Scenario::NonViolent,
            activities: vec![Activity::Talk, Activity::Walk, Activity::Dance, Activity::Phone, Activity::Disperse],
        });
    }
    ScenarioScript { name: None, seed, duration_s: 10.0, groups }
}

/// Runs `runs` crowds for `ticks_per_run` ticks each and checks the per-tick invariants:
/// agents never stand on buildings, per-tick displacement is within the speed bound,
/// bystanders in earshot of a gunshot head away from it on the next tick, and
/// non-violent group members never hold a violent activity.
pub fn check_behavior(runs: u64, ticks_per_run: u64, seed: u64) -> Result<BehaviorTally, String> {
    let mut tally = BehaviorTally::default();
    let mut meta = ChaCha8Rng::seed_from_u64(seed);
    for run in 0..runs {
        let wseed: u64 = meta.random();
        let world = generate_world(wseed, meta.random_range(5..=8), meta.random_range(8.0..12.0), TileMix::default())
            .map_err(|e| e.to_string())?;
        let mut sim = if run % 2 == 0 {
            mixed_script(wseed).spawn(&world).map_err(|e| e.to_string())?
        } else {
            let cfg = SpawnConfig { violent_fraction: meta.random_range(0.2..0.8), ..SpawnConfig::with_agents(meta.random_range(20..=80)) };
            uavcrowd::behavior::spawn_state(&world, &cfg).map_err(|e| e.to_string())?
        };
        for _ in 0..ticks_per_run {
            let next = step(&sim, &world, DT);
            check_tick(&world, &sim, &next, &mut tally).map_err(|e| format!("run {run}, tick {}: {e}", sim.tick))?;
            sim = next;
        }
    }
    Ok(tally)
}

fn check_tick(world: &World, prev: &SimState, next: &SimState, tally: &mut BehaviorTally) -> Result<(), String> {
    tally.ticks += 1;
    tally.agent_ticks += next.agents.len() as u64;
    let heard: Vec<Vec2> =
        prev.events.iter().filter(|e| e.kind == EventKind::Gunshot && e.tick + 1 == prev.tick).map(|e| e.origin).collect();
    tally.gunshots += next.events.iter().filter(|e| e.kind == EventKind::Gunshot && e.tick == prev.tick).count() as u64;

    for (a, b) in prev.agents.iter().zip(&next.agents) {
        match tile_by_nearest_center(world, b.pos) {
            Some(TileKind::Building) => return Err(format!("agent {} on a building at {:?}", b.id, b.pos)),
            None => return Err(format!("agent {} off the map at {:?}", b.id, b.pos)),
            _ => {}
        }
        let moved = b.pos.distance(a.pos);
        if moved > MAX_AGENT_SPEED * DT + 1e-9 {
            return Err(format!("agent {} moved {moved} m in one tick", b.id));
        }
        let scenario = prev.scenario_of(a).ok_or("agent without group")?;
        if scenario == Scenario::NonViolent {
            if b.state.activity.is_violent() {
                return Err(format!("bystander {} holds {:?}", b.id, b.state.activity));
            }
            // The agent reacts to the closest shot it heard.
            let nearest = heard
                .iter()
                .map(|&o| (o.distance(a.pos), o))
                .filter(|(d, _)| *d <= HEARING_RADIUS && *d > 1e-6)
                .min_by(|x, y| x.0.total_cmp(&y.0));
            if let Some((_, origin)) = nearest {
                tally.flee_checks += 1;
                if b.state.activity != Activity::Disperse {
                    return Err(format!("bystander {} did not disperse", b.id));
                }
                if Vec2::from_angle(b.heading).dot(origin - a.pos) >= 0.0 {
                    return Err(format!("bystander {} heads toward the gunshot", b.id));
                }
            }
        }
    }
    Ok(())
}

/// A random world and crowd seen from a random pose aimed at one of the agents.
pub fn random_scene(seed: u64, agents: usize) -> (World, SimState, uavcrowd::camera::UavState) {
    use uavcrowd::camera::UavState;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = generate_world(seed, rng.random_range(3..=7), rng.random_range(8.0..12.0), TileMix::default()).expect("world");
    let mut sim = if agents == 0 {
        SimState::empty(seed)
    } else {
        let cfg = SpawnConfig { clustered: rng.random_bool(0.5), ..SpawnConfig::with_agents(agents) };
        uavcrowd::behavior::spawn_state(&world, &cfg).expect("spawn")
    };
    for _ in 0..rng.random_range(0..60) {
        sim = step(&sim, &world, DT);
    }
    let focus = if sim.agents.is_empty() {
        Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
    } else {
        sim.agents[rng.random_range(0..sim.agents.len())].pos
    };
    let altitude = rng.random_range(2.5..40.0);
    let pitch = rng.random_range(20.0f64..90.0).to_radians();
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    (world, sim, UavState::looking_at_ground(focus.x, focus.y, altitude, yaw, pitch))
}
