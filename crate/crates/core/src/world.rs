//! Procedural hex-tile city and its walkability graph.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::hex::{self, HexCoord};
use crate::rng::{substream, Substream};

pub const DEFAULT_RADIUS: u32 = 8;
pub const DEFAULT_TILE_SIZE: f64 = 10.0;
pub const MIN_BUILDING_HEIGHT: f64 = 6.0;
pub const MAX_BUILDING_HEIGHT: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Road,
    Building,
    Park,
    Plaza,
}

impl TileKind {
    pub fn is_walkable(self) -> bool {
        self != TileKind::Building
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub coord: HexCoord,
    pub kind: TileKind,
    /// Meters; zero unless `kind` is `Building`.
    pub building_height: f64,
}

/// Fractions of each tile kind drawn before connectivity repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileMix {
    pub road: f64,
    pub building: f64,
    pub park: f64,
    pub plaza: f64,
}

impl Default for TileMix {
    fn default() -> Self {
        TileMix { road: 0.30, building: 0.40, park: 0.20, plaza: 0.10 }
    }
}

impl TileMix {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.road, self.building, self.park, self.plaza];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!("tile mix has negative or non-finite entry: {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("tile mix sums to {sum}, expected 1")));
        }
        Ok(())
    }

    fn pick(&self, u: f64) -> TileKind {
        let mut acc = self.road;
        if u < acc {
            return TileKind::Road;
        }
        acc += self.building;
        if u < acc {
            return TileKind::Building;
        }
        acc += self.park;
        if u < acc {
            return TileKind::Park;
        }
        TileKind::Plaza
    }
}

/// Walkable cells and their hex adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGraph {
    nodes: Vec<HexCoord>,
    index: HashMap<HexCoord, usize>,
    /// Per node, neighbor indices in `HexCoord::neighbors` order.
    adj: Vec<Vec<usize>>,
}

impl NavGraph {
    /// Graph over the given cells; edges join every pair of hex neighbors present.
    pub fn from_nodes<I: IntoIterator<Item = HexCoord>>(cells: I) -> Self {
        let mut nodes: Vec<HexCoord> = cells.into_iter().collect();
        nodes.sort_by_key(|c| (c.r, c.q));
        nodes.dedup();
        let index: HashMap<HexCoord, usize> = nodes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let adj = nodes
            .iter()
            .map(|c| c.neighbors().iter().filter_map(|n| index.get(n).copied()).collect())
            .collect();
        NavGraph { nodes, index, adj }
    }

    pub fn nodes(&self) -> &[HexCoord] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, c: HexCoord) -> bool {
        self.index.contains_key(&c)
    }

    pub fn neighbors_of(&self, c: HexCoord) -> impl Iterator<Item = HexCoord> + '_ {
        self.index.get(&c).into_iter().flat_map(move |&i| self.adj[i].iter().map(move |&j| self.nodes[j]))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted canonically; components ordered by first cell.
    pub fn components(&self) -> Vec<Vec<HexCoord>> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut comp = Vec::new();
            while let Some(i) = queue.pop_front() {
                comp.push(self.nodes[i]);
                for &j in &self.adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_by_key(|c| (c.r, c.q));
            out.push(comp);
        }
        out
    }
}

/// Shortest walk from `a` to `b` by edge count, both ends included.
///
/// Breadth-first; at each expansion neighbors are visited in the fixed
/// `HexCoord::neighbors` order and the first discovery wins, so ties resolve
/// deterministically.
pub fn find_path(g: &NavGraph, a: HexCoord, b: HexCoord) -> Result<Vec<HexCoord>> {
    let &start = g.index.get(&a).ok_or(Error::UnknownNode(a))?;
    let &goal = g.index.get(&b).ok_or(Error::UnknownNode(b))?;
    if start == goal {
        return Ok(vec![a]);
    }
    let mut parent = vec![usize::MAX; g.nodes.len()];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for &j in &g.adj[i] {
            if parent[j] != usize::MAX {
                continue;
            }
            parent[j] = i;
            if j == goal {
                let mut path = vec![g.nodes[goal]];
                let mut k = goal;
                while k != start {
                    k = parent[k];
                    path.push(g.nodes[k]);
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(j);
        }
    }
    Err(Error::Unreachable { from: a, to: b })
}

#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub radius: u32,
    pub tile_size: f64,
    /// Canonical `(r, q)` order.
    tiles: Vec<Tile>,
    row_offsets: Vec<usize>,
    pub nav: NavGraph,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.radius == other.radius
            && self.tile_size == other.tile_size
            && self.tiles == other.tiles
    }
}

impl World {
    fn from_tiles(seed: u64, radius: u32, tile_size: f64, tiles: Vec<Tile>) -> Self {
        let r = radius as i32;
        let mut row_offsets = Vec::with_capacity(2 * radius as usize + 1);
        let mut acc = 0usize;
        for row in -r..=r {
            row_offsets.push(acc);
            acc += (2 * r + 1 - row.abs()) as usize;
        }
        let nav = NavGraph::from_nodes(tiles.iter().filter(|t| t.kind.is_walkable()).map(|t| t.coord));
        World { seed, radius, tile_size, tiles, row_offsets, nav }
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    #[inline]
    pub fn index_of(&self, c: HexCoord) -> Option<usize> {
        if c.ring() > self.radius {
            return None;
        }
        let r = self.radius as i32;
        let q_lo = (-r).max(-c.r - r);
        Some(self.row_offsets[(c.r + r) as usize] + (c.q - q_lo) as usize)
    }

    #[inline]
    pub fn tile(&self, c: HexCoord) -> Option<&Tile> {
        self.index_of(c).map(|i| &self.tiles[i])
    }

    #[inline]
    pub fn tile_at(&self, p: Vec2) -> Option<&Tile> {
        self.tile(hex::world_to_hex(p, self.tile_size))
    }

    /// Point lies inside the map on a non-building tile.
    #[inline]
    pub fn is_walkable_point(&self, p: Vec2) -> bool {
        self.tile_at(p).is_some_and(|t| t.kind.is_walkable())
    }

    pub fn center_of(&self, c: HexCoord) -> Vec2 {
        hex::hex_center(c, self.tile_size)
    }

    pub fn hex_of(&self, p: Vec2) -> HexCoord {
        hex::world_to_hex(p, self.tile_size)
    }

    /// Distance from a tile center to the middle of its edges.
    pub fn inradius(&self) -> f64 {
        self.tile_size * 3f64.sqrt() / 2.0
    }

    pub fn walkable_tiles(&self) -> impl Iterator<Item = &Tile> {
        self.tiles.iter().filter(|t| t.kind.is_walkable())
    }

    pub fn to_doc(&self) -> WorldDoc {
        WorldDoc {
            seed: self.seed,
            radius: self.radius,
            tile_size: self.tile_size,
            tiles: self
                .tiles
                .iter()
                .map(|t| TileDoc { q: t.coord.q, r: t.coord.r, kind: t.kind, height: t.building_height })
                .collect(),
        }
    }

    /// Canonical JSON: tiles sorted by `(r, q)` ascending.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("world document serializes")
    }

    pub fn from_json(text: &str) -> Result<World> {
        let doc: WorldDoc = serde_json::from_str(text)?;
        World::from_doc(doc)
    }

    pub fn from_doc(doc: WorldDoc) -> Result<World> {
        if !(doc.tile_size > 0.0 && doc.tile_size.is_finite()) {
            return Err(Error::InvalidInput(format!("tile_size {} must be > 0", doc.tile_size)));
        }
        let expected: Vec<HexCoord> = hex::cells_within(doc.radius).collect();
        if expected.len() != doc.tiles.len() {
            return Err(Error::InvalidInput(format!(
                "radius {} needs {} tiles, document has {}",
                doc.radius,
                expected.len(),
                doc.tiles.len()
            )));
        }
        let mut tiles = Vec::with_capacity(expected.len());
        for (c, t) in expected.iter().zip(&doc.tiles) {
            if (t.q, t.r) != (c.q, c.r) {
                return Err(Error::InvalidInput(format!("tile ({}, {}) out of canonical order", t.q, t.r)));
            }
            let is_building = t.kind == TileKind::Building;
            if is_building != (t.height > 0.0) || !t.height.is_finite() {
                return Err(Error::InvalidInput(format!("tile {c} has inconsistent height {}", t.height)));
            }
            tiles.push(Tile { coord: *c, kind: t.kind, building_height: t.height });
        }
        Ok(World::from_tiles(doc.seed, doc.radius, doc.tile_size, tiles))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDoc {
    pub seed: u64,
    pub radius: u32,
    pub tile_size: f64,
    pub tiles: Vec<TileDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileDoc {
    pub q: i32,
    pub r: i32,
    pub kind: TileKind,
    pub height: f64,
}

/// Generation parameters with the stock defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub radius: u32,
    pub tile_size: f64,
    pub mix: TileMix,
}

impl WorldConfig {
    pub fn with_seed(seed: u64) -> Self {
        WorldConfig { seed, radius: DEFAULT_RADIUS, tile_size: DEFAULT_TILE_SIZE, mix: TileMix::default() }
    }

    pub fn generate(&self) -> Result<World> {
        generate_world(self.seed, self.radius as i64, self.tile_size, self.mix)
    }
}

/// Draws tile kinds from `mix`, pins the center to `Plaza`, then joins walkable
/// islands by converting the buildings on a shortest hex line to road.
///
/// Repair repeatedly picks, over all walkable cells `a` in the center's
/// component and `b` outside it, the pair with the smallest hex distance
/// (ties: lexicographically smallest `(a, b)` on `(q, r)`), and paves the
/// cells strictly between them.
pub fn generate_world(seed: u64, radius: i64, tile_size: f64, mix: TileMix) -> Result<World> {
    if radius < 0 || radius > 4096 {
        return Err(Error::InvalidParameter(format!("radius must be in 0..=4096, got {radius}")));
    }
    if !(tile_size > 0.0 && tile_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("tile_size must be > 0, got {tile_size}")));
    }
    mix.validate()?;
    let radius = radius as u32;

    let mut rng = substream(seed, Substream::WorldGen);
    let mut tiles: Vec<Tile> = hex::cells_within(radius)
        .map(|coord| {
            let kind = mix.pick(rng.random::<f64>());
            let building_height = if kind == TileKind::Building {
                rng.random_range(MIN_BUILDING_HEIGHT..=MAX_BUILDING_HEIGHT)
            } else {
                0.0
            };
            Tile { coord, kind, building_height }
        })
        .collect();

    let mut world = World::from_tiles(seed, radius, tile_size, Vec::new());
    let center = world.index_of(HexCoord::ORIGIN).expect("origin is always on the map");
    tiles[center] = Tile { coord: HexCoord::ORIGIN, kind: TileKind::Plaza, building_height: 0.0 };
    world.tiles = tiles;

    repair_connectivity(&mut world);
    world.nav = NavGraph::from_nodes(world.walkable_tiles().map(|t| t.coord));
    Ok(world)
}

fn repair_connectivity(world: &mut World) {
    loop {
        let nav = NavGraph::from_nodes(world.walkable_tiles().map(|t| t.coord));
        let comps = nav.components();
        if comps.len() <= 1 {
            return;
        }
        let main = comps.iter().position(|c| c.contains(&HexCoord::ORIGIN)).expect("origin is walkable");
        let mut best: Option<(u32, HexCoord, HexCoord)> = None;
        for &a in &comps[main] {
            for (ci, comp) in comps.iter().enumerate() {
                if ci == main {
                    continue;
                }
                for &b in comp {
                    let cand = (a.distance(b), a, b);
                    if best.is_none_or(|cur| cand < cur) {
                        best = Some(cand);
                    }
                }
            }
        }
        let (_, a, b) = best.expect("at least two components");
        let line = a.line_to(b);
        for c in &line[1..line.len() - 1] {
            let i = world.index_of(*c).expect("line stays within the hexagonal map");
            debug_assert_eq!(world.tiles[i].kind, TileKind::Building);
            world.tiles[i].kind = TileKind::Road;
            world.tiles[i].building_height = 0.0;
        }
    }
}
