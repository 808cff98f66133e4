//! Headless software renderer producing RGB, semantic segmentation and depth.
//!
//! One rasterization fills a surface buffer (class, forward depth, shade);
//! each pass is a per-pixel mapping of that buffer, so the three passes of a
//! frame always agree on which surface is visible. Ground is ray-cast per
//! pixel against the `z = 0` plane, buildings are near-clipped polygons with a
//! z-buffer, and agents are ray-traced capsules inside their screen bounds.
//! Everything runs on the calling thread in a fixed order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::behavior::SimState;
use crate::camera::{CameraIntrinsics, CameraPose, UavState};
use crate::error::{Error, Result};
use crate::geom::{round_half_away, Vec3};
use crate::world::{TileKind, World};

pub const AGENT_HEIGHT: f64 = 1.8;
pub const AGENT_RADIUS: f64 = 0.3;
/// Depth value for sky and anything at or beyond 65.535 m.
pub const DEPTH_FAR: u16 = u16::MAX;

pub type Rgb = [u8; 3];

/// Segmentation colors. Agents always carry exactly `AGENT`.
pub struct SegPalette;

impl SegPalette {
    pub const AGENT: Rgb = [81, 13, 36];
    pub const GROUND: Rgb = [0, 0, 0];
    pub const BUILDING: Rgb = [70, 70, 70];
    pub const ROAD: Rgb = [128, 64, 128];
    pub const SKY: Rgb = [135, 206, 235];
    pub const ALL: [Rgb; 5] = [Self::AGENT, Self::GROUND, Self::BUILDING, Self::ROAD, Self::SKY];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Rgb,
    #[serde(alias = "seg")]
    Segmentation,
    Depth,
}

impl Pass {
    pub const ALL: [Pass; 3] = [Pass::Rgb, Pass::Segmentation, Pass::Depth];

    pub fn short_name(self) -> &'static str {
        match self {
            Pass::Rgb => "rgb",
            Pass::Segmentation => "seg",
            Pass::Depth => "depth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pixels {
    /// Row-major, three bytes per pixel.
    Rgb(Vec<u8>),
    /// Row-major millimeters.
    Depth(Vec<u16>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pass: Pass,
    pub pixels: Pixels,
}

impl Image {
    pub fn new_rgb(width: u32, height: u32, pass: Pass, data: Vec<u8>) -> Result<Self> {
        if pass == Pass::Depth || data.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidInput(format!("{} bytes do not form a {width}x{height} color image", data.len())));
        }
        Ok(Image { width, height, pass, pixels: Pixels::Rgb(data) })
    }

    pub fn new_depth(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!("{} samples do not form a {width}x{height} depth image", data.len())));
        }
        Ok(Image { width, height, pass: Pass::Depth, pixels: Pixels::Depth(data) })
    }

    pub fn filled(width: u32, height: u32, pass: Pass, color: Rgb) -> Self {
        let data = color.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Image { width, height, pass, pixels: Pixels::Rgb(data) }
    }

    pub fn rgb_data(&self) -> Option<&[u8]> {
        match &self.pixels {
            Pixels::Rgb(d) => Some(d),
            Pixels::Depth(_) => None,
        }
    }

    pub fn depth_data(&self) -> Option<&[u16]> {
        match &self.pixels {
            Pixels::Depth(d) => Some(d),
            Pixels::Rgb(_) => None,
        }
    }

    /// Color at `(x, y)`; panics on depth images or out-of-range coordinates.
    pub fn rgb(&self, x: u32, y: u32) -> Rgb {
        let d = self.rgb_data().expect("color image");
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [d[i], d[i + 1], d[i + 2]]
    }

    pub fn depth(&self, x: u32, y: u32) -> u16 {
        self.depth_data().expect("depth image")[y as usize * self.width as usize + x as usize]
    }

    /// Binary PPM (P6, maxval 255) for color passes, PGM (P5, maxval 65535, big-endian) for depth.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        match &self.pixels {
            Pixels::Rgb(d) => {
                write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
                w.write_all(d)
            }
            Pixels::Depth(d) => {
                write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
                let bytes: Vec<u8> = d.iter().flat_map(|v| v.to_be_bytes()).collect();
                w.write_all(&bytes)
            }
        }
    }

    pub fn file_extension(&self) -> &'static str {
        match self.pass {
            Pass::Depth => "pgm",
            _ => "ppm",
        }
    }

    /// Parses P6/P5 produced by `encode`. `pass` tags color images, which carry no pass in the file.
    pub fn decode(bytes: &[u8], pass: Pass) -> Result<Image> {
        let mut reader = bytes;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            let mut token = Vec::new();
            loop {
                let mut b = [0u8];
                if reader.read(&mut b)? == 0 {
                    return Err(Error::InvalidInput("truncated netpbm header".into()));
                }
                match b[0] {
                    b'#' if token.is_empty() => {
                        while reader.read(&mut b)? == 1 && b[0] != b'\n' {}
                    }
                    c if c.is_ascii_whitespace() => {
                        if !token.is_empty() {
                            break;
                        }
                    }
                    c => token.push(c),
                }
            }
            fields.push(String::from_utf8_lossy(&token).into_owned());
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| Error::InvalidInput(format!("bad netpbm field {s:?}")));
        let (width, height, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
        let n = width as usize * height as usize;
        match (fields[0].as_str(), maxval) {
            ("P6", 255) if pass != Pass::Depth => {
                if reader.len() != n * 3 {
                    return Err(Error::InvalidInput("PPM payload length mismatch".into()));
                }
                Image::new_rgb(width, height, pass, reader.to_vec())
            }
            ("P5", 65535) if pass == Pass::Depth => {
                if reader.len() != n * 2 {
                    return Err(Error::InvalidInput("PGM payload length mismatch".into()));
                }
                let data = reader.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
                Image::new_depth(width, height, data)
            }
            (magic, max) => Err(Error::InvalidInput(format!("unsupported netpbm {magic} maxval {max} for {pass:?}"))),
        }
    }
}

/// The three passes of one tick from one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub tick: u64,
    pub uav: UavState,
    pub rgb: Image,
    pub seg: Image,
    pub depth: Image,
}

impl FrameSet {
    pub fn image(&self, pass: Pass) -> &Image {
        match pass {
            Pass::Rgb => &self.rgb,
            Pass::Segmentation => &self.seg,
            Pass::Depth => &self.depth,
        }
    }
}

/// Visible-surface classes stored in the surface buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Surface {
    Sky = 0,
    Park,
    Plaza,
    Outside,
    Road,
    Building,
    Agent,
}

impl Surface {
    fn seg_color(self) -> Rgb {
        match self {
            Surface::Sky => SegPalette::SKY,
            Surface::Park | Surface::Plaza | Surface::Outside => SegPalette::GROUND,
            Surface::Road => SegPalette::ROAD,
            Surface::Building => SegPalette::BUILDING,
            Surface::Agent => SegPalette::AGENT,
        }
    }

    fn base_color(self) -> Rgb {
        match self {
            Surface::Sky => SegPalette::SKY,
            Surface::Park => [84, 142, 62],
            Surface::Plaza => [186, 176, 158],
            Surface::Outside => [112, 118, 92],
            Surface::Road => [88, 88, 94],
            Surface::Building => [204, 172, 138],
            Surface::Agent => [72, 84, 150],
        }
    }

    fn from_tile(kind: Option<TileKind>) -> Surface {
        match kind {
            None => Surface::Outside,
            Some(TileKind::Road) => Surface::Road,
            Some(TileKind::Park) => Surface::Park,
            Some(TileKind::Plaza) => Surface::Plaza,
            Some(TileKind::Building) => Surface::Building,
        }
    }
}

const AMBIENT: f64 = 0.4;
const DIFFUSE: f64 = 0.6;

fn sun() -> Vec3 {
    Vec3::new(0.35, 0.45, 0.82).normalized().expect("non-zero")
}

fn shade_for(normal: Vec3) -> u8 {
    let lambert = normal.dot(sun()).max(0.0);
    ((AMBIENT + DIFFUSE * lambert) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Reusable renderer holding per-intrinsics tables and the surface buffer.
pub struct Renderer {
    k: CameraIntrinsics,
    xn: Vec<f64>,
    yn: Vec<f64>,
    /// Euclidean length of each pixel ray with unit forward component.
    ray_len: Vec<f64>,
    surface: Vec<Surface>,
    /// Forward (camera z) depth; infinity for sky.
    zbuf: Vec<f32>,
    shade: Vec<u8>,
}

impl Renderer {
    pub fn new(k: CameraIntrinsics) -> Result<Self> {
        k.validate()?;
        let xn: Vec<f64> = (0..k.width).map(|x| (x as f64 - k.cx) / k.fx).collect();
        let yn: Vec<f64> = (0..k.height).map(|y| (y as f64 - k.cy) / k.fy).collect();
        let mut ray_len = Vec::with_capacity(k.pixel_count());
        for y in &yn {
            for x in &xn {
                ray_len.push((1.0 + x * x + y * y).sqrt());
            }
        }
        let n = k.pixel_count();
        Ok(Renderer {
            k,
            xn,
            yn,
            ray_len,
            surface: vec![Surface::Sky; n],
            zbuf: vec![f32::INFINITY; n],
            shade: vec![0; n],
        })
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.k
    }

    pub fn render(&mut self, sim: &SimState, world: &World, uav: &UavState, pass: Pass) -> Image {
        self.rasterize(sim, world, uav);
        self.resolve(pass)
    }

    pub fn capture(&mut self, sim: &SimState, world: &World, uav: &UavState) -> FrameSet {
        self.rasterize(sim, world, uav);
        FrameSet {
            tick: sim.tick,
            uav: *uav,
            rgb: self.resolve(Pass::Rgb),
            seg: self.resolve(Pass::Segmentation),
            depth: self.resolve(Pass::Depth),
        }
    }

    fn resolve(&self, pass: Pass) -> Image {
        let (w, h) = (self.k.width, self.k.height);
        match pass {
            Pass::Segmentation => {
                let mut data = Vec::with_capacity(self.surface.len() * 3);
                for s in &self.surface {
                    data.extend_from_slice(&s.seg_color());
                }
                Image { width: w, height: h, pass, pixels: Pixels::Rgb(data) }
            }
            Pass::Rgb => {
                let mut data = Vec::with_capacity(self.surface.len() * 3);
                for (s, &shade) in self.surface.iter().zip(&self.shade) {
                    let base = s.base_color();
                    if *s == Surface::Sky {
                        data.extend_from_slice(&base);
                    } else {
                        let f = shade as u32;
                        data.extend(base.iter().map(|&c| ((c as u32 * f + 127) / 255) as u8));
                    }
                }
                Image { width: w, height: h, pass, pixels: Pixels::Rgb(data) }
            }
            Pass::Depth => {
                let data = self
                    .zbuf
                    .iter()
                    .zip(&self.ray_len)
                    .map(|(&z, &len)| {
                        if z.is_finite() {
                            let mm = z as f64 * len * 1000.0;
                            if mm >= DEPTH_FAR as f64 {
                                DEPTH_FAR
                            } else {
                                round_half_away(mm) as u16
                            }
                        } else {
                            DEPTH_FAR
                        }
                    })
                    .collect();
                Image { width: w, height: h, pass, pixels: Pixels::Depth(data) }
            }
        }
    }

    fn rasterize(&mut self, sim: &SimState, world: &World, uav: &UavState) {
        let pose = CameraPose::from_uav(uav);
        self.ground(world, &pose);
        self.buildings(world, &pose);
        self.agents(sim, &pose);
    }

    fn ground(&mut self, world: &World, pose: &CameraPose) {
        let ground_shade = shade_for(Vec3::new(0.0, 0.0, 1.0));
        let c = pose.center;
        let width = self.k.width as usize;
        for (row, &yn) in self.yn.iter().enumerate() {
            let base = pose.forward + pose.down * yn;
            let start = row * width;
            for (col, &xn) in self.xn.iter().enumerate() {
                let i = start + col;
                let dz = base.z + pose.right.z * xn;
                if dz >= -1e-12 || c.z <= 0.0 {
                    self.surface[i] = Surface::Sky;
                    self.zbuf[i] = f32::INFINITY;
                    self.shade[i] = 0;
                    continue;
                }
                let t = -c.z / dz;
                let hx = c.x + (base.x + pose.right.x * xn) * t;
                let hy = c.y + (base.y + pose.right.y * xn) * t;
                let kind = world.tile_at(crate::geom::Vec2::new(hx, hy)).map(|tile| tile.kind);
                self.surface[i] = Surface::from_tile(kind);
                self.zbuf[i] = t as f32;
                self.shade[i] = ground_shade;
            }
        }
    }

    fn buildings(&mut self, world: &World, pose: &CameraPose) {
        let size = world.tile_size;
        for tile in world.tiles().iter().filter(|t| t.kind == TileKind::Building) {
            let center = world.center_of(tile.coord);
            let h = tile.building_height;
            let corners: [Vec3; 6] = std::array::from_fn(|i| {
                let a = (60.0 * i as f64 - 30.0).to_radians();
                Vec3::new(center.x + size * a.cos(), center.y + size * a.sin(), 0.0)
            });
            if pose.center.z > h {
                let top: Vec<Vec3> = corners.iter().map(|p| Vec3::new(p.x, p.y, h)).collect();
                self.polygon(pose, &top, Surface::Building, shade_for(Vec3::new(0.0, 0.0, 1.0)));
            }
            for i in 0..6 {
                let a = corners[i];
                let b = corners[(i + 1) % 6];
                let mid = Vec3::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0, 0.0);
                let out = Vec3::new(mid.x - center.x, mid.y - center.y, 0.0).normalized().expect("non-degenerate");
                let across = world.hex_of(crate::geom::Vec2::new(center.x + 2.0 * (mid.x - center.x), center.y + 2.0 * (mid.y - center.y)));
                if world.tile(across).is_some_and(|t| t.kind == TileKind::Building && t.building_height >= h) {
                    continue;
                }
                if out.dot(pose.center - mid) <= 0.0 {
                    continue;
                }
                let quad = [a, b, Vec3::new(b.x, b.y, h), Vec3::new(a.x, a.y, h)];
                self.polygon(pose, &quad, Surface::Building, shade_for(out));
            }
        }
    }

    /// Near-clips a convex world-space polygon, then fills it as a triangle fan.
    fn polygon(&mut self, pose: &CameraPose, verts: &[Vec3], surface: Surface, shade: u8) {
        const NEAR: f64 = 0.05;
        let cam: Vec<Vec3> = verts.iter().map(|&p| pose.to_camera(p)).collect();
        if cam.iter().all(|v| v.z < NEAR) {
            return;
        }
        let mut clipped = Vec::with_capacity(cam.len() + 2);
        for i in 0..cam.len() {
            let a = cam[i];
            let b = cam[(i + 1) % cam.len()];
            let (ina, inb) = (a.z >= NEAR, b.z >= NEAR);
            if ina {
                clipped.push(a);
            }
            if ina != inb {
                let t = (NEAR - a.z) / (b.z - a.z);
                clipped.push(a + (b - a) * t);
            }
        }
        if clipped.len() < 3 {
            return;
        }
        let k = self.k;
        let screen: Vec<(f64, f64, f64)> =
            clipped.iter().map(|v| (k.fx * v.x / v.z + k.cx, k.fy * v.y / v.z + k.cy, 1.0 / v.z)).collect();
        for i in 1..screen.len() - 1 {
            self.triangle(screen[0], screen[i], screen[i + 1], surface, shade);
        }
    }

    /// Fills pixels whose centers lie inside the triangle (edges inclusive).
    /// Vertices carry `(x, y, 1/z)`; depth is interpolated perspective-correctly.
    fn triangle(&mut self, a: (f64, f64, f64), b: (f64, f64, f64), c: (f64, f64, f64), surface: Surface, shade: u8) {
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area.abs() < 1e-12 {
            return;
        }
        let (w, h) = (self.k.width as i64, self.k.height as i64);
        let min_x = (a.0.min(b.0).min(c.0).ceil() as i64).max(0);
        let max_x = (a.0.max(b.0).max(c.0).floor() as i64).min(w - 1);
        let min_y = (a.1.min(b.1).min(c.1).ceil() as i64).max(0);
        let max_y = (a.1.max(b.1).max(c.1).floor() as i64).min(h - 1);
        if min_x > max_x || min_y > max_y {
            return;
        }
        let inv_area = 1.0 / area;
        let edge = |p: (f64, f64, f64), q: (f64, f64, f64), x: f64, y: f64| (q.0 - p.0) * (y - p.1) - (q.1 - p.1) * (x - p.0);
        for y in min_y..=max_y {
            let py = y as f64;
            let row = (y * w) as usize;
            for x in min_x..=max_x {
                let px = x as f64;
                let l0 = edge(b, c, px, py) * inv_area;
                let l1 = edge(c, a, px, py) * inv_area;
                let l2 = edge(a, b, px, py) * inv_area;
                if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                    continue;
                }
                let inv_z = l0 * a.2 + l1 * b.2 + l2 * c.2;
                if inv_z <= 0.0 {
                    continue;
                }
                let z = (1.0 / inv_z) as f32;
                let i = row + x as usize;
                if z < self.zbuf[i] {
                    self.zbuf[i] = z;
                    self.surface[i] = surface;
                    self.shade[i] = shade;
                }
            }
        }
    }

    fn agents(&mut self, sim: &SimState, pose: &CameraPose) {
        let k = self.k;
        let (w, h) = (k.width as i64, k.height as i64);
        for agent in &sim.agents {
            let (x, y) = (agent.pos.x, agent.pos.y);
            let bottom = Vec3::new(x, y, AGENT_RADIUS);
            let top = Vec3::new(x, y, AGENT_HEIGHT - AGENT_RADIUS);

            let mut bounds = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            let mut behind = 0;
            for &cz in &[0.0, AGENT_HEIGHT] {
                for &(dx, dy) in &[(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                    let c = pose.to_camera(Vec3::new(x + dx * AGENT_RADIUS, y + dy * AGENT_RADIUS, cz));
                    if c.z <= crate::camera::NEAR_PLANE {
                        behind += 1;
                        continue;
                    }
                    let u = k.fx * c.x / c.z + k.cx;
                    let v = k.fy * c.y / c.z + k.cy;
                    bounds = (bounds.0.min(u), bounds.1.min(v), bounds.2.max(u), bounds.3.max(v));
                }
            }
            if behind == 8 {
                continue;
            }
            let (x0, y0, x1, y1) = if behind > 0 {
                (0, 0, w - 1, h - 1)
            } else {
                (
                    (bounds.0.floor() as i64 - 1).max(0),
                    (bounds.1.floor() as i64 - 1).max(0),
                    (bounds.2.ceil() as i64 + 1).min(w - 1),
                    (bounds.3.ceil() as i64 + 1).min(h - 1),
                )
            };
            for py in y0..=y1 {
                let yn = self.yn[py as usize];
                for px in x0..=x1 {
                    let i = (py * w + px) as usize;
                    let len = self.ray_len[i];
                    let rd = pose.ray(self.xn[px as usize], yn) * (1.0 / len);
                    let Some(t) = capsule_hit(pose.center, rd, bottom, top, AGENT_RADIUS) else { continue };
                    let z = (t / len) as f32;
                    if z < self.zbuf[i] {
                        let p = pose.center + rd * t;
                        let axis_z = p.z.clamp(bottom.z, top.z);
                        let n = (p - Vec3::new(x, y, axis_z)).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
                        self.zbuf[i] = z;
                        self.surface[i] = Surface::Agent;
                        self.shade[i] = shade_for(n);
                    }
                }
            }
        }
    }
}

/// Distance along unit ray `rd` to the first hit on the capsule with axis
/// `pa`-`pb` and radius `r`, if any hit lies in front of `ro`.
pub fn capsule_hit(ro: Vec3, rd: Vec3, pa: Vec3, pb: Vec3, r: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    let ba = pb - pa;
    let oa = ro - pa;
    let baba = ba.dot(ba);
    let bard = ba.dot(rd);
    let baoa = ba.dot(oa);
    let a = baba - bard * bard;
    if a > 1e-12 {
        let b = baba * rd.dot(oa) - baoa * bard;
        let c = baba * oa.dot(oa) - baoa * baoa - r * r * baba;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let t = (-b - disc.sqrt()) / a;
            let along = baoa + t * bard;
            if t > 0.0 && along > 0.0 && along < baba {
                best = t;
            }
        }
    }
    for center in [pa, pb] {
        let oc = ro - center;
        let b = rd.dot(oc);
        let c = oc.dot(oc) - r * r;
        let disc = b * b - c;
        if disc >= 0.0 {
            let t = -b - disc.sqrt();
            if t > 0.0 && t < best {
                best = t;
            }
        }
    }
    best.is_finite().then_some(best)
}

pub fn render_frame(
    sim: &SimState,
    world: &World,
    uav: &UavState,
    k: &CameraIntrinsics,
    pass: Pass,
) -> Result<Image> {
    Ok(Renderer::new(*k)?.render(sim, world, uav, pass))
}

pub fn capture(sim: &SimState, world: &World, uav: &UavState, k: &CameraIntrinsics) -> Result<FrameSet> {
    Ok(Renderer::new(*k)?.capture(sim, world, uav))
}
