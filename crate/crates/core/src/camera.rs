//! UAV kinematics and the pinhole camera it carries.
//!
//! World frame: x east, y north, z up, meters. The camera looks along its
//! forward axis; image x grows to the right and image y grows downward.
//! Pixel centers sit at integer coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const MIN_ALTITUDE: f64 = 1.0;
pub const MAX_ALTITUDE: f64 = 120.0;
pub const MAX_SPEED: f64 = 15.0;
/// Altitude used for dataset capture.
pub const CAPTURE_ALTITUDE: f64 = 3.5;
pub const DEFAULT_PITCH_DEG: f64 = 60.0;
pub const DEFAULT_HFOV_DEG: f64 = 60.0;
/// Camera-frame depth below which points count as behind the camera.
pub const NEAR_PLANE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    /// `z` is altitude above ground.
    pub pos: Vec3,
    pub vel: Vec3,
    pub yaw: f64,
    /// Camera tilt below the horizon; `pi/2` looks straight down.
    pub pitch: f64,
}

impl Default for UavState {
    fn default() -> Self {
        UavState::hover(Vec3::new(0.0, 0.0, CAPTURE_ALTITUDE), 0.0, DEFAULT_PITCH_DEG.to_radians())
    }
}

impl UavState {
    pub fn hover(pos: Vec3, yaw: f64, pitch: f64) -> Self {
        UavState {
            pos: Vec3::new(pos.x, pos.y, pos.z.clamp(MIN_ALTITUDE, MAX_ALTITUDE)),
            vel: Vec3::ZERO,
            yaw,
            pitch: pitch.clamp(0.0, std::f64::consts::FRAC_PI_2),
        }
    }

    /// Hover placed so the optical axis meets the ground at `(target_x, target_y)`.
    pub fn looking_at_ground(target_x: f64, target_y: f64, altitude: f64, yaw: f64, pitch: f64) -> Self {
        let z = altitude.clamp(MIN_ALTITUDE, MAX_ALTITUDE);
        let pitch = pitch.clamp(1e-3, std::f64::consts::FRAC_PI_2);
        let back = z / pitch.tan();
        UavState::hover(Vec3::new(target_x - back * yaw.cos(), target_y - back * yaw.sin(), z), yaw, pitch)
    }
}

/// Velocity command in the world frame, with optional attitude targets.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
}

impl ControlCommand {
    pub fn velocity(vx: f64, vy: f64, vz: f64) -> Self {
        ControlCommand { vx, vy, vz, yaw: None, pitch: None }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.vx, self.vy, self.vz].iter().all(|v| v.is_finite())
            && self.yaw.is_none_or(f64::is_finite)
            && self.pitch.is_none_or(f64::is_finite);
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidCommand(format!("non-finite control values: {self:?}")))
        }
    }
}

pub fn apply_control(u: &UavState, cmd: &ControlCommand, dt: f64) -> Result<UavState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    cmd.validate()?;
    let mut vel = Vec3::new(cmd.vx, cmd.vy, cmd.vz);
    let speed = vel.length();
    if speed > MAX_SPEED {
        vel = vel * (MAX_SPEED / speed);
    }
    let mut pos = u.pos + vel * dt;
    pos.z = pos.z.clamp(MIN_ALTITUDE, MAX_ALTITUDE);
    Ok(UavState {
        pos,
        vel,
        yaw: cmd.yaw.unwrap_or(u.yaw),
        pitch: cmd.pitch.map_or(u.pitch, |p| p.clamp(0.0, std::f64::consts::FRAC_PI_2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics::from_hfov(640, 480, DEFAULT_HFOV_DEG.to_radians())
    }
}

impl CameraIntrinsics {
    /// Square pixels, principal point at the image center.
    pub fn from_hfov(width: u32, height: u32, hfov: f64) -> Self {
        let f = width as f64 / (2.0 * (hfov / 2.0).tan());
        CameraIntrinsics { width, height, fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx.is_finite()
            && self.cy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad intrinsics {self:?}")))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Camera basis derived from a UAV pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub center: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
}

impl CameraPose {
    pub fn from_uav(u: &UavState) -> Self {
        let (sy, cy) = u.yaw.sin_cos();
        let (sp, cp) = u.pitch.sin_cos();
        let forward = Vec3::new(cp * cy, cp * sy, -sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(right);
        CameraPose { center: u.pos, right, down, forward }
    }

    /// World point into camera coordinates `(x right, y down, z forward)`.
    #[inline]
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.center;
        Vec3::new(self.right.dot(d), self.down.dot(d), self.forward.dot(d))
    }

    /// Ray direction through normalized image coordinates; forward component is 1.
    #[inline]
    pub fn ray(&self, xn: f64, yn: f64) -> Vec3 {
        self.forward + self.right * xn + self.down * yn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Euclidean distance from the camera center.
    pub depth: f64,
}

pub fn project(p: Vec3, u: &UavState, k: &CameraIntrinsics) -> Option<Projection> {
    let pose = CameraPose::from_uav(u);
    project_with(&pose, p, k)
}

#[inline]
pub fn project_with(pose: &CameraPose, p: Vec3, k: &CameraIntrinsics) -> Option<Projection> {
    let c = pose.to_camera(p);
    if c.z <= NEAR_PLANE {
        return None;
    }
    Some(Projection { u: k.fx * (c.x / c.z) + k.cx, v: k.fy * (c.y / c.z) + k.cy, depth: c.length() })
}

/// Inverse of `project`: the point at Euclidean `depth` along the pixel ray.
pub fn unproject(u_px: f64, v_px: f64, depth: f64, u: &UavState, k: &CameraIntrinsics) -> Vec3 {
    let pose = CameraPose::from_uav(u);
    let dir = pose.ray((u_px - k.cx) / k.fx, (v_px - k.cy) / k.fy);
    pose.center + dir * (depth / dir.length())
}
