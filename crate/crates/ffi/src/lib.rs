//! C ABI over the simulator.
//!
//! Objects cross the boundary as opaque handles created by `uc_*_new` or
//! `uc_*_generate` and released with the matching `uc_*_free`. Every fallible
//! call returns a [`UcStatus`]; on failure a description is available from
//! [`uc_last_error`] on the same thread. Panics are caught and reported as
//! `UC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uavcrowd::annotate::FrameAnnotation;
use uavcrowd::behavior::ScenarioScript;
use uavcrowd::dataset::{balance_and_split, SplitCounts};
use uavcrowd::hex::{hex_to_world, HexCoord};
use uavcrowd::render::{FrameSet, Pass, Pixels};
use uavcrowd::session::Session;
use uavcrowd::world::{generate_world, TileMix, World};
use uavcrowd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcStatus {
    Ok = 0,
    InvalidParameter = 1,
    UnknownNode = 2,
    Unreachable = 3,
    Capacity = 4,
    InvalidCommand = 5,
    InvalidInput = 6,
    InvalidScript = 7,
    InsufficientData = 8,
    Export = 9,
    Startup = 10,
    Io = 11,
    Parse = 12,
    NullPointer = 13,
    Panic = 14,
}

impl From<&Error> for UcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => UcStatus::InvalidParameter,
            Error::UnknownNode(_) => UcStatus::UnknownNode,
            Error::Unreachable { .. } => UcStatus::Unreachable,
            Error::Capacity(_) => UcStatus::Capacity,
            Error::InvalidCommand(_) => UcStatus::InvalidCommand,
            Error::InvalidInput(_) => UcStatus::InvalidInput,
            Error::InvalidScript(_) => UcStatus::InvalidScript,
            Error::InsufficientData(_) => UcStatus::InsufficientData,
            Error::Export(_) => UcStatus::Export,
            Error::Startup(_) => UcStatus::Startup,
            Error::Io(_) => UcStatus::Io,
            Error::Json(_) => UcStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcPass {
    Rgb = 0,
    Segmentation = 1,
    Depth = 2,
}

impl From<UcPass> for Pass {
    fn from(p: UcPass) -> Self {
        match p {
            UcPass::Rgb => Pass::Rgb,
            UcPass::Segmentation => Pass::Segmentation,
            UcPass::Depth => Pass::Depth,
        }
    }
}

/// UAV position (m), velocity (m/s) and attitude (rad).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UcPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub yaw: f64,
    pub pitch: f64,
}

/// Borrowed view of one image pass. `data` stays valid until the frame is freed.
/// Color passes hold 3 bytes per pixel; depth holds one native-endian `uint16_t` per pixel.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UcImageInfo {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub bytes_per_sample: u32,
    pub data: *const u8,
    pub len: usize,
}

/// Inclusive pixel box of one crowd group.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UcBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
    pub component_count: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UcSplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl From<SplitCounts> for UcSplitCounts {
    fn from(c: SplitCounts) -> Self {
        UcSplitCounts { train: c.train, val: c.val, test: c.test }
    }
}

pub struct UcWorld {
    world: World,
}

pub struct UcSim {
    session: Session,
}

pub struct UcFrame {
    frames: FrameSet,
    annotation: FrameAnnotation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), (UcStatus, String)>>(f: F) -> UcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            UcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (UcStatus, String) {
    (UcStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (UcStatus, String) {
    (UcStatus::NullPointer, format!("{what} is null"))
}

/// Description of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn uc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn uc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn uc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Frees a byte buffer returned by this library. Null is ignored.
///
/// # Safety
/// `data` and `len` must be exactly as returned.
#[no_mangle]
pub unsafe extern "C" fn uc_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Vec::from_raw_parts(data, len, len));
    }
}

/// World-space center of hex `(q, r)` for tiles of circumradius `tile_size`.
///
/// # Safety
/// `x` and `y` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_hex_to_world(q: i32, r: i32, tile_size: f64, x: *mut f64, y: *mut f64) -> UcStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("output"));
        }
        let p = hex_to_world(HexCoord::new(q, r), tile_size).map_err(lib_err)?;
        *x = p.x;
        *y = p.y;
        Ok(())
    })
}

/// Generates a world with the default tile mix.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with `uc_world_free`.
#[no_mangle]
pub unsafe extern "C" fn uc_world_generate(seed: u64, radius: i64, tile_size: f64, out: *mut *mut UcWorld) -> UcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let world = generate_world(seed, radius, tile_size, TileMix::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcWorld { world }));
        Ok(())
    })
}

/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_world_free(world: *mut UcWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// # Safety
/// `world` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_world_tile_count(world: *const UcWorld, out: *mut usize) -> UcStatus {
    guard(|| {
        let w = world.as_ref().ok_or_else(|| null("world"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = w.world.tiles().len();
        Ok(())
    })
}

/// World as JSON. Release the string with `uc_string_free`.
///
/// # Safety
/// `world` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_world_to_json(world: *const UcWorld, out: *mut *mut c_char) -> UcStatus {
    guard(|| {
        let w = world.as_ref().ok_or_else(|| null("world"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(w.world.to_json()).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Session on a seeded world with `agents` randomly grouped agents.
///
/// # Safety
/// `out` must be valid for writes. Release with `uc_sim_free`.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_new(seed: u64, radius: u32, agents: usize, out: *mut *mut UcSim) -> UcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let session = Session::with_agents(seed, radius, agents).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcSim { session }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_free(sim: *mut UcSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn sim_mut<'a>(sim: *mut UcSim) -> Result<&'a mut Session, (UcStatus, String)> {
    sim.as_mut().map(|s| &mut s.session).ok_or_else(|| null("sim"))
}

/// Replaces the crowd with a scenario script given as JSON.
///
/// # Safety
/// `sim` must be a live handle and `script_json` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_load_scenario(sim: *mut UcSim, script_json: *const c_char) -> UcStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        if script_json.is_null() {
            return Err(null("script_json"));
        }
        let text = CStr::from_ptr(script_json).to_str().map_err(|e| (UcStatus::InvalidInput, e.to_string()))?;
        let script = ScenarioScript::from_json(text).map_err(lib_err)?;
        s.load_scenario(script).map_err(lib_err)
    })
}

/// Advances the session by `ticks` fixed steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_step(sim: *mut UcSim, ticks: u32) -> UcStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        for _ in 0..ticks {
            s.step().map_err(lib_err)?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_tick(sim: *const UcSim, out: *mut u64) -> UcStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.session.tick();
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_set_velocity(sim: *mut UcSim, vx: f64, vy: f64, vz: f64) -> UcStatus {
    guard(|| sim_mut(sim)?.set_velocity(vx, vy, vz, None).map_err(lib_err))
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_set_altitude(sim: *mut UcSim, z: f64) -> UcStatus {
    guard(|| sim_mut(sim)?.set_altitude(z).map_err(lib_err))
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_set_pitch(sim: *mut UcSim, pitch: f64) -> UcStatus {
    guard(|| sim_mut(sim)?.set_pitch(pitch).map_err(lib_err))
}

/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_pose(sim: *const UcSim, out: *mut UcPose) -> UcStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = s.session.uav();
        *out = UcPose { x: u.pos.x, y: u.pos.y, z: u.pos.z, vx: u.vel.x, vy: u.vel.y, vz: u.vel.z, yaw: u.yaw, pitch: u.pitch };
        Ok(())
    })
}

/// Renders all passes of the current tick and annotates them. Release with `uc_frame_free`.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_sim_capture(sim: *mut UcSim, out: *mut *mut UcFrame) -> UcStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let frames = s.capture();
        let annotation = s.annotate(&frames).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UcFrame { frames, annotation }));
        Ok(())
    })
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uc_frame_free(frame: *mut UcFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// # Safety
/// `frame` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_frame_tick(frame: *const UcFrame, out: *mut u64) -> UcStatus {
    guard(|| {
        let f = frame.as_ref().ok_or_else(|| null("frame"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.frames.tick;
        Ok(())
    })
}

/// Borrowed pixels of one pass.
///
/// # Safety
/// `frame` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_frame_image(frame: *const UcFrame, pass: UcPass, out: *mut UcImageInfo) -> UcStatus {
    guard(|| {
        let f = frame.as_ref().ok_or_else(|| null("frame"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let img = f.frames.image(pass.into());
        let (channels, bytes_per_sample, data, len) = match &img.pixels {
            Pixels::Rgb(d) => (3, 1, d.as_ptr(), d.len()),
            Pixels::Depth(d) => (1, 2, d.as_ptr().cast::<u8>(), d.len() * 2),
        };
        *out = UcImageInfo { width: img.width, height: img.height, channels, bytes_per_sample, data, len };
        Ok(())
    })
}

/// One pass encoded as binary PPM (color) or PGM (depth). Release with `uc_bytes_free`.
///
/// # Safety
/// `frame` must be a live handle; `data` and `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_frame_encode(frame: *const UcFrame, pass: UcPass, data: *mut *mut u8, len: *mut usize) -> UcStatus {
    guard(|| {
        let f = frame.as_ref().ok_or_else(|| null("frame"))?;
        if data.is_null() || len.is_null() {
            return Err(null("output"));
        }
        let mut bytes = f.frames.image(pass.into()).encode().into_boxed_slice();
        *len = bytes.len();
        *data = bytes.as_mut_ptr();
        std::mem::forget(bytes);
        Ok(())
    })
}

/// Copies up to `capacity` group boxes into `boxes` and stores the total number in `count`.
/// Pass `boxes = NULL, capacity = 0` to query the count.
///
/// # Safety
/// `frame` must be a live handle, `count` valid for writes and `boxes` valid for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn uc_frame_boxes(frame: *const UcFrame, boxes: *mut UcBox, capacity: usize, count: *mut usize) -> UcStatus {
    guard(|| {
        let f = frame.as_ref().ok_or_else(|| null("frame"))?;
        if count.is_null() || (boxes.is_null() && capacity > 0) {
            return Err(null("output"));
        }
        let all = &f.annotation.boxes;
        *count = all.len();
        for (i, g) in all.iter().take(capacity).enumerate() {
            *boxes.add(i) = UcBox {
                x_min: g.bbox.x_min,
                y_min: g.bbox.y_min,
                x_max: g.bbox.x_max,
                y_max: g.bbox.y_max,
                component_count: g.component_count as u32,
            };
        }
        Ok(())
    })
}

/// Per-class train/val/test sizes for a balanced class of `class_size` clips.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_split_counts(class_size: usize, out: *mut UcSplitCounts) -> UcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = SplitCounts::for_class_size(class_size).into();
        Ok(())
    })
}

/// Balances an inventory of `violent` and `non_violent` clips and reports the total split sizes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uc_balance_and_split(violent: usize, non_violent: usize, split_seed: u64, out: *mut UcSplitCounts) -> UcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        use uavcrowd::behavior::Scenario;
        let ids: Vec<(String, Scenario)> = (0..violent)
            .map(|i| (format!("v{i}"), Scenario::Violent))
            .chain((0..non_violent).map(|i| (format!("n{i}"), Scenario::NonViolent)))
            .collect();
        let m = balance_and_split(ids.iter().map(|(id, l)| (id.as_str(), *l)), split_seed).map_err(lib_err)?;
        *out = m.counts.into();
        Ok(())
    })
}
