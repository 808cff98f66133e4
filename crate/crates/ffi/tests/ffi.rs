use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use uavcrowd_ffi::*;

fn last_error() -> String {
    let p = uc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn world_round_trip() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(uc_world_generate(11, 2, 10.0, &mut w), UcStatus::Ok);
        let mut n = 0usize;
        assert_eq!(uc_world_tile_count(w, &mut n), UcStatus::Ok);
        assert_eq!(n, 19);
        let mut json = ptr::null_mut();
        assert_eq!(uc_world_to_json(w, &mut json), UcStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        uc_string_free(json);
        uc_world_free(w);
        let world = uavcrowd::world::World::from_json(&text).unwrap();
        assert_eq!(world.tiles().len(), 19);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(uc_world_generate(1, -1, 10.0, &mut w), UcStatus::InvalidParameter);
        assert!(w.is_null());
        assert!(!last_error().is_empty());

        let (mut x, mut y) = (0.0, 0.0);
        assert_eq!(uc_hex_to_world(1, 0, 0.0, &mut x, &mut y), UcStatus::InvalidParameter);
        assert_eq!(uc_hex_to_world(1, 0, 1.0, ptr::null_mut(), &mut y), UcStatus::NullPointer);
        assert_eq!(uc_hex_to_world(1, 0, 1.0, &mut x, &mut y), UcStatus::Ok);
        assert!((x - 3f64.sqrt()).abs() < 1e-12 && y.abs() < 1e-12);

        assert_eq!(uc_sim_step(ptr::null_mut(), 1), UcStatus::NullPointer);
        assert!(last_error().contains("sim"));

        let mut sim = ptr::null_mut();
        assert_eq!(uc_sim_new(1, 4, 1, &mut sim), UcStatus::InvalidParameter);
        assert_eq!(uc_sim_new(1, 4, 10, &mut sim), UcStatus::Ok);
        let bad = CString::new("{not json").unwrap();
        assert_ne!(uc_sim_load_scenario(sim, bad.as_ptr()), UcStatus::Ok);
        assert_eq!(uc_sim_set_velocity(sim, f64::NAN, 0.0, 0.0), UcStatus::InvalidCommand);
        uc_sim_free(sim);

        let mut counts = UcSplitCounts::default();
        assert_eq!(uc_balance_and_split(0, 5, 1, &mut counts), UcStatus::InsufficientData);
    }
}

#[test]
fn sim_moves_and_captures() {
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(uc_sim_new(7, 4, 30, &mut sim), UcStatus::Ok);
        let mut before = UcPose::default();
        assert_eq!(uc_sim_pose(sim, &mut before), UcStatus::Ok);
        assert_eq!(uc_sim_set_velocity(sim, 1.0, 0.0, 0.0), UcStatus::Ok);
        assert_eq!(uc_sim_step(sim, 30), UcStatus::Ok);
        let mut tick = 0u64;
        assert_eq!(uc_sim_tick(sim, &mut tick), UcStatus::Ok);
        assert_eq!(tick, 30);
        let mut after = UcPose::default();
        assert_eq!(uc_sim_pose(sim, &mut after), UcStatus::Ok);
        assert!((after.x - before.x - 1.0).abs() < 1e-9);

        assert_eq!(uc_sim_set_altitude(sim, 10.0), UcStatus::Ok);
        assert_eq!(uc_sim_set_pitch(sim, 1.2), UcStatus::Ok);
        assert_eq!(uc_sim_pose(sim, &mut after), UcStatus::Ok);
        assert_eq!(after.z, 10.0);
        assert_eq!(after.pitch, 1.2);

        let mut frame = ptr::null_mut();
        assert_eq!(uc_sim_capture(sim, &mut frame), UcStatus::Ok);
        let mut ft = 0u64;
        assert_eq!(uc_frame_tick(frame, &mut ft), UcStatus::Ok);
        assert_eq!(ft, 30);

        for (pass, ch, bps) in [(UcPass::Rgb, 3, 1), (UcPass::Segmentation, 3, 1), (UcPass::Depth, 1, 2)] {
            let mut info = std::mem::zeroed::<UcImageInfo>();
            assert_eq!(uc_frame_image(frame, pass, &mut info), UcStatus::Ok);
            assert_eq!((info.width, info.height, info.channels, info.bytes_per_sample), (640, 480, ch, bps));
            assert_eq!(info.len, 640 * 480 * (ch * bps) as usize);

            let (mut data, mut len) = (ptr::null_mut(), 0usize);
            assert_eq!(uc_frame_encode(frame, pass, &mut data, &mut len), UcStatus::Ok);
            let bytes = std::slice::from_raw_parts(data, len).to_vec();
            uc_bytes_free(data, len);
            let img = uavcrowd::render::Image::decode(&bytes, pass.into()).unwrap();
            let raw = std::slice::from_raw_parts(info.data, info.len);
            match &img.pixels {
                uavcrowd::render::Pixels::Rgb(d) => assert_eq!(d.as_slice(), raw),
                uavcrowd::render::Pixels::Depth(d) => {
                    let native: Vec<u8> = d.iter().flat_map(|v| v.to_ne_bytes()).collect();
                    assert_eq!(native, raw);
                }
            }
        }

        let mut n = 0usize;
        assert_eq!(uc_frame_boxes(frame, ptr::null_mut(), 0, &mut n), UcStatus::Ok);
        let mut boxes = vec![UcBox::default(); n];
        assert_eq!(uc_frame_boxes(frame, boxes.as_mut_ptr(), n, &mut n), UcStatus::Ok);
        for b in &boxes {
            assert!(b.x_min <= b.x_max && b.y_min <= b.y_max && b.x_max < 640 && b.y_max < 480);
            assert!(b.component_count >= 1);
        }
        uc_frame_free(frame);
        uc_sim_free(sim);
    }
}

#[test]
fn scenario_loads_through_json() {
    let script = r#"{"name":"ffi","seed":5,"duration_s":2,
        "groups":[{"size":4,"scenario":"violent","activities":["punch","kick"]}]}"#;
    let script = CString::new(script).unwrap();
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(uc_sim_new(1, 4, 10, &mut sim), UcStatus::Ok);
        assert_eq!(uc_sim_load_scenario(sim, script.as_ptr()), UcStatus::Ok, "{}", last_error());
        let mut tick = 99u64;
        assert_eq!(uc_sim_tick(sim, &mut tick), UcStatus::Ok);
        assert_eq!(tick, 0);
        uc_sim_free(sim);
    }
}

#[test]
fn split_counts_match_library() {
    for c in [1usize, 5, 6, 24, 120, 1000] {
        let mut out = UcSplitCounts::default();
        assert_eq!(unsafe { uc_split_counts(c, &mut out) }, UcStatus::Ok);
        assert_eq!(out, uavcrowd::dataset::SplitCounts::for_class_size(c).into());
        assert_eq!(out.train + out.val + out.test, c);
    }
    let mut out = UcSplitCounts::default();
    assert_eq!(unsafe { uc_balance_and_split(130, 120, 9, &mut out) }, UcStatus::Ok);
    assert_eq!(out, UcSplitCounts { train: 154, val: 38, test: 48 });
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        uc_world_free(ptr::null_mut());
        uc_sim_free(ptr::null_mut());
        uc_frame_free(ptr::null_mut());
        uc_string_free(ptr::null_mut());
        uc_bytes_free(ptr::null_mut(), 0);
    }
    let v = unsafe { CStr::from_ptr(uc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn staticlib() -> Option<PathBuf> {
    // target/<profile>/tmp is where integration tests get scratch space.
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let lib = tmp.parent()?.join("debug").join("libuavcrowd_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/uavcrowd.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for sym in ["uc_sim_capture", "uc_frame_boxes", "UC_STATUS_NULL_POINTER", "typedef struct UcSim UcSim"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Some(lib) = staticlib() else {
        eprintln!("static library not found; skipping C link check");
        return;
    };
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler; skipping C link check");
        return;
    };
    assert!(status.success(), "C smoke program failed to build");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "smoke exited with {:?}: {}", run.status, String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
