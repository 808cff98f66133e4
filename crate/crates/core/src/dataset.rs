//! Clip recording, class-balanced splitting and dataset export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::{annotate_frame, FrameAnnotation, DEFAULT_GAP_PX};
use crate::behavior::{Activity, GroupSpec, Scenario, ScenarioScript, DT};
use crate::camera::{apply_control, CameraIntrinsics, ControlCommand, UavState, CAPTURE_ALTITUDE, DEFAULT_PITCH_DEG};
use crate::error::{Error, Result};
use crate::render::{FrameSet, Image, Renderer};
use crate::rng::{substream, Substream};
use crate::world::WorldConfig;

pub const FPS: u32 = 30;
pub const MAX_CLIP_SECONDS: f64 = 10.0;
pub const DATASET_NAME: &str = "uavcrowd-synthetic";
pub const SUITE_SEED: u64 = 2024;
pub const SUITE_CLIPS_PER_TEMPLATE: usize = 30;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INVENTORY_FILE: &str = "clips.json";

/// Number of frames for a clip of `duration_s` seconds.
pub fn frame_count(duration_s: f64) -> Result<u32> {
    if !(duration_s > 0.0 && duration_s <= MAX_CLIP_SECONDS) {
        return Err(Error::InvalidScript(format!("clip duration {duration_s} s outside (0, {MAX_CLIP_SECONDS}]")));
    }
    Ok((duration_s * FPS as f64).round().max(1.0) as u32)
}

/// Camera placement and motion for a clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UavPlan {
    pub altitude: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Explicit start pose; when absent the UAV hovers looking at the first group's anchor.
    pub start: Option<UavState>,
    pub control: ControlCommand,
}

impl Default for UavPlan {
    fn default() -> Self {
        UavPlan {
            altitude: CAPTURE_ALTITUDE,
            pitch: DEFAULT_PITCH_DEG.to_radians(),
            yaw: 0.0,
            start: None,
            control: ControlCommand::default(),
        }
    }
}

impl UavPlan {
    pub fn initial_pose(&self, sim: &crate::behavior::SimState) -> UavState {
        if let Some(start) = self.start {
            return start;
        }
        let target = sim.groups.first().map(|g| g.anchor).unwrap_or_default();
        UavState::looking_at_ground(target.x, target.y, self.altitude, self.yaw, self.pitch)
    }
}

/// Everything needed to reproduce a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub id: String,
    pub world: WorldConfig,
    #[serde(default)]
    pub uav: UavPlan,
    pub script: ScenarioScript,
}

impl ClipSpec {
    /// World seeded from the script, default radius and mix.
    pub fn new(id: impl Into<String>, script: ScenarioScript) -> Self {
        ClipSpec { id: id.into(), world: WorldConfig::with_seed(script.seed), uav: UavPlan::default(), script }
    }
}

/// A recorded clip. Frames live in whatever sink received them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub id: String,
    pub label: Scenario,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
    pub duration_s: f64,
    pub frame_count: u32,
    pub scenario_seed: u64,
    pub spec: ClipSpec,
}

/// Receives each captured frame of a clip in order.
pub trait FrameSink {
    fn write_frame(&mut self, index: u32, frames: &FrameSet, ann: &FrameAnnotation) -> Result<()>;
}

impl<F: FnMut(u32, &FrameSet, &FrameAnnotation) -> Result<()>> FrameSink for F {
    fn write_frame(&mut self, index: u32, frames: &FrameSet, ann: &FrameAnnotation) -> Result<()> {
        self(index, frames, ann)
    }
}

pub struct DiscardSink;

impl FrameSink for DiscardSink {
    fn write_frame(&mut self, _: u32, _: &FrameSet, _: &FrameAnnotation) -> Result<()> {
        Ok(())
    }
}

/// Writes `frame_%05d.ppm`, `seg_%05d.ppm`, `depth_%05d.pgm` and `ann_%05d.json` into a directory.
pub struct DirectorySink {
    dir: PathBuf,
}

impl DirectorySink {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(DirectorySink { dir })
    }
}

fn write_image(path: &Path, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    img.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

impl FrameSink for DirectorySink {
    fn write_frame(&mut self, index: u32, frames: &FrameSet, ann: &FrameAnnotation) -> Result<()> {
        write_image(&self.dir.join(format!("frame_{index:05}.ppm")), &frames.rgb)?;
        write_image(&self.dir.join(format!("seg_{index:05}.ppm")), &frames.seg)?;
        write_image(&self.dir.join(format!("depth_{index:05}.pgm")), &frames.depth)?;
        fs::write(self.dir.join(format!("ann_{index:05}.json")), serde_json::to_vec(ann)?)?;
        Ok(())
    }
}

/// SHA-256 over the encoded passes and annotations of every frame.
#[derive(Default)]
pub struct DigestSink {
    hasher: Sha256,
    pub frames: u32,
}

impl DigestSink {
    pub fn finish(self) -> String {
        self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl FrameSink for DigestSink {
    fn write_frame(&mut self, index: u32, frames: &FrameSet, ann: &FrameAnnotation) -> Result<()> {
        self.hasher.update(index.to_be_bytes());
        for img in [&frames.rgb, &frames.seg, &frames.depth] {
            self.hasher.update(img.encode());
        }
        self.hasher.update(serde_json::to_vec(ann)?);
        self.frames += 1;
        Ok(())
    }
}

/// Runs the script at the fixed step, capturing one frame set per tick.
pub fn record_clip(spec: &ClipSpec, sink: &mut dyn FrameSink) -> Result<Clip> {
    let frames = frame_count(spec.script.duration_s)?;
    if spec.script.groups.is_empty() {
        return Err(Error::InvalidScript("script has no groups".into()));
    }
    for g in &spec.script.groups {
        g.validate().map_err(|e| Error::InvalidScript(e.to_string()))?;
    }
    let world = spec.world.generate()?;
    let mut sim = spec.script.spawn(&world)?;
    let mut uav = spec.uav.initial_pose(&sim);
    let k = CameraIntrinsics::default();
    let mut renderer = Renderer::new(k)?;
    for index in 0..frames {
        sim = sim.step(&world, DT);
        uav = apply_control(&uav, &spec.uav.control, DT)?;
        let set = renderer.capture(&sim, &world, &uav);
        let ann = annotate_frame(&set.seg, set.tick, DEFAULT_GAP_PX)?;
        sink.write_frame(index, &set, &ann)?;
    }
    Ok(Clip {
        id: spec.id.clone(),
        label: spec.script.dominant_scenario(),
        fps: FPS,
        width: k.width,
        height: k.height,
        duration_s: spec.script.duration_s,
        frame_count: frames,
        scenario_seed: spec.script.seed,
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    /// Per-class sizes for a balanced class of `c` clips.
    pub fn for_class_size(c: usize) -> Self {
        let test = c.div_ceil(5);
        let val = (c - test) / 5;
        SplitCounts { train: c - test - val, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn get(&self, s: Split) -> usize {
        match s {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub label: Scenario,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub split_seed: u64,
    /// Clips kept per class after balancing.
    pub class_size: usize,
    pub per_class: SplitCounts,
    pub counts: SplitCounts,
    /// Kept clips only; balanced-out clips are absent.
    pub assignments: BTreeMap<String, SplitAssignment>,
}

impl SplitManifest {
    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.assignments.get(id).map(|a| a.split)
    }

    pub fn ids_in(&self, split: Split) -> Vec<&str> {
        self.assignments.iter().filter(|(_, a)| a.split == split).map(|(id, _)| id.as_str()).collect()
    }

    pub fn count(&self, split: Split, label: Scenario) -> usize {
        self.assignments.values().filter(|a| a.split == split && a.label == label).count()
    }
}

/// Balances classes to the smaller one and splits each class into train/val/test.
///
/// Per class of `C` kept clips: test = ceil(C/5), val = floor((C - test)/5),
/// train takes the rest. Result depends only on the id set and `split_seed`.
pub fn balance_and_split<'a, I>(items: I, split_seed: u64) -> Result<SplitManifest>
where
    I: IntoIterator<Item = (&'a str, Scenario)>,
{
    let mut by_class: BTreeMap<Scenario, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (id, label) in items {
        if !seen.insert(id) {
            return Err(Error::InvalidInput(format!("duplicate clip id {id:?}")));
        }
        by_class.entry(label).or_default().push(id);
    }
    let classes = [Scenario::Violent, Scenario::NonViolent];
    let c = classes.iter().map(|k| by_class.get(k).map_or(0, Vec::len)).min().unwrap_or(0);
    if c == 0 {
        return Err(Error::InsufficientData("each class needs at least one clip".into()));
    }
    let per_class = SplitCounts::for_class_size(c);
    let mut rng = substream(split_seed, Substream::Split);
    let mut assignments = BTreeMap::new();
    for label in classes {
        let mut ids = by_class.remove(&label).unwrap_or_default();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        ids.truncate(c);
        let mut it = ids.into_iter();
        for split in [Split::Test, Split::Val, Split::Train] {
            for id in it.by_ref().take(per_class.get(split)) {
                assignments.insert(id.to_string(), SplitAssignment { label, split });
            }
        }
    }
    let counts = SplitCounts { train: 2 * per_class.train, val: 2 * per_class.val, test: 2 * per_class.test };
    Ok(SplitManifest { dataset: DATASET_NAME.into(), split_seed, class_size: c, per_class, counts, assignments })
}

/// One clip line of the exported manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestClip {
    pub id: String,
    pub label: Scenario,
    pub split: Split,
    pub frames: u32,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub split_seed: u64,
    pub clips: Vec<ManifestClip>,
}

impl DatasetManifest {
    pub fn build(clips: &[Clip], split: &SplitManifest) -> Result<Self> {
        let by_id: BTreeMap<&str, &Clip> = clips.iter().map(|c| (c.id.as_str(), c)).collect();
        let mut out = Vec::with_capacity(split.assignments.len());
        for (id, a) in &split.assignments {
            let clip = by_id.get(id.as_str()).ok_or_else(|| Error::InvalidInput(format!("manifest references unknown clip {id:?}")))?;
            if clip.label != a.label {
                return Err(Error::InvalidInput(format!("clip {id:?} label disagrees with the split manifest")));
            }
            out.push(ManifestClip {
                id: id.clone(),
                label: a.label,
                split: a.split,
                frames: clip.frame_count,
                duration_s: clip.duration_s,
                seed: clip.scenario_seed,
            });
        }
        Ok(DatasetManifest { dataset: split.dataset.clone(), split_seed: split.split_seed, clips: out })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Relative directory of a clip inside an exported dataset.
pub fn clip_dir(split: Split, label: Scenario, id: &str) -> PathBuf {
    Path::new(split.as_str()).join(label.as_str()).join(id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub clips: usize,
    pub frames: u64,
    pub manifest_path: PathBuf,
    pub manifest_sha256: String,
}

/// Re-renders every kept clip into `out_dir/<split>/<label>/<id>/` and writes the manifest.
///
/// With `write_frames` false only the manifest is written. On failure every
/// file this call created is removed.
pub fn export_dataset(clips: &[Clip], split: &SplitManifest, out_dir: &Path, write_frames: bool) -> Result<ExportSummary> {
    if clips.is_empty() || split.assignments.is_empty() {
        return Err(Error::InsufficientData("nothing to export".into()));
    }
    let manifest = DatasetManifest::build(clips, split)?;
    let existed = out_dir.exists();
    let mut created: Vec<PathBuf> = Vec::new();
    let result = export_into(clips, &manifest, out_dir, write_frames, &mut created);
    if result.is_err() {
        if existed {
            for p in created.iter().rev() {
                let _ = if p.is_dir() { fs::remove_dir_all(p) } else { fs::remove_file(p) };
            }
        } else {
            let _ = fs::remove_dir_all(out_dir);
        }
    }
    result.map_err(|e| match e {
        Error::Io(io) => Error::Export(io.to_string()),
        other => other,
    })
}

fn export_into(
    clips: &[Clip],
    manifest: &DatasetManifest,
    out_dir: &Path,
    write_frames: bool,
    created: &mut Vec<PathBuf>,
) -> Result<ExportSummary> {
    fs::create_dir_all(out_dir)?;
    let by_id: BTreeMap<&str, &Clip> = clips.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut frames = 0u64;
    if write_frames {
        for entry in &manifest.clips {
            let dir = out_dir.join(clip_dir(entry.split, entry.label, &entry.id));
            if !dir.exists() {
                created.push(dir.clone());
            }
            let mut sink = DirectorySink::create(&dir)?;
            let clip = record_clip(&by_id[entry.id.as_str()].spec, &mut sink)?;
            if clip.frame_count != entry.frames {
                return Err(Error::Export(format!("clip {} re-rendered {} frames, expected {}", entry.id, clip.frame_count, entry.frames)));
            }
            frames += clip.frame_count as u64;
        }
    }
    let text = manifest.to_json();
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        created.push(manifest_path.clone());
    }
    fs::write(&manifest_path, &text)?;
    Ok(ExportSummary {
        clips: manifest.clips.len(),
        frames,
        manifest_path,
        manifest_sha256: crate::behavior::hex_digest(text.as_bytes()),
    })
}

/// Recorded clips as written by the `record` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub dataset: String,
    pub clips: Vec<Clip>,
}

impl Inventory {
    pub fn new(clips: Vec<Clip>) -> Self {
        Inventory { dataset: DATASET_NAME.into(), clips }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("inventory serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Activity templates of the default suite, four per class.
pub const SUITE_TEMPLATES: [(&str, Activity); 8] = [
    ("punching", Activity::Punch),
    ("kicking", Activity::Kick),
    ("shooting", Activity::Shoot),
    ("chasing", Activity::Chase),
    ("talking", Activity::Talk),
    ("walking", Activity::Walk),
    ("dispersing", Activity::Disperse),
    ("dancing", Activity::Dance),
];

/// The 240-clip default suite: 30 variations of each template.
///
/// Violent clips pair the acting group with a smaller bystander group so
/// strikes and shots have targets; the label stays with the larger group.
pub fn default_suite() -> Vec<ClipSpec> {
    let mut rng = substream(SUITE_SEED, Substream::Suite);
    let mut out = Vec::with_capacity(SUITE_TEMPLATES.len() * SUITE_CLIPS_PER_TEMPLATE);
    for (name, activity) in SUITE_TEMPLATES {
        for i in 0..SUITE_CLIPS_PER_TEMPLATE {
            let seed: u64 = rng.random();
            let size = rng.random_range(4..=8usize);
            let duration_s = rng.random_range(3..=6u32) as f64;
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let mut groups = Vec::new();
            if activity.is_violent() {
                groups.push(GroupSpec { size, scenario: Scenario::Violent, activities: vec![activity] });
                let bystanders = rng.random_range(2..size);
                groups.push(GroupSpec { size: bystanders, scenario: Scenario::NonViolent, activities: vec![Activity::Talk, Activity::Phone] });
            } else {
                groups.push(GroupSpec { size, scenario: Scenario::NonViolent, activities: vec![activity] });
            }
            let script = ScenarioScript { name: Some(format!("{name}_{i:03}")), seed, duration_s, groups };
            let mut spec = ClipSpec::new(format!("{name}_{i:03}"), script);
            spec.uav.yaw = yaw;
            out.push(spec);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inventory(violent: usize, non_violent: usize) -> Vec<(String, Scenario)> {
        (0..violent)
            .map(|i| (format!("v{i:04}"), Scenario::Violent))
            .chain((0..non_violent).map(|i| (format!("n{i:04}"), Scenario::NonViolent)))
            .collect()
    }

    fn split(items: &[(String, Scenario)], seed: u64) -> Result<SplitManifest> {
        balance_and_split(items.iter().map(|(id, l)| (id.as_str(), *l)), seed)
    }

    #[test]
    fn frame_counts() {
        assert_eq!(frame_count(10.0).unwrap(), 300);
        assert_eq!(frame_count(4.5).unwrap(), 135);
        assert!(matches!(frame_count(10.01), Err(Error::InvalidScript(_))));
        assert!(frame_count(0.0).is_err());
        assert!(frame_count(f64::NAN).is_err());
    }

    #[test]
    fn table_counts() {
        for ((v, n), (train, val, test)) in [
            ((123, 123), (158, 38, 50)),
            ((100, 100), (128, 32, 40)),
            ((120, 120), (154, 38, 48)),
            ((230, 120), (154, 38, 48)),
        ] {
            let m = split(&inventory(v, n), 1).unwrap();
            assert_eq!(m.counts, SplitCounts { train, val, test }, "{v}+{n}");
        }
    }

    #[test]
    fn split_is_order_invariant_and_leak_free() {
        let mut items = inventory(40, 25);
        let a = split(&items, 9).unwrap();
        items.reverse();
        let b = split(&items, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignments.len(), 50);
        for s in Split::ALL {
            assert_eq!(a.count(s, Scenario::Violent), a.count(s, Scenario::NonViolent));
        }
        assert_ne!(a, split(&items, 10).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split(&inventory(5, 0), 1), Err(Error::InsufficientData(_))));
        assert!(matches!(split(&[], 1), Err(Error::InsufficientData(_))));
        let dup = vec![("a".to_string(), Scenario::Violent), ("a".to_string(), Scenario::NonViolent)];
        assert!(matches!(split(&dup, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn suite_composition() {
        let suite = default_suite();
        assert_eq!(suite.len(), 240);
        let violent = suite.iter().filter(|s| s.script.dominant_scenario() == Scenario::Violent).count();
        assert_eq!(violent, 120);
        let ids: BTreeSet<&str> = suite.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), 240);
        for s in &suite {
            assert!(frame_count(s.script.duration_s).unwrap() <= 300);
            for g in &s.script.groups {
                g.validate().unwrap();
            }
        }
        assert_eq!(suite, default_suite());
    }

    #[test]
    fn record_short_clip() {
        let script = ScenarioScript {
            name: None,
            seed: 11,
            duration_s: 0.2,
            groups: vec![
                GroupSpec { size: 4, scenario: Scenario::Violent, activities: vec![Activity::Punch] },
                GroupSpec { size: 3, scenario: Scenario::NonViolent, activities: vec![Activity::Talk] },
            ],
        };
        let spec = ClipSpec::new("c0", script);
        let mut ticks = Vec::new();
        let mut sink = |i: u32, f: &FrameSet, a: &FrameAnnotation| {
            assert_eq!(f.tick, a.tick);
            ticks.push((i, f.tick));
            Ok(())
        };
        let clip = record_clip(&spec, &mut sink).unwrap();
        assert_eq!(clip.frame_count, 6);
        assert_eq!(clip.label, Scenario::Violent);
        assert_eq!(ticks, (0..6).map(|i| (i, i as u64 + 1)).collect::<Vec<_>>());

        let mut a = DigestSink::default();
        let mut b = DigestSink::default();
        record_clip(&spec, &mut a).unwrap();
        record_clip(&spec, &mut b).unwrap();
        assert_eq!(a.frames, 6);
        assert_eq!(a.finish(), b.finish());
    }

    #[test]
    fn record_rejects_long_or_empty_scripts() {
        let mut script = ScenarioScript::random(3, 10, 10.5).unwrap();
        assert!(matches!(record_clip(&ClipSpec::new("x", script.clone()), &mut DiscardSink), Err(Error::InvalidScript(_))));
        script.duration_s = 1.0;
        script.groups.clear();
        assert!(matches!(record_clip(&ClipSpec::new("x", script), &mut DiscardSink), Err(Error::InvalidScript(_))));
    }

    #[test]
    fn export_rejects_unknown_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let m = split(&inventory(2, 2), 1).unwrap();
        assert!(matches!(export_dataset(&[], &m, dir.path(), false), Err(Error::InsufficientData(_))));
        let script = ScenarioScript::random(3, 6, 1.0).unwrap();
        let clip = Clip {
            id: "other".into(),
            label: Scenario::Violent,
            fps: FPS,
            width: 640,
            height: 480,
            duration_s: 1.0,
            frame_count: 30,
            scenario_seed: 3,
            spec: ClipSpec::new("other", script),
        };
        let out = dir.path().join("ds");
        assert!(matches!(export_dataset(&[clip], &m, &out, false), Err(Error::InvalidInput(_))));
        assert!(!out.exists());
    }
}
