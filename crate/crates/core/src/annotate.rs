//! Crowd-group boxes from segmentation frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{Image, Pass, Rgb, SegPalette};

pub const DEFAULT_GAP_PX: u32 = 12;
/// Components smaller than this are treated as noise.
pub const MIN_COMPONENT_PIXELS: usize = 4;
pub const BOX_COLOR: Rgb = [0, 255, 0];
pub const BOX_THICKNESS: u32 = 2;

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        BBox { x_min, y_min, x_max, y_max }
    }

    pub fn union(self, o: BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(o.x_min),
            y_min: self.y_min.min(o.y_min),
            x_max: self.x_max.max(o.x_max),
            y_max: self.y_max.max(o.y_max),
        }
    }

    pub fn contains(self, x: u32, y: u32) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    /// Whether the two boxes overlap once each grows by `gap` pixels on every side.
    pub fn near(self, o: BBox, gap: u32) -> bool {
        let g = 2 * gap as i64;
        o.x_min as i64 - self.x_max as i64 <= g
            && self.x_min as i64 - o.x_max as i64 <= g
            && o.y_min as i64 - self.y_max as i64 <= g
            && self.y_min as i64 - o.y_max as i64 <= g
    }

    pub fn width(self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(self) -> u32 {
        self.y_max - self.y_min + 1
    }

    fn sort_key(self) -> (u32, u32, u32, u32) {
        (self.y_min, self.x_min, self.y_max, self.x_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelComponent {
    pub pixel_count: usize,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBox {
    #[serde(flatten)]
    pub bbox: BBox,
    pub component_count: usize,
}

/// Per-frame annotation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub tick: u64,
    pub boxes: Vec<GroupBox>,
}

/// 8-connected components of pixels exactly equal to `key`, sorted by `(y_min, x_min)`.
pub fn extract_components(seg: &Image, key: Rgb) -> Result<Vec<PixelComponent>> {
    if seg.pass != Pass::Segmentation {
        return Err(Error::InvalidInput(format!("expected a segmentation image, got {:?}", seg.pass)));
    }
    let data = seg.rgb_data().ok_or_else(|| Error::InvalidInput("segmentation image without color data".into()))?;
    let mask: Vec<bool> = data.chunks_exact(3).map(|p| p == key).collect();
    Ok(components_of_mask(&mask, seg.width, seg.height))
}

/// Labels a row-major boolean mask. Exposed for callers holding masks directly.
pub fn components_of_mask(mask: &[bool], width: u32, height: u32) -> Vec<PixelComponent> {
    assert_eq!(mask.len(), width as usize * height as usize, "mask size");
    let (w, h) = (width as i64, height as i64);
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (sx, sy) = ((start as i64 % w) as u32, (start as i64 / w) as u32);
        let mut bbox = BBox::new(sx, sy, sx, sy);
        let mut count = 0;
        while let Some(i) = stack.pop() {
            count += 1;
            let (x, y) = (i as i64 % w, i as i64 / w);
            bbox = bbox.union(BBox::new(x as u32, y as u32, x as u32, y as u32));
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if count >= MIN_COMPONENT_PIXELS {
            out.push(PixelComponent { pixel_count: count, bbox });
        }
    }
    out.sort_by_key(|c| (c.bbox.sort_key(), c.pixel_count));
    out
}

/// Groups components whose `gap_px`-dilated boxes intersect, transitively.
///
/// Merging continues over the grown group boxes until no two groups are
/// near each other, so output boxes never overlap.
pub fn merge_groups(comps: &[PixelComponent], gap_px: u32) -> Vec<GroupBox> {
    let mut groups: Vec<GroupBox> = comps.iter().map(|c| GroupBox { bbox: c.bbox, component_count: 1 }).collect();
    loop {
        let mut merged = false;
        let mut i = 0;
        while i < groups.len() {
            let mut j = i + 1;
            while j < groups.len() {
                if groups[i].bbox.near(groups[j].bbox, gap_px) {
                    let other = groups.swap_remove(j);
                    groups[i].bbox = groups[i].bbox.union(other.bbox);
                    groups[i].component_count += other.component_count;
                    merged = true;
                    j = i + 1;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            break;
        }
    }
    groups.sort_by_key(|g| (g.bbox.sort_key(), g.component_count));
    groups
}

/// Copy of `rgb` with each box outlined by a `BOX_THICKNESS` band inside its edge.
pub fn overlay(rgb: &Image, boxes: &[GroupBox]) -> Result<Image> {
    if rgb.pass != Pass::Rgb {
        return Err(Error::InvalidInput(format!("overlay needs an RGB image, got {:?}", rgb.pass)));
    }
    let mut out = rgb.clone();
    let (w, h) = (rgb.width, rgb.height);
    let crate::render::Pixels::Rgb(data) = &mut out.pixels else {
        return Err(Error::InvalidInput("RGB image without color data".into()));
    };
    for g in boxes {
        let b = g.bbox;
        if b.x_min >= w || b.y_min >= h {
            continue;
        }
        for y in b.y_min..=b.y_max.min(h - 1) {
            for x in b.x_min..=b.x_max.min(w - 1) {
                let edge = x - b.x_min < BOX_THICKNESS
                    || b.x_max - x < BOX_THICKNESS
                    || y - b.y_min < BOX_THICKNESS
                    || b.y_max - y < BOX_THICKNESS;
                if edge {
                    let i = (y as usize * w as usize + x as usize) * 3;
                    data[i..i + 3].copy_from_slice(&BOX_COLOR);
                }
            }
        }
    }
    Ok(out)
}

/// Agent components and their groups for one segmentation frame.
pub fn annotate_frame(seg: &Image, tick: u64, gap_px: u32) -> Result<FrameAnnotation> {
    let comps = extract_components(seg, SegPalette::AGENT)?;
    Ok(FrameAnnotation { tick, boxes: merge_groups(&comps, gap_px) })
}
