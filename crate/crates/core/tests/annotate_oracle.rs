mod common;

use common::{closure_groups, flood_fill, mask_to_seg, random_mask, Rect};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavcrowd::annotate::{extract_components, merge_groups, overlay, BBox, GroupBox, PixelComponent, BOX_COLOR};
use uavcrowd::render::{Image, Pass, SegPalette};

fn rect(b: BBox) -> Rect {
    [b.x_min, b.y_min, b.x_max, b.y_max]
}

fn as_components(found: &[(usize, Rect)]) -> Vec<PixelComponent> {
    found.iter().map(|&(n, r)| PixelComponent { pixel_count: n, bbox: BBox::new(r[0], r[1], r[2], r[3]) }).collect()
}

fn group_rects(groups: &[GroupBox]) -> Vec<(Rect, usize)> {
    groups.iter().map(|g| (rect(g.bbox), g.component_count)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn components_match_flood_fill(seed in any::<u64>(), w in 1u32..48, h in 1u32..48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(&mut rng, w, h);
        let seg = mask_to_seg(&mut rng, &mask, w, h);
        let got = extract_components(&seg, SegPalette::AGENT).unwrap();
        let got: Vec<(usize, Rect)> = got.iter().map(|c| (c.pixel_count, rect(c.bbox))).collect();
        prop_assert_eq!(got, flood_fill(&mask, w, h));
    }

    #[test]
    fn merge_matches_closure(seed in any::<u64>(), w in 1u32..64, h in 1u32..64, gap in 0u32..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(&mut rng, w, h);
        let comps = flood_fill(&mask, w, h);
        let rects: Vec<Rect> = comps.iter().map(|c| c.1).collect();
        let got = merge_groups(&as_components(&comps), gap);
        prop_assert_eq!(group_rects(&got), closure_groups(&rects, gap));
    }

    #[test]
    fn small_scenes_match_closure(
        boxes in prop::collection::vec((0u32..16, 0u32..16, 0u32..6, 0u32..6), 0..=3),
        gap in 0u32..8,
    ) {
        let rects: Vec<Rect> = boxes.iter().map(|&(x, y, bw, bh)| [x, y, (x + bw).min(15), (y + bh).min(15)]).collect();
        let comps: Vec<PixelComponent> = rects
            .iter()
            .map(|r| PixelComponent { pixel_count: 4, bbox: BBox::new(r[0], r[1], r[2], r[3]) })
            .collect();
        prop_assert_eq!(group_rects(&merge_groups(&comps, gap)), closure_groups(&rects, gap));
    }

    #[test]
    fn merge_ignores_input_order(seed in any::<u64>(), gap in 0u32..20, shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = random_mask(&mut rng, 64, 48);
        let comps = as_components(&flood_fill(&mask, 64, 48));
        let mut shuffled = comps.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        prop_assert_eq!(merge_groups(&comps, gap), merge_groups(&shuffled, gap));
    }

    #[test]
    fn every_kept_pixel_in_exactly_one_box(seed in any::<u64>(), gap in 0u32..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (64, 48);
        let mask = random_mask(&mut rng, w, h);
        let seg = mask_to_seg(&mut rng, &mask, w, h);
        let comps = extract_components(&seg, SegPalette::AGENT).unwrap();
        let groups = merge_groups(&comps, gap);
        let total: usize = groups.iter().map(|g| g.component_count).sum();
        prop_assert_eq!(total, comps.len());
        // Pixels of noise components (< 4 px) are not required to be covered.
        let kept: Vec<bool> = {
            let mut k = vec![false; mask.len()];
            for c in &comps {
                for y in c.bbox.y_min..=c.bbox.y_max {
                    for x in c.bbox.x_min..=c.bbox.x_max {
                        k[(y * w + x) as usize] = true;
                    }
                }
            }
            k
        };
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if mask[i] && kept[i] {
                    let n = groups.iter().filter(|g| g.bbox.contains(x, y)).count();
                    prop_assert_eq!(n, 1, "pixel ({}, {}) in {} boxes", x, y, n);
                }
            }
        }
    }

    #[test]
    fn overlay_touches_only_the_band(x0 in 0u32..40, y0 in 0u32..30, bw in 0u32..30, bh in 0u32..30) {
        let (w, h) = (48, 36);
        let rgb = Image::filled(w, h, Pass::Rgb, [10, 20, 30]);
        let b = BBox::new(x0, y0, x0 + bw, y0 + bh);
        let boxes = [GroupBox { bbox: b, component_count: 1 }];
        let once = overlay(&rgb, &boxes).unwrap();
        prop_assert_eq!(&overlay(&once, &boxes).unwrap(), &once);
        for y in 0..h {
            for x in 0..w {
                let inside = b.contains(x, y);
                let band = inside
                    && (x < b.x_min + 2 || x + 2 > b.x_max || y < b.y_min + 2 || y + 2 > b.y_max);
                let want = if band { BOX_COLOR } else { [10, 20, 30] };
                prop_assert_eq!(once.rgb(x, y), want, "pixel ({}, {})", x, y);
            }
        }
    }
}

#[test]
fn overlay_without_boxes_is_identity() {
    let rgb = Image::filled(8, 8, Pass::Rgb, [1, 2, 3]);
    assert_eq!(overlay(&rgb, &[]).unwrap(), rgb);
}

#[test]
fn pairwise_example_distances() {
    let comp = |x0, x1| PixelComponent { pixel_count: 25, bbox: BBox::new(x0, 10, x1, 14) };
    // 5 px apart: merged at the default gap.
    let near = merge_groups(&[comp(0, 4), comp(10, 14)], 12);
    assert_eq!(near.len(), 1);
    assert_eq!(near[0].bbox, BBox::new(0, 10, 14, 14));
    // 40 px apart: separate.
    assert_eq!(merge_groups(&[comp(0, 4), comp(45, 49)], 12).len(), 2);
}
