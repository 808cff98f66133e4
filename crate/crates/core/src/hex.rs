//! Axial hex coordinates, pointy-top layout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{round_half_away, Vec2};

/// Axial coordinate. The implicit cube coordinate is `s = -q - r`.
///
/// Ordering is lexicographic on `(q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HexCoord {
    pub q: i32,
    pub r: i32,
}

/// Neighbor offsets in their fixed order. Index `i` and `(i + 3) % 6` are opposites.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

impl HexCoord {
    pub const ORIGIN: HexCoord = HexCoord { q: 0, r: 0 };

    pub const fn new(q: i32, r: i32) -> Self {
        HexCoord { q, r }
    }

    pub const fn s(self) -> i32 {
        -self.q - self.r
    }

    pub fn neighbors(self) -> [HexCoord; 6] {
        NEIGHBOR_OFFSETS.map(|(dq, dr)| HexCoord::new(self.q + dq, self.r + dr))
    }

    pub fn neighbor(self, direction: usize) -> HexCoord {
        let (dq, dr) = NEIGHBOR_OFFSETS[direction % 6];
        HexCoord::new(self.q + dq, self.r + dr)
    }

    /// Ring distance from the origin.
    pub fn ring(self) -> u32 {
        self.q.unsigned_abs().max(self.r.unsigned_abs()).max(self.s().unsigned_abs())
    }

    pub fn distance(self, other: HexCoord) -> u32 {
        HexCoord::new(self.q - other.q, self.r - other.r).ring()
    }

    /// Cells on the straight cube-space line from `self` to `other`, both ends included.
    pub fn line_to(self, other: HexCoord) -> Vec<HexCoord> {
        let n = self.distance(other);
        if n == 0 {
            return vec![self];
        }
        // The nudge keeps lerped points off cell edges so rounding is unambiguous.
        let (aq, ar) = (self.q as f64 + 1e-6, self.r as f64 + 1e-6);
        let (bq, br) = (other.q as f64 + 1e-6, other.r as f64 + 1e-6);
        (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                round_axial(aq + (bq - aq) * t, ar + (br - ar) * t)
            })
            .collect()
    }
}

impl fmt::Display for HexCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.q, self.r)
    }
}

pub fn neighbors(c: HexCoord) -> [HexCoord; 6] {
    c.neighbors()
}

/// Number of cells within `radius` rings of the origin.
pub fn cell_count(radius: u32) -> usize {
    let r = radius as usize;
    3 * r * r + 3 * r + 1
}

pub fn hex_to_world(c: HexCoord, tile_size: f64) -> Result<Vec2> {
    if !(tile_size > 0.0 && tile_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("tile_size must be > 0, got {tile_size}")));
    }
    Ok(hex_center(c, tile_size))
}

/// Unchecked `hex_to_world` for callers holding a validated tile size.
#[inline]
pub(crate) fn hex_center(c: HexCoord, tile_size: f64) -> Vec2 {
    let q = c.q as f64;
    let r = c.r as f64;
    Vec2::new(tile_size * 3f64.sqrt() * (q + r / 2.0), tile_size * 1.5 * r)
}

/// Cell containing the world point.
#[inline]
pub fn world_to_hex(p: Vec2, tile_size: f64) -> HexCoord {
    let q = (3f64.sqrt() / 3.0 * p.x - p.y / 3.0) / tile_size;
    let r = (2.0 / 3.0 * p.y) / tile_size;
    round_axial(q, r)
}

#[inline]
pub(crate) fn round_axial(q: f64, r: f64) -> HexCoord {
    let s = -q - r;
    let mut rq = round_half_away(q);
    let mut rr = round_half_away(r);
    let rs = round_half_away(s);
    let dq = (rq - q).abs();
    let dr = (rr - r).abs();
    let ds = (rs - s).abs();
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    HexCoord::new(rq as i32, rr as i32)
}

/// All cells within `radius` rings, in canonical `(r, q)` ascending order.
pub fn cells_within(radius: u32) -> impl Iterator<Item = HexCoord> {
    let r = radius as i32;
    (-r..=r).flat_map(move |row| {
        let q_lo = (-r).max(-row - r);
        let q_hi = r.min(-row + r);
        (q_lo..=q_hi).map(move |q| HexCoord::new(q, row))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hc(q: i32, r: i32) -> HexCoord {
        HexCoord::new(q, r)
    }

    #[test]
    fn neighbors_of_origin_in_fixed_order() {
        assert_eq!(
            neighbors(hc(0, 0)),
            [hc(1, 0), hc(1, -1), hc(0, -1), hc(-1, 0), hc(-1, 1), hc(0, 1)]
        );
    }

    #[test]
    fn neighbors_translate() {
        assert_eq!(
            neighbors(hc(2, -1)),
            [hc(3, -1), hc(3, -2), hc(2, -2), hc(1, -1), hc(1, 0), hc(2, 0)]
        );
    }

    #[test]
    fn hex_to_world_examples() {
        let o = hex_to_world(hc(0, 0), 3.7).unwrap();
        assert_eq!((o.x, o.y), (0.0, 0.0));
        let a = hex_to_world(hc(1, 0), 10.0).unwrap();
        assert!((a.x - 10.0 * 3f64.sqrt()).abs() < 1e-12 && a.y == 0.0);
        let b = hex_to_world(hc(0, 2), 10.0).unwrap();
        assert!((b.x - 17.320508075688775).abs() < 1e-9 && (b.y - 30.0).abs() < 1e-12);
    }

    #[test]
    fn hex_to_world_rejects_bad_size() {
        assert!(matches!(hex_to_world(hc(0, 0), 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(hex_to_world(hc(0, 0), -1.0), Err(Error::InvalidParameter(_))));
        assert!(hex_to_world(hc(0, 0), f64::NAN).is_err());
    }

    #[test]
    fn cell_enumeration_matches_count() {
        for radius in 0..=12 {
            let cells: Vec<_> = cells_within(radius).collect();
            assert_eq!(cells.len(), cell_count(radius));
            assert!(cells.iter().all(|c| c.ring() <= radius));
            assert!(cells.windows(2).all(|w| (w[0].r, w[0].q) < (w[1].r, w[1].q)));
        }
    }

    #[test]
    fn line_is_a_walk() {
        let line = hc(-3, 1).line_to(hc(4, -2));
        assert_eq!(line.len() as u32, hc(-3, 1).distance(hc(4, -2)) + 1);
        assert!(line.windows(2).all(|w| w[0].distance(w[1]) == 1));
    }

    proptest! {
        #[test]
        fn opposite_neighbor_returns(q in -1000i32..1000, r in -1000i32..1000) {
            let c = hc(q, r);
            for i in 0..6 {
                prop_assert_eq!(c.neighbor(i).neighbor(i + 3), c);
            }
            prop_assert_eq!(neighbors(neighbors(c)[0])[3], c);
            prop_assert_eq!(c.q + c.r + c.s(), 0);
        }

        #[test]
        fn center_maps_back(q in -50i32..50, r in -50i32..50, size in 0.5f64..40.0) {
            let c = hc(q, r);
            prop_assert_eq!(world_to_hex(hex_to_world(c, size).unwrap(), size), c);
        }
    }
}
