//! Marching-squares outlines of binary masks at the 0.5 level.
//!
//! Sample points are pixel centers and the mask is padded with background,
//! so every traced ring is closed. Diagonally touching foreground pixels are
//! treated as separate components.

use std::collections::HashMap;

use super::raster::Bitmask;

/// Doubled coordinates, which keeps every crossing point integral.
type Key = (i64, i64);

/// Closed rings (without the repeated first vertex) around every
/// foreground component and hole. Outer rings have positive shoelace area
/// in image coordinates; holes are negative.
pub fn trace_rings(mask: &Bitmask) -> Vec<Vec<[f64; 2]>> {
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    let value = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && mask.get(x as u32, y as u32);

    let mut next: HashMap<Key, Key> = HashMap::new();
    for y in -1..h {
        for x in -1..w {
            // corners clockwise in image coordinates: tl, tr, br, bl
            let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let v = corners.map(|(cx, cy)| value(cx, cy));
            if v.iter().all(|&b| b) || v.iter().all(|&b| !b) {
                continue;
            }
            // crossing on cell edge i, between corners i and i+1, in doubled pixel-center units
            let crossing = |i: usize| -> Key {
                let (a, b) = (corners[i], corners[(i + 1) % 4]);
                (a.0 + b.0 + 1, a.1 + b.1 + 1)
            };
            for enter in 0..4 {
                if v[enter] || !v[(enter + 1) % 4] {
                    continue;
                }
                let mut leave = (enter + 1) % 4;
                while v[(leave + 1) % 4] {
                    leave = (leave + 1) % 4;
                }
                next.insert(crossing(leave), crossing(enter));
            }
        }
    }

    let mut starts: Vec<Key> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut rings = Vec::new();
    for start in starts {
        if !next.contains_key(&start) {
            continue;
        }
        let mut ring = vec![start];
        let mut cur = next.remove(&start).expect("present");
        while cur != start {
            ring.push(cur);
            cur = next.remove(&cur).expect("marching-squares segments form closed loops");
        }
        let ring = drop_collinear(ring);
        rings.push(ring.iter().map(|&(x, y)| [x as f64 / 2.0, y as f64 / 2.0]).collect());
    }
    rings
}

fn drop_collinear(ring: Vec<Key>) -> Vec<Key> {
    let n = ring.len();
    if n < 4 {
        return ring;
    }
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| ring[i])
        .collect()
}

pub(crate) fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Outer boundaries only; hole rings are dropped.
pub fn trace_outlines(mask: &Bitmask) -> Vec<Vec<[f64; 2]>> {
    trace_rings(mask)
        .into_iter()
        .filter(|r| signed_area(r) > 0.0)
        .collect()
}
