//! Scanline rasterization of pixel-space polygons.
//!
//! A pixel belongs to a polygon when its center lies inside under the
//! even-odd rule, with half-open edge crossings so shared edges are never
//! counted twice.

/// Row-major bitmask over an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmask {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl Bitmask {
    pub fn new(width: u32, height: u32) -> Self {
        let (width, height) = (width as usize, height as usize);
        let words_per_row = width.div_ceil(64);
        Bitmask {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height],
        }
    }

    pub fn width(&self) -> u32 {
        self.width as u32
    }

    pub fn height(&self) -> u32 {
        self.height as u32
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let (x, y) = (x as usize, y as usize);
        if x >= self.width || y >= self.height {
            return false;
        }
        self.words[y * self.words_per_row + x / 64] >> (x % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32) {
        let (x, y) = (x as usize, y as usize);
        if x < self.width && y < self.height {
            self.words[y * self.words_per_row + x / 64] |= 1 << (x % 64);
        }
    }

    /// Sets pixels `x0..x1` of row `y`.
    fn set_span(&mut self, y: usize, x0: usize, x1: usize) {
        let row = &mut self.words[y * self.words_per_row..(y + 1) * self.words_per_row];
        let mut x = x0;
        while x < x1 {
            let (w, bit) = (x / 64, x % 64);
            let n = (64 - bit).min(x1 - x);
            let bits = if n == 64 { u64::MAX } else { ((1u64 << n) - 1) << bit };
            row[w] |= bits;
            x += n;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn intersection_count(&self, other: &Bitmask) -> u64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum()
    }

    pub fn union_count(&self, other: &Bitmask) -> u64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a | b).count_ones()))
            .sum()
    }

    /// Fills `ring` (implicitly closed) into the mask, leaving set pixels set.
    pub fn fill_polygon(&mut self, ring: &[[f64; 2]]) {
        if ring.len() < 3 || self.width == 0 || self.height == 0 {
            return;
        }
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in ring {
            min_y = min_y.min(p[1]);
            max_y = max_y.max(p[1]);
        }
        let y_start = (min_y - 0.5).ceil().max(0.0) as usize;
        let y_end = ((max_y - 0.5).ceil().max(0.0) as usize).min(self.height);
        let mut xs = Vec::with_capacity(8);
        for y in y_start..y_end {
            let py = y as f64 + 0.5;
            xs.clear();
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                if (a[1] > py) != (b[1] > py) {
                    xs.push(a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // centers x + 0.5 with pair[0] <= x + 0.5 < pair[1]
                let x0 = (pair[0] - 0.5).ceil().max(0.0) as usize;
                let x1 = ((pair[1] - 0.5).ceil().max(0.0) as usize).min(self.width);
                if x0 < x1 {
                    self.set_span(y, x0, x1);
                }
            }
        }
    }

    pub fn from_polygon(ring: &[[f64; 2]], width: u32, height: u32) -> Self {
        let mut m = Bitmask::new(width, height);
        m.fill_polygon(ring);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Per-pixel even-odd crossing test at pixel centers.
    fn brute_force(ring: &[[f64; 2]], w: u32, h: u32) -> Bitmask {
        let mut m = Bitmask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut inside = false;
                for i in 0..ring.len() {
                    let a = ring[i];
                    let b = ring[(i + 1) % ring.len()];
                    if (a[1] > py) != (b[1] > py) {
                        let xc = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if px < xc {
                            inside = !inside;
                        }
                    }
                }
                if inside {
                    m.set(x, y);
                }
            }
        }
        m
    }

    #[test]
    fn square_fills_exactly() {
        let sq = [[10.0, 10.0], [110.0, 10.0], [110.0, 110.0], [10.0, 110.0]];
        let m = Bitmask::from_polygon(&sq, 200, 150);
        assert_eq!(m.count_ones(), 10_000);
        assert!(m.get(10, 10) && m.get(109, 109));
        assert!(!m.get(110, 50) && !m.get(9, 50));
    }

    #[test]
    fn clipped_to_image() {
        let sq = [[-50.0, -50.0], [50.0, -50.0], [50.0, 50.0], [-50.0, 50.0]];
        assert_eq!(Bitmask::from_polygon(&sq, 30, 20).count_ones(), 600);
    }

    #[test]
    fn wide_rows_cross_word_boundaries() {
        let r = [[3.0, 0.0], [200.0, 0.0], [200.0, 2.0], [3.0, 2.0]];
        assert_eq!(Bitmask::from_polygon(&r, 256, 4).count_ones(), 2 * 197);
    }

    proptest! {
        #[test]
        fn scanline_matches_per_pixel_test(pts in prop::collection::vec((0u32..=48, 0u32..=40), 3..8)) {
            let ring: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
            prop_assert_eq!(Bitmask::from_polygon(&ring, 48, 40), brute_force(&ring, 48, 40));
        }

        #[test]
        fn fractional_vertices_match_per_pixel_test(pts in prop::collection::vec((0.0f64..32.0, 0.0f64..32.0), 3..7)) {
            let ring: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            prop_assert_eq!(Bitmask::from_polygon(&ring, 32, 32), brute_force(&ring, 32, 32));
        }
    }
}
