//! Stroke-drawn "7"-like glyphs on a 28x28 canvas, standing in for a digit
//! class of an IDX image file when none is available.

use rand::Rng as _;

use crate::raster::Grid;
use crate::rng::{derive_seed, rng_from_seed, Stream};

pub const GLYPH_SIZE: usize = 28;

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

/// One gray-level glyph; strokes are anti-aliased over one pixel.
pub fn seven_glyph(seed: u64) -> Grid<u8> {
    let mut rng = rng_from_seed(seed);
    let top = rng.random_range(5.0..8.5);
    let left = rng.random_range(5.5..9.5);
    let right = rng.random_range(18.5..22.5);
    let tilt = rng.random_range(-1.5..1.5);
    let foot_x = rng.random_range(9.0..14.5);
    let foot_y = rng.random_range(22.0..25.0);
    let half_width = rng.random_range(1.2..2.0);
    let corner = [right, top + tilt];
    let mut strokes = vec![([left, top], corner), (corner, [foot_x, foot_y])];
    if rng.random::<f64>() < 0.3 {
        let t = rng.random_range(0.4..0.6);
        let mx = corner[0] + t * (foot_x - corner[0]);
        let my = corner[1] + t * (foot_y - corner[1]);
        let half = rng.random_range(2.5..3.5);
        strokes.push(([mx - half, my], [mx + half, my]));
    }
    Grid::from_fn(GLYPH_SIZE, GLYPH_SIZE, |r, c| {
        let p = [c as f64 + 0.5, r as f64 + 0.5];
        let d = strokes
            .iter()
            .map(|&(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        (255.0 * (half_width + 0.5 - d).clamp(0.0, 1.0)).round() as u8
    })
}

/// `count` glyphs, glyph `i` drawn from a seed derived from `(seed, i)`.
pub fn seven_glyphs(count: usize, seed: u64) -> Vec<Grid<u8>> {
    (0..count)
        .map(|i| seven_glyph(derive_seed(seed, Stream::Data, i as u64)))
        .collect()
}
