use ndarray::Array2;
use rand::Rng as _;

use crate::data::{Split, TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::raster::{pixel_center, BinaryMask, Grid};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    /// Nearest-neighbour rotation about the raster center.
    Rotate { angle_degrees: f64 },
    /// Zero one axis-aligned rectangle holding about `fraction` of the set pixels.
    Occlude { fraction: f64 },
    /// 4-connected binary erosion.
    Erode { iterations: usize },
    /// Hide every `stride`-th row and column (indices divisible by `stride`).
    GridMask { stride: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub kind: Corruption,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: Corruption, seed: u64) -> Self {
        CorruptionSpec { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            Corruption::Rotate { angle_degrees } if !angle_degrees.is_finite() => {
                Err(Error::Argument("rotation angle must be finite".into()))
            }
            Corruption::Occlude { fraction } if !(0.0..=1.0).contains(&fraction) => Err(
                Error::Argument(format!("occlusion fraction {fraction} outside [0, 1]")),
            ),
            Corruption::GridMask { stride } if stride < 2 => Err(Error::Argument(format!(
                "grid-mask stride {stride} must be at least 2"
            ))),
            _ => Ok(()),
        }
    }
}

/// Binary occupancy raster with its observation mask and corruption history.
#[derive(Debug, Clone, PartialEq)]
pub struct GridShape {
    pub grid: BinaryMask,
    /// `true` where the pixel is observed.
    pub sparsity: BinaryMask,
    pub corruption_log: Vec<CorruptionSpec>,
}

impl GridShape {
    pub fn dense(grid: BinaryMask) -> Self {
        let (h, w) = grid.dims();
        GridShape {
            grid,
            sparsity: Grid::filled(h, w, true),
            corruption_log: Vec::new(),
        }
    }

    pub fn observed_count(&self) -> usize {
        self.sparsity.count_ones()
    }

    /// Occupancy with unobserved pixels set to empty, as fed to the encoder.
    pub fn zero_filled(&self) -> BinaryMask {
        Grid::from_fn(self.grid.height(), self.grid.width(), |r, c| {
            *self.grid.get(r, c) && *self.sparsity.get(r, c)
        })
    }
}

pub fn rotate_nearest(grid: &BinaryMask, angle_degrees: f64) -> BinaryMask {
    let (h, w) = grid.dims();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (sin, cos) = angle_degrees.to_radians().sin_cos();
    Grid::from_fn(h, w, |r, c| {
        let (dy, dx) = (r as f64 - cy, c as f64 - cx);
        // Inverse map: destination pixel looks up the source rotated by -angle.
        let sx = (cos * dx + sin * dy + cx).round();
        let sy = (-sin * dx + cos * dy + cy).round();
        if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
            false
        } else {
            *grid.get(sy as usize, sx as usize)
        }
    })
}

pub fn erode4(grid: &BinaryMask) -> BinaryMask {
    let (h, w) = grid.dims();
    Grid::from_fn(h, w, |r, c| {
        *grid.get(r, c)
            && r > 0
            && c > 0
            && r + 1 < h
            && c + 1 < w
            && *grid.get(r - 1, c)
            && *grid.get(r + 1, c)
            && *grid.get(r, c - 1)
            && *grid.get(r, c + 1)
    })
}

fn count_in(grid: &BinaryMask, r0: usize, r1: usize, c0: usize, c1: usize) -> usize {
    (r0..r1)
        .map(|r| (c0..c1).filter(|&c| *grid.get(r, c)).count())
        .sum()
}

/// Rectangle `[r0, r1) x [c0, c1)` grown around a random set pixel until it
/// holds at least `fraction` of the set pixels.
fn occlusion_rect(
    grid: &BinaryMask,
    fraction: f64,
    seed: u64,
) -> Option<(usize, usize, usize, usize)> {
    let on = grid.ones();
    let target = (fraction * on.len() as f64).round() as usize;
    if on.is_empty() || target == 0 {
        return None;
    }
    let mut rng = rng_from_seed(seed);
    let (cr, cc) = on[rng.random_range(0..on.len())];
    let aspect: f64 = rng.random_range(0.5..2.0);
    let (h, w) = grid.dims();
    let mut best = (cr, cr + 1, cc, cc + 1);
    for step in 1..=2 * h.max(w) {
        let half_h = (step as f64 * aspect.sqrt() / 2.0).ceil() as usize;
        let half_w = (step as f64 / aspect.sqrt() / 2.0).ceil() as usize;
        let rect = (
            cr.saturating_sub(half_h),
            (cr + half_h).min(h),
            cc.saturating_sub(half_w),
            (cc + half_w).min(w),
        );
        best = rect;
        if count_in(grid, rect.0, rect.1, rect.2, rect.3) >= target {
            break;
        }
    }
    Some(best)
}

/// Apply one corruption and append it to the log.
pub fn apply_corruption(shape: &GridShape, spec: &CorruptionSpec) -> Result<GridShape> {
    spec.validate()?;
    let mut out = shape.clone();
    match spec.kind {
        Corruption::Rotate { angle_degrees } => {
            out.grid = rotate_nearest(&shape.grid, angle_degrees)
        }
        Corruption::Occlude { fraction } => {
            if let Some((r0, r1, c0, c1)) = occlusion_rect(&shape.grid, fraction, spec.seed) {
                for r in r0..r1 {
                    for c in c0..c1 {
                        out.grid.set(r, c, false);
                    }
                }
            }
        }
        Corruption::Erode { iterations } => {
            for _ in 0..iterations {
                out.grid = erode4(&out.grid);
            }
        }
        Corruption::GridMask { stride } => {
            for r in 0..shape.sparsity.height() {
                for c in 0..shape.sparsity.width() {
                    if r % stride == 0 || c % stride == 0 {
                        out.sparsity.set(r, c, false);
                    }
                }
            }
        }
    }
    out.corruption_log.push(*spec);
    Ok(out)
}

/// Occupancy points for a collection of shapes. Training splits expose only
/// observed pixels; test splits expose every pixel of `targets`.
pub fn occupancy_dataset(
    shapes: &[GridShape],
    split: Split,
    provenance: &str,
) -> Result<(TaskDataset, Vec<usize>)> {
    let mut coords = Vec::new();
    let mut targets = Vec::new();
    let mut ids = Vec::new();
    for (i, s) in shapes.iter().enumerate() {
        let (h, w) = s.grid.dims();
        for r in 0..h {
            for c in 0..w {
                if split == Split::Train && !*s.sparsity.get(r, c) {
                    continue;
                }
                coords.push(pixel_center(c, w));
                coords.push(pixel_center(r, h));
                targets.push(if *s.grid.get(r, c) { 1.0 } else { 0.0 });
                ids.push(i);
            }
        }
    }
    let n = targets.len();
    let coords = Array2::from_shape_vec((n, 2), coords).expect("two coordinates per point");
    Ok((
        TaskDataset::new(TaskKind::Occupancy, split, coords, targets, provenance)?,
        ids,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> BinaryMask {
        Grid::from_fn(28, 28, |r, c| (8..20).contains(&r) && (6..22).contains(&c))
    }

    #[test]
    fn stride_three_grid_mask_leaves_324_pixels() {
        let s = apply_corruption(
            &GridShape::dense(square()),
            &CorruptionSpec::new(Corruption::GridMask { stride: 3 }, 0),
        )
        .unwrap();
        assert_eq!(s.observed_count(), 324);
        assert_eq!(s.corruption_log.len(), 1);
    }

    #[test]
    fn stride_below_two_is_rejected() {
        let spec = CorruptionSpec::new(Corruption::GridMask { stride: 1 }, 0);
        assert!(matches!(
            apply_corruption(&GridShape::dense(square()), &spec),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn zero_rotation_is_identity_and_empty_erodes_to_empty() {
        assert_eq!(rotate_nearest(&square(), 0.0), square());
        let empty = Grid::filled(28, 28, false);
        assert_eq!(erode4(&empty), empty);
    }

    #[test]
    fn occlusion_removes_about_the_requested_fraction() {
        let spec = CorruptionSpec::new(Corruption::Occlude { fraction: 0.15 }, 4);
        let before = square().count_ones();
        let after = apply_corruption(&GridShape::dense(square()), &spec).unwrap();
        let removed = (before - after.grid.count_ones()) as f64 / before as f64;
        assert!((0.12..0.30).contains(&removed), "{removed}");
        assert_eq!(
            after,
            apply_corruption(&GridShape::dense(square()), &spec).unwrap()
        );
    }
}
