use ndarray::Array2;
use rand::Rng as _;

use crate::data::grid::erode4;
use crate::data::{config_hash, Split, TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::raster::{pixel_center, BinaryMask, Grid};
use crate::rng::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    Ellipse,
    StarPolygon,
    Airfoil,
}

impl std::str::FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(ShapeFamily::Ellipse),
            "star-polygon" => Ok(ShapeFamily::StarPolygon),
            "airfoil" => Ok(ShapeFamily::Airfoil),
            _ => Err(Error::Argument(format!("unknown shape family `{s}`"))),
        }
    }
}

impl ShapeFamily {
    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Ellipse => "ellipse",
            ShapeFamily::StarPolygon => "star-polygon",
            ShapeFamily::Airfoil => "airfoil",
        }
    }
}

const SURFACE_SIGMA_WIDE: f64 = 0.05;
const SURFACE_SIGMA_NARROW: f64 = 0.015;

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// Closed polygon; the last vertex connects back to the first.
    Polygon(Vec<[f64; 2]>),
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
}

/// Even-odd rule.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl Boundary {
    pub fn validate(&self) -> Result<()> {
        match self {
            Boundary::Circle { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(Error::Geometry(format!("circle radius {radius}")))
            }
            Boundary::Polygon(v) => {
                if v.len() < 3 {
                    return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
                }
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Geometry("non-finite polygon vertex".into()));
                }
                let area: f64 = (0..v.len())
                    .map(|i| {
                        let (a, b) = (v[i], v[(i + 1) % v.len()]);
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>()
                    / 2.0;
                if area.abs() < 1e-12 {
                    return Err(Error::Geometry("polygon has zero area".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Signed distance: negative inside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        match self {
            Boundary::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) - radius
            }
            Boundary::Polygon(v) => {
                let d = (0..v.len())
                    .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min);
                if point_in_polygon(p, v) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// `n` points scattered around the boundary: a uniformly chosen boundary
    /// point plus isotropic Gaussian noise, alternating between a wide and a
    /// narrow spread. Points are clamped to `[-1, 1]^2`.
    pub fn sample_near(&self, n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = rng_from_seed(seed);
        let on_boundary = |rng: &mut crate::rng::Rng| -> [f64; 2] {
            match self {
                Boundary::Circle { center, radius } => {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                }
                Boundary::Polygon(v) => {
                    let lengths: Vec<f64> = (0..v.len())
                        .map(|i| {
                            let (a, b) = (v[i], v[(i + 1) % v.len()]);
                            (b[0] - a[0]).hypot(b[1] - a[1])
                        })
                        .collect();
                    let mut pick = rng.random_range(0.0..lengths.iter().sum::<f64>());
                    let mut i = 0;
                    while i + 1 < v.len() && pick > lengths[i] {
                        pick -= lengths[i];
                        i += 1;
                    }
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let t = (pick / lengths[i].max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
                    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
                }
            }
        };
        (0..n)
            .map(|k| {
                let sigma = if k % 2 == 0 {
                    SURFACE_SIGMA_WIDE
                } else {
                    SURFACE_SIGMA_NARROW
                };
                let p = on_boundary(&mut rng);
                let noise: [f64; 2] = [
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                ];
                [
                    (p[0] + sigma * noise[0]).clamp(-1.0, 1.0),
                    (p[1] + sigma * noise[1]).clamp(-1.0, 1.0),
                ]
            })
            .collect()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Boundary::Circle { .. } => self.signed_distance(p) < 0.0,
            Boundary::Polygon(v) => point_in_polygon(p, v),
        }
    }
}

/// A boundary sampled on a `resolution x resolution` grid over `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfShape {
    pub boundary: Boundary,
    pub resolution: usize,
    /// Signed distances at pixel centers, row-major; rows follow `y`.
    pub values: Grid<f64>,
}

impl SdfShape {
    pub fn new(boundary: Boundary, resolution: usize) -> Result<Self> {
        if resolution < 32 {
            return Err(Error::Argument(format!(
                "SDF resolution {resolution} below 32"
            )));
        }
        boundary.validate()?;
        let values = Grid::from_fn(resolution, resolution, |r, c| {
            boundary.signed_distance([pixel_center(c, resolution), pixel_center(r, resolution)])
        });
        Ok(SdfShape {
            boundary,
            resolution,
            values,
        })
    }

    pub fn occupancy(&self) -> BinaryMask {
        self.values.map(|&v| v < 0.0)
    }
}

/// Signed distance at every pixel center to the pixel-edge contour of
/// `occupancy` (edges between set and unset 4-neighbours, including the
/// raster border).
pub fn raster_sdf(occupancy: &BinaryMask) -> Grid<f64> {
    let (h, w) = occupancy.dims();
    let cell = 2.0 / w as f64;
    let cell_y = 2.0 / h as f64;
    let edge_x = |c: usize| c as f64 * cell - 1.0;
    let edge_y = |r: usize| r as f64 * cell_y - 1.0;
    let on = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < h
            && (c as usize) < w
            && *occupancy.get(r as usize, c as usize)
    };
    let mut edges: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for r in 0..=h as isize {
        for c in 0..=w as isize {
            // Horizontal edge above row r, spanning column c.
            if (c as usize) < w && on(r - 1, c) != on(r, c) {
                let y = edge_y(r as usize);
                edges.push(([edge_x(c as usize), y], [edge_x(c as usize + 1), y]));
            }
            // Vertical edge left of column c, spanning row r.
            if (r as usize) < h && on(r, c - 1) != on(r, c) {
                let x = edge_x(c as usize);
                edges.push(([x, edge_y(r as usize)], [x, edge_y(r as usize + 1)]));
            }
        }
    }
    Grid::from_fn(h, w, |r, c| {
        let p = [pixel_center(c, w), pixel_center(r, h)];
        let d = edges
            .iter()
            .map(|&(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        let d = if d.is_finite() { d } else { 2.0 };
        if *occupancy.get(r, c) {
            -d
        } else {
            d
        }
    })
}

pub fn random_boundary(family: ShapeFamily, seed: u64) -> Boundary {
    let mut rng = rng_from_seed(seed);
    let cx = rng.random_range(-0.15..0.15);
    let cy = rng.random_range(-0.15..0.15);
    let rot: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = rot.sin_cos();
    let place = |x: f64, y: f64| [cx + c * x - s * y, cy + s * x + c * y];
    let n = 96;
    let verts: Vec<[f64; 2]> = match family {
        ShapeFamily::Ellipse => {
            let a = rng.random_range(0.35..0.7);
            let b = rng.random_range(0.25..0.55);
            (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * std::f64::consts::TAU;
                    place(a * t.cos(), b * t.sin())
                })
                .collect()
        }
        ShapeFamily::StarPolygon => {
            let points = rng.random_range(4..8usize);
            let outer = rng.random_range(0.5..0.75);
            let inner = outer * rng.random_range(0.45..0.7);
            (0..2 * points)
                .map(|i| {
                    let t = i as f64 / (2 * points) as f64 * std::f64::consts::TAU;
                    let r = if i % 2 == 0 { outer } else { inner };
                    place(r * t.cos(), r * t.sin())
                })
                .collect()
        }
        ShapeFamily::Airfoil => {
            // NACA-style symmetric thickness with a cambered mean line.
            let chord = rng.random_range(1.1..1.5);
            let thickness = rng.random_range(0.18..0.3);
            let camber = rng.random_range(0.0..0.08);
            let half = n / 2;
            let profile = |x: f64| {
                5.0 * thickness
                    * (0.2969 * x.sqrt() - 0.126 * x - 0.3516 * x * x + 0.2843 * x.powi(3)
                        - 0.1036 * x.powi(4))
            };
            let mean = |x: f64| camber * 4.0 * x * (1.0 - x);
            let mut v = Vec::with_capacity(2 * half);
            for i in 0..half {
                let x = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / half as f64).cos());
                v.push(place((x - 0.5) * chord, (mean(x) + profile(x)) * chord));
            }
            for i in (1..=half).rev() {
                let x = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / half as f64).cos());
                v.push(place((x - 0.5) * chord, (mean(x) - profile(x)) * chord));
            }
            v
        }
    };
    Boundary::Polygon(verts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfConfig {
    pub family: ShapeFamily,
    pub n_a: usize,
    pub n_b: usize,
    pub resolution: usize,
    pub erosion_iters_b: usize,
    /// Extra near-boundary Task-A points per shape, on top of the pixel grid.
    pub surface_samples: usize,
}

impl Default for SdfConfig {
    fn default() -> Self {
        SdfConfig {
            family: ShapeFamily::Airfoil,
            n_a: 32,
            n_b: 10,
            resolution: 32,
            erosion_iters_b: 1,
            surface_samples: 1024,
        }
    }
}

/// Generated SDF benchmark. Latent codes are attached later from the
/// occupancies by an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfSplits {
    /// Exact signed distances of the Task-A shapes.
    pub a: TaskDataset,
    pub a_point_shape: Vec<usize>,
    pub shapes_a: Vec<SdfShape>,
    /// Signed distances re-estimated from the eroded Task-B rasters.
    pub b: TaskDataset,
    pub b_point_shape: Vec<usize>,
    /// Clean Task-B shapes (ground truth).
    pub shapes_b: Vec<SdfShape>,
    /// Eroded occupancies (encoder input for Task B).
    pub b_occupancy: Vec<BinaryMask>,
}

/// Pixel-grid samples of each field, followed per shape by its extra points.
fn sdf_points(
    fields: &[&Grid<f64>],
    extra: &[Vec<([f64; 2], f64)>],
    provenance: &str,
) -> Result<(TaskDataset, Vec<usize>)> {
    let mut coords = Vec::new();
    let mut targets = Vec::new();
    let mut ids = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        let (h, w) = f.dims();
        for r in 0..h {
            for c in 0..w {
                coords.push(pixel_center(c, w));
                coords.push(pixel_center(r, h));
                targets.push(*f.get(r, c));
                ids.push(i);
            }
        }
        for &(p, d) in extra.get(i).map_or(&[][..], |e| &e[..]) {
            coords.extend(p);
            targets.push(d);
            ids.push(i);
        }
    }
    let n = targets.len();
    let coords = Array2::from_shape_vec((n, 2), coords).expect("two coordinates per point");
    Ok((
        TaskDataset::new(TaskKind::Sdf, Split::Train, coords, targets, provenance)?,
        ids,
    ))
}

/// Draw Task-A and Task-B shapes. Task-B occupancies are eroded and their
/// signed distances recomputed from the eroded raster; with zero erosion the
/// exact distances are kept.
pub fn gen_sdf_shapes(config: &SdfConfig, seed: u64) -> Result<SdfSplits> {
    if config.n_a == 0 || config.n_b == 0 {
        return Err(Error::Argument(
            "SDF benchmark needs shapes in both tasks".into(),
        ));
    }
    let hash = config_hash(&format!("{config:?}|{seed}"));
    let shape = |k: u64| {
        SdfShape::new(
            random_boundary(config.family, derive_seed(seed, Stream::Data, k)),
            config.resolution,
        )
    };
    let shapes_a = (0..config.n_a as u64)
        .map(shape)
        .collect::<Result<Vec<_>>>()?;
    let shapes_b = (0..config.n_b as u64)
        .map(|i| shape(1_000_000 + i))
        .collect::<Result<Vec<_>>>()?;
    let mut b_occupancy = Vec::with_capacity(shapes_b.len());
    let mut b_fields = Vec::with_capacity(shapes_b.len());
    for s in &shapes_b {
        let mut occ = s.occupancy();
        for _ in 0..config.erosion_iters_b {
            occ = erode4(&occ);
        }
        b_fields.push(if config.erosion_iters_b == 0 {
            s.values.clone()
        } else {
            raster_sdf(&occ)
        });
        b_occupancy.push(occ);
    }
    let surface: Vec<Vec<([f64; 2], f64)>> = shapes_a
        .iter()
        .enumerate()
        .map(|(k, s)| {
            s.boundary
                .sample_near(
                    config.surface_samples,
                    derive_seed(seed, Stream::Data, 2_000_000 + k as u64),
                )
                .into_iter()
                .map(|p| (p, s.boundary.signed_distance(p)))
                .collect()
        })
        .collect();
    let (a, a_point_shape) = sdf_points(
        &shapes_a.iter().map(|s| &s.values).collect::<Vec<_>>(),
        &surface,
        &format!("sdf-a-{hash}"),
    )?;
    let (b, b_point_shape) = sdf_points(
        &b_fields.iter().collect::<Vec<_>>(),
        &[],
        &format!("sdf-b-{hash}"),
    )?;
    Ok(SdfSplits {
        a,
        a_point_shape,
        shapes_a,
        b,
        b_point_shape,
        shapes_b,
        b_occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_distances() {
        let c = Boundary::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        assert_eq!(c.signed_distance([0.0, 0.0]), -1.0);
        assert_eq!(c.signed_distance([2.0, 0.0]), 1.0);
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        let line = Boundary::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(SdfShape::new(line, 32), Err(Error::Geometry(_))));
        let c = Boundary::Circle {
            center: [0.0, 0.0],
            radius: 0.5,
        };
        assert!(matches!(SdfShape::new(c, 16), Err(Error::Argument(_))));
    }

    #[test]
    fn zero_erosion_keeps_exact_distances() {
        let cfg = SdfConfig {
            n_a: 1,
            n_b: 2,
            erosion_iters_b: 0,
            ..SdfConfig::default()
        };
        let s = gen_sdf_shapes(&cfg, 3).unwrap();
        let first: Vec<f64> = s.shapes_b[0].values.as_slice().to_vec();
        assert_eq!(&s.b.targets[..first.len()], &first[..]);
    }

    #[test]
    fn every_family_produces_valid_shapes() {
        for family in [
            ShapeFamily::Ellipse,
            ShapeFamily::StarPolygon,
            ShapeFamily::Airfoil,
        ] {
            for k in 0..5 {
                let s = SdfShape::new(random_boundary(family, k), 32).unwrap();
                let inside = s.occupancy().count_ones();
                assert!(inside > 20 && inside < 32 * 32 - 20, "{family:?} {inside}");
            }
        }
    }

    #[test]
    fn raster_sdf_sign_matches_occupancy() {
        let occ = Grid::from_fn(32, 32, |r, c| (10..20).contains(&r) && (8..24).contains(&c));
        let f = raster_sdf(&occ);
        for r in 0..32 {
            for c in 0..32 {
                assert_eq!(*f.get(r, c) < 0.0, *occ.get(r, c));
            }
        }
        // Pixel just inside the left edge sits half a cell from the contour.
        assert!((f.get(12, 8) + 1.0 / 32.0).abs() < 1e-12);
    }
}
