use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Grid};

fn intersection_and_sizes(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    a.check_same_dims(b)
        .map_err(|e| Error::Argument(e.to_string()))?;
    let inter = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|(x, y)| **x && **y)
        .count();
    Ok((inter, a.count_ones(), b.count_ones()))
}

/// `2|X∩Y| / (|X|+|Y|)`; two empty masks score 1.
pub fn dice(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let (inter, x, y) = intersection_and_sizes(pred, truth)?;
    if x + y == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (x + y) as f64)
}

/// `|X∩Y| / |X∪Y|`; two empty masks score 1.
pub fn iou(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let (inter, x, y) = intersection_and_sizes(pred, truth)?;
    let union = x + y - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(q) => q,
        None => {
            out.fill(f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let intersect = |p: usize| {
            ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
        };
        let mut s = intersect(v[k]);
        // z[0] is -inf, so k never underflows.
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest set pixel.
pub fn squared_distance_transform(mask: &BinaryMask) -> Grid<f64> {
    let (h, w) = mask.dims();
    let mut g: Vec<f64> = mask
        .as_slice()
        .iter()
        .map(|&on| if on { 0.0 } else { f64::INFINITY })
        .collect();
    let mut col = vec![0.0; h];
    let mut out = vec![0.0; h.max(w)];
    for c in 0..w {
        for r in 0..h {
            col[r] = g[r * w + c];
        }
        edt_1d(&col, &mut out[..h]);
        for r in 0..h {
            g[r * w + c] = out[r];
        }
    }
    for r in 0..h {
        let row = g[r * w..(r + 1) * w].to_vec();
        edt_1d(&row, &mut out[..w]);
        g[r * w..(r + 1) * w].copy_from_slice(&out[..w]);
    }
    Grid::from_vec(h, w, g).expect("same dims")
}

fn directed(from: &BinaryMask, to_sq_dist: &Grid<f64>) -> f64 {
    from.as_slice()
        .iter()
        .zip(to_sq_dist.as_slice())
        .filter(|(on, _)| **on)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max)
        .sqrt()
}

/// Symmetric Hausdorff distance between set pixels, in pixel units.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.check_same_dims(b)
        .map_err(|e| Error::Argument(e.to_string()))?;
    if a.count_ones() == 0 || b.count_ones() == 0 {
        return Err(Error::UndefinedMetric(
            "Hausdorff distance of an empty mask".into(),
        ));
    }
    let da = squared_distance_transform(a);
    let db = squared_distance_transform(b);
    Ok(directed(a, &db).max(directed(b, &da)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(h: usize, w: usize, on: &[(usize, usize)]) -> BinaryMask {
        let mut m = Grid::filled(h, w, false);
        for &(r, c) in on {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn dice_and_iou_fixtures() {
        let x = mask(2, 3, &[(0, 0), (0, 1)]);
        let y = mask(2, 3, &[(0, 1), (1, 2)]);
        assert_eq!(dice(&x, &y).unwrap(), 0.5);
        assert!((iou(&x, &y).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&x, &x).unwrap(), 1.0);
        let empty = mask(2, 3, &[]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&empty, &x).unwrap(), 0.0);
        assert_eq!(dice(&mask(2, 3, &[(1, 0)]), &x).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_argument_error() {
        assert!(matches!(
            dice(&mask(2, 2, &[]), &mask(2, 3, &[])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn hausdorff_fixtures() {
        let a = mask(5, 5, &[(0, 0)]);
        let b = mask(5, 5, &[(3, 4)]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 5.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            hausdorff(&a, &mask(5, 5, &[])),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn distance_transform_of_corner_pixel() {
        let d = squared_distance_transform(&mask(3, 4, &[(0, 0)]));
        assert_eq!(*d.get(2, 3), 13.0);
        assert_eq!(*d.get(1, 1), 2.0);
    }
}
