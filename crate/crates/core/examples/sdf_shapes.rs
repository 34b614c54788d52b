//! 2D signed-distance benchmark data: analytic shapes for task A, eroded and
//! re-rasterized shapes for task B. Prints one shape and its corrupted twin.
//!
//! cargo run --example sdf_shapes [family]

use dropsembles::data::{gen_sdf_shapes, SdfConfig, ShapeFamily};

fn ascii(values: &[f64], width: usize) -> Vec<String> {
    values
        .chunks(width)
        .map(|row| {
            row.iter()
                .map(|&d| {
                    if d < 0.0 {
                        '#'
                    } else if d < 0.06 {
                        '+'
                    } else {
                        '.'
                    }
                })
                .collect()
        })
        .collect()
}

fn main() -> dropsembles::Result<()> {
    let family: ShapeFamily = std::env::args()
        .nth(1)
        .map_or(Ok(ShapeFamily::Airfoil), |f| f.parse())?;
    let cfg = SdfConfig {
        family,
        n_a: 4,
        n_b: 2,
        ..SdfConfig::default()
    };
    let splits = gen_sdf_shapes(&cfg, 5)?;
    println!(
        "task A: {} points over {} shapes ({} near-boundary samples each); task B: {} points",
        splits.a.len(),
        cfg.n_a,
        cfg.surface_samples,
        splits.b.len()
    );
    let res = cfg.resolution;
    let clean = &splits.shapes_b[0];
    let eroded = &splits.b.targets[..res * res];
    println!("\n{:<w$}   eroded", "clean", w = res);
    for (l, r) in ascii(clean.values.as_slice(), res)
        .iter()
        .zip(ascii(eroded, res))
    {
        println!("{l}   {r}");
    }
    let inside = |v: &[f64]| v.iter().filter(|d| **d < 0.0).count();
    println!(
        "\ninside pixels: clean {}, eroded {}",
        inside(clean.values.as_slice()),
        inside(eroded)
    );
    Ok(())
}
