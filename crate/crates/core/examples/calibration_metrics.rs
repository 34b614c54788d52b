//! Calibration and overlap metrics on synthetic predictions: ECE with its
//! reliability diagram, predictive entropy, Dice, IoU and Hausdorff distance.
//!
//! cargo run --example calibration_metrics [out_dir]

use dropsembles::metrics::{
    dice, ece, hausdorff, iou, predictive_entropy, reliability_svg, write_svg,
};
use dropsembles::raster::BinaryMask;
use dropsembles::rng::rng_from_seed;
use rand::Rng as _;

fn main() -> dropsembles::Result<()> {
    let out = std::path::PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "example-output".into()),
    );
    let mut rng = rng_from_seed(3);

    // An overconfident classifier: true positive rate is pulled toward 0.5.
    let probs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<bool> = probs
        .iter()
        .map(|&p| rng.random::<f64>() < 0.5 + 0.6 * (p - 0.5))
        .collect();
    let (value, bins) = ece(&probs, &labels, 10)?;
    println!("ECE {:.2}%", 100.0 * value);
    for b in 0..bins.n_bins() {
        if let (Some(acc), Some(conf)) = (bins.accuracy(b), bins.mean_confidence(b)) {
            println!(
                "  ({:.1}, {:.1}]  confidence {conf:.3}  accuracy {acc:.3}",
                bins.lower_edge(b),
                bins.upper_edge(b)
            );
        }
    }
    let path = out.join("reliability.svg");
    write_svg(&path, &reliability_svg(&bins))?;
    println!("wrote {}", path.display());

    let members = [0.9, 0.2, 0.7, 0.4];
    let mixture = members.iter().sum::<f64>() / members.len() as f64;
    println!(
        "entropy of the mixture {:.3} nats",
        predictive_entropy(mixture)?
    );

    let disc = |cx: f64, cy: f64, r: f64| {
        BinaryMask::from_fn(32, 32, |row, col| {
            (row as f64 - cy).hypot(col as f64 - cx) <= r
        })
    };
    let (truth, pred) = (disc(15.0, 15.0, 8.0), disc(17.0, 14.0, 7.0));
    println!(
        "Dice {:.3}  IoU {:.3}  Hausdorff {:.2} px",
        dice(&pred, &truth)?,
        iou(&pred, &truth)?,
        hausdorff(&pred, &truth)?
    );
    Ok(())
}
