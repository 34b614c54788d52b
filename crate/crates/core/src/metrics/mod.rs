//! Evaluation metrics: accuracy, calibration, mask overlap, boundary
//! distance, predictive entropy, and their figures.

mod calibration;
mod entropy;
mod overlap;
mod plot;
mod report;

pub use calibration::{binary_confidence, ece, BinTotals, ReliabilityBins, DEFAULT_BINS};
pub use entropy::{histogram, predictive_entropy};
pub use overlap::{dice, hausdorff, iou, squared_distance_transform};
pub use plot::{
    entropy_histogram_svg, grayscale_png, panels_svg, reliability_diagram_svg, reliability_svg,
    sweep_plot_svg, write_svg, Panel, Series,
};
pub use report::{
    evaluate_points, evaluate_run, total_variation, EvalData, Evaluation, MetricsReport,
    RECORD_KEYS,
};
