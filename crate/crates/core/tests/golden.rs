use dropsembles::metrics::{ece, reliability_svg};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/reliability.svg"
);

fn sample_bins() -> dropsembles::metrics::ReliabilityBins {
    let probs = [
        0.05, 0.12, 0.31, 0.48, 0.5, 0.66, 0.71, 0.83, 0.9, 0.97, 0.99, 0.2,
    ];
    let labels = [
        false, false, true, false, true, true, false, true, true, true, true, true,
    ];
    ece(&probs, &labels, 5).unwrap().1
}

#[test]
fn reliability_diagram_matches_fixture() {
    let svg = reliability_svg(&sample_bins());
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(FIXTURE, &svg).unwrap();
    }
    let expected = std::fs::read_to_string(FIXTURE)
        .expect("fixture present; set UPDATE_FIXTURES=1 to create it");
    assert_eq!(svg, expected);
}

#[test]
fn reliability_diagram_draws_one_bar_per_filled_bin() {
    let bins = sample_bins();
    let svg = reliability_svg(&bins);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let filled = bins.totals().iter().filter(|b| b.sample_count > 0).count();
    assert_eq!(svg.matches("fill=\"#4878b0\"").count(), filled, "{svg}");
}
