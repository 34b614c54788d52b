//! Static SVG figures. Coordinates are printed with two decimals so output is
//! byte-stable across platforms.

use std::fmt::Write as _;
use std::path::Path;

use base64::Engine as _;

use crate::error::{Error, Result};
use crate::metrics::calibration::ReliabilityBins;
use crate::metrics::entropy::histogram;
use crate::raster::Grid;

const SIZE: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Accuracy bars per confidence bin over the identity diagonal. Empty bins
/// are left blank.
pub fn reliability_svg(bins: &ReliabilityBins) -> String {
    let plot = SIZE - 2.0 * MARGIN;
    let x = |v: f64| MARGIN + v * plot;
    let y = |v: f64| SIZE - MARGIN - v * plot;
    let mut s = header(SIZE, SIZE);
    let _ = writeln!(s, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{plot:.2}\" height=\"{plot:.2}\" fill=\"none\" stroke=\"#000\"/>", x(0.0), y(1.0));
    for b in 0..bins.n_bins() {
        let Some(acc) = bins.accuracy(b) else {
            continue;
        };
        let (lo, hi) = (bins.lower_edge(b), bins.upper_edge(b));
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4878b0\" stroke=\"#1f3f66\"/>",
            x(lo),
            y(acc),
            x(hi) - x(lo),
            y(0.0) - y(acc)
        );
    }
    let _ = writeln!(s, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c03030\" stroke-dasharray=\"4 3\"/>", x(0.0), y(0.0), x(1.0), y(1.0));
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t:.1}</text>",
            x(t),
            SIZE - MARGIN + 14.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t:.1}</text>",
            MARGIN - 4.0,
            y(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">confidence</text>",
        SIZE / 2.0,
        SIZE - 8.0
    );
    let _ = writeln!(s, "<text x=\"12\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 12 {:.2})\">accuracy</text>", SIZE / 2.0, SIZE / 2.0);
    s.push_str("</svg>\n");
    s
}

pub fn reliability_diagram_svg(bins: &ReliabilityBins, path: &Path) -> Result<()> {
    write_svg(path, &reliability_svg(bins))
}

/// Entropy histogram over `[0.1, 1.0]` nats; the truncation is for display only.
pub fn entropy_histogram_svg(entropies: &[f64], n_bins: usize) -> String {
    let (lo, hi) = (0.1, 1.0);
    let counts = histogram(entropies, lo, hi, n_bins.max(1));
    let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let plot = SIZE - 2.0 * MARGIN;
    let bar = plot / counts.len() as f64;
    let mut s = header(SIZE, SIZE);
    for (i, &c) in counts.iter().enumerate() {
        let h = c as f64 / peak * plot;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bar:.2}\" height=\"{h:.2}\" fill=\"#6a9f58\" stroke=\"#2f5226\"/>",
            MARGIN + i as f64 * bar,
            SIZE - MARGIN - h
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{lo:.1}</text>",
        SIZE - MARGIN + 14.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{hi:.1}</text>",
        SIZE - MARGIN,
        SIZE - MARGIN + 14.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">entropy [nats]</text>",
        SIZE / 2.0,
        SIZE - 8.0
    );
    s.push_str("</svg>\n");
    s
}

/// A named series of `(axis value, metric)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#4878b0", "#c03030", "#6a9f58", "#d08a2c", "#8e62a8", "#444444",
];

/// Metric against a swept axis. Axis values are placed at equal spacing in
/// order, so logarithmic sweeps read naturally.
pub fn sweep_plot_svg(axis: &str, metric: &str, ticks: &[f64], series: &[Series]) -> String {
    let width = SIZE * 1.5;
    let plot_w = width - 2.0 * MARGIN - 80.0;
    let plot_h = SIZE - 2.0 * MARGIN;
    let values: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .collect();
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let slot = |t: f64| ticks.iter().position(|&v| v == t).unwrap_or(0) as f64;
    let span = (ticks.len().max(2) - 1) as f64;
    let x = |t: f64| MARGIN + slot(t) / span * plot_w;
    let y = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * plot_h;
    let mut s = header(width, SIZE);
    let _ = writeln!(s, "<rect x=\"{MARGIN:.2}\" y=\"{MARGIN:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#000\"/>");
    for &t in ticks {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>",
            x(t),
            SIZE - MARGIN + 14.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{lo:.2}</text>",
        MARGIN - 4.0,
        y(lo) + 4.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{hi:.2}</text>",
        MARGIN - 4.0,
        y(hi) + 4.0
    );
    for (i, line) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(t, v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>",
            width - MARGIN - 70.0,
            MARGIN + 14.0 * (i + 1) as f64,
            escape(&line.name)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        MARGIN + plot_w / 2.0,
        SIZE - 8.0,
        escape(axis)
    );
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN:.2}\" y=\"{:.2}\">{}</text>",
        MARGIN - 8.0,
        escape(metric)
    );
    s.push_str("</svg>\n");
    s
}

/// Grayscale PNG of `grid` with `lo` mapped to black and `hi` to white.
pub fn grayscale_png(grid: &Grid<f64>, lo: f64, hi: f64) -> Result<Vec<u8>> {
    let (h, w) = grid.dims();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels: Vec<u8> = grid
        .as_slice()
        .iter()
        .map(|&v| {
            if v.is_finite() {
                (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Argument(e.to_string()))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    Ok(bytes)
}

/// One image in a panel row.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub image: Grid<f64>,
    pub range: (f64, f64),
}

/// Side-by-side raster panels embedded as base64 PNG, upscaled without smoothing.
pub fn panels_svg(panels: &[Panel], cell: f64) -> Result<String> {
    let pad = 10.0;
    let width = pad + panels.len() as f64 * (cell + pad);
    let height = cell + 2.0 * pad + 16.0;
    let mut s = header(width, height);
    for (i, panel) in panels.iter().enumerate() {
        let png = grayscale_png(&panel.image, panel.range.0, panel.range.1)?;
        let data = base64::engine::general_purpose::STANDARD.encode(png);
        let x0 = pad + i as f64 * (cell + pad);
        let _ = writeln!(
            s,
            "<image x=\"{x0:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" style=\"image-rendering:pixelated\" href=\"data:image/png;base64,{data}\"/>",
            pad + 16.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            x0 + cell / 2.0,
            pad + 10.0,
            escape(&panel.title)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::calibration::BinTotals;

    #[test]
    fn empty_bins_leave_gaps() {
        let mut totals = vec![BinTotals::default(); 4];
        totals[3] = BinTotals {
            confidence_sum: 0.9,
            hit_count: 1,
            sample_count: 1,
        };
        let svg = reliability_svg(&ReliabilityBins::from_totals(totals).unwrap());
        assert_eq!(svg.matches("fill=\"#4878b0\"").count(), 1);
    }

    #[test]
    fn png_has_signature() {
        let png = grayscale_png(&Grid::filled(3, 2, 0.5), 0.0, 1.0).unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }
}
