//! Hand-rolled SVG renders of per-edge activation curves.
//!
//! One SVG per layer, one subplot per edge, with stroke opacity keyed to
//! the edge's observed magnitude so the network's live wiring stands out
//! against the near-dead edges.

use crate::error::Result;
use crate::network::{ActivationStats, EdgeActivation, KanNetwork};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const SAMPLES: usize = 200;
const CELL_W: f64 = 140.0;
const CELL_H: f64 = 100.0;
const PAD: f64 = 14.0;
const OPACITY_FLOOR: f64 = 0.08;

/// Render one layer's edge activations as an SVG document.
pub fn render_layer_svg(net: &KanNetwork, stats: &ActivationStats, layer_idx: usize) -> String {
    let layer = &net.layers()[layer_idx];
    let (n_in, n_out) = (layer.n_in(), layer.n_out());
    let width = PAD + n_in as f64 * (CELL_W + PAD);
    let height = PAD + n_out as f64 * (CELL_H + PAD) + 18.0;

    let edge_l1 = &stats.edge_l1[layer_idx];
    let max_l1 = edge_l1.iter().copied().fold(0.0f64, f64::max);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"10\">\n"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{PAD}\" y=\"{:.1}\" fill=\"#333333\">layer {layer_idx}</text>\n",
        height - 6.0
    );

    for j in 0..n_out {
        for i in 0..n_in {
            let x0 = PAD + i as f64 * (CELL_W + PAD);
            let y0 = PAD + j as f64 * (CELL_H + PAD);
            let opacity = if max_l1 > 0.0 {
                (edge_l1[j * n_in + i] / max_l1).max(OPACITY_FLOOR)
            } else {
                OPACITY_FLOOR
            };
            let _ = write!(
                svg,
                "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{CELL_W:.1}\" height=\"{CELL_H:.1}\" \
                 fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n"
            );
            let _ = write!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#888888\">({j},{i})</text>\n",
                x0 + 3.0,
                y0 + 11.0
            );
            let points = edge_points(layer.edge(j, i), x0, y0);
            let _ = write!(
                svg,
                "<polyline points=\"{points}\" fill=\"none\" stroke=\"#1f4e79\" \
                 stroke-width=\"1.5\" stroke-opacity=\"{opacity:.3}\"/>\n"
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Sample an edge over its natural input range and scale into a cell.
fn edge_points(edge: &EdgeActivation, x0: f64, y0: f64) -> String {
    let (lo, hi) = match edge {
        EdgeActivation::Spline { grid, .. } => grid.domain(),
        _ => (-1.0, 1.0),
    };
    let mut ys = Vec::with_capacity(SAMPLES);
    for s in 0..SAMPLES {
        let x = lo + (hi - lo) * s as f64 / (SAMPLES - 1) as f64;
        ys.push(edge.eval(x));
    }
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (y_max - y_min).max(1e-12);

    let inset = 6.0;
    let mut points = String::new();
    for (s, y) in ys.iter().enumerate() {
        let px = x0 + inset + (CELL_W - 2.0 * inset) * s as f64 / (SAMPLES - 1) as f64;
        // SVG y grows downward; flip so larger values plot higher
        let frac = (y - y_min) / span;
        let py = y0 + CELL_H - inset - (CELL_H - 2.0 * inset) * frac;
        if s > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{px:.1},{py:.1}");
    }
    points
}

/// Write `layer_<l>.svg` for every layer into `dir`, creating it if
/// needed. Edge magnitudes come from a pass over `xs` (raw units).
pub fn write_plots(net: &KanNetwork, xs: &[Vec<f64>], dir: &Path) -> Result<Vec<PathBuf>> {
    let zs = net.input_normalizer().apply_all(xs);
    let stats = net.activation_stats(&zs)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(net.layers().len());
    for l in 0..net.layers().len() {
        let path = dir.join(format!("layer_{l}.svg"));
        std::fs::write(&path, render_layer_svg(net, &stats, l))?;
        written.push(path);
    }
    Ok(written)
}
