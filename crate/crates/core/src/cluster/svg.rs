//! Left-to-right dendrogram rendering.

use super::MergeTree;
use std::fmt::Write;

const LEFT: f64 = 150.0;
const TOP: f64 = 48.0;
const ROW: f64 = 28.0;
const PLOT_W: f64 = 420.0;
const RIGHT_PAD: f64 = 24.0;
const AXIS_GAP: f64 = 18.0;
const BOTTOM_PAD: f64 = 40.0;
const TICKS: usize = 5;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a merge tree with leaves on the left and merge heights growing to
/// the right. Every merge contributes exactly three `<line>` elements (two
/// horizontals at the children's vertical positions and one vertical at the
/// merge height); the axis is drawn as a `<path>` with tick labels.
pub fn dendrogram_svg(tree: &MergeTree, title: &str) -> String {
    let m = tree.leaves.len();
    let hmax = tree.merges.last().map(|mg| mg.height).unwrap_or(0.0);
    let scale = if hmax > 0.0 { PLOT_W / hmax } else { 0.0 };
    let x = |h: f64| LEFT + h * scale;

    let mut y = vec![0.0; m + tree.merges.len()];
    for (row, &leaf) in tree.leaf_order().iter().enumerate() {
        y[leaf] = TOP + (row as f64 + 0.5) * ROW;
    }
    for (s, merge) in tree.merges.iter().enumerate() {
        y[m + s] = 0.5 * (y[merge.a] + y[merge.b]);
    }

    let axis_y = TOP + m as f64 * ROW + AXIS_GAP;
    let width = LEFT + PLOT_W + RIGHT_PAD;
    let height = axis_y + BOTTOM_PAD;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width:.2}\" height=\"{height:.2}\" fill=\"#ffffff\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"28\" text-anchor=\"middle\" font-size=\"15\" fill=\"#111111\">{}</text>\n",
        width / 2.0,
        escape(title)
    );

    for (leaf, label) in tree.leaves.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\" \
             font-size=\"12\" fill=\"#111111\">{}</text>\n",
            LEFT - 8.0,
            y[leaf],
            escape(label)
        );
    }

    let child_height = |cluster: usize| {
        if cluster < m {
            0.0
        } else {
            tree.merges[cluster - m].height
        }
    };
    for merge in &tree.merges {
        let xm = x(merge.height);
        for child in [merge.a, merge.b] {
            let _ = write!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                 stroke=\"#2166ac\" stroke-width=\"1.5\"/>\n",
                x(child_height(child)),
                y[child],
                xm,
                y[child]
            );
        }
        let _ = write!(
            svg,
            "<line x1=\"{xm:.2}\" y1=\"{:.2}\" x2=\"{xm:.2}\" y2=\"{:.2}\" \
             stroke=\"#2166ac\" stroke-width=\"1.5\"/>\n",
            y[merge.a].min(y[merge.b]),
            y[merge.a].max(y[merge.b])
        );
    }

    let mut axis = format!("M {LEFT:.2} {axis_y:.2} H {:.2}", LEFT + PLOT_W);
    for t in 0..TICKS {
        let frac = t as f64 / (TICKS - 1) as f64;
        let _ = write!(axis, " M {:.2} {axis_y:.2} v 5", LEFT + frac * PLOT_W);
    }
    let _ = write!(
        svg,
        "<path d=\"{axis}\" stroke=\"#111111\" stroke-width=\"1\" fill=\"none\"/>\n"
    );
    for t in 0..TICKS {
        let frac = t as f64 / (TICKS - 1) as f64;
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\" \
             fill=\"#111111\">{:.3}</text>\n",
            LEFT + frac * PLOT_W,
            axis_y + 18.0,
            frac * hmax
        );
    }

    svg.push_str("</svg>\n");
    svg
}
