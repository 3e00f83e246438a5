//! Minimal static SVG line charts for convergence data.
//!
//! Log-log axes, one polyline per `(m, p)` series. Output is a pure
//! function of the data, so plots from identical configs are bit-identical.

use std::io::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

struct LogAxis {
    lo: f64,
    hi: f64,
    span_px: f64,
    offset_px: f64,
    flip: bool,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, span_px: f64, offset_px: f64, flip: bool) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.1;
            hi = 1.0;
        }
        if lo == hi {
            lo /= 2.0;
            hi *= 2.0;
        }
        LogAxis {
            lo: lo.log10(),
            hi: hi.log10(),
            span_px,
            offset_px,
            flip,
        }
    }

    fn map(&self, v: f64) -> Option<f64> {
        if !(v > 0.0 && v.is_finite()) {
            return None;
        }
        let frac = (v.log10() - self.lo) / (self.hi - self.lo);
        let frac = if self.flip { 1.0 - frac } else { frac };
        Some(self.offset_px + frac * self.span_px)
    }
}

/// Writes a log-log error-vs-n chart; series are `(label, [(n, err)])`.
pub fn write_svg<W: Write>(
    mut w: W,
    title: &str,
    series: &[(String, Vec<(usize, f64)>)],
) -> std::io::Result<()> {
    let xs = LogAxis::new(
        series
            .iter()
            .flat_map(|(_, pts)| pts.iter().map(|(n, _)| *n as f64)),
        WIDTH - 2.0 * MARGIN,
        MARGIN,
        false,
    );
    let ys = LogAxis::new(
        series
            .iter()
            .flat_map(|(_, pts)| pts.iter().map(|(_, e)| *e)),
        HEIGHT - 2.0 * MARGIN,
        MARGIN,
        true,
    );

    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )?;
    writeln!(
        w,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    )?;
    writeln!(
        w,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"14\">{title}</text>",
        WIDTH / 2.0
    )?;
    // axes
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    writeln!(
        w,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>"
    )?;
    writeln!(
        w,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    )?;
    writeln!(
        w,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\">n (log)</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0
    )?;
    writeln!(
        w,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\" transform=\"rotate(-90 16 {})\">error (log)</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )?;

    for (si, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .filter_map(|(n, e)| {
                let px = xs.map(*n as f64)?;
                let py = ys.map(*e)?;
                Some(format!("{px:.2},{py:.2}"))
            })
            .collect();
        if coords.len() >= 2 {
            writeln!(
                w,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                coords.join(" ")
            )?;
        }
        for c in &coords {
            let (px, py) = c.split_once(',').expect("formatted above");
            writeln!(
                w,
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>"
            )?;
        }
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{label}</text>",
            WIDTH - MARGIN + 6.0,
            MARGIN + 14.0 * si as f64
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}
