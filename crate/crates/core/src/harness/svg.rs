//! Native SVG rendering: line and bar primitives only, no plotting
//! dependency. Charts embed their source data in a metadata block so a
//! rendered file can be traced back to (and re-parsed into) the exact
//! values it shows.

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Trailing mean over a window, partial at the start.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / window.min(i + 1) as f64);
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(1e-12);
        MARGIN_L + (v - self.x_min) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-12);
        HEIGHT - MARGIN_B - (v - self.y_min) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn chart_header(title: &str, metadata: Option<&str>) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    );
    if let Some(meta) = metadata {
        s.push_str(&format!(
            "<metadata id=\"source-data\"><![CDATA[{meta}]]></metadata>\n"
        ));
    }
    s.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"17\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    s
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let mut s = format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 20 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
    for (v, anchor) in [(frame.x_min, "start"), (frame.x_max, "end")] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-size=\"11\">{}</text>\n",
            frame.x(v),
            y0 + 18.0,
            fmt_tick(v)
        ));
    }
    for v in [frame.y_min, frame.y_max, (frame.y_min + frame.y_max) / 2.0] {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n\
             <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            x0 - 6.0,
            frame.y(v) + 4.0,
            fmt_tick(v),
            x0,
            frame.y(v),
            x1,
            frame.y(v)
        ));
    }
    s
}

/// Multi-series line chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[LineSeries],
    metadata: Option<&str>,
) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if all.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let frame = Frame {
        x_min,
        x_max,
        y_min,
        y_max,
    };

    let mut s = chart_header(title, metadata);
    s.push_str(&axes(&frame, x_label, y_label));
    for (i, line) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            pts.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_R - 180.0,
            MARGIN_T + 16.0 * (i as f64 + 1.0),
            escape(&line.label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    group_labels: &[String],
    series: &[(String, Vec<f64>)],
    metadata: Option<&str>,
) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1e-12);
    let frame = Frame {
        x_min: 0.0,
        x_max: group_labels.len() as f64,
        y_min: 0.0,
        y_max,
    };
    let mut s = chart_header(title, metadata);
    s.push_str(&axes(&frame, x_label, y_label));

    let group_w = (WIDTH - MARGIN_L - MARGIN_R) / group_labels.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (g, label) in group_labels.iter().enumerate() {
        for (i, (name, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0).max(0.0);
            let x = MARGIN_L + g as f64 * group_w + group_w * 0.1 + i as f64 * bar_w;
            let y = frame.y(v);
            let h = (HEIGHT - MARGIN_B) - y;
            let color = PALETTE[i % PALETTE.len()];
            s.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" \
                 fill=\"{color}\"/>\n"
            ));
            if g == 0 {
                s.push_str(&format!(
                    "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
                    WIDTH - MARGIN_R - 180.0,
                    MARGIN_T + 16.0 * (i as f64 + 1.0),
                    escape(name)
                ));
            }
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            MARGIN_L + (g as f64 + 0.5) * group_w,
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Recovers the data block a chart was rendered from.
pub fn extract_metadata(svg: &str) -> Option<String> {
    let start = svg.find("<![CDATA[")? + "<![CDATA[".len();
    let end = svg[start..].find("]]>")? + start;
    Some(svg[start..end].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_mean_of_a_constant_is_flat() {
        let flat = rolling_mean(&[3.5; 40], 10);
        assert!(flat.iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn rolling_mean_uses_partial_windows() {
        let out = rolling_mean(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(out, vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn metadata_roundtrips() {
        let csv = "episode,r_d\n0,-1.5\n1,0.25\n";
        let svg = line_chart(
            "t",
            "x",
            "y",
            &[LineSeries {
                label: "r_d".into(),
                points: vec![(0.0, -1.5), (1.0, 0.25)],
            }],
            Some(csv),
        );
        assert_eq!(extract_metadata(&svg).unwrap(), csv);
    }

    #[test]
    fn charts_are_wellformed_enough() {
        let svg = bar_chart(
            "bars",
            "K",
            "utility",
            &["10".into(), "20".into()],
            &[("policy".into(), vec![5.0, 9.0]), ("max_snr".into(), vec![3.0, 4.0])],
            None,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect").count(), 1 + 4); // background + bars
    }
}
