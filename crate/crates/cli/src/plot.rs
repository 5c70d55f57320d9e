//! Figure data as CSV plus self-contained SVG renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rltlab_core::sim::{evaluate_with_sweep, SweepMatrix};
use rltlab_core::truncate::fixed_k;

use crate::commands::{load_sweep, num};
use crate::config::ExperimentConfig;
use crate::report::metric_label;
use crate::{runtime, write_atomic, HarnessError};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub method: String,
    pub avg_k: f64,
    pub latency: f64,
    pub metric: f64,
}

/// Equal-width bins over `[0, depth]`; the last bin is closed.
pub fn histogram(ks: &[usize], depth: usize, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let width = depth as f64 / bins as f64;
    for &k in ks {
        let b = if width > 0.0 { (k as f64 / width).floor() as usize } else { 0 };
        counts[b.min(bins - 1)] += 1;
    }
    counts
}

/// Mean metric at every cut-off; short lists hold their full-depth value.
pub fn mean_curve(sweep: &SweepMatrix) -> Vec<f64> {
    let width = sweep.rows().map(|(_, r)| r.len()).max().unwrap_or(0);
    let mut sums = vec![0.0; width];
    for (_, row) in sweep.rows() {
        for (k, s) in sums.iter_mut().enumerate() {
            *s += row[k.min(row.len() - 1)];
        }
    }
    sums.iter().map(|s| s / sweep.len() as f64).collect()
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    if !path.is_file() {
        return Err(HarnessError::Validation(format!(
            "{} is missing; run `evaluate` first",
            path.display()
        )));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| runtime(path.display(), e))?;
    let header = r
        .headers()
        .map_err(|e| runtime(path.display(), e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| runtime(path.display(), e))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64, HarnessError> {
    s.parse().map_err(|_| runtime(path.display(), format!("bad number {s:?}")))
}

pub fn plotdata(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let eval_path = cfg.reports_dir().join("evaluation.csv");
    let pq_path = cfg.reports_dir().join("per_query.csv");
    let (_, eval_rows) = read_csv(&eval_path)?;
    let (_, pq_rows) = read_csv(&pq_path)?;
    let sweep = load_sweep(cfg)?;
    let label = metric_label(cfg.metric);
    let dir = cfg.plots_dir();
    let mut written = Vec::new();

    let points = eval_rows
        .iter()
        .map(|r| {
            Ok(ScatterPoint {
                method: r[0].clone(),
                avg_k: parse_f64(&eval_path, &r[1])?,
                metric: parse_f64(&eval_path, &r[2])?,
                latency: parse_f64(&eval_path, &r[3])?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut scatter = format!("method,avg_k,latency,{}\n", cfg.metric);
    for p in &points {
        let _ = writeln!(scatter, "{},{},{},{}", csv_field(&p.method), num(p.avg_k), num(p.latency), num(p.metric));
    }

    let depths = sweep.depths();
    let mut frontier_pts = Vec::new();
    let mut frontier = format!("k,avg_k,latency,{}\n", cfg.metric);
    for &k in &cfg.fixed_k_grid {
        let row = evaluate_with_sweep(&fixed_k(&depths, k), &sweep, &cfg.cost_model).map_err(|e| runtime("frontier", e))?;
        let _ = writeln!(frontier, "{k},{},{},{}", num(row.avg_k), num(row.mean_latency), num(row.mean_metric));
        frontier_pts.push((row.mean_latency, row.mean_metric));
    }

    // methods in table order
    let mut methods: Vec<(String, Vec<usize>)> = Vec::new();
    for r in &pq_rows {
        let k: usize = r[2].parse().map_err(|_| runtime(pq_path.display(), format!("bad cut-off {:?}", r[2])))?;
        match methods.iter_mut().find(|(m, _)| *m == r[0]) {
            Some((_, ks)) => ks.push(k),
            None => methods.push((r[0].clone(), vec![k])),
        }
    }
    let width = cfg.list_depth as f64 / HISTOGRAM_BINS as f64;
    let mut hist = String::from("method,bin,lo,hi,count\n");
    let mut hists = Vec::new();
    for (m, ks) in &methods {
        let counts = histogram(ks, cfg.list_depth, HISTOGRAM_BINS);
        for (b, c) in counts.iter().enumerate() {
            let _ = writeln!(
                hist,
                "{},{b},{},{},{c}",
                csv_field(m),
                num(b as f64 * width),
                num((b + 1) as f64 * width)
            );
        }
        hists.push((m.to_string(), counts));
    }

    let curve = mean_curve(&sweep);
    let mut curve_csv = format!("k,mean_{}\n", cfg.metric);
    for (k, v) in curve.iter().enumerate() {
        let _ = writeln!(curve_csv, "{k},{}", num(*v));
    }

    for (name, body) in [
        ("scatter.csv", scatter),
        ("frontier.csv", frontier),
        ("histograms.csv", hist),
        ("metric_curve.csv", curve_csv),
        ("scatter.svg", svg::scatter(&points, &frontier_pts, &label)),
        ("histograms.svg", svg::histograms(&hists, cfg.list_depth)),
        ("metric_curve.svg", svg::curve(&curve, &label)),
    ] {
        let path = dir.join(name);
        write_atomic(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub mod svg {
    //! Minimal SVG drawing: fixed-size canvases with linear axes.

    use std::fmt::Write as _;

    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 55.0;
    const PALETTE: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];

    pub fn escape(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;")
    }

    fn head(w: f64, h: f64, title: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
            w / 2.0,
            escape(title)
        )
    }

    /// Rounds a span up to a 1/2/5 step for about `n` ticks.
    fn nice_step(span: f64, n: f64) -> f64 {
        let raw = (span / n).max(1e-12);
        let mag = 10f64.powf(raw.log10().floor());
        let f = raw / mag;
        let nice = if f <= 1.0 {
            1.0
        } else if f <= 2.0 {
            2.0
        } else if f <= 5.0 {
            5.0
        } else {
            10.0
        };
        nice * mag
    }

    fn tick_label(v: f64, step: f64) -> String {
        let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
        format!("{v:.decimals$}")
    }

    struct Axes {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        ox: f64,
        oy: f64,
        w: f64,
        h: f64,
    }

    impl Axes {
        fn new(x: (f64, f64), y: (f64, f64), origin: (f64, f64), size: (f64, f64)) -> Self {
            let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
            let (x0, x1) = pad(x);
            let (y0, y1) = pad(y);
            Axes {
                x0,
                x1,
                y0,
                y1,
                ox: origin.0,
                oy: origin.1,
                w: size.0,
                h: size.1,
            }
        }

        fn px(&self, x: f64) -> f64 {
            self.ox + (x - self.x0) / (self.x1 - self.x0) * self.w
        }

        fn py(&self, y: f64) -> f64 {
            self.oy + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h
        }

        fn draw(&self, out: &mut String, xlabel: &str, ylabel: &str, ticks: bool) {
            let (l, b) = (self.ox, self.oy + self.h);
            let _ = writeln!(
                out,
                "<path d=\"M{l:.1} {:.1}V{b:.1}H{:.1}\" stroke=\"black\" fill=\"none\"/>",
                self.oy,
                l + self.w
            );
            if ticks {
                for (lo, hi, horizontal) in [(self.x0, self.x1, true), (self.y0, self.y1, false)] {
                    let step = nice_step(hi - lo, 5.0);
                    let mut v = (lo / step).ceil() * step;
                    while v <= hi + step * 1e-9 {
                        if horizontal {
                            let x = self.px(v);
                            let _ = writeln!(
                                out,
                                "<path d=\"M{x:.1} {b:.1}v4\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                                b + 15.0,
                                tick_label(v, step)
                            );
                        } else {
                            let y = self.py(v);
                            let _ = writeln!(
                                out,
                                "<path d=\"M{l:.1} {y:.1}h-4\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                                l - 6.0,
                                y + 4.0,
                                tick_label(v, step)
                            );
                        }
                        v += step;
                    }
                }
            }
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                l + self.w / 2.0,
                b + 32.0,
                escape(xlabel)
            );
            let (yx, yy) = (l - 48.0, self.oy + self.h / 2.0);
            let _ = writeln!(
                out,
                "<text x=\"{yx:.1}\" y=\"{yy:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {yx:.1} {yy:.1})\">{}</text>",
                escape(ylabel)
            );
        }
    }

    fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
        values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Methods as labelled points in cost/metric space over the fixed-k frontier.
    pub fn scatter(points: &[super::ScatterPoint], frontier: &[(f64, f64)], metric: &str) -> String {
        let xs = range(points.iter().map(|p| p.latency).chain(frontier.iter().map(|f| f.0)));
        let ys = range(points.iter().map(|p| p.metric).chain(frontier.iter().map(|f| f.1)));
        let ax = Axes::new(
            (0f64.min(xs.0), xs.1 * 1.05),
            (ys.0 - 0.02, ys.1 + 0.02),
            (LEFT, TOP),
            (W - LEFT - RIGHT - 120.0, H - TOP - BOTTOM),
        );
        let mut out = head(W, H, &format!("{metric} vs. re-ranking latency"));
        ax.draw(&mut out, "mean latency (s)", metric, true);
        if !frontier.is_empty() {
            let d: Vec<String> = frontier
                .iter()
                .enumerate()
                .map(|(i, (x, y))| format!("{}{:.1} {:.1}", if i == 0 { "M" } else { "L" }, ax.px(*x), ax.py(*y)))
                .collect();
            let _ = writeln!(
                out,
                "<path d=\"{}\" stroke=\"#888\" stroke-dasharray=\"4 3\" fill=\"none\"/>",
                d.join("")
            );
        }
        for (i, p) in points.iter().enumerate() {
            let c = PALETTE[i % PALETTE.len()];
            let (x, y) = (ax.px(p.latency), ax.py(p.metric));
            let _ = writeln!(out, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"{c}\"/>");
            let ly = TOP + 12.0 + 15.0 * i as f64;
            let lx = W - RIGHT - 112.0;
            let _ = writeln!(
                out,
                "<circle cx=\"{lx:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{c}\"/><text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>",
                ly - 4.0,
                lx + 8.0,
                escape(&p.method)
            );
        }
        out.push_str("</svg>\n");
        out
    }

    /// One small histogram panel per method.
    pub fn histograms(hists: &[(String, Vec<usize>)], depth: usize) -> String {
        let cols = 3usize;
        let rows = hists.len().div_ceil(cols).max(1);
        let (pw, ph) = (210.0, 150.0);
        let (w, h) = (pw * cols as f64 + 20.0, ph * rows as f64 + 40.0);
        let mut out = head(w, h, "Distribution of re-ranking cut-offs");
        for (i, (method, counts)) in hists.iter().enumerate() {
            let (cx, cy) = (10.0 + pw * (i % cols) as f64, 30.0 + ph * (i / cols) as f64);
            let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
            let ax = Axes::new((0.0, depth as f64), (0.0, max), (cx + 40.0, cy + 18.0), (pw - 55.0, ph - 60.0));
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                cx + pw / 2.0,
                cy + 12.0,
                escape(method)
            );
            let bw = depth as f64 / counts.len() as f64;
            for (b, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let (x0, x1) = (ax.px(b as f64 * bw), ax.px((b + 1) as f64 * bw));
                let (y0, y1) = (ax.py(c as f64), ax.py(0.0));
                let _ = writeln!(
                    out,
                    "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
                    (x1 - x0 - 0.5).max(0.5),
                    y1 - y0,
                    PALETTE[i % PALETTE.len()]
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text><text x=\"{:.1}\" y=\"{:.1}\">0</text><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{depth}</text>",
                ax.ox - 4.0,
                ax.oy + 8.0,
                max as usize,
                ax.ox,
                ax.oy + ax.h + 12.0,
                ax.ox + ax.w,
                ax.oy + ax.h + 12.0
            );
            ax.draw(&mut out, "k", "", false);
        }
        out.push_str("</svg>\n");
        out
    }

    /// Mean metric as a function of the re-ranking cut-off.
    pub fn curve(values: &[f64], metric: &str) -> String {
        let ys = range(values.iter().copied());
        let n = values.len().saturating_sub(1).max(1) as f64;
        let ax = Axes::new(
            (0.0, n),
            (ys.0 - 0.01, ys.1 + 0.01),
            (LEFT, TOP),
            (W - LEFT - RIGHT, H - TOP - BOTTOM),
        );
        let mut out = head(W, H, &format!("Mean {metric} by re-ranking cut-off"));
        ax.draw(&mut out, "re-ranking cut-off k", metric, true);
        let d: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("{}{:.1} {:.1}", if k == 0 { "M" } else { "L" }, ax.px(k as f64), ax.py(*v)))
            .collect();
        let _ = writeln!(
            out,
            "<path d=\"{}\" stroke=\"{}\" stroke-width=\"1.5\" fill=\"none\"/>",
            d.join(""),
            PALETTE[0]
        );
        out.push_str("</svg>\n");
        out
    }
}
