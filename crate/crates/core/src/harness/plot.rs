use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::{Error, Result};

/// One CSV row as written by the runner.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct LogRow {
    pub global_step: u64,
    pub seed: u64,
    pub episode_return_mean: f64,
    pub episode_len_mean: f64,
    pub success_rate: f64,
    pub intrinsic_mean: f64,
    pub beta: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub wall_time_s: f64,
}

impl LogRow {
    /// Looks a column up by name.
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "global_step" => self.global_step as f64,
            "episode_return_mean" => self.episode_return_mean,
            "episode_len_mean" => self.episode_len_mean,
            "success_rate" => self.success_rate,
            "intrinsic_mean" => self.intrinsic_mean,
            "beta" => self.beta,
            "policy_loss" => self.policy_loss,
            "value_loss" => self.value_loss,
            "entropy" => self.entropy,
            "wall_time_s" => self.wall_time_s,
            _ => return None,
        })
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Seed-aggregated learning curve of one config.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub runs: usize,
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    /// Population std across seeds; all zero for a single run.
    pub std: Vec<f64>,
}

fn seed_csvs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            seed_csvs(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "csv")
            && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed_"))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Finds every `seed_*.csv` below `root` (or takes `root` itself if it is a
/// file) and aggregates the runs of each directory into a curve of `metric`.
pub fn collect_curves(root: &Path, metric: &str) -> Result<Vec<Curve>> {
    let mut files = Vec::new();
    if root.is_file() {
        files.push(root.to_path_buf());
    } else {
        seed_csvs(root, &mut files)?;
    }
    let mut groups: BTreeMap<PathBuf, Vec<Vec<LogRow>>> = BTreeMap::new();
    for f in files {
        let rows = read_log(&f)?;
        if rows.is_empty() {
            continue;
        }
        let dir = f.parent().map(Path::to_path_buf).unwrap_or_default();
        groups.entry(dir).or_default().push(rows);
    }
    if groups.is_empty() {
        return Err(Error::InvalidArgument(format!("no run logs under {}", root.display())));
    }
    let mut curves = Vec::new();
    for (dir, runs) in groups {
        let label = dir
            .strip_prefix(root)
            .ok()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(&dir)
            .to_string_lossy()
            .replace('\\', "/");
        let len = runs.iter().map(Vec::len).max().unwrap_or(0);
        let (mut steps, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..len {
            let at: Vec<&LogRow> = runs.iter().filter_map(|r| r.get(i)).collect();
            let vals: Vec<f64> = at
                .iter()
                .map(|r| r.metric(metric).ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{metric}`"))))
                .collect::<Result<_>>()?;
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            steps.push(at[0].global_step);
            mean.push(m);
            std.push((vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt());
        }
        curves.push(Curve {
            label,
            runs: runs.len(),
            steps,
            mean,
            std,
        });
    }
    Ok(curves)
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Renders curves as a standalone SVG: one polyline per curve plus a
/// translucent mean ± std polygon when it aggregates more than one run.
pub fn render_svg(curves: &[Curve], metric: &str) -> Result<String> {
    if curves.is_empty() || curves.iter().all(|c| c.steps.is_empty()) {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let x_max = curves.iter().flat_map(|c| c.steps.iter().copied()).max().unwrap_or(1).max(1) as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for c in curves {
        for (m, s) in c.mean.iter().zip(&c.std) {
            y_lo = y_lo.min(m - s);
            y_hi = y_hi.max(m + s);
        }
    }
    if metric == "success_rate" {
        (y_lo, y_hi) = (y_lo.min(0.0), y_hi.max(1.0));
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_max * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (x, y) = (LEFT + f * plot_w, TOP + f * plot_h);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#, TOP + plot_h + 16.0, f * x_max);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{:.3}</text>"#, LEFT - 6.0, y_hi - f * (y_hi - y_lo));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">global_step</text>"#, LEFT + plot_w / 2.0, HEIGHT - 10.0);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="{:.2}">{}</text>"#, TOP - 10.0, xml_escape(metric));

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = xml_escape(&c.label);
        let _ = writeln!(s, r#"<g class="curve" data-label="{label}" data-runs="{}">"#, c.runs);
        if c.runs > 1 {
            let upper = c.steps.iter().zip(c.mean.iter().zip(&c.std)).map(|(&x, (m, sd))| (x, m + sd));
            let lower = c.steps.iter().zip(c.mean.iter().zip(&c.std)).rev().map(|(&x, (m, sd))| (x, m - sd));
            let pts: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{:.2},{:.2}", px(x as f64), py(y))).collect();
            let _ = writeln!(s, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
        }
        let pts: Vec<String> = c.steps.iter().zip(&c.mean).map(|(&x, &y)| format!("{:.2},{:.2}", px(x as f64), py(y))).collect();
        let _ = writeln!(s, r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = TOP + 12.0 + i as f64 * 16.0;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label} (n={})</text>"#, lx + 24.0, ly + 4.0, c.runs);
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Aggregates the logs under `input` and writes the SVG to `output`.
pub fn emit_plot(input: &Path, output: &Path, metric: &str) -> Result<()> {
    let curves = collect_curves(input, metric)?;
    let svg = render_svg(&curves, metric)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(output, svg).map_err(|e| Error::io(output, e))
}
