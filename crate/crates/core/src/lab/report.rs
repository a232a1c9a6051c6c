//! CSV tables and standalone SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ladder::{loglog_slope, ConvergenceLadder, OrderEstimate, Rung};
use crate::error::{Error, Result};

pub const LADDER_HEADER: [&str; 3] = ["level", "N", "lambda"];
pub const ESTIMATE_HEADER: [&str; 4] = ["level", "chi_prime", "p_prime", "p_star"];

/// Recorded with every estimate table and plot.
pub const CHI_ORIENTATION: &str =
    "chi_prime = ln((lambda_i - lambda_i+1)/(lambda_i+1 - lambda_i+2)) / ln r, positive when converging";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `level,N,lambda`; floats use the shortest round-tripping form.
pub fn export_ladder_csv(ladder: &ConvergenceLadder, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(LADDER_HEADER)?;
    for r in &ladder.rungs {
        w.write_record([
            r.level.to_string(),
            r.elements.to_string(),
            r.lambda.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn export_estimates_csv(estimates: &[OrderEstimate], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ESTIMATE_HEADER)?;
    for e in estimates {
        w.write_record([
            e.level.to_string(),
            e.chi_prime.to_string(),
            e.p_prime.to_string(),
            e.p_star.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: bad {what} {field:?}")))
}

/// Reads a ladder written by [`export_ladder_csv`].
pub fn import_ladder_csv(path: &Path) -> Result<ConvergenceLadder> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(LADDER_HEADER) {
        return Err(Error::Config(format!(
            "{}: expected header {}",
            path.display(),
            LADDER_HEADER.join(",")
        )));
    }
    let mut rungs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rungs.push(Rung {
            level: parse(&rec[0], "level", line)?,
            elements: parse(&rec[1], "N", line)?,
            lambda: parse(&rec[2], "lambda", line)?,
        });
    }
    ConvergenceLadder::from_rungs(rungs, f64::NAN)
}

/// One polyline (with markers) of a plot.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn dashed, e.g. a theoretical reference.
    pub dashed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Extra `key=value` lines for the metadata block.
    pub notes: Vec<(String, String)>,
    /// Fit a log-log line through the first series and record its slope.
    pub fit_first: bool,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Result<Axis> {
        let t: Vec<f64> = values
            .map(|v| {
                if log {
                    if v > 0.0 {
                        Ok(v.log10())
                    } else {
                        Err(Error::invalid(format!("value {v} on a log axis")))
                    }
                } else {
                    Ok(v)
                }
            })
            .collect::<Result<_>>()?;
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        };
        Ok(Axis { log, lo, hi })
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn label(&self, t: f64) -> String {
        if self.log {
            format!("1e{t:.1}")
        } else {
            format!("{t:.4}")
        }
    }
}

impl Plot {
    /// Slope of the log-log fit through the first series.
    pub fn fitted_slope(&self) -> Result<Option<f64>> {
        if !self.fit_first {
            return Ok(None);
        }
        let first = self
            .series
            .first()
            .ok_or_else(|| Error::invalid("nothing to fit"))?;
        loglog_slope(&first.points).map(Some)
    }

    pub fn to_svg(&self) -> Result<String> {
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let xa = Axis::new(all().map(|p| p.0), self.log_x)?;
        let ya = Axis::new(all().map(|p| p.1), self.log_y)?;
        let px = |x: f64| MARGIN + xa.frac(x) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - ya.frac(y) * (HEIGHT - 2.0 * MARGIN);
        let slope = self.fitted_slope()?;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        s.push_str("<metadata>\n");
        if let Some(m) = slope {
            let _ = writeln!(s, "slope={m}");
        }
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{}={}", escape(k), escape(v));
        }
        s.push_str("</metadata>\n");
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (tx, ty) = (xa.lo + f * (xa.hi - xa.lo), ya.lo + f * (ya.hi - ya.lo));
            let gx = x0 + f * (x1 - x0);
            let gy = y0 - f * (y0 - y1);
            let _ = writeln!(
                s,
                r#"<text x="{gx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + 16.0,
                xa.label(tx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{gy:.1}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                ya.label(ty)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| {
                    format!(
                        "{}{:.2} {:.2}",
                        if k == 0 { 'M' } else { 'L' },
                        px(x),
                        py(y)
                    )
                })
                .collect();
            let dash = if series.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
            for &(x, y) in &series.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    px(x),
                    py(y)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                x1 - 150.0,
                y1 + 16.0 * (i as f64 + 1.0),
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

/// Writes the plot as a standalone SVG file.
pub fn emit_plot(plot: &Plot, path: &Path) -> Result<()> {
    fs::write(path, plot.to_svg()?).map_err(|e| Error::io(path, e))
}

/// Reads the `slope=` line back from an emitted plot.
pub fn plot_slope(svg: &str) -> Option<f64> {
    let meta = svg
        .split("<metadata>")
        .nth(1)?
        .split("</metadata>")
        .next()?;
    meta.lines()
        .find_map(|l| l.strip_prefix("slope="))
        .and_then(|v| v.trim().parse().ok())
}

/// Log-log plot of `|λ_i - λ*|` against `N_i`.
pub fn error_plot(ladder: &ConvergenceLadder, exact: f64) -> Plot {
    Plot {
        title: "eigenvalue error".into(),
        x_label: "N (elements)".into(),
        y_label: "|lambda - lambda*|".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "error".into(),
            points: ladder
                .rungs
                .iter()
                .map(|r| (r.elements as f64, (r.lambda - exact).abs()))
                .collect(),
            dashed: false,
        }],
        notes: vec![("lambda_exact".into(), exact.to_string())],
        fit_first: true,
    }
}

/// Observed `p'` per level with `p*` as a dashed reference.
pub fn exponent_plot(estimates: &[OrderEstimate]) -> Plot {
    let mut series = vec![Series {
        label: "p' observed".into(),
        points: estimates
            .iter()
            .map(|e| (e.level as f64, e.p_prime))
            .collect(),
        dashed: false,
    }];
    let star: Vec<(f64, f64)> = estimates
        .iter()
        .filter_map(|e| e.p_star.map(|p| (e.level as f64, p)))
        .collect();
    if !star.is_empty() {
        series.push(Series {
            label: "p* theoretical".into(),
            points: star,
            dashed: true,
        });
    }
    Plot {
        title: "observed exponent".into(),
        x_label: "level".into(),
        y_label: "p'".into(),
        log_x: false,
        log_y: false,
        series,
        notes: vec![("orientation".into(), CHI_ORIENTATION.into())],
        fit_first: false,
    }
}
