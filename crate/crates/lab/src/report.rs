//! Artifacts: versioned CSV tables, JSON files and optional SVG line plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{LabError, VERSION};

/// Schema revision of every CSV this crate writes.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    /// First line is `# <name> schema=<n> version=<crate version>`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# {} schema={} version={}\n", self.name, CSV_SCHEMA, VERSION);
        let line = |cells: &[String]| cells.iter().map(|c| escape(c)).collect::<Vec<_>>().join(",");
        s.push_str(&line(&self.columns));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&line(r));
            s.push('\n');
        }
        s
    }
}

fn escape(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Fixed-format float so outputs are byte-stable.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.is_finite() && (1e-4..1e6).contains(&x.abs()) {
        format!("{:.6}", x)
    } else {
        format!("{:.6e}", x)
    }
}

/// A named polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn svg_lines(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    y0 = y0.min(0.0);
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, xml(title));
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 10.0, xml(x_label));
    let _ = writeln!(s, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#, h / 2.0, h / 2.0, xml(y_label));
    for (v, x, anchor) in [(x0, sx(x0), "start"), (x1, sx(x1), "end")] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{}</text>"#, x, h - m + 15.0, num(v));
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, m - 4.0, y + 4.0, num(v));
    }
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for &(x, y) in &ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(x), sy(y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, w - m - 120.0, m + 15.0 * i as f64, xml(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Output directory handle.
#[derive(Clone, Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Output {
    pub fn create(dir: &Path, svg: bool) -> Result<Self, LabError> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {}", dir.display(), e)))?;
        Ok(Output { dir: dir.to_path_buf(), svg })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, LabError> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| LabError::Io(format!("{}: {}", p.display(), e)))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, LabError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_table(&self, t: &Table) -> Result<PathBuf, LabError> {
        self.write_text(&format!("{}.csv", t.name), &t.to_csv())
    }

    /// Writes only when SVG output was requested.
    pub fn write_svg(&self, name: &str, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<(), LabError> {
        if self.svg {
            self.write_text(&format!("{}.svg", name), &svg_lines(title, x_label, y_label, series))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_escaping() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["1".into(), "x,\"y\"".into()]);
        let s = t.to_csv();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], format!("# t schema={} version={}", CSV_SCHEMA, VERSION));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "1,\"x,\"\"y\"\"\"");
    }

    #[test]
    #[should_panic]
    fn row_width_is_checked() {
        Table::new("t", &["a"]).push(vec![]);
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(0.5), "0.500000");
        assert_eq!(num(3.0e-10), "3.000000e-10");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let s = svg_lines("t", "x", "y", &[Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }, Series { label: "c".into(), points: vec![] }]);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("a&lt;b"));
        assert!(s.trim_end().ends_with("</svg>"));
    }
}
