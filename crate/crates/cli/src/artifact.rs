//! Deterministic artifact emission: JSON reports, CSV tables, and SVG
//! plots rendered purely from the persisted CSV.

use serde::Serialize;
use serde_json::Value;
use torusdyn::{Error, Result};

pub struct ArtifactWriter {
    pub dir: std::path::PathBuf,
    pub config_hash: String,
    pub quiet: bool,
}

fn io_err(what: &str, e: std::io::Error) -> Error {
    Error::BadParameter(format!("{what}: {e}"))
}

impl ArtifactWriter {
    pub fn new(dir: std::path::PathBuf, config_hash: String, quiet: bool) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| io_err("create output directory", e))?;
        Ok(ArtifactWriter {
            dir,
            config_hash,
            quiet,
        })
    }

    pub fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    /// Serialize `value` with the config hash injected at the top level.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)
            .map_err(|e| Error::BadParameter(format!("serialize {name}: {e}")))?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config_hash".into(), Value::String(self.config_hash.clone()));
            }
            other => {
                let mut map = serde_json::Map::new();
                map.insert("config_hash".into(), Value::String(self.config_hash.clone()));
                map.insert("data".into(), other.take());
                v = Value::Object(map);
            }
        }
        let text = serde_json::to_string_pretty(&v)
            .map_err(|e| Error::BadParameter(format!("serialize {name}: {e}")))?;
        let path = self.dir.join(name);
        std::fs::write(&path, text + "\n").map_err(|e| io_err(name, e))?;
        Ok(())
    }

    /// Write a CSV table; every float is printed with full precision so
    /// reruns are byte-identical.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<CsvCell>]) -> Result<()> {
        let mut text = format!("# config_hash={}\n{}\n", self.config_hash, header.join(","));
        for row in rows {
            let cells: Vec<String> = row.iter().map(CsvCell::render).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_err(name, e))?;
        Ok(())
    }

    /// Render a line plot from a CSV written earlier.  The plot is a
    /// pure function of the file contents: the data is read back, never
    /// taken from memory.
    pub fn plot_from_csv(&self, csv_name: &str, spec: &PlotSpec) -> Result<()> {
        let path = self.dir.join(csv_name);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(csv_name, e))?;
        let svg = render_svg(&text, spec)?;
        let out = self.dir.join(&spec.out_name);
        std::fs::write(&out, svg).map_err(|e| io_err(&spec.out_name, e))?;
        Ok(())
    }
}

pub enum CsvCell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Int(v) => v.to_string(),
            CsvCell::UInt(v) => v.to_string(),
            CsvCell::Float(v) => format!("{v:.17e}"),
            CsvCell::Text(s) => s.clone(),
            CsvCell::Bool(b) => b.to_string(),
        }
    }
}

pub struct PlotSpec {
    pub out_name: String,
    pub title: String,
    pub x_col: usize,
    pub y_col: usize,
    pub log_x: bool,
    /// Plot log10 |y|; zero values are clipped at the floor.
    pub log_y: bool,
    pub scatter: bool,
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || i <= 1 && line.chars().any(|c| c.is_alphabetic()) {
            continue;
        }
        let row: Option<Vec<f64>> = line.split(',').map(|c| c.trim().parse().ok()).collect();
        if let Some(r) = row {
            rows.push(r);
        }
    }
    rows
}

fn render_svg(csv_text: &str, spec: &PlotSpec) -> Result<String> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let rows = parse_csv(csv_text);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for r in &rows {
        if r.len() <= spec.x_col.max(spec.y_col) {
            continue;
        }
        let mut x = r[spec.x_col];
        let mut y = r[spec.y_col];
        if spec.log_x {
            if x <= 0.0 {
                continue;
            }
            x = x.log10();
        }
        if spec.log_y {
            y = y.abs().max(1e-18).log10();
        }
        pts.push((x, y));
    }
    if pts.is_empty() {
        return Err(Error::BadParameter(format!(
            "plot {}: no finite data points",
            spec.out_name
        )));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"14\">{}</text>\n",
        W / 2.0,
        spec.title
    ));
    // axes
    s.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M
    ));
    s.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - M
    ));
    for (v, anchor, x, y) in [
        (x0, "start", M, H - M + 20.0),
        (x1, "end", W - M, H - M + 20.0),
    ] {
        s.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\" \
             font-family=\"monospace\" font-size=\"11\">{v:.4}</text>\n"
        ));
    }
    for (v, y) in [(y0, H - M), (y1, M)] {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"monospace\" \
             font-size=\"11\">{v:.4}</text>\n",
            M - 6.0,
            y + 4.0
        ));
    }
    if spec.scatter {
        for &(x, y) in &pts {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    } else {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
        for &(x, y) in &pts {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
