//! Artifact writing: atomic files, provenance stamps and SVG plots.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use assimlab_core::metrics::DensityCurve;
use assimlab_core::Result;
use serde::Serialize;

/// Stamp embedded in every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub study: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    /// Leading comment line for CSV and text artifacts.
    pub fn comment(&self) -> String {
        format!(
            "# {} {} {} study={} config_sha256={} seed={}\n",
            self.tool, self.version, self.command, self.study, self.config_sha256, self.seed
        )
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    meta: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes artifacts into one directory via temp file + rename.
pub struct ArtifactWriter {
    dir: PathBuf,
    pub provenance: Provenance,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, provenance: Provenance) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn raw(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        atomic_write(&path, contents)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// CSV or text with the provenance comment line prepended.
    pub fn text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let mut out = self.provenance.comment();
        out.push_str(contents);
        self.raw(name, out.as_bytes())
    }

    /// Pretty JSON object with a `meta` member followed by `body`'s fields.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf> {
        let mut out = serde_json::to_string_pretty(&Stamped {
            meta: &self.provenance,
            body,
        })?;
        out.push('\n');
        self.raw(name, out.as_bytes())
    }

    /// SVG with the provenance as an XML comment.
    pub fn svg(&mut self, name: &str, svg: &str) -> Result<PathBuf> {
        let p = &self.provenance;
        let stamp = format!(
            "<!-- {} {} {} config_sha256={} seed={} -->\n",
            p.tool, p.version, p.command, p.config_sha256, p.seed
        );
        self.raw(name, format!("{stamp}{svg}").as_bytes())
    }
}

pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    // Temp files are created owner-only; artifacts should be world-readable.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

/// Overlaid density curves with a legend.
pub fn density_svg(title: &str, curves: &[(String, &DensityCurve)]) -> String {
    let mut out = svg_open(title);
    let xs = curves.iter().flat_map(|(_, c)| c.x.iter().copied());
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let y_hi = curves
        .iter()
        .flat_map(|(_, c)| c.y.iter().copied())
        .fold(0.0, f64::max)
        .max(1e-12);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);
    axes(&mut out, x_lo, x_hi, "log AR");
    if x_lo < 0.0 && x_hi > 0.0 {
        let _ = writeln!(
            out,
            "<line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
            sx(0.0),
            MARGIN,
            HEIGHT - MARGIN
        );
    }
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .x
            .iter()
            .zip(&curve.y)
            .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            WIDTH - MARGIN - 200.0,
            MARGIN + 14.0 * i as f64,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal median markers with confidence-interval whiskers.
pub fn interval_svg(title: &str, rows: &[(String, f64, f64, f64)]) -> String {
    let mut out = svg_open(title);
    let (lo, hi) = rows.iter().fold((0.0f64, 0.0f64), |(lo, hi), r| (lo.min(r.2), hi.max(r.3)));
    let pad = ((hi - lo) * 0.05).max(0.05);
    let (x_lo, x_hi) = (lo - pad, hi + pad);
    let label_width = 220.0;
    let sx = |x: f64| MARGIN + label_width + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN - label_width);
    let step = (HEIGHT - 2.0 * MARGIN) / rows.len().max(1) as f64;
    let _ = writeln!(
        out,
        "<line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
        sx(0.0),
        MARGIN,
        HEIGHT - MARGIN
    );
    for (i, (label, median, lower, upper)) in rows.iter().enumerate() {
        let y = MARGIN + step * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>",
            MARGIN + label_width - 8.0,
            y,
            escape(label)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"black\"/>",
            sx(*lower),
            sx(*upper)
        );
        let _ = writeln!(
            out,
            "<circle cx=\"{:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"{}\"/>",
            sx(*median),
            PALETTE[0]
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">median log AR (95% CI)</text>",
        sx((x_lo + x_hi) / 2.0),
        HEIGHT - 16.0
    );
    out.push_str("</svg>\n");
    out
}

fn axes(out: &mut String, x_lo: f64, x_hi: f64, label: &str) {
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"{}\">{x_lo:.2}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x_hi:.2}</text>",
        HEIGHT - MARGIN + 16.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(label)
    );
}
