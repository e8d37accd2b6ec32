//! Output-directory plumbing: lock file, tracked writes with checksums, the run
//! manifest, and the small self-contained SVG plotter.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Writes artifacts into one output directory. Holds the directory lock, keeps
/// the checksum ledger, and removes partial outputs if the run fails.
pub struct OutputDir {
    dir: PathBuf,
    lock: PathBuf,
    files: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
    warnings: Vec<String>,
    started: Instant,
    finished: bool,
}

impl OutputDir {
    pub fn acquire(dir: &Path) -> anyhow::Result<OutputDir> {
        fs::create_dir_all(dir)?;
        let lock = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                anyhow::bail!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    dir.display(),
                    lock.display()
                );
            }
            Err(e) => return Err(e.into()),
        }
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            lock,
            files: Vec::new(),
            timings: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
            finished: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn time<T>(
        &mut self,
        label: &str,
        f: impl FnOnce(&mut Self) -> anyhow::Result<T>,
    ) -> anyhow::Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push((label.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    /// Write the manifest, release the lock, and keep the outputs.
    pub fn finish(mut self, config_hash: &str, threads: usize) -> anyhow::Result<()> {
        let manifest = serde_json::json!({
            "schema_version": 1,
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "config_hash": config_hash,
            "threads": threads,
            "files": self.files.iter().map(|(n, h)| serde_json::json!({
                "name": n, "sha256": h,
            })).collect::<Vec<_>>(),
            "timings_seconds": self.timings.iter().map(|(n, s)| serde_json::json!({
                "op": n, "seconds": s,
            })).collect::<Vec<_>>(),
            "warnings": self.warnings,
            "total_seconds": self.started.elapsed().as_secs_f64(),
        });
        let text = format!("{}\n", serde_json::to_string_pretty(&manifest)?);
        fs::write(self.dir.join("manifest.json"), text)?;
        let _ = fs::remove_file(&self.lock);
        self.finished = true;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.finished {
            // failed run: remove partial outputs, then the lock
            for (name, _) in &self.files {
                let _ = fs::remove_file(self.dir.join(name));
            }
            let _ = fs::remove_file(&self.lock);
        }
    }
}

/// Minimal self-contained log-log SVG line plot with an optional fitted line.
pub fn loglog_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[(f64, f64)],
    fit: Option<(f64, f64)>,
    provenance: &str,
) -> String {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let (y0, y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let (x0, x1) = (x0 - 0.05 * (x1 - x0).max(1e-9), x1 + 0.05 * (x1 - x0).max(1e-9));
    let (y0, y1) = (y0 - 0.05 * (y1 - y0).max(1e-9), y1 + 0.05 * (y1 - y0).max(1e-9));
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">\n<!-- {provenance} -->\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        w / 2.0
    ));
    // axes
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    // decade ticks
    for d in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let x = px(d as f64);
        s.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{0}\" x2=\"{x:.1}\" y2=\"{1}\" stroke=\"black\"/>\n\
             <text x=\"{x:.1}\" y=\"{2}\" text-anchor=\"middle\" font-size=\"12\">1e{d}</text>\n",
            h - mb,
            h - mb + 6.0,
            h - mb + 20.0
        ));
    }
    for d in (y0.ceil() as i64)..=(y1.floor() as i64) {
        let y = py(d as f64);
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{y:.1}\" x2=\"{ml}\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
             <text x=\"{1}\" y=\"{2:.1}\" text-anchor=\"end\" font-size=\"12\">1e{d}</text>\n",
            ml - 6.0,
            ml - 9.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{xlabel}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 {0})\">{ylabel}</text>\n",
        (mt + h - mb) / 2.0
    ));
    if let Some((slope, intercept)) = fit {
        let fy0 = slope * x0 * std::f64::consts::LN_10 + intercept;
        let fy1 = slope * x1 * std::f64::consts::LN_10 + intercept;
        s.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#888\" stroke-dasharray=\"6 4\"/>\n",
            px(x0),
            py(fy0 / std::f64::consts::LN_10),
            px(x1),
            py(fy1 / std::f64::consts::LN_10)
        ));
    }
    let path: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"/>\n",
        path.join(" ")
    ));
    for (x, y) in xs.iter().zip(&ys) {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f5fa8\"/>\n",
            px(*x),
            py(*y)
        ));
    }
    s.push_str("</svg>\n");
    s
}
