//! Artifact writers: diagnostics/convergence/gap CSV files, JSON reports,
//! and the run manifest with its config hash. Numeric formatting uses the
//! shortest round-trip decimal so reruns are byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::evolve::StepDiagnostics;

/// FNV-1a over the raw config text.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Collects artifact paths as they are written and emits manifest.json last.
pub struct ArtifactSink {
    dir: PathBuf,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    artifacts: &'a [String],
    /// Seconds since the epoch; the only non-reproducible field.
    timestamp: u64,
    config: &'a str,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        let mut s = serde_json::to_string_pretty(value).expect("serializable report");
        s.push('\n');
        std::fs::write(&p, s)?;
        Ok(p)
    }

    pub fn finish(self, config_text: &str) -> Result<PathBuf> {
        let manifest = Manifest {
            config_hash: format!("{:016x}", fnv1a64(config_text.as_bytes())),
            artifacts: &self.artifacts,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: config_text,
        };
        let p = self.dir.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&manifest).expect("manifest");
        s.push('\n');
        std::fs::write(&p, s)?;
        Ok(p)
    }
}

pub fn diagnostics_csv(diags: &[StepDiagnostics]) -> String {
    let mut out = String::from("step,time,dt,min,max,measure_mid\n");
    for d in diags {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.step, d.time, d.dt, d.min, d.max, d.measure_mid
        ));
    }
    out
}

pub fn gap_study_csv(study: &crate::envelopes::GapStudy) -> String {
    let mut out = String::from("q,sup_gap,fitted_slope\n");
    for row in &study.rows {
        out.push_str(&format!("{},{},{}\n", row.q, row.sup_gap, study.fitted_slope));
    }
    out
}

pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub linf_err: f64,
    pub order: Option<f64>,
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("N,h,Linf_err,order\n");
    for r in rows {
        match r.order {
            Some(o) => out.push_str(&format!("{},{},{},{}\n", r.n, r.h, r.linf_err, o)),
            None => out.push_str(&format!("{},{},{},\n", r.n, r.h, r.linf_err)),
        }
    }
    out
}

/// Write a formatted table to any sink (used by the CLI for stdout copies).
pub fn emit(mut w: impl Write, text: &str) -> Result<()> {
    w.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a64(b"config=1"), fnv1a64(b"config=2"));
    }

    #[test]
    fn sink_writes_manifest_with_artifact_list() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        sink.write_text("a.csv", "x,y\n1,2\n").unwrap();
        sink.write_json("b.json", &serde_json::json!({"ok": true})).unwrap();
        let manifest = sink.finish("key=value\n").unwrap();
        let text = std::fs::read_to_string(manifest).unwrap();
        assert!(text.contains("a.csv"));
        assert!(text.contains("b.json"));
        assert!(text.contains("config_hash"));
        assert!(text.contains("key=value"));
    }

    #[test]
    fn csv_headers_match_interface() {
        assert!(diagnostics_csv(&[]).starts_with("step,time,dt,min,max,measure_mid\n"));
        let rows =
            [ConvergenceRow { n: 101, h: 0.08, linf_err: 1e-3, order: None }];
        assert!(convergence_csv(&rows).starts_with("N,h,Linf_err,order\n"));
    }
}
