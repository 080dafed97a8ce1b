use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::commands::Outcome;
use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Paths of the CSV and JSON artifacts for `study` under `dir`.
pub fn artifact_paths(dir: &Path, study: &str, hash: &str) -> (PathBuf, PathBuf) {
    let stem = format!("{}_{}", study.replace('-', "_"), &hash[..16]);
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")))
}

pub fn render_csv(study: &str, hash: &str, outcome: &Outcome) -> io::Result<Vec<u8>> {
    let mut buf = format!("# ioncool {VERSION} study={study} config_sha256={hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(&outcome.header)?;
        for row in &outcome.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn render_json(study: &str, hash: &str, cfg: &RunConfig, outcome: &Outcome) -> String {
    let doc = json!({
        "tool": "ioncool",
        "version": VERSION,
        "study": study,
        "config_sha256": hash,
        "deterministic": true,
        "rows": outcome.rows.len(),
        "headline": outcome.headline,
        "summary": outcome.summary,
        "config": cfg,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
    s.push('\n');
    s
}

pub fn write(study: &str, cfg: &RunConfig, outcome: &Outcome) -> io::Result<(PathBuf, PathBuf, Value)> {
    let hash = cfg.hash(study);
    fs::create_dir_all(&cfg.output.dir)?;
    let (csv_path, json_path) = artifact_paths(&cfg.output.dir, study, &hash);
    fs::write(&csv_path, render_csv(study, &hash, outcome)?)?;
    let summary = render_json(study, &hash, cfg, outcome);
    fs::write(&json_path, &summary)?;
    Ok((csv_path, json_path, serde_json::from_str(&summary).expect("round trip")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome() -> Outcome {
        Outcome {
            header: vec!["a".into(), "b".into()],
            rows: vec![vec!["1".into(), "x, y".into()]],
            summary: json!({}),
            headline: String::new(),
        }
    }

    #[test]
    fn csv_has_comment_header_and_quotes() {
        let s = String::from_utf8(render_csv("modes", "abc", &outcome()).unwrap()).unwrap();
        assert_eq!(s, format!("# ioncool {VERSION} study=modes config_sha256=abc\na,b\n1,\"x, y\"\n"));
        assert!(!s.contains('\r'));
    }

    #[test]
    fn artifact_names() {
        let (c, j) = artifact_paths(Path::new("o"), "duty-scan", &"f".repeat(64));
        assert_eq!(c, Path::new("o/duty_scan_ffffffffffffffff.csv"));
        assert_eq!(j, Path::new("o/duty_scan_ffffffffffffffff.json"));
    }
}
