//! Label sidecar files: one integer part id per line, line i labels vertex i.

use std::io::Write;
use std::path::Path;

use super::FileError;
use crate::graph::PartId;

pub fn read_labels(path: &Path) -> Result<Vec<PartId>, FileError> {
    let text = std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let id: u32 = line
            .parse()
            .map_err(|e| FileError::parse(path, idx + 1, format!("bad part id '{line}': {e}")))?;
        labels.push(PartId(id));
    }
    if labels.is_empty() {
        return Err(FileError::invalid(path, "no labels"));
    }
    Ok(labels)
}

pub fn write_labels(labels: &[PartId], path: &Path) -> Result<(), FileError> {
    let mut out = Vec::new();
    for label in labels {
        writeln!(out, "{}", label.0).unwrap();
    }
    std::fs::write(path, out).map_err(|e| FileError::io(path, e))
}
