use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Files produced by a command, written together once the run is done.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    pub fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (name, text) in self.files {
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV with a header row; floats use the shortest round-trip form.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[f64]) {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{c}");
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_round_trip_floats() {
        let vals = [0.1, -2.0, 1e-300, 1.0 / 3.0];
        let mut csv = Csv::new(&["a", "b"]);
        csv.row(&vals[..2]);
        csv.row(&vals[2..]);
        let text = csv.finish();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b"));
        let back: Vec<f64> = lines
            .flat_map(|l| l.split(','))
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(back, vals);
    }

    #[test]
    fn outputs_write_into_a_fresh_directory() {
        let dir = std::env::temp_dir().join(format!("symspace-out-{}", std::process::id()));
        let mut out = Outputs::default();
        out.add("x.txt", "hi".into());
        out.add_json("y.json", &[1, 2]).unwrap();
        let written = out.write(&dir.join("nested")).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(&written[0]).unwrap(), "hi");
        fs::remove_dir_all(&dir).unwrap();
    }
}
