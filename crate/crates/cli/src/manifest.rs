use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

const HEADER: &str = "clean\tdegraded\tspec";

/// One (clean, degraded) pair with the degradation that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub clean: PathBuf,
    pub degraded: PathBuf,
    pub spec: String,
}

/// Tab-separated corpus listing. Paths are stored relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}\t{}", e.clean.display(), e.degraded.display(), e.spec);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        if lines.next() != Some(HEADER) {
            return Err(CliError::Data(format!("manifest must start with {HEADER:?}")));
        }
        let entries = lines
            .enumerate()
            .map(|(i, l)| {
                let f: Vec<&str> = l.split('\t').collect();
                match f.as_slice() {
                    [c, d, s] => Ok(Entry {
                        clean: c.into(),
                        degraded: d.into(),
                        spec: s.to_string(),
                    }),
                    _ => Err(CliError::Data(format!("manifest line {} has {} fields", i + 2, f.len()))),
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    /// Loads a manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            e.clean = base.join(&e.clean);
            e.degraded = base.join(&e.degraded);
        }
        Ok(m)
    }
}
