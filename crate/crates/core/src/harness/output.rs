//! Tab-separated tables and binary field dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::spectral::write_binary;
use crate::FieldPair64;

/// Collects the files written by one scenario member.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    /// Writes a UTF-8 table with a header row.
    pub fn table<I, L>(&mut self, dir: &Path, name: &str, header: &str, lines: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = L>,
        L: AsRef<str>,
    {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "{header}")?;
        for l in lines {
            writeln!(f, "{}", l.as_ref())?;
        }
        f.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    /// Binary dumps `<stem>_eta.bin` and `<stem>_u.bin`.
    pub fn pair(&mut self, dir: &Path, stem: &str, v: &FieldPair64) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (suffix, f) in [("eta", &v.eta), ("u", &v.u)] {
            let path = dir.join(format!("{stem}_{suffix}.bin"));
            write_binary(&path, f)?;
            self.files.push(path);
        }
        Ok(())
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.files.extend(other.files);
    }
}
