//! CSV files with a provenance comment line ahead of the header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    /// Creates `dir/name` and writes the comment line, any extra comment
    /// lines, then `header`.
    pub fn create(dir: &Path, name: &str, config_hash: &str, notes: &[&str], header: &[&str]) -> CliResult<Self> {
        let path = dir.join(name);
        let io = |source| CliError::Output {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut file = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(file, "# adpqis {VERSION} config-sha256={config_hash}").map_err(io)?;
        for note in notes {
            writeln!(file, "# {note}").map_err(io)?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(CsvOut { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.writer.flush().map_err(|source| CliError::Output {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Shares joined with `;`.
pub fn shares(v: &[f64]) -> String {
    v.iter().map(|s| format!("{s}")).collect::<Vec<_>>().join(";")
}

/// Reader that skips `#` comment lines.
pub fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = CsvOut::create(dir.path(), "x.csv", "abc", &["note"], &["a", "b"]).unwrap();
        out.row(["1", "2"]).unwrap();
        let path = out.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("# adpqis {VERSION} config-sha256=abc\n# note\na,b\n1,2\n"));
        let mut r = reader(&path).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["a", "b"]);
        assert_eq!(r.records().count(), 1);
    }

    #[test]
    fn share_formatting() {
        assert_eq!(shares(&[0.25, 0.75]), "0.25;0.75");
        assert_eq!(num(1e11), "100000000000");
    }
}
