//! Output helpers: CSV assembly and atomic file writes.

use std::io::Write;
use std::path::Path;

use convwatt_core::{Error, Result};

/// CSV document built row by row; fields are escaped by the csv writer.
pub struct CsvDoc {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvDoc {
    pub fn new(header: &[&str]) -> CsvDoc {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory csv");
        CsvDoc { writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory csv");
    }

    pub fn into_string(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("in-memory csv"))
            .expect("csv output is utf-8")
    }
}

/// Shortest round-trip decimal for data outputs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write to `--out` atomically (temp file in the same directory, then
/// rename), or to stdout when no path was given.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        None => {
            print!("{content}");
            std::io::stdout()
                .flush()
                .map_err(|e| Error::io("<stdout>", e))?;
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
            let mut tmp = match dir {
                Some(dir) => tempfile::NamedTempFile::new_in(dir),
                None => tempfile::NamedTempFile::new_in("."),
            }
            .map_err(|e| Error::io(path, e))?;
            tmp.write_all(content.as_bytes())
                .map_err(|e| Error::io(path, e))?;
            tmp.persist(path)
                .map_err(|e| Error::io(path, e.error))?;
            Ok(())
        }
    }
}
