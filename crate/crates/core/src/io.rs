//! Versioned CSV exports and the matching readers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::generator::{Outcome, OutcomeSequence};
use crate::stream::MeasureStream;

pub const SCHEMA_VERSION: u32 = 1;

/// First line of every CSV written by this crate.
pub fn header_line() -> String {
    format!(
        "# imprecise-lab v{} schema={SCHEMA_VERSION}",
        env!("CARGO_PKG_VERSION")
    )
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// CSV writer that has already emitted the schema comment.
pub struct CsvSink {
    inner: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl CsvSink {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let mut file = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        writeln!(file, "{}", header_line()).map_err(|e| io_err(path, e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(columns).map_err(|e| io_err(path, e))?;
        Ok(CsvSink {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        let rec: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        self.inner
            .write_record(&rec)
            .map_err(|e| io_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Columns `i, member, p0, .., p{k-1}` for positions `1..=n`.
pub fn write_measures(path: &Path, stream: &dyn MeasureStream, n: u64) -> Result<()> {
    stream.check_horizon(n)?;
    let k = stream.k();
    let mut cols = vec!["i".to_string(), "member".to_string()];
    cols.extend((0..k).map(|j| format!("p{j}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut sink = CsvSink::create(path, &cols)?;
    for i in 1..=n {
        let member = stream.member_at(i);
        let mut row = vec![i.to_string(), member.to_string()];
        row.extend(
            stream
                .credal()
                .member(member)
                .weights()
                .iter()
                .map(f64::to_string),
        );
        sink.row(row)?;
    }
    sink.finish()
}

/// Columns `i, outcome`.
pub fn write_outcomes(path: &Path, seq: &OutcomeSequence) -> Result<()> {
    let mut sink = CsvSink::create(path, &["i", "outcome"])?;
    for (i, o) in seq.outcomes.iter().enumerate() {
        sink.row([(i as u64 + 1).to_string(), o.to_string()])?;
    }
    sink.finish()
}

/// Reads the `outcome` column of a CSV, skipping `#` comment lines.
pub fn read_outcomes(path: &Path) -> Result<Vec<Outcome>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let col = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .position(|h| h == "outcome")
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{}: no `outcome` column", path.display()))
        })?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let field = rec.get(col).unwrap_or("");
        let o = field.trim().parse::<Outcome>().map_err(|_| {
            Error::InvalidArgument(format!(
                "{}: row {}: bad outcome `{field}`",
                path.display(),
                line + 1
            ))
        })?;
        out.push(o);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::sample;
    use crate::stream::CyclicStream;

    #[test]
    fn outcomes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        let seq = sample(&CyclicStream::alternating_coins(), 3, 500).unwrap();
        write_outcomes(&p, &seq).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# imprecise-lab v0.1.0 schema=1\ni,outcome\n1,"));
        assert_eq!(read_outcomes(&p).unwrap(), seq.outcomes);
    }

    #[test]
    fn measures_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_measures(&p, &CyclicStream::alternating_coins(), 3).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "i,member,p0,p1");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("2,1,0.666"));
    }
}
