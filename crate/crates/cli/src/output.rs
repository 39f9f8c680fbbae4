//! CSV output with a provenance comment line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::Failure;

/// `pb210 <version> <invocation>`, written as a `#` comment first in every
/// output file.
pub fn provenance(invocation: &str) -> String {
    format!("pb210 {} {}", env!("CARGO_PKG_VERSION"), invocation)
}

/// Opens `path`, or stdout when it is `None` or `-`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

/// Writes the provenance line and then `rows` as CSV with a header.
pub fn write_rows<T: Serialize>(path: Option<&Path>, invocation: &str, rows: &[T]) -> Result<(), Failure> {
    let mut out = sink(path)?;
    writeln!(out, "# {}", provenance(invocation)).map_err(Failure::io)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(Failure::runtime)?;
    }
    w.flush().map_err(Failure::io)?;
    Ok(())
}

/// Like [`write_rows`] for rows whose width is only known at run time.
pub fn write_records(
    path: Option<&Path>,
    invocation: &str,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), Failure> {
    let mut out = sink(path)?;
    writeln!(out, "# {}", provenance(invocation)).map_err(Failure::io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(Failure::runtime)?;
    for row in rows {
        w.write_record(&row).map_err(Failure::runtime)?;
    }
    w.flush().map_err(Failure::io)?;
    Ok(())
}

/// Reads a CSV written by this tool (comment lines skipped) into `T` rows.
pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path, flag: &str) -> Result<Vec<T>, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!("{flag}: {} does not exist", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::usage(format!("{flag}: {e}")))?;
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Failure::usage(format!("{flag}: {}: {e}", path.display())))
}
