//! Files written into a run directory.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::other)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// A comma-separated table with a header row.
pub struct Table {
    inner: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> io::Result<Self> {
        let mut inner = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        inner.write_record(header).map_err(io::Error::other)?;
        Ok(Table { inner })
    }

    pub fn row<I, S>(&mut self, cells: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(cells).map_err(io::Error::other)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Polylines as whitespace-separated `u v` pairs, one blank line between
/// components.
pub fn write_polylines(path: &Path, components: &[Vec<(f64, f64)>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, c) in components.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for &(u, v) in c {
            writeln!(w, "{} {}", fmt(u), fmt(v))?;
        }
    }
    w.flush()
}
