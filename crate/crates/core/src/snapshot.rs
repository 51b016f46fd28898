//! Binary field snapshots.
//!
//! Each record is a text header line
//! `KSEFIELD v1 n=<n> time=<t> lambda=<λ> name=<id>` followed by `n²`
//! little-endian `f64` physical values in row-major order. A file may hold
//! several records back to back (vector checkpoints store `u1` then `u2`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{KseError, Result};
use crate::field::{Grid, SpectralField};

const MAGIC: &str = "KSEFIELD";
const VERSION: &str = "v1";

/// One decoded snapshot record.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub n: usize,
    pub time: f64,
    pub lambda: f64,
    pub name: String,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn new(field: &SpectralField, time: f64, lambda: f64, name: &str) -> Self {
        Snapshot {
            n: field.grid().n(),
            time,
            lambda,
            name: name.to_string(),
            values: field.values().into_owned(),
        }
    }

    pub fn to_field(&self, grid: &Arc<Grid>) -> Result<SpectralField> {
        if grid.n() != self.n {
            return Err(KseError::GridMismatch(grid.n(), self.n));
        }
        SpectralField::from_physical(Arc::clone(grid), self.values.clone())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if self.name.chars().any(char::is_whitespace) || self.name.is_empty() {
            return Err(KseError::InvalidArgument(format!(
                "snapshot name `{}` must be a non-empty token",
                self.name
            )));
        }
        writeln!(
            w,
            "{MAGIC} {VERSION} n={} time={} lambda={} name={}",
            self.n, self.time, self.lambda, self.name
        )?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

pub fn write_snapshots(path: &Path, records: &[Snapshot]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        r.write_to(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read every record in a snapshot file.
pub fn read_snapshots(path: &Path) -> Result<Vec<Snapshot>> {
    let corrupt = |reason: String| KseError::CorruptSnapshot {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    loop {
        let mut header = String::new();
        if r.read_line(&mut header)? == 0 {
            break;
        }
        let mut parts = header.trim_end_matches('\n').split(' ');
        if parts.next() != Some(MAGIC) || parts.next() != Some(VERSION) {
            return Err(corrupt(format!("bad header `{}`", header.trim_end())));
        }
        let (mut n, mut time, mut lambda, mut name) = (None, None, None, None);
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| corrupt(format!("malformed header token `{part}`")))?;
            let bad = || corrupt(format!("bad value for `{key}`: `{value}`"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "time" => time = Some(value.parse::<f64>().map_err(|_| bad())?),
                "lambda" => lambda = Some(value.parse::<f64>().map_err(|_| bad())?),
                "name" => name = Some(value.to_string()),
                _ => return Err(corrupt(format!("unknown header key `{key}`"))),
            }
        }
        let (Some(n), Some(time), Some(lambda), Some(name)) = (n, time, lambda, name) else {
            return Err(corrupt("header missing n, time, lambda or name".into()));
        };
        let mut bytes = vec![0u8; n * n * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| corrupt(format!("truncated payload for record `{name}`")))?;
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push(Snapshot {
            n,
            time,
            lambda,
            name,
            values,
        });
    }
    if out.is_empty() {
        return Err(corrupt("no records".into()));
    }
    Ok(out)
}
